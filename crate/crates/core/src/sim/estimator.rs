//! On-the-fly Laplace transforms of the busy indicators.
//!
//! For each probed frequency the simulation maintains, per source queue
//! `beta`, the exponential average
//!
//! ```text
//! B_beta(omega, T) = integral_0^inf b_beta(T - t) e^{-omega t} dt
//! ```
//!
//! and, per ordered pair `(alpha, beta)`, the running integral of
//! `b_alpha(T) B_beta(omega, T)`. Both update in closed form across an
//! inter-event interval because the indicators are constant there.

/// `(1 - e^{-omega dt}) / omega`, the one-sided exponential window weight.
#[inline]
pub fn decay_integral(omega: f64, dt: f64) -> f64 {
    -(-omega * dt).exp_m1() / omega
}

/// `dt - (1 - e^{-omega dt})/omega`, the weight of the product term; series
/// branch keeps it accurate when `omega dt` is tiny.
#[inline]
pub fn residual_integral(omega: f64, dt: f64) -> f64 {
    let z = omega * dt;
    if z < 1e-3 {
        // dt (z/2 - z^2/6 + z^3/24 - z^4/120)
        dt * z * (0.5 - z * (1.0 / 6.0 - z * (1.0 / 24.0 - z / 120.0)))
    } else {
        dt - decay_integral(omega, dt)
    }
}

/// One exponential-average update over an interval of length `dt` during
/// which the indicator holds the value it took just after the opening event:
/// `B <- e^{-omega dt} B + (1 - e^{-omega dt})/omega * b`.
#[inline]
pub fn exp_avg_step(omega: f64, dt: f64, avg: f64, indicator: f64) -> f64 {
    (-omega * dt).exp() * avg + decay_integral(omega, dt) * indicator
}

/// Increment of the correlation integral over the same interval:
/// `b_alpha B (1-e^{-omega dt})/omega + b_alpha b_beta/omega (dt - (1-e^{-omega dt})/omega)`.
#[inline]
pub fn integral_increment(
    omega: f64,
    dt: f64,
    b_alpha: f64,
    b_beta: f64,
    avg_at_start: f64,
) -> f64 {
    b_alpha * avg_at_start * decay_integral(omega, dt)
        + b_alpha * b_beta / omega * residual_integral(omega, dt)
}

/// All accumulators for one trajectory segment.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    omegas: Vec<f64>,
    /// Source queues that appear as `beta` in some pair, deduplicated.
    betas: Vec<usize>,
    /// (alpha, position of beta in `betas`).
    pairs: Vec<(usize, usize)>,
    /// `exp_avg[b * n_omega + w]` for `betas[b]`, `omegas[w]`.
    exp_avg: Vec<f64>,
    /// `integral[p * n_omega + w]` for `pairs[p]`, `omegas[w]`.
    integral: Vec<f64>,
}

impl EstimatorState {
    pub fn new(omegas: &[f64], pairs: &[(usize, usize)]) -> Self {
        let mut betas: Vec<usize> = pairs.iter().map(|&(_, b)| b).collect();
        betas.sort_unstable();
        betas.dedup();
        let pair_slots: Vec<(usize, usize)> = pairs
            .iter()
            .map(|&(a, b)| (a, betas.binary_search(&b).unwrap()))
            .collect();
        Self {
            omegas: omegas.to_vec(),
            exp_avg: vec![0.0; betas.len() * omegas.len()],
            integral: vec![0.0; pair_slots.len() * omegas.len()],
            betas,
            pairs: pair_slots,
        }
    }

    /// Advance across an interval of length `dt` with the given busy
    /// indicators, accumulating the correlation integrals.
    pub fn advance(&mut self, dt: f64, busy: &[bool]) {
        self.step(dt, busy, true);
    }

    /// Advance the exponential averages only; used during warmup so the
    /// averages carry history before measurement starts.
    pub fn advance_warmup(&mut self, dt: f64, busy: &[bool]) {
        self.step(dt, busy, false);
    }

    fn step(&mut self, dt: f64, busy: &[bool], accumulate: bool) {
        if dt <= 0.0 {
            return;
        }
        let nw = self.omegas.len();
        for (w, &omega) in self.omegas.iter().enumerate() {
            let decay = (-omega * dt).exp();
            let window = -(-omega * dt).exp_m1() / omega;
            let residual = residual_integral(omega, dt);
            if accumulate {
                for (p, &(alpha, beta_slot)) in self.pairs.iter().enumerate() {
                    let b_alpha = if busy[alpha] { 1.0 } else { 0.0 };
                    if b_alpha == 0.0 {
                        continue;
                    }
                    let b_beta = if busy[self.betas[beta_slot]] { 1.0 } else { 0.0 };
                    let avg = self.exp_avg[beta_slot * nw + w];
                    self.integral[p * nw + w] +=
                        b_alpha * (avg * window + b_beta / omega * residual);
                }
            }
            for (slot, &beta) in self.betas.iter().enumerate() {
                let b = if busy[beta] { 1.0 } else { 0.0 };
                let avg = &mut self.exp_avg[slot * nw + w];
                *avg = decay * *avg + window * b;
            }
        }
    }

    pub fn exp_avg(&self, beta: usize, omega_idx: usize) -> f64 {
        let slot = self.betas.binary_search(&beta).expect("beta not tracked");
        self.exp_avg[slot * self.omegas.len() + omega_idx]
    }

    pub fn integral(&self, pair_idx: usize, omega_idx: usize) -> f64 {
        self.integral[pair_idx * self.omegas.len() + omega_idx]
    }
}
