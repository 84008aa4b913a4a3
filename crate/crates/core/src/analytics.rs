//! Closed-form Laplace-domain busy-busy correlation formulas.
//!
//! Everything here is built from one object: the root `x(omega)` of
//!
//! ```text
//! omega - mu (x - rho - 1) - mu rho / x = 0
//! ```
//!
//! with the branch that satisfies `x(0) = rho` and `x -> 0` as `omega`
//! grows. The single-queue busy-busy correlation, the zeroth- and
//! first-order cross-queue correlations, and the two bracket factors used
//! for data collapse are all rational expressions in `x`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("the two closed forms of the single-queue correlation disagree at omega = {omega}: {alt} vs {product} (relative {rel:e}); implementation bug")]
    FormMismatch {
        omega: f64,
        alt: f64,
        product: f64,
        rel: f64,
    },
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
}

/// The spectral root `x` together with the parameters that define it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub mu: f64,
    pub rho: f64,
    pub omega: f64,
    pub x: f64,
}

/// Single-queue parameter pair, the arguments of every per-queue factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueParams {
    pub mu: f64,
    pub rho: f64,
}

/// Solve for the decaying root `x(omega)`.
///
/// The quadratic is solved in the conjugate form
/// `x = 2 rho / (s + sqrt(s^2 - 4 rho))`, `s = omega/mu + rho + 1`, whose
/// discriminant is expanded into a sum of nonnegative terms, so no branch of
/// the computation cancels at either end of the frequency range. One Newton
/// polish (fused multiply-add evaluation of the defining quadratic) lands
/// the root within an ulp.
pub fn x_of_omega(mu: f64, rho: f64, omega: f64) -> SpectralPoint {
    debug_assert!(mu > 0.0 && (0.0..1.0).contains(&rho) && omega >= 0.0);
    if omega == 0.0 || rho == 0.0 {
        return SpectralPoint { mu, rho, omega, x: rho };
    }
    let q = omega / mu;
    let s = q + rho + 1.0;
    let disc = q * q + 2.0 * q * (1.0 + rho) + (1.0 - rho) * (1.0 - rho);
    let d = disc.sqrt();
    let mut x = 2.0 * rho / (s + d);
    // Newton on R(x) = -mu x^2 + (omega + mu(rho+1)) x - mu rho.
    let b = omega + mu * (rho + 1.0);
    for _ in 0..2 {
        let inner = (-mu).mul_add(x, b); // b - mu x
        let r = inner.mul_add(x, -(mu * rho)); // (b - mu x) x - mu rho
        let slope = (-2.0 * mu).mul_add(x, b); // b - 2 mu x > 0 at this root
        if slope != 0.0 {
            x -= r / slope;
        }
    }
    // The decaying branch stays inside (0, rho].
    x = x.clamp(f64::MIN_POSITIVE, rho);
    SpectralPoint { mu, rho, omega, x }
}

impl SpectralPoint {
    /// `(rho - x) / omega`, evaluated without cancellation and finite in the
    /// `omega -> 0` limit (where it tends to `rho / (mu (1 - rho))`).
    ///
    /// Uses the exact identity
    /// `rho - x = 4 rho (omega/mu) / ((d - u)(s + d))` with
    /// `u = omega/mu + rho - 1`, valid whenever `u <= 0`; for `u > 0` the
    /// direct difference is already safe.
    pub fn gap_over_omega(&self) -> f64 {
        if self.rho == 0.0 {
            return 0.0;
        }
        let q = self.omega / self.mu;
        let u = q + self.rho - 1.0;
        if u <= 0.0 {
            let s = q + self.rho + 1.0;
            let disc =
                q * q + 2.0 * q * (1.0 + self.rho) + (1.0 - self.rho) * (1.0 - self.rho);
            let d = disc.sqrt();
            4.0 * self.rho / (self.mu * (d - u) * (s + d))
        } else {
            (self.rho - self.x) / self.omega
        }
    }

    /// Defining-equation residual `|omega - mu (x - rho - 1) - mu rho / x|`,
    /// accumulated in compensated (double-double) arithmetic so it measures
    /// the root itself rather than evaluation round-off.
    pub fn residual(&self) -> f64 {
        if self.omega == 0.0 {
            return if self.x == self.rho {
                0.0
            } else {
                (self.mu * (self.x - self.rho)).abs()
            };
        }
        // omega - mu x + mu rho + mu - mu rho / x, term by term.
        let mut acc = (self.omega, 0.0);
        let (p, pe) = two_prod(self.mu, self.x);
        acc = dd_add(acc, (-p, -pe));
        let (p, pe) = two_prod(self.mu, self.rho);
        acc = dd_add(acc, (p, pe));
        acc = dd_add(acc, (self.mu, 0.0));
        // mu rho / x as a double-double quotient.
        let (num, num_e) = two_prod(self.mu, self.rho);
        let q0 = num / self.x;
        let rem = (-q0).mul_add(self.x, num) + num_e;
        let q1 = rem / self.x;
        acc = dd_add(acc, (-q0, -q1));
        (acc.0 + acc.1).abs()
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

fn dd_add(acc: (f64, f64), v: (f64, f64)) -> (f64, f64) {
    let (s, e) = two_sum(acc.0, v.0);
    (s, acc.1 + v.1 + e)
}

/// Relative tolerance for the agreement of the two closed forms.
pub const FORM_AGREEMENT_TOL: f64 = 1e-12;

/// Single-queue busy-busy correlation `C(omega)` in the Laplace domain.
///
/// Evaluates the alternative-form expression
/// `rho (x / (mu rho (1 - x)) + x / omega)` and, independently, the product
/// form `rho * x (rho + rho x - x) / (mu rho (1 - x)(rho - x))`; the two are
/// algebraically identical, so any disagreement beyond round-off signals an
/// implementation bug and is returned as [`AnalyticsError::FormMismatch`].
pub fn mm1_busy_corr(mu: f64, rho: f64, omega: f64) -> Result<f64, AnalyticsError> {
    if rho == 0.0 {
        return Ok(0.0); // a never-busy queue has no correlation mass
    }
    let sp = x_of_omega(mu, rho, omega);
    let x = sp.x;
    let alt = rho * (x / (mu * rho * (1.0 - x)) + x / omega);
    let gap = sp.gap_over_omega() * omega; // rho - x, cancellation-free
    let product = rho * (x * (rho + rho * x - x)) / (mu * rho * (1.0 - x) * gap);
    let scale = alt.abs().max(product.abs()).max(f64::MIN_POSITIVE);
    let rel = (alt - product).abs() / scale;
    if rel > FORM_AGREEMENT_TOL {
        return Err(AnalyticsError::FormMismatch { omega, alt, product, rel });
    }
    Ok(alt)
}

/// Zeroth-order cross-queue correlation: `rho_alpha rho_beta / omega`.
pub fn c0_cross(rho_alpha: f64, rho_beta: f64, omega: f64) -> f64 {
    rho_alpha * rho_beta / omega
}

/// First factor of the first-order term:
/// `(rho - x)/omega - x / (mu rho (1 - x))`. Finite as `omega -> 0`.
pub fn bracket_a(mu: f64, rho: f64, omega: f64) -> f64 {
    if rho == 0.0 {
        return -1.0 / (omega + mu); // rho -> 0 limit: single-customer decay
    }
    let sp = x_of_omega(mu, rho, omega);
    sp.gap_over_omega() - sp.x / (mu * rho * (1.0 - sp.x))
}

/// Second factor of the first-order term:
/// `x / (mu rho (1 - x)) + (x - rho)/omega`.
///
/// The two brackets are exposed separately because the type-2 data collapse
/// normalizes measured correlations by their product.
pub fn bracket_b(mu: f64, rho: f64, omega: f64) -> f64 {
    if rho == 0.0 {
        return 1.0 / (omega + mu);
    }
    let sp = x_of_omega(mu, rho, omega);
    sp.x / (mu * rho * (1.0 - sp.x)) - sp.gap_over_omega()
}

/// Cross-queue busy-busy correlation through first order:
///
/// ```text
/// C_ab(omega) = rho_a rho_b / omega
///             + epsilon rho_b deltaL[b->a] B(mu_a, rho_a) B(mu_b, rho_b)
/// ```
///
/// where `B` is [`bracket_b`] and `deltaL[b->a] = + r[b->a] mu_b >= 0`.
///
/// Sign bookkeeping, confirmed against the exact truncated-generator
/// computation: with a nonnegative coupling the first-order factor attached
/// to the observed queue `alpha` enters as `-bracket_a = +bracket_b`, not as
/// the literal `bracket_a`; the perturbing operator carries an overall minus
/// that must not be dropped. The correction is then positive (a queue that
/// feeds another raises their correlation above independence), and the
/// residual against the exact curve shrinks quadratically in the coupling;
/// with the opposite orientation it shrinks only linearly, which the
/// acceptance suite rejects.
pub fn cross_corr_first_order(
    alpha: QueueParams,
    beta: QueueParams,
    delta_l_beta_alpha: f64,
    epsilon: f64,
    omega: f64,
) -> f64 {
    c0_cross(alpha.rho, beta.rho, omega)
        + epsilon
            * beta.rho
            * delta_l_beta_alpha
            * bracket_b(alpha.mu, alpha.rho, omega)
            * bracket_b(beta.mu, beta.rho, omega)
}

/// The coefficient multiplying `epsilon * deltaL[b->a]` in the first-order
/// term; the divisor of the type-2 data collapse.
pub fn first_order_coefficient(alpha: QueueParams, beta: QueueParams, omega: f64) -> f64 {
    beta.rho * bracket_b(alpha.mu, alpha.rho, omega) * bracket_b(beta.mu, beta.rho, omega)
}

/// Mean busy period of a queue, `1 / (mu (1 - rho))`.
///
/// For a queue embedded in a network this is unchanged by the coupling to
/// every order of the perturbation, which the simulator verifies directly.
pub fn mean_busy_period(mu: f64, rho: f64) -> f64 {
    1.0 / (mu * (1.0 - rho))
}

/// Where a correlation curve came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    TheoryOrder0,
    TheoryOrder1,
    Oracle,
    Simulation,
}

/// A sampled correlation curve for one ordered queue pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    pub alpha: usize,
    pub beta: usize,
    pub omegas: Vec<f64>,
    pub values: Vec<f64>,
    /// Per-point statistical error; required for simulation curves.
    pub stderr: Option<Vec<f64>>,
    pub provenance: Provenance,
}

impl CorrelationCurve {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if self.omegas.len() != self.values.len() {
            return Err(AnalyticsError::InvalidCurve(
                "omega and value lengths differ".into(),
            ));
        }
        if !self.omegas.windows(2).all(|w| w[0] < w[1]) {
            return Err(AnalyticsError::InvalidCurve(
                "omega grid must be strictly increasing".into(),
            ));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(AnalyticsError::InvalidCurve("non-finite value".into()));
        }
        match (&self.stderr, self.provenance) {
            (None, Provenance::Simulation) => Err(AnalyticsError::InvalidCurve(
                "simulation curves require stderr".into(),
            )),
            (Some(e), _) if e.len() != self.values.len() => Err(
                AnalyticsError::InvalidCurve("stderr length mismatch".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// Log-spaced grid of `count` points on `[lo, hi]`, inclusive of both ends.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count)
        .map(|k| {
            if k == count - 1 {
                hi
            } else {
                lo * (step * k as f64).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const COMBOS: [(f64, f64); 4] = [(1.0, 0.3), (1.0, 0.7), (0.5, 0.5), (2.0, 0.9)];

    #[test]
    fn root_at_zero_frequency_is_rho() {
        for &(mu, rho) in &COMBOS {
            let sp = x_of_omega(mu, rho, 0.0);
            assert_eq!(sp.x, rho);
            assert!(sp.residual() <= 1e-14 * mu);
        }
    }

    #[test]
    fn root_reference_value() {
        // mu = 1, rho = 0.5, omega = 1: x = (2.5 - sqrt(4.25)) / 2.
        let sp = x_of_omega(1.0, 0.5, 1.0);
        assert_abs_diff_eq!(sp.x, 0.219_223_593_595_584_85, epsilon = 1e-15);
        assert!(sp.residual() <= 1e-12);
    }

    #[test]
    fn root_large_frequency_asymptote() {
        // x -> mu rho / omega as omega -> infinity.
        for &(mu, rho) in &COMBOS {
            let omega = 1e9;
            let sp = x_of_omega(mu, rho, omega);
            let asymptote = mu * rho / omega;
            assert!((sp.x - asymptote).abs() <= 1e-6 * asymptote);
        }
    }

    #[test]
    fn root_residual_and_bounds_on_grid() {
        for &(mu, rho) in &COMBOS {
            let mut prev = f64::INFINITY;
            for &omega in &log_grid(1e-3, 1e3, 60) {
                let sp = x_of_omega(mu, rho, omega);
                assert!(sp.x > 0.0 && sp.x < rho, "x out of range at omega {omega}");
                assert!(
                    sp.residual() <= 1e-12 * mu,
                    "residual {:e} at mu {mu} rho {rho} omega {omega}",
                    sp.residual()
                );
                assert!(sp.x < prev, "x must decrease in omega");
                prev = sp.x;
            }
        }
    }

    #[test]
    fn gap_over_omega_limits() {
        for &(mu, rho) in &COMBOS {
            // omega -> 0 limit is rho / (mu (1 - rho)).
            let sp = x_of_omega(mu, rho, 1e-12);
            let limit = rho / (mu * (1.0 - rho));
            assert!((sp.gap_over_omega() - limit).abs() <= 1e-9 * limit);
            // Consistency with the direct difference at moderate omega.
            let sp = x_of_omega(mu, rho, 2.0);
            let direct = (rho - sp.x) / 2.0;
            assert_abs_diff_eq!(sp.gap_over_omega(), direct, epsilon = 1e-13);
        }
    }

    #[test]
    fn busy_corr_reference_value() {
        let c = mm1_busy_corr(1.0, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(c, 0.390_388_203_202_207_56, epsilon = 1e-13);
    }

    #[test]
    fn busy_corr_two_forms_agree_on_grid() {
        for &(mu, rho) in &COMBOS {
            for &omega in &log_grid(1e-3, 1e3, 60) {
                mm1_busy_corr(mu, rho, omega).unwrap();
            }
        }
    }

    #[test]
    fn busy_corr_limits() {
        for &(mu, rho) in &COMBOS {
            let low = 1e-8 * mm1_busy_corr(mu, rho, 1e-8).unwrap();
            assert_abs_diff_eq!(low, rho * rho, epsilon = 1e-6);
            let high = 1e8 * mm1_busy_corr(mu, rho, 1e8).unwrap();
            assert_abs_diff_eq!(high, rho, epsilon = 1e-6);
        }
    }

    #[test]
    fn scaled_busy_corr_monotone_between_limits() {
        // omega * C(omega) runs from rho^2 up to rho; check it never leaves
        // that band and increases across the interior grid.
        for &(mu, rho) in &COMBOS {
            let grid = log_grid(1e-3, 1e3, 60);
            let mut prev = rho * rho - 1e-12;
            for &omega in &grid {
                let scaled = omega * mm1_busy_corr(mu, rho, omega).unwrap();
                assert!(
                    scaled > prev - 1e-12,
                    "omega*C not monotone at mu {mu} rho {rho} omega {omega}"
                );
                assert!(scaled <= rho + 1e-12 && scaled >= rho * rho - 1e-12);
                prev = scaled;
            }
        }
    }

    #[test]
    fn c0_cross_examples() {
        assert_abs_diff_eq!(c0_cross(0.3, 0.7, 1.0), 0.21, epsilon = 1e-15);
        assert_eq!(c0_cross(0.4, 0.6, 2.0), c0_cross(0.6, 0.4, 2.0));
        assert_eq!(c0_cross(0.0, 0.7, 1.0), 0.0);
    }

    #[test]
    fn brackets_are_negatives_for_equal_arguments() {
        for &(mu, rho) in &COMBOS {
            for &omega in &[1e-6, 0.02, 1.0, 50.0] {
                let a = bracket_a(mu, rho, omega);
                let b = bracket_b(mu, rho, omega);
                assert_abs_diff_eq!(a + b, 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn bracket_a_finite_at_small_omega() {
        // The 1/omega pole cancels: (rho - x) is O(omega).
        let tiny = bracket_a(0.3, 0.3, 1e-12);
        let limit = 0.3 / (0.3 * 0.7) - 0.3 / (0.3 * 0.3 * 0.7);
        assert!((tiny - limit).abs() <= 1e-6 * limit.abs());
        assert!(tiny.is_finite());
    }

    #[test]
    fn empty_queue_limits_are_finite() {
        assert_eq!(mm1_busy_corr(2.0, 0.0, 0.5).unwrap(), 0.0);
        // rho -> 0 continuity of the brackets.
        let limit = bracket_b(1.0, 0.0, 0.5);
        let near = bracket_b(1.0, 1e-9, 0.5);
        assert_abs_diff_eq!(limit, 1.0 / 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(near, limit, epsilon = 1e-6);
        assert_abs_diff_eq!(bracket_a(1.0, 0.0, 0.5), -limit, epsilon = 1e-12);
    }

    #[test]
    fn first_order_decoupled_limit() {
        let a = QueueParams { mu: 0.3, rho: 0.3 };
        let b = QueueParams { mu: 0.2, rho: 0.7 };
        let c = cross_corr_first_order(a, b, 0.0, 1.0, 0.5);
        assert_abs_diff_eq!(c, c0_cross(0.3, 0.7, 0.5), epsilon = 1e-15);
    }

    #[test]
    fn first_order_pole_cancellation() {
        // omega * C_ab -> rho_a rho_b as omega -> 0.
        let a = QueueParams { mu: 0.3, rho: 0.3 };
        let b = QueueParams { mu: 0.2, rho: 0.7 };
        let omega = 1e-10;
        let c = cross_corr_first_order(a, b, 0.06, 1.0, omega);
        assert_abs_diff_eq!(omega * c, 0.21, epsilon = 1e-6);
    }

    #[test]
    fn mean_busy_period_values() {
        assert_abs_diff_eq!(mean_busy_period(1.0, 0.5), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mean_busy_period(0.5, 1e-9), 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(mean_busy_period(0.3, 0.3), 1.0 / 0.21, epsilon = 1e-12);
    }

    #[test]
    fn curve_validation() {
        let mut curve = CorrelationCurve {
            alpha: 0,
            beta: 1,
            omegas: vec![0.1, 1.0, 10.0],
            values: vec![1.0, 0.5, 0.1],
            stderr: None,
            provenance: Provenance::TheoryOrder0,
        };
        curve.validate().unwrap();
        curve.provenance = Provenance::Simulation;
        assert!(curve.validate().is_err());
        curve.stderr = Some(vec![0.01, 0.01, 0.01]);
        curve.validate().unwrap();
        curve.omegas[2] = 1.0; // not strictly increasing
        assert!(curve.validate().is_err());
    }
}
