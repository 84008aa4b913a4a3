//! Dense weight vectors on the truncated product space.

use super::{AlgebraError, TruncationSpec};

/// A dense real-weighted vector indexed by occupancy tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    values: Vec<f64>,
    trunc: TruncationSpec,
}

impl StateVector {
    pub fn new(values: Vec<f64>, trunc: TruncationSpec) -> Result<Self, AlgebraError> {
        if values.len() != trunc.state_count() {
            return Err(AlgebraError::Dimension(format!(
                "vector has {} entries, state space has {}",
                values.len(),
                trunc.state_count()
            )));
        }
        Ok(Self { values, trunc })
    }

    pub fn zeros(trunc: TruncationSpec) -> Self {
        let n = trunc.state_count();
        Self { values: vec![0.0; n], trunc }
    }

    /// Point mass on one occupancy tuple.
    pub fn delta(occupancy: &[usize], trunc: TruncationSpec) -> Self {
        let mut v = Self::zeros(trunc);
        let idx = v.trunc.index_of(occupancy);
        v.values[idx] = 1.0;
        v
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn truncation(&self) -> &TruncationSpec {
        &self.trunc
    }

    /// The all-ones functional: `<I|psi>`, total mass.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Mass on states where `queue` is non-empty (the busy expectation).
    pub fn busy_mass(&self, queue: usize) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(idx, _)| self.trunc.occupancy_at(*idx, queue) > 0)
            .map(|(_, v)| v)
            .sum()
    }

    /// Zero out every state where `queue` is empty (apply the busy projector).
    pub fn project_busy(&self, queue: usize) -> Self {
        let mut out = self.clone();
        for (idx, v) in out.values.iter_mut().enumerate() {
            if self.trunc.occupancy_at(idx, queue) == 0 {
                *v = 0.0;
            }
        }
        out
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// Probability-vector invariant: entries above `-1e-14` and total mass
    /// within `tail_tol` below 1.
    pub fn check_probability(&self, tail_tol: f64) -> Result<(), AlgebraError> {
        if self.min_entry() < -1e-14 {
            return Err(AlgebraError::InvalidParameter(format!(
                "negative probability entry {:e}",
                self.min_entry()
            )));
        }
        let mass = self.total_mass();
        if mass < 1.0 - tail_tol || mass > 1.0 + 1e-12 {
            return Err(AlgebraError::InvalidParameter(format!(
                "total mass {mass} outside [1 - {tail_tol:e}, 1]"
            )));
        }
        Ok(())
    }
}

/// Product of per-queue geometric distributions `(1 - rho) rho^n`,
/// renormalized over the truncated range. The exact stationary law of the
/// open network restricted to the box, and the initial sampler's target.
pub fn stationary_product_state(rho: &[f64], trunc: &TruncationSpec) -> StateVector {
    assert_eq!(rho.len(), trunc.queue_count());
    let per_queue: Vec<Vec<f64>> = rho
        .iter()
        .enumerate()
        .map(|(q, &r)| {
            let n = trunc.cutoff(q) + 1;
            let mut w: Vec<f64> = (0..n).map(|k| r.powi(k as i32)).collect();
            let norm: f64 = w.iter().sum();
            for v in &mut w {
                *v /= norm;
            }
            w
        })
        .collect();
    let mut values = vec![0.0; trunc.state_count()];
    for (idx, v) in values.iter_mut().enumerate() {
        let mut p = 1.0;
        for (q, weights) in per_queue.iter().enumerate() {
            p *= weights[trunc.occupancy_at(idx, q)];
        }
        *v = p;
    }
    StateVector { values, trunc: trunc.clone() }
}
