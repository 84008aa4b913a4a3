//! Exact finite-truncation realization of the network generator.
//!
//! Queue occupancies live on a product space with a per-queue cutoff.
//! Operators are sparse matrices on that space (column convention:
//! `d psi / dt = L psi` with `psi` a column of state probabilities, so
//! generators have zero column sums). Everything the closed forms in
//! [`crate::analytics`] claim can be checked here by brute force at desk
//! scale: stationary states, resolvents, time evolution, and the busy-busy
//! correlation itself.

mod generator;
mod operator;
mod oracle;
mod solve;
mod sparse;
mod state;

pub use generator::build_generator;
pub use operator::{busy_projector, ladder, LadderKind, TruncatedOperator};
pub use oracle::{correlation_oracle, mm1_green_matrix, unit_expectation};
pub use solve::{evolve, resolvent_apply, stationary_exact, DENSE_SOLVE_LIMIT};
pub use sparse::CsrMatrix;
pub use state::{stationary_product_state, StateVector};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),
    #[error("truncated state space has {states} states, above the limit {limit}")]
    StateSpaceTooLarge { states: usize, limit: usize },
    #[error("{operation} requires a {expected:?}-mode generator")]
    WrongBoundaryMode {
        operation: &'static str,
        expected: BoundaryMode,
    },
    #[error("truncated chain is not irreducible: stationary distribution is not unique")]
    NotIrreducible,
    #[error("linear solve failed to reach residual {tolerance:e} (got {residual:e})")]
    SolverFailure { residual: f64, tolerance: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// How the finite cutoff modifies the dynamics at the boundary.
///
/// `Blocking` suppresses any transition that would push a queue past its
/// cutoff, keeping the generator conservative (a proper CTMC, probability
/// preserved). `Leaky` writes down the literal matrix of the
/// second-quantized operator with creation truncated; it loses probability
/// through the boundary and is kept only to exhibit that the operator form
/// and the master equation agree on interior states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    Blocking,
    Leaky,
}

/// Per-queue occupancy cutoffs plus the boundary handling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncationSpec {
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    state_count: usize,
    pub boundary_mode: BoundaryMode,
}

impl TruncationSpec {
    /// Default cap on the truncated state count.
    pub const DEFAULT_STATE_LIMIT: usize = 2_000_000;

    pub fn new(cutoffs: Vec<usize>, boundary_mode: BoundaryMode) -> Result<Self, AlgebraError> {
        Self::with_state_limit(cutoffs, boundary_mode, Self::DEFAULT_STATE_LIMIT)
    }

    pub fn with_state_limit(
        cutoffs: Vec<usize>,
        boundary_mode: BoundaryMode,
        limit: usize,
    ) -> Result<Self, AlgebraError> {
        if cutoffs.is_empty() {
            return Err(AlgebraError::InvalidTruncation("no queues".into()));
        }
        if let Some(bad) = cutoffs.iter().position(|&c| c < 2) {
            return Err(AlgebraError::InvalidTruncation(format!(
                "cutoff for queue {bad} is {} (minimum 2)",
                cutoffs[bad]
            )));
        }
        let mut strides = Vec::with_capacity(cutoffs.len());
        let mut count: usize = 1;
        for &c in &cutoffs {
            strides.push(count);
            count = count
                .checked_mul(c + 1)
                .ok_or(AlgebraError::StateSpaceTooLarge {
                    states: usize::MAX,
                    limit,
                })?;
        }
        if count > limit {
            return Err(AlgebraError::StateSpaceTooLarge { states: count, limit });
        }
        Ok(Self {
            cutoffs,
            strides,
            state_count: count,
            boundary_mode,
        })
    }

    /// Cutoffs that push the per-queue geometric tail mass below 1e-10:
    /// `ceil(ln 1e-10 / ln rho)`, clamped to `[20, 200]`.
    pub fn default_cutoffs(rho: &[f64]) -> Vec<usize> {
        rho.iter()
            .map(|&r| {
                if r <= 0.0 {
                    20
                } else {
                    let raw = (1e-10f64.ln() / r.ln()).ceil();
                    (raw as usize).clamp(20, 200)
                }
            })
            .collect()
    }

    pub fn queue_count(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoff(&self, queue: usize) -> usize {
        self.cutoffs[queue]
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    /// Flat index of an occupancy tuple (queue 0 varies fastest).
    pub fn index_of(&self, occupancy: &[usize]) -> usize {
        debug_assert_eq!(occupancy.len(), self.cutoffs.len());
        occupancy
            .iter()
            .zip(&self.strides)
            .map(|(&n, &s)| n * s)
            .sum()
    }

    /// Occupancy of one queue at a flat state index.
    pub fn occupancy_at(&self, index: usize, queue: usize) -> usize {
        (index / self.strides[queue]) % (self.cutoffs[queue] + 1)
    }

    pub fn unravel(&self, index: usize) -> Vec<usize> {
        (0..self.cutoffs.len())
            .map(|q| self.occupancy_at(index, q))
            .collect()
    }

    pub(crate) fn stride(&self, queue: usize) -> usize {
        self.strides[queue]
    }
}
