//! Ladder operators and their compositions on the truncated product space.

use super::sparse::CsrMatrix;
use super::state::StateVector;
use super::{AlgebraError, TruncationSpec};

/// The three single-queue ladder operators.
///
/// - `Create`: append a customer, `|n> -> |n+1>`; at the cutoff the image is
///   dropped (truncated creation).
/// - `Annihilate`: weighted removal, `|n> -> n |n-1>`.
/// - `Serve`: remove one customer if any, `|n> -> |n-1>` for `n > 0`,
///   `|0> -> 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderKind {
    Create,
    Annihilate,
    Serve,
}

/// A square operator on the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    matrix: CsrMatrix,
    trunc: TruncationSpec,
}

impl TruncatedOperator {
    pub fn from_csr(matrix: CsrMatrix, trunc: TruncationSpec) -> Result<Self, AlgebraError> {
        if matrix.nrows() != trunc.state_count() || matrix.ncols() != trunc.state_count() {
            return Err(AlgebraError::Dimension(format!(
                "matrix is {}x{}, state space has {} states",
                matrix.nrows(),
                matrix.ncols(),
                trunc.state_count()
            )));
        }
        Ok(Self { matrix, trunc })
    }

    pub fn identity(trunc: TruncationSpec) -> Self {
        let n = trunc.state_count();
        Self { matrix: CsrMatrix::identity(n), trunc }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn truncation(&self) -> &TruncationSpec {
        &self.trunc
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.matrix.get(row, col)
    }

    pub fn apply(&self, state: &StateVector) -> StateVector {
        let out = self.matrix.matvec(state.values());
        StateVector::new(out, self.trunc.clone()).expect("dimensions match by construction")
    }

    /// Operator composition: `(self ∘ other) |psi> = self (other |psi>)`.
    pub fn compose(&self, other: &TruncatedOperator) -> TruncatedOperator {
        assert_eq!(self.trunc, other.trunc, "compose on mismatched truncations");
        TruncatedOperator {
            matrix: self.matrix.matmul(&other.matrix),
            trunc: self.trunc.clone(),
        }
    }

    pub fn add_scaled(&self, other: &TruncatedOperator, factor: f64) -> TruncatedOperator {
        assert_eq!(self.trunc, other.trunc);
        TruncatedOperator {
            matrix: self.matrix.add_scaled(&other.matrix, factor),
            trunc: self.trunc.clone(),
        }
    }

    pub fn scale(&self, factor: f64) -> TruncatedOperator {
        TruncatedOperator {
            matrix: self.matrix.scale(factor),
            trunc: self.trunc.clone(),
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.matrix.column_sums()
    }
}

/// Build a ladder operator acting on one queue of the product space.
pub fn ladder(kind: LadderKind, queue: usize, trunc: &TruncationSpec) -> TruncatedOperator {
    assert!(queue < trunc.queue_count(), "queue index out of range");
    let states = trunc.state_count();
    let stride = trunc.stride(queue);
    let cutoff = trunc.cutoff(queue);
    let mut triplets = Vec::new();
    for s in 0..states {
        let n = trunc.occupancy_at(s, queue);
        match kind {
            LadderKind::Create => {
                if n < cutoff {
                    triplets.push((s + stride, s, 1.0));
                }
            }
            LadderKind::Annihilate => {
                if n > 0 {
                    triplets.push((s - stride, s, n as f64));
                }
            }
            LadderKind::Serve => {
                if n > 0 {
                    triplets.push((s - stride, s, 1.0));
                }
            }
        }
    }
    TruncatedOperator {
        matrix: CsrMatrix::from_triplets(states, states, triplets),
        trunc: trunc.clone(),
    }
}

/// The busy projector `a+ Q` for one queue: diagonal, 1 on every state where
/// the queue is non-empty.
pub fn busy_projector(queue: usize, trunc: &TruncationSpec) -> TruncatedOperator {
    assert!(queue < trunc.queue_count());
    let states = trunc.state_count();
    let triplets: Vec<_> = (0..states)
        .filter(|&s| trunc.occupancy_at(s, queue) > 0)
        .map(|s| (s, s, 1.0))
        .collect();
    TruncatedOperator {
        matrix: CsrMatrix::from_triplets(states, states, triplets),
        trunc: trunc.clone(),
    }
}
