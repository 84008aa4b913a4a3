//! The network generator on the truncated space.

use super::operator::TruncatedOperator;
use super::sparse::CsrMatrix;
use super::{AlgebraError, BoundaryMode, TruncationSpec};
use crate::network::NetworkSpec;

/// Build the generator of the open network on the truncated space.
///
/// In `Blocking` mode this is the conservative CTMC generator: from a state
/// `n`, external arrivals enter queue `j` at rate `gamma_j` (suppressed when
/// `n_j` is at its cutoff), and a busy queue `i` completes service at rate
/// `mu_i`, routing to queue `j` at rate `mu_i r[i->j]` (suppressed when `j`
/// is full) or leaving the network at rate `mu_i (1 - sum_j r[i->j])`.
/// Column sums are exactly zero.
///
/// In `Leaky` mode it is the literal matrix of the second-quantized operator
/// `sum_ij (1 - a+_j) L_ij [Q_i - rho_i]` with creation truncated at the
/// cutoff; probability leaks through the boundary, but every column whose
/// source state is strictly below cutoff in all coordinates matches the
/// blocking generator.
pub fn build_generator(
    spec: &NetworkSpec,
    trunc: &TruncationSpec,
) -> Result<TruncatedOperator, AlgebraError> {
    if spec.n != trunc.queue_count() {
        return Err(AlgebraError::Dimension(format!(
            "network has {} queues, truncation has {}",
            spec.n,
            trunc.queue_count()
        )));
    }
    let matrix = match trunc.boundary_mode {
        BoundaryMode::Blocking => blocking_matrix(spec, trunc),
        BoundaryMode::Leaky => leaky_matrix(spec, trunc),
    };
    TruncatedOperator::from_csr(matrix, trunc.clone())
}

fn blocking_matrix(spec: &NetworkSpec, trunc: &TruncationSpec) -> CsrMatrix {
    let n = spec.n;
    let states = trunc.state_count();
    let mut triplets = Vec::new();
    for s in 0..states {
        let mut outflow = 0.0;
        // External arrivals.
        for j in 0..n {
            if spec.gamma[j] > 0.0 && trunc.occupancy_at(s, j) < trunc.cutoff(j) {
                triplets.push((s + trunc.stride(j), s, spec.gamma[j]));
                outflow += spec.gamma[j];
            }
        }
        // Service completions.
        for i in 0..n {
            if trunc.occupancy_at(s, i) == 0 {
                continue;
            }
            let exit_rate = spec.mu[i] * spec.exit_probability(i);
            if exit_rate > 0.0 {
                triplets.push((s - trunc.stride(i), s, exit_rate));
                outflow += exit_rate;
            }
            for j in 0..n {
                if j == i {
                    continue; // self-routing leaves the state unchanged
                }
                let rate = spec.mu[i] * spec.routing_at(i, j);
                if rate > 0.0 && trunc.occupancy_at(s, j) < trunc.cutoff(j) {
                    triplets.push((s - trunc.stride(i) + trunc.stride(j), s, rate));
                    outflow += rate;
                }
            }
        }
        if outflow != 0.0 {
            triplets.push((s, s, -outflow));
        }
    }
    CsrMatrix::from_triplets(states, states, triplets)
}

fn leaky_matrix(spec: &NetworkSpec, trunc: &TruncationSpec) -> CsrMatrix {
    let n = spec.n;
    let states = trunc.state_count();
    let mut triplets = Vec::new();
    // L_ij (Q_i - rho_i) - L_ij a+_j (Q_i - rho_i), assembled per state.
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            let l_ij = (delta - spec.routing_at(i, j)) * spec.mu[i];
            if l_ij == 0.0 {
                continue;
            }
            let rho_i = spec.rho[i];
            for s in 0..states {
                let n_i = trunc.occupancy_at(s, i);
                let n_j = trunc.occupancy_at(s, j);
                // + L_ij Q_i
                if n_i > 0 {
                    triplets.push((s - trunc.stride(i), s, l_ij));
                }
                // - L_ij rho_i
                if rho_i != 0.0 {
                    triplets.push((s, s, -l_ij * rho_i));
                }
                // - L_ij a+_j Q_i  (creation after service; truncated)
                if n_i > 0 {
                    let after = s - trunc.stride(i);
                    let n_j_after = if i == j { n_j - 1 } else { n_j };
                    if n_j_after < trunc.cutoff(j) {
                        triplets.push((after + trunc.stride(j), s, -l_ij));
                    }
                }
                // + L_ij rho_i a+_j
                if rho_i != 0.0 && n_j < trunc.cutoff(j) {
                    triplets.push((s + trunc.stride(j), s, l_ij * rho_i));
                }
            }
        }
    }
    CsrMatrix::from_triplets(states, states, triplets)
}
