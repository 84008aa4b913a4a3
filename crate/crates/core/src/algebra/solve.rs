//! Linear-algebra workhorses on the truncated space: stationary
//! distributions, resolvent solves, and uniformized time evolution.

use nalgebra::DVector;

use super::operator::TruncatedOperator;
use super::state::StateVector;
use super::{AlgebraError, BoundaryMode};

/// Above this state count the stationary solve switches from a dense LU to
/// power iteration on the uniformized chain.
pub const DENSE_SOLVE_LIMIT: usize = 2500;

const RESOLVENT_TOL: f64 = 1e-10;

/// The probability vector in the kernel of a blocking-mode generator,
/// normalized to total mass 1.
///
/// Small systems go through a dense LU on the generator with the last row
/// replaced by the normalization; that system is nonsingular exactly when
/// the stationary distribution is unique, so a singular factorization is
/// reported as [`AlgebraError::NotIrreducible`]. Larger systems fall back to
/// power iteration on the uniformized transition matrix.
pub fn stationary_exact(gen: &TruncatedOperator) -> Result<StateVector, AlgebraError> {
    require_blocking(gen, "stationary_exact")?;
    let m = gen.truncation().state_count();
    if m <= DENSE_SOLVE_LIMIT {
        stationary_dense(gen)
    } else {
        stationary_power(gen)
    }
}

fn stationary_dense(gen: &TruncatedOperator) -> Result<StateVector, AlgebraError> {
    let m = gen.truncation().state_count();
    let mut a = gen.matrix().to_dense();
    for c in 0..m {
        a[(m - 1, c)] = 1.0;
    }
    let mut b = DVector::zeros(m);
    b[m - 1] = 1.0;
    let lu = a.lu();
    let psi = lu.solve(&b).ok_or(AlgebraError::NotIrreducible)?;
    let mut values: Vec<f64> = psi.iter().copied().collect();
    // A clean kernel vector is nonnegative up to round-off; anything beyond
    // that means the replaced row hid a second recurrent class.
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-9 {
        return Err(AlgebraError::NotIrreducible);
    }
    for v in &mut values {
        *v = v.max(0.0);
    }
    let mass: f64 = values.iter().sum();
    for v in &mut values {
        *v /= mass;
    }
    let state = StateVector::new(values, gen.truncation().clone())?;
    let rate = gen.matrix().max_abs_diag().max(1.0);
    let residual = gen.apply(&state).linf();
    if residual > 1e-10 * rate {
        return Err(AlgebraError::SolverFailure {
            residual,
            tolerance: 1e-10 * rate,
        });
    }
    Ok(state)
}

fn stationary_power(gen: &TruncatedOperator) -> Result<StateVector, AlgebraError> {
    let m = gen.truncation().state_count();
    let lam = gen.matrix().max_abs_diag();
    if lam == 0.0 {
        // Zero generator: every vector is stationary only if the chain never
        // moves; the uniform start is as good as any, but this cannot define
        // a unique law on more than one state.
        return Err(AlgebraError::NotIrreducible);
    }
    let mut psi = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    let tol = 1e-12 * lam;
    for sweep in 0..200_000usize {
        // One uniformized step: psi <- psi + (L psi)/lam.
        gen.matrix().matvec_into(&psi, &mut next);
        let mut residual = 0.0f64;
        for i in 0..m {
            residual = residual.max(next[i].abs());
            next[i] = psi[i] + next[i] / lam;
        }
        std::mem::swap(&mut psi, &mut next);
        if residual <= tol && sweep > 10 {
            let mass: f64 = psi.iter().sum();
            for v in &mut psi {
                *v /= mass;
            }
            return StateVector::new(psi, gen.truncation().clone());
        }
    }
    let residual = {
        let state = StateVector::new(psi, gen.truncation().clone())?;
        gen.apply(&state).linf()
    };
    Err(AlgebraError::SolverFailure { residual, tolerance: tol })
}

/// Solve `(omega I - L) u = v` for `omega > 0`.
///
/// Uses the uniformized Neumann series
/// `(omega I - L)^{-1} = 1/(omega + lam) sum_k (lam/(omega + lam))^k P^k`
/// with `P = I + L/lam` substochastic, which converges geometrically for
/// any conservative or leaky generator; the result is then refined until
/// the true residual is below `1e-10 ||v||`.
pub fn resolvent_apply(
    gen: &TruncatedOperator,
    omega: f64,
    v: &StateVector,
) -> Result<StateVector, AlgebraError> {
    if !(omega > 0.0) {
        return Err(AlgebraError::InvalidParameter(format!(
            "resolvent requires omega > 0, got {omega}"
        )));
    }
    let scale = v.linf();
    if scale == 0.0 {
        return Ok(StateVector::zeros(gen.truncation().clone()));
    }
    let tol = RESOLVENT_TOL * scale;
    let mut u = neumann_solve(gen, omega, v.values(), tol)?;
    for _ in 0..5 {
        let residual_vec = residual(gen, omega, &u, v.values());
        let res_norm = linf(&residual_vec);
        if res_norm <= tol {
            return StateVector::new(u, gen.truncation().clone());
        }
        let correction = neumann_solve(gen, omega, &residual_vec, res_norm * 1e-6)?;
        for (ui, ci) in u.iter_mut().zip(&correction) {
            *ui += ci;
        }
    }
    let res_norm = linf(&residual(gen, omega, &u, v.values()));
    if res_norm <= tol {
        StateVector::new(u, gen.truncation().clone())
    } else {
        Err(AlgebraError::SolverFailure { residual: res_norm, tolerance: tol })
    }
}

fn neumann_solve(
    gen: &TruncatedOperator,
    omega: f64,
    v: &[f64],
    tail_tol: f64,
) -> Result<Vec<f64>, AlgebraError> {
    let m = v.len();
    let lam = gen.matrix().max_abs_diag();
    if lam == 0.0 {
        return Ok(v.iter().map(|&x| x / omega).collect());
    }
    let ratio = lam / (omega + lam);
    let mut term = v.to_vec();
    let mut acc = v.to_vec();
    let mut scratch = vec![0.0; m];
    // Tail bound: remaining mass <= ||term|| ratio/(1-ratio) in the
    // accumulator scale; stop once that is safely below the target.
    let tail_target = tail_tol * (omega + lam) * 0.5;
    let max_iter = 20_000_000usize;
    for _ in 0..max_iter {
        let norm = linf(&term);
        if norm * ratio / (1.0 - ratio) <= tail_target {
            for a in &mut acc {
                *a /= omega + lam;
            }
            return Ok(acc);
        }
        gen.matrix().matvec_into(&term, &mut scratch);
        for i in 0..m {
            term[i] = ratio * (term[i] + scratch[i] / lam);
            acc[i] += term[i];
        }
    }
    Err(AlgebraError::SolverFailure {
        residual: linf(&term),
        tolerance: tail_target,
    })
}

fn residual(gen: &TruncatedOperator, omega: f64, u: &[f64], v: &[f64]) -> Vec<f64> {
    let lu = gen.matrix().matvec(u);
    (0..u.len()).map(|i| v[i] - omega * u[i] + lu[i]).collect()
}

fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Evolve a state by `exp(t L)` with uniformization: the Poisson-weighted
/// power series of `P = I + L/lam`, truncated once the remaining Poisson
/// mass is below `1e-10`. Long horizons are split into steps so the series
/// never needs more than a hundred or so terms.
pub fn evolve(
    gen: &TruncatedOperator,
    state: &StateVector,
    t: f64,
) -> Result<StateVector, AlgebraError> {
    require_blocking(gen, "evolve")?;
    if !(t >= 0.0) {
        return Err(AlgebraError::InvalidParameter(format!(
            "evolve requires t >= 0, got {t}"
        )));
    }
    let lam = gen.matrix().max_abs_diag();
    if t == 0.0 || lam == 0.0 {
        return Ok(state.clone());
    }
    let steps = (lam * t / 50.0).ceil().max(1.0) as usize;
    let tau = t / steps as f64;
    let step_tol = 1e-10 / steps as f64;
    let m = state.values().len();
    let mut psi = state.values().to_vec();
    let mut term = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    for _ in 0..steps {
        let a = lam * tau;
        let mut weight = (-a).exp();
        let mut cumulative = weight;
        term.copy_from_slice(&psi);
        let mut acc: Vec<f64> = term.iter().map(|&x| x * weight).collect();
        let mut k = 0usize;
        while cumulative < 1.0 - step_tol {
            k += 1;
            // term <- P term
            gen.matrix().matvec_into(&term, &mut scratch);
            for i in 0..m {
                term[i] += scratch[i] / lam;
            }
            weight *= a / k as f64;
            cumulative += weight;
            for i in 0..m {
                acc[i] += weight * term[i];
            }
            if k > 100_000 {
                return Err(AlgebraError::SolverFailure {
                    residual: 1.0 - cumulative,
                    tolerance: step_tol,
                });
            }
        }
        psi.copy_from_slice(&acc);
    }
    StateVector::new(psi, gen.truncation().clone())
}

fn require_blocking(gen: &TruncatedOperator, operation: &'static str) -> Result<(), AlgebraError> {
    if gen.truncation().boundary_mode != BoundaryMode::Blocking {
        return Err(AlgebraError::WrongBoundaryMode {
            operation,
            expected: BoundaryMode::Blocking,
        });
    }
    Ok(())
}

/// Dense materialization helper for tests and small cross-checks.
#[cfg(test)]
fn dense_of(gen: &TruncatedOperator) -> nalgebra::DMatrix<f64> {
    gen.matrix().to_dense()
}
