//! Brute-force correlation values and the normal-ordered single-queue
//! Green's function, the two cross-checks for every closed form.

use nalgebra::DMatrix;

use super::generator::build_generator;
use super::operator::TruncatedOperator;
use super::solve::{resolvent_apply, stationary_exact};
use super::sparse::CsrMatrix;
use super::state::StateVector;
use super::{AlgebraError, BoundaryMode, TruncationSpec};
use crate::analytics::x_of_omega;
use crate::network::NetworkSpec;

/// Exact busy-busy correlation on the truncated space:
///
/// ```text
/// C_ab(omega) = <I| P_a (omega I - L)^{-1} P_b psi_ss
/// ```
///
/// with `P_eta` the busy projector of queue `eta` and `psi_ss` the exact
/// stationary vector of the truncated chain. `alpha == beta` is allowed.
pub fn correlation_oracle(
    spec: &NetworkSpec,
    trunc: &TruncationSpec,
    alpha: usize,
    beta: usize,
    omega: f64,
) -> Result<f64, AlgebraError> {
    if trunc.boundary_mode != BoundaryMode::Blocking {
        return Err(AlgebraError::WrongBoundaryMode {
            operation: "correlation_oracle",
            expected: BoundaryMode::Blocking,
        });
    }
    if alpha >= spec.n || beta >= spec.n {
        return Err(AlgebraError::InvalidParameter(format!(
            "queue pair ({alpha}, {beta}) out of range for {} queues",
            spec.n
        )));
    }
    let gen = build_generator(spec, trunc)?;
    let psi = stationary_exact(&gen)?;
    let seeded = psi.project_busy(beta);
    let propagated = resolvent_apply(&gen, omega, &seeded)?;
    Ok(propagated.busy_mass(alpha))
}

/// The normal-ordered single-queue Green's function as an explicit matrix:
///
/// ```text
/// g(omega) = x/(mu rho) (1 - x a+)^{-1} (1 + x/(rho - x) (1 - a+ Q)) (1 - x Q / rho)^{-1}
/// ```
///
/// with each geometric operator series expanded to the cutoff. Matrix
/// elements `<m|g|n>` with `m, n` well below the cutoff are exact: the
/// expansions only involve finitely many terms there.
pub fn mm1_green_matrix(mu: f64, rho: f64, omega: f64, cutoff: usize) -> TruncatedOperator {
    assert!(mu > 0.0 && rho > 0.0 && rho < 1.0 && omega > 0.0);
    let sp = x_of_omega(mu, rho, omega);
    let x = sp.x;
    let y = x / rho;
    let dim = cutoff + 1;
    // (1 - x a+)^{-1}: lower triangular, entry (m, k) = x^{m-k}.
    let mut left = DMatrix::zeros(dim, dim);
    for m in 0..dim {
        for k in 0..=m {
            left[(m, k)] = x.powi((m - k) as i32);
        }
    }
    // (1 + c (1 - a+Q)) (1 - x Q/rho)^{-1}: upper triangular (k, n) = y^{n-k},
    // plus the projector |0><0| picks out its first row scaled by c.
    let gap = sp.gap_over_omega() * omega; // rho - x, cancellation-free
    let c = x / gap;
    let mut right = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        for n in k..dim {
            right[(k, n)] = y.powi((n - k) as i32);
        }
    }
    for n in 0..dim {
        right[(0, n)] += c * y.powi(n as i32);
    }
    let green = left * right * (x / (mu * rho));
    let trunc = TruncationSpec::new(vec![cutoff], BoundaryMode::Blocking)
        .expect("cutoff >= 2 checked by caller");
    TruncatedOperator::from_csr(CsrMatrix::from_dense(&green, 0.0), trunc)
        .expect("square by construction")
}

/// Unit-bra expectation `<I| O |psi>`.
pub fn unit_expectation(op: &TruncatedOperator, psi: &StateVector) -> f64 {
    op.apply(psi).total_mass()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{ladder, LadderKind};
    use crate::analytics::mm1_busy_corr;
    use approx::assert_abs_diff_eq;

    fn single_queue(mu: f64, rho: f64) -> NetworkSpec {
        NetworkSpec::from_rho(vec![mu], vec![0.0], vec![rho]).unwrap()
    }

    #[test]
    fn decoupled_queues_factorize() {
        let spec = NetworkSpec::from_rho(
            vec![1.0, 0.5],
            vec![0.0; 4],
            vec![0.4, 0.6],
        )
        .unwrap();
        let t = TruncationSpec::new(vec![60, 60], BoundaryMode::Blocking).unwrap();
        for &omega in &[0.2, 1.0] {
            let c = correlation_oracle(&spec, &t, 0, 1, omega).unwrap();
            assert_abs_diff_eq!(c, 0.4 * 0.6 / omega, epsilon = 1e-6);
        }
    }

    #[test]
    fn single_queue_matches_closed_form() {
        let spec = single_queue(1.0, 0.5);
        let t = TruncationSpec::new(vec![200], BoundaryMode::Blocking).unwrap();
        let oracle = correlation_oracle(&spec, &t, 0, 0, 1.0).unwrap();
        assert_abs_diff_eq!(oracle, 0.390_388_203_202_207_56, epsilon = 1e-6);
        assert_abs_diff_eq!(oracle, mm1_busy_corr(1.0, 0.5, 1.0).unwrap(), epsilon = 1e-6);
    }

    #[test]
    fn green_corner_element_closed_form() {
        // <0|g|0> = (x/(mu rho)) (1 + x/(rho - x)).
        for &omega in &[0.1, 1.0, 10.0] {
            let (mu, rho) = (1.0, 0.5);
            let g = mm1_green_matrix(mu, rho, omega, 40);
            let sp = x_of_omega(mu, rho, omega);
            let expected = (sp.x / (mu * rho)) * (1.0 + sp.x / (rho - sp.x));
            assert_abs_diff_eq!(g.get(0, 0), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn green_matches_resolvent_columns() {
        let (mu, rho) = (1.0, 0.5);
        let spec = single_queue(mu, rho);
        let cutoff = 200;
        let t = TruncationSpec::new(vec![cutoff], BoundaryMode::Blocking).unwrap();
        let gen = build_generator(&spec, &t).unwrap();
        let g = mm1_green_matrix(mu, rho, 1.0, cutoff);
        for n in 0..=5usize {
            let e_n = StateVector::delta(&[n], t.clone());
            let col = resolvent_apply(&gen, 1.0, &e_n).unwrap();
            for m in 0..=5usize {
                assert!(
                    (col.values()[m] - g.get(m, n)).abs() <= 1e-8,
                    "element ({m},{n})"
                );
            }
        }
    }

    #[test]
    fn green_high_frequency_is_scaled_identity() {
        let omega = 1e8;
        let g = mm1_green_matrix(1.0, 0.5, omega, 20);
        for n in 0..=3usize {
            assert!((g.get(n, n) - 1.0 / omega).abs() <= 1e-6 / omega);
            if n > 0 {
                assert!(g.get(n, n - 1).abs() <= 1e-6 / omega);
                assert!(g.get(n - 1, n).abs() <= 1e-6 / omega);
            }
        }
    }

    #[test]
    fn unit_expectation_reads_busy_fraction() {
        let t = TruncationSpec::new(vec![80], BoundaryMode::Blocking).unwrap();
        let psi = super::super::state::stationary_product_state(&[0.3], &t);
        let proj = ladder(LadderKind::Create, 0, &t).compose(&ladder(LadderKind::Serve, 0, &t));
        assert_abs_diff_eq!(unit_expectation(&proj, &psi), 0.3, epsilon = 1e-10);
    }
}
