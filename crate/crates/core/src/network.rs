//! Open Jackson network model and the traffic (flow-balance) relations.
//!
//! A network is `n` exponential-service queues with service rates `mu[i]`,
//! Markovian routing probabilities `r[i -> j]`, and external Poisson arrival
//! rates `gamma[j]`. Flow balance ties the per-queue utilizations `rho[i]`
//! to the external rates through
//!
//! ```text
//! sum_i (delta_ij - r[i -> j]) mu_i rho_i = gamma_j
//! ```
//!
//! [`gamma_from_rho`] evaluates this forward, [`solve_traffic`] inverts it.
//! [`NetworkSpec`] stores both sides consistently.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Tolerance for the flow-balance residual in invariant checks.
pub const TRAFFIC_TOL: f64 = 1e-10;

/// Round-off slack on feasibility checks (`gamma >= 0`, row sums `<= 1`).
const SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("gamma[{queue}] = {value:e} is negative: requested utilizations are infeasible for this routing and service rates")]
    NegativeExternalRate { queue: usize, value: f64 },
    #[error("traffic equations give rho[{queue}] = {value} >= 1: network unstable")]
    Unstable { queue: usize, value: f64 },
    #[error("routing is not open: customers reaching queue {queue} can never exit (spectral radius >= 1)")]
    SingularRouting { queue: usize },
    #[error("self-routing r[{queue} -> {queue}] > 0 is outside the zero-diagonal families the perturbation coupling is defined for")]
    SelfRouting { queue: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// An open Jackson network, with the traffic equations already solved: both
/// `gamma` and `rho` are stored and consistent to within [`TRAFFIC_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub n: usize,
    /// Per-queue service rate, events per unit time.
    pub mu: Vec<f64>,
    /// Row-major routing probabilities, `routing[i * n + j] = r[i -> j]`.
    pub routing: Vec<f64>,
    /// Per-queue external Poisson arrival rate.
    pub gamma: Vec<f64>,
    /// Per-queue utilization, the long-run busy fraction.
    pub rho: Vec<f64>,
}

impl NetworkSpec {
    /// Build a network from utilizations; the external rates are derived.
    pub fn from_rho(
        mu: Vec<f64>,
        routing: Vec<f64>,
        rho: Vec<f64>,
    ) -> Result<Self, NetworkError> {
        check_shapes(&mu, &routing, rho.len())?;
        check_routing(&mu, &routing)?;
        for (i, &r) in rho.iter().enumerate() {
            if !(0.0..1.0).contains(&r) {
                return Err(NetworkError::InvalidParameter(format!(
                    "rho[{i}] = {r} outside [0, 1)"
                )));
            }
        }
        let gamma = gamma_from_rho(&mu, &routing, &rho)?;
        Ok(Self {
            n: mu.len(),
            mu,
            routing,
            gamma,
            rho,
        })
    }

    /// Build a network from external arrival rates; utilizations are solved
    /// from the traffic equations.
    pub fn from_gamma(
        mu: Vec<f64>,
        routing: Vec<f64>,
        gamma: Vec<f64>,
    ) -> Result<Self, NetworkError> {
        check_shapes(&mu, &routing, gamma.len())?;
        check_routing(&mu, &routing)?;
        let rho = solve_traffic(&mu, &routing, &gamma)?;
        Ok(Self {
            n: mu.len(),
            mu,
            routing,
            gamma,
            rho,
        })
    }

    pub fn routing_at(&self, from: usize, to: usize) -> f64 {
        self.routing[from * self.n + to]
    }

    /// Probability that a customer completing service at `i` leaves the network.
    pub fn exit_probability(&self, i: usize) -> f64 {
        let row: f64 = self.routing[i * self.n..(i + 1) * self.n].iter().sum();
        1.0 - row
    }

    /// Check every invariant and report all violations; an empty report
    /// means the spec is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut report = Vec::new();
        let n = self.n;
        for i in 0..n {
            if self.mu[i] <= 0.0 {
                report.push(Violation::NonPositiveServiceRate {
                    queue: i,
                    value: self.mu[i],
                });
            }
            let mut row_sum = 0.0;
            for j in 0..n {
                let r = self.routing_at(i, j);
                if r < 0.0 {
                    report.push(Violation::NegativeRoutingEntry {
                        from: i,
                        to: j,
                        value: r,
                    });
                }
                row_sum += r;
            }
            if row_sum > 1.0 + SLACK {
                report.push(Violation::RowSumExceedsOne { row: i, sum: row_sum });
            }
        }
        if let Err(q) = openness(&self.routing, n) {
            report.push(Violation::ClosedRouting { queue: q });
        }
        for j in 0..n {
            if self.gamma[j] < -SLACK {
                report.push(Violation::NegativeExternalRate {
                    queue: j,
                    value: self.gamma[j],
                });
            }
        }
        for i in 0..n {
            if self.rho[i] < 0.0 {
                report.push(Violation::NegativeUtilization {
                    queue: i,
                    value: self.rho[i],
                });
            } else if self.rho[i] >= 1.0 {
                report.push(Violation::UnstableUtilization {
                    queue: i,
                    value: self.rho[i],
                });
            }
        }
        // Flow balance residual, one check per queue.
        for j in 0..n {
            let mut flow = self.mu[j] * self.rho[j];
            for i in 0..n {
                flow -= self.routing_at(i, j) * self.mu[i] * self.rho[i];
            }
            let residual = flow - self.gamma[j];
            if residual.abs() > TRAFFIC_TOL {
                report.push(Violation::TrafficResidual { queue: j, residual });
            }
        }
        report
    }
}

/// A single violated invariant of a [`NetworkSpec`]; queue indices print
/// 1-based to match the external file formats.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveServiceRate { queue: usize, value: f64 },
    NegativeRoutingEntry { from: usize, to: usize, value: f64 },
    RowSumExceedsOne { row: usize, sum: f64 },
    ClosedRouting { queue: usize },
    NegativeExternalRate { queue: usize, value: f64 },
    NegativeUtilization { queue: usize, value: f64 },
    UnstableUtilization { queue: usize, value: f64 },
    TrafficResidual { queue: usize, residual: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Violation::NonPositiveServiceRate { queue, value } => {
                write!(f, "mu[{}] = {} must be positive", queue + 1, value)
            }
            Violation::NegativeRoutingEntry { from, to, value } => {
                write!(f, "routing[{} -> {}] = {} is negative", from + 1, to + 1, value)
            }
            Violation::RowSumExceedsOne { row, sum } => {
                write!(f, "routing row {} sums to {} > 1", row + 1, sum)
            }
            Violation::ClosedRouting { queue } => {
                write!(f, "queue {} cannot reach a network exit", queue + 1)
            }
            Violation::NegativeExternalRate { queue, value } => {
                write!(f, "gamma[{}] = {} is negative", queue + 1, value)
            }
            Violation::NegativeUtilization { queue, value } => {
                write!(f, "rho[{}] = {} is negative", queue + 1, value)
            }
            Violation::UnstableUtilization { queue, value } => {
                write!(f, "rho[{}] = {} >= 1: unstable", queue + 1, value)
            }
            Violation::TrafficResidual { queue, residual } => {
                write!(f, "flow balance at queue {} violated by {:e}", queue + 1, residual)
            }
        }
    }
}

/// Forward traffic relation: `gamma_j = mu_j rho_j - sum_i r[i->j] mu_i rho_i`.
///
/// Fails with [`NetworkError::NegativeExternalRate`] when the requested
/// utilizations cannot be produced by any nonnegative external rates; values
/// in `[-1e-12, 0)` are treated as round-off and clamped to zero.
pub fn gamma_from_rho(
    mu: &[f64],
    routing: &[f64],
    rho: &[f64],
) -> Result<Vec<f64>, NetworkError> {
    let n = mu.len();
    let mut gamma = vec![0.0; n];
    for j in 0..n {
        let mut g = mu[j] * rho[j];
        for i in 0..n {
            g -= routing[i * n + j] * mu[i] * rho[i];
        }
        if g < -SLACK {
            return Err(NetworkError::NegativeExternalRate { queue: j, value: g });
        }
        gamma[j] = g.max(0.0);
    }
    Ok(gamma)
}

/// Inverse traffic relation: the unique `rho` with
/// `sum_i (delta_ij - r[i->j]) mu_i rho_i = gamma_j`, by dense direct solve.
pub fn solve_traffic(
    mu: &[f64],
    routing: &[f64],
    gamma: &[f64],
) -> Result<Vec<f64>, NetworkError> {
    let n = mu.len();
    for (j, &g) in gamma.iter().enumerate() {
        if g < 0.0 {
            return Err(NetworkError::NegativeExternalRate { queue: j, value: g });
        }
    }
    openness(routing, n).map_err(|q| NetworkError::SingularRouting { queue: q })?;
    // Coefficient matrix of the linear system in rho: A[j][i] = L[i][j].
    let a = DMatrix::from_fn(n, n, |j, i| {
        let delta = if i == j { 1.0 } else { 0.0 };
        (delta - routing[i * n + j]) * mu[i]
    });
    let b = DVector::from_column_slice(gamma);
    let lu = a.lu();
    let rho = lu
        .solve(&b)
        .ok_or(NetworkError::SingularRouting { queue: 0 })?;
    let rho: Vec<f64> = rho.iter().copied().collect();
    for (i, &r) in rho.iter().enumerate() {
        if r >= 1.0 {
            return Err(NetworkError::Unstable { queue: i, value: r });
        }
        if r < -SLACK {
            return Err(NetworkError::InvalidParameter(format!(
                "traffic solve produced rho[{i}] = {r} < 0"
            )));
        }
    }
    Ok(rho.iter().map(|&r| r.max(0.0)).collect())
}

impl NetworkSpec {
    /// Assemble a spec for diagnostics without gating on the invariants:
    /// the missing side of the traffic equations is derived leniently
    /// (negative rates and unstable utilizations are kept, not rejected), so
    /// [`NetworkSpec::validate`] can report every violation at once. Only
    /// shape errors and a singular traffic matrix still fail.
    pub fn assemble_lenient(
        mu: Vec<f64>,
        routing: Vec<f64>,
        gamma: Option<Vec<f64>>,
        rho: Option<Vec<f64>>,
    ) -> Result<Self, NetworkError> {
        let n = mu.len();
        let given_len = gamma.as_ref().or(rho.as_ref()).map_or(0, Vec::len);
        check_lengths(&mu, &routing, given_len)?;
        let (gamma, rho) = match (gamma, rho) {
            (Some(g), None) => {
                let a = DMatrix::from_fn(n, n, |j, i| {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    (delta - routing[i * n + j]) * mu[i]
                });
                let solved = a
                    .lu()
                    .solve(&DVector::from_column_slice(&g))
                    .ok_or(NetworkError::SingularRouting { queue: 0 })?;
                (g, solved.iter().copied().collect())
            }
            (None, Some(r)) => {
                let g = (0..n)
                    .map(|j| {
                        let mut flow = mu[j] * r[j];
                        for i in 0..n {
                            flow -= routing[i * n + j] * mu[i] * r[i];
                        }
                        flow
                    })
                    .collect();
                (g, r)
            }
            _ => {
                return Err(NetworkError::InvalidParameter(
                    "exactly one of gamma or rho must be given".into(),
                ))
            }
        };
        Ok(Self { n, mu, routing, gamma, rho })
    }
}

/// First-order coupling between queues: `delta_l[beta][alpha] = r[beta->alpha] mu_beta`,
/// with the bookkeeping expansion parameter `epsilon` (1 for the physical network).
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationCoupling {
    pub n: usize,
    /// Row-major, `delta_l[beta * n + alpha]`, rate units, zero diagonal.
    pub delta_l: Vec<f64>,
    pub epsilon: f64,
}

impl PerturbationCoupling {
    /// Extract the coupling from a network spec. Rejects self-routing: the
    /// first-order correlation formulas are derived for zero-diagonal routing.
    pub fn from_spec(spec: &NetworkSpec) -> Result<Self, NetworkError> {
        Self::with_epsilon(spec, 1.0)
    }

    pub fn with_epsilon(spec: &NetworkSpec, epsilon: f64) -> Result<Self, NetworkError> {
        let n = spec.n;
        for i in 0..n {
            if spec.routing_at(i, i) > 0.0 {
                return Err(NetworkError::SelfRouting { queue: i });
            }
        }
        let mut delta_l = vec![0.0; n * n];
        for beta in 0..n {
            for alpha in 0..n {
                delta_l[beta * n + alpha] = spec.routing_at(beta, alpha) * spec.mu[beta];
            }
        }
        Ok(Self { n, delta_l, epsilon })
    }

    /// `delta_l[beta -> alpha]`: the rate at which queue `beta` feeds `alpha`.
    pub fn delta(&self, beta: usize, alpha: usize) -> f64 {
        self.delta_l[beta * self.n + alpha]
    }
}

fn check_lengths(mu: &[f64], routing: &[f64], rates_len: usize) -> Result<(), NetworkError> {
    let n = mu.len();
    if n == 0 {
        return Err(NetworkError::InvalidParameter("empty network".into()));
    }
    if routing.len() != n * n {
        return Err(NetworkError::InvalidParameter(format!(
            "routing has {} entries, expected {}",
            routing.len(),
            n * n
        )));
    }
    if rates_len != n {
        return Err(NetworkError::InvalidParameter(format!(
            "rate vector has {rates_len} entries, expected {n}"
        )));
    }
    Ok(())
}

fn check_shapes(mu: &[f64], routing: &[f64], rates_len: usize) -> Result<(), NetworkError> {
    check_lengths(mu, routing, rates_len)?;
    for (i, &m) in mu.iter().enumerate() {
        if !(m > 0.0) || !m.is_finite() {
            return Err(NetworkError::InvalidParameter(format!(
                "mu[{i}] = {m} must be positive and finite"
            )));
        }
    }
    Ok(())
}

fn check_routing(mu: &[f64], routing: &[f64]) -> Result<(), NetworkError> {
    let n = mu.len();
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            let r = routing[i * n + j];
            if r < 0.0 {
                return Err(NetworkError::InvalidParameter(format!(
                    "routing[{i} -> {j}] = {r} is negative"
                )));
            }
            row_sum += r;
        }
        if row_sum > 1.0 + SLACK {
            return Err(NetworkError::InvalidParameter(format!(
                "routing row {i} sums to {row_sum} > 1"
            )));
        }
    }
    openness(routing, n).map_err(|q| NetworkError::SingularRouting { queue: q })
}

/// Openness of the routing graph, decided exactly: the spectral radius of a
/// substochastic matrix is below 1 iff every queue can reach one with a
/// positive exit probability. Returns the first queue that cannot.
fn openness(routing: &[f64], n: usize) -> Result<(), usize> {
    let mut can_exit = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    for i in 0..n {
        let row: f64 = routing[i * n..(i + 1) * n].iter().sum();
        if row < 1.0 - SLACK {
            can_exit[i] = true;
            stack.push(i);
        }
    }
    // Walk routing edges backwards from the exiting set.
    while let Some(j) = stack.pop() {
        for i in 0..n {
            if !can_exit[i] && routing[i * n + j] > 0.0 {
                can_exit[i] = true;
                stack.push(i);
            }
        }
    }
    match can_exit.iter().position(|&ok| !ok) {
        None => Ok(()),
        Some(q) => Err(q),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// The two-queue benchmark family: routing [[0, p], [2p, 0]],
    /// rho = (0.3, 0.7), mu = (0.3, 0.2).
    fn two_queue_family(p: f64) -> NetworkSpec {
        NetworkSpec::from_rho(
            vec![0.3, 0.2],
            vec![0.0, p, 2.0 * p, 0.0],
            vec![0.3, 0.7],
        )
        .unwrap()
    }

    fn defz_residual(spec: &NetworkSpec) -> f64 {
        (0..spec.n)
            .map(|j| {
                let mut flow = spec.mu[j] * spec.rho[j];
                for i in 0..spec.n {
                    flow -= spec.routing_at(i, j) * spec.mu[i] * spec.rho[i];
                }
                (flow - spec.gamma[j]).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn gamma_of_benchmark_family() {
        let spec = two_queue_family(0.1);
        assert_abs_diff_eq!(spec.gamma[0], 0.062, epsilon = 1e-15);
        assert_abs_diff_eq!(spec.gamma[1], 0.131, epsilon = 1e-15);
        assert!(defz_residual(&spec) <= 1e-12);
    }

    #[test]
    fn gamma_decoupled_queues() {
        let gamma = gamma_from_rho(&[1.5, 0.4], &[0.0; 4], &[0.25, 0.5]).unwrap();
        assert_eq!(gamma, vec![1.5 * 0.25, 0.4 * 0.5]);
    }

    #[test]
    fn gamma_at_feasibility_boundary() {
        // p = 0.32 leaves gamma_1 barely positive; p = 0.33 crosses zero.
        let spec = two_queue_family(0.32);
        let expected = 0.3 * 0.3 - 2.0 * 0.32 * 0.2 * 0.7;
        assert!(expected > 0.0);
        assert_abs_diff_eq!(spec.gamma[0], expected, epsilon = 1e-15);
        assert!(defz_residual(&spec) <= 1e-12);

        let err = NetworkSpec::from_rho(
            vec![0.3, 0.2],
            vec![0.0, 0.33, 0.66, 0.0],
            vec![0.3, 0.7],
        )
        .unwrap_err();
        assert!(matches!(err, NetworkError::NegativeExternalRate { queue: 0, .. }));
    }

    #[test]
    fn traffic_round_trip_benchmark() {
        let spec = two_queue_family(0.1);
        let rho = solve_traffic(&spec.mu, &spec.routing, &spec.gamma).unwrap();
        assert_abs_diff_eq!(rho[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(rho[1], 0.7, epsilon = 1e-12);
    }

    #[test]
    fn traffic_decoupled_and_empty() {
        let rho = solve_traffic(&[2.0, 0.5], &[0.0; 4], &[0.5, 0.2]).unwrap();
        assert_abs_diff_eq!(rho[0], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(rho[1], 0.4, epsilon = 1e-14);

        let rho = solve_traffic(&[2.0, 0.5], &[0.0, 0.3, 0.4, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(rho, vec![0.0, 0.0]);
    }

    #[test]
    fn traffic_flags_instability() {
        let err = solve_traffic(&[1.0], &[0.0], &[1.2]).unwrap_err();
        assert!(matches!(err, NetworkError::Unstable { queue: 0, .. }));
    }

    #[test]
    fn closed_routing_rejected() {
        // Queue 1 routes everything to itself: no exit reachable.
        let err = NetworkSpec::from_gamma(
            vec![1.0, 1.0],
            vec![0.0, 0.5, 0.0, 1.0],
            vec![0.1, 0.1],
        )
        .unwrap_err();
        assert_eq!(err, NetworkError::SingularRouting { queue: 1 });
    }

    #[test]
    fn validate_accepts_benchmark() {
        assert!(two_queue_family(0.1).validate().is_empty());
    }

    #[test]
    fn validate_names_bad_row() {
        let mut spec = two_queue_family(0.1);
        spec.routing = vec![0.0, 0.7, 0.5, 0.5]; // row 1 sums to 1.2 via constructor bypass
        spec.routing[0] = 0.5; // row 0: 0.5 + 0.7 = 1.2
        let report = spec.validate();
        assert!(report
            .iter()
            .any(|v| matches!(v, Violation::RowSumExceedsOne { row: 0, sum } if (*sum - 1.2).abs() < 1e-12)));
    }

    #[test]
    fn validate_names_unstable_queue() {
        let mut spec = two_queue_family(0.1);
        spec.rho = vec![0.3, 1.1];
        let report = spec.validate();
        assert!(report
            .iter()
            .any(|v| matches!(v, Violation::UnstableUtilization { queue: 1, value } if *value == 1.1)));
        // The display is 1-based, naming "queue 2".
        let text: Vec<String> = report.iter().map(|v| v.to_string()).collect();
        assert!(text.iter().any(|s| s.contains("rho[2]")));
    }

    #[test]
    fn coupling_of_benchmark() {
        let spec = two_queue_family(0.1);
        let coupling = PerturbationCoupling::from_spec(&spec).unwrap();
        assert_abs_diff_eq!(coupling.delta(0, 1), 0.1 * 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(coupling.delta(1, 0), 0.2 * 0.2, epsilon = 1e-15);
        assert_eq!(coupling.delta(0, 0), 0.0);
        assert_eq!(coupling.epsilon, 1.0);
    }

    #[test]
    fn coupling_rejects_self_routing() {
        let spec = NetworkSpec::from_rho(vec![1.0], vec![0.2], vec![0.5]).unwrap();
        assert_eq!(
            PerturbationCoupling::from_spec(&spec).unwrap_err(),
            NetworkError::SelfRouting { queue: 0 }
        );
    }

    #[test]
    fn self_routing_accepted_by_network() {
        // Self-routing only lowers the effective service rate; the traffic
        // equations still solve.
        let spec = NetworkSpec::from_rho(vec![1.0], vec![0.2], vec![0.5]).unwrap();
        assert_abs_diff_eq!(spec.gamma[0], 0.5 - 0.2 * 0.5, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn round_trip_random_specs(
            n in 1usize..=8,
            seed_mu in proptest::collection::vec(0.1f64..2.0, 8),
            seed_rho in proptest::collection::vec(0.0f64..0.95, 8),
            seed_routing in proptest::collection::vec(0.0f64..1.0, 64),
        ) {
            let mu = seed_mu[..n].to_vec();
            let rho = seed_rho[..n].to_vec();
            let mut routing = vec![0.0; n * n];
            for i in 0..n {
                let raw = &seed_routing[i * n..i * n + n];
                let total: f64 = raw.iter().sum();
                // Scale rows to sum at most 0.9 so the network stays open.
                let scale = if total > 0.0 { 0.9 / total.max(1.0) } else { 0.0 };
                for j in 0..n {
                    if i != j {
                        routing[i * n + j] = raw[j] * scale;
                    }
                }
            }
            if let Ok(gamma) = gamma_from_rho(&mu, &routing, &rho) {
                let back = solve_traffic(&mu, &routing, &gamma).unwrap();
                for i in 0..n {
                    prop_assert!((back[i] - rho[i]).abs() <= 1e-10);
                }
            }
        }

        #[test]
        fn gamma_is_linear_in_rho(
            a in -1.5f64..1.5,
            b in -1.5f64..1.5,
            r1 in proptest::collection::vec(0.0f64..0.9, 3),
            r2 in proptest::collection::vec(0.0f64..0.9, 3),
        ) {
            let mu = [0.5, 1.0, 1.5];
            let routing = [
                0.0, 0.2, 0.1,
                0.3, 0.0, 0.2,
                0.1, 0.1, 0.0,
            ];
            // Linearity of the raw map, sidestepping the feasibility gate.
            let apply = |rho: &[f64]| -> Vec<f64> {
                (0..3).map(|j| {
                    let mut g = mu[j] * rho[j];
                    for i in 0..3 {
                        g -= routing[i * 3 + j] * mu[i] * rho[i];
                    }
                    g
                }).collect()
            };
            let mixed: Vec<f64> = (0..3).map(|i| a * r1[i] + b * r2[i]).collect();
            let lhs = apply(&mixed);
            let g1 = apply(&r1);
            let g2 = apply(&r2);
            for j in 0..3 {
                prop_assert!((lhs[j] - (a * g1[j] + b * g2[j])).abs() <= 1e-14);
            }
        }
    }
}
