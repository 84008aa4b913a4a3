//! The curve-source registry.
//!
//! Every way of producing a correlation curve (zeroth- and first-order
//! closed forms, the exact truncated-space computation, the event-driven
//! simulation) sits behind one trait, registered by name. Subcommands pick
//! sources from the registry at runtime, and all of them emit the same
//! result-row schema, so their outputs are directly comparable.

use crate::config::RunConfig;
use crate::csv::{sort_rows, ResultRow, Source};
use crate::error::CliError;
use jacksonnet::algebra::{
    build_generator, resolvent_apply, stationary_exact,
};
use jacksonnet::analytics::{c0_cross, cross_corr_first_order, mm1_busy_corr, QueueParams};
use jacksonnet::network::PerturbationCoupling;

pub trait CurveSource {
    /// Registry key; also the `source` column value of every row produced.
    fn name(&self) -> &'static str;
    /// Evaluate the probe grid of the config and return sorted rows.
    fn produce(&self, cfg: &RunConfig) -> Result<Vec<ResultRow>, CliError>;
}

/// All known sources, in registry order.
pub fn registry() -> Vec<Box<dyn CurveSource>> {
    vec![
        Box::new(ZerothOrderTheory),
        Box::new(FirstOrderTheory),
        Box::new(TruncatedOracle),
        Box::new(EventSimulation),
    ]
}

pub fn source_by_name(name: &str) -> Option<Box<dyn CurveSource>> {
    registry().into_iter().find(|s| s.name() == name)
}

/// `theory0`: the decoupled-network curves. Diagonal pairs get the exact
/// single-queue correlation, off-diagonal pairs the product
/// `rho_a rho_b / omega`.
pub struct ZerothOrderTheory;

impl CurveSource for ZerothOrderTheory {
    fn name(&self) -> &'static str {
        "theory0"
    }

    fn produce(&self, cfg: &RunConfig) -> Result<Vec<ResultRow>, CliError> {
        let spec = cfg.network()?;
        let mut rows = Vec::new();
        for &(alpha, beta) in cfg.probe_pairs()? {
            for &omega in cfg.probe_omegas()? {
                let value = if alpha == beta {
                    mm1_busy_corr(spec.mu[alpha], spec.rho[alpha], omega)
                        .map_err(|e| CliError::Usage(e.to_string()))?
                } else {
                    c0_cross(spec.rho[alpha], spec.rho[beta], omega)
                };
                rows.push(ResultRow {
                    source: Source::Theory0,
                    alpha: alpha + 1,
                    beta: beta + 1,
                    omega,
                    value,
                    stderr: None,
                });
            }
        }
        sort_rows(&mut rows);
        Ok(rows)
    }
}

/// `theory1`: the first-order coupled curves, off-diagonal pairs only (the
/// first-order correction vanishes on the diagonal).
pub struct FirstOrderTheory;

impl CurveSource for FirstOrderTheory {
    fn name(&self) -> &'static str {
        "theory1"
    }

    fn produce(&self, cfg: &RunConfig) -> Result<Vec<ResultRow>, CliError> {
        let spec = cfg.network()?;
        let coupling = PerturbationCoupling::from_spec(&spec)?;
        let mut rows = Vec::new();
        for &(alpha, beta) in cfg.probe_pairs()? {
            if alpha == beta {
                continue;
            }
            for &omega in cfg.probe_omegas()? {
                let value = cross_corr_first_order(
                    QueueParams { mu: spec.mu[alpha], rho: spec.rho[alpha] },
                    QueueParams { mu: spec.mu[beta], rho: spec.rho[beta] },
                    coupling.delta(beta, alpha),
                    coupling.epsilon,
                    omega,
                );
                rows.push(ResultRow {
                    source: Source::Theory1,
                    alpha: alpha + 1,
                    beta: beta + 1,
                    omega,
                    value,
                    stderr: None,
                });
            }
        }
        sort_rows(&mut rows);
        Ok(rows)
    }
}

/// `oracle`: exact values on the truncated state space.
pub struct TruncatedOracle;

impl CurveSource for TruncatedOracle {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn produce(&self, cfg: &RunConfig) -> Result<Vec<ResultRow>, CliError> {
        let spec = cfg.network()?;
        let trunc = cfg.truncation(&spec)?;
        let generator = build_generator(&spec, &trunc)?;
        let stationary = stationary_exact(&generator)?;
        let mut rows = Vec::new();
        for &(alpha, beta) in cfg.probe_pairs()? {
            let seeded = stationary.project_busy(beta);
            for &omega in cfg.probe_omegas()? {
                let propagated = resolvent_apply(&generator, omega, &seeded)?;
                rows.push(ResultRow {
                    source: Source::Oracle,
                    alpha: alpha + 1,
                    beta: beta + 1,
                    omega,
                    value: propagated.busy_mass(alpha),
                    stderr: None,
                });
            }
        }
        sort_rows(&mut rows);
        Ok(rows)
    }
}

/// `sim`: the event-driven estimate, with sub-run error bars.
pub struct EventSimulation;

impl CurveSource for EventSimulation {
    fn name(&self) -> &'static str {
        "sim"
    }

    fn produce(&self, cfg: &RunConfig) -> Result<Vec<ResultRow>, CliError> {
        let sim_cfg = cfg.sim_config()?;
        let output = jacksonnet::sim::run(&sim_cfg)?;
        let mut rows = Vec::new();
        for curve in &output.curves {
            let stderr = curve.stderr.as_ref().expect("simulation curves carry stderr");
            for (w, &omega) in curve.omegas.iter().enumerate() {
                rows.push(ResultRow {
                    source: Source::Sim,
                    alpha: curve.alpha + 1,
                    beta: curve.beta + 1,
                    omega,
                    value: curve.values[w],
                    stderr: Some(stderr[w]),
                });
            }
        }
        sort_rows(&mut rows);
        Ok(rows)
    }
}
