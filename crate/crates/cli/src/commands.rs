//! The six batch commands behind the CLI.

use std::collections::BTreeMap;

use crate::config::RunConfig;
use crate::csv::{fmt_float, sort_rows, CollapseCols, ResultRow, Source};
use crate::error::CliError;
use crate::source::source_by_name;
use jacksonnet::analytics::{c0_cross, first_order_coefficient, QueueParams};
use jacksonnet::network::{NetworkSpec, PerturbationCoupling};

/// Fraction of |z| <= 3 points below which `compare` exits nonzero.
pub const Z_PASS_FRACTION: f64 = 0.95;

/// Derived quantities plus every invariant check; `ok` is false when any
/// invariant is violated.
#[derive(Debug)]
pub struct ValidationReport {
    pub text: String,
    pub ok: bool,
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<ValidationReport, CliError> {
    // Lenient assembly so the report can name every violated invariant
    // instead of stopping at the first.
    let spec = cfg.network_lenient()?;
    let mut text = String::new();
    text.push_str(&format!("queues = {}\n", spec.n));
    let list = |v: &[f64]| v.iter().map(|x| fmt_float(*x)).collect::<Vec<_>>().join(" ");
    if cfg.rho.is_some() {
        text.push_str(&format!("derived gamma = {}\n", list(&spec.gamma)));
    } else {
        text.push_str(&format!("derived rho = {}\n", list(&spec.rho)));
    }
    let report = spec.validate();
    if report.is_empty() {
        text.push_str("checks = ok\n");
    } else {
        for violation in &report {
            text.push_str(&format!("violation: {violation}\n"));
        }
    }
    Ok(ValidationReport { text, ok: report.is_empty() })
}

pub fn cmd_theory(cfg: &RunConfig) -> Result<Vec<ResultRow>, CliError> {
    let mut rows = source_by_name("theory0").unwrap().produce(cfg)?;
    rows.extend(source_by_name("theory1").unwrap().produce(cfg)?);
    sort_rows(&mut rows);
    Ok(rows)
}

pub fn cmd_oracle(cfg: &RunConfig) -> Result<Vec<ResultRow>, CliError> {
    source_by_name("oracle").unwrap().produce(cfg)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<ResultRow>, CliError> {
    source_by_name("sim").unwrap().produce(cfg)
}

#[derive(Debug)]
pub struct CompareReport {
    pub csv: String,
    /// Fraction of stderr-carrying points with |z| <= 3; `None` when the
    /// data side has no error bars.
    pub z_fraction: Option<f64>,
    pub summary: String,
    pub ok: bool,
}

const COMPARE_HEADER: &str = "alpha,beta,omega,reference,value,stderr,diff,z,subtracted,norm1,norm2";

/// Compare a theory CSV against a measured (sim or oracle) CSV key by key.
///
/// The reference value for a key is the `theory1` row when present, else the
/// `theory0` row. The measured side contributes whatever single source it
/// carries (feeding a theory CSV back in reproduces zero differences). Each
/// output row also carries the subtracted and collapse-normalized values of
/// the measured side.
pub fn cmd_compare(
    cfg: &RunConfig,
    theory_rows: &[ResultRow],
    data_rows: &[ResultRow],
) -> Result<CompareReport, CliError> {
    let spec = cfg.network()?;
    let coupling = PerturbationCoupling::from_spec(&spec)?;

    let reference = select_reference(theory_rows);
    let data = select_reference(data_rows);
    if reference.len() != data.len() {
        return Err(CliError::KeyMismatch(format!(
            "{} reference keys vs {} data keys",
            reference.len(),
            data.len()
        )));
    }

    let mut csv = String::from(COMPARE_HEADER);
    csv.push('\n');
    let mut z_total = 0usize;
    let mut z_pass = 0usize;
    for (key, data_row) in &data {
        let theory_row = reference.get(key).ok_or_else(|| {
            CliError::KeyMismatch(format!(
                "key (alpha {}, beta {}, omega {}) missing from reference",
                key.0,
                key.1,
                f64::from_bits(key.2)
            ))
        })?;
        let diff = data_row.value - theory_row.value;
        let z = data_row.stderr.filter(|e| *e > 0.0).map(|e| diff / e);
        if let Some(z) = z {
            z_total += 1;
            if z.abs() <= 3.0 {
                z_pass += 1;
            }
        }
        let cols = collapse_columns(&spec, &coupling, data_row);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            data_row.alpha,
            data_row.beta,
            fmt_float(data_row.omega),
            fmt_float(theory_row.value),
            fmt_float(data_row.value),
            data_row.stderr.map(fmt_float).unwrap_or_default(),
            fmt_float(diff),
            z.map(fmt_float).unwrap_or_default(),
            fmt_float(cols.subtracted),
            cols.norm1.map(fmt_float).unwrap_or_default(),
            cols.norm2.map(fmt_float).unwrap_or_default(),
        ));
    }
    let z_fraction = if z_total > 0 {
        Some(z_pass as f64 / z_total as f64)
    } else {
        None
    };
    let ok = z_fraction.is_none_or(|f| f >= Z_PASS_FRACTION);
    let summary = match z_fraction {
        Some(f) => format!(
            "compared {} keys; |z| <= 3 for {:.1}% of {} error-barred points ({})",
            data.len(),
            100.0 * f,
            z_total,
            if ok { "pass" } else { "fail" }
        ),
        None => format!("compared {} keys; no error bars on the data side", data.len()),
    };
    Ok(CompareReport { csv, z_fraction, summary, ok })
}

/// Attach the subtracted and collapse-normalized columns to every row.
pub fn cmd_collapse(
    cfg: &RunConfig,
    rows: &[ResultRow],
) -> Result<Vec<(ResultRow, CollapseCols)>, CliError> {
    let spec = cfg.network()?;
    let coupling = PerturbationCoupling::from_spec(&spec)?;
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    Ok(sorted
        .into_iter()
        .map(|row| {
            let cols = collapse_columns(&spec, &coupling, &row);
            (row, cols)
        })
        .collect())
}

fn collapse_columns(
    spec: &NetworkSpec,
    coupling: &PerturbationCoupling,
    row: &ResultRow,
) -> CollapseCols {
    let alpha = row.alpha - 1;
    let beta = row.beta - 1;
    let subtracted = row.value - c0_cross(spec.rho[alpha], spec.rho[beta], row.omega);
    let delta = coupling.delta(beta, alpha);
    if alpha == beta || delta == 0.0 {
        return CollapseCols { subtracted, norm1: None, norm2: None };
    }
    let coefficient = first_order_coefficient(
        QueueParams { mu: spec.mu[alpha], rho: spec.rho[alpha] },
        QueueParams { mu: spec.mu[beta], rho: spec.rho[beta] },
        row.omega,
    );
    CollapseCols {
        subtracted,
        norm1: Some(subtracted / delta),
        norm2: Some(subtracted / coefficient),
    }
}

type Key = (usize, usize, u64);

/// Index rows by (alpha, beta, omega-bits), preferring `theory1` over
/// `theory0` when both describe one key.
fn select_reference(rows: &[ResultRow]) -> BTreeMap<Key, ResultRow> {
    let mut map: BTreeMap<Key, ResultRow> = BTreeMap::new();
    for row in rows {
        let key = (row.alpha, row.beta, row.omega.to_bits());
        match map.get(&key) {
            Some(existing)
                if existing.source == Source::Theory1 && row.source == Source::Theory0 => {}
            _ => {
                map.insert(key, row.clone());
            }
        }
    }
    map
}
