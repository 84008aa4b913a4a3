//! The flat, line-oriented run configuration.
//!
//! Format: `key = value` lines, `#` comments, blank lines ignored. Lists are
//! space-separated. `routing_row` repeats once per queue, in order; `pair`
//! repeats once per probed (alpha, beta) pair, 1-based. Exactly one of
//! `gamma` or `rho` defines the load.
//!
//! ```text
//! n = 2
//! mu = 0.3 0.2
//! routing_row = 0 0.1
//! routing_row = 0.2 0
//! rho = 0.3 0.7
//! duration = 256000
//! warmup = 2560
//! seed = 42
//! subrun_length = 10000
//! omega = 0.02 0.0502 0.126 0.317 0.797 2.0
//! pair = 1 2
//! pair = 2 1
//! cutoffs = 30 60
//! boundary_mode = blocking
//! ```

use crate::error::CliError;
use jacksonnet::algebra::{BoundaryMode, TruncationSpec};
use jacksonnet::network::NetworkSpec;
use jacksonnet::sim::SimConfig;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: usize,
    pub mu: Vec<f64>,
    pub routing: Vec<f64>,
    pub gamma: Option<Vec<f64>>,
    pub rho: Option<Vec<f64>>,
    pub duration: f64,
    /// Defaults to 1% of the duration when not given.
    pub warmup: Option<f64>,
    pub seed: u64,
    pub subrun_length: f64,
    pub omegas: Vec<f64>,
    /// 0-based internally; the file and the CSVs are 1-based.
    pub pairs: Vec<(usize, usize)>,
    pub cutoffs: Option<Vec<usize>>,
    pub boundary_mode: BoundaryMode,
    pub workers: usize,
}

pub const DEFAULT_DURATION: f64 = 256_000.0;
pub const DEFAULT_SUBRUN: f64 = 10_000.0;
pub const DEFAULT_SEED: u64 = 1;

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut n: Option<usize> = None;
        let mut mu: Option<Vec<f64>> = None;
        let mut routing_rows: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut gamma: Option<(usize, Vec<f64>)> = None;
        let mut rho: Option<(usize, Vec<f64>)> = None;
        let mut duration = DEFAULT_DURATION;
        let mut warmup: Option<f64> = None;
        let mut seed = DEFAULT_SEED;
        let mut subrun_length = DEFAULT_SUBRUN;
        let mut omegas: Vec<f64> = Vec::new();
        let mut pairs: Vec<(usize, (usize, usize))> = Vec::new();
        let mut cutoffs: Option<Vec<usize>> = None;
        let mut boundary_mode = BoundaryMode::Blocking;
        let mut workers = 0usize;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(CliError::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |message: String| CliError::Parse { line: line_no, message };
            match key {
                "n" => {
                    n = Some(value.parse().map_err(|_| bad(format!("bad queue count `{value}`")))?)
                }
                "mu" => mu = Some(parse_floats(value, line_no, "mu")?),
                "routing_row" => {
                    routing_rows.push((line_no, parse_floats(value, line_no, "routing_row")?))
                }
                "gamma" => gamma = Some((line_no, parse_floats(value, line_no, "gamma")?)),
                "rho" => rho = Some((line_no, parse_floats(value, line_no, "rho")?)),
                "duration" => {
                    duration = value.parse().map_err(|_| bad(format!("bad duration `{value}`")))?
                }
                "warmup" => {
                    warmup =
                        Some(value.parse().map_err(|_| bad(format!("bad warmup `{value}`")))?)
                }
                "seed" => seed = value.parse().map_err(|_| bad(format!("bad seed `{value}`")))?,
                "subrun_length" => {
                    subrun_length = value
                        .parse()
                        .map_err(|_| bad(format!("bad subrun_length `{value}`")))?
                }
                "omega" => omegas = parse_floats(value, line_no, "omega")?,
                "pair" => {
                    let parts = parse_floats(value, line_no, "pair")?;
                    if parts.len() != 2 || parts.iter().any(|p| p.fract() != 0.0 || *p < 1.0) {
                        return Err(bad(format!("pair must be two 1-based indices, got `{value}`")));
                    }
                    pairs.push((line_no, (parts[0] as usize - 1, parts[1] as usize - 1)));
                }
                "cutoffs" => {
                    let parts = parse_floats(value, line_no, "cutoffs")?;
                    if parts.iter().any(|c| c.fract() != 0.0 || *c < 0.0) {
                        return Err(bad(format!("cutoffs must be integers, got `{value}`")));
                    }
                    cutoffs = Some(parts.into_iter().map(|c| c as usize).collect());
                }
                "boundary_mode" => {
                    boundary_mode = match value {
                        "blocking" => BoundaryMode::Blocking,
                        "leaky" => BoundaryMode::Leaky,
                        other => {
                            return Err(bad(format!(
                                "boundary_mode must be `blocking` or `leaky`, got `{other}`"
                            )))
                        }
                    }
                }
                "workers" => {
                    workers = value.parse().map_err(|_| bad(format!("bad workers `{value}`")))?
                }
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }

        let n = n.ok_or(CliError::Parse { line: 0, message: "missing `n`".into() })?;
        let mu = mu.ok_or(CliError::Parse { line: 0, message: "missing `mu`".into() })?;
        let err_at = |line: usize, message: String| CliError::Parse { line, message };
        if mu.len() != n {
            return Err(err_at(0, format!("mu has {} entries, n = {n}", mu.len())));
        }
        if routing_rows.len() != n {
            return Err(err_at(
                0,
                format!("{} routing_row lines, n = {n}", routing_rows.len()),
            ));
        }
        let mut routing = Vec::with_capacity(n * n);
        for (line, row) in &routing_rows {
            if row.len() != n {
                return Err(err_at(*line, format!("routing_row has {} entries, n = {n}", row.len())));
            }
            routing.extend_from_slice(row);
        }
        match (&gamma, &rho) {
            (Some((line, _)), Some(_)) => {
                return Err(err_at(
                    *line,
                    "exactly one of `gamma` or `rho` may be present".into(),
                ))
            }
            (None, None) => {
                return Err(err_at(0, "one of `gamma` or `rho` is required".into()))
            }
            _ => {}
        }
        for (what, list) in [("gamma", &gamma), ("rho", &rho)] {
            if let Some((line, v)) = list {
                if v.len() != n {
                    return Err(err_at(*line, format!("{what} has {} entries, n = {n}", v.len())));
                }
            }
        }
        if let Some(c) = &cutoffs {
            if c.len() != n {
                return Err(err_at(0, format!("cutoffs has {} entries, n = {n}", c.len())));
            }
        }
        for (line, (a, b)) in &pairs {
            if *a >= n || *b >= n {
                return Err(err_at(*line, format!("pair ({}, {}) out of range", a + 1, b + 1)));
            }
        }

        Ok(RunConfig {
            n,
            mu,
            routing,
            gamma: gamma.map(|(_, v)| v),
            rho: rho.map(|(_, v)| v),
            duration,
            warmup,
            seed,
            subrun_length,
            omegas,
            pairs: pairs.into_iter().map(|(_, p)| p).collect(),
            cutoffs,
            boundary_mode,
            workers,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn warmup(&self) -> f64 {
        self.warmup.unwrap_or(self.duration * 0.01)
    }

    /// Solve the missing side of the traffic equations and build the network.
    pub fn network(&self) -> Result<NetworkSpec, CliError> {
        let spec = match (&self.gamma, &self.rho) {
            (Some(g), None) => {
                NetworkSpec::from_gamma(self.mu.clone(), self.routing.clone(), g.clone())?
            }
            (None, Some(r)) => {
                NetworkSpec::from_rho(self.mu.clone(), self.routing.clone(), r.clone())?
            }
            _ => unreachable!("parse enforces exactly one of gamma/rho"),
        };
        Ok(spec)
    }

    /// Assemble without invariant gating, for the diagnostic report.
    pub fn network_lenient(&self) -> Result<NetworkSpec, CliError> {
        Ok(NetworkSpec::assemble_lenient(
            self.mu.clone(),
            self.routing.clone(),
            self.gamma.clone(),
            self.rho.clone(),
        )?)
    }

    pub fn truncation(&self, spec: &NetworkSpec) -> Result<TruncationSpec, CliError> {
        let cutoffs = match &self.cutoffs {
            Some(c) => c.clone(),
            None => TruncationSpec::default_cutoffs(&spec.rho),
        };
        Ok(TruncationSpec::new(cutoffs, self.boundary_mode)?)
    }

    pub fn probe_pairs(&self) -> Result<&[(usize, usize)], CliError> {
        if self.pairs.is_empty() {
            return Err(CliError::Usage("config has no `pair` lines to probe".into()));
        }
        Ok(&self.pairs)
    }

    pub fn probe_omegas(&self) -> Result<&[f64], CliError> {
        if self.omegas.is_empty() {
            return Err(CliError::Usage("config has no `omega` grid".into()));
        }
        Ok(&self.omegas)
    }

    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        Ok(SimConfig {
            spec: self.network()?,
            duration: self.duration,
            warmup: self.warmup(),
            seed: self.seed,
            subrun_length: self.subrun_length,
            omegas: self.probe_omegas()?.to_vec(),
            pairs: self.probe_pairs()?.to_vec(),
            workers: self.workers,
        })
    }
}

fn parse_floats(value: &str, line: usize, key: &str) -> Result<Vec<f64>, CliError> {
    value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| CliError::Parse {
                line,
                message: format!("bad number `{tok}` in `{key}`"),
            })
        })
        .collect()
}
