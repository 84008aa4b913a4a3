//! Exact event-driven simulation of the open network, with on-the-fly
//! Laplace-domain correlation estimates and sub-run error bars.
//!
//! A run is split into `floor((duration - warmup)/subrun_length)` sub-runs.
//! Each sub-run is an independent trajectory: queue lengths start from the
//! product-geometric stationary law (exact, so there is no burn-in bias),
//! its share `warmup / n_subruns` of the warmup budget is simulated first to
//! charge the exponential averages with history, and measurement covers the
//! following `subrun_length` time units. Sub-runs draw from deterministically
//! separated random streams of one seeded generator (ChaCha12, stream =
//! sub-run index), so results are bit-identical no matter how many workers
//! execute them; accumulators merge in ascending sub-run order.

mod estimator;
mod event;

pub use estimator::{
    decay_integral, exp_avg_step, integral_increment, residual_integral, EstimatorState,
};
pub use event::{Event, SimState};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::analytics::{CorrelationCurve, Provenance};
use crate::network::NetworkSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("network has no active transitions: all queues empty and no external arrivals")]
    DeadNetwork,
    #[error("invalid simulation config: {0}")]
    ConfigInvalid(String),
    #[error("queue {queue} completed only {count} busy periods (100 required)")]
    TooFewPeriods { queue: usize, count: usize },
}

/// Occupancy histogram depth kept per queue.
pub const HIST_LEVELS: usize = 32;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub spec: NetworkSpec,
    /// Total simulated time budget, warmup included.
    pub duration: f64,
    /// Discarded initial time, split evenly across sub-runs.
    pub warmup: f64,
    pub seed: u64,
    /// Time per sub-run; error bars come from sub-run dispersion.
    pub subrun_length: f64,
    pub omegas: Vec<f64>,
    /// Ordered (alpha, beta) pairs, `alpha == beta` allowed, 0-based.
    pub pairs: Vec<(usize, usize)>,
    /// Worker threads for sub-run execution; 0 picks the rayon default.
    /// The results do not depend on this.
    pub workers: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !self.spec.validate().is_empty() {
            return Err(SimError::ConfigInvalid("network spec invalid".into()));
        }
        if !(self.duration > self.warmup) || self.warmup < 0.0 {
            return Err(SimError::ConfigInvalid(format!(
                "need duration > warmup >= 0, got {} and {}",
                self.duration, self.warmup
            )));
        }
        if !(self.subrun_length > 0.0) {
            return Err(SimError::ConfigInvalid("subrun_length must be positive".into()));
        }
        if self.duration - self.warmup < 10.0 * self.subrun_length {
            return Err(SimError::ConfigInvalid(format!(
                "duration - warmup = {} gives fewer than 10 sub-runs of {}; stderr undefined",
                self.duration - self.warmup,
                self.subrun_length
            )));
        }
        if self.omegas.is_empty() || self.omegas.iter().any(|&w| !(w > 0.0)) {
            return Err(SimError::ConfigInvalid(
                "omega grid must be non-empty and positive".into(),
            ));
        }
        if !self.omegas.windows(2).all(|w| w[0] < w[1]) {
            return Err(SimError::ConfigInvalid(
                "omega grid must be strictly increasing".into(),
            ));
        }
        if self.pairs.is_empty() {
            return Err(SimError::ConfigInvalid("no queue pairs to probe".into()));
        }
        for &(a, b) in &self.pairs {
            if a >= self.spec.n || b >= self.spec.n {
                return Err(SimError::ConfigInvalid(format!(
                    "pair ({}, {}) out of range",
                    a + 1,
                    b + 1
                )));
            }
        }
        Ok(())
    }

    pub fn subrun_count(&self) -> usize {
        ((self.duration - self.warmup) / self.subrun_length).floor() as usize
    }
}

/// A point estimate with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusyPeriodStats {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Everything one simulation run measures.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub curves: Vec<CorrelationCurve>,
    /// Per-queue long-run busy fraction.
    pub busy_fraction: Vec<Estimate>,
    /// Per-queue occupancy fractions over the first [`HIST_LEVELS`] levels
    /// (last level absorbs the tail).
    pub occupancy: Vec<Vec<f64>>,
    /// Per sub-run, per queue occupancy fractions, for bootstrap error bars.
    pub occupancy_subruns: Vec<Vec<Vec<f64>>>,
    /// Per-queue admitted arrivals (external plus routed-in) in the
    /// measurement windows.
    pub arrivals: Vec<u64>,
    /// Per-queue service completions in the measurement windows.
    pub departures: Vec<u64>,
    /// Per sub-run (arrivals, departures) per queue.
    pub flow_subruns: Vec<Vec<(u64, u64)>>,
    /// Per-queue busy-period (total length, completed count).
    busy_period_totals: Vec<(f64, usize)>,
    /// Per sub-run per-queue busy-period (total length, completed count).
    busy_period_subruns: Vec<Vec<(f64, usize)>>,
    pub events: u64,
    pub subruns: usize,
    /// Total measured time, `subruns * subrun_length`.
    pub t_effective: f64,
    seed: u64,
}

impl RunOutput {
    pub fn curve(&self, alpha: usize, beta: usize) -> Option<&CorrelationCurve> {
        self.curves.iter().find(|c| c.alpha == alpha && c.beta == beta)
    }

    /// Mean completed busy-period length of one queue.
    pub fn busy_period_stats(&self, queue: usize) -> Result<BusyPeriodStats, SimError> {
        let (total, count) = self.busy_period_totals[queue];
        if count < 100 {
            return Err(SimError::TooFewPeriods { queue, count });
        }
        let mean = total / count as f64;
        // Dispersion of per-sub-run means, over sub-runs that saw a period.
        let per_run: Vec<f64> = self
            .busy_period_subruns
            .iter()
            .filter(|runs| runs[queue].1 > 0)
            .map(|runs| runs[queue].0 / runs[queue].1 as f64)
            .collect();
        let stderr = batch_stderr(&per_run);
        Ok(BusyPeriodStats { mean, stderr, count })
    }

    /// Total-variation distance between the measured occupancy marginal of
    /// one queue (first `levels` levels) and the geometric law with the given
    /// utilization, plus a bootstrap standard error over sub-runs. The
    /// bootstrap reseeds deterministically from the run seed.
    pub fn occupancy_tv_vs_geometric(&self, queue: usize, levels: usize, rho: f64) -> Estimate {
        let levels = levels.min(HIST_LEVELS - 1);
        let geometric: Vec<f64> = (0..levels)
            .map(|k| (1.0 - rho) * rho.powi(k as i32))
            .collect();
        let tv_of = |hist: &[f64]| -> f64 {
            0.5 * hist[..levels]
                .iter()
                .zip(&geometric)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        };
        let tv = tv_of(&self.occupancy[queue]);

        let n = self.occupancy_subruns.len();
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed ^ 0x626f_6f74);
        rng.set_stream(queue as u64);
        const RESAMPLES: usize = 200;
        let mut tvs = Vec::with_capacity(RESAMPLES);
        let mut mixed = vec![0.0; levels];
        for _ in 0..RESAMPLES {
            mixed.iter_mut().for_each(|v| *v = 0.0);
            for _ in 0..n {
                let pick = (rng.next_u64() % n as u64) as usize;
                for (m, v) in mixed.iter_mut().zip(&self.occupancy_subruns[pick][queue]) {
                    *m += v / n as f64;
                }
            }
            tvs.push(tv_of(&mixed));
        }
        let mean: f64 = tvs.iter().sum::<f64>() / RESAMPLES as f64;
        let var: f64 =
            tvs.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (RESAMPLES - 1) as f64;
        Estimate { mean: tv, stderr: var.sqrt() }
    }
}

/// Accumulators of one sub-run.
struct Replica {
    estimator: EstimatorState,
    busy_time: Vec<f64>,
    occupancy: Vec<Vec<f64>>,
    arrivals: Vec<u64>,
    departures: Vec<u64>,
    periods: Vec<(f64, usize)>,
    events: u64,
}

/// Run the full simulation. Deterministic given `(seed, config)`; the
/// worker count changes only the wall time.
pub fn run(config: &SimConfig) -> Result<RunOutput, SimError> {
    config.validate()?;
    let nsub = config.subrun_count();
    let per_run_warmup = config.warmup / nsub as f64;

    let worker = |idx: usize| run_replica(config, idx as u64, per_run_warmup);
    let replicas: Result<Vec<Replica>, SimError> = if config.workers == 1 {
        (0..nsub).map(worker).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| SimError::ConfigInvalid(format!("worker pool: {e}")))?;
        pool.install(|| (0..nsub).into_par_iter().map(worker).collect())
    };
    let replicas = replicas?;
    Ok(merge(config, replicas))
}

fn run_replica(config: &SimConfig, idx: u64, warmup: f64) -> Result<Replica, SimError> {
    let spec = &config.spec;
    let n = spec.n;
    let measure_len = config.subrun_length;
    let end_measure = warmup + measure_len;

    let mut state = SimState::new(spec, config.seed, idx);
    let mut est = EstimatorState::new(&config.omegas, &config.pairs);
    let mut busy_time = vec![0.0; n];
    let mut occupancy = vec![vec![0.0; HIST_LEVELS]; n];
    let mut arrivals = vec![0u64; n];
    let mut departures = vec![0u64; n];
    let mut periods = vec![(0.0, 0usize); n];
    let mut period_open: Vec<Option<f64>> = vec![None; n];
    let mut events = 0u64;

    let mut busy: Vec<bool> = state.lengths.iter().map(|&l| l > 0).collect();
    let mut t = 0.0f64;
    loop {
        let (dt, ev) = state.next_event(spec)?;
        let t_next = (t + dt).min(end_measure);
        // Estimator and time-weighted statistics over (t, t_next), split at
        // the warmup boundary.
        if t < warmup {
            let in_warmup = t_next.min(warmup) - t;
            est.advance_warmup(in_warmup, &busy);
        }
        if t_next > warmup {
            let lo = t.max(warmup);
            let len = t_next - lo;
            est.advance(len, &busy);
            for q in 0..n {
                if busy[q] {
                    busy_time[q] += len;
                }
                let level = state.lengths[q].min(HIST_LEVELS - 1);
                occupancy[q][level] += len;
            }
        }
        if t + dt >= end_measure {
            break;
        }
        t += dt;
        state.apply(dt, ev);
        events += 1;
        // Event bookkeeping inside the measurement window.
        if t >= warmup {
            match ev {
                Event::ExternalArrival { queue } => arrivals[queue] += 1,
                Event::Departure { queue, destination } => {
                    departures[queue] += 1;
                    if let Some(j) = destination {
                        arrivals[j] += 1;
                    }
                }
            }
        }
        for q in 0..n {
            let now_busy = state.lengths[q] > 0;
            if now_busy && !busy[q] {
                // Period opens; only measured if it opens inside the window.
                period_open[q] = if t >= warmup { Some(t) } else { None };
            } else if !now_busy && busy[q] {
                if let Some(start) = period_open[q].take() {
                    periods[q].0 += t - start;
                    periods[q].1 += 1;
                }
            }
            busy[q] = now_busy;
        }
    }
    // Normalize occupancy to fractions of the measured window.
    for q in 0..n {
        for v in &mut occupancy[q] {
            *v /= measure_len;
        }
    }
    Ok(Replica {
        estimator: est,
        busy_time,
        occupancy,
        arrivals,
        departures,
        periods,
        events,
    })
}

fn merge(config: &SimConfig, replicas: Vec<Replica>) -> RunOutput {
    let n = config.spec.n;
    let nsub = replicas.len();
    let len = config.subrun_length;
    let t_effective = nsub as f64 * len;

    let mut curves = Vec::with_capacity(config.pairs.len());
    for (p, &(alpha, beta)) in config.pairs.iter().enumerate() {
        let mut values = Vec::with_capacity(config.omegas.len());
        let mut stderr = Vec::with_capacity(config.omegas.len());
        for w in 0..config.omegas.len() {
            let means: Vec<f64> = replicas
                .iter()
                .map(|r| r.estimator.integral(p, w) / len)
                .collect();
            let mean = means.iter().sum::<f64>() / nsub as f64;
            values.push(mean);
            stderr.push(batch_stderr(&means));
        }
        curves.push(CorrelationCurve {
            alpha,
            beta,
            omegas: config.omegas.clone(),
            values,
            stderr: Some(stderr),
            provenance: Provenance::Simulation,
        });
    }

    let busy_fraction: Vec<Estimate> = (0..n)
        .map(|q| {
            let means: Vec<f64> = replicas.iter().map(|r| r.busy_time[q] / len).collect();
            Estimate {
                mean: means.iter().sum::<f64>() / nsub as f64,
                stderr: batch_stderr(&means),
            }
        })
        .collect();

    let occupancy_subruns: Vec<Vec<Vec<f64>>> =
        replicas.iter().map(|r| r.occupancy.clone()).collect();
    let mut occupancy = vec![vec![0.0; HIST_LEVELS]; n];
    for r in &replicas {
        for q in 0..n {
            for (acc, v) in occupancy[q].iter_mut().zip(&r.occupancy[q]) {
                *acc += v / nsub as f64;
            }
        }
    }

    let mut arrivals = vec![0u64; n];
    let mut departures = vec![0u64; n];
    let mut busy_period_totals = vec![(0.0, 0usize); n];
    let mut events = 0u64;
    for r in &replicas {
        events += r.events;
        for q in 0..n {
            arrivals[q] += r.arrivals[q];
            departures[q] += r.departures[q];
            busy_period_totals[q].0 += r.periods[q].0;
            busy_period_totals[q].1 += r.periods[q].1;
        }
    }
    let flow_subruns: Vec<Vec<(u64, u64)>> = replicas
        .iter()
        .map(|r| (0..n).map(|q| (r.arrivals[q], r.departures[q])).collect())
        .collect();
    let busy_period_subruns: Vec<Vec<(f64, usize)>> =
        replicas.iter().map(|r| r.periods.clone()).collect();

    RunOutput {
        curves,
        busy_fraction,
        occupancy,
        occupancy_subruns,
        arrivals,
        departures,
        flow_subruns,
        busy_period_totals,
        busy_period_subruns,
        events,
        subruns: nsub,
        t_effective,
        seed: config.seed,
    }
}

/// Standard error of the mean from batch means: `s / sqrt(n)` with the
/// unbiased sample standard deviation.
fn batch_stderr(means: &[f64]) -> f64 {
    let n = means.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = means.iter().sum::<f64>() / n as f64;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}
