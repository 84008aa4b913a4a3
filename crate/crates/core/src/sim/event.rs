//! Exact continuous-time event sampling: the total-rate race.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::SimError;
use crate::network::NetworkSpec;

/// Instantaneous simulation state: clock, queue lengths, and the generator.
#[derive(Debug, Clone)]
pub struct SimState {
    pub clock: f64,
    pub lengths: Vec<usize>,
    rng: ChaCha12Rng,
}

/// One sampled transition. `Departure { destination: None }` leaves the
/// network; `Some(j)` routes the customer to queue `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    ExternalArrival { queue: usize },
    Departure { queue: usize, destination: Option<usize> },
}

impl SimState {
    /// Fresh state with queue lengths drawn from the product-geometric
    /// stationary law. `stream` separates sub-run random streams under one
    /// seed.
    pub fn new(spec: &NetworkSpec, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let lengths = spec
            .rho
            .iter()
            .map(|&rho| {
                if rho <= 0.0 {
                    0
                } else {
                    let u = uniform(&mut rng);
                    ((1.0 - u).ln() / rho.ln()).floor() as usize
                }
            })
            .collect();
        Self { clock: 0.0, lengths, rng }
    }

    /// Sample the holding time and the next transition without applying it.
    ///
    /// Exponential clocks race at total rate
    /// `R = sum_j gamma_j + sum_{i busy} mu_i`; the event category is picked
    /// with probability `rate / R`, and a service completion routes with the
    /// routing-row probabilities (remainder exits the network).
    pub fn next_event(&mut self, spec: &NetworkSpec) -> Result<(f64, Event), SimError> {
        let gamma_total: f64 = spec.gamma.iter().sum();
        let mut total = gamma_total;
        for i in 0..spec.n {
            if self.lengths[i] > 0 {
                total += spec.mu[i];
            }
        }
        if total <= 0.0 {
            return Err(SimError::DeadNetwork);
        }
        let dt = -(1.0 - uniform(&mut self.rng)).ln() / total;
        let mut pick = uniform(&mut self.rng) * total;
        for j in 0..spec.n {
            if spec.gamma[j] > 0.0 {
                pick -= spec.gamma[j];
                if pick < 0.0 {
                    return Ok((dt, Event::ExternalArrival { queue: j }));
                }
            }
        }
        let mut last_busy = None;
        for i in 0..spec.n {
            if self.lengths[i] > 0 {
                last_busy = Some(i);
                pick -= spec.mu[i];
                if pick < 0.0 {
                    let destination = self.route(spec, i);
                    return Ok((dt, Event::Departure { queue: i, destination }));
                }
            }
        }
        // Round-off pushed the pick past the end; attribute it to the last
        // active clock.
        match last_busy {
            Some(i) => {
                let destination = self.route(spec, i);
                Ok((dt, Event::Departure { queue: i, destination }))
            }
            None => {
                let j = (0..spec.n).rev().find(|&j| spec.gamma[j] > 0.0).unwrap();
                Ok((dt, Event::ExternalArrival { queue: j }))
            }
        }
    }

    fn route(&mut self, spec: &NetworkSpec, from: usize) -> Option<usize> {
        let mut v = uniform(&mut self.rng);
        for j in 0..spec.n {
            let r = spec.routing_at(from, j);
            v -= r;
            if v < 0.0 {
                return Some(j);
            }
        }
        None
    }

    /// Apply a sampled event and advance the clock.
    pub fn apply(&mut self, dt: f64, event: Event) {
        self.clock += dt;
        match event {
            Event::ExternalArrival { queue } => self.lengths[queue] += 1,
            Event::Departure { queue, destination } => {
                self.lengths[queue] -= 1;
                if let Some(j) = destination {
                    self.lengths[j] += 1;
                }
            }
        }
    }
}

/// Uniform in [0, 1) from the top 53 bits of the generator.
fn uniform(rng: &mut ChaCha12Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
