//! Dynamics of open Jackson queueing networks.
//!
//! Three independent routes to the same busy-busy correlation curves, built
//! to cross-check each other:
//!
//! - [`analytics`]: closed-form Laplace-domain expressions: the spectral
//!   root `x(ω)`, the single-queue busy-busy correlation, and the
//!   first-order cross-queue correlation with its two bracket factors.
//! - [`algebra`]: an exact finite-truncation realization of the network
//!   generator on a product occupancy space: ladder operators, stationary
//!   states, resolvents, and time evolution. Brute force, desk scale, and
//!   the arbiter whenever the closed forms are in doubt.
//! - [`sim`]: an exact event-driven simulation of the network as a
//!   continuous-time Markov chain, with on-the-fly Laplace-transform
//!   estimators and sub-run error bars.
//!
//! [`network`] holds the shared model: service rates, Markovian routing,
//! external arrival rates, and the traffic equations tying them together.

pub mod algebra;
pub mod analytics;
pub mod network;
pub mod sim;
