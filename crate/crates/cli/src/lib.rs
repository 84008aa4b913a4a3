//! Batch front-end for the network-dynamics toolkit: parse a run
//! configuration, dispatch one of the six commands, and emit deterministic
//! CSV suitable for external plotting.

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;
pub mod source;
