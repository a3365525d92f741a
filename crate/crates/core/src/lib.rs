//! Identification coding over noisy bosonic broadcast channels.
//!
//! Truncated Fock-space state and channel models, Gordon-function rate
//! regions, Holevo quantities of discrete constellations, implicit typical
//! projectors and a Monte Carlo simulator for random-binning identification
//! codes, with a command-line driver in [`cli`].

pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod fock;
pub mod idcode;
pub mod rates;
pub mod sampling;
pub mod states;
pub mod typicality;

pub use error::{Error, Result};
