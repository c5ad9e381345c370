//! Mean-field spin systems with a Hopf bifurcation: microscopic jump
//! processes, their deterministic limits, Gaussian fluctuations, and the
//! critical regime where the slow radial amplitude obeys a limiting SDE.

pub mod cli;
pub mod critical;
pub mod error;
pub mod fluct;
pub mod io;
pub mod limit;
pub mod micro;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
