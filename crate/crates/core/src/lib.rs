//! Feedback equivalence, Brunovsky forms and uniform ensemble reachability
//! for linear systems whose matrices depend polynomially on a real parameter.

pub mod bernstein;
pub mod brunovsky;
pub mod cli;
pub mod builtins;
pub mod ensemble_design;
pub mod error;
pub mod feedback_group;
pub mod indices;
pub mod io;
pub mod linalg;
pub mod oscillator;
pub mod param_core;
pub mod random;
pub mod simulate;

pub use error::{Error, Result};
