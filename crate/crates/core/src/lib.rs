//! Chaotic dynamics as discrete-token language modeling.
//!
//! Trajectories of a dynamical system are simulated ([`dynamics`]), cut
//! into uniform grid cells ([`discretization`]), and the resulting token
//! streams train a causal transformer ([`transformer`], [`training`]).
//! The model then continues trajectories ([`generation`]) and is scored on
//! the attractor it reproduces ([`evaluation`]).

pub mod cli;
pub mod discretization;
pub mod dynamics;
pub mod error;
pub mod evaluation;
pub mod generation;
pub mod io;
pub mod linalg;
pub mod protocols;
pub mod rng;
pub mod training;
pub mod transformer;

pub use error::{Error, Result};
