//! Feedback stabilization of a sterile insect technique (SIT) mosquito model.
//!
//! - [`model`]: the six-compartment population model and its offspring numbers.
//! - [`controller`]: the backstepping release law and its Lyapunov functionals.
//! - [`certkit`]: LPV systems, LMI certificates, gain extraction and synthesis.
//! - [`observer`]: the SIT instance of the LPV observer driven by male counts.
//! - [`sim`]: integrators, scenario runners, envelope checks and CSV output.

pub mod certkit;
pub mod controller;
pub mod error;
pub mod model;
pub mod observer;
pub mod sim;

pub use error::{Error, Result};
