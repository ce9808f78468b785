//! Parameters, state, vector fields and offspring numbers of the six-compartment
//! mosquito model with sterile-male releases.

mod dynamics;
mod offspring;
mod params;
mod state;

pub use dynamics::{rhs_controlled, rhs_proportional, rhs_uncontrolled, wild_mating_fraction};
pub(crate) use dynamics::field;
pub use params::{Capacity, LoadedParams, ModelParams};
pub use state::SitState;
