//! Time integration, reference scenarios and trace checks.

mod analysis;
mod integrate;
mod scenarios;
mod trajectory;

pub use analysis::{
    check_envelope, check_monotone, convergence_time, fit_decay_rate, reference_scale, settling_time,
    EnvelopeReport, MonotoneReport,
};
pub use integrate::{integrate, Method, SimOptions, Samples};
pub use scenarios::{
    run_closed_loop, run_coupled, run_observer, run_proportional, run_robustness, MeasurementHook, ObserverSetup,
};
pub use trajectory::{format_sig, Trajectory, MONITOR_NAMES};
