//! Backstepping release law and the Lyapunov functionals V, W and H that
//! certify its convergence.

mod feedback;
mod lyapunov;
mod monitor;

pub use feedback::FeedbackConfig;
pub use monitor::CoupledMonitorConfig;
