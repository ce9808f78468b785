use nalgebra::DMatrix;

use super::feedback::FeedbackConfig;
use super::lyapunov::check_spd;
use crate::error::{Error, Result};

/// Weights and rates for the output-feedback functional H = W + lambda sqrt(e' P e).
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledMonitorConfig {
    /// Weight of the observer-error term.
    pub lambda: f64,
    /// Bound C' on how much the estimate error can raise dW/dt per unit ||e||.
    pub lipschitz_c: f64,
    /// Norm equivalence ||e|| <= beta ||e||_P.
    pub beta_norm: f64,
    pub xi: f64,
    pub c_s: f64,
    pub c_w: f64,
    /// Decay rate of H.
    pub c_e: f64,
}

impl CoupledMonitorConfig {
    /// Derives every weight from the controller and the certificate matrix P:
    /// beta = 1/sqrt(lambda_min(P)), C' = alpha (3 theta + 1) C_G, lambda = 4 C' beta / xi.
    pub fn derive(cfg: &FeedbackConfig, p: &DMatrix<f64>, xi: f64) -> Result<Self> {
        check_spd(p)?;
        let min_eig = p.clone().symmetric_eigenvalues().min();
        let beta = 1.0 / min_eig.sqrt();
        let c_prime = cfg.alpha * (3.0 * cfg.theta + 1.0) * cfg.lipschitz_constant();
        Self::from_parts(cfg, c_prime, beta, xi, None)
    }

    /// Explicit constants; `lambda = None` selects 4 C' beta / xi.
    pub fn from_parts(
        cfg: &FeedbackConfig,
        lipschitz_c: f64,
        beta_norm: f64,
        xi: f64,
        lambda: Option<f64>,
    ) -> Result<Self> {
        let lambda = lambda.unwrap_or(4.0 * lipschitz_c * beta_norm / xi);
        for (name, v) in [
            ("lambda", lambda),
            ("lipschitz_C", lipschitz_c),
            ("beta_norm", beta_norm),
            ("xi", xi),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        Ok(Self {
            lambda,
            lipschitz_c,
            beta_norm,
            xi,
            c_s: cfg.c1.min(cfg.c2).min(xi / 4.0),
            c_w: cfg.c_prime.min(xi / 2.0),
            c_e: cfg.c1.min(cfg.c2).min(cfg.c_prime).min(xi / 4.0),
        })
    }
}
