use crate::error::{Error, Result};
use crate::model::{ModelParams, SitState};
use crate::observer::SitOutput;

/// Backstepping release law for a target ratio `theta` and weight `alpha`,
/// with every constant of its convergence analysis cached at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackConfig {
    params: ModelParams,
    pub theta: f64,
    pub alpha: f64,
    /// Offspring number R(theta) under M_s = theta * M.
    pub r_theta: f64,
    /// Weight of U in V.
    pub sigma: f64,
    pub phi: f64,
    pub q: f64,
    /// Decay rate of V under M_s = theta * M.
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_prime: f64,
    /// Decay rate of W under the feedback.
    pub c_p: f64,
}

impl FeedbackConfig {
    pub fn new(params: ModelParams, theta: f64, alpha: f64) -> Result<Self> {
        params.validate()?;
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!("must be finite and > 0, got {theta}"),
            });
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must be finite and > 0, got {alpha}"),
            });
        }
        if params.eta2 <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "eta2",
                reason: "sterile mating rate must be > 0 for the feedback design".into(),
            });
        }
        let r = params.offspring_number(theta);
        if r >= 1.0 {
            return Err(Error::ThetaBelowThreshold {
                r_theta: r,
                threshold: params.theta_threshold().unwrap_or(0.0),
            });
        }

        let p = &params;
        let b = p.fecundity();
        let k = p.female_turnover();
        let hatch = p.nu_e + p.delta_e;
        let one_t = 1.0 + theta;

        let sigma = b * r / (one_t * p.eta2 * hatch * p.delta_f);
        let phi = ((2.0 + r) * b - 3.0 * r * p.delta_eta() * k) / (k * (1.0 - r) * one_t)
            - b * r / (one_t * one_t * k);
        let q = 3.0 * (p.eta2 + p.delta_y) * one_t * k - (1.0 - r) * b;

        let young_rate =
            b * (1.0 + theta * (1.0 - r)) / (k * one_t * one_t) * (1.0 - r) / (3.0 * r);
        let c = [
            p.nu * hatch * (1.0 - r) / (1.0 + 2.0 * r),
            p.delta_m,
            p.delta_f * (1.0 - r) / (2.0 + r),
            p.delta_u,
            young_rate,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
        let q_rate = q / (3.0 * one_t * k);
        let c1 = c.min(1.0 / alpha);
        let c2 = c.min(p.delta_m);
        let c_prime = q_rate.min(p.delta_u);
        let c_p = c1.min(c2).min(c_prime);

        for (name, v) in [
            ("sigma", sigma),
            ("phi", phi),
            ("Q", q),
            ("c", c),
            ("c_prime", c_prime),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "theta",
                    reason: format!("derived constant {name} = {v} is not positive"),
                });
            }
        }

        Ok(Self {
            params,
            theta,
            alpha,
            r_theta: r,
            sigma,
            phi,
            q,
            c,
            c1,
            c2,
            c_prime,
            c_p,
        })
    }

    /// Parameters the controller was designed with (possibly estimates).
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Coefficients of V on (E, M, Y, F, U).
    pub fn v_weights(&self) -> [f64; 5] {
        let p = &self.params;
        let r = self.r_theta;
        let hatch = p.nu_e + p.delta_e;
        [
            (1.0 + 2.0 * r) * p.nu * p.nu_e / (hatch * (1.0 - r)),
            p.nu,
            3.0 * r / (1.0 - r),
            (2.0 + r) * p.beta_e * p.nu * p.nu_e / (p.delta_f * hatch * (1.0 - r)),
            self.sigma,
        ]
    }

    /// Sensitivity bound of G in (E, Y): max{phi (3 theta + 1) / alpha, 4 (1 - nu) nu_E theta}.
    pub fn lipschitz_constant(&self) -> f64 {
        let p = &self.params;
        (self.phi * (3.0 * self.theta + 1.0) / self.alpha)
            .max(4.0 * (1.0 - p.nu) * p.nu_e * self.theta)
    }

    /// G on (E, M, Y, M_s). F and U do not enter.
    #[inline]
    pub(crate) fn g_raw(&self, e: f64, m: f64, y: f64, ms: f64) -> f64 {
        if m + ms == 0.0 {
            return 0.0;
        }
        let p = &self.params;
        let th = self.theta;
        let tm = th * m;
        let lead = self.phi * y * (tm + ms).powi(2) / (self.alpha * (m + ms) * (3.0 * tm + ms));
        let males =
            ((1.0 - p.nu) * p.nu_e * th * e - th * p.delta_m * m) * (tm + 3.0 * ms) / (3.0 * tm + ms);
        lead + males + p.delta_s * ms + (tm - ms) / self.alpha
    }

    /// Unclamped backstepping law G. Zero on the face M + M_s = 0.
    pub fn feedback_g(&self, x: &SitState) -> Result<f64> {
        x.ensure_finite("state")?;
        Ok(self.g_raw(x.eggs, x.males, x.young, x.sterile_males))
    }

    /// Release rate u = max(0, G).
    pub fn feedback_u(&self, x: &SitState) -> Result<f64> {
        Ok(self.feedback_g(x)?.max(0.0))
    }

    /// Release rate computed from estimated (E, Y) and measured (M, M_s).
    ///
    /// Negative estimates are clamped to 0 before evaluation.
    pub fn coupled_feedback_u_hat(&self, x_hat: &SitState, y: &SitOutput) -> Result<f64> {
        x_hat.ensure_finite("estimate")?;
        if !(y.males.is_finite() && y.sterile_males.is_finite()) {
            return Err(Error::NonFinite("measurement"));
        }
        if y.males < 0.0 || y.sterile_males < 0.0 {
            return Err(Error::InvalidParameter {
                name: "y",
                reason: format!("measurements must be >= 0, got {y:?}"),
            });
        }
        Ok(self.u_hat_raw(x_hat.eggs, x_hat.young, y.males, y.sterile_males))
    }

    #[inline]
    pub(crate) fn u_hat_raw(&self, e_hat: f64, y_hat: f64, m: f64, ms: f64) -> f64 {
        self.g_raw(e_hat.max(0.0), m, y_hat.max(0.0), ms).max(0.0)
    }
}
