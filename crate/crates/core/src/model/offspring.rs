use super::params::ModelParams;
use crate::error::{Error, Result};

impl ModelParams {
    /// beta_E * eta1 * nu * nu_E, the numerator shared by every offspring number.
    pub(crate) fn fecundity(&self) -> f64 {
        self.beta_e * self.eta1 * self.nu * self.nu_e
    }

    /// delta_F * (nu_E + delta_E).
    pub(crate) fn female_turnover(&self) -> f64 {
        self.delta_f * (self.nu_e + self.delta_e)
    }

    /// Basic offspring number R0 of the release-free population.
    pub fn basic_offspring_number(&self) -> f64 {
        self.fecundity() / (self.female_turnover() * (self.eta1 + self.delta_y))
    }

    /// Offspring number R(theta) when sterile males are held at M_s = theta * M.
    pub fn offspring_number(&self, theta: f64) -> f64 {
        self.fecundity()
            / (self.female_turnover()
                * (self.delta_eta() + (1.0 + theta) * (self.eta2 + self.delta_y)))
    }

    /// The release ratio theta* at which R(theta*) = 1.
    ///
    /// `None` when R0 <= 1: the wild population already goes extinct.
    pub fn theta_threshold(&self) -> Option<f64> {
        let theta = (self.fecundity() / self.female_turnover() - self.delta_eta())
            / (self.eta2 + self.delta_y)
            - 1.0;
        (self.basic_offspring_number() > 1.0).then_some(theta)
    }

    /// Positive steady state (E*, M*, Y*, F*) of the release-free model with capacity `k`.
    pub fn persistence_equilibrium(&self, k: f64) -> Result<[f64; 4]> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidParameter {
                name: "K",
                reason: format!("persistence equilibrium needs a finite K > 0, got {k}"),
            });
        }
        let r0 = self.basic_offspring_number();
        if r0 <= 1.0 {
            return Err(Error::NoPersistenceEquilibrium(r0));
        }
        let e = k * (1.0 - 1.0 / r0);
        let m = (1.0 - self.nu) * self.nu_e * e / self.delta_m;
        let y = self.nu * self.nu_e * e / (self.eta1 + self.delta_y);
        let f = self.eta1 * y / self.delta_f;
        Ok([e, m, y, f])
    }
}
