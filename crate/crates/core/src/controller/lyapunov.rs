use nalgebra::{DMatrix, DVector};

use super::feedback::FeedbackConfig;
use super::monitor::CoupledMonitorConfig;
use crate::error::{Error, Result};
use crate::model::{self, rhs_proportional, Capacity, SitState};

impl FeedbackConfig {
    /// V(x) on the wild population x = (E, M, Y, F, U).
    pub fn lyapunov_v(&self, x: &[f64; 5]) -> f64 {
        self.v_weights().iter().zip(x).map(|(w, v)| w * v).sum()
    }

    /// W = V + alpha (theta M - M_s)^2 / (theta M + M_s), and W = V on M + M_s = 0.
    pub fn lyapunov_w(&self, x: &SitState) -> f64 {
        self.lyapunov_v(&x.wild()) + self.alpha * self.mismatch(x.males, x.sterile_males)
    }

    /// (theta M - M_s)^2 / (theta M + M_s), zero on the singular face.
    fn mismatch(&self, m: f64, ms: f64) -> f64 {
        let s = self.theta * m + ms;
        if s == 0.0 {
            0.0
        } else {
            (self.theta * m - ms).powi(2) / s
        }
    }

    /// H = W(x) + lambda sqrt(e' P e) with e = x_hat - x.
    pub fn lyapunov_h(
        &self,
        x: &SitState,
        x_hat: &SitState,
        p: &DMatrix<f64>,
        monitor: &CoupledMonitorConfig,
    ) -> Result<f64> {
        Ok(self.lyapunov_w(x) + monitor.lambda * p_norm(p, x, x_hat)?)
    }

    /// grad V . f(x, theta M), evaluated through the model field.
    pub fn proportional_v_dot(&self, x: &[f64; 5]) -> f64 {
        let d = rhs_proportional(self.params(), *x, self.theta);
        self.v_weights().iter().zip(d).map(|(w, v)| w * v).sum()
    }

    /// The same derivative in closed form: a sum of nonpositive terms.
    pub fn proportional_v_dot_closed_form(&self, x: &[f64; 5]) -> f64 {
        let p = self.params();
        let r = self.r_theta;
        let hatch = p.nu_e + p.delta_e;
        let one_t = 1.0 + self.theta;
        let [e, m, y, f, u] = *x;
        let crowding = match p.capacity {
            Capacity::Finite(k) => {
                (1.0 + 2.0 * r) * p.nu * p.nu_e / (hatch * (1.0 - r)) * p.beta_e / k * f * e
            }
            Capacity::Infinite => 0.0,
        };
        -p.beta_e * p.nu * p.nu_e / hatch * f
            - p.nu * p.delta_m * m
            - crowding
            - p.nu * p.nu * p.nu_e * e
            - p.fecundity() * (1.0 + self.theta * (1.0 - r)) / (p.female_turnover() * one_t * one_t)
                * y
            - self.sigma * p.delta_u * u
    }

    /// dW/dt along the controlled field with release rate `u`, on M + M_s > 0.
    pub fn w_dot(&self, x: &SitState, u: f64) -> f64 {
        let d = model::field(self.params(), &x.to_array(), u);
        let weights = self.v_weights();
        let v_dot: f64 = (0..5).map(|i| weights[i] * d[i]).sum();
        let th = self.theta;
        let (m, ms) = (x.males, x.sterile_males);
        let (dm, dms) = (d[1], d[5]);
        let diff = th * m - ms;
        let sum = th * m + ms;
        if sum == 0.0 {
            return v_dot;
        }
        // d/dt diff^2/sum = (2 diff diff' sum - diff^2 sum') / sum^2
        let diff_dot = th * dm - dms;
        let sum_dot = th * dm + dms;
        v_dot + self.alpha * (2.0 * diff * diff_dot * sum - diff * diff * sum_dot) / (sum * sum)
    }
}

/// sqrt(e' P e) with e = x_hat - x. Fails when P is not symmetric positive definite.
pub(crate) fn p_norm(p: &DMatrix<f64>, x: &SitState, x_hat: &SitState) -> Result<f64> {
    check_spd(p)?;
    let e = DVector::from_iterator(
        6,
        x_hat.to_array().iter().zip(x.to_array()).map(|(a, b)| a - b),
    );
    Ok(e.dot(&(p * &e)).max(0.0).sqrt())
}

pub(crate) fn check_spd(p: &DMatrix<f64>) -> Result<()> {
    if p.nrows() != 6 || p.ncols() != 6 {
        return Err(Error::Dimension(format!(
            "P must be 6x6, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    let asym = (p - p.transpose()).amax();
    if asym > 1e-10 * p.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    if p.clone().cholesky().is_none() {
        let min = p.clone().symmetric_eigenvalues().min();
        return Err(Error::NotPositiveDefinite(min));
    }
    Ok(())
}
