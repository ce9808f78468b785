//! Vector fields of the SIT model.
//!
//! The mating split uses the nonnegative parts of M and M_s. On the singular
//! face M + M_s = 0 the wild-mating fraction is 0 and every mating female is
//! routed to U, which is the kappa = 0 selection of the Filippov inclusion.

use super::params::{Capacity, ModelParams};
use super::state::SitState;
use crate::error::{Error, Result};

/// Probability that a mating young female meets a wild male, M / (M + M_s).
///
/// Returns 0 when M + M_s = 0.
pub fn wild_mating_fraction(males: f64, sterile_males: f64) -> f64 {
    let m = males.max(0.0);
    let s = m + sterile_males.max(0.0);
    if s > 0.0 {
        m / s
    } else {
        0.0
    }
}

/// Right-hand side of the controlled six-compartment system with release rate `u`.
pub fn rhs_controlled(p: &ModelParams, x: &SitState, u: f64) -> Result<[f64; 6]> {
    x.ensure_finite("state")?;
    if !u.is_finite() {
        return Err(Error::NonFinite("release rate"));
    }
    if u < 0.0 {
        return Err(Error::NegativeControl(u));
    }
    Ok(field(p, &x.to_array(), u))
}

/// Unchecked field used inside integrators.
#[inline]
pub(crate) fn field(p: &ModelParams, x: &[f64; 6], u: f64) -> [f64; 6] {
    let [e, m, y, f, uf, ms] = *x;
    let kappa = wild_mating_fraction(m, ms);
    [
        egg_rate(p, e, f),
        (1.0 - p.nu) * p.nu_e * e - p.delta_m * m,
        p.nu * p.nu_e * e - p.delta_eta() * kappa * y - (p.eta2 + p.delta_y) * y,
        p.eta1 * kappa * y - p.delta_f * f,
        p.eta2 * (1.0 - kappa) * y - p.delta_u * uf,
        u - p.delta_s * ms,
    ]
}

#[inline]
fn egg_rate(p: &ModelParams, e: f64, f: f64) -> f64 {
    let laying = match p.capacity {
        Capacity::Finite(k) => p.beta_e * f * (1.0 - e / k),
        Capacity::Infinite => p.beta_e * f,
    };
    laying - (p.delta_e + p.nu_e) * e
}

/// Right-hand side of the release-free model on (E, M, Y, F).
pub fn rhs_uncontrolled(p: &ModelParams, x: [f64; 4]) -> Result<[f64; 4]> {
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("state"));
    }
    let k = p.capacity.finite().ok_or(Error::InfiniteCapacity)?;
    let [e, m, y, f] = x;
    Ok([
        p.beta_e * f * (1.0 - e / k) - (p.delta_e + p.nu_e) * e,
        (1.0 - p.nu) * p.nu_e * e - p.delta_m * m,
        p.nu * p.nu_e * e - (p.eta1 + p.delta_y) * y,
        p.eta1 * y - p.delta_f * f,
    ])
}

/// Field of the wild population x = (E, M, Y, F, U) when sterile males are
/// held at M_s = theta * M.
pub fn rhs_proportional(p: &ModelParams, x: [f64; 5], theta: f64) -> [f64; 5] {
    let full = [x[0], x[1], x[2], x[3], x[4], theta * x[1].max(0.0)];
    let d = field(p, &full, 0.0);
    [d[0], d[1], d[2], d[3], d[4]]
}
