//! Luenberger-type observer for the SIT model with K = infinity, written as an
//! LPV system whose single parameter is the measured wild-male fraction.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certkit::{matrix_from_rows, matrix_to_rows, LpvSystem};
use crate::error::{Error, Result};
use crate::model::{wild_mating_fraction, Capacity, ModelParams, SitState};

/// Measured output y = (M, M_s).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SitOutput {
    pub males: f64,
    pub sterile_males: f64,
}

impl SitOutput {
    pub fn new(males: f64, sterile_males: f64) -> Self {
        Self { males, sterile_males }
    }

    pub fn of_state(x: &SitState) -> Self {
        Self::new(x.males, x.sterile_males)
    }

    pub fn to_vector(self) -> DVector<f64> {
        DVector::from_vec(vec![self.males, self.sterile_males])
    }
}

/// Estimate (E, M, Y, F, U, M_s) carried by the observer. Components may be negative.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObserverState {
    pub x_hat: SitState,
}

impl ObserverState {
    pub fn new(x_hat: SitState) -> Self {
        Self { x_hat }
    }
}

/// Wild-male fraction y_1 / (y_1 + y_2), 0 when both vanish.
pub fn kappa_of_output(y: &SitOutput) -> f64 {
    wild_mating_fraction(y.males, y.sterile_males)
}

/// x' = A x + (B_0 + kappa B_1) x + D u, y = C x, kappa in [0, 1].
///
/// Only defined for K = infinity.
pub fn build_sit_lpv(p: &ModelParams) -> Result<LpvSystem> {
    p.validate()?;
    if let Capacity::Finite(k) = p.capacity {
        return Err(Error::FiniteCapacity(k));
    }
    let (e, m, y, f, u, ms) = (0, 1, 2, 3, 4, 5);
    let mut a = DMatrix::zeros(6, 6);
    a[(e, e)] = -(p.nu_e + p.delta_e);
    a[(e, f)] = p.beta_e;
    a[(m, e)] = (1.0 - p.nu) * p.nu_e;
    a[(m, m)] = -p.delta_m;
    a[(y, e)] = p.nu * p.nu_e;
    a[(y, y)] = -(p.eta2 + p.delta_y);
    a[(f, f)] = -p.delta_f;
    a[(u, u)] = -p.delta_u;
    a[(ms, ms)] = -p.delta_s;

    let mut c = DMatrix::zeros(2, 6);
    c[(0, m)] = 1.0;
    c[(1, ms)] = 1.0;
    let mut d = DMatrix::zeros(6, 1);
    d[(ms, 0)] = 1.0;

    let mut b0 = DMatrix::zeros(6, 6);
    b0[(u, y)] = p.eta2;
    let mut b1 = DMatrix::zeros(6, 6);
    b1[(y, y)] = -p.delta_eta();
    b1[(f, y)] = p.eta1;
    b1[(u, y)] = -p.eta2;

    let mut sys = LpvSystem::new(a, c, d)?.with_offset(b0)?;
    sys.add_parameter(0.0, 1.0, b1)?;
    Ok(sys)
}

/// x_hat' = (A + B(kappa(y))) x_hat + D u - L (C x_hat - y).
pub fn observer_rhs(
    xh: &ObserverState,
    y: &SitOutput,
    u: f64,
    l: &DMatrix<f64>,
    sys: &LpvSystem,
) -> Result<[f64; 6]> {
    xh.x_hat.ensure_finite("estimate")?;
    if !(y.males.is_finite() && y.sterile_males.is_finite() && u.is_finite()) {
        return Err(Error::NonFinite("observer input"));
    }
    if y.males < 0.0 || y.sterile_males < 0.0 {
        return Err(Error::InvalidParameter { name: "y", reason: format!("measurements must be >= 0, got {y:?}") });
    }
    if u < 0.0 {
        return Err(Error::NegativeControl(u));
    }
    if sys.n() != 6 || sys.m() != 2 || sys.d().ncols() != 1 || sys.parameter_count() != 1 {
        return Err(Error::Dimension("observer needs the 6-state, 2-output, 1-parameter SIT system".into()));
    }
    if l.nrows() != 6 || l.ncols() != 2 {
        return Err(Error::Dimension(format!("L must be 6x2, got {}x{}", l.nrows(), l.ncols())));
    }
    let a = sys.matrix_at(&[kappa_of_output(y)])?;
    let x = DVector::from_row_slice(&xh.x_hat.to_array());
    let innovation = sys.c() * &x - y.to_vector();
    let dx = a * &x + sys.d().column(0) * u - l * innovation;
    Ok(std::array::from_fn(|i| dx[i]))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainJson {
    #[serde(rename = "L")]
    l: Vec<Vec<f64>>,
}

/// Reads {"L": [[..], ..]} as a row-major matrix.
pub fn gain_from_json_str(text: &str) -> Result<DMatrix<f64>> {
    let raw: GainJson = serde_json::from_str(text)?;
    let l = matrix_from_rows(&raw.l, "L")?;
    if l.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("L"));
    }
    Ok(l)
}

pub fn gain_from_json_file(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    gain_from_json_str(&std::fs::read_to_string(path)?)
}

pub fn gain_to_json_string(l: &DMatrix<f64>) -> String {
    serde_json::to_string_pretty(&GainJson { l: matrix_to_rows(l) }).expect("finite matrices serialize")
}
