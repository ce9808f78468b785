use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Population densities in the order (E, M, Y, F, U, M_s).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SitState {
    /// Aquatic stage (eggs, larvae, pupae).
    pub eggs: f64,
    /// Wild males.
    pub males: f64,
    /// Young females that have not yet mated.
    pub young: f64,
    /// Females fertilized by wild males.
    pub fertilized: f64,
    /// Females that mated with sterile males.
    pub sterile_mated: f64,
    /// Released sterile males.
    pub sterile_males: f64,
}

impl SitState {
    pub const DIM: usize = 6;
    pub const LABELS: [&'static str; 6] = ["E", "M", "Y", "F", "U", "Ms"];

    pub fn new(e: f64, m: f64, y: f64, f: f64, u: f64, ms: f64) -> Self {
        Self {
            eggs: e,
            males: m,
            young: y,
            fertilized: f,
            sterile_mated: u,
            sterile_males: ms,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        let a: [f64; 6] = s
            .try_into()
            .map_err(|_| Error::Dimension(format!("state needs 6 components, got {}", s.len())))?;
        Ok(Self::from_array(a))
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.eggs,
            self.males,
            self.young,
            self.fertilized,
            self.sterile_mated,
            self.sterile_males,
        ]
    }

    /// The wild-population part x = (E, M, Y, F, U).
    pub fn wild(&self) -> [f64; 5] {
        let a = self.to_array();
        [a[0], a[1], a[2], a[3], a[4]]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.to_array().iter().all(|&v| v >= 0.0)
    }

    /// Componentwise `max(0, .)`.
    pub fn positive_part(&self) -> Self {
        Self::from_array(self.to_array().map(|v| v.max(0.0)))
    }

    pub fn norm1(&self) -> f64 {
        self.to_array().iter().map(|v| v.abs()).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.to_array().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }
}

impl From<[f64; 6]> for SitState {
    fn from(a: [f64; 6]) -> Self {
        Self::from_array(a)
    }
}
