use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Environmental capacity of the aquatic stage.
///
/// `Infinite` drops the logistic factor from the egg equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Capacity {
    Finite(f64),
    Infinite,
}

impl Capacity {
    pub fn finite(self) -> Option<f64> {
        match self {
            Capacity::Finite(k) => Some(k),
            Capacity::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Capacity::Infinite)
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capacity::Finite(k) => write!(f, "{k}"),
            Capacity::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Capacity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Capacity::Finite(k) => s.serialize_f64(*k),
            Capacity::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Capacity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(k) => Ok(Capacity::Finite(k)),
            Raw::Text(s) if s == "inf" => Ok(Capacity::Infinite),
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "K must be a number or \"inf\", got \"{s}\""
            ))),
        }
    }
}

/// Biological and release rates of the six-compartment model. Rates are per day.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Oviposition rate.
    #[serde(rename = "beta_E")]
    pub beta_e: f64,
    /// Hatching rate.
    #[serde(rename = "nu_E")]
    pub nu_e: f64,
    #[serde(rename = "delta_E")]
    pub delta_e: f64,
    #[serde(rename = "delta_M")]
    pub delta_m: f64,
    #[serde(rename = "delta_Y")]
    pub delta_y: f64,
    #[serde(rename = "delta_F")]
    pub delta_f: f64,
    #[serde(rename = "delta_U")]
    pub delta_u: f64,
    /// Sterile male death rate.
    pub delta_s: f64,
    /// Probability that an emerging adult is female.
    pub nu: f64,
    /// Mating rate with wild males.
    pub eta1: f64,
    /// Mating rate with sterile males.
    pub eta2: f64,
    #[serde(rename = "K")]
    pub capacity: Capacity,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::field_calibration()
    }
}

impl ModelParams {
    /// Field-calibrated rates with `eta1 = 1`, `eta2 = 0.7`, `delta_U = delta_F`
    /// and `K = 21000`.
    pub fn field_calibration() -> Self {
        Self {
            beta_e: 10.0,
            nu_e: 0.05,
            delta_e: 0.03,
            delta_m: 0.1,
            delta_y: 0.04,
            delta_f: 0.04,
            delta_u: 0.04,
            delta_s: 0.12,
            nu: 0.49,
            eta1: 1.0,
            eta2: 0.7,
            capacity: Capacity::Finite(21000.0),
        }
    }

    pub fn with_capacity(mut self, capacity: Capacity) -> Self {
        self.capacity = capacity;
        self
    }

    pub fn with_eta2(mut self, eta2: f64) -> Self {
        self.eta2 = eta2;
        self
    }

    /// `eta1 - eta2`.
    pub fn delta_eta(&self) -> f64 {
        self.eta1 - self.eta2
    }

    /// Hard invariants. Returns soft warnings (currently only `R0 <= 1`) on success.
    pub fn validate(&self) -> Result<Vec<String>> {
        let positive = [
            ("beta_E", self.beta_e),
            ("nu_E", self.nu_e),
            ("delta_E", self.delta_e),
            ("delta_M", self.delta_m),
            ("delta_Y", self.delta_y),
            ("delta_F", self.delta_f),
            ("delta_U", self.delta_u),
            ("delta_s", self.delta_s),
            ("eta1", self.eta1),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(invalid("nu", format!("must lie in (0, 1), got {}", self.nu)));
        }
        if !self.eta2.is_finite() || self.eta2 < 0.0 {
            return Err(invalid("eta2", format!("must be >= 0, got {}", self.eta2)));
        }
        if self.eta2 > self.eta1 {
            return Err(invalid(
                "eta2",
                format!("must not exceed eta1 = {}, got {}", self.eta1, self.eta2),
            ));
        }
        if self.delta_s < self.delta_m {
            return Err(invalid(
                "delta_s",
                format!("must be >= delta_M = {}, got {}", self.delta_m, self.delta_s),
            ));
        }
        if let Capacity::Finite(k) = self.capacity {
            if !k.is_finite() || k <= 0.0 {
                return Err(invalid("K", format!("must be > 0 or \"inf\", got {k}")));
            }
        }
        let mut warnings = Vec::new();
        let r0 = self.basic_offspring_number();
        if r0 <= 1.0 {
            warnings.push(format!(
                "R0 = {r0:.4} <= 1: the wild population dies out without releases"
            ));
        }
        Ok(warnings)
    }

    /// Parses and validates a parameter document.
    pub fn from_json_str(text: &str) -> Result<LoadedParams> {
        let params: ModelParams = serde_json::from_str(text)?;
        let warnings = params.validate()?;
        Ok(LoadedParams { params, warnings })
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<LoadedParams> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }
}

/// Parameters together with the soft warnings raised while validating them.
#[derive(Clone, Debug)]
pub struct LoadedParams {
    pub params: ModelParams,
    pub warnings: Vec<String>,
}

fn invalid(name: &'static str, reason: String) -> Error {
    Error::InvalidParameter { name, reason }
}
