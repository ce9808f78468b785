use std::path::{Path, PathBuf};

use serde::Deserialize;
use sit_core::model::{Capacity, SitState};

use crate::args::{Kind, SimulateArgs};
use crate::Failure;

/// Scenario file contents; every field is optional and overrides the matching flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: Option<Kind>,
    pub params: Option<PathBuf>,
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
    pub eta2_plant: Option<f64>,
    #[serde(rename = "K")]
    pub capacity: Option<Capacity>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub xh0: Option<Vec<f64>>,
    pub u_const: Option<f64>,
    pub gain: Option<PathBuf>,
    pub cert: Option<PathBuf>,
    pub xi: Option<f64>,
    pub out: Option<PathBuf>,
}

impl ScenarioSpec {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read scenario file {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("invalid scenario file {}: {e}", path.display())))
    }
}

/// Flags and file merged; file values win.
#[derive(Debug)]
pub struct Resolved {
    pub kind: Kind,
    pub params: Option<PathBuf>,
    pub theta: f64,
    pub alpha: f64,
    pub eta2_plant: Option<f64>,
    pub capacity: Option<Capacity>,
    pub dt: f64,
    pub t_end: f64,
    pub x0: SitState,
    pub xh0: SitState,
    pub u_const: f64,
    pub gain: Option<PathBuf>,
    pub cert: Option<PathBuf>,
    pub xi: Option<f64>,
    pub out: Option<PathBuf>,
}

fn pick<T: PartialEq>(name: &str, file: Option<T>, flag: Option<T>, warnings: &mut Vec<String>) -> Option<T> {
    match (file, flag) {
        (Some(f), Some(g)) => {
            if f != g {
                warnings.push(format!("scenario file value for {name} overrides the command-line flag"));
            }
            Some(f)
        }
        (f, g) => f.or(g),
    }
}

pub fn parse_vector(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("{what}: cannot parse {:?} as a number", s.trim())))
        })
        .collect()
}

/// Five components are read as (E, M, Y, F, U) with M_s = 0.
pub fn state_from(values: &[f64], what: &str) -> Result<SitState, Failure> {
    match values.len() {
        5 => Ok(SitState::new(values[0], values[1], values[2], values[3], values[4], 0.0)),
        6 => Ok(SitState::from_array(std::array::from_fn(|i| values[i]))),
        n => Err(Failure::Usage(format!("{what} needs 5 or 6 comma-separated values, got {n}"))),
    }
}

pub fn parse_capacity(text: &str) -> Result<Capacity, Failure> {
    if text.eq_ignore_ascii_case("inf") || text.eq_ignore_ascii_case("infinite") {
        return Ok(Capacity::Infinite);
    }
    text.parse::<f64>()
        .map(Capacity::Finite)
        .map_err(|_| Failure::Usage(format!("K must be a number or \"inf\", got {text:?}")))
}

fn default_states(kind: Kind) -> (SitState, SitState) {
    match kind {
        Kind::Observer => (
            SitState::new(400.0, 100.0, 150.0, 120.0, 120.0, 50.0),
            SitState::new(120.0, 70.0, 70.0, 50.0, 60.0, 0.0),
        ),
        Kind::Coupled => (
            SitState::new(20000.0, 5000.0, 1500.0, 12000.0, 500.0, 0.0),
            SitState::new(2000.0, 500.0, 150.0, 1200.0, 0.0, 0.0),
        ),
        _ => {
            let x0 = SitState::new(20700.0, 5300.0, 1500.0, 13000.0, 0.0, 0.0);
            (x0, x0)
        }
    }
}

fn default_horizon(kind: Kind) -> f64 {
    match kind {
        Kind::Robustness => 2000.0,
        Kind::Coupled => 1500.0,
        _ => 1000.0,
    }
}

pub fn resolve(args: &SimulateArgs, spec: ScenarioSpec, warnings: &mut Vec<String>) -> Result<Resolved, Failure> {
    let kind = pick("kind", spec.kind, args.kind, warnings)
        .ok_or_else(|| Failure::Usage("simulate needs --kind or a scenario file with \"kind\"".into()))?;
    let flag_x0 = args.x0.as_deref().map(|s| parse_vector(s, "--x0")).transpose()?;
    let flag_xh0 = args.xh0.as_deref().map(|s| parse_vector(s, "--xh0")).transpose()?;
    let flag_k = args.capacity.as_deref().map(parse_capacity).transpose()?;
    let (dx0, dxh0) = default_states(kind);
    let x0 = match pick("x0", spec.x0, flag_x0, warnings) {
        Some(v) => state_from(&v, "x0")?,
        None => dx0,
    };
    let xh0 = match pick("xh0", spec.xh0, flag_xh0, warnings) {
        Some(v) => state_from(&v, "xh0")?,
        None => dxh0,
    };
    Ok(Resolved {
        kind,
        params: spec.params,
        theta: pick("theta", spec.theta, args.theta, warnings).unwrap_or(290.0),
        alpha: pick("alpha", spec.alpha, args.alpha, warnings).unwrap_or(90.0),
        eta2_plant: pick("eta2_plant", spec.eta2_plant, args.eta2_plant, warnings),
        capacity: pick("K", spec.capacity, flag_k, warnings),
        dt: pick("dt", spec.dt, args.dt, warnings).unwrap_or(0.01),
        t_end: pick("t_end", spec.t_end, args.t_end, warnings).unwrap_or(default_horizon(kind)),
        x0,
        xh0,
        u_const: pick("u_const", spec.u_const, args.u_const, warnings).unwrap_or(500000.0),
        gain: pick("gain", spec.gain, args.gain.clone(), warnings),
        cert: pick("cert", spec.cert, args.cert.clone(), warnings),
        xi: pick("xi", spec.xi, args.xi, warnings),
        out: pick("out", spec.out, args.out.clone(), warnings),
    })
}
