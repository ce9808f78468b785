use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Classic fixed-step fourth-order Runge-Kutta.
    Rk4Fixed,
    /// Dormand-Prince 5(4) with step-size control.
    Rk45Adaptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Step [days]; the initial step for the adaptive method.
    pub dt: f64,
    pub t_end: f64,
    pub method: Method,
    /// Clamp plant components to >= 0 after every step.
    pub projection: bool,
    /// Multiplicative allowance used by envelope checks.
    pub envelope_slack: f64,
    /// Keep every k-th step (the final time is always kept).
    pub record_every: usize,
    /// Local error tolerances of the adaptive method.
    pub rtol: f64,
    pub atol: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_end: 1000.0,
            method: Method::Rk4Fixed,
            projection: true,
            envelope_slack: 1.05,
            record_every: 1,
            rtol: 1e-9,
            atol: 1e-9,
        }
    }
}

impl SimOptions {
    pub fn with_horizon(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidOptions(s));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be finite and > 0, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be finite and > 0, got {}", self.t_end));
        }
        if !(self.envelope_slack.is_finite() && self.envelope_slack >= 1.0) {
            return bad(format!("envelope_slack must be >= 1, got {}", self.envelope_slack));
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1".into());
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("tolerances must be > 0".into());
        }
        Ok(())
    }
}

/// Recorded samples of an integration.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
}

/// Integrates x' = field(t, x) from t = 0. Components flagged in `nonneg` are
/// clamped to >= 0 after each accepted step when projection is on.
pub fn integrate<const N: usize>(
    mut field: impl FnMut(f64, &[f64; N]) -> [f64; N],
    x0: [f64; N],
    opts: &SimOptions,
    nonneg: &[bool; N],
) -> Result<Samples<N>> {
    opts.validate()?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    let mut x = x0;
    let mut out = Samples { times: vec![0.0], states: vec![x0] };
    let project = |x: &mut [f64; N]| {
        if opts.projection {
            for (v, keep) in x.iter_mut().zip(nonneg) {
                if *keep && *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    };
    match opts.method {
        Method::Rk4Fixed => {
            let steps = (opts.t_end / opts.dt - 1e-9).ceil().max(1.0) as usize;
            let mut t = 0.0;
            for i in 1..=steps {
                let t_next = if i == steps { opts.t_end } else { i as f64 * opts.dt };
                let next = rk4_step(&mut field, t, &x, t_next - t);
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Diverged { t: t_next, last_valid: t });
                }
                x = next;
                project(&mut x);
                t = t_next;
                if i % opts.record_every == 0 || i == steps {
                    out.times.push(t);
                    out.states.push(x);
                }
            }
        }
        Method::Rk45Adaptive => {
            let mut t = 0.0;
            let mut h = opts.dt.min(opts.t_end);
            let h_min = 1e-12 * opts.t_end;
            let mut accepted = 0usize;
            while t < opts.t_end {
                h = h.min(opts.t_end - t);
                let (next, err) = dopri_step(&mut field, t, &x, h);
                let scale_err = next
                    .iter()
                    .zip(&x)
                    .zip(&err)
                    .map(|((a, b), e)| e / (opts.atol + opts.rtol * a.abs().max(b.abs())))
                    .fold(0.0f64, |m, r| m.max(r.abs()));
                if !scale_err.is_finite() || next.iter().any(|v| !v.is_finite()) {
                    if h <= h_min {
                        return Err(Error::Diverged { t: t + h, last_valid: t });
                    }
                    h *= 0.25;
                    continue;
                }
                if scale_err <= 1.0 {
                    t = if opts.t_end - (t + h) < h_min { opts.t_end } else { t + h };
                    x = next;
                    project(&mut x);
                    accepted += 1;
                    if accepted.is_multiple_of(opts.record_every) || t >= opts.t_end {
                        out.times.push(t);
                        out.states.push(x);
                    }
                } else if h <= h_min {
                    return Err(Error::Diverged { t: t + h, last_valid: t });
                }
                let factor = if scale_err == 0.0 { 5.0 } else { (0.9 * scale_err.powf(-0.2)).clamp(0.2, 5.0) };
                h *= factor;
            }
        }
    }
    Ok(out)
}

fn axpy<const N: usize>(x: &[f64; N], h: f64, k: &[[f64; N]], w: &[f64]) -> [f64; N] {
    std::array::from_fn(|i| x[i] + h * k.iter().zip(w).map(|(kj, wj)| wj * kj[i]).sum::<f64>())
}

fn rk4_step<const N: usize>(
    field: &mut impl FnMut(f64, &[f64; N]) -> [f64; N],
    t: f64,
    x: &[f64; N],
    h: f64,
) -> [f64; N] {
    let k1 = field(t, x);
    let k2 = field(t + h / 2.0, &axpy(x, h / 2.0, &[k1], &[1.0]));
    let k3 = field(t + h / 2.0, &axpy(x, h / 2.0, &[k2], &[1.0]));
    let k4 = field(t + h, &axpy(x, h, &[k3], &[1.0]));
    axpy(x, h / 6.0, &[k1, k2, k3, k4], &[1.0, 2.0, 2.0, 1.0])
}

/// One Dormand-Prince step: fifth-order solution and the difference to the embedded fourth-order one.
fn dopri_step<const N: usize>(
    field: &mut impl FnMut(f64, &[f64; N]) -> [f64; N],
    t: f64,
    x: &[f64; N],
    h: f64,
) -> ([f64; N], [f64; N]) {
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A2: [f64; 1] = [1.0 / 5.0];
    const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
    const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
    const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
    const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
    const B5: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
    const B4: [f64; 7] =
        [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

    let k1 = field(t, x);
    let k2 = field(t + C[0] * h, &axpy(x, h, &[k1], &A2));
    let k3 = field(t + C[1] * h, &axpy(x, h, &[k1, k2], &A3));
    let k4 = field(t + C[2] * h, &axpy(x, h, &[k1, k2, k3], &A4));
    let k5 = field(t + C[3] * h, &axpy(x, h, &[k1, k2, k3, k4], &A5));
    let k6 = field(t + C[4] * h, &axpy(x, h, &[k1, k2, k3, k4, k5], &A6));
    let x5 = axpy(x, h, &[k1, k2, k3, k4, k5, k6], &B5);
    let k7 = field(t + C[5] * h, &x5);
    let x4 = axpy(x, h, &[k1, k2, k3, k4, k5, k6, k7], &B4);
    let err = std::array::from_fn(|i| x5[i] - x4[i]);
    (x5, err)
}
