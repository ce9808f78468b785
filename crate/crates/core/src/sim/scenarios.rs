use nalgebra::{DMatrix, Matrix2x6, Matrix6, Matrix6x2, Vector2, Vector6};

use super::integrate::{integrate, SimOptions};
use super::trajectory::Trajectory;
use crate::controller::{CoupledMonitorConfig, FeedbackConfig};
use crate::error::{Error, Result};
use crate::model::{self, rhs_proportional, Capacity, ModelParams, SitState};
use crate::observer::{build_sit_lpv, kappa_of_output, SitOutput};

/// Perturbs the measured output; results are clamped to >= 0.
pub type MeasurementHook<'a> = &'a dyn Fn(f64, SitOutput) -> SitOutput;

/// Observer gain plus optional Lyapunov matrix for the error monitors.
#[derive(Clone, Copy)]
pub struct ObserverSetup<'a> {
    pub gain: &'a DMatrix<f64>,
    /// P of the error quadratic e' P e; enables the ePe and H traces.
    pub lyapunov: Option<&'a DMatrix<f64>>,
    pub xi: f64,
    pub measurement: Option<MeasurementHook<'a>>,
}

impl<'a> ObserverSetup<'a> {
    pub fn new(gain: &'a DMatrix<f64>) -> Self {
        Self { gain, lyapunov: None, xi: 1.0, measurement: None }
    }

    pub fn with_lyapunov(mut self, p: &'a DMatrix<f64>, xi: f64) -> Self {
        self.lyapunov = Some(p);
        self.xi = xi;
        self
    }

    pub fn with_measurement(mut self, hook: MeasurementHook<'a>) -> Self {
        self.measurement = Some(hook);
        self
    }

    fn measure(&self, t: f64, x: &[f64]) -> SitOutput {
        let y = SitOutput::new(x[1].max(0.0), x[5].max(0.0));
        match self.measurement {
            Some(h) => {
                let z = h(t, y);
                SitOutput::new(z.males.max(0.0), z.sterile_males.max(0.0))
            }
            None => y,
        }
    }
}

/// Observer right-hand side with the LPV matrices unpacked once.
struct ObserverField {
    a0: Matrix6<f64>,
    b1: Matrix6<f64>,
    d: Vector6<f64>,
    l: Matrix6x2<f64>,
    c: Matrix2x6<f64>,
}

impl ObserverField {
    fn new(p: &ModelParams, l: &DMatrix<f64>) -> Result<Self> {
        if l.nrows() != 6 || l.ncols() != 2 {
            return Err(Error::Dimension(format!("L must be 6x2, got {}x{}", l.nrows(), l.ncols())));
        }
        if l.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("L"));
        }
        let sys = build_sit_lpv(&p.with_capacity(Capacity::Infinite))?;
        let a0 = sys.matrix_at(&[0.0])?;
        let a1 = sys.matrix_at(&[1.0])?;
        Ok(Self {
            a0: Matrix6::from_iterator(a0.iter().copied()),
            b1: Matrix6::from_iterator((a1 - &a0).iter().copied()),
            d: Vector6::from_iterator(sys.d().iter().copied()),
            l: Matrix6x2::from_iterator(l.iter().copied()),
            c: Matrix2x6::from_iterator(sys.c().iter().copied()),
        })
    }

    fn rhs(&self, xh: &[f64], y: &SitOutput, u: f64) -> [f64; 6] {
        let x = Vector6::from_column_slice(xh);
        let kappa = kappa_of_output(y);
        let innovation = self.c * x - Vector2::new(y.males, y.sterile_males);
        let dx = (self.a0 + self.b1 * kappa) * x + self.d * u - self.l * innovation;
        dx.into()
    }
}

fn check_plant_state(x0: &SitState) -> Result<()> {
    x0.ensure_finite("initial state")?;
    if !x0.is_nonnegative() {
        return Err(Error::InvalidParameter { name: "x0", reason: format!("plant state must be >= 0, got {x0:?}") });
    }
    Ok(())
}

fn state_feedback(cfg: &FeedbackConfig, x: &[f64; 6]) -> f64 {
    let p = |v: f64| v.max(0.0);
    cfg.g_raw(p(x[0]), p(x[1]), p(x[2]), p(x[5])).max(0.0)
}

fn quad(p: &DMatrix<f64>, e: &[f64; 6]) -> f64 {
    let v = nalgebra::DVector::from_row_slice(e);
    v.dot(&(p * &v))
}

/// Plant (Ms driven by u = max(0, G)) with parameters `p` and the controller `cfg`.
/// Records u, V and W.
pub fn run_closed_loop(p: &ModelParams, cfg: &FeedbackConfig, x0: &SitState, opts: &SimOptions) -> Result<Trajectory> {
    p.validate()?;
    check_plant_state(x0)?;
    let samples = integrate(
        |_, x: &[f64; 6]| model::field(p, x, state_feedback(cfg, x)),
        x0.to_array(),
        opts,
        &[true; 6],
    )?;
    let states: Vec<SitState> = samples.states.iter().map(|s| SitState::from_array(*s)).collect();
    let controls = samples.states.iter().map(|s| state_feedback(cfg, s)).collect();
    let v = states.iter().map(|s| cfg.lyapunov_v(&s.positive_part().wild())).collect();
    let w = states.iter().map(|s| cfg.lyapunov_w(&s.positive_part())).collect();
    let mut tr =
        Trajectory { times: samples.times, states, estimates: None, controls: Some(controls), monitors: Vec::new() };
    tr.push_monitor("V", v);
    tr.push_monitor("W", w);
    Ok(tr)
}

/// Closed loop whose plant uses `eta2_plant` while the controller keeps its own eta2.
pub fn run_robustness(
    p: &ModelParams,
    cfg: &FeedbackConfig,
    eta2_plant: f64,
    x0: &SitState,
    opts: &SimOptions,
) -> Result<Trajectory> {
    run_closed_loop(&p.with_eta2(eta2_plant), cfg, x0, opts)
}

/// Five-state system with M_s = theta M. Records V; the stored M_s column is theta M.
pub fn run_proportional(p: &ModelParams, theta: f64, x0: &[f64; 5], opts: &SimOptions) -> Result<Trajectory> {
    // V does not depend on alpha
    let cfg = FeedbackConfig::new(*p, theta, 1.0)?;
    if x0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter { name: "x0", reason: format!("must be finite and >= 0, got {x0:?}") });
    }
    let samples = integrate(|_, x: &[f64; 5]| rhs_proportional(p, *x, theta), *x0, opts, &[true; 5])?;
    let states = samples
        .states
        .iter()
        .map(|s| SitState::new(s[0], s[1], s[2], s[3], s[4], theta * s[1].max(0.0)))
        .collect();
    let v = samples.states.iter().map(|s| cfg.lyapunov_v(s)).collect();
    let mut tr = Trajectory { times: samples.times, states, estimates: None, controls: None, monitors: Vec::new() };
    tr.push_monitor("V", v);
    Ok(tr)
}

/// Open-loop plant under `u_signal` with an observer fed by the plant output.
///
/// Requires K = infinity. Records estimates, u and, given P, e' P e.
pub fn run_observer(
    p: &ModelParams,
    setup: &ObserverSetup<'_>,
    u_signal: &dyn Fn(f64) -> f64,
    x0: &SitState,
    xh0: &SitState,
    opts: &SimOptions,
) -> Result<Trajectory> {
    p.validate()?;
    if let Capacity::Finite(k) = p.capacity {
        return Err(Error::FiniteCapacity(k));
    }
    check_plant_state(x0)?;
    xh0.ensure_finite("initial estimate")?;
    let obs = ObserverField::new(p, setup.gain)?;
    let u_at = |t: f64| u_signal(t).max(0.0);
    let samples = integrate(
        |t, z: &[f64; 12]| {
            let x: [f64; 6] = std::array::from_fn(|i| z[i]);
            let u = u_at(t);
            let y = setup.measure(t, &x);
            let dx = model::field(p, &x, u);
            let dxh = obs.rhs(&z[6..], &y, u);
            std::array::from_fn(|i| if i < 6 { dx[i] } else { dxh[i - 6] })
        },
        join(x0, xh0),
        opts,
        &std::array::from_fn(|i| i < 6),
    )?;
    let controls: Vec<f64> = samples.times.iter().map(|t| u_signal(*t)).collect();
    if let Some(u) = controls.iter().find(|u| u.is_nan() || **u < 0.0) {
        return Err(Error::NegativeControl(*u));
    }
    let mut tr = split(samples.times, &samples.states, Some(controls));
    if let Some(pm) = setup.lyapunov {
        let epe = tr.errors().expect("estimates recorded").iter().map(|e| quad(pm, e)).collect();
        tr.push_monitor("ePe", epe);
    }
    Ok(tr)
}

/// Plant driven by the estimate-based law u_hat; the observer runs on the
/// K = infinity model with the controller's parameters.
///
/// Records estimates, u_hat, V, W and, given P, H (with derived lambda) and e' P e.
pub fn run_coupled(
    p: &ModelParams,
    cfg: &FeedbackConfig,
    setup: &ObserverSetup<'_>,
    x0: &SitState,
    xh0: &SitState,
    opts: &SimOptions,
) -> Result<Trajectory> {
    p.validate()?;
    check_plant_state(x0)?;
    xh0.ensure_finite("initial estimate")?;
    let obs = ObserverField::new(cfg.params(), setup.gain)?;
    let monitor = match setup.lyapunov {
        Some(pm) => Some(CoupledMonitorConfig::derive(cfg, pm, setup.xi)?),
        None => None,
    };
    let control = |t: f64, z: &[f64; 12]| {
        let y = setup.measure(t, &z[..6]);
        (cfg.u_hat_raw(z[6], z[8], y.males, y.sterile_males), y)
    };
    let samples = integrate(
        |t, z: &[f64; 12]| {
            let x: [f64; 6] = std::array::from_fn(|i| z[i]);
            let (u, y) = control(t, z);
            let dx = model::field(p, &x, u);
            let dxh = obs.rhs(&z[6..], &y, u);
            std::array::from_fn(|i| if i < 6 { dx[i] } else { dxh[i - 6] })
        },
        join(x0, xh0),
        opts,
        &std::array::from_fn(|i| i < 6),
    )?;
    let controls = samples.times.iter().zip(&samples.states).map(|(t, z)| control(*t, z).0).collect();
    let mut tr = split(samples.times, &samples.states, Some(controls));
    let v = tr.states.iter().map(|s| cfg.lyapunov_v(&s.positive_part().wild())).collect();
    let w: Vec<f64> = tr.states.iter().map(|s| cfg.lyapunov_w(&s.positive_part())).collect();
    tr.push_monitor("V", v);
    if let (Some(pm), Some(mon)) = (setup.lyapunov, monitor) {
        let epe: Vec<f64> = tr.errors().expect("estimates recorded").iter().map(|e| quad(pm, e)).collect();
        let h = w.iter().zip(&epe).map(|(w, e)| w + mon.lambda * e.max(0.0).sqrt()).collect();
        tr.push_monitor("H", h);
        tr.push_monitor("ePe", epe);
    }
    tr.push_monitor("W", w);
    Ok(tr)
}

fn join(x: &SitState, xh: &SitState) -> [f64; 12] {
    let (a, b) = (x.to_array(), xh.to_array());
    std::array::from_fn(|i| if i < 6 { a[i] } else { b[i - 6] })
}

fn split(times: Vec<f64>, states: &[[f64; 12]], controls: Option<Vec<f64>>) -> Trajectory {
    let plant = states.iter().map(|z| SitState::from_slice(&z[..6]).expect("six components")).collect();
    let est = states.iter().map(|z| SitState::from_slice(&z[6..]).expect("six components")).collect();
    Trajectory { times, states: plant, estimates: Some(est), controls, monitors: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observer::{observer_rhs, ObserverState};

    fn short() -> SimOptions {
        SimOptions { t_end: 5.0, ..SimOptions::default() }
    }

    #[test]
    fn static_observer_field_matches_public_rhs() {
        let p = ModelParams::field_calibration().with_capacity(Capacity::Infinite);
        let l = DMatrix::from_fn(6, 2, |i, j| (i as f64 - 2.0) * (j as f64 + 0.5));
        let obs = ObserverField::new(&p, &l).unwrap();
        let sys = build_sit_lpv(&p).unwrap();
        let xh = [10.0, -3.0, 7.0, 2.0, 1.0, 40.0];
        let y = SitOutput::new(5.0, 30.0);
        let a = obs.rhs(&xh, &y, 12.0);
        let b = observer_rhs(&ObserverState::new(SitState::from_array(xh)), &y, 12.0, &l, &sys).unwrap();
        for i in 0..6 {
            assert!((a[i] - b[i]).abs() <= 1e-12 * (1.0 + b[i].abs()));
        }
    }

    #[test]
    fn zero_initial_state_stays_zero() {
        let p = ModelParams::field_calibration();
        let cfg = FeedbackConfig::new(p, 290.0, 90.0).unwrap();
        let tr = run_closed_loop(&p, &cfg, &SitState::zero(), &short()).unwrap();
        assert!(tr.states.iter().all(|s| *s == SitState::zero()));
        assert!(tr.controls.unwrap().iter().all(|u| *u == 0.0));
        let tr = run_proportional(&p, 290.0, &[0.0; 5], &short()).unwrap();
        assert!(tr.monitor("V").unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn matched_robustness_is_closed_loop() {
        let p = ModelParams::field_calibration();
        let cfg = FeedbackConfig::new(p, 290.0, 90.0).unwrap();
        let x0 = SitState::new(20700.0, 5300.0, 1500.0, 13000.0, 0.0, 0.0);
        let a = run_closed_loop(&p, &cfg, &x0, &short()).unwrap();
        let b = run_robustness(&p, &cfg, 0.7, &x0, &short()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_estimate_reproduces_state_feedback() {
        let p = ModelParams::field_calibration().with_capacity(Capacity::Infinite);
        let cfg = FeedbackConfig::new(p, 290.0, 90.0).unwrap();
        let l = DMatrix::from_element(6, 2, 0.5);
        let x0 = SitState::new(20000.0, 5000.0, 1500.0, 12000.0, 500.0, 0.0);
        let opts = SimOptions { t_end: 20.0, ..SimOptions::default() };
        let c = run_coupled(&p, &cfg, &ObserverSetup::new(&l), &x0, &x0, &opts).unwrap();
        let s = run_closed_loop(&p, &cfg, &x0, &opts).unwrap();
        for (a, b) in c.states.iter().zip(&s.states) {
            for (u, v) in a.to_array().iter().zip(b.to_array()) {
                assert!((u - v).abs() <= 1e-9 * (1.0 + v.abs()));
            }
        }
        let err = c.errors().unwrap();
        assert!(err.iter().all(|e| e.iter().all(|v| v.abs() <= 1e-6 * x0.norm2())));
    }

    #[test]
    fn observer_requires_infinite_capacity() {
        let l = DMatrix::zeros(6, 2);
        let x = SitState::zero();
        let r = run_observer(&ModelParams::field_calibration(), &ObserverSetup::new(&l), &|_| 0.0, &x, &x, &short());
        assert!(matches!(r, Err(Error::FiniteCapacity(_))));
    }

    #[test]
    fn measurement_hook_is_applied() {
        let p = ModelParams::field_calibration().with_capacity(Capacity::Infinite);
        let l = DMatrix::from_fn(6, 2, |i, j| if (i, j) == (1, 0) || (i, j) == (5, 1) { 1.0 } else { 0.0 });
        let x0 = SitState::new(100.0, 50.0, 20.0, 10.0, 5.0, 10.0);
        let bias = |_: f64, y: SitOutput| SitOutput::new(y.males + 100.0, y.sterile_males);
        let clean = run_observer(&p, &ObserverSetup::new(&l), &|_| 0.0, &x0, &x0, &short()).unwrap();
        let noisy =
            run_observer(&p, &ObserverSetup::new(&l).with_measurement(&bias), &|_| 0.0, &x0, &x0, &short()).unwrap();
        assert_eq!(clean.states, noisy.states);
        assert!(noisy.estimates.unwrap().last().unwrap().males > clean.estimates.unwrap().last().unwrap().males + 1.0);
    }

    #[test]
    fn rejects_negative_plant_state_and_signal() {
        let p = ModelParams::field_calibration();
        let cfg = FeedbackConfig::new(p, 290.0, 90.0).unwrap();
        let bad = SitState::new(-1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(run_closed_loop(&p, &cfg, &bad, &short()).is_err());
        let pi = p.with_capacity(Capacity::Infinite);
        let l = DMatrix::zeros(6, 2);
        let x = SitState::zero();
        let r = run_observer(&pi, &ObserverSetup::new(&l), &|_| -1.0, &x, &x, &short());
        assert!(matches!(r, Err(Error::NegativeControl(_))));
    }
}
