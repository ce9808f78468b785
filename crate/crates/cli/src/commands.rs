use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;
use sit_core::certkit::{
    gain_from_certificate, max_eigenvalue, synthesize_certificate, synthesize_lyapunov_for_gain, verify_certificate,
    Certificate, SynthOptions,
};
use sit_core::controller::{CoupledMonitorConfig, FeedbackConfig};
use sit_core::model::{Capacity, ModelParams};
use sit_core::observer::{build_sit_lpv, gain_from_json_file};
use sit_core::sim::{
    check_envelope, convergence_time, fit_decay_rate, format_sig, run_closed_loop, run_coupled, run_observer, run_proportional,
    run_robustness, settling_time, Method, ObserverSetup, SimOptions, Trajectory,
};

use crate::args::{CertifyArgs, Kind, MethodArg, SimulateArgs, SynthesizeArgs};
use crate::scenario::{resolve, Resolved, ScenarioSpec};
use crate::Failure;

/// Fraction of the initial scale that counts as converged.
const CONVERGED: f64 = 1e-3;

fn load_params(path: Option<&Path>) -> Result<ModelParams, Failure> {
    let Some(path) = path else {
        return Ok(ModelParams::field_calibration());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read parameter file {}: {e}", path.display())))?;
    let loaded = ModelParams::from_json_str(&text)
        .map_err(|e| Failure::Usage(format!("invalid parameter file {}: {e}", path.display())))?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded.params)
}

fn read_certificate(path: &Path) -> Result<Certificate, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read certificate {}: {e}", path.display())))?;
    Certificate::from_json_str_with_outputs(&text, 2)
        .map_err(|e| Failure::Usage(format!("invalid certificate {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Four significant digits.
fn sig4(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let decimals = (3 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$}")
}

fn print_matrix(m: &DMatrix<f64>) {
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.6}")).collect();
        println!("  [{}]", cells.join(", "));
    }
}

pub fn threshold(params: Option<&Path>) -> Result<(), Failure> {
    let p = load_params(params)?;
    let r0 = p.basic_offspring_number();
    match p.theta_threshold() {
        Some(theta) => println!("theta* = {theta:.2}"),
        None => println!("no release needed"),
    }
    println!("R0 = {}", sig4(r0));
    Ok(())
}

pub fn certify(params: Option<&Path>, args: &CertifyArgs) -> Result<(), Failure> {
    let p = load_params(params)?.with_capacity(Capacity::Infinite);
    let mut cert = read_certificate(&args.cert)?;
    if let Some(xi) = args.xi {
        cert = cert.with_xi(xi)?;
    }
    let sys = build_sit_lpv(&p)?;
    let verdict = verify_certificate(&sys, &cert);
    println!("xi = {}", cert.xi());
    for (i, eig) in verdict.per_vertex.iter().enumerate() {
        println!("vertex {i}: lambda_max = {eig:.6e}");
    }
    let pd = if verdict.p_min_eig > 0.0 { "positive definite" } else { "NOT positive definite" };
    println!("P: min eigenvalue = {:.6e} ({pd})", verdict.p_min_eig);
    match gain_from_certificate(&cert) {
        Ok(l) => {
            println!("L = P^-1 R':");
            print_matrix(&l);
        }
        Err(e) => println!("L unavailable: {e}"),
    }
    if verdict.feasible {
        println!("verdict: FEASIBLE (worst eigenvalue {:.6e})", verdict.worst_eig);
        Ok(())
    } else {
        println!("verdict: INFEASIBLE (worst eigenvalue {:.6e})", verdict.worst_eig);
        Err(Failure::Domain("certificate is infeasible".into()))
    }
}

pub fn synthesize(params: Option<&Path>, args: &SynthesizeArgs) -> Result<(), Failure> {
    let p = load_params(params)?.with_capacity(Capacity::Infinite);
    let sys = build_sit_lpv(&p)?;
    let opts = SynthOptions { margin: args.margin, seed: args.seed, ..SynthOptions::default() };
    let cert = match synthesize_certificate(&sys, args.xi, &opts) {
        Ok(c) => c,
        Err(sit_core::error::Error::SynthesisFailed { best_worst_eig }) => {
            return Err(Failure::Domain(format!(
                "synthesis failed at xi = {}; best margin = {:.6e}",
                args.xi, -best_worst_eig
            )));
        }
        Err(e) => return Err(e.into()),
    };
    write_file(&args.out, &cert.to_json_string())?;
    let verdict = verify_certificate(&sys, &cert);
    println!("wrote {}", args.out.display());
    println!("margin = {:.6e}", -verdict.worst_eig);
    Ok(())
}

#[derive(Debug, Serialize)]
struct Envelope {
    monitor: &'static str,
    rate: f64,
    slack: f64,
    pass: bool,
    worst_ratio: f64,
}

#[derive(Debug, Serialize)]
struct Summary {
    kind: &'static str,
    t_end: f64,
    initial_norm: f64,
    final_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_error_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_error_norm: Option<f64>,
    decay_monitor: &'static str,
    decay_rate: Option<f64>,
    envelope: Option<Envelope>,
    convergence_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_convergence_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u_final: Option<f64>,
}

impl Summary {
    fn line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), num);
        let mut parts = vec![
            format!("kind={}", self.kind),
            format!("t_end={}", num(self.t_end)),
            format!("|x0|={}", num(self.initial_norm)),
            format!("|x(T)|={}", num(self.final_norm)),
        ];
        if let (Some(a), Some(b)) = (self.initial_error_norm, self.final_error_norm) {
            parts.push(format!("|e0|={}", num(a)));
            parts.push(format!("|e(T)|={}", num(b)));
        }
        parts.push(format!("decay_rate({})={}", self.decay_monitor, opt(self.decay_rate)));
        match &self.envelope {
            Some(env) => parts.push(format!(
                "envelope({}@{})={} worst_ratio={}",
                env.monitor,
                num(env.rate),
                if env.pass { "PASS" } else { "FAIL" },
                num(env.worst_ratio)
            )),
            None => parts.push("envelope=unavailable".into()),
        }
        parts.push(format!("t_conv={}", opt(self.convergence_time)));
        if self.final_error_norm.is_some() {
            parts.push(format!("t_conv(e)={}", opt(self.error_convergence_time)));
        }
        if let (Some(a), Some(b)) = (self.u_max, self.u_final) {
            parts.push(format!("u_max={}", num(a)));
            parts.push(format!("u_final={}", num(b)));
        }
        parts.join(" ")
    }
}

/// Plain decimals for moderate magnitudes, scientific notation otherwise.
fn num(v: f64) -> String {
    if v == 0.0 || (1e-3..1e7).contains(&v.abs()) {
        format_sig(v)
    } else {
        format!("{v:.6e}")
    }
}

struct GainSource {
    gain: DMatrix<f64>,
    lyapunov: Option<DMatrix<f64>>,
    xi: f64,
}

fn gain_source(r: &Resolved, p: &ModelParams) -> Result<GainSource, Failure> {
    if let Some(path) = &r.cert {
        let cert = read_certificate(path)?;
        let xi = r.xi.unwrap_or(cert.xi());
        let gain = gain_from_certificate(&cert)?;
        return Ok(GainSource { gain, lyapunov: Some(cert.p().clone()), xi });
    }
    let Some(path) = &r.gain else {
        return Err(Failure::Usage(format!("{} runs need an observer gain: pass --gain or --cert", r.kind.name())));
    };
    let gain = gain_from_json_file(path)
        .map_err(|e| Failure::Usage(format!("invalid gain file {}: {e}", path.display())))?;
    let xi = r.xi.unwrap_or(1.0);
    let sys = build_sit_lpv(&p.with_capacity(Capacity::Infinite))?;
    let lyapunov = match synthesize_lyapunov_for_gain(&sys, &gain, xi, &SynthOptions::default()) {
        Ok(c) => Some(c.p().clone()),
        Err(e) => {
            eprintln!("warning: no Lyapunov matrix for this gain at xi = {xi} ({e}); error monitors disabled");
            None
        }
    };
    Ok(GainSource { gain, lyapunov, xi })
}

fn envelope(tr: &Trajectory, monitor: &'static str, rate: f64, opts: &SimOptions) -> Result<Option<Envelope>, Failure> {
    let Some(values) = tr.monitor(monitor) else {
        return Ok(None);
    };
    let rep = check_envelope(&tr.times, values, rate, opts.envelope_slack, 2.0 * opts.dt)?;
    Ok(Some(Envelope { monitor, rate, slack: opts.envelope_slack, pass: rep.pass, worst_ratio: rep.worst_ratio }))
}

/// ||e(0)||, ||e(T)|| and the time after which ||e|| stays below CONVERGED ||e(0)||.
fn error_report(tr: &Trajectory) -> (Option<f64>, Option<f64>, Option<f64>) {
    let Some(errs) = tr.errors() else {
        return (None, None, None);
    };
    let norms: Vec<Vec<f64>> = errs.iter().map(|e| vec![e.iter().map(|v| v * v).sum::<f64>().sqrt()]).collect();
    let e0 = norms[0][0];
    let settle = if e0 > 0.0 { settling_time(&tr.times, &norms, &[e0], CONVERGED) } else { Some(tr.times[0]) };
    (Some(e0), norms.last().map(|n| n[0]), settle)
}

pub fn simulate(global_params: Option<&Path>, args: &SimulateArgs) -> Result<(), Failure> {
    let spec = match &args.spec {
        Some(path) => ScenarioSpec::load(path)?,
        None => ScenarioSpec::default(),
    };
    let mut warnings = Vec::new();
    let r = resolve(args, spec, &mut warnings)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let mut p = load_params(r.params.as_deref().or(global_params))?;
    match (r.capacity, r.kind) {
        (Some(k), _) => p = p.with_capacity(k),
        (None, Kind::Observer | Kind::Coupled) => p = p.with_capacity(Capacity::Infinite),
        _ => {}
    }
    p.validate()?;
    let opts = SimOptions {
        dt: r.dt,
        t_end: r.t_end,
        method: match args.method {
            MethodArg::Rk4 => Method::Rk4Fixed,
            MethodArg::Rk45 => Method::Rk45Adaptive,
        },
        projection: !args.no_projection,
        ..SimOptions::default()
    };
    opts.validate()?;
    if args.every == 0 {
        return Err(Failure::Usage("--every must be >= 1".into()));
    }

    let (tr, env, decay_monitor) = match r.kind {
        Kind::ClosedLoop | Kind::Robustness => {
            let cfg = FeedbackConfig::new(p, r.theta, r.alpha)?;
            let tr = if r.kind == Kind::Robustness {
                let eta2 = r
                    .eta2_plant
                    .ok_or_else(|| Failure::Usage("robustness runs need --eta2-plant".into()))?;
                run_robustness(&p, &cfg, eta2, &r.x0, &opts)?
            } else {
                run_closed_loop(&p, &cfg, &r.x0, &opts)?
            };
            let env = envelope(&tr, "W", cfg.c_p, &opts)?;
            (tr, env, "W")
        }
        Kind::Proportional => {
            let cfg = FeedbackConfig::new(p, r.theta, 1.0)?;
            let tr = run_proportional(&p, r.theta, &r.x0.wild(), &opts)?;
            let env = envelope(&tr, "V", cfg.c, &opts)?;
            (tr, env, "V")
        }
        Kind::Observer => {
            let src = gain_source(&r, &p)?;
            let mut setup = ObserverSetup::new(&src.gain);
            if let Some(pm) = &src.lyapunov {
                setup = setup.with_lyapunov(pm, src.xi);
            }
            let u = r.u_const;
            if !(u.is_finite() && u >= 0.0) {
                return Err(Failure::Usage(format!("u_const must be finite and >= 0, got {u}")));
            }
            let tr = run_observer(&p, &setup, &move |_| u, &r.x0, &r.xh0, &opts)?;
            let env = match &src.lyapunov {
                Some(pm) => envelope(&tr, "ePe", src.xi / max_eigenvalue(pm)?, &opts)?,
                None => None,
            };
            (tr, env, "ePe")
        }
        Kind::Coupled => {
            let cfg = FeedbackConfig::new(p.with_capacity(Capacity::Infinite), r.theta, r.alpha)?;
            let src = gain_source(&r, &p)?;
            let mut setup = ObserverSetup::new(&src.gain);
            if let Some(pm) = &src.lyapunov {
                setup = setup.with_lyapunov(pm, src.xi);
            }
            let tr = run_coupled(&p, &cfg, &setup, &r.x0, &r.xh0, &opts)?;
            let env = match &src.lyapunov {
                Some(pm) => envelope(&tr, "H", CoupledMonitorConfig::derive(&cfg, pm, src.xi)?.c_e, &opts)?,
                None => None,
            };
            (tr, env, if src.lyapunov.is_some() { "H" } else { "W" })
        }
    };

    if let Some(out) = &r.out {
        let file = File::create(out).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", out.display())))?;
        tr.write_csv(BufWriter::new(file), args.every)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", out.display())))?;
    }

    let (initial_error_norm, final_error_norm, error_convergence_time) = error_report(&tr);
    let summary = Summary {
        kind: r.kind.name(),
        t_end: *tr.times.last().expect("non-empty trajectory"),
        initial_norm: tr.states[0].norm2(),
        final_norm: tr.final_state().norm2(),
        initial_error_norm,
        final_error_norm,
        decay_monitor,
        decay_rate: tr.monitor(decay_monitor).and_then(|v| fit_decay_rate(&tr.times, v).ok()),
        envelope: env,
        convergence_time: convergence_time(&tr, CONVERGED),
        error_convergence_time,
        u_max: tr.controls.as_ref().map(|u| u.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        u_final: tr.controls.as_ref().and_then(|u| u.last().copied()),
    };
    println!("{}", summary.line());
    if let Some(path) = &args.summary {
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        write_file(path, &json)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_significant_digits() {
        assert_eq!(sig4(73.6178), "73.62");
        assert_eq!(sig4(0.355054), "0.3551");
        assert_eq!(sig4(1234.6), "1235");
        assert_eq!(sig4(0.0), "0");
    }
}
