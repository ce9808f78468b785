use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::barrier::{AffineLmi, BarrierProblem, BarrierSettings};
use super::certificate::{verify_certificate, Certificate};
use super::eigen::sym_eigen;
use super::lpv::{enumerate_vertices, LpvSystem};
use crate::error::{Error, Result};

/// Settings for certificate synthesis.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthOptions {
    /// Required distance of the worst residual eigenvalue below zero.
    pub margin: f64,
    pub seed: u64,
    /// Barrier-parameter increases per attempt.
    pub max_outer: usize,
    /// Additional attempts from perturbed starting points.
    pub restarts: usize,
    /// Largest admissible eigenvalue of the returned P.
    pub max_p_eig: f64,
    /// Bound on the Frobenius norm of R in the normalized problem (trace P <= 1).
    pub r_bound: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { margin: 1e-6, seed: 0, max_outer: 14, restarts: 3, max_p_eig: 1e8, r_bound: 1e3 }
    }
}

impl SynthOptions {
    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidOptions(what.to_string()));
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return bad("margin must be finite and > 0");
        }
        if !(self.max_p_eig.is_finite() && self.max_p_eig > 0.0) {
            return bad("max_p_eig must be finite and > 0");
        }
        if !(self.r_bound.is_finite() && self.r_bound > 0.0) {
            return bad("r_bound must be finite and > 0");
        }
        if self.max_outer == 0 {
            return bad("max_outer must be >= 1");
        }
        Ok(())
    }
}

/// Finds (P, R) making every vertex residual negative definite with the requested margin.
///
/// Solves min t s.t. t I - He(P A_v - R' C) > 0, P > 0, tr P < 1, |R| < r_bound,
/// then rescales (P, R) so that the xi I term is absorbed.
pub fn synthesize_certificate(sys: &LpvSystem, xi: f64, opts: &SynthOptions) -> Result<Certificate> {
    opts.validate()?;
    check_xi(xi)?;
    let n = sys.n();
    let trivial = Certificate::new(DMatrix::identity(n, n), DMatrix::zeros(sys.m(), n), xi)?;
    if accept(sys, &trivial, opts) {
        return Ok(trivial);
    }
    let vertices = enumerate_vertices(sys)?;
    let layout = Layout::new(n, sys.m(), true);
    let problem = layout.problem(&vertices, sys.c(), opts.r_bound);
    run_attempts(sys, xi, opts, &layout, &problem, &vertices, None)
}

/// Finds P such that V(e) = e' P e certifies the observer error dynamics for a fixed gain L.
///
/// Returns the certificate (P, L' P, xi).
pub fn synthesize_lyapunov_for_gain(
    sys: &LpvSystem,
    l: &DMatrix<f64>,
    xi: f64,
    opts: &SynthOptions,
) -> Result<Certificate> {
    opts.validate()?;
    check_xi(xi)?;
    let n = sys.n();
    if l.nrows() != n || l.ncols() != sys.m() {
        return Err(Error::Dimension(format!("L must be {n}x{}, got {}x{}", sys.m(), l.nrows(), l.ncols())));
    }
    let trivial = Certificate::new(DMatrix::identity(n, n), l.transpose(), xi)?;
    if accept(sys, &trivial, opts) {
        return Ok(trivial);
    }
    let vertices: Vec<DMatrix<f64>> = enumerate_vertices(sys)?.into_iter().map(|a| a - l * sys.c()).collect();
    let layout = Layout::new(n, sys.m(), false);
    let problem = layout.problem(&vertices, sys.c(), opts.r_bound);
    run_attempts(sys, xi, opts, &layout, &problem, &vertices, Some(l))
}

fn check_xi(xi: f64) -> Result<()> {
    if xi.is_finite() && xi > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "xi", reason: format!("must be finite and > 0, got {xi}") })
    }
}

fn accept(sys: &LpvSystem, cert: &Certificate, opts: &SynthOptions) -> bool {
    verify_certificate(sys, cert).holds_with_margin(opts.margin)
        && sym_eigen(cert.p()).is_ok_and(|e| e.max() <= opts.max_p_eig)
}

fn run_attempts(
    sys: &LpvSystem,
    xi: f64,
    opts: &SynthOptions,
    layout: &Layout,
    problem: &BarrierProblem,
    vertices: &[DMatrix<f64>],
    fixed_gain: Option<&DMatrix<f64>>,
) -> Result<Certificate> {
    let settings = BarrierSettings { max_outer: opts.max_outer, ..BarrierSettings::default() };
    let mut best = f64::INFINITY;
    for attempt in 0..=opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(attempt as u64));
        let z0 = layout.start(&mut rng, vertices, sys.c(), opts.r_bound);
        let t_index = layout.t_index();
        let Some(out) = problem.solve(z0, &settings, |z, gap| z[t_index] < 0.0 && gap < 1e-3 * -z[t_index])
        else {
            continue;
        };
        let (p, r) = layout.unpack(&out.z);
        let r = match fixed_gain {
            Some(l) => l.transpose() * &p,
            None => r,
        };
        let t = out.objective;
        let scale = if t < 0.0 { (xi + xi.max(opts.margin)) / -t } else { 1.0 };
        let Ok(cert) = Certificate::new(&p * scale, &r * scale, xi) else {
            continue;
        };
        if accept(sys, &cert, opts) {
            return Ok(cert);
        }
        best = best.min(verify_certificate(sys, &cert).worst_eig);
    }
    Err(Error::SynthesisFailed { best_worst_eig: best })
}

/// Variable vector z = (P in the symmetric basis, R row-major if free, t).
struct Layout {
    n: usize,
    m: usize,
    sym: Vec<(usize, usize)>,
    free_r: bool,
}

impl Layout {
    fn new(n: usize, m: usize, free_r: bool) -> Self {
        let sym = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        Self { n, m, sym, free_r }
    }

    fn r_vars(&self) -> usize {
        if self.free_r {
            self.m * self.n
        } else {
            0
        }
    }

    fn t_index(&self) -> usize {
        self.sym.len() + self.r_vars()
    }

    fn vars(&self) -> usize {
        self.t_index() + 1
    }

    fn sym_basis(&self, k: usize) -> DMatrix<f64> {
        let (i, j) = self.sym[k];
        let mut e = DMatrix::zeros(self.n, self.n);
        e[(i, j)] = 1.0;
        e[(j, i)] = 1.0;
        e
    }

    fn problem(&self, vertices: &[DMatrix<f64>], c: &DMatrix<f64>, r_bound: f64) -> BarrierProblem {
        let (n, nv, t) = (self.n, self.vars(), self.t_index());
        let basis: Vec<DMatrix<f64>> = (0..self.sym.len()).map(|k| self.sym_basis(k)).collect();
        let mut blocks = Vec::new();

        for a in vertices {
            // t I - (A' P + P A - C' R - R' C)
            let mut b = AffineLmi::new(DMatrix::zeros(n, n), nv);
            for (k, e) in basis.iter().enumerate() {
                let pa = e * a;
                b.set(k, -(pa.transpose() + pa));
            }
            for q in 0..self.r_vars() {
                let mut er = DMatrix::zeros(self.m, n);
                er[(q / n, q % n)] = 1.0;
                let rc = er.transpose() * c;
                b.set(self.sym.len() + q, rc.transpose() + rc);
            }
            b.set(t, DMatrix::identity(n, n));
            blocks.push(b);
        }

        let mut pos = AffineLmi::new(DMatrix::zeros(n, n), nv);
        let mut trace = AffineLmi::new(DMatrix::from_element(1, 1, 1.0), nv);
        for (k, e) in basis.iter().enumerate() {
            pos.set(k, e.clone());
            if self.sym[k].0 == self.sym[k].1 {
                trace.set(k, DMatrix::from_element(1, 1, -1.0));
            }
        }
        blocks.push(pos);
        blocks.push(trace);

        if self.free_r {
            // [[rho I, r], [r', rho]] > 0  <=>  |r| < rho
            let k = self.r_vars();
            let mut ball = AffineLmi::new(DMatrix::identity(k + 1, k + 1) * r_bound, nv);
            for q in 0..k {
                let mut e = DMatrix::zeros(k + 1, k + 1);
                e[(q, k)] = 1.0;
                e[(k, q)] = 1.0;
                ball.set(self.sym.len() + q, e);
            }
            blocks.push(ball);
        }

        let mut cost = DVector::zeros(nv);
        cost[t] = 1.0;
        BarrierProblem { cost, blocks }
    }

    /// Strictly feasible start: P near I/(2n), small R, t above every vertex eigenvalue.
    fn start(&self, rng: &mut ChaCha8Rng, vertices: &[DMatrix<f64>], c: &DMatrix<f64>, r_bound: f64) -> DVector<f64> {
        let n = self.n;
        let mut z = DVector::zeros(self.vars());
        for (k, &(i, j)) in self.sym.iter().enumerate() {
            let jitter = 0.1 / n as f64 * rng.random_range(-1.0..1.0);
            z[k] = 0.5 / n as f64 * (if i == j { 1.0 } else { 0.0 } + jitter);
        }
        let r_scale = 1e-3 * r_bound / (self.r_vars().max(1) as f64).sqrt();
        for q in 0..self.r_vars() {
            z[self.sym.len() + q] = r_scale * rng.random_range(-1.0..1.0);
        }
        let (p, r) = self.unpack(&z);
        let worst = vertices
            .iter()
            .map(|a| {
                let pa = &p * a;
                let rc = r.transpose() * c;
                let h = pa.transpose() + pa - rc.transpose() - rc;
                h.symmetric_eigenvalues().max()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        z[self.t_index()] = worst + 1.0 + 0.1 * worst.abs();
        z
    }

    fn unpack(&self, z: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut p = DMatrix::zeros(self.n, self.n);
        for (k, &(i, j)) in self.sym.iter().enumerate() {
            p[(i, j)] = z[k];
            p[(j, i)] = z[k];
        }
        let r = if self.free_r {
            DMatrix::from_fn(self.m, self.n, |a, b| z[self.sym.len() + a * self.n + b])
        } else {
            DMatrix::zeros(self.m, self.n)
        };
        (p, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, c: f64) -> LpvSystem {
        LpvSystem::new(DMatrix::from_element(1, 1, a), DMatrix::from_element(1, 1, c), DMatrix::zeros(1, 1)).unwrap()
    }

    #[test]
    fn scalar_stable_system_gets_unit_certificate() {
        let cert = synthesize_certificate(&scalar(-1.0, 1.0), 1.0, &SynthOptions::default()).unwrap();
        assert_eq!(cert.p()[(0, 0)], 1.0);
        assert_eq!(cert.r()[(0, 0)], 0.0);
    }

    #[test]
    fn unobservable_unstable_mode_fails() {
        let err = synthesize_certificate(&scalar(1.0, 0.0), 1.0, &SynthOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SynthesisFailed { best_worst_eig } if best_worst_eig >= 0.0));
    }

    #[test]
    fn unstable_but_observable_needs_output_injection() {
        let sys = scalar(2.0, 1.0);
        let cert = synthesize_certificate(&sys, 1.0, &SynthOptions::default()).unwrap();
        let v = verify_certificate(&sys, &cert);
        assert!(v.holds_with_margin(1e-6));
        assert!(cert.r()[(0, 0)] > 2.5 * cert.p()[(0, 0)]);
    }

    #[test]
    fn two_state_lpv_system() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, -1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let mut sys = LpvSystem::new(a, c, DMatrix::zeros(2, 1)).unwrap();
        sys.add_parameter(0.0, 1.0, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0])).unwrap();
        let cert = synthesize_certificate(&sys, 0.5, &SynthOptions::default()).unwrap();
        assert!(verify_certificate(&sys, &cert).holds_with_margin(1e-6));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let sys = scalar(3.0, 2.0);
        let opts = SynthOptions { seed: 9, ..SynthOptions::default() };
        let a = synthesize_certificate(&sys, 1.0, &opts).unwrap();
        let b = synthesize_certificate(&sys, 1.0, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_gain_lyapunov() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 0.5]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let sys = LpvSystem::new(a, c, DMatrix::zeros(2, 1)).unwrap();
        let l = DMatrix::from_row_slice(2, 1, &[3.0, 1.0]);
        let cert = synthesize_lyapunov_for_gain(&sys, &l, 0.1, &SynthOptions::default()).unwrap();
        assert!(verify_certificate(&sys, &cert).holds_with_margin(1e-6));
        assert!((cert.r() - l.transpose() * cert.p()).amax() < 1e-12 * cert.p().amax());
        assert!(synthesize_lyapunov_for_gain(&sys, &DMatrix::zeros(3, 1), 0.1, &SynthOptions::default()).is_err());
    }

    #[test]
    fn destabilizing_gain_fails() {
        let sys = scalar(-1.0, 1.0);
        let l = DMatrix::from_element(1, 1, -2.0);
        assert!(matches!(
            synthesize_lyapunov_for_gain(&sys, &l, 1.0, &SynthOptions::default()),
            Err(Error::SynthesisFailed { .. })
        ));
    }

    #[test]
    fn rejects_bad_options() {
        let bad = SynthOptions { margin: 0.0, ..SynthOptions::default() };
        assert!(matches!(synthesize_certificate(&scalar(-1.0, 1.0), 1.0, &bad), Err(Error::InvalidOptions(_))));
        assert!(synthesize_certificate(&scalar(-1.0, 1.0), -1.0, &SynthOptions::default()).is_err());
    }
}
