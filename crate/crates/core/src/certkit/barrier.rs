//! Path-following log-barrier method for
//! minimize c'z subject to F_j(z) = F_j0 + sum_i z_i F_ji > 0.

use nalgebra::{DMatrix, DVector};

/// One affine matrix constraint. Absent coefficients are zero.
pub(crate) struct AffineLmi {
    pub f0: DMatrix<f64>,
    pub coeffs: Vec<Option<DMatrix<f64>>>,
}

impl AffineLmi {
    pub fn new(f0: DMatrix<f64>, vars: usize) -> Self {
        Self { f0, coeffs: vec![None; vars] }
    }

    pub fn set(&mut self, var: usize, coeff: DMatrix<f64>) {
        self.coeffs[var] = Some(coeff);
    }

    pub fn eval(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let mut f = self.f0.clone();
        for (zi, c) in z.iter().zip(&self.coeffs) {
            if let Some(c) = c {
                f += c * *zi;
            }
        }
        f
    }

    /// Size of the block, which is its contribution to the barrier parameter.
    fn dim(&self) -> usize {
        self.f0.nrows()
    }
}

pub(crate) struct BarrierProblem {
    pub cost: DVector<f64>,
    pub blocks: Vec<AffineLmi>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct BarrierSettings {
    pub max_outer: usize,
    pub max_inner: usize,
    pub tau0: f64,
    pub mu: f64,
    /// Stop once the duality gap bound nu/tau is below this.
    pub gap_tol: f64,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        Self { max_outer: 14, max_inner: 80, tau0: 1.0, mu: 10.0, gap_tol: 1e-12 }
    }
}

pub(crate) struct BarrierOutcome {
    pub z: DVector<f64>,
    pub objective: f64,
}

impl BarrierProblem {
    fn barrier_params(&self) -> f64 {
        self.blocks.iter().map(AffineLmi::dim).sum::<usize>() as f64
    }

    /// tau c'z - sum log det F_j, or None outside the interior.
    fn value(&self, z: &DVector<f64>, tau: f64) -> Option<f64> {
        let mut v = tau * self.cost.dot(z);
        for b in &self.blocks {
            let chol = b.eval(z).cholesky()?;
            v -= 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        }
        v.is_finite().then_some(v)
    }

    fn gradient_hessian(&self, z: &DVector<f64>, tau: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let nv = z.len();
        let mut g = &self.cost * tau;
        let mut h = DMatrix::<f64>::zeros(nv, nv);
        for b in &self.blocks {
            let finv = b.eval(z).cholesky()?.inverse();
            let gs: Vec<(usize, DMatrix<f64>)> = b
                .coeffs
                .iter()
                .enumerate()
                .filter_map(|(i, c)| c.as_ref().map(|c| (i, &finv * c)))
                .collect();
            for (a, (i, gi)) in gs.iter().enumerate() {
                g[*i] -= gi.trace();
                for (k, gk) in &gs[a..] {
                    // tr(G_i G_k)
                    let v = gi.component_mul(&gk.transpose()).sum();
                    h[(*i, *k)] += v;
                    if *i != *k {
                        h[(*k, *i)] += v;
                    }
                }
            }
        }
        Some((g, h))
    }

    /// Runs the path-following loop from a strictly feasible `z0`.
    /// `done(z, gap)` may end the outer loop early.
    pub fn solve(
        &self,
        z0: DVector<f64>,
        settings: &BarrierSettings,
        mut done: impl FnMut(&DVector<f64>, f64) -> bool,
    ) -> Option<BarrierOutcome> {
        let nu = self.barrier_params();
        let mut z = z0;
        self.value(&z, settings.tau0)?;
        let mut tau = settings.tau0;
        for _ in 0..settings.max_outer {
            self.center(&mut z, tau, settings.max_inner)?;
            let gap = nu / tau;
            if gap < settings.gap_tol || done(&z, gap) {
                break;
            }
            tau *= settings.mu;
        }
        let objective = self.cost.dot(&z);
        Some(BarrierOutcome { z, objective })
    }

    /// Damped Newton iterations on the barrier at fixed tau.
    fn center(&self, z: &mut DVector<f64>, tau: f64, max_inner: usize) -> Option<()> {
        let mut fz = self.value(z, tau)?;
        for _ in 0..max_inner {
            let (g, h) = self.gradient_hessian(z, tau)?;
            let step = newton_step(&g, h)?;
            let decrement = -g.dot(&step);
            if !(decrement.is_finite()) || decrement < 0.0 {
                return None;
            }
            if decrement / 2.0 < 1e-10 {
                break;
            }
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-14 {
                let trial = &*z + &step * alpha;
                if let Some(ft) = self.value(&trial, tau) {
                    if ft <= fz - 0.25 * alpha * decrement {
                        *z = trial;
                        fz = ft;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        Some(())
    }
}

/// Solves H d = -g, adding diagonal regularization if H is numerically singular.
fn newton_step(g: &DVector<f64>, mut h: DMatrix<f64>) -> Option<DVector<f64>> {
    let scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut shift = 0.0;
    for _ in 0..8 {
        if let Some(chol) = h.clone().cholesky() {
            let d = chol.solve(&(-g));
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        let next = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
        for i in 0..h.nrows() {
            h[(i, i)] += next - shift;
        }
        shift = next;
    }
    None
}
