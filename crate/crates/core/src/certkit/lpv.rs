use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default cap on the number of non-degenerate box parameters.
pub const DEFAULT_VERTEX_CAP: usize = 20;

/// Linear parameter-varying system x' = (A + B(rho)) x + D u, y = C x,
/// with B(rho) = B_0 + sum_k rho_k B_k and rho in a box.
#[derive(Clone, Debug, PartialEq)]
pub struct LpvSystem {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    b_offset: DMatrix<f64>,
    b_terms: Vec<(DMatrix<f64>, usize)>,
    bounds: Vec<(f64, f64)>,
}

impl LpvSystem {
    /// A is n x n, C is m x n, D is n x p.
    pub fn new(a: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || n == 0 {
            return Err(Error::Dimension(format!("A must be square and nonempty, got {}x{}", n, a.ncols())));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!("C must have {n} columns, got {}", c.ncols())));
        }
        if d.nrows() != n {
            return Err(Error::Dimension(format!("D must have {n} rows, got {}", d.nrows())));
        }
        for (what, m) in [("A", &a), ("C", &c), ("D", &d)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dimension(format!("{what} has non-finite entries")));
            }
        }
        Ok(Self { b_offset: DMatrix::zeros(n, n), a, c, d, b_terms: Vec::new(), bounds: Vec::new() })
    }

    /// Constant part B_0 of B(rho).
    pub fn with_offset(mut self, b0: DMatrix<f64>) -> Result<Self> {
        self.check_square(&b0, "B_0")?;
        self.b_offset = b0;
        Ok(self)
    }

    /// Adds a parameter rho_k in [lo, hi] multiplying `coeff`. Returns its index.
    pub fn add_parameter(&mut self, lo: f64, hi: f64, coeff: DMatrix<f64>) -> Result<usize> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidParameter {
                name: "bounds",
                reason: format!("need finite lo <= hi, got [{lo}, {hi}]"),
            });
        }
        self.check_square(&coeff, "B_k")?;
        let k = self.bounds.len();
        self.bounds.push((lo, hi));
        self.b_terms.push((coeff, k));
        Ok(k)
    }

    /// Adds another coefficient matrix driven by an existing parameter.
    pub fn add_term(&mut self, coeff: DMatrix<f64>, parameter: usize) -> Result<()> {
        self.check_square(&coeff, "B_k")?;
        if parameter >= self.bounds.len() {
            return Err(Error::Dimension(format!("no parameter with index {parameter}")));
        }
        self.b_terms.push((coeff, parameter));
        Ok(())
    }

    fn check_square(&self, m: &DMatrix<f64>, what: &str) -> Result<()> {
        let n = self.n();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Dimension(format!("{what} must be {n}x{n}, got {}x{}", m.nrows(), m.ncols())));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!("{what} has non-finite entries")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of outputs.
    pub fn m(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn parameter_count(&self) -> usize {
        self.bounds.len()
    }

    /// B(rho).
    pub fn b_at(&self, rho: &[f64]) -> Result<DMatrix<f64>> {
        if rho.len() != self.bounds.len() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.bounds.len(),
                rho.len()
            )));
        }
        let mut b = self.b_offset.clone();
        for (coeff, k) in &self.b_terms {
            b += coeff * rho[*k];
        }
        Ok(b)
    }

    /// A + B(rho).
    pub fn matrix_at(&self, rho: &[f64]) -> Result<DMatrix<f64>> {
        Ok(&self.a + self.b_at(rho)?)
    }

    /// Corners of the parameter box; a degenerate side contributes one value.
    pub fn corners(&self, cap: usize) -> Result<Vec<Vec<f64>>> {
        let free = self.bounds.iter().filter(|(lo, hi)| lo < hi).count();
        if free > cap {
            return Err(Error::TooManyVertices { count: free, cap });
        }
        let mut corners = vec![Vec::with_capacity(self.bounds.len())];
        for &(lo, hi) in &self.bounds {
            let sides: &[f64] = if lo < hi { &[lo, hi] } else { &[lo] };
            corners = corners
                .into_iter()
                .flat_map(|c| {
                    sides.iter().map(move |&s| {
                        let mut next = c.clone();
                        next.push(s);
                        next
                    })
                })
                .collect();
        }
        Ok(corners)
    }
}

/// A + B(eta) at every corner eta of the parameter box.
pub fn enumerate_vertices(sys: &LpvSystem) -> Result<Vec<DMatrix<f64>>> {
    enumerate_vertices_capped(sys, DEFAULT_VERTEX_CAP)
}

pub fn enumerate_vertices_capped(sys: &LpvSystem, cap: usize) -> Result<Vec<DMatrix<f64>>> {
    sys.corners(cap)?.iter().map(|eta| sys.matrix_at(eta)).collect()
}
