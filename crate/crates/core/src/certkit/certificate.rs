use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::eigen::sym_eigen;
use super::lpv::{enumerate_vertices, LpvSystem};
use crate::error::{Error, Result};

const MAX_CONDITION: f64 = 1e12;

/// Observer certificate (P, R, xi); the gain is L = P^-1 R'.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    p: DMatrix<f64>,
    r: DMatrix<f64>,
    xi: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateJson {
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    r: Option<Vec<Vec<f64>>>,
    xi: f64,
}

impl Certificate {
    /// P must be square, finite and symmetric within 1e-10 relative; R must be m x n.
    /// Definiteness is not required here; the verifier reports it.
    pub fn new(p: DMatrix<f64>, r: DMatrix<f64>, xi: f64) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n || n == 0 {
            return Err(Error::Dimension(format!("P must be square, got {}x{}", n, p.ncols())));
        }
        if r.ncols() != n {
            return Err(Error::Dimension(format!("R must have {n} columns, got {}", r.ncols())));
        }
        if p.iter().chain(r.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("certificate"));
        }
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::InvalidParameter { name: "xi", reason: format!("must be > 0, got {xi}") });
        }
        let asym = (&p - p.transpose()).amax();
        if asym > 1e-10 * p.amax().max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric(asym));
        }
        let p = (&p + p.transpose()) * 0.5;
        Ok(Self { p, r, xi })
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Same (P, R) checked against a different decay parameter.
    pub fn with_xi(&self, xi: f64) -> Result<Self> {
        Self::new(self.p.clone(), self.r.clone(), xi)
    }

    /// Positive multiple (sP, sR); the LMI residual scales as s H + xi I.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(&self.p * s, &self.r * s, self.xi)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::parse(text, None)
    }

    /// Like `from_json_str`, but a missing R is read as the m x n zero matrix.
    pub fn from_json_str_with_outputs(text: &str, m: usize) -> Result<Self> {
        Self::parse(text, Some(m))
    }

    fn parse(text: &str, default_outputs: Option<usize>) -> Result<Self> {
        let raw: CertificateJson = serde_json::from_str(text)?;
        let p = matrix_from_rows(&raw.p, "P")?;
        let r = match (&raw.r, default_outputs) {
            (Some(r), _) => matrix_from_rows(r, "R")?,
            (None, Some(m)) => DMatrix::zeros(m, p.ncols()),
            (None, None) => return Err(Error::Dimension("certificate has no R".into())),
        };
        Self::new(p, r, raw.xi)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let raw = CertificateJson { p: matrix_to_rows(&self.p), r: Some(matrix_to_rows(&self.r)), xi: self.xi };
        serde_json::to_string_pretty(&raw).expect("finite matrices serialize")
    }
}

/// Row-major nested arrays to a matrix. Every row must have the same length.
pub fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Dimension(format!("{what} is empty")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension(format!("{what} has ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// A' P - C' R + P A - R' C + xi I, symmetrized.
pub fn lmi_residual(a_eta: &DMatrix<f64>, c: &DMatrix<f64>, cert: &Certificate) -> Result<DMatrix<f64>> {
    let n = cert.p.nrows();
    if a_eta.nrows() != n || a_eta.ncols() != n {
        return Err(Error::Dimension(format!("A(eta) must be {n}x{n}, got {}x{}", a_eta.nrows(), a_eta.ncols())));
    }
    if c.ncols() != n || c.nrows() != cert.r.nrows() {
        return Err(Error::Dimension(format!(
            "C must be {}x{n} to match R, got {}x{}",
            cert.r.nrows(),
            c.nrows(),
            c.ncols()
        )));
    }
    let pa = &cert.p * a_eta;
    let rc = cert.r.transpose() * c;
    let x = pa.transpose() + &pa - rc.transpose() - &rc + DMatrix::identity(n, n) * cert.xi;
    Ok((&x + x.transpose()) * 0.5)
}

/// Outcome of checking a certificate at every vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    /// P positive definite and every vertex residual negative definite.
    pub feasible: bool,
    /// Largest residual eigenvalue over all vertices.
    pub worst_eig: f64,
    /// Largest residual eigenvalue per vertex, in corner order.
    pub per_vertex: Vec<f64>,
    pub p_min_eig: f64,
}

impl Verdict {
    /// Feasible with the residual at most -margin everywhere.
    pub fn holds_with_margin(&self, margin: f64) -> bool {
        self.feasible && self.worst_eig <= -margin
    }
}

/// Checks P > 0 and lambda_max(residual) < 0 at each vertex of the system.
///
/// Malformed inputs are reported as an infeasible verdict with infinite worst_eig.
pub fn verify_certificate(sys: &LpvSystem, cert: &Certificate) -> Verdict {
    let failed = |p_min_eig| Verdict { feasible: false, worst_eig: f64::INFINITY, per_vertex: Vec::new(), p_min_eig };
    let p_min_eig = match sym_eigen(&cert.p) {
        Ok(e) => e.min(),
        Err(_) => return failed(f64::NAN),
    };
    let vertices = match enumerate_vertices(sys) {
        Ok(v) => v,
        Err(_) => return failed(p_min_eig),
    };
    let mut per_vertex = Vec::with_capacity(vertices.len());
    for a in &vertices {
        match lmi_residual(a, sys.c(), cert).and_then(|x| sym_eigen(&x)) {
            Ok(e) => per_vertex.push(e.max()),
            Err(_) => return failed(p_min_eig),
        }
    }
    let worst_eig = per_vertex.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Verdict { feasible: p_min_eig > 0.0 && worst_eig < 0.0, worst_eig, per_vertex, p_min_eig }
}

/// L = P^-1 R' by a Cholesky solve.
pub fn gain_from_certificate(cert: &Certificate) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(&cert.p)?;
    if eig.min() <= 0.0 {
        return Err(Error::NotPositiveDefinite(eig.min()));
    }
    let cond = eig.max() / eig.min();
    if cond > MAX_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    let chol = cert.p.clone().cholesky().ok_or(Error::NotPositiveDefinite(eig.min()))?;
    let rt = cert.r.transpose();
    let l = chol.solve(&rt);
    let resid = (&cert.p * &l - &rt).norm();
    if resid > 1e-8 * rt.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::IllConditioned(cond));
    }
    Ok(l)
}
