//! Small dense linear algebra and LMI certificates for LPV observers.

mod barrier;
mod certificate;
mod eigen;
mod lpv;
mod synth;

pub use certificate::{
    gain_from_certificate, lmi_residual, matrix_from_rows, matrix_to_rows, verify_certificate, Certificate,
    Verdict,
};
pub use eigen::{max_eigenvalue, sym_eigen, SymEigen};
pub use lpv::{enumerate_vertices, enumerate_vertices_capped, LpvSystem, DEFAULT_VERTEX_CAP};
pub use synth::{synthesize_certificate, synthesize_lyapunov_for_gain, SynthOptions};
