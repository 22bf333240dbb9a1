//! Numerical certificates for the analytic estimates on the potential: the
//! Hessian lower bound, concavity of `e^{−εF}`, positivity of `N`, the
//! boundedness of the covariance integrals `I_ij` and the Laplace decay
//! rates behind it.

pub mod case2;
pub mod ftest;
pub mod laplace;
pub mod oracles;
pub mod sampling;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use case2::{case2_f_alpha, case2_majorant, Case2Majorant};
pub use ftest::{
    check_ftest1, check_ftest1_sweep, check_h_concavity, check_n_positivity, concavity_margin,
    FtestSweep,
};
pub use oracles::{
    check_duality, check_gradient, check_hessian_fd, check_hessian_identity, check_rotation,
    potential_suite,
};
pub use laplace::{
    asymptotic_iij, check_laplace_coefficients, plateau_check, LaplaceReport, PlateauCheck,
};

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check_name: String,
    pub samples: usize,
    pub worst_value: f64,
    /// Input achieving `worst_value`, plus check-specific extras.
    pub witness: serde_json::Value,
    pub passed: bool,
    pub tolerance: f64,
}

impl VerificationReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialises")
    }
}

/// Writes one JSON object per line.
pub fn write_ndjson<W: Write>(mut out: W, reports: &[VerificationReport]) -> std::io::Result<()> {
    for r in reports {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(())
}
