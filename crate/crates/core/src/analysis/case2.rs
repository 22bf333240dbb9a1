//! Coincident-multiplier ratios
//!
//! `f(α) = ∫₀^α e^{−3y²} y^{2k+1} (1−y²/α²)^{−1/2} dy / ∫₀^α e^{−3y²} y (1−y²/α²)^{−1/2} dy`.
//!
//! With `y = αt` this is `α^{2k} ∫₀¹ e^{−3α²t²} t^{2k+1} (1−t²)^{−1/2} dt`
//! over the same integral with `t`. The interval is split at
//! `t_s = min(1/2, 8/α)`: Gauss-Legendre on `[0, t_s]` resolves the Gaussian
//! peak, Gauss-Jacobi with weight `(1−x)^{−1/2}` on `[t_s, 1]` absorbs the
//! endpoint singularity.

use std::num::NonZeroUsize;

use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::quadrature::legendre_half;

fn check_k(k: u32) -> Result<()> {
    if k == 1 || k == 2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("k must be 1 or 2, got {k}")))
    }
}

/// Gauss-Legendre pairs on [-1, 1] from the symmetrised half rule.
fn legendre_full(order: usize) -> Vec<(f64, f64)> {
    let half = legendre_half(order);
    let mut out = Vec::with_capacity(order);
    for &(x, w) in half.iter().rev() {
        if x > 0.0 {
            out.push((-x, w));
        }
    }
    out.extend(half);
    out
}

pub fn case2_f_alpha(alpha_values: &[f64], k: u32, quad_1d_order: usize) -> Result<Vec<f64>> {
    check_k(k)?;
    if quad_1d_order < 2 {
        return Err(Error::InsufficientResolution(format!(
            "1D order must be at least 2, got {quad_1d_order}"
        )));
    }
    if alpha_values.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::InvalidArgument("alpha values must be positive".into()));
    }
    let gl = legendre_full(quad_1d_order);
    let order = NonZeroUsize::new(quad_1d_order).expect("order checked");
    let gj = GaussJacobi::new(
        order,
        FiniteAboveNegOneF64::new(-0.5).expect("valid exponent"),
        FiniteAboveNegOneF64::new(0.0).expect("valid exponent"),
    );
    let p = 2 * k as i32 + 1;
    Ok(alpha_values
        .iter()
        .map(|&alpha| {
            let a2 = 3.0 * alpha * alpha;
            let ts = (8.0 / alpha).min(0.5);
            let (mut num, mut den) = (0.0, 0.0);
            // [0, t_s]: smooth integrand including (1 − t²)^{−1/2}
            for &(x, w) in &gl {
                let t = 0.5 * ts * (x + 1.0);
                let g = (-a2 * t * t).exp() / (1.0 - t * t).sqrt() * 0.5 * ts * w;
                num += g * t.powi(p);
                den += g * t;
            }
            // [t_s, 1]: (1 − t²)^{−1/2} = ((1−t_s)(1−x)/2)^{−1/2} (1+t)^{−1/2}
            let jac = (0.5 * (1.0 - ts)).sqrt();
            for (x, w) in gj.iter() {
                let t = ts + 0.5 * (1.0 - ts) * (x + 1.0);
                let g = (-a2 * t * t).exp() / (1.0 + t).sqrt() * jac * w;
                num += g * t.powi(p);
                den += g * t;
            }
            alpha.powi(2 * k as i32) * num / den
        })
        .collect())
}

/// Upper bounds for `f(α)`, valid for `α ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Case2Majorant {
    /// `[J_k/√(3/4) + e^{−3α²/4} α^{2k+1}(2/√3)α] / ∫₀^{1/2} e^{−y²} y dy`
    /// with `J_k = ∫₀^∞ e^{−3y²} y^{2k+1} dy`.
    pub printed: f64,
    /// Same numerator over `∫₀^{1/2} e^{−3y²} y dy`, the lower bound that the
    /// denominator `∫₀^{α/2} e^{−3y²} y dy` actually satisfies for `α ≥ 1`.
    pub rigorous: f64,
}

pub fn case2_majorant(alpha: f64, k: u32) -> Result<Case2Majorant> {
    check_k(k)?;
    let fact = if k == 1 { 1.0 } else { 2.0 };
    let jk = fact / (2.0 * 3f64.powi(k as i32 + 1));
    let tail = (-0.75 * alpha * alpha).exp() * alpha.powi(2 * k as i32 + 1) * (2.0 / 3f64.sqrt()) * alpha;
    let numer = jk / 0.75f64.sqrt() + tail;
    let printed = numer / (0.5 * (1.0 - (-0.25f64).exp()));
    let rigorous = numer / ((1.0 - (-0.75f64).exp()) / 6.0);
    Ok(Case2Majorant { printed, rigorous })
}
