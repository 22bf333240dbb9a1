//! Sampled consistency checks of the potential against independent oracles:
//! the primal entropy minimum, finite differences, the covariance inverse
//! and rotated inputs. Each reports the largest error over the sample.

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde_json::json;

use super::sampling::{random_direction, random_rotation, sample_q, sample_rng, sample_spectrum};
use super::VerificationReport;
use crate::error::{Error, Result};
use crate::partition::{lift_from_x, restrict_to_x};
use crate::potential::{primal_entropy_oracle, BallMajumdar, QTensor};

pub const DUALITY_TOL: f64 = 1e-8;
pub const GRADIENT_TOL: f64 = 1e-4;
pub const GRADIENT_STEP: f64 = 1e-5;
pub const HESSIAN_IDENTITY_TOL: f64 = 1e-8;
pub const HESSIAN_FD_TOL: f64 = 1e-3;
pub const HESSIAN_STEP: f64 = 1e-4;
pub const ROTATION_TOL: f64 = 1e-9;

fn check_margin(margin: f64) -> Result<()> {
    if margin > 0.0 && margin < 1.0 / 3.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("margin {margin} must lie in (0, 1/3)")))
    }
}

/// Runs `err` on every sample and keeps the largest value with its witness.
fn max_error<F>(
    name: &str,
    n_samples: usize,
    margin: f64,
    seed: u64,
    tolerance: f64,
    err: F,
) -> Result<VerificationReport>
where
    F: Fn(usize) -> Result<(f64, serde_json::Value)> + Sync,
{
    check_margin(margin)?;
    let results: Vec<Result<(f64, serde_json::Value)>> = (0..n_samples).into_par_iter().map(&err).collect();
    let mut worst = (f64::NEG_INFINITY, json!(null), 0);
    for (i, r) in results.into_iter().enumerate() {
        let (e, w) = r?;
        if e > worst.0 || e.is_nan() {
            worst = (e, w, i);
        }
    }
    Ok(VerificationReport {
        check_name: name.to_string(),
        samples: n_samples,
        worst_value: worst.0,
        witness: json!({ "index": worst.2, "margin": margin, "seed": seed, "detail": worst.1 }),
        passed: n_samples > 0 && worst.0 <= tolerance,
        tolerance,
    })
}

fn sample_pair(seed: u64, i: usize, margin: f64) -> (QTensor, QTensor, Matrix3<f64>) {
    let mut rng = sample_rng(seed, i as u64);
    let q = sample_q(&mut rng, margin);
    let v = random_direction(&mut rng);
    let r = random_rotation(&mut rng);
    (q, v, r)
}

/// `|f(Q) − min ∫ ρ ln ρ|` with the primal minimum on the same sphere rule.
pub fn check_duality(bm: &BallMajumdar, n_samples: usize, margin: f64, seed: u64) -> Result<VerificationReport> {
    max_error("duality", n_samples, margin, seed, DUALITY_TOL, |i| {
        let (q, _, _) = sample_pair(seed, i, margin);
        let f = bm.f_of_q(&q)?;
        let p = primal_entropy_oracle(&q, bm.quadrature(), bm.tol())?;
        Ok(((f - p).abs(), json!({ "q": q.components(), "dual": f, "primal": p })))
    })
}

/// Central difference of `f` along a unit `V` against `L[∂f/∂Q] : V`,
/// relative to `max(|L[∂f/∂Q] : V|, |L[∂f/∂Q]|)`.
pub fn check_gradient(bm: &BallMajumdar, n_samples: usize, margin: f64, seed: u64) -> Result<VerificationReport> {
    let h = GRADIENT_STEP;
    max_error("gradient", n_samples, margin, seed, GRADIENT_TOL, |i| {
        let (q, v, _) = sample_pair(seed, i, margin);
        let g = bm.df_dq(&q)?;
        let an = g.dot(&v);
        let fd = (bm.f_of_q(&q.add(&v.scale(h)))? - bm.f_of_q(&q.sub(&v.scale(h)))?) / (2.0 * h);
        let scale = an.abs().max(g.norm()).max(f64::MIN_POSITIVE);
        Ok(((fd - an).abs() / scale, json!({ "q": q.components(), "analytic": an, "fd": fd })))
    })
}

/// `max |F''(λ) · N(μ) − P|` on the zero-sum plane, `P` its projector.
pub fn check_hessian_identity(bm: &BallMajumdar, n_samples: usize, margin: f64, seed: u64) -> Result<VerificationReport> {
    max_error("hessian_identity", n_samples, margin, seed, HESSIAN_IDENTITY_TOL, |i| {
        let mut rng = sample_rng(seed, i as u64);
        let s = sample_spectrum(&mut rng, margin);
        let e = bm.fbm_eval(&s)?;
        let h = restrict_to_x(&e.hess);
        let n = restrict_to_x(&e.cov);
        let mut prod = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                prod[a][b] = (0..2).map(|c| h[a][c] * n[c][b]).sum();
            }
        }
        let full = lift_from_x(&prod);
        let mut err: f64 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                let p = if a == b { 2.0 / 3.0 } else { -1.0 / 3.0 };
                err = err.max((full[a][b] - p).abs());
            }
        }
        Ok((err, json!({ "lambda": s.lambda })))
    })
}

/// `D²f(Q)[V,V]` against `(f(Q+hV) − 2f(Q) + f(Q−hV))/h²`, relative.
pub fn check_hessian_fd(bm: &BallMajumdar, n_samples: usize, margin: f64, seed: u64) -> Result<VerificationReport> {
    let h = HESSIAN_STEP;
    max_error("hessian_fd", n_samples, margin, seed, HESSIAN_FD_TOL, |i| {
        let (q, v, _) = sample_pair(seed, i, margin);
        let an = bm.hess_contract(&q, &v)?;
        let f0 = bm.f_of_q(&q)?;
        let fd = (bm.f_of_q(&q.add(&v.scale(h)))? - 2.0 * f0 + bm.f_of_q(&q.sub(&v.scale(h)))?) / (h * h);
        Ok(((fd - an).abs() / an.abs(), json!({ "q": q.components(), "analytic": an, "fd": fd })))
    })
}

/// Invariance of `f` and `D²f` and covariance of `L[∂f/∂Q]` under a
/// rotation of `Q` and `V`.
pub fn check_rotation(bm: &BallMajumdar, n_samples: usize, margin: f64, seed: u64) -> Result<VerificationReport> {
    max_error("rotation", n_samples, margin, seed, ROTATION_TOL, |i| {
        let (q, v, r) = sample_pair(seed, i, margin);
        let (qr, vr) = (q.rotate(&r), v.rotate(&r));
        let df = bm.f_of_q(&qr)? - bm.f_of_q(&q)?;
        let dg = bm.df_dq(&qr)?.sub(&bm.df_dq(&q)?.rotate(&r)).norm();
        let dh = bm.hess_contract(&qr, &vr)? - bm.hess_contract(&q, &v)?;
        let err = df.abs().max(dg).max(dh.abs());
        Ok((err, json!({ "q": q.components(), "value": df, "gradient": dg, "hessian": dh })))
    })
}

/// All five checks with one seed.
pub fn potential_suite(bm: &BallMajumdar, n_samples: usize, margin: f64, seed: u64) -> Result<Vec<VerificationReport>> {
    Ok(vec![
        check_duality(bm, n_samples, margin, seed)?,
        check_gradient(bm, n_samples, margin, seed)?,
        check_hessian_identity(bm, n_samples, margin, seed)?,
        check_hessian_fd(bm, n_samples, margin, seed)?,
        check_rotation(bm, n_samples, margin, seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_a_small_sample() {
        let bm = BallMajumdar::default();
        for r in potential_suite(&bm, 12, 0.02, 4).unwrap() {
            assert!(r.passed, "{}", r.to_json_line());
            assert_eq!(r.samples, 12);
        }
    }

    #[test]
    fn reports_flag_failures_and_bad_margins() {
        let bm = BallMajumdar::default();
        let r = max_error("x", 3, 0.1, 0, 0.5, |i| Ok((i as f64, json!(i)))).unwrap();
        assert_eq!(r.worst_value, 2.0);
        assert!(!r.passed);
        assert_eq!(r.witness["index"], 2);
        assert!(check_gradient(&bm, 1, 0.5, 0).is_err());
    }
}
