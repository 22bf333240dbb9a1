//! Hessian lower bound `D²f(Q)[V,V] ≥ ε (L[∂f/∂Q] : V)²` and the
//! equivalent concavity test `N⁻¹ − ε μ⊗μ > 0` on the zero-sum plane.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::sampling::{random_direction, random_rotation, sample_rng, sample_spectrum};
use super::VerificationReport;
use crate::error::{Error, Result};
use crate::partition::{restrict_to_x, to_x_coords};
use crate::potential::{BallMajumdar, PotentialEval, QTensor, Spectrum};

/// Denominators `(∂f : V)²` at or below this are skipped.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

fn min_eig_2x2(m: &[[f64; 2]; 2]) -> f64 {
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let half = 0.5 * (m[0][0] - m[1][1]);
    mean - (half * half + m[0][1] * m[1][0]).sqrt()
}

fn check_margin(margin: f64) -> Result<()> {
    if !(margin > 0.0 && margin < 0.1) {
        return Err(Error::InvalidArgument(format!(
            "sample margin must lie in (0, 0.1), got {margin}"
        )));
    }
    Ok(())
}

struct Ratio {
    index: usize,
    ratio: f64,
    q: QTensor,
    v: QTensor,
    lambda: [f64; 3],
    numerator: f64,
    denominator: f64,
}

/// Samples `n_samples` pairs `(Q, V)` and reports the infimum of
/// `D²f(Q)[V,V] / (∂f(Q) : V)²` as the empirical `ε̂`.
pub fn check_ftest1(
    bm: &BallMajumdar,
    n_samples: usize,
    margin: f64,
    seed: u64,
) -> Result<VerificationReport> {
    check_margin(margin)?;
    let results: Vec<Result<Option<Ratio>>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let s = sample_spectrum(&mut rng, margin);
            let r = random_rotation(&mut rng);
            let v = random_direction(&mut rng);
            let q = QTensor::from_frame(&r, &s.lambda);
            let qe = bm.eval_q(&q, None)?;
            let numerator = qe.hess_bilinear(&v, &v);
            let g = qe.gradient().dot(&v);
            let denominator = g * g;
            if denominator <= DENOMINATOR_FLOOR {
                return Ok(None);
            }
            Ok(Some(Ratio {
                index: i,
                ratio: numerator / denominator,
                q,
                v,
                lambda: s.lambda,
                numerator,
                denominator,
            }))
        })
        .collect();
    let mut skipped = 0;
    let mut worst: Option<Ratio> = None;
    for r in results {
        match r? {
            None => skipped += 1,
            Some(x) => {
                if worst.as_ref().is_none_or(|w| x.ratio < w.ratio) {
                    worst = Some(x);
                }
            }
        }
    }
    let (worst_value, witness) = match &worst {
        Some(w) => (
            w.ratio,
            json!({
                "index": w.index,
                "q": w.q.components(),
                "v": w.v.components(),
                "lambda": w.lambda,
                "numerator": w.numerator,
                "denominator": w.denominator,
                "margin": margin,
                "seed": seed,
                "skipped": skipped,
            }),
        ),
        None => (
            f64::INFINITY,
            json!({ "margin": margin, "seed": seed, "skipped": skipped }),
        ),
    };
    Ok(VerificationReport {
        check_name: "ftest1".to_string(),
        samples: n_samples,
        worst_value,
        witness,
        passed: worst_value.is_finite() && worst_value > 0.0,
        tolerance: 0.0,
    })
}

/// Results of [`check_ftest1`] over nested sample domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtestSweep {
    /// Margins in decreasing order (growing sample domains).
    pub margins: Vec<f64>,
    pub per_margin: Vec<f64>,
    /// Infimum over this margin and all larger ones; non-increasing.
    pub cumulative: Vec<f64>,
    pub reports: Vec<VerificationReport>,
}

impl FtestSweep {
    pub fn all_positive(&self) -> bool {
        self.cumulative.iter().all(|&e| e.is_finite() && e > 0.0)
    }
}

pub fn check_ftest1_sweep(
    bm: &BallMajumdar,
    n_samples: usize,
    margins: &[f64],
    seed: u64,
) -> Result<FtestSweep> {
    let mut margins = margins.to_vec();
    margins.sort_by(|a, b| b.total_cmp(a));
    let mut per_margin = Vec::new();
    let mut cumulative = Vec::new();
    let mut reports = Vec::new();
    let mut running = f64::INFINITY;
    for &m in &margins {
        let r = check_ftest1(bm, n_samples, m, seed)?;
        running = running.min(r.worst_value);
        per_margin.push(r.worst_value);
        cumulative.push(running);
        reports.push(r);
    }
    Ok(FtestSweep {
        margins,
        per_margin,
        cumulative,
        reports,
    })
}

/// Smallest eigenvalue of `N⁻¹ − ε μ⊗μ` on the zero-sum plane.
pub fn concavity_margin(eval: &PotentialEval, epsilon: f64) -> f64 {
    let h = restrict_to_x(&eval.hess);
    let m = to_x_coords(&eval.mu.as_array());
    let a = [
        [h[0][0] - epsilon * m[0] * m[0], h[0][1] - epsilon * m[0] * m[1]],
        [h[1][0] - epsilon * m[1] * m[0], h[1][1] - epsilon * m[1] * m[1]],
    ];
    min_eig_2x2(&a)
}

fn spectrum_scan<F>(
    bm: &BallMajumdar,
    name: &str,
    n_samples: usize,
    margin: f64,
    seed: u64,
    extra: serde_json::Value,
    score: F,
) -> Result<VerificationReport>
where
    F: Fn(&PotentialEval) -> f64 + Sync,
{
    check_margin(margin)?;
    let results: Vec<Result<(f64, Spectrum, [f64; 3])>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let s = sample_spectrum(&mut rng, margin);
            let e = bm.fbm_eval(&s)?;
            Ok((score(&e), s, e.mu.as_array()))
        })
        .collect();
    let mut worst: Option<(usize, f64, Spectrum, [f64; 3])> = None;
    for (i, r) in results.into_iter().enumerate() {
        let (v, s, mu) = r?;
        if worst.as_ref().is_none_or(|w| v < w.1) {
            worst = Some((i, v, s, mu));
        }
    }
    let (worst_value, witness) = match worst {
        Some((i, v, s, mu)) => (
            v,
            json!({
                "index": i,
                "lambda": s.lambda,
                "mu": mu,
                "margin": margin,
                "seed": seed,
                "params": extra,
            }),
        ),
        None => (f64::INFINITY, json!({ "margin": margin, "seed": seed })),
    };
    Ok(VerificationReport {
        check_name: name.to_string(),
        samples: n_samples,
        worst_value,
        witness,
        passed: worst_value > 0.0,
        tolerance: 0.0,
    })
}

/// Minimum over sampled spectra of the smallest eigenvalue of
/// `N⁻¹ − ε μ⊗μ` on `X`; passes when positive. Sample `i` has the same
/// spectrum as sample `i` of [`check_ftest1`] with equal seed and margin.
pub fn check_h_concavity(
    bm: &BallMajumdar,
    epsilon: f64,
    n_samples: usize,
    margin: f64,
    seed: u64,
) -> Result<VerificationReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    spectrum_scan(
        bm,
        "h_concavity",
        n_samples,
        margin,
        seed,
        json!({ "epsilon": epsilon }),
        |e| concavity_margin(e, epsilon),
    )
}

/// Minimum over sampled spectra of the smallest eigenvalue of `N` on `X`.
pub fn check_n_positivity(
    bm: &BallMajumdar,
    n_samples: usize,
    margin: f64,
    seed: u64,
) -> Result<VerificationReport> {
    spectrum_scan(
        bm,
        "n_positivity",
        n_samples,
        margin,
        seed,
        json!(null),
        |e| min_eig_2x2(&restrict_to_x(&e.cov)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_concavity_value() {
        let bm = BallMajumdar::default();
        let e = bm.fbm_eval(&Spectrum::zero()).unwrap();
        for eps in [1e-3, 1.0, 1e3] {
            assert!((concavity_margin(&e, eps) - 7.5).abs() < 1e-10);
        }
    }

    #[test]
    fn absurd_epsilon_fails_near_boundary() {
        let bm = BallMajumdar::default();
        let d = 0.005;
        let s = Spectrum::new([-1.0 / 3.0 + d, 0.2, 1.0 / 3.0 - 0.2 - d]).unwrap();
        let e = bm.fbm_eval(&s).unwrap();
        assert!(concavity_margin(&e, 1e3) < 0.0);
        let rep = check_h_concavity(&bm, 1e3, 200, 0.005, 9).unwrap();
        assert!(!rep.passed);
        assert!(rep.witness["lambda"].is_array());
    }

    #[test]
    fn zero_tensor_is_skipped() {
        let bm = BallMajumdar::default();
        let qe = bm.eval_q(&QTensor::zero(), None).unwrap();
        let v = QTensor::diag(1.0, -1.0, 0.0).scale(std::f64::consts::FRAC_1_SQRT_2);
        assert_eq!(qe.gradient().dot(&v), 0.0);
        assert!((qe.hess_bilinear(&v, &v) - 7.5).abs() < 1e-10);
    }

    #[test]
    fn small_run_is_deterministic_and_positive() {
        let bm = BallMajumdar::default();
        let a = check_ftest1(&bm, 64, 0.05, 42).unwrap();
        let b = check_ftest1(&bm, 64, 0.05, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.passed && a.worst_value > 0.0);
        let eps = a.worst_value / 2.0;
        assert!(check_h_concavity(&bm, eps, 64, 0.05, 42).unwrap().passed);
        assert!(check_n_positivity(&bm, 64, 0.05, 42).unwrap().passed);
        assert!(check_ftest1(&bm, 4, 0.2, 1).is_err());
    }
}
