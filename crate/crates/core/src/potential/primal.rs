//! Primal check of the potential: the minimum relative entropy over
//! orientation densities with prescribed second moment.
//!
//! The candidate minimiser `ρ*(p) = exp(Σ μ_i (n_i·p)²)/Z` is built on the
//! full (unfolded, lab-frame) nodes of a sphere rule. Its normalisation and
//! second moment are checked against `Q`, and entropy is sampled along
//! random directions that keep both constraints.

use nalgebra::{Matrix6, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{BallMajumdar, QTensor};
use crate::error::{Error, Result};
use crate::partition::SphereQuadrature;

/// Feasibility residual above which the rule is declared too coarse.
pub const FEASIBILITY_LIMIT: f64 = 1e-6;
/// Feasibility residual reported as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-8;
pub const DIRECTIONS: usize = 20;
pub const STEP: f64 = 1e-3;
const DIRECTION_SEED: u64 = 0x5eed_0f_d1;

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalCertificate {
    /// `Σ w_a ρ_a ln ρ_a`.
    pub value: f64,
    /// `|Σ w_a ρ_a − 1|`.
    pub normalization_residual: f64,
    /// Max entry of `Σ w_a ρ_a p_a ⊗ p_a − I/3 − Q`.
    pub moment_residual: f64,
    /// Smallest entropy change over all directions and both signs.
    pub min_increase: f64,
    pub directions: usize,
}

impl PrimalCertificate {
    pub fn feasible(&self) -> bool {
        self.normalization_residual <= FEASIBILITY_TOL && self.moment_residual <= FEASIBILITY_TOL
    }

    pub fn optimal(&self) -> bool {
        self.min_increase > 0.0
    }
}

fn quadratics(p: &[f64; 3]) -> [f64; 6] {
    [
        p[0] * p[0],
        p[1] * p[1],
        p[2] * p[2],
        p[0] * p[1],
        p[0] * p[2],
        p[1] * p[2],
    ]
}

/// Builds `ρ*` for `q` on `quad` and returns the full certificate. The dual
/// multipliers are solved on the same rule; everything else is computed
/// directly from the lab-frame nodes.
pub fn primal_entropy_certificate(
    q: &QTensor,
    quad: &SphereQuadrature,
    tol: f64,
) -> Result<PrimalCertificate> {
    let bm = BallMajumdar::new(quad.clone(), tol);
    let qe = bm.eval_q(q, None)?;
    let mu = qe.eval.mu.as_array();
    let axes = qe.frame.axes;
    let nodes = quad.nodes();
    let weights = quad.weights();

    let shift = mu[0].max(mu[1]).max(mu[2]);
    let expo: Vec<f64> = nodes
        .iter()
        .map(|p| {
            (0..3)
                .map(|k| {
                    let c = axes[(0, k)] * p[0] + axes[(1, k)] * p[1] + axes[(2, k)] * p[2];
                    mu[k] * c * c
                })
                .sum::<f64>()
                - shift
        })
        .collect();
    let z_shifted: f64 = weights.iter().zip(&expo).map(|(w, e)| w * e.exp()).sum();
    let log_z = shift + z_shifted.ln();
    let log_rho: Vec<f64> = expo.iter().map(|e| e + shift - log_z).collect();
    let rho: Vec<f64> = log_rho.iter().map(|l| l.exp()).collect();

    let mass: f64 = weights.iter().zip(&rho).map(|(w, r)| w * r).sum();
    let mut second = [0.0; 6];
    for ((p, w), r) in nodes.iter().zip(weights).zip(&rho) {
        let qd = quadratics(p);
        for k in 0..6 {
            second[k] += w * r * qd[k];
        }
    }
    let qc = q.components();
    let moment_residual = (0..6)
        .map(|k| {
            let iso = if k < 3 { 1.0 / 3.0 } else { 0.0 };
            (second[k] - iso - qc[k]).abs()
        })
        .fold(0.0, f64::max);
    let normalization_residual = (mass - 1.0).abs();
    let worst = moment_residual.max(normalization_residual);
    if worst > FEASIBILITY_LIMIT {
        return Err(Error::ConstraintViolation {
            residual: worst,
            limit: FEASIBILITY_LIMIT,
        });
    }
    let value: f64 = weights
        .iter()
        .zip(&rho)
        .zip(&log_rho)
        .map(|((w, r), l)| w * r * l)
        .sum();

    // Perturbations δρ = ρ η with η orthogonal, in the ρ-weighted inner
    // product, to every quadratic p_i p_j; this keeps both the mass (since
    // Σ p_i² = 1) and the second moment fixed.
    let mut gram = Matrix6::<f64>::zeros();
    let quads: Vec<[f64; 6]> = nodes.iter().map(quadratics).collect();
    for ((qd, w), r) in quads.iter().zip(weights).zip(&rho) {
        for i in 0..6 {
            for j in 0..6 {
                gram[(i, j)] += w * r * qd[i] * qd[j];
            }
        }
    }
    let chol = gram.cholesky().ok_or_else(|| {
        Error::InvalidArgument("degenerate second-moment Gram matrix".to_string())
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(DIRECTION_SEED);
    let mut min_increase = f64::INFINITY;
    for d in 0..DIRECTIONS {
        let xi: Vec<f64> = (0..nodes.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut rhs = Vector6::<f64>::zeros();
        for (((qd, w), r), x) in quads.iter().zip(weights).zip(&rho).zip(&xi) {
            for k in 0..6 {
                rhs[k] += w * r * x * qd[k];
            }
        }
        let y = chol.solve(&rhs);
        let mut eta: Vec<f64> = quads
            .iter()
            .zip(&xi)
            .map(|(qd, x)| x - (0..6).map(|k| y[k] * qd[k]).sum::<f64>())
            .collect();
        let scale = eta.iter().fold(0.0, |a: f64, e| a.max(e.abs()));
        eta.iter_mut().for_each(|e| *e /= scale);
        for sign in [1.0, -1.0] {
            let eps = sign * STEP;
            // (ρ+εδ)ln(ρ+εδ) − ρ ln ρ with δ = ρη
            let change: f64 = weights
                .iter()
                .zip(&rho)
                .zip(&log_rho)
                .zip(&eta)
                .map(|(((w, r), l), e)| {
                    let t = eps * e;
                    w * r * (t * l + (1.0 + t) * t.ln_1p())
                })
                .sum();
            min_increase = min_increase.min(change);
            if change <= 0.0 {
                log::debug!("direction {d}: entropy change {change:.3e}");
            }
        }
    }
    Ok(PrimalCertificate {
        value,
        normalization_residual,
        moment_residual,
        min_increase,
        directions: DIRECTIONS,
    })
}

/// Minimum entropy `Σ w_a ρ*_a ln ρ*_a`, after the feasibility and
/// first-order optimality checks pass.
pub fn primal_entropy_oracle(q: &QTensor, quad: &SphereQuadrature, tol: f64) -> Result<f64> {
    let c = primal_entropy_certificate(q, quad, tol)?;
    if !c.optimal() {
        return Err(Error::OptimalityViolation {
            direction: c.directions,
            change: c.min_increase,
        });
    }
    Ok(c.value)
}
