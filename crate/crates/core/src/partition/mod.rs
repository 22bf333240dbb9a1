//! Single-particle partition function on the unit sphere.
//!
//! `Z(μ) = ∫_{S²} exp(Σ μ_j p_j²) dp`, its log-gradient (the second moments of
//! the exponential-family density) and its log-Hessian (their covariance).

pub mod quadrature;

use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

pub use quadrature::{FoldedNode, SphereQuadrature};

/// Multipliers beyond this magnitude concentrate the integrand enough that
/// the default quadrature is no longer reliable.
pub const RELIABLE_MU: f64 = 200.0;

static WARNED: AtomicBool = AtomicBool::new(false);

fn warn_if_unreliable(mu: &[f64; 3], quad: &SphereQuadrature) {
    let big = mu.iter().fold(0.0f64, |a, m| a.max(m.abs()));
    if big > RELIABLE_MU && !WARNED.swap(true, Ordering::Relaxed) {
        log::warn!(
            "|mu| = {big:.1} exceeds {RELIABLE_MU} at quadrature ({}, {}); raise the orders if accuracy matters",
            quad.polar_order(),
            quad.azimuthal_order()
        );
    }
}

/// Dual multipliers, kept on the zero-sum plane `X`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MuVector {
    mu: [f64; 3],
}

impl MuVector {
    /// Projects `mu` onto `X` by removing its mean.
    pub fn new(mu: [f64; 3]) -> Self {
        Self { mu: project_x(mu) }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.mu
    }

    pub fn get(&self, i: usize) -> f64 {
        self.mu[i]
    }

    pub fn add(&self, d: [f64; 3]) -> Self {
        Self::new([self.mu[0] + d[0], self.mu[1] + d[1], self.mu[2] + d[2]])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new([s * self.mu[0], s * self.mu[1], s * self.mu[2]])
    }

    pub fn max_abs(&self) -> f64 {
        self.mu.iter().fold(0.0, |a: f64, m| a.max(m.abs()))
    }
}

/// Removes the mean of a triple.
pub fn project_x(v: [f64; 3]) -> [f64; 3] {
    let m = (v[0] + v[1] + v[2]) / 3.0;
    let mut out = [v[0] - m, v[1] - m, v[2] - m];
    // push the rounding residue into the largest component
    let r = out[0] + out[1] + out[2];
    if r != 0.0 {
        let k = (0..3)
            .max_by(|&a, &b| out[a].abs().total_cmp(&out[b].abs()))
            .unwrap_or(0);
        out[k] -= r;
    }
    out
}

/// Moments of `(p1², p2², p3²)` under the density `exp(μ·p²)/Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `ln Z(μ)`.
    pub log_z: f64,
    /// `⟨p_i²⟩ = ∂ ln Z / ∂μ_i`.
    pub mean: [f64; 3],
    /// `Cov(p_i², p_j²) = ∂² ln Z / ∂μ_i ∂μ_j`.
    pub cov: [[f64; 3]; 3],
}

/// Computes all moments with the overflow shift `e^{μ_max}` and a centred
/// second pass for the covariance. Accepts any finite triple, not only those
/// on `X`.
pub fn moments_raw(mu: &[f64; 3], quad: &SphereQuadrature) -> Moments {
    warn_if_unreliable(mu, quad);
    let shift = mu[0].max(mu[1]).max(mu[2]);
    let nodes = quad.folded();
    let mut w_e: Vec<f64> = Vec::with_capacity(nodes.len());
    let mut s0 = 0.0;
    let mut s1 = [0.0; 3];
    for n in nodes {
        let e = n.weight * (mu[0] * n.sq[0] + mu[1] * n.sq[1] + mu[2] * n.sq[2] - shift).exp();
        w_e.push(e);
        s0 += e;
        for i in 0..3 {
            s1[i] += e * n.sq[i];
        }
    }
    let mean = [s1[0] / s0, s1[1] / s0, s1[2] / s0];
    let mut cov = [[0.0; 3]; 3];
    for (n, &e) in nodes.iter().zip(&w_e) {
        let d = [n.sq[0] - mean[0], n.sq[1] - mean[1], n.sq[2] - mean[2]];
        for i in 0..3 {
            for j in i..3 {
                cov[i][j] += e * d[i] * d[j];
            }
        }
    }
    for i in 0..3 {
        for j in i..3 {
            cov[i][j] /= s0;
            cov[j][i] = cov[i][j];
        }
    }
    Moments {
        log_z: shift + s0.ln(),
        mean,
        cov,
    }
}

pub fn moments(mu: &MuVector, quad: &SphereQuadrature) -> Moments {
    moments_raw(&mu.as_array(), quad)
}

/// `Z(μ)`; may overflow to infinity for very large multipliers, in which
/// case [`log_partition_z`] should be used.
pub fn partition_z(mu: &MuVector, quad: &SphereQuadrature) -> f64 {
    log_partition_z_raw(&mu.as_array(), quad).exp()
}

pub fn log_partition_z(mu: &MuVector, quad: &SphereQuadrature) -> f64 {
    log_partition_z_raw(&mu.as_array(), quad)
}

/// `ln Z` for an arbitrary finite triple.
pub fn log_partition_z_raw(mu: &[f64; 3], quad: &SphereQuadrature) -> f64 {
    warn_if_unreliable(mu, quad);
    let shift = mu[0].max(mu[1]).max(mu[2]);
    let s0: f64 = quad
        .folded()
        .iter()
        .map(|n| n.weight * (mu[0] * n.sq[0] + mu[1] * n.sq[1] + mu[2] * n.sq[2] - shift).exp())
        .sum();
    shift + s0.ln()
}

pub fn logz_grad(mu: &MuVector, quad: &SphereQuadrature) -> [f64; 3] {
    moments(mu, quad).mean
}

pub fn logz_hess(mu: &MuVector, quad: &SphereQuadrature) -> [[f64; 3]; 3] {
    moments(mu, quad).cov
}

/// Orthonormal basis of `X`: `f1 = (−1, 1, 0)/√2`, `f2 = (1, 1, −2)/√6`.
pub fn x_basis() -> [[f64; 3]; 2] {
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let s6 = 1.0 / 6f64.sqrt();
    [[-s2, s2, 0.0], [s6, s6, -2.0 * s6]]
}

/// Coordinates of `v` in the basis of [`x_basis`].
pub fn to_x_coords(v: &[f64; 3]) -> [f64; 2] {
    let b = x_basis();
    [dot3(&b[0], v), dot3(&b[1], v)]
}

pub fn from_x_coords(c: &[f64; 2]) -> [f64; 3] {
    let b = x_basis();
    [
        c[0] * b[0][0] + c[1] * b[1][0],
        c[0] * b[0][1] + c[1] * b[1][1],
        c[0] * b[0][2] + c[1] * b[1][2],
    ]
}

/// Restriction `Fᵀ A F` of a symmetric 3×3 matrix to `X`.
pub fn restrict_to_x(a: &[[f64; 3]; 3]) -> [[f64; 2]; 2] {
    let b = x_basis();
    let mut out = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += b[r][i] * a[i][j] * b[c][j];
                }
            }
            out[r][c] = s;
        }
    }
    out[0][1] = 0.5 * (out[0][1] + out[1][0]);
    out[1][0] = out[0][1];
    out
}

/// Lift `F M Fᵀ` of a 2×2 operator on `X` back to a 3×3 matrix that
/// annihilates `(1, 1, 1)`.
pub fn lift_from_x(m: &[[f64; 2]; 2]) -> [[f64; 3]; 3] {
    let b = x_basis();
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for r in 0..2 {
                for c in 0..2 {
                    s += b[r][i] * m[r][c] * b[c][j];
                }
            }
            out[i][j] = s;
        }
    }
    out
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn quad() -> SphereQuadrature {
        SphereQuadrature::default_potential()
    }

    #[test]
    fn isotropic_values() {
        let q = quad();
        let m = moments(&MuVector::zero(), &q);
        assert!((partition_z(&MuVector::zero(), &q) - 4.0 * PI).abs() < 1e-12);
        for i in 0..3 {
            assert!((m.mean[i] - 1.0 / 3.0).abs() < 1e-14);
            for j in 0..3 {
                let expect = if i == j { 4.0 / 45.0 } else { -2.0 / 45.0 };
                assert!((m.cov[i][j] - expect).abs() < 1e-14);
            }
        }
        let nx = restrict_to_x(&m.cov);
        assert!((nx[0][0] - 2.0 / 15.0).abs() < 1e-14);
        assert!((nx[1][1] - 2.0 / 15.0).abs() < 1e-14);
        assert!(nx[0][1].abs() < 1e-14);
    }

    #[test]
    fn projection_keeps_sum_zero() {
        let mu = MuVector::new([0.1, 0.7, 1e3]);
        let a = mu.as_array();
        assert_eq!(a[0] + a[1] + a[2], 0.0);
        let b = mu.add([1e-3, 0.2, -5.0]).as_array();
        assert_eq!(b[0] + b[1] + b[2], 0.0);
    }

    #[test]
    fn shift_invariance() {
        let q = quad();
        let mu = [3.0, -1.0, -2.0];
        let base = log_partition_z_raw(&mu, &q);
        for c in [-50.0, -7.5, 0.0, 12.0, 50.0] {
            let sh = log_partition_z_raw(&[mu[0] + c, mu[1] + c, mu[2] + c], &q);
            // relative error of Z itself equals the absolute error of ln Z
            assert!((sh - base - c).abs() < 1e-12, "c = {c}");
        }
        let shifted = [mu[0] + 4.0, mu[1] + 4.0, mu[2] + 4.0];
        let lhs = log_partition_z_raw(&shifted, &q).exp();
        let rhs = 4f64.exp() * log_partition_z_raw(&mu, &q).exp();
        assert!((lhs - rhs).abs() < 1e-12 * rhs);
    }

    #[test]
    fn large_multiplier_no_overflow_and_converged() {
        let mu = MuVector::new([10.0, -5.0, -5.0]);
        let z = partition_z(&mu, &quad());
        let reference = partition_z(&mu, &SphereQuadrature::new(256, 512).unwrap());
        assert!(z.is_finite() && z > 0.0);
        assert!((z - reference).abs() < 1e-10 * reference);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let q = quad();
        let mu = [6.0, -3.0, -3.0];
        let g = moments_raw(&mu, &q).mean;
        assert!(g[0] > 1.0 / 3.0);
        assert!((g[0] + g[1] + g[2] - 1.0).abs() < 1e-13);
        let h = 1e-5;
        for i in 0..3 {
            let mut p = mu;
            let mut m = mu;
            p[i] += h;
            m[i] -= h;
            let fd = (log_partition_z_raw(&p, &q) - log_partition_z_raw(&m, &q)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7, "component {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn hessian_matches_jacobian_of_gradient() {
        let q = quad();
        for mu in [[6.0, -3.0, -3.0], [1.5, 4.0, -5.5], [-20.0, 8.0, 12.0]] {
            let n = moments_raw(&mu, &q).cov;
            let h = 1e-5;
            for j in 0..3 {
                let mut p = mu;
                let mut m = mu;
                p[j] += h;
                m[j] -= h;
                let gp = moments_raw(&p, &q).mean;
                let gm = moments_raw(&m, &q).mean;
                for i in 0..3 {
                    let fd = (gp[i] - gm[i]) / (2.0 * h);
                    assert!((fd - n[i][j]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn permutation_equivariance() {
        let q = quad();
        let mu = [2.0, -0.5, -1.5];
        let g = moments_raw(&mu, &q).mean;
        let gp = moments_raw(&[mu[2], mu[0], mu[1]], &q).mean;
        for (a, b) in [(2, 0), (0, 1), (1, 2)] {
            assert!((g[a] - gp[b]).abs() < 1e-13);
        }
    }

    #[test]
    fn basis_round_trip() {
        let v = project_x([0.3, -0.9, 0.25]);
        let back = from_x_coords(&to_x_coords(&v));
        for i in 0..3 {
            assert!((back[i] - v[i]).abs() < 1e-15);
        }
        let id = lift_from_x(&[[1.0, 0.0], [0.0, 1.0]]);
        for i in 0..3 {
            for j in 0..3 {
                let p = if i == j { 2.0 / 3.0 } else { -1.0 / 3.0 };
                assert!((id[i][j] - p).abs() < 1e-15);
            }
        }
    }
}
