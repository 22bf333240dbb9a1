//! Large-multiplier behaviour of the covariance integrals
//!
//! `I_ij(μ) = Cov_μ(μ·p², μ_i p_j² + μ_j p_i²)`
//!
//! along rays `μ = ργ`. Written over the double sphere, `I_ij` is the ratio
//! of `∫∫ e^{μ·(p²+q²)} (μ·p² − μ·q²)[μ_i(p_j²−q_j²) + μ_j(p_i²−q_i²)]` to
//! twice `∫∫ e^{μ·(p²+q²)}`. Both double integrals factor exactly into
//! single-sphere sums, `Σ_ab w_a w_b E_a E_b (A_a−A_b)(B_a−B_b) =
//! 2 (W Σ wEAB − Σ wEA Σ wEB)`, which is how they are evaluated here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::SphereQuadrature;

/// Components closer than this make the maximum non-isolated.
pub const COINCIDENCE_TOL: f64 = 1e-6;
pub const PLATEAU_TOL: f64 = 0.05;
pub const PLATEAU_BOUND_FACTOR: f64 = 2.0;

/// Default rule and radii for [`check_laplace_coefficients`].
pub const LAPLACE_POLAR_ORDER: usize = 384;
pub const LAPLACE_AZIMUTHAL_ORDER: usize = 128;

pub fn laplace_rho_grid() -> Vec<f64> {
    (0..=8).map(|j| 10f64.powf(2.0 + j as f64 / 8.0)).collect()
}

fn argmax(g: &[f64; 3]) -> usize {
    (0..3).max_by(|&a, &b| g[a].total_cmp(&g[b])).unwrap_or(0)
}

fn validate_gamma(gamma: &[f64; 3]) -> Result<()> {
    if gamma.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite direction {gamma:?}")));
    }
    let sum = gamma.iter().sum::<f64>();
    let norm = gamma.iter().map(|g| g * g).sum::<f64>().sqrt();
    if sum.abs() > 1e-12 || (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "direction {gamma:?} must be a unit vector with zero sum"
        )));
    }
    let mut sorted = *gamma;
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted[0] - sorted[1] < COINCIDENCE_TOL {
        return Err(Error::DegenerateDirection { gamma: *gamma });
    }
    Ok(())
}

/// Shifted single-sphere sums at `μ = ργ` on a rule aligned with the
/// maximum direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleSphere {
    /// `W = Σ w e^{ρ(γ·p² − γ_max)}`; the shifted denominator is `W²`.
    pub w: f64,
    /// `Cov(γ·p², γ_i p_j² + γ_j p_i²)` under `e^{ργ·p²}`.
    pub cov: [[f64; 3]; 3],
}

impl DoubleSphere {
    /// `∫∫ e^{ρ(γ·(p²+q²) − 2γ_max)} dp dq`.
    pub fn denominator(&self) -> f64 {
        self.w * self.w
    }

    /// `∫∫ e^{ρ(γ·(p²+q²) − 2γ_max)} g_ij dp dq` with `g_ij` built from `γ`.
    pub fn numerator(&self) -> [[f64; 3]; 3] {
        let mut n = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                n[i][j] = 2.0 * self.w * self.w * self.cov[i][j];
            }
        }
        n
    }
}

pub fn double_sphere(gamma: &[f64; 3], rho: f64, aligned: &SphereQuadrature) -> DoubleSphere {
    let gmax = gamma[argmax(gamma)];
    let nodes = aligned.folded();
    let a_of = |s: &[f64; 3]| gamma[0] * s[0] + gamma[1] * s[1] + gamma[2] * s[2];
    let b_of = |s: &[f64; 3], i: usize, j: usize| gamma[i] * s[j] + gamma[j] * s[i];
    let e: Vec<f64> = nodes
        .iter()
        .map(|n| n.weight * (rho * (a_of(&n.sq) - gmax)).exp())
        .collect();
    let w: f64 = e.iter().sum();
    let mut mean_a = 0.0;
    let mut mean_b = [[0.0; 3]; 3];
    for (n, &ei) in nodes.iter().zip(&e) {
        mean_a += ei * a_of(&n.sq);
        for i in 0..3 {
            for j in i..3 {
                mean_b[i][j] += ei * b_of(&n.sq, i, j);
            }
        }
    }
    mean_a /= w;
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            mean_b[i][j] /= w;
        }
    }
    for (n, &ei) in nodes.iter().zip(&e) {
        let da = a_of(&n.sq) - mean_a;
        for i in 0..3 {
            for j in i..3 {
                cov[i][j] += ei * da * (b_of(&n.sq, i, j) - mean_b[i][j]);
            }
        }
    }
    for i in 0..3 {
        for j in i..3 {
            cov[i][j] /= w;
            cov[j][i] = cov[i][j];
        }
    }
    DoubleSphere { w, cov }
}

/// `I_ij(ργ)` for each `ρ`, on `quad` re-oriented so that its pole lies on
/// the axis of the largest `γ` component.
pub fn asymptotic_iij(
    gamma: &[f64; 3],
    rho_values: &[f64],
    quad: &SphereQuadrature,
) -> Result<Vec<[[f64; 3]; 3]>> {
    validate_gamma(gamma)?;
    if rho_values.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::InvalidArgument("rho values must be finite and nonnegative".into()));
    }
    if rho_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("rho values must be strictly ascending".into()));
    }
    let aligned = quad.with_pole(argmax(gamma));
    Ok(rho_values
        .iter()
        .map(|&rho| {
            let d = double_sphere(gamma, rho, &aligned);
            let mut out = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    out[i][j] = rho * rho * d.cov[i][j];
                }
            }
            out
        })
        .collect())
}

fn max_norm(m: &[[f64; 3]; 3]) -> f64 {
    m.iter().flatten().fold(0.0, |a: f64, x| a.max(x.abs()))
}

fn rel_change(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            d = d.max((a[i][j] - b[i][j]).abs());
        }
    }
    d / max_norm(b).max(f64::MIN_POSITIVE)
}

/// Plateau diagnostics for a table of `I_ij` matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauCheck {
    /// Relative max-entry changes over the last three intervals.
    pub last_changes: Vec<f64>,
    /// Max-norm at the largest index where three consecutive values agree
    /// within the plateau tolerance, if any.
    pub plateau_value: Option<f64>,
    pub max_abs: f64,
    pub plateaued: bool,
    pub bounded: bool,
}

impl PlateauCheck {
    pub fn passed(&self) -> bool {
        self.plateaued && self.bounded
    }
}

pub fn plateau_check(table: &[[[f64; 3]; 3]]) -> PlateauCheck {
    let n = table.len();
    let changes: Vec<f64> = table.windows(2).map(|w| rel_change(&w[0], &w[1])).collect();
    let last_changes: Vec<f64> = changes.iter().skip(changes.len().saturating_sub(3)).copied().collect();
    let plateaued = last_changes.len() == 3 && last_changes.iter().all(|&c| c <= PLATEAU_TOL);
    let plateau_value = (2..n)
        .rev()
        .find(|&k| changes[k - 2] <= PLATEAU_TOL && changes[k - 1] <= PLATEAU_TOL)
        .map(|k| max_norm(&table[k]));
    let max_abs = table.iter().map(max_norm).fold(0.0, f64::max);
    let bounded = plateau_value.is_some_and(|p| max_abs <= PLATEAU_BOUND_FACTOR * p);
    PlateauCheck {
        last_changes,
        plateau_value,
        max_abs,
        plateaued,
        bounded,
    }
}

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceReport {
    pub gamma: [f64; 3],
    pub rho: Vec<f64>,
    pub denominator: Vec<f64>,
    /// Frobenius norm of the numerator matrix.
    pub numerator: Vec<f64>,
    pub den_slope: f64,
    pub num_slope: f64,
    /// Slope of `log ‖I‖`, i.e. `num_slope − den_slope + 2`.
    pub ratio_slope: f64,
    pub passed: bool,
}

pub const DEN_SLOPE: (f64, f64) = (-2.0, 0.1);
pub const NUM_SLOPE: (f64, f64) = (-4.0, 0.15);
pub const RATIO_SLOPE: (f64, f64) = (0.0, 0.2);

/// Fits the decay exponents of the shifted denominator and numerator over
/// `ρ ∈ [10², 10³]` on a `(384, 128)` rule.
pub fn check_laplace_coefficients(gamma: &[f64; 3]) -> Result<LaplaceReport> {
    let quad = SphereQuadrature::new(LAPLACE_POLAR_ORDER, LAPLACE_AZIMUTHAL_ORDER)?;
    check_laplace_coefficients_with(gamma, &quad, &laplace_rho_grid())
}

pub fn check_laplace_coefficients_with(
    gamma: &[f64; 3],
    quad: &SphereQuadrature,
    rho: &[f64],
) -> Result<LaplaceReport> {
    validate_gamma(gamma)?;
    if rho.len() < 2 || rho.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidArgument("need at least two positive radii".into()));
    }
    let aligned = quad.with_pole(argmax(gamma));
    let mut denominator = Vec::with_capacity(rho.len());
    let mut numerator = Vec::with_capacity(rho.len());
    for &r in rho {
        let d = double_sphere(gamma, r, &aligned);
        denominator.push(d.denominator());
        let n = d.numerator();
        numerator.push(n.iter().flatten().map(|x| x * x).sum::<f64>().sqrt());
    }
    let lx: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
    let ld: Vec<f64> = denominator.iter().map(|d| d.ln()).collect();
    let ln: Vec<f64> = numerator.iter().map(|n| n.ln()).collect();
    let den_slope = fit_slope(&lx, &ld);
    let num_slope = fit_slope(&lx, &ln);
    let ratio_slope = num_slope - den_slope + 2.0;
    let within = |v: f64, (t, tol): (f64, f64)| (v - t).abs() <= tol;
    let passed = within(den_slope, DEN_SLOPE)
        && within(num_slope, NUM_SLOPE)
        && within(ratio_slope, RATIO_SLOPE);
    Ok(LaplaceReport {
        gamma: *gamma,
        rho: rho.to_vec(),
        denominator,
        numerator,
        den_slope,
        num_slope,
        ratio_slope,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gamma0() -> [f64; 3] {
        let s = 6f64.sqrt();
        [2.0 / s, -1.0 / s, -1.0 / s]
    }

    /// Literal tensor-product double sum over the full (unfolded) nodes.
    fn literal(gamma: &[f64; 3], rho: f64, quad: &SphereQuadrature) -> (f64, [[f64; 3]; 3]) {
        let gmax = gamma.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let pts: Vec<([f64; 3], f64)> = quad
            .nodes()
            .iter()
            .zip(quad.weights())
            .map(|(p, w)| ([p[0] * p[0], p[1] * p[1], p[2] * p[2]], *w))
            .collect();
        let mut den = 0.0;
        let mut num = [[0.0; 3]; 3];
        for (p, wp) in &pts {
            for (q, wq) in &pts {
                let ap = gamma[0] * p[0] + gamma[1] * p[1] + gamma[2] * p[2];
                let aq = gamma[0] * q[0] + gamma[1] * q[1] + gamma[2] * q[2];
                let e = wp * wq * (rho * (ap + aq - 2.0 * gmax)).exp();
                den += e;
                for i in 0..3 {
                    for j in 0..3 {
                        let g = (ap - aq) * (gamma[i] * (p[j] - q[j]) + gamma[j] * (p[i] - q[i]));
                        num[i][j] += e * g;
                    }
                }
            }
        }
        (den, num)
    }

    #[test]
    fn factorisation_matches_literal_double_sum() {
        let quad = SphereQuadrature::new(8, 16).unwrap();
        let g = gamma0();
        for rho in [0.5, 3.0, 12.0] {
            let d = double_sphere(&g, rho, &quad.with_pole(0));
            let (den, num) = literal(&g, rho, &quad.with_pole(0));
            assert!((d.denominator() - den).abs() < 1e-12 * den);
            let n = d.numerator();
            let scale = max_norm(&num);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((n[i][j] - num[i][j]).abs() < 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn zero_radius_gives_zero() {
        let quad = SphereQuadrature::new(16, 32).unwrap();
        let t = asymptotic_iij(&gamma0(), &[0.0, 1.0], &quad).unwrap();
        assert!(t[0].iter().flatten().all(|&x| x == 0.0));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t[1][i][j], t[1][j][i]);
            }
        }
    }

    #[test]
    fn degenerate_maximum_rejected() {
        let quad = SphereQuadrature::new(16, 32).unwrap();
        let s = 6f64.sqrt();
        let g = [1.0 / s, 1.0 / s, -2.0 / s];
        assert!(matches!(
            asymptotic_iij(&g, &[1.0], &quad),
            Err(Error::DegenerateDirection { .. })
        ));
        assert!(asymptotic_iij(&[1.0, 0.0, 0.0], &[1.0], &quad).is_err());
    }

    #[test]
    fn permutation_relabels_indices() {
        let quad = SphereQuadrature::new(64, 32).unwrap();
        let g = crate::partition::project_x([0.9, -0.2, -0.7]);
        let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let g = [g[0] / n, g[1] / n, g[2] / n];
        let gp = [g[2], g[0], g[1]];
        let a = asymptotic_iij(&g, &[5.0, 40.0], &quad).unwrap();
        let b = asymptotic_iij(&gp, &[5.0, 40.0], &quad).unwrap();
        let perm = [1, 2, 0];
        for k in 0..2 {
            for i in 0..3 {
                for j in 0..3 {
                    let x = a[k][i][j];
                    let y = b[k][perm[i]][perm[j]];
                    assert!((x - y).abs() < 1e-12 * max_norm(&a[k]).max(1.0));
                }
            }
        }
    }

    #[test]
    fn small_radius_matches_covariance_of_moments() {
        // at ρ → 0, I_ij / ρ² → Cov_0(γ·p², γ_i p_j² + γ_j p_i²)
        let quad = SphereQuadrature::new(16, 32).unwrap();
        let g = gamma0();
        let t = asymptotic_iij(&g, &[1e-4], &quad).unwrap();
        let c0 = |i: usize, j: usize| if i == j { 4.0 / 45.0 } else { -2.0 / 45.0 };
        for i in 0..3 {
            for j in 0..3 {
                let mut expect = 0.0;
                for k in 0..3 {
                    expect += g[k] * (g[i] * c0(k, j) + g[j] * c0(k, i));
                }
                assert!((t[0][i][j] / 1e-8 - expect).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn slope_fit_is_exact_for_power_laws() {
        let x: Vec<f64> = (1..6).map(|i| (i as f64).ln()).collect();
        let y: Vec<f64> = x.iter().map(|v| -2.5 * v + 1.0).collect();
        assert!((fit_slope(&x, &y) + 2.5).abs() < 1e-13);
    }
}
