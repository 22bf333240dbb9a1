//! The Ball-Majumdar singular potential.
//!
//! For a physical spectrum `λ` the dual multipliers `μ` solve
//! `∂ ln Z/∂μ_i = λ_i + 1/3` with `Σ μ_i = 0`; then
//! `F(λ) = Σ μ_i (λ_i + 1/3) − ln Z(μ)`, `∂F/∂λ = μ` and the Hessian of `F`
//! on the zero-sum plane is the inverse of the covariance `N = ∂² ln Z`.
//! Tensor-level quantities follow from the isotropic-function calculus in the
//! eigenframe of `Q`.

pub mod blowup;
pub mod primal;
pub mod tensor;

use std::sync::{Arc, OnceLock};

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::partition::{
    from_x_coords, lift_from_x, moments_raw, project_x, restrict_to_x, to_x_coords, Moments,
    MuVector, SphereQuadrature,
};

pub use blowup::{boundary_blowup, boundary_ray, BlowupFit};
pub use primal::{primal_entropy_certificate, primal_entropy_oracle, PrimalCertificate};
pub use tensor::{eigendecomp_sym3, sym_traceless_basis, EigenFrame, QTensor, Spectrum};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_NEWTON_ITERS: usize = 200;
/// Eigenvalue gaps below this use the coincident limit of the divided difference.
pub const DEGENERACY_GAP: f64 = 1e-7;
const CONTINUATION: [f64; 4] = [0.125, 0.25, 0.5, 1.0];
const MAX_HALVINGS: usize = 40;
/// Converged solves are refined further only above this mismatch.
const POLISH_ABOVE: f64 = 64.0 * f64::EPSILON;

/// Value, gradient and Hessian of `F` at one spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialEval {
    pub value: f64,
    /// Gradient `∂F/∂λ`.
    pub mu: MuVector,
    /// `N⁻¹` on the zero-sum plane, lifted to a 3×3 matrix annihilating `(1,1,1)`.
    pub hess: [[f64; 3]; 3],
    /// Covariance `N = ∂² ln Z/∂μ∂μ`.
    pub cov: [[f64; 3]; 3],
    pub newton_iters: usize,
    /// Final moment mismatch `max_i |∂ln Z/∂μ_i − λ_i − 1/3|`.
    pub residual: f64,
}

/// Potential evaluator bound to one sphere quadrature and tolerance.
///
/// Spectra are sorted in descending order before solving, so the smallest
/// eigenvalue always sits on the polar axis of the rule; this keeps the
/// discrete potential an exactly symmetric function of `λ` when the azimuthal
/// order is a multiple of four.
#[derive(Debug, Clone)]
pub struct BallMajumdar {
    quad: Arc<SphereQuadrature>,
    tol: f64,
    sq_min: [f64; 3],
    sq_max: [f64; 3],
}

fn default_quad() -> Arc<SphereQuadrature> {
    static Q: OnceLock<Arc<SphereQuadrature>> = OnceLock::new();
    Q.get_or_init(|| Arc::new(SphereQuadrature::default_potential()))
        .clone()
}

impl Default for BallMajumdar {
    fn default() -> Self {
        Self::from_arc(default_quad(), DEFAULT_TOL)
    }
}

fn inf_norm(v: &[f64; 3]) -> f64 {
    v.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
}

struct Solved {
    mu: [f64; 3],
    moments: Moments,
    iters: usize,
    residual: f64,
}

impl BallMajumdar {
    pub fn new(quad: SphereQuadrature, tol: f64) -> Self {
        Self::from_arc(Arc::new(quad), tol)
    }

    pub fn from_arc(quad: Arc<SphereQuadrature>, tol: f64) -> Self {
        assert!(tol > 0.0, "tolerance must be positive");
        let mut sq_min = [f64::INFINITY; 3];
        let mut sq_max = [f64::NEG_INFINITY; 3];
        for n in quad.folded() {
            for i in 0..3 {
                sq_min[i] = sq_min[i].min(n.sq[i]);
                sq_max[i] = sq_max[i].max(n.sq[i]);
            }
        }
        Self {
            quad,
            tol,
            sq_min,
            sq_max,
        }
    }

    /// Default quadrature `(32, 64)` with the given tolerance.
    pub fn with_tol(tol: f64) -> Self {
        Self::from_arc(default_quad(), tol)
    }

    pub fn quadrature(&self) -> &SphereQuadrature {
        &self.quad
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    fn check_physical(lambda: &[f64; 3]) -> Result<()> {
        let s = Spectrum { lambda: *lambda };
        if lambda.iter().any(|l| !l.is_finite()) || !s.physical() {
            return Err(Error::NonPhysical { lambda: *lambda });
        }
        Ok(())
    }

    fn check_resolvable(&self, target: &[f64; 3]) -> Result<()> {
        for i in 0..3 {
            if target[i] <= self.sq_min[i] || target[i] >= self.sq_max[i] {
                return Err(Error::InsufficientResolution(format!(
                    "moment {:.3e} on axis {i} is outside the range [{:.3e}, {:.3e}] \
                     representable by quadrature ({}, {})",
                    target[i],
                    self.sq_min[i],
                    self.sq_max[i],
                    self.quad.polar_order(),
                    self.quad.azimuthal_order()
                )));
            }
        }
        Ok(())
    }

    /// Damped Newton in the `(f1, f2)` basis. Returns the last state on
    /// failure together with the failure flag.
    fn newton(&self, target: &[f64; 3], start: [f64; 3], budget: usize) -> (Solved, bool) {
        let mut mu = project_x(start);
        let mut mom = moments_raw(&mu, &self.quad);
        let resid = |m: &Moments| {
            [
                m.mean[0] - target[0],
                m.mean[1] - target[1],
                m.mean[2] - target[2],
            ]
        };
        let mut r = resid(&mom);
        let mut rn = inf_norm(&r);
        let mut iters = 0;
        let mut ok = rn <= self.tol;
        while !ok && iters < budget {
            iters += 1;
            let Some(step) = self.newton_direction(&mom, &r) else {
                break;
            };
            let mut s = 1.0;
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                let cand = project_x([mu[0] + s * step[0], mu[1] + s * step[1], mu[2] + s * step[2]]);
                let cm = moments_raw(&cand, &self.quad);
                let cr = resid(&cm);
                let crn = inf_norm(&cr);
                if crn.is_finite() && crn < rn {
                    mu = cand;
                    mom = cm;
                    r = cr;
                    rn = crn;
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            if !accepted {
                break;
            }
            ok = rn <= self.tol;
        }
        if ok {
            // extra full steps while they still reduce the mismatch
            for _ in 0..2 {
                if rn <= POLISH_ABOVE {
                    break;
                }
                let Some(step) = self.newton_direction(&mom, &r) else {
                    break;
                };
                let cand = project_x([mu[0] + step[0], mu[1] + step[1], mu[2] + step[2]]);
                let cm = moments_raw(&cand, &self.quad);
                let cr = resid(&cm);
                let crn = inf_norm(&cr);
                if crn < rn {
                    mu = cand;
                    mom = cm;
                    r = cr;
                    rn = crn;
                } else {
                    break;
                }
            }
        }
        (
            Solved {
                mu,
                moments: mom,
                iters,
                residual: rn,
            },
            ok,
        )
    }

    fn newton_direction(&self, mom: &Moments, r: &[f64; 3]) -> Option<[f64; 3]> {
        let n = restrict_to_x(&mom.cov);
        let det = n[0][0] * n[1][1] - n[0][1] * n[1][0];
        if !(det.is_finite() && det > 0.0) {
            return None;
        }
        let rx = to_x_coords(r);
        let dx = [
            -(n[1][1] * rx[0] - n[0][1] * rx[1]) / det,
            -(-n[1][0] * rx[0] + n[0][0] * rx[1]) / det,
        ];
        Some(from_x_coords(&dx))
    }

    /// Solves the dual system for a spectrum already sorted in descending
    /// order, optionally warm-started.
    fn solve_sorted(&self, lambda: &[f64; 3], warm: Option<[f64; 3]>) -> Result<Solved> {
        Self::check_physical(lambda)?;
        let target = [lambda[0] + 1.0 / 3.0, lambda[1] + 1.0 / 3.0, lambda[2] + 1.0 / 3.0];
        self.check_resolvable(&target)?;
        let mut used = 0;
        let mut last_res = f64::INFINITY;
        if let Some(w) = warm {
            let (s, ok) = self.newton(&target, w, MAX_NEWTON_ITERS);
            used += s.iters;
            if ok {
                return Ok(s);
            }
            last_res = s.residual;
        }
        let (s, ok) = self.newton(&target, [0.0; 3], MAX_NEWTON_ITERS - used);
        used += s.iters;
        if ok {
            return Ok(Solved { iters: used, ..s });
        }
        last_res = last_res.min(s.residual);
        // continuation in the spectrum from the isotropic state
        let mut mu = [0.0; 3];
        for &t in &CONTINUATION {
            let stage = [
                t * lambda[0] + 1.0 / 3.0,
                t * lambda[1] + 1.0 / 3.0,
                t * lambda[2] + 1.0 / 3.0,
            ];
            let budget = MAX_NEWTON_ITERS.saturating_sub(used);
            let (s, ok) = self.newton(&stage, mu, budget);
            used += s.iters;
            last_res = s.residual;
            if !ok {
                return Err(Error::Convergence {
                    iterations: used,
                    residual: last_res,
                });
            }
            mu = s.mu;
            if t == 1.0 {
                return Ok(Solved { iters: used, ..s });
            }
        }
        Err(Error::Convergence {
            iterations: used,
            residual: last_res,
        })
    }

    fn eval_sorted(&self, lambda: &[f64; 3], warm: Option<[f64; 3]>) -> Result<PotentialEval> {
        let s = self.solve_sorted(lambda, warm)?;
        let target = [lambda[0] + 1.0 / 3.0, lambda[1] + 1.0 / 3.0, lambda[2] + 1.0 / 3.0];
        let value = s.mu[0] * target[0] + s.mu[1] * target[1] + s.mu[2] * target[2]
            - s.moments.log_z;
        let n = restrict_to_x(&s.moments.cov);
        let det = n[0][0] * n[1][1] - n[0][1] * n[1][0];
        let inv = [
            [n[1][1] / det, -n[0][1] / det],
            [-n[1][0] / det, n[0][0] / det],
        ];
        Ok(PotentialEval {
            value,
            mu: MuVector::new(s.mu),
            hess: lift_from_x(&inv),
            cov: s.moments.cov,
            newton_iters: s.iters,
            residual: s.residual,
        })
    }

    /// Dual multipliers for an arbitrary (unsorted) spectrum.
    pub fn solve_mu(&self, s: &Spectrum) -> Result<MuVector> {
        Ok(self.fbm_eval(s)?.mu)
    }

    pub fn fbm_eval(&self, s: &Spectrum) -> Result<PotentialEval> {
        self.fbm_eval_from(s, None)
    }

    /// As [`Self::fbm_eval`], starting Newton from `warm` (multipliers in the
    /// same component order as `s`).
    pub fn fbm_eval_from(&self, s: &Spectrum, warm: Option<&MuVector>) -> Result<PotentialEval> {
        let l = s.lambda;
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| l[b].total_cmp(&l[a]));
        let sorted = [l[order[0]], l[order[1]], l[order[2]]];
        let warm_sorted = warm.map(|w| {
            let w = w.as_array();
            [w[order[0]], w[order[1]], w[order[2]]]
        });
        let e = self.eval_sorted(&sorted, warm_sorted)?;
        let ms = e.mu.as_array();
        let mut mu = [0.0; 3];
        let mut hess = [[0.0; 3]; 3];
        let mut cov = [[0.0; 3]; 3];
        for a in 0..3 {
            mu[order[a]] = ms[a];
            for b in 0..3 {
                hess[order[a]][order[b]] = e.hess[a][b];
                cov[order[a]][order[b]] = e.cov[a][b];
            }
        }
        Ok(PotentialEval {
            mu: MuVector::new(mu),
            hess,
            cov,
            ..e
        })
    }

    /// Full evaluation at a tensor: eigenframe plus potential data in the
    /// frame's (descending) eigenvalue order. `warm` is in that same order.
    pub fn eval_q(&self, q: &QTensor, warm: Option<&MuVector>) -> Result<QEval> {
        self.eval_frame(eigendecomp_sym3(q), warm)
    }

    /// As [`Self::eval_q`] for a precomputed eigenframe.
    pub fn eval_frame(&self, frame: EigenFrame, warm: Option<&MuVector>) -> Result<QEval> {
        let eval = self.eval_sorted(&frame.spectrum.lambda, warm.map(|w| w.as_array()))?;
        Ok(QEval { frame, eval })
    }

    pub fn f_of_q(&self, q: &QTensor) -> Result<f64> {
        Ok(self.eval_q(q, None)?.eval.value)
    }

    /// `L[∂f/∂Q] = Σ μ_i n_i ⊗ n_i`.
    pub fn df_dq(&self, q: &QTensor) -> Result<QTensor> {
        Ok(self.eval_q(q, None)?.gradient())
    }

    /// `D²f(Q)[V, V]`.
    pub fn hess_contract(&self, q: &QTensor, v: &QTensor) -> Result<f64> {
        Ok(self.eval_q(q, None)?.hess_bilinear(v, v))
    }

    /// `D²f(Q)[V, W]`.
    pub fn hess_bilinear(&self, q: &QTensor, v: &QTensor, w: &QTensor) -> Result<f64> {
        Ok(self.eval_q(q, None)?.hess_bilinear(v, w))
    }
}

/// Potential data at one tensor, in its eigenframe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QEval {
    pub frame: EigenFrame,
    /// Evaluated at `frame.spectrum` (descending order).
    pub eval: PotentialEval,
}

impl QEval {
    pub fn value(&self) -> f64 {
        self.eval.value
    }

    pub fn gradient(&self) -> QTensor {
        QTensor::from_frame(&self.frame.axes, &self.eval.mu.as_array())
    }

    /// Divided differences `(μ_i − μ_j)/(λ_i − λ_j)`, replaced by
    /// `(N⁻¹)_ii − (N⁻¹)_ij` for nearly coincident eigenvalues.
    pub fn divided_differences(&self) -> [[f64; 3]; 3] {
        let l = &self.frame.spectrum.lambda;
        let mu = self.eval.mu.as_array();
        let h = &self.eval.hess;
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let gap = l[i] - l[j];
                c[i][j] = if gap.abs() < DEGENERACY_GAP {
                    0.5 * (h[i][i] + h[j][j]) - h[i][j]
                } else {
                    (mu[i] - mu[j]) / gap
                };
            }
        }
        c
    }

    /// `D²f[V, W] = dᵀ N⁻¹ e + Σ_{i≠j} c_ij Ṽ_ij W̃_ij` with `Ṽ = Rᵀ V R`,
    /// `d = diag Ṽ`, `e = diag W̃`.
    pub fn hess_bilinear(&self, v: &QTensor, w: &QTensor) -> f64 {
        let vt = self.frame.to_frame(v);
        let wt = self.frame.to_frame(w);
        self.hess_bilinear_frame(&vt, &wt)
    }

    /// As [`Self::hess_bilinear`] with both arguments already in the eigenframe.
    pub fn hess_bilinear_frame(&self, vt: &Matrix3<f64>, wt: &Matrix3<f64>) -> f64 {
        let h = &self.eval.hess;
        let c = self.divided_differences();
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                s += c[i][j] * vt[(i, j)] * wt[(i, j)];
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                s += vt[(i, i)] * h[i][j] * wt[(j, j)];
            }
        }
        s
    }
}

fn shared(tol: f64) -> BallMajumdar {
    BallMajumdar::with_tol(tol)
}

/// [`BallMajumdar::solve_mu`] at the default quadrature.
pub fn solve_mu(s: &Spectrum, tol: f64) -> Result<MuVector> {
    shared(tol).solve_mu(s)
}

/// [`BallMajumdar::fbm_eval`] at the default quadrature.
pub fn fbm_eval(s: &Spectrum, tol: f64) -> Result<PotentialEval> {
    shared(tol).fbm_eval(s)
}

/// [`BallMajumdar::f_of_q`] at the default quadrature.
pub fn f_of_q(q: &QTensor, tol: f64) -> Result<f64> {
    shared(tol).f_of_q(q)
}

/// [`BallMajumdar::df_dq`] at the default quadrature.
pub fn df_dq(q: &QTensor, tol: f64) -> Result<QTensor> {
    shared(tol).df_dq(q)
}

/// [`BallMajumdar::hess_contract`] at the default quadrature.
pub fn hess_contract(q: &QTensor, v: &QTensor, tol: f64) -> Result<f64> {
    shared(tol).hess_contract(q, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::moments;
    use nalgebra::{Rotation3, Vector3};
    use std::f64::consts::PI;

    fn bm() -> BallMajumdar {
        BallMajumdar::default()
    }

    fn rot(axis: [f64; 3], angle: f64) -> Matrix3<f64> {
        Rotation3::new(Vector3::new(axis[0], axis[1], axis[2]).normalize() * angle)
            .into_inner()
    }

    #[test]
    fn isotropic_state() {
        let e = bm().fbm_eval(&Spectrum::zero()).unwrap();
        assert_eq!(e.mu.as_array(), [0.0; 3]);
        assert_eq!(e.newton_iters, 0);
        assert!((e.value + (4.0 * PI).ln()).abs() < 1e-13);
        let hx = restrict_to_x(&e.hess);
        assert!((hx[0][0] - 7.5).abs() < 1e-11);
        assert!((hx[1][1] - 7.5).abs() < 1e-11);
        assert!(hx[0][1].abs() < 1e-11);
    }

    #[test]
    fn round_trip_residual() {
        let b = bm();
        let s = Spectrum::new([0.4, -0.2, -0.2]).unwrap();
        let mu = b.solve_mu(&s).unwrap();
        let g = moments(&mu, b.quadrature()).mean;
        for i in 0..3 {
            assert!((g[i] - s.lambda[i] - 1.0 / 3.0).abs() <= 1e-12);
        }
        assert!(mu.get(0) > 0.0 && mu.get(1) < 0.0);
    }

    #[test]
    fn near_boundary_converges_with_negative_multiplier() {
        let d = 1e-3;
        let s = Spectrum::new([-1.0 / 3.0 + d, 1.0 / 6.0 - d / 2.0, 1.0 / 6.0 - d / 2.0]).unwrap();
        let b = BallMajumdar::new(SphereQuadrature::new(256, 16).unwrap(), DEFAULT_TOL);
        let e = b.fbm_eval(&s).unwrap();
        assert!(e.residual <= 1e-12);
        let mu = e.mu.as_array();
        assert!(mu[0] < -100.0);
        assert!(mu[0] < mu[1] && (mu[1] - mu[2]).abs() < 1e-6 * mu[0].abs());
    }

    #[test]
    fn non_physical_rejected() {
        let s = Spectrum::new([0.7, -0.35, -0.35]).unwrap();
        assert!(matches!(bm().fbm_eval(&s), Err(Error::NonPhysical { .. })));
    }

    #[test]
    fn coarse_rule_reports_resolution() {
        let d = 1e-5;
        let s = Spectrum::new([-1.0 / 3.0 + d, 1.0 / 6.0 - d / 2.0, 1.0 / 6.0 - d / 2.0]).unwrap();
        assert!(matches!(
            bm().fbm_eval(&s),
            Err(Error::InsufficientResolution(_))
        ));
    }

    #[test]
    fn gradient_is_mu() {
        let b = bm();
        let s = Spectrum::new([0.4, -0.2, -0.2]).unwrap();
        let e = b.fbm_eval(&s).unwrap();
        let h = 1e-5;
        for dir in crate::partition::x_basis() {
            let plus = Spectrum {
                lambda: [s.lambda[0] + h * dir[0], s.lambda[1] + h * dir[1], s.lambda[2] + h * dir[2]],
            };
            let minus = Spectrum {
                lambda: [s.lambda[0] - h * dir[0], s.lambda[1] - h * dir[1], s.lambda[2] - h * dir[2]],
            };
            let fd = (b.fbm_eval(&plus).unwrap().value - b.fbm_eval(&minus).unwrap().value) / (2.0 * h);
            let an = crate::partition::dot3(&e.mu.as_array(), &dir);
            assert!((fd - an).abs() < 1e-6, "{fd} vs {an}");
        }
    }

    #[test]
    fn hessian_inverts_covariance() {
        let e = bm().fbm_eval(&Spectrum::new([0.25, 0.05, -0.3]).unwrap()).unwrap();
        let p = Matrix3::from_fn(|i, j| e.hess[i][j]) * Matrix3::from_fn(|i, j| e.cov[i][j]);
        let proj = Matrix3::from_fn(|i, j| if i == j { 2.0 / 3.0 } else { -1.0 / 3.0 });
        assert!((p - proj).abs().max() < 1e-10);
    }

    #[test]
    fn permutation_symmetric() {
        let b = bm();
        let a = b.fbm_eval(&Spectrum::new([0.25, -0.3, 0.05]).unwrap()).unwrap();
        let c = b.fbm_eval(&Spectrum::new([0.05, 0.25, -0.3]).unwrap()).unwrap();
        assert_eq!(a.value, c.value);
        assert_eq!(a.mu.get(0), c.mu.get(1));
        assert_eq!(a.mu.get(1), c.mu.get(2));
    }

    #[test]
    fn tensor_level_identities() {
        let b = bm();
        assert!((b.f_of_q(&QTensor::zero()).unwrap() + (4.0 * PI).ln()).abs() < 1e-13);
        assert_eq!(b.df_dq(&QTensor::zero()).unwrap(), QTensor::zero());
        let v = QTensor::from_components([0.3, -0.1, -0.2, 0.25, -0.4, 0.1]);
        let v = v.scale(1.0 / v.norm());
        assert!((b.hess_contract(&QTensor::zero(), &v).unwrap() - 7.5).abs() < 1e-10);

        let q = QTensor::diag(0.2, -0.1, -0.1);
        let g = b.df_dq(&q).unwrap().components();
        let mu = b.solve_mu(&Spectrum::new([0.2, -0.1, -0.1]).unwrap()).unwrap();
        assert!((g[0] - mu.get(0)).abs() < 1e-13 && g[3] == 0.0 && g[4] == 0.0);

        let r = rot([1.0, 2.0, -0.5], 0.8);
        let q = QTensor::diag(0.25, 0.05, -0.3).rotate(&rot([0.2, 0.1, 1.0], 0.4));
        let fq = b.f_of_q(&q).unwrap();
        assert!((fq - b.f_of_q(&q.rotate(&r)).unwrap()).abs() < 1e-10);
        let gq = b.df_dq(&q).unwrap();
        let grq = b.df_dq(&q.rotate(&r)).unwrap();
        assert!(grq.sub(&gq.rotate(&r)).norm() < 1e-9);
        let h1 = b.hess_contract(&q, &v).unwrap();
        let h2 = b.hess_contract(&q.rotate(&r), &v.rotate(&r)).unwrap();
        assert!((h1 - h2).abs() < 1e-9 * h1.abs().max(1.0));
    }

    #[test]
    fn hessian_matches_second_difference() {
        let b = bm();
        let q = QTensor::diag(0.25, 0.05, -0.3).rotate(&rot([0.2, 0.1, 1.0], 0.4));
        let v = QTensor::from_components([0.1, 0.2, -0.3, -0.2, 0.15, 0.3]).traceless();
        let v = v.scale(1.0 / v.norm());
        let h = 1e-4;
        let f0 = b.f_of_q(&q).unwrap();
        let fp = b.f_of_q(&q.add(&v.scale(h))).unwrap();
        let fm = b.f_of_q(&q.sub(&v.scale(h))).unwrap();
        let fd = (fp - 2.0 * f0 + fm) / (h * h);
        let an = b.hess_contract(&q, &v).unwrap();
        assert!((fd - an).abs() < 1e-3 * an, "{fd} vs {an}");
        let gd = (fp - fm) / (2.0 * h);
        let ga = b.df_dq(&q).unwrap().dot(&v);
        assert!((gd - ga).abs() < 1e-6 * ga.abs().max(1.0));
    }

    #[test]
    fn degenerate_limit_is_continuous() {
        let b = bm();
        let v = QTensor::from_components([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let at = b.hess_contract(&QTensor::diag(-0.1, -0.1, 0.2), &v).unwrap();
        let near = b.hess_contract(&QTensor::diag(-0.1 + 1e-5, -0.1 - 1e-5, 0.2), &v).unwrap();
        assert!((at - near).abs() < 1e-3 * at);
    }

    #[test]
    fn warm_start_matches_cold() {
        let b = bm();
        let s = Spectrum::new([0.3, -0.1, -0.2]).unwrap();
        let cold = b.fbm_eval(&s).unwrap();
        let near = Spectrum::new([0.31, -0.11, -0.2]).unwrap();
        let warm_mu = b.solve_mu(&near).unwrap();
        let warm = b.fbm_eval_from(&s, Some(&warm_mu)).unwrap();
        assert!(warm.newton_iters < cold.newton_iters);
        assert!((warm.value - cold.value).abs() < 1e-13);
    }
}
