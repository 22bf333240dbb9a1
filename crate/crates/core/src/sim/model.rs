//! Right-hand sides and the first-order IMEX step.
//!
//! Per step, with `k` the derivative wavevector and `T` the 2/3-rule
//! truncation:
//!
//! - `û ← û + dt·P T(F̂)/(1 + dt μ̲|k|²)` with
//!   `F = −½[(u·∇)u + div(u⊗u)] + div σ̃` and `P` the Leray projector;
//! - `Q̂ ← Q̂ + dt·T(R̂)/(1 + dt Γ0|k|²)` with `R = −u·∇Q + S + Γ(θ)H`;
//! - `θ̂ ← θ̂ + dt·T(Ĝ)/(1 + dt β|k|²)` with
//!   `c_eff(θ) G = div(κ∇θ) − div(e_θ u) + θ[(f(Q⁺) − f(Q))/dt + ∂f:(u·∇Q)]
//!   + μ/2|∇u + ∇ᵗu|² + Γ|H|²` and `β = max κ/c_eff` frozen at the old state.
//!
//! Everything else is explicit. The temperature source uses the increment of
//! `f` across the step, so the exchange with the order-parameter energy is
//! exact at the nodes.

use nalgebra::Matrix3;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::algebra::{compute_s, frob, q_coords, q_matrix, stress};
use super::grid::{Grid, Spectral};
use super::params::ModelParams;
use super::state::FieldState;
use crate::error::{Error, Result};
use crate::partition::MuVector;
use crate::potential::{eigendecomp_sym3, BallMajumdar, QTensor};

/// Eigenvalues must keep this distance from `−1/3` and `2/3`.
pub const SAFETY_MARGIN: f64 = 1e-3;
pub const MAX_STEP_HALVINGS: usize = 10;
/// Polar and azimuthal orders of the sphere rule used inside the solver.
pub const SIM_QUADRATURE: (usize, usize) = (16, 32);

/// Potential data at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub value: Vec<f64>,
    /// Coordinates of `L[∂f/∂Q]`.
    pub grad: [Vec<f64>; 5],
    /// Multipliers in descending eigenvalue order, for warm starts.
    pub warm: Vec<MuVector>,
    /// `D²f(Q)[ĝ, ĝ]` along the unit gradient direction (any unit direction
    /// where the gradient vanishes).
    pub hess_scale: Vec<f64>,
    pub eig_min: f64,
    pub eig_max: f64,
}

/// Nodal first and second derivatives of the state.
#[derive(Debug, Clone)]
pub struct Kinematics {
    /// `grad_u[3i + j] = ∂_j u_i`.
    pub grad_u: Vec<Vec<f64>>,
    /// `grad_q[3c + d] = ∂_d q_c`.
    pub grad_q: Vec<Vec<f64>>,
    pub lap_q: [Vec<f64>; 5],
    pub grad_theta: [Vec<f64>; 3],
}

impl Kinematics {
    pub fn grad_u_at(&self, node: usize) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.grad_u[3 * i + j][node])
    }

    pub fn grad_q_at(&self, node: usize) -> [Matrix3<f64>; 3] {
        std::array::from_fn(|d| {
            let c: [f64; 5] = std::array::from_fn(|c| self.grad_q[3 * c + d][node]);
            q_matrix(&c)
        })
    }

    pub fn grad_theta_at(&self, node: usize) -> [f64; 3] {
        std::array::from_fn(|d| self.grad_theta[d][node])
    }
}

/// Grid, material laws and potential evaluator.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    pub grid: Grid,
    pub params: ModelParams,
    pub bm: BallMajumdar,
}

fn zeros(n: usize) -> Spectral {
    vec![Complex64::new(0.0, 0.0); n]
}

fn check_finite(field: &'static str, v: &[f64], time: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NotFinite { field, time })
    }
}

/// Per-node quantities assembled for one step.
struct NodeTerms {
    q_rhs: [f64; 5],
    stress: [f64; 9],
    advect: [f64; 3],
    /// `u_a u_b` at index `3a + b`.
    uu: [f64; 9],
    heating: f64,
    transport: f64,
    flux: [f64; 3],
    energy_flux: [f64; 3],
}

impl SpectralModel {
    pub fn new(n: usize, params: ModelParams, bm: BallMajumdar) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            grid: Grid::new(n)?,
            params,
            bm,
        })
    }

    /// Model with the solver's default sphere rule `(16, 32)`.
    pub fn with_default_quadrature(n: usize, params: ModelParams) -> Result<Self> {
        let quad = crate::partition::SphereQuadrature::new(SIM_QUADRATURE.0, SIM_QUADRATURE.1)?;
        Self::new(n, params, BallMajumdar::new(quad, crate::potential::DEFAULT_TOL))
    }

    fn check_grid(&self, state: &FieldState) -> Result<()> {
        if state.n != self.grid.n() {
            return Err(Error::InvalidArgument(format!(
                "state grid {} does not match model grid {}",
                state.n,
                self.grid.n()
            )));
        }
        Ok(())
    }

    /// Evaluates the potential at every node. Fails with the node index on
    /// non-physical input; eigenvalues closer than [`SAFETY_MARGIN`] to the
    /// boundary are reported as [`Error::NonPhysical`].
    pub fn evaluate_potential(
        &self,
        q: &[Vec<f64>; 5],
        warm: Option<&[MuVector]>,
    ) -> Result<PotentialField> {
        let len = q[0].len();
        let fallback = QTensor::from_coords5(&[1.0, 0.0, 0.0, 0.0, 0.0]);
        let evals: Vec<Result<_>> = (0..len)
            .into_par_iter()
            .map(|node| {
                let c: [f64; 5] = std::array::from_fn(|k| q[k][node]);
                let frame = eigendecomp_sym3(&QTensor::from_coords5(&c));
                let l = frame.spectrum.lambda;
                let wrap = |e: Error| Error::AtNode {
                    node,
                    source: Box::new(e),
                };
                if l.iter().any(|x| !x.is_finite())
                    || l[2] <= -1.0 / 3.0 + SAFETY_MARGIN
                    || l[0] >= 2.0 / 3.0 - SAFETY_MARGIN
                {
                    return Err(wrap(Error::NonPhysical { lambda: l }));
                }
                let e = self
                    .bm
                    .eval_frame(frame, warm.map(|w| &w[node]))
                    .map_err(wrap)?;
                let g = e.gradient();
                let gn = g.norm();
                let dir = if gn > 0.0 { g.scale(1.0 / gn) } else { fallback };
                Ok((e.value(), g.to_coords5(), e.eval.mu, e.hess_bilinear(&dir, &dir), l))
            })
            .collect();
        let mut out = PotentialField {
            value: Vec::with_capacity(len),
            grad: std::array::from_fn(|_| Vec::with_capacity(len)),
            warm: Vec::with_capacity(len),
            hess_scale: Vec::with_capacity(len),
            eig_min: f64::INFINITY,
            eig_max: f64::NEG_INFINITY,
        };
        for r in evals {
            let (v, g, mu, h, l) = r?;
            out.value.push(v);
            for k in 0..5 {
                out.grad[k].push(g[k]);
            }
            out.warm.push(mu);
            out.hess_scale.push(h);
            out.eig_min = out.eig_min.min(l[2]);
            out.eig_max = out.eig_max.max(l[0]);
        }
        Ok(out)
    }

    pub fn kinematics(&self, state: &FieldState) -> Kinematics {
        let g = &self.grid;
        let grad_u = (0..9)
            .map(|ij| g.grad_nodal(&state.u_hat[ij / 3], ij % 3))
            .collect();
        let grad_q = (0..15)
            .map(|cd| g.grad_nodal(&state.q_hat[cd / 3], cd % 3))
            .collect();
        let lap_q = std::array::from_fn(|c| g.inverse(&g.laplacian(&state.q_hat[c])));
        let grad_theta = std::array::from_fn(|d| g.grad_nodal(&state.theta_hat, d));
        Kinematics {
            grad_u,
            grad_q,
            lap_q,
            grad_theta,
        }
    }

    /// `H = ΔQ − θ L[∂f/∂Q] + λQ` from precomputed Laplacian and gradient.
    pub fn h_from(&self, state: &FieldState, lap_q: &[Vec<f64>; 5], pot: &PotentialField) -> [Vec<f64>; 5] {
        let lam = self.params.lambda_bulk;
        std::array::from_fn(|c| {
            (0..state.len())
                .map(|i| lap_q[c][i] - state.theta[i] * pot.grad[c][i] + lam * state.q[c][i])
                .collect()
        })
    }

    /// Molecular field at every node.
    pub fn compute_h_field(&self, state: &FieldState) -> Result<[Vec<f64>; 5]> {
        self.check_grid(state)?;
        let pot = self.evaluate_potential(&state.q, None)?;
        let lap_q = std::array::from_fn(|c| self.grid.inverse(&self.grid.laplacian(&state.q_hat[c])));
        Ok(self.h_from(state, &lap_q, &pot))
    }

    /// `σ̃ = σ + pI`, row-major, at every node.
    fn stress_without_pressure(&self, state: &FieldState, kin: &Kinematics, h: &[Vec<f64>; 5]) -> Vec<[f64; 9]> {
        let xi = self.params.xi;
        (0..state.len())
            .into_par_iter()
            .map(|i| {
                let g = kin.grad_u_at(i);
                let s = stress(
                    &g,
                    &q_matrix(&state.q_at(i)),
                    &q_matrix(&std::array::from_fn(|c| h[c][i])),
                    &kin.grad_q_at(i),
                    xi,
                    self.params.mu(state.theta[i]),
                    0.0,
                );
                std::array::from_fn(|k| s[(k / 3, k % 3)])
            })
            .collect()
    }

    /// Full stress tensor, entry `(i, j)` at index `3i + j`.
    pub fn compute_stress(&self, state: &FieldState, h: &[Vec<f64>; 5], p: &[f64]) -> Result<[Vec<f64>; 9]> {
        self.check_grid(state)?;
        let kin = self.kinematics(state);
        let st = self.stress_without_pressure(state, &kin, h);
        Ok(std::array::from_fn(|k| {
            st.iter()
                .zip(p)
                .map(|(s, p)| if k % 4 == 0 { s[k] - p } else { s[k] })
                .collect()
        }))
    }

    /// Mean-free solution of `−Δp = div div(u⊗u − σ̃)`.
    pub fn recover_pressure(&self, state: &FieldState, h: &[Vec<f64>; 5]) -> Result<Vec<f64>> {
        self.check_grid(state)?;
        let kin = self.kinematics(state);
        let st = self.stress_without_pressure(state, &kin, h);
        let g = &self.grid;
        let mut p_hat = zeros(g.len());
        for i in 0..3 {
            for j in 0..3 {
                let t: Vec<f64> = (0..state.len())
                    .map(|n| state.u[i][n] * state.u[j][n] - st[n][3 * i + j])
                    .collect();
                let mut th = g.forward(&t);
                g.dealias(&mut th);
                for (idx, (p, v)) in p_hat.iter_mut().zip(th).enumerate() {
                    let k = g.wavevector(idx);
                    let k2 = g.k2(idx);
                    if k2 > 0.0 {
                        *p -= v * (k[i] * k[j] / k2);
                    }
                }
            }
        }
        p_hat[0] = Complex64::new(0.0, 0.0);
        Ok(g.inverse(&p_hat))
    }

    fn node_terms(
        &self,
        state: &FieldState,
        kin: &Kinematics,
        h: &[Vec<f64>; 5],
        pot: &PotentialField,
    ) -> Vec<NodeTerms> {
        let p = &self.params;
        (0..state.len())
            .into_par_iter()
            .map(|i| {
                let th = state.theta[i];
                let u = [state.u[0][i], state.u[1][i], state.u[2][i]];
                let g = kin.grad_u_at(i);
                let qc = state.q_at(i);
                let q = q_matrix(&qc);
                let hc: [f64; 5] = std::array::from_fn(|c| h[c][i]);
                let hm = q_matrix(&hc);
                let dq = kin.grad_q_at(i);
                let gamma = p.gamma(th);
                let mu = p.mu(th);
                let s = q_coords(&compute_s(&g, &q, p.xi));
                let mut adv_q = [0.0; 5];
                for (c, a) in adv_q.iter_mut().enumerate() {
                    *a = (0..3).map(|d| u[d] * kin.grad_q[3 * c + d][i]).sum();
                }
                let q_rhs = std::array::from_fn(|c| -adv_q[c] + s[c] + gamma * hc[c]);
                let st = stress(&g, &q, &hm, &dq, p.xi, mu, 0.0);
                let advect = std::array::from_fn(|a| (0..3).map(|b| u[b] * g[(a, b)]).sum());
                let uu = std::array::from_fn(|k| u[k / 3] * u[k % 3]);
                let sym = g + g.transpose();
                let heating = 0.5 * mu * frob(&sym, &sym) + gamma * hc.iter().map(|x| x * x).sum::<f64>();
                let transport = th * (0..5).map(|c| pot.grad[c][i] * adv_q[c]).sum::<f64>();
                let kappa = p.kappa(th);
                let e = p.thermal_energy(th);
                NodeTerms {
                    q_rhs,
                    stress: std::array::from_fn(|k| st[(k / 3, k % 3)]),
                    advect,
                    uu,
                    heating,
                    transport,
                    flux: std::array::from_fn(|d| kappa * kin.grad_theta[d][i]),
                    energy_flux: std::array::from_fn(|d| u[d] * e),
                }
            })
            .collect()
    }

    fn forward_of<F: Fn(&NodeTerms) -> f64>(&self, terms: &[NodeTerms], f: F) -> Spectral {
        let v: Vec<f64> = terms.iter().map(f).collect();
        self.grid.forward(&v)
    }

    /// `Σ_j ∂_j` of nodal components given by `f(terms, j)`.
    fn divergence<F: Fn(&NodeTerms, usize) -> f64>(&self, terms: &[NodeTerms], f: F) -> Spectral {
        let g = &self.grid;
        let mut out = zeros(g.len());
        for j in 0..3 {
            let d = g.derivative(&self.forward_of(terms, |t| f(t, j)), j);
            for (o, v) in out.iter_mut().zip(d) {
                *o += v;
            }
        }
        out
    }

    /// `div(κ∇θ) − div(e_θ u)` at the nodes.
    fn conduction_minus_transport(&self, terms: &[NodeTerms]) -> Vec<f64> {
        let g = &self.grid;
        let cond = self.divergence(terms, |t, j| t.flux[j]);
        let adv = self.divergence(terms, |t, j| t.energy_flux[j]);
        let diff: Spectral = cond.iter().zip(&adv).map(|(a, b)| a - b).collect();
        g.inverse(&diff)
    }

    /// Semi-discrete `dθ/dt`, with `θ Df(Q)/Dt = θ ∂f : (S + Γ H)` from the
    /// order-parameter equation.
    pub fn heat_rhs(&self, state: &FieldState, h: &[Vec<f64>; 5], pot: &PotentialField) -> Result<Vec<f64>> {
        self.check_grid(state)?;
        let kin = self.kinematics(state);
        let terms = self.node_terms(state, &kin, h, pot);
        let ct = self.conduction_minus_transport(&terms);
        let p = &self.params;
        (0..state.len())
            .map(|i| {
                let th = state.theta[i];
                if !(th > 0.0) {
                    return Err(Error::PositivityLoss {
                        node: i,
                        theta: th,
                        time: state.time,
                    });
                }
                let df_dt: f64 = (0..5)
                    .map(|c| pot.grad[c][i] * (terms[i].q_rhs[c]))
                    .sum::<f64>();
                let src = th * df_dt + terms[i].transport + terms[i].heating;
                Ok((ct[i] + src) / p.c_eff(th))
            })
            .collect()
    }

    /// `μ/2 |∇u + ∇ᵗu|² + Γ|H|²` at every node.
    pub fn dissipative_heating(&self, state: &FieldState, kin: &Kinematics, h: &[Vec<f64>; 5]) -> Vec<f64> {
        (0..state.len())
            .map(|i| {
                let g = kin.grad_u_at(i);
                let sym = g + g.transpose();
                let th = state.theta[i];
                0.5 * self.params.mu(th) * frob(&sym, &sym)
                    + self.params.gamma(th) * (0..5).map(|c| h[c][i] * h[c][i]).sum::<f64>()
            })
            .collect()
    }

    /// Largest stable step: `min(0.5 h/‖u‖∞, 0.2/(Γ(θ_max) max D²f[ĝ,ĝ]))`.
    pub fn cfl_dt(&self, state: &FieldState, pot: &PotentialField) -> f64 {
        let umax = (0..state.len())
            .map(|i| (state.u[0][i].powi(2) + state.u[1][i].powi(2) + state.u[2][i].powi(2)).sqrt())
            .fold(0.0, f64::max);
        let adv = if umax > 0.0 {
            0.5 * self.grid.spacing() / umax
        } else {
            f64::INFINITY
        };
        let hmax = pot.hess_scale.iter().cloned().fold(0.0, f64::max);
        let (_, tmax) = state.theta_range();
        let stiff = if hmax > 0.0 {
            0.2 / (self.params.gamma(tmax) * hmax)
        } else {
            f64::INFINITY
        };
        adv.min(stiff)
    }

    /// One step of size `dt`, halving on loss of physicality.
    pub fn step(&self, state: &FieldState, dt: f64) -> Result<FieldState> {
        self.check_grid(state)?;
        let pot = self.evaluate_potential(&state.q, None)?;
        Ok(self.step_with(state, &pot, dt)?.state)
    }

    /// As [`Self::step`] with the potential at the current state supplied.
    pub fn step_with(&self, state: &FieldState, pot: &PotentialField, dt: f64) -> Result<StepOutcome> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let kin = self.kinematics(state);
        let h = self.h_from(state, &kin.lap_q, pot);
        let terms = self.node_terms(state, &kin, &h, pot);
        let mut dt = dt;
        for halvings in 0..=MAX_STEP_HALVINGS {
            match self.try_step(state, pot, &terms, dt) {
                Ok((next, pot_next)) => {
                    return Ok(StepOutcome {
                        state: next,
                        potential: pot_next,
                        dt,
                        halvings,
                    })
                }
                Err(Error::AtNode { node, source }) if matches!(*source, Error::NonPhysical { .. }) => {
                    if halvings == MAX_STEP_HALVINGS {
                        return Err(Error::PhysicalityLoss {
                            node,
                            halvings,
                            time: state.time,
                        });
                    }
                    log::debug!("step rejected at node {node}, retrying with dt = {}", dt / 2.0);
                    dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        unreachable!("loop returns on the final halving")
    }

    fn try_step(
        &self,
        state: &FieldState,
        pot: &PotentialField,
        terms: &[NodeTerms],
        dt: f64,
    ) -> Result<(FieldState, PotentialField)> {
        let g = &self.grid;
        let p = &self.params;
        let len = g.len();
        let time = state.time + dt;

        // momentum
        let adv_div: [Spectral; 3] = std::array::from_fn(|a| {
            let mut out = zeros(len);
            for b in 0..3 {
                let d = g.derivative(&self.forward_of(terms, |t| t.uu[3 * a + b]), b);
                let s = g.derivative(&self.forward_of(terms, |t| t.stress[3 * a + b]), b);
                for ((o, dv), sv) in out.iter_mut().zip(d).zip(s) {
                    *o += sv - 0.5 * dv;
                }
            }
            let conv = self.forward_of(terms, |t| t.advect[a]);
            for (o, c) in out.iter_mut().zip(conv) {
                *o -= 0.5 * c;
            }
            g.dealias(&mut out);
            out
        });
        let mut du = adv_div;
        g.leray_project(&mut du);
        let mu_lo = p.mu_lower();
        let u_new: [Vec<f64>; 3] = std::array::from_fn(|a| {
            let s: Spectral = (0..len)
                .map(|idx| state.u_hat[a][idx] + du[a][idx] * (dt / (1.0 + dt * mu_lo * g.k2(idx))))
                .collect();
            g.inverse(&s)
        });

        // order parameter
        let q_new: [Vec<f64>; 5] = std::array::from_fn(|c| {
            let mut r = self.forward_of(terms, |t| t.q_rhs[c]);
            g.dealias(&mut r);
            let s: Spectral = (0..len)
                .map(|idx| state.q_hat[c][idx] + r[idx] * (dt / (1.0 + dt * p.gamma0 * g.k2(idx))))
                .collect();
            g.inverse(&s)
        });
        for f in u_new.iter() {
            check_finite("u", f, time)?;
        }
        for f in q_new.iter() {
            check_finite("Q", f, time)?;
        }
        let pot_new = self.evaluate_potential(&q_new, Some(&pot.warm))?;

        // temperature
        let ct = self.conduction_minus_transport(terms);
        let mut beta: f64 = 0.0;
        let rate: Vec<f64> = (0..len)
            .map(|i| {
                let th = state.theta[i];
                let c = p.c_eff(th);
                beta = beta.max(p.kappa(th) / c);
                let df = (pot_new.value[i] - pot.value[i]) / dt;
                (ct[i] + th * df + terms[i].transport + terms[i].heating) / c
            })
            .collect();
        let mut rh = g.forward(&rate);
        g.dealias(&mut rh);
        let th_hat: Spectral = (0..len)
            .map(|idx| state.theta_hat[idx] + rh[idx] * (dt / (1.0 + dt * beta * g.k2(idx))))
            .collect();
        let theta_new = g.inverse(&th_hat);
        check_finite("theta", &theta_new, time)?;
        if let Some((node, &t)) = theta_new.iter().enumerate().find(|(_, t)| !(**t > 0.0)) {
            return Err(Error::PositivityLoss { node, theta: t, time });
        }
        let next = FieldState::from_nodal(g, time, u_new, q_new, theta_new)?;
        Ok((next, pot_new))
    }
}

/// Result of [`SpectralModel::step_with`].
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: FieldState,
    /// Potential data at the new state.
    pub potential: PotentialField,
    /// Step actually taken.
    pub dt: f64,
    pub halvings: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::params::Viscosity;
    use crate::sim::state::InitSpec;

    fn model(n: usize, params: ModelParams) -> SpectralModel {
        SpectralModel::with_default_quadrature(n, params).unwrap()
    }

    fn uniform(grid: &Grid, q: [f64; 5], theta: f64) -> FieldState {
        let len = grid.len();
        FieldState::from_nodal(
            grid,
            0.0,
            std::array::from_fn(|_| vec![0.0; len]),
            std::array::from_fn(|c| vec![q[c]; len]),
            vec![theta; len],
        )
        .unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn state_diff(a: &FieldState, b: &FieldState) -> f64 {
        let mut d = max_diff(&a.theta, &b.theta);
        for c in 0..3 {
            d = d.max(max_diff(&a.u[c], &b.u[c]));
        }
        for c in 0..5 {
            d = d.max(max_diff(&a.q[c], &b.q[c]));
        }
        d
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let m = model(8, ModelParams::default());
        let s0 = FieldState::equilibrium(&m.grid, 1.3).unwrap();
        let s1 = m.step(&s0, 1e-2).unwrap();
        assert!(state_diff(&s0, &s1) <= 1e-14);
        let h = m.compute_h_field(&s0).unwrap();
        assert!(h.iter().flatten().all(|x| x.abs() < 1e-14));
        let p = m.recover_pressure(&s0, &h).unwrap();
        assert!(p.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn uniform_molecular_field_matches_potential_gradient() {
        let m = model(4, ModelParams::default());
        let qt = QTensor::diag(0.2, -0.1, -0.1);
        let s = uniform(&m.grid, qt.to_coords5(), 1.0);
        let h = m.compute_h_field(&s).unwrap();
        let df = m.bm.df_dq(&qt).unwrap().to_coords5();
        for c in 0..5 {
            let want = -df[c] + m.params.lambda_bulk * qt.to_coords5()[c];
            assert!(h[c].iter().all(|x| (x - want).abs() < 1e-12), "component {c}");
        }
    }

    #[test]
    fn molecular_field_laplacian_of_plane_wave() {
        let m = model(8, ModelParams::default());
        let g = &m.grid;
        let amp = 1e-3;
        let q0: Vec<f64> = (0..g.len()).map(|i| amp * (2.0 * g.coords(i)[1]).cos()).collect();
        let len = g.len();
        let s = FieldState::from_nodal(
            g,
            0.0,
            std::array::from_fn(|_| vec![0.0; len]),
            [q0.clone(), vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]],
            vec![1.0; len],
        )
        .unwrap();
        let kin = m.kinematics(&s);
        assert!(max_diff(&kin.lap_q[0], &q0.iter().map(|x| -4.0 * x).collect::<Vec<_>>()) < 1e-15);
    }

    #[test]
    fn taylor_green_pressure() {
        let m = model(16, ModelParams { viscosity: Viscosity::Constant { value: 1.0 }, ..Default::default() });
        let g = &m.grid;
        let len = g.len();
        let x: Vec<[f64; 3]> = (0..len).map(|i| g.coords(i)).collect();
        let u = [
            x.iter().map(|p| p[0].sin() * p[1].cos()).collect(),
            x.iter().map(|p| -p[0].cos() * p[1].sin()).collect(),
            vec![0.0; len],
        ];
        let s = FieldState::from_nodal(g, 0.0, u, std::array::from_fn(|_| vec![0.0; len]), vec![1.0; len]).unwrap();
        let h = m.compute_h_field(&s).unwrap();
        let p = m.recover_pressure(&s, &h).unwrap();
        let want: Vec<f64> = x.iter().map(|p| 0.25 * ((2.0 * p[0]).cos() + (2.0 * p[1]).cos())).collect();
        assert!(max_diff(&p, &want) < 1e-13);
        assert!(g.integrate(&p).abs() < 1e-12);
        let st = m.compute_stress(&s, &h, &p).unwrap();
        let i = g.index(3, 5, 7);
        assert!((st[0][i] - (2.0 * x[i][0].cos() * x[i][1].cos() - p[i])).abs() < 1e-13);
        assert_eq!(st[1][i], st[3][i]);
    }

    #[test]
    fn conduction_decay_rate() {
        let params = ModelParams::default();
        let m = model(8, params.clone());
        let g = &m.grid;
        let len = g.len();
        let eps = 1e-5;
        let theta: Vec<f64> = (0..len).map(|i| 1.0 + eps * g.coords(i)[0].cos()).collect();
        let mut s = FieldState::from_nodal(
            g,
            0.0,
            std::array::from_fn(|_| vec![0.0; len]),
            std::array::from_fn(|_| vec![0.0; len]),
            theta,
        )
        .unwrap();
        let mode = |s: &FieldState| s.theta_hat[g.index(1, 0, 0)].norm();
        let a0 = mode(&s);
        let (dt, steps) = (1e-3, 500);
        for _ in 0..steps {
            s = m.step(&s, dt).unwrap();
        }
        let rate = (a0 / mode(&s)).ln() / (dt * steps as f64);
        let want = params.kappa(1.0) / params.c_eff(1.0);
        assert!(((rate - want) / want).abs() < 0.01, "rate {rate} vs {want}");
    }

    #[test]
    fn heating_is_nonnegative_and_rhs_vanishes_at_rest() {
        let m = model(8, ModelParams::default());
        let g = &m.grid;
        let mut s = FieldState::random(g, &InitSpec::default(), 3).unwrap();
        s = FieldState::from_nodal(g, 0.0, s.u, s.q, vec![1.1; g.len()]).unwrap();
        let kin = m.kinematics(&s);
        let pot = m.evaluate_potential(&s.q, None).unwrap();
        let h = m.h_from(&s, &kin.lap_q, &pot);
        assert!(m.dissipative_heating(&s, &kin, &h).iter().all(|&x| x >= 0.0));
        let eq = FieldState::equilibrium(g, 2.0).unwrap();
        let pot = m.evaluate_potential(&eq.q, None).unwrap();
        let h = m.compute_h_field(&eq).unwrap();
        assert!(m.heat_rhs(&eq, &h, &pot).unwrap().iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn vanishing_order_parameter_decouples() {
        let m = model(8, ModelParams { xi: 0.0, ..Default::default() });
        let g = &m.grid;
        let r = FieldState::random(g, &InitSpec { u_amp: 0.5, ..Default::default() }, 4).unwrap();
        let mut s = FieldState::from_nodal(g, 0.0, r.u, std::array::from_fn(|_| vec![0.0; g.len()]), r.theta).unwrap();
        for _ in 0..20 {
            s = m.step(&s, 1e-2).unwrap();
            assert!(s.q.iter().flatten().all(|x| x.abs() < 1e-13));
            assert!(g.max_divergence(&s.u_hat) < 1e-10);
        }
        assert!(s.u[0].iter().any(|x| x.abs() > 1e-3));
    }

    #[test]
    fn step_halving_is_second_order_locally() {
        let m = model(8, ModelParams::default());
        let s0 = FieldState::random(&m.grid, &InitSpec { u_amp: 0.3, q_amp: 0.1, ..Default::default() }, 5).unwrap();
        let diff = |dt: f64| {
            let one = m.step(&s0, dt).unwrap();
            let two = m.step(&m.step(&s0, dt / 2.0).unwrap(), dt / 2.0).unwrap();
            state_diff(&one, &two)
        };
        let order = (diff(4e-3) / diff(2e-3)).log2();
        assert!(order >= 1.8, "order {order}");
    }

    #[test]
    fn cfl_and_errors() {
        let m = model(8, ModelParams::default());
        let s = FieldState::random(&m.grid, &InitSpec::default(), 6).unwrap();
        let pot = m.evaluate_potential(&s.q, None).unwrap();
        let dt = m.cfl_dt(&s, &pot);
        assert!(dt > 0.0 && dt < 0.5 * m.grid.spacing() / 0.05 + 1e-12);
        assert!(m.step(&s, -1.0).is_err());
        let len = m.grid.len();
        let mut q = s.q.clone();
        q[0][3] = 0.6;
        match m.evaluate_potential(&q, None) {
            Err(Error::AtNode { node: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let cold = FieldState::from_nodal(&m.grid, 0.0, s.u.clone(), s.q.clone(), vec![-1.0; len]).unwrap();
        let h = m.compute_h_field(&cold).unwrap();
        assert!(matches!(m.heat_rhs(&cold, &h, &pot), Err(Error::PositivityLoss { .. })));
        let other = model(4, ModelParams::default());
        assert!(other.step(&s, 1e-3).is_err());
    }

    /// RK4 on the spatially uniform reduction in `(Q, θ)`.
    fn uniform_reference(m: &SpectralModel, q0: [f64; 5], th0: f64, t_end: f64, steps: usize) -> ([f64; 5], f64) {
        let p = &m.params;
        let rhs = |y: &[f64; 6]| -> [f64; 6] {
            let q: [f64; 5] = std::array::from_fn(|c| y[c]);
            let th = y[5];
            let df = m.bm.df_dq(&QTensor::from_coords5(&q)).unwrap().to_coords5();
            let h: [f64; 5] = std::array::from_fn(|c| -th * df[c] + p.lambda_bulk * q[c]);
            let gam = p.gamma(th);
            let dq: [f64; 5] = std::array::from_fn(|c| gam * h[c]);
            let src: f64 = (0..5).map(|c| th * df[c] * dq[c] + gam * h[c] * h[c]).sum();
            let mut out = [0.0; 6];
            out[..5].copy_from_slice(&dq);
            out[5] = src / p.c_eff(th);
            out
        };
        let mut y = [q0[0], q0[1], q0[2], q0[3], q0[4], th0];
        let dt = t_end / steps as f64;
        let axpy = |y: &[f64; 6], k: &[f64; 6], a: f64| -> [f64; 6] { std::array::from_fn(|i| y[i] + a * k[i]) };
        for _ in 0..steps {
            let k1 = rhs(&y);
            let k2 = rhs(&axpy(&y, &k1, dt / 2.0));
            let k3 = rhs(&axpy(&y, &k2, dt / 2.0));
            let k4 = rhs(&axpy(&y, &k3, dt));
            y = std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        }
        (std::array::from_fn(|c| y[c]), y[5])
    }

    #[test]
    fn uniform_relaxation_matches_reference() {
        let m = model(4, ModelParams::default());
        let q0 = QTensor::diag(0.2, -0.1, -0.1).to_coords5();
        let t_end = 0.25;
        let run = |dt: f64| {
            let mut s = uniform(&m.grid, q0, 1.0);
            let mut pot = m.evaluate_potential(&s.q, None).unwrap();
            let n = (t_end / dt).round() as usize;
            for _ in 0..n {
                let out = m.step_with(&s, &pot, dt).unwrap();
                assert_eq!(out.halvings, 0);
                s = out.state;
                pot = out.potential;
            }
            let mut v = s.q_at(0).to_vec();
            v.push(s.theta[0]);
            v
        };
        let (a, b, c) = (run(1e-3), run(5e-4), run(2.5e-4));
        // three-level extrapolation for an error expansion in powers of dt
        let extrapolated: Vec<f64> = (0..6).map(|i| (8.0 * c[i] - 6.0 * b[i] + a[i]) / 3.0).collect();
        let (qr, tr) = uniform_reference(&m, q0, 1.0, t_end, 2000);
        let mut err = (extrapolated[5] - tr).abs();
        for k in 0..5 {
            err = err.max((extrapolated[k] - qr[k]).abs());
        }
        assert!(err < 1e-6, "error {err}");
        assert!((c[0] - qr[0]).abs() > 10.0 * err);
    }
}
