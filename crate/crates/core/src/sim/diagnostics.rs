//! Energy and entropy monitors and the local entropy-inequality audit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::algebra::{frob, mat_identity_residual, q_matrix};
use super::grid::Grid;
use super::model::{Kinematics, PotentialField, SpectralModel};
use super::state::FieldState;
use crate::error::{Error, Result};

/// One diagnostic sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub step: usize,
    /// `∫ ½|u|² + ½|∇Q|² − (λ/2)|Q|² + θ + a(m−1)θ^m`.
    pub e_total: f64,
    pub e_kin: f64,
    /// `∫ 1 + log θ − f(Q) + m a θ^{m−1}`.
    pub s_total: f64,
    /// `∫ μ(θ)/(2θ) |∇u + ∇ᵗu|²`.
    pub d_visc: f64,
    /// `∫ Γ(θ)/θ |H|²`.
    pub d_h: f64,
    /// `∫ κ(θ)/θ² |∇θ|²`.
    pub d_heat: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub q_eig_min: f64,
    pub q_eig_max: f64,
    /// `|E(t) − E(0)| / |E(0)|`.
    pub energy_residual: f64,
    /// `∫₀ᵗ (D_visc + D_H + D_heat) − (S(t) − S(0))`, trapezoid in time.
    pub entropy_balance_lhs: f64,
    /// Largest spectral divergence `|k·û_k|`.
    pub div_max: f64,
    /// Largest nodal residual of the `−H:S` identity.
    pub mat_residual: f64,
}

impl DiagnosticsRecord {
    pub fn production(&self) -> f64 {
        self.d_visc + self.d_h + self.d_heat
    }
}

/// Pointwise entropy data kept for the local audit.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySample {
    pub time: f64,
    /// Entropy density `s`.
    pub s: Vec<f64>,
    pub u: [Vec<f64>; 3],
    /// `H(θ)` with `H' = κ/θ`.
    pub heat_potential: Vec<f64>,
    /// `(μ/2|∇u+∇ᵗu|² + Γ|H|² + κ/θ |∇θ|²)/θ`.
    pub production: Vec<f64>,
}

/// Nodal densities shared by the record and the history.
pub(crate) struct Densities {
    pub s: Vec<f64>,
    pub visc: Vec<f64>,
    pub h2: Vec<f64>,
    pub heat: Vec<f64>,
}

impl SpectralModel {
    pub(crate) fn densities(
        &self,
        state: &FieldState,
        kin: &Kinematics,
        h: &[Vec<f64>; 5],
        pot: &PotentialField,
    ) -> Densities {
        let p = &self.params;
        let len = state.len();
        let mut d = Densities {
            s: Vec::with_capacity(len),
            visc: Vec::with_capacity(len),
            h2: Vec::with_capacity(len),
            heat: Vec::with_capacity(len),
        };
        for i in 0..len {
            let th = state.theta[i];
            let g = kin.grad_u_at(i);
            let sym = g + g.transpose();
            let gt = kin.grad_theta_at(i);
            d.s.push(p.thermal_entropy(th) - pot.value[i]);
            d.visc.push(0.5 * p.mu(th) / th * frob(&sym, &sym));
            d.h2.push(p.gamma(th) / th * (0..5).map(|c| h[c][i] * h[c][i]).sum::<f64>());
            d.heat.push(p.kappa(th) / (th * th) * (gt[0] * gt[0] + gt[1] * gt[1] + gt[2] * gt[2]));
        }
        d
    }

    /// Instantaneous record; the balance fields are left at zero.
    pub fn diagnostics(&self, state: &FieldState, pot: &PotentialField, step: usize) -> (DiagnosticsRecord, HistorySample) {
        let g = &self.grid;
        let p = &self.params;
        let kin = self.kinematics(state);
        let h = self.h_from(state, &kin.lap_q, pot);
        let d = self.densities(state, &kin, &h, pot);
        let len = state.len();
        let ekin: Vec<f64> = (0..len)
            .map(|i| 0.5 * (state.u[0][i].powi(2) + state.u[1][i].powi(2) + state.u[2][i].powi(2)))
            .collect();
        let e: Vec<f64> = (0..len)
            .map(|i| {
                let grad2: f64 = kin.grad_q.iter().map(|f| f[i] * f[i]).sum();
                let q2: f64 = (0..5).map(|c| state.q[c][i] * state.q[c][i]).sum();
                ekin[i] + 0.5 * grad2 - 0.5 * p.lambda_bulk * q2 + p.thermal_energy(state.theta[i])
            })
            .collect();
        let mat_residual = (0..len)
            .map(|i| {
                let hm = q_matrix(&std::array::from_fn(|c| h[c][i]));
                mat_identity_residual(&kin.grad_u_at(i), &q_matrix(&state.q_at(i)), &hm, p.xi)
            })
            .fold(0.0, f64::max);
        let (theta_min, theta_max) = state.theta_range();
        let rec = DiagnosticsRecord {
            time: state.time,
            step,
            e_total: g.integrate(&e),
            e_kin: g.integrate(&ekin),
            s_total: g.integrate(&d.s),
            d_visc: g.integrate(&d.visc),
            d_h: g.integrate(&d.h2),
            d_heat: g.integrate(&d.heat),
            theta_min,
            theta_max,
            q_eig_min: pot.eig_min,
            q_eig_max: pot.eig_max,
            energy_residual: 0.0,
            entropy_balance_lhs: 0.0,
            div_max: g.max_divergence(&state.u_hat),
            mat_residual,
        };
        let production = (0..len).map(|i| d.visc[i] + d.h2[i] + d.heat[i]).collect();
        let hist = HistorySample {
            time: state.time,
            s: d.s,
            u: state.u.clone(),
            heat_potential: state.theta.iter().map(|&t| p.heat_potential(t)).collect(),
            production,
        };
        (rec, hist)
    }
}

/// Running energy and entropy balances over successive samples.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceTracker {
    e0: Option<f64>,
    s0: f64,
    last: Option<(f64, f64)>,
    produced: f64,
}

impl BalanceTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fills `energy_residual` and `entropy_balance_lhs` in place.
    pub fn update(&mut self, rec: &mut DiagnosticsRecord) {
        let prod = rec.production();
        match self.e0 {
            None => {
                self.e0 = Some(rec.e_total);
                self.s0 = rec.s_total;
            }
            Some(_) => {
                let (t0, p0) = self.last.expect("set with e0");
                self.produced += 0.5 * (rec.time - t0) * (p0 + prod);
            }
        }
        self.last = Some((rec.time, prod));
        let e0 = self.e0.expect("initialised above");
        rec.energy_residual = if e0 != 0.0 {
            (rec.e_total - e0).abs() / e0.abs()
        } else {
            (rec.e_total - e0).abs()
        };
        rec.entropy_balance_lhs = self.produced - (rec.s_total - self.s0);
    }
}

/// Trigonometric mode `c cos(k·x) + s sin(k·x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigMode {
    pub k: [i32; 3],
    pub cos: f64,
    pub sin: f64,
}

/// Nonnegative space-time test function `φ = g(t) P(x)²` with
/// `P = c0 + Σ modes` and `g(t) = exp(−(t − t_c)²/(2w²))`, or `g ≡ 1` when
/// no centre is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub c0: f64,
    pub modes: Vec<TrigMode>,
    pub time_center: Option<f64>,
    pub time_width: f64,
}

impl TestFunction {
    /// `φ ≡ c`.
    pub fn constant(c: f64) -> Self {
        Self {
            c0: c.max(0.0).sqrt(),
            modes: Vec::new(),
            time_center: None,
            time_width: 1.0,
        }
    }

    /// Random bump centred inside `(0.2 T, 0.8 T)` with width `0.15 T`.
    pub fn random<R: Rng>(rng: &mut R, t_end: f64) -> Self {
        let n_modes = rng.random_range(1..=3);
        let modes = (0..n_modes)
            .map(|_| {
                let mut k = [0i32; 3];
                while k == [0, 0, 0] {
                    k = std::array::from_fn(|_| rng.random_range(-2..=2));
                }
                TrigMode {
                    k,
                    cos: rng.random_range(-0.5..0.5),
                    sin: rng.random_range(-0.5..0.5),
                }
            })
            .collect();
        Self {
            c0: 1.0,
            modes,
            time_center: Some(rng.random_range(0.2..0.8) * t_end),
            time_width: 0.15 * t_end,
        }
    }

    fn time_factor(&self, t: f64) -> (f64, f64) {
        match self.time_center {
            None => (1.0, 0.0),
            Some(tc) => {
                let w2 = self.time_width * self.time_width;
                let g = (-(t - tc) * (t - tc) / (2.0 * w2)).exp();
                (g, -g * (t - tc) / w2)
            }
        }
    }

    /// `(P, ∇P, ΔP)` at `x`.
    fn space(&self, x: &[f64; 3]) -> (f64, [f64; 3], f64) {
        let mut p = self.c0;
        let mut grad = [0.0; 3];
        let mut lap = 0.0;
        for m in &self.modes {
            let k = [m.k[0] as f64, m.k[1] as f64, m.k[2] as f64];
            let ph = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
            let (s, c) = ph.sin_cos();
            let v = m.cos * c + m.sin * s;
            let dv = -m.cos * s + m.sin * c;
            p += v;
            for d in 0..3 {
                grad[d] += k[d] * dv;
            }
            lap -= (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) * v;
        }
        (p, grad, lap)
    }

    /// `(φ, φ_t, ∇φ, Δφ)`.
    pub fn eval(&self, t: f64, x: &[f64; 3]) -> (f64, f64, [f64; 3], f64) {
        let (g, gt) = self.time_factor(t);
        let (p, dp, lp) = self.space(x);
        let p2 = p * p;
        let grad = [2.0 * g * p * dp[0], 2.0 * g * p * dp[1], 2.0 * g * p * dp[2]];
        let dp2 = dp[0] * dp[0] + dp[1] * dp[1] + dp[2] * dp[2];
        (g * p2, gt * p2, grad, 2.0 * g * (dp2 + p * lp))
    }
}

#[derive(Clone)]
struct Previous {
    time: f64,
    s: Vec<f64>,
    phi: Vec<Vec<f64>>,
    bulk: Vec<f64>,
}

/// Streaming form of [`entropy_local_audit`] for several test functions,
/// fed one sample at a time so no history has to be stored.
#[derive(Clone)]
pub struct AuditAccumulator {
    grid: Grid,
    coords: Vec<[f64; 3]>,
    tests: Vec<TestFunction>,
    totals: Vec<f64>,
    first: Vec<f64>,
    last: Vec<f64>,
    samples: usize,
    prev: Option<Previous>,
}

impl std::fmt::Debug for AuditAccumulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AuditAccumulator")
            .field("tests", &self.tests)
            .field("samples", &self.samples)
            .finish_non_exhaustive()
    }
}

impl AuditAccumulator {
    pub fn new(grid: &Grid, singular_flux: bool, tests: Vec<TestFunction>) -> Result<Self> {
        if !singular_flux {
            return Err(Error::ModeMismatch);
        }
        let k = tests.len();
        Ok(Self {
            grid: grid.clone(),
            coords: (0..grid.len()).map(|i| grid.coords(i)).collect(),
            tests,
            totals: vec![0.0; k],
            first: vec![0.0; k],
            last: vec![0.0; k],
            samples: 0,
            prev: None,
        })
    }

    pub fn tests(&self) -> &[TestFunction] {
        &self.tests
    }

    pub fn push(&mut self, h: &HistorySample) -> Result<()> {
        let g = &self.grid;
        let len = g.len();
        if h.s.len() != len {
            return Err(Error::InvalidArgument("sample does not match the grid".into()));
        }
        let mut phis = Vec::with_capacity(self.tests.len());
        let mut bulks = Vec::with_capacity(self.tests.len());
        for (j, test) in self.tests.iter().enumerate() {
            let mut vals = Vec::with_capacity(len);
            let mut dens = Vec::with_capacity(len);
            for i in 0..len {
                let (f, _, gr, lap) = test.eval(h.time, &self.coords[i]);
                let adv = h.u[0][i] * gr[0] + h.u[1][i] * gr[1] + h.u[2][i] * gr[2];
                dens.push(h.s[i] * adv + h.heat_potential[i] * lap + f * h.production[i]);
                vals.push(f);
            }
            let bulk = g.integrate(&dens);
            let sphi = g.integrate_with(|i| h.s[i] * vals[i]);
            match &self.prev {
                None => self.first[j] = sphi,
                Some(p) => {
                    let time = g.integrate_with(|i| 0.5 * (p.s[i] + h.s[i]) * (vals[i] - p.phi[j][i]));
                    self.totals[j] += time + 0.5 * (h.time - p.time) * (p.bulk[j] + bulk);
                }
            }
            self.last[j] = sphi;
            phis.push(vals);
            bulks.push(bulk);
        }
        self.prev = Some(Previous {
            time: h.time,
            s: h.s.clone(),
            phi: phis,
            bulk: bulks,
        });
        self.samples += 1;
        Ok(())
    }

    /// Current `lhs − rhs` for every test function.
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.samples < 2 {
            return Err(Error::InvalidArgument("audit needs at least two samples".into()));
        }
        Ok((0..self.tests.len())
            .map(|j| self.totals[j] - (self.last[j] - self.first[j]))
            .collect())
    }
}

/// Value of
/// `∫∫ s φ_t + ∫∫ s u·∇φ + ∫∫ H(θ) Δφ − [∫ s φ]₀ᵀ + ∫∫ φ π`, with `π` the
/// entropy production density: the left side minus the right side of the
/// distributional entropy inequality, boundary terms included. Time
/// integrals use the trapezoid rule over the samples, with `∫ s φ_t` over
/// each interval taken as `½(s_i + s_{i+1})(φ_{i+1} − φ_i)` so that a
/// stationary history gives exactly zero.
pub fn entropy_local_audit(
    history: &[HistorySample],
    grid: &Grid,
    singular_flux: bool,
    phi: &TestFunction,
) -> Result<f64> {
    let mut acc = AuditAccumulator::new(grid, singular_flux, vec![phi.clone()])?;
    for h in history {
        acc.push(h)?;
    }
    Ok(acc.values()?[0])
}
