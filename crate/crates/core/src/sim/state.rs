//! Field state on the collocation grid and initial-data constructors.
//!
//! Nodal values are canonical; the spectral mirrors are their forward
//! transforms and are always rebuilt from them, so a state is determined
//! bit-for-bit by `(time, u, Q, θ)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{Grid, Spectral};
use crate::error::{Error, Result};
use crate::potential::{eigendecomp_sym3, QTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub n: usize,
    pub time: f64,
    pub u: [Vec<f64>; 3],
    /// Five coordinates of `Q` in the orthonormal traceless basis.
    pub q: [Vec<f64>; 5],
    pub theta: Vec<f64>,
    pub u_hat: [Spectral; 3],
    pub q_hat: [Spectral; 5],
    pub theta_hat: Spectral,
}

impl FieldState {
    pub fn from_nodal(
        grid: &Grid,
        time: f64,
        u: [Vec<f64>; 3],
        q: [Vec<f64>; 5],
        theta: Vec<f64>,
    ) -> Result<Self> {
        let len = grid.len();
        if u.iter().any(|f| f.len() != len) || q.iter().any(|f| f.len() != len) || theta.len() != len {
            return Err(Error::InvalidArgument(format!(
                "field lengths must equal {len} for grid {}",
                grid.n()
            )));
        }
        let u_hat = std::array::from_fn(|d| grid.forward(&u[d]));
        let q_hat = std::array::from_fn(|c| grid.forward(&q[c]));
        let theta_hat = grid.forward(&theta);
        Ok(Self {
            n: grid.n(),
            time,
            u,
            q,
            theta,
            u_hat,
            q_hat,
            theta_hat,
        })
    }

    /// `u = 0`, `Q = 0`, `θ ≡ θ0`.
    pub fn equilibrium(grid: &Grid, theta0: f64) -> Result<Self> {
        let len = grid.len();
        Self::from_nodal(
            grid,
            0.0,
            std::array::from_fn(|_| vec![0.0; len]),
            std::array::from_fn(|_| vec![0.0; len]),
            vec![theta0; len],
        )
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn q_at(&self, node: usize) -> [f64; 5] {
        std::array::from_fn(|c| self.q[c][node])
    }

    pub fn q_tensor(&self, node: usize) -> QTensor {
        QTensor::from_coords5(&self.q_at(node))
    }

    /// Smallest and largest eigenvalue of `Q` over all nodes.
    pub fn q_eig_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for node in 0..self.len() {
            let l = eigendecomp_sym3(&self.q_tensor(node)).spectrum.lambda;
            lo = lo.min(l[2]);
            hi = hi.max(l[0]);
        }
        (lo, hi)
    }

    pub fn theta_range(&self) -> (f64, f64) {
        self.theta
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)))
    }
}

/// Band-limited random initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSpec {
    /// Largest wavenumber component excited.
    pub band: usize,
    /// Maximum nodal speed.
    pub u_amp: f64,
    /// Maximum nodal Frobenius norm of `Q`.
    pub q_amp: f64,
    pub theta0: f64,
    /// Maximum deviation of `θ` from `θ0`.
    pub theta_amp: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            band: 2,
            u_amp: 0.05,
            q_amp: 0.03,
            theta0: 1.0,
            theta_amp: 0.02,
        }
    }
}

/// Nodal values of a random zero-mean field with wavenumber components in
/// `[−band, band]`, normalised to unit maximum modulus.
fn random_band_field(grid: &Grid, band: usize, rng: &mut ChaCha8Rng) -> Spectral {
    let n = grid.n();
    let wrap = |i: usize| -> i64 {
        let i = i as i64;
        if i < (n / 2) as i64 {
            i
        } else {
            i - n as i64
        }
    };
    let mut s = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (idx, c) in s.iter_mut().enumerate() {
        let w = [wrap(idx / (n * n)), wrap((idx / n) % n), wrap(idx % n)];
        let inside = w.iter().all(|x| x.unsigned_abs() as usize <= band) && w != [0, 0, 0];
        // draw for every mode so the stream does not depend on the band
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        if inside && grid.kept(idx) {
            *c = Complex64::new(re, im);
        }
    }
    // real part of the inverse transform symmetrises the spectrum
    let f = grid.inverse(&s);
    grid.forward(&f)
}

fn scale_to(values: &mut [Vec<f64>], target: f64, norm: impl Fn(usize) -> f64) {
    let len = values[0].len();
    let m = (0..len).map(norm).fold(0.0, f64::max);
    if m > 0.0 {
        let s = target / m;
        values.iter_mut().for_each(|f| f.iter_mut().for_each(|x| *x *= s));
    }
}

impl FieldState {
    /// Divergence-free `u`, physical `Q` and `θ ≥ θ0 − θ_amp > 0`, drawn
    /// from `ChaCha8Rng::seed_from_u64(seed)` on streams 0, 1, 2.
    pub fn random(grid: &Grid, init: &InitSpec, seed: u64) -> Result<Self> {
        if !(init.theta0 - init.theta_amp > 0.0) || init.theta_amp < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "initial temperature must stay positive: theta0 = {}, theta_amp = {}",
                init.theta0, init.theta_amp
            )));
        }
        // Frobenius norm r bounds eigenvalues by sqrt(2/3) r
        if !(init.q_amp >= 0.0 && (2.0f64 / 3.0).sqrt() * init.q_amp < 1.0 / 3.0 - 1e-3) {
            return Err(Error::InvalidArgument(format!(
                "q_amp = {} does not keep Q in the safety region",
                init.q_amp
            )));
        }
        if init.band == 0 || 3 * init.band >= grid.n() || init.u_amp < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "band {} must lie in [1, n/3) and amplitudes must be nonnegative",
                init.band
            )));
        }
        let stream = |s: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(s);
            r
        };
        let mut rng = stream(0);
        let mut uh: [Spectral; 3] = std::array::from_fn(|_| random_band_field(grid, init.band, &mut rng));
        grid.leray_project(&mut uh);
        let mut u: [Vec<f64>; 3] = std::array::from_fn(|d| grid.inverse(&uh[d]));
        {
            let snapshot = u.clone();
            scale_to(&mut u, init.u_amp, |i| {
                (snapshot[0][i].powi(2) + snapshot[1][i].powi(2) + snapshot[2][i].powi(2)).sqrt()
            });
        }

        let mut rng = stream(1);
        let mut q: [Vec<f64>; 5] =
            std::array::from_fn(|_| grid.inverse(&random_band_field(grid, init.band, &mut rng)));
        {
            let snapshot = q.clone();
            scale_to(&mut q, init.q_amp, |i| {
                snapshot.iter().map(|f| f[i] * f[i]).sum::<f64>().sqrt()
            });
        }

        let mut rng = stream(2);
        let mut th = [grid.inverse(&random_band_field(grid, init.band, &mut rng))];
        {
            let snapshot = th[0].clone();
            scale_to(&mut th, init.theta_amp, |i| snapshot[i].abs());
        }
        let [mut theta] = th;
        theta.iter_mut().for_each(|t| *t += init.theta0);
        Self::from_nodal(grid, 0.0, u, q, theta)
    }
}
