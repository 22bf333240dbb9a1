//! Collocation grid on the periodic box `[−π, π)³` with 3D FFTs, spectral
//! derivatives, 2/3-rule truncation and Leray projection.
//!
//! Node `(i, j, l)` sits at `(−π + i h, −π + j h, −π + l h)` with
//! `h = 2π/n` and is stored at index `(i n + j) n + l`. First derivatives
//! use wavenumbers with the Nyquist entry set to zero, so the discrete
//! gradient is skew-adjoint and the Laplacian is its composition with the
//! divergence.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type Spectral = Vec<Complex64>;

pub const MIN_GRID: usize = 4;

pub struct Grid {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Derivative wavenumber per 1D index (Nyquist zeroed).
    k: Vec<f64>,
    /// 1D 2/3-rule mask.
    keep: Vec<bool>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).finish()
    }
}

impl Clone for Grid {
    fn clone(&self) -> Self {
        Grid::new(self.n).expect("validated size")
    }
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_GRID || n % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "grid size must be even and at least {MIN_GRID}, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let half = (n / 2) as i64;
        let k: Vec<f64> = (0..n as i64)
            .map(|i| {
                let w = if i < half { i } else { i - n as i64 };
                if w == -half {
                    0.0
                } else {
                    w as f64
                }
            })
            .collect();
        let keep = (0..n as i64)
            .map(|i| {
                let w = if i < half { i } else { i - n as i64 };
                3 * w.abs() < n as i64
            })
            .collect();
        Ok(Self {
            n,
            forward,
            inverse,
            k,
            keep,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.n + j) * self.n + l
    }

    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        let h = self.spacing();
        let (i, j, l) = (idx / (n * n), (idx / n) % n, idx % n);
        [-PI + i as f64 * h, -PI + j as f64 * h, -PI + l as f64 * h]
    }

    /// Derivative wavevector of spectral index `idx`.
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        [self.k[idx / (n * n)], self.k[(idx / n) % n], self.k[idx % n]]
    }

    pub fn k2(&self, idx: usize) -> f64 {
        let k = self.wavevector(idx);
        k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
    }

    pub fn kept(&self, idx: usize) -> bool {
        let n = self.n;
        self.keep[idx / (n * n)] && self.keep[(idx / n) % n] && self.keep[idx % n]
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        if axis == 2 {
            fft.process(data);
            return;
        }
        let stride = if axis == 1 { n } else { n * n };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for a in 0..n {
            for b in 0..n {
                let base = if axis == 1 { a * n * n + b } else { a * n + b };
                for (t, v) in line.iter_mut().enumerate() {
                    *v = data[base + t * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (t, v) in line.iter().enumerate() {
                    data[base + t * stride] = *v;
                }
            }
        }
    }

    pub fn forward(&self, f: &[f64]) -> Spectral {
        let mut d: Spectral = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for axis in [2, 1, 0] {
            self.transform_axis(&mut d, axis, &self.forward);
        }
        d
    }

    /// Real part of the normalised inverse transform.
    pub fn inverse(&self, s: &[Complex64]) -> Vec<f64> {
        let mut d = s.to_vec();
        for axis in [2, 1, 0] {
            self.transform_axis(&mut d, axis, &self.inverse);
        }
        let scale = 1.0 / self.len() as f64;
        d.iter().map(|c| c.re * scale).collect()
    }

    /// `∂_axis` in spectral space.
    pub fn derivative(&self, s: &[Complex64], axis: usize) -> Spectral {
        s.iter()
            .enumerate()
            .map(|(idx, c)| {
                let k = self.wavevector(idx)[axis];
                Complex64::new(-k * c.im, k * c.re)
            })
            .collect()
    }

    pub fn laplacian(&self, s: &[Complex64]) -> Spectral {
        s.iter()
            .enumerate()
            .map(|(idx, c)| c * -self.k2(idx))
            .collect()
    }

    /// Nodal values of `∂_axis f`.
    pub fn grad_nodal(&self, s: &[Complex64], axis: usize) -> Vec<f64> {
        self.inverse(&self.derivative(s, axis))
    }

    /// Spectral divergence `Σ_j ∂_j F_j` of nodal components.
    pub fn divergence_of(&self, comps: [&[f64]; 3]) -> Spectral {
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        for (axis, c) in comps.iter().enumerate() {
            let d = self.derivative(&self.forward(c), axis);
            for (o, v) in out.iter_mut().zip(d) {
                *o += v;
            }
        }
        out
    }

    /// 2/3-rule truncation in place.
    pub fn dealias(&self, s: &mut [Complex64]) {
        for (idx, c) in s.iter_mut().enumerate() {
            if !self.kept(idx) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// `û ← (I − k kᵀ/|k|²) û` away from `k = 0`.
    pub fn leray_project(&self, u: &mut [Spectral; 3]) {
        for idx in 0..self.len() {
            let k = self.wavevector(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                continue;
            }
            let dot = u[0][idx] * k[0] + u[1][idx] * k[1] + u[2][idx] * k[2];
            for d in 0..3 {
                u[d][idx] -= dot * (k[d] / k2);
            }
        }
    }

    /// `max_k |k · û_k|`, the spectral divergence size.
    pub fn max_divergence(&self, u: &[Spectral; 3]) -> f64 {
        let scale = 1.0 / self.len() as f64;
        (0..self.len())
            .map(|idx| {
                let k = self.wavevector(idx);
                (u[0][idx] * k[0] + u[1][idx] * k[1] + u[2][idx] * k[2]).norm() * scale
            })
            .fold(0.0, f64::max)
    }

    /// `∫ f` over the box by the nodal rule, summed pairwise in fixed order.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        pairwise_sum(f) * self.cell_volume()
    }

    pub fn integrate_with<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        let v: Vec<f64> = (0..self.len()).map(f).collect();
        self.integrate(&v)
    }
}

/// Pairwise summation with a fixed split, independent of scheduling.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}
