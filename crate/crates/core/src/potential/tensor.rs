//! Symmetric traceless 3×3 tensors and their spectral decomposition.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalue triple of a Q-tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub lambda: [f64; 3],
}

pub const LOWER: f64 = -1.0 / 3.0;
pub const UPPER: f64 = 2.0 / 3.0;

impl Spectrum {
    /// Checks finiteness and the zero-sum condition (within 1e-12).
    pub fn new(lambda: [f64; 3]) -> Result<Self> {
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite spectrum {lambda:?}")));
        }
        let s = lambda[0] + lambda[1] + lambda[2];
        if s.abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "spectrum {lambda:?} sums to {s:.3e}, expected 0"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn zero() -> Self {
        Self { lambda: [0.0; 3] }
    }

    /// Every eigenvalue in the open interval `(−1/3, 2/3)`.
    pub fn physical(&self) -> bool {
        self.lambda.iter().all(|&l| l > LOWER && l < UPPER)
    }

    /// Distance of the nearest eigenvalue to the ends of `(−1/3, 2/3)`.
    pub fn margin(&self) -> f64 {
        self.lambda
            .iter()
            .map(|&l| (l - LOWER).min(UPPER - l))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Symmetric traceless tensor, stored as its six independent entries
/// `(xx, yy, zz, xy, xz, yz)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QTensor {
    c: [f64; 6],
}

impl QTensor {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds from `(xx, yy, zz, xy, xz, yz)`; the trace is not removed.
    pub fn from_components(c: [f64; 6]) -> Self {
        Self { c }
    }

    /// Symmetric part of `m`, trace not removed.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Self {
            c: [
                m[(0, 0)],
                m[(1, 1)],
                m[(2, 2)],
                0.5 * (m[(0, 1)] + m[(1, 0)]),
                0.5 * (m[(0, 2)] + m[(2, 0)]),
                0.5 * (m[(1, 2)] + m[(2, 1)]),
            ],
        }
    }

    /// Symmetric traceless part `L[sym(m)]`.
    pub fn traceless_from_matrix(m: &Matrix3<f64>) -> Self {
        Self::from_matrix(m).traceless()
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Self {
            c: [a, b, c, 0.0, 0.0, 0.0],
        }
    }

    /// `R diag(l) Rᵀ`.
    pub fn from_frame(axes: &Matrix3<f64>, l: &[f64; 3]) -> Self {
        let d = Matrix3::from_diagonal(&nalgebra::Vector3::new(l[0], l[1], l[2]));
        Self::from_matrix(&(axes * d * axes.transpose()))
    }

    pub fn components(&self) -> [f64; 6] {
        self.c
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let c = &self.c;
        Matrix3::new(c[0], c[3], c[4], c[3], c[1], c[5], c[4], c[5], c[2])
    }

    pub fn trace(&self) -> f64 {
        self.c[0] + self.c[1] + self.c[2]
    }

    pub fn traceless(&self) -> Self {
        let t = self.trace() / 3.0;
        let mut c = self.c;
        c[0] -= t;
        c[1] -= t;
        c[2] -= t;
        Self { c }
    }

    /// Frobenius inner product `A : B`.
    pub fn dot(&self, other: &Self) -> f64 {
        let (a, b) = (&self.c, &other.c);
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + 2.0 * (a[3] * b[3] + a[4] * b[4] + a[5] * b[5])
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut c = self.c;
        c.iter_mut().for_each(|x| *x *= s);
        Self { c }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut c = self.c;
        c.iter_mut().zip(other.c).for_each(|(x, y)| *x += y);
        Self { c }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// `R Q Rᵀ`.
    pub fn rotate(&self, r: &Matrix3<f64>) -> Self {
        Self::from_matrix(&(r * self.matrix() * r.transpose()))
    }

    /// Coordinates in the orthonormal basis [`sym_traceless_basis`].
    pub fn to_coords5(&self) -> [f64; 5] {
        let c = &self.c;
        let s2 = std::f64::consts::SQRT_2;
        [
            (c[0] - c[1]) / s2,
            (c[0] + c[1] - 2.0 * c[2]) / 6f64.sqrt(),
            s2 * c[3],
            s2 * c[4],
            s2 * c[5],
        ]
    }

    pub fn from_coords5(q: &[f64; 5]) -> Self {
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let s6 = 1.0 / 6f64.sqrt();
        Self {
            c: [
                s2 * q[0] + s6 * q[1],
                -s2 * q[0] + s6 * q[1],
                -2.0 * s6 * q[1],
                s2 * q[2],
                s2 * q[3],
                s2 * q[4],
            ],
        }
    }
}

/// Orthonormal (Frobenius) basis of symmetric traceless 3×3 matrices:
/// `diag(1,−1,0)/√2`, `diag(1,1,−2)/√6`, and the three off-diagonal pairs
/// scaled by `1/√2`.
pub fn sym_traceless_basis() -> [QTensor; 5] {
    let mut out = [QTensor::zero(); 5];
    for (k, b) in out.iter_mut().enumerate() {
        let mut e = [0.0; 5];
        e[k] = 1.0;
        *b = QTensor::from_coords5(&e);
    }
    out
}

/// Spectral decomposition `Q = axes · diag(λ) · axesᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenFrame {
    pub spectrum: Spectrum,
    /// Columns are unit eigenvectors, in the order of `spectrum.lambda`.
    pub axes: Matrix3<f64>,
}

impl EigenFrame {
    pub fn reconstruct(&self) -> QTensor {
        QTensor::from_frame(&self.axes, &self.spectrum.lambda)
    }

    /// `axesᵀ V axes`.
    pub fn to_frame(&self, v: &QTensor) -> Matrix3<f64> {
        self.axes.transpose() * v.matrix() * self.axes
    }
}

/// Eigenvalues in descending order and orthonormal eigenvectors whose first
/// nonzero component is positive. Diagonal input (including zero) returns
/// permuted coordinate axes exactly.
pub fn eigendecomp_sym3(q: &QTensor) -> EigenFrame {
    let c = q.components();
    let (vals, vecs) = if c[3] == 0.0 && c[4] == 0.0 && c[5] == 0.0 {
        ([c[0], c[1], c[2]], Matrix3::identity())
    } else {
        let eig = SymmetricEigen::new(q.matrix());
        (
            [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]],
            eig.eigenvectors,
        )
    };
    let mut order = [0usize, 1, 2];
    // stable sort keeps the identity for ties, so the zero tensor maps to I
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut axes = Matrix3::zeros();
    let mut lambda = [0.0; 3];
    for (k, &j) in order.iter().enumerate() {
        lambda[k] = vals[j];
        let mut col = vecs.column(j).into_owned();
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-14) {
            if *first < 0.0 {
                col = -col;
            }
        }
        axes.set_column(k, &col);
    }
    EigenFrame {
        spectrum: Spectrum { lambda },
        axes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Vector3};

    fn rot() -> Matrix3<f64> {
        Rotation3::new(Vector3::new(0.3, -1.2, 0.7).normalize() * 1.1).into_inner()
    }

    #[test]
    fn diagonal_input_is_exact() {
        let f = eigendecomp_sym3(&QTensor::diag(0.2, 0.1, -0.3));
        assert_eq!(f.spectrum.lambda, [0.2, 0.1, -0.3]);
        assert_eq!(f.axes, Matrix3::identity());
        let g = eigendecomp_sym3(&QTensor::diag(-0.3, 0.1, 0.2));
        assert_eq!(g.spectrum.lambda, [0.2, 0.1, -0.3]);
        assert_eq!(g.reconstruct(), QTensor::diag(-0.3, 0.1, 0.2));
    }

    #[test]
    fn zero_tensor_identity_axes() {
        let f = eigendecomp_sym3(&QTensor::zero());
        assert_eq!(f.spectrum.lambda, [0.0; 3]);
        assert_eq!(f.axes, Matrix3::identity());
    }

    #[test]
    fn rotated_input_recovers_spectrum() {
        let q = QTensor::diag(0.2, 0.1, -0.3).rotate(&rot());
        let f = eigendecomp_sym3(&q);
        for (a, b) in f.spectrum.lambda.iter().zip([0.2, 0.1, -0.3]) {
            assert!((a - b).abs() < 1e-12);
        }
        let ortho = f.axes.transpose() * f.axes - Matrix3::identity();
        assert!(ortho.abs().max() < 1e-12);
        assert!(f.reconstruct().sub(&q).norm() < 1e-10);
        for k in 0..3 {
            let col = f.axes.column(k);
            let first = col.iter().find(|x| x.abs() > 1e-14).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn coords5_round_trip_and_orthonormal() {
        let q = QTensor::from_components([0.1, -0.3, 0.2, 0.05, -0.07, 0.11]);
        let back = QTensor::from_coords5(&q.to_coords5());
        assert!(back.sub(&q).norm() < 1e-15);
        let basis = sym_traceless_basis();
        for i in 0..5 {
            assert!(basis[i].trace().abs() < 1e-15);
            for j in 0..5 {
                let d = basis[i].dot(&basis[j]);
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((d - e).abs() < 1e-15);
            }
        }
        let c = q.to_coords5();
        let n2: f64 = c.iter().map(|x| x * x).sum();
        assert!((n2 - q.dot(&q)).abs() < 1e-15);
    }

    #[test]
    fn spectrum_checks() {
        assert!(Spectrum::new([0.1, 0.1, 0.1]).is_err());
        let s = Spectrum::new([0.4, -0.2, -0.2]).unwrap();
        assert!(s.physical());
        assert!(!Spectrum::new([0.7, -0.35, -0.35]).unwrap().physical());
        assert!((s.margin() - (1.0 / 3.0 - 0.2)).abs() < 1e-15);
    }
}
