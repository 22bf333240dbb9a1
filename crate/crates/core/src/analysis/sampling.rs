//! Seeded sample laws for spectra, rotations and tensor directions.
//!
//! Sample `i` of a run with seed `s` always draws from
//! `ChaCha8Rng::seed_from_u64(s)` on stream `i`, so results do not depend on
//! how samples are scheduled across threads.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::potential::{QTensor, Spectrum};

pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Spectrum `λ = x − 1/3` with `x = margin + (1 − 3·margin)·Dirichlet(1,1,1)`,
/// so every eigenvalue keeps distance `margin` from both ends of `(−1/3, 2/3)`.
pub fn sample_spectrum<R: Rng>(rng: &mut R, margin: f64) -> Spectrum {
    let e: [f64; 3] = [Exp1.sample(rng), Exp1.sample(rng), Exp1.sample(rng)];
    let s = e[0] + e[1] + e[2];
    let scale = 1.0 - 3.0 * margin;
    let mut l = [0.0; 3];
    for i in 0..3 {
        l[i] = margin + scale * e[i] / s - 1.0 / 3.0;
    }
    Spectrum {
        lambda: crate::partition::project_x(l),
    }
}

/// Uniform random rotation from a normalised Gaussian quaternion.
pub fn random_rotation<R: Rng>(rng: &mut R) -> Matrix3<f64> {
    let q = Quaternion::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    );
    UnitQuaternion::from_quaternion(q)
        .to_rotation_matrix()
        .into_inner()
}

/// Unit-Frobenius symmetric traceless tensor with isotropic Gaussian law.
pub fn random_direction<R: Rng>(rng: &mut R) -> QTensor {
    let mut c = [0.0; 5];
    for x in c.iter_mut() {
        *x = StandardNormal.sample(rng);
    }
    let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    c.iter_mut().for_each(|x| *x /= n);
    QTensor::from_coords5(&c)
}

/// Physical tensor `R diag(λ) Rᵀ` with `λ` from [`sample_spectrum`].
pub fn sample_q<R: Rng>(rng: &mut R, margin: f64) -> QTensor {
    let s = sample_spectrum(rng, margin);
    let r = random_rotation(rng);
    QTensor::from_frame(&r, &s.lambda)
}

/// Unit vector in the zero-sum plane at a uniform angle.
pub fn random_x_direction<R: Rng>(rng: &mut R) -> [f64; 3] {
    let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    crate::partition::from_x_coords(&[t.cos(), t.sin()])
}

/// [`random_x_direction`] redrawn until its two largest components differ
/// by at least `min_gap`.
pub fn random_separated_direction<R: Rng>(rng: &mut R, min_gap: f64) -> [f64; 3] {
    assert!(min_gap < 1.2, "no unit zero-sum vector has a top gap of {min_gap}");
    loop {
        let g = random_x_direction(rng);
        let mut s = g;
        s.sort_by(|a, b| b.total_cmp(a));
        if s[0] - s[1] >= min_gap {
            return g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectra_respect_margin() {
        for i in 0..200 {
            let mut rng = sample_rng(3, i);
            let s = sample_spectrum(&mut rng, 0.02);
            assert!(s.margin() >= 0.02 - 1e-15);
            assert!(s.lambda.iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = sample_q(&mut sample_rng(42, 7), 0.02);
        let b = sample_q(&mut sample_rng(42, 7), 0.02);
        let c = sample_q(&mut sample_rng(42, 8), 0.02);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn directions_are_unit_traceless() {
        let mut rng = sample_rng(1, 0);
        for _ in 0..20 {
            let v = random_direction(&mut rng);
            assert!((v.norm() - 1.0).abs() < 1e-14);
            assert!(v.trace().abs() < 1e-15);
        }
        let r = random_rotation(&mut rng);
        assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-14);
        assert!((r.determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn separated_directions_have_the_gap() {
        let mut rng = sample_rng(2, 0);
        for _ in 0..50 {
            let g = random_separated_direction(&mut rng, 0.15);
            let mut s = g;
            s.sort_by(|a, b| b.total_cmp(a));
            assert!(s[0] - s[1] >= 0.15);
            assert!((g.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(g.iter().sum::<f64>().abs() < 1e-15);
        }
    }
}
