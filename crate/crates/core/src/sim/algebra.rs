//! Pointwise tensor algebra of the flow–order-parameter coupling.
//!
//! Velocity gradients follow `G_ij = ∂_j u_i`, so `σ : ∇u = Σ σ_ij ∂_j u_i`
//! and `(div σ)_i = ∂_j σ_ij`.

use nalgebra::Matrix3;

use crate::potential::QTensor;

fn third() -> Matrix3<f64> {
    Matrix3::identity() / 3.0
}

pub fn frob(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    a.component_mul(b).sum()
}

pub fn q_matrix(c: &[f64; 5]) -> Matrix3<f64> {
    QTensor::from_coords5(c).matrix()
}

/// Coordinates of the symmetric traceless part.
pub fn q_coords(m: &Matrix3<f64>) -> [f64; 5] {
    QTensor::from_matrix(m).to_coords5()
}

/// `(ε, ω)` with `ε = ½(G + Gᵀ)` and `ω = ½(G − Gᵀ)`.
pub fn strain_and_vorticity(g: &Matrix3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
    let gt = g.transpose();
    ((g + gt) * 0.5, (g - gt) * 0.5)
}

/// `S = (ξε + ω)(Q + I/3) + (Q + I/3)(ξε − ω) − 2ξ(Q + I/3)(Q : ∇u)`.
pub fn compute_s(g: &Matrix3<f64>, q: &Matrix3<f64>, xi: f64) -> Matrix3<f64> {
    let (eps, omega) = strain_and_vorticity(g);
    let qi = q + third();
    (eps * xi + omega) * qi + qi * (eps * xi - omega) - qi * (2.0 * xi * frob(q, g))
}

/// `2ξ(H:Q)(Q + I/3) − ξ[H(Q + I/3) + (Q + I/3)H] + (QH − HQ)`.
pub fn coupling_stress(h: &Matrix3<f64>, q: &Matrix3<f64>, xi: f64) -> Matrix3<f64> {
    let qi = q + third();
    qi * (2.0 * xi * frob(h, q)) - (h * qi + qi * h) * xi + (q * h - h * q)
}

/// `(∇Q ⊙ ∇Q)_ij = ∂_i Q : ∂_j Q`.
pub fn gradient_product(dq: &[Matrix3<f64>; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| frob(&dq[i], &dq[j]))
}

/// Full stress `μ(∇u + ∇ᵗu) − pI + coupling − ∇Q⊙∇Q`.
pub fn stress(
    g: &Matrix3<f64>,
    q: &Matrix3<f64>,
    h: &Matrix3<f64>,
    dq: &[Matrix3<f64>; 3],
    xi: f64,
    mu: f64,
    p: f64,
) -> Matrix3<f64> {
    (g + g.transpose()) * mu - Matrix3::identity() * p + coupling_stress(h, q, xi)
        - gradient_product(dq)
}

/// Both sides of `−H : S(∇u, Q) = (QH − HQ):∇u + 2ξ(H:Q)(Q:∇u)
/// − ξ[H(Q+I/3) + (Q+I/3)H]:∇u`, i.e. `−H:S` and `coupling_stress : ∇u`.
pub fn mat_identity_sides(g: &Matrix3<f64>, q: &Matrix3<f64>, h: &Matrix3<f64>, xi: f64) -> (f64, f64) {
    let lhs = -frob(h, &compute_s(g, q, xi));
    let qi = q + third();
    let rhs = frob(&(q * h - h * q), g) + 2.0 * xi * frob(h, q) * frob(q, g)
        - xi * frob(&(h * qi + qi * h), g);
    (lhs, rhs)
}

pub fn mat_identity_residual(g: &Matrix3<f64>, q: &Matrix3<f64>, h: &Matrix3<f64>, xi: f64) -> f64 {
    let (l, r) = mat_identity_sides(g, q, h, xi);
    (l - r).abs()
}
