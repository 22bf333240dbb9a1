//! Product quadrature on the unit sphere.
//!
//! Gauss-Legendre in `z = cos θ` times the uniform trapezoid rule in the
//! azimuth. The polar axis is the third coordinate. Because every integrand
//! the partition function sees depends on the node only through the squared
//! coordinates `(p1², p2², p3²)`, the rule is also stored folded onto one
//! octant: nodes that share their squared coordinates are merged and their
//! weights summed. The folded rule reproduces the full sum exactly in exact
//! arithmetic and is eight times cheaper.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

pub const MIN_POLAR_ORDER: usize = 8;
pub const MIN_AZIMUTHAL_ORDER: usize = 16;

/// Default orders for potential evaluation.
pub const DEFAULT_POLAR_ORDER: usize = 32;
pub const DEFAULT_AZIMUTHAL_ORDER: usize = 64;

/// A node of the octant-folded rule: squared coordinates and merged weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldedNode {
    pub sq: [f64; 3],
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    polar_order: usize,
    azimuthal_order: usize,
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
    folded: Vec<FoldedNode>,
}

/// Symmetrized Gauss-Legendre rule on [-1, 1], returned as the nonnegative
/// half: `(x, w)` pairs with `x ≥ 0`, the node at 0 (odd orders) carrying
/// its full weight.
pub(crate) fn legendre_half(order: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("order > 0"));
    let mut pairs: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (*x, *w)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    let mut half = Vec::with_capacity(n / 2 + 1);
    for i in (n / 2)..n {
        let j = n - 1 - i;
        if i == j {
            half.push((0.0, pairs[i].1));
        } else {
            let x = 0.5 * (pairs[i].0 - pairs[j].0);
            let w = 0.5 * (pairs[i].1 + pairs[j].1);
            half.push((x, w));
        }
    }
    half
}

impl SphereQuadrature {
    /// Builds the product rule with `polar_order` Gauss-Legendre nodes in
    /// `cos θ` and `azimuthal_order` equispaced nodes in `φ ∈ [0, 2π)`.
    pub fn new(polar_order: usize, azimuthal_order: usize) -> Result<Self> {
        if polar_order < MIN_POLAR_ORDER || azimuthal_order < MIN_AZIMUTHAL_ORDER {
            return Err(Error::InsufficientResolution(format!(
                "sphere quadrature needs polar_order >= {MIN_POLAR_ORDER} and \
                 azimuthal_order >= {MIN_AZIMUTHAL_ORDER}, got ({polar_order}, {azimuthal_order})"
            )));
        }
        let half = legendre_half(polar_order);
        // full symmetric z rule
        let mut zrule: Vec<(f64, f64)> = Vec::with_capacity(polar_order);
        for &(x, w) in half.iter().rev() {
            if x > 0.0 {
                zrule.push((-x, w));
            }
        }
        zrule.extend(half.iter().copied());

        let dphi = 2.0 * PI / azimuthal_order as f64;
        let trig: Vec<(f64, f64)> = (0..azimuthal_order)
            .map(|j| {
                let phi = dphi * j as f64;
                (phi.cos(), phi.sin())
            })
            .collect();

        let mut nodes = Vec::with_capacity(polar_order * azimuthal_order);
        let mut weights = Vec::with_capacity(polar_order * azimuthal_order);
        for &(z, wz) in &zrule {
            let r = (1.0 - z * z).max(0.0).sqrt();
            for &(c, s) in &trig {
                nodes.push([r * c, r * s, z]);
                weights.push(wz * dphi);
            }
        }

        let folded = Self::fold(&half, azimuthal_order);
        Ok(Self {
            polar_order,
            azimuthal_order,
            nodes,
            weights,
            folded,
        })
    }

    pub fn default_potential() -> Self {
        Self::new(DEFAULT_POLAR_ORDER, DEFAULT_AZIMUTHAL_ORDER).expect("default orders are valid")
    }

    fn fold(half: &[(f64, f64)], azimuthal_order: usize) -> Vec<FoldedNode> {
        let dphi = 2.0 * PI / azimuthal_order as f64;
        // azimuthal classes: (cos², sin², multiplicity)
        let mut phi_classes: Vec<(f64, f64, f64)> = Vec::new();
        if azimuthal_order % 4 == 0 {
            let quarter = azimuthal_order / 4;
            for j in 0..=quarter {
                let phi = dphi * j as f64;
                let (c2, s2) = if j == 0 {
                    (1.0, 0.0)
                } else if j == quarter {
                    (0.0, 1.0)
                } else {
                    (phi.cos().powi(2), phi.sin().powi(2))
                };
                let mult = if j == 0 || j == quarter { 2.0 } else { 4.0 };
                phi_classes.push((c2, s2, mult));
            }
        } else {
            for j in 0..azimuthal_order {
                let phi = dphi * j as f64;
                phi_classes.push((phi.cos().powi(2), phi.sin().powi(2), 1.0));
            }
        }
        let mut folded = Vec::with_capacity(half.len() * phi_classes.len());
        for &(z, wz) in half {
            let zmult = if z > 0.0 { 2.0 } else { 1.0 };
            let z2 = z * z;
            let r2 = 1.0 - z2;
            for &(c2, s2, mult) in &phi_classes {
                folded.push(FoldedNode {
                    sq: [r2 * c2, r2 * s2, z2],
                    weight: wz * dphi * zmult * mult,
                });
            }
        }
        folded
    }

    /// Same rule with the polar axis moved to coordinate `pole` (0, 1 or 2).
    /// The remaining two coordinates keep their relative order.
    pub fn with_pole(&self, pole: usize) -> Self {
        assert!(pole < 3, "pole axis must be 0, 1 or 2");
        let map = |v: [f64; 3]| -> [f64; 3] {
            match pole {
                0 => [v[2], v[0], v[1]],
                1 => [v[0], v[2], v[1]],
                _ => v,
            }
        };
        Self {
            polar_order: self.polar_order,
            azimuthal_order: self.azimuthal_order,
            nodes: self.nodes.iter().map(|&p| map(p)).collect(),
            weights: self.weights.clone(),
            folded: self
                .folded
                .iter()
                .map(|n| FoldedNode {
                    sq: map(n.sq),
                    weight: n.weight,
                })
                .collect(),
        }
    }

    pub fn polar_order(&self) -> usize {
        self.polar_order
    }

    pub fn azimuthal_order(&self) -> usize {
        self.azimuthal_order
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn folded(&self) -> &[FoldedNode] {
        &self.folded
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the full (unfolded) rule to `g`.
    pub fn integrate<F: FnMut(&[f64; 3]) -> f64>(&self, mut g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * g(p))
            .sum()
    }

    /// Highest total polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        (2 * self.polar_order - 1).min(self.azimuthal_order - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ∫_{S²} p1^{2a} p2^{2b} p3^{2c} dp = 2 Γ(a+½)Γ(b+½)Γ(c+½) / Γ(a+b+c+3/2).
    fn sphere_moment(a: u32, b: u32, c: u32) -> f64 {
        // Γ(n + ½) = (2n)! √π / (4ⁿ n!)
        fn gamma_half(n: u32) -> f64 {
            let mut v = PI.sqrt();
            for k in 0..n {
                v *= k as f64 + 0.5;
            }
            v
        }
        let n = a + b + c + 1;
        2.0 * gamma_half(a) * gamma_half(b) * gamma_half(c) / gamma_half(n)
    }

    #[test]
    fn rejects_low_orders() {
        assert!(matches!(
            SphereQuadrature::new(7, 16),
            Err(Error::InsufficientResolution(_))
        ));
        assert!(SphereQuadrature::new(8, 15).is_err());
    }

    #[test]
    fn minimal_rule_shape_and_measure() {
        let q = SphereQuadrature::new(8, 16).unwrap();
        assert_eq!(q.len(), 128);
        let total: f64 = q.weights().iter().sum();
        assert!((total - 4.0 * PI).abs() < 1e-12);
        assert!(q.weights().iter().all(|&w| w > 0.0));
        for p in q.nodes() {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((r - 1.0).abs() < 1e-14);
        }
        let m2 = q.integrate(|p| p[0] * p[0]);
        assert!((m2 - 4.0 * PI / 3.0).abs() < 1e-12);
        let m4 = q.integrate(|p| p[0].powi(4));
        assert!((m4 - 4.0 * PI / 5.0).abs() < 1e-12);
    }

    #[test]
    fn even_moments_exact_to_degree() {
        let q = SphereQuadrature::new(12, 24).unwrap();
        let deg = q.exact_degree() as u32;
        for a in 0..=6u32 {
            for b in 0..=6u32 {
                for c in 0..=6u32 {
                    if 2 * (a + b + c) > deg {
                        continue;
                    }
                    let exact = sphere_moment(a, b, c);
                    let num = q.integrate(|p| {
                        p[0].powi(2 * a as i32) * p[1].powi(2 * b as i32) * p[2].powi(2 * c as i32)
                    });
                    assert!(
                        (num - exact).abs() < 1e-12 * exact.max(1.0),
                        "moment ({a},{b},{c}): {num} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn folded_rule_matches_full_rule() {
        for (np, na) in [(8, 16), (9, 18), (16, 32), (33, 64)] {
            let q = SphereQuadrature::new(np, na).unwrap();
            let g = |s: [f64; 3]| (1.7 * s[0] - 0.4 * s[1] - 1.3 * s[2]).exp() * (1.0 + s[2]);
            let full = q.integrate(|p| g([p[0] * p[0], p[1] * p[1], p[2] * p[2]]));
            let folded: f64 = q.folded().iter().map(|n| n.weight * g(n.sq)).sum();
            assert!((full - folded).abs() < 1e-13 * full, "({np},{na})");
            let wsum: f64 = q.folded().iter().map(|n| n.weight).sum();
            assert!((wsum - 4.0 * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn pole_relabeling_permutes_coordinates() {
        let q = SphereQuadrature::new(10, 20).unwrap();
        let q0 = q.with_pole(0);
        let a = q.integrate(|p| p[2].powi(4) * p[0].powi(2));
        let b = q0.integrate(|p| p[0].powi(4) * p[1].powi(2));
        assert!((a - b).abs() < 1e-14);
    }
}
