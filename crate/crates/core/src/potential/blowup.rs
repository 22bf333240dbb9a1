//! Growth of the potential along the uniaxial ray toward the boundary.

use serde::{Deserialize, Serialize};

use super::{BallMajumdar, Spectrum};
use crate::error::{Error, Result};

/// Least-squares fit `f(δ) ≈ slope·|log δ| + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupFit {
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Spectrum `(−1/3 + δ, 1/6 − δ/2, 1/6 − δ/2)`.
pub fn boundary_ray(delta: f64) -> Spectrum {
    Spectrum {
        lambda: [-1.0 / 3.0 + delta, 1.0 / 6.0 - 0.5 * delta, 1.0 / 6.0 - 0.5 * delta],
    }
}

pub fn boundary_blowup(bm: &BallMajumdar, deltas: &[f64]) -> Result<BlowupFit> {
    if deltas.len() < 3 || deltas.iter().any(|d| !(*d > 0.0 && *d < 0.5)) {
        return Err(Error::InvalidArgument(
            "need at least three distances in (0, 1/2)".into(),
        ));
    }
    let values = deltas
        .iter()
        .map(|&d| bm.fbm_eval(&boundary_ray(d)).map(|e| e.value))
        .collect::<Result<Vec<f64>>>()?;
    let x: Vec<f64> = deltas.iter().map(|d| -d.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = values.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&values).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = values.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(BlowupFit {
        deltas: deltas.to_vec(),
        values,
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::SphereQuadrature;

    #[test]
    fn values_grow_logarithmically() {
        let bm = BallMajumdar::new(SphereQuadrature::new(2048, 16).unwrap(), 1e-12);
        let fit = boundary_blowup(&bm, &[1e-2, 1e-3, 1e-4, 1e-5]).unwrap();
        assert!(fit.values.windows(2).all(|w| w[1] > w[0]));
        assert!(fit.r_squared > 0.999, "{fit:?}");
        assert!(fit.slope > 0.0);
        assert!(boundary_blowup(&bm, &[1e-2, 1e-3]).is_err());
        assert!(boundary_blowup(&bm, &[1e-2, 1e-3, 0.0]).is_err());
    }

    #[test]
    fn ray_stays_traceless() {
        for d in [0.3, 1e-3] {
            let l = boundary_ray(d).lambda;
            assert!((l[0] + l[1] + l[2]).abs() < 1e-15);
        }
    }
}
