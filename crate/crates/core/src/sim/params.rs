//! Material laws and their admissibility conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Temperature-dependent viscosity `μ(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Viscosity {
    /// `μ = base + amplitude θ²/(1 + θ²)`.
    Rational { base: f64, amplitude: f64 },
    Constant { value: f64 },
    /// Piecewise linear through `(theta[i], mu[i])`, constant outside.
    Tabulated { theta: Vec<f64>, mu: Vec<f64> },
}

impl Default for Viscosity {
    fn default() -> Self {
        Viscosity::Rational {
            base: 1.0,
            amplitude: 0.5,
        }
    }
}

impl Viscosity {
    pub fn eval(&self, theta: f64) -> f64 {
        match self {
            Viscosity::Rational { base, amplitude } => {
                let t2 = theta * theta;
                base + amplitude * t2 / (1.0 + t2)
            }
            Viscosity::Constant { value } => *value,
            Viscosity::Tabulated { theta: t, mu } => {
                if theta <= t[0] {
                    return mu[0];
                }
                let last = t.len() - 1;
                if theta >= t[last] {
                    return mu[last];
                }
                let i = t.partition_point(|&x| x <= theta) - 1;
                let s = (theta - t[i]) / (t[i + 1] - t[i]);
                mu[i] + s * (mu[i + 1] - mu[i])
            }
        }
    }

    /// Declared bounds `(μ̲, μ̄)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Viscosity::Rational { base, amplitude } => {
                (base + amplitude.min(0.0), base + amplitude.max(0.0))
            }
            Viscosity::Constant { value } => (*value, *value),
            Viscosity::Tabulated { mu, .. } => (
                mu.iter().cloned().fold(f64::INFINITY, f64::min),
                mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Viscosity::Tabulated { theta, mu } = self {
            if theta.len() < 2 || theta.len() != mu.len() {
                return Err(Error::Config(
                    "h11 violated: tabulated viscosity needs at least two (theta, mu) pairs of equal length"
                        .into(),
                ));
            }
            if theta.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Config(
                    "h11 violated: tabulated viscosity temperatures must increase strictly".into(),
                ));
            }
        }
        let (lo, hi) = self.bounds();
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0) {
            return Err(Error::Config(format!(
                "h11 violated: lower viscosity bound {lo} must be positive and finite"
            )));
        }
        for j in -30..=30 {
            let th = 10f64.powf(j as f64 / 10.0);
            let v = self.eval(th);
            if !(v >= lo && v <= hi) {
                return Err(Error::Config(format!(
                    "h11 violated: mu({th:.3e}) = {v} outside declared bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Coefficients of the non-isothermal system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Stretching parameter `ξ`.
    pub xi: f64,
    /// Bulk coefficient `λ ≥ 0` in `H = ΔQ − θ L[∂f/∂Q] + λQ`.
    pub lambda_bulk: f64,
    /// Specific heat law `e_θ = θ + a(m−1)θ^m`.
    pub a: f64,
    pub m: f64,
    /// Conductivity `κ = A0 + Ak θ^k + A_minus2 θ^{−2}`.
    #[serde(rename = "A0")]
    pub a0: f64,
    #[serde(rename = "Ak")]
    pub ak: f64,
    pub k: f64,
    #[serde(rename = "A_minus2")]
    pub a_minus2: f64,
    /// `Γ(θ) = Γ0 + Γ1 θ`.
    #[serde(rename = "Gamma0")]
    pub gamma0: f64,
    #[serde(rename = "Gamma1")]
    pub gamma1: f64,
    pub viscosity: Viscosity,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            xi: 0.5,
            lambda_bulk: 1.0,
            a: 1.0,
            m: 2.0,
            a0: 1.0,
            ak: 1.0,
            k: 8.0,
            a_minus2: 0.0,
            gamma0: 1.0,
            gamma1: 1.0,
            viscosity: Viscosity::default(),
        }
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite, got {v}")))
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("xi", self.xi),
            ("lambda_bulk", self.lambda_bulk),
            ("a", self.a),
            ("m", self.m),
            ("A0", self.a0),
            ("Ak", self.ak),
            ("k", self.k),
            ("A_minus2", self.a_minus2),
            ("Gamma0", self.gamma0),
            ("Gamma1", self.gamma1),
        ] {
            finite(name, v)?;
        }
        if !(self.k > 0.0 && self.m > 0.0) {
            return Err(Error::Config(format!(
                "defiA violated: exponents must be positive, got k = {}, m = {}",
                self.k, self.m
            )));
        }
        if !(self.m > 1.5) {
            return Err(Error::Config(format!("defiA violated: m = {} ≤ 3/2", self.m)));
        }
        let big_a = (3.0 * self.k + 2.0 * self.m) / 3.0;
        if !(big_a > 9.0) {
            return Err(Error::Config(format!(
                "defiA violated: (3k+2m)/3 = {big_a:.4} ≤ 9"
            )));
        }
        let upper = 1.2 * self.k;
        if !(self.m <= upper) {
            return Err(Error::Config(format!(
                "defiA violated: m = {} > 6k/5 = {upper:.4}",
                self.m
            )));
        }
        if !(self.a > 0.0) {
            return Err(Error::Config(format!("defie violated: a = {} must be > 0", self.a)));
        }
        if !(self.a0 > 0.0 && self.ak > 0.0) {
            return Err(Error::Config(format!(
                "h12 violated: A0 = {}, Ak = {} must both be > 0",
                self.a0, self.ak
            )));
        }
        if self.a_minus2 < 0.0 {
            return Err(Error::Config(format!(
                "h12s violated: A_minus2 = {} must be ≥ 0",
                self.a_minus2
            )));
        }
        if !(self.gamma0 > 0.0 && self.gamma1 > 0.0) {
            return Err(Error::Config(format!(
                "h13 violated: Gamma0 = {}, Gamma1 = {} must both be > 0",
                self.gamma0, self.gamma1
            )));
        }
        if self.lambda_bulk < 0.0 {
            return Err(Error::Config(format!(
                "i20 violated: lambda = {} must be ≥ 0",
                self.lambda_bulk
            )));
        }
        self.viscosity.validate()
    }

    pub fn singular_flux(&self) -> bool {
        self.a_minus2 > 0.0
    }

    pub fn exponent_a(&self) -> f64 {
        (3.0 * self.k + 2.0 * self.m) / 3.0
    }

    pub fn mu(&self, theta: f64) -> f64 {
        self.viscosity.eval(theta)
    }

    pub fn mu_lower(&self) -> f64 {
        self.viscosity.bounds().0
    }

    pub fn kappa(&self, theta: f64) -> f64 {
        let mut v = self.a0 + self.ak * theta.powf(self.k);
        if self.a_minus2 > 0.0 {
            v += self.a_minus2 / (theta * theta);
        }
        v
    }

    /// `H(θ) = A0 log θ + (Ak/k) θ^k − (A_minus2/2) θ^{−2}`, so `H' = κ/θ`.
    pub fn heat_potential(&self, theta: f64) -> f64 {
        self.a0 * theta.ln() + self.ak / self.k * theta.powf(self.k)
            - 0.5 * self.a_minus2 / (theta * theta)
    }

    pub fn gamma(&self, theta: f64) -> f64 {
        self.gamma0 + self.gamma1 * theta
    }

    /// Thermal part of the internal energy, `θ + a(m−1)θ^m`.
    pub fn thermal_energy(&self, theta: f64) -> f64 {
        theta + self.a * (self.m - 1.0) * theta.powf(self.m)
    }

    /// `∂_θ` of [`Self::thermal_energy`], `1 + a m(m−1)θ^{m−1}`.
    pub fn c_eff(&self, theta: f64) -> f64 {
        1.0 + self.a * self.m * (self.m - 1.0) * theta.powf(self.m - 1.0)
    }

    /// Thermal part of the entropy, `1 + log θ + m a θ^{m−1}`.
    pub fn thermal_entropy(&self, theta: f64) -> f64 {
        1.0 + theta.ln() + self.m * self.a * theta.powf(self.m - 1.0)
    }
}
