//! TOML run configuration with documented defaults and strict keys.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{InitSpec, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    PotentialEval,
    PotentialVerify,
    Analysis,
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisCheck {
    Ftest1,
    Concavity,
    Laplace,
    Case2,
}

impl AnalysisCheck {
    pub const ALL: [AnalysisCheck; 4] = [Self::Ftest1, Self::Concavity, Self::Laplace, Self::Case2];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initial {
    Random,
    Equilibrium,
}

/// Product sphere rule and Newton tolerance of the potential solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub polar: usize,
    pub azimuthal: usize,
    pub tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            polar: 32,
            azimuthal: 64,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    /// Points per barycentric edge of the tabulation grid.
    pub grid_points: usize,
    /// Distance of tabulated eigenvalues from the physical boundary.
    pub margin: f64,
    pub verify_samples: usize,
    pub verify_margin: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            grid_points: 50,
            margin: 0.02,
            verify_samples: 200,
            verify_margin: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub checks: Vec<AnalysisCheck>,
    pub ftest_samples: usize,
    pub margins: Vec<f64>,
    pub laplace_directions: usize,
    /// Smallest gap between the two largest components of a random direction.
    pub laplace_min_gap: f64,
    /// Largest `α` of the integer grid `1, …, α_max`.
    pub case2_alpha_max: usize,
    pub case2_order: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            checks: AnalysisCheck::ALL.to_vec(),
            ftest_samples: 10_000,
            margins: vec![0.05, 0.02, 0.01, 0.005],
            laplace_directions: 10,
            laplace_min_gap: 0.15,
            case2_alpha_max: 512,
            case2_order: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub grid_size: usize,
    /// Largest time step; the CFL bound may reduce it.
    pub dt: f64,
    pub t_end: f64,
    /// Diagnostic sample every this many steps.
    pub cadence: usize,
    /// Time between checkpoints; `0` writes only the final state.
    pub checkpoint_interval: f64,
    pub initial: Initial,
    pub init: InitSpec,
    /// Sphere rule used inside the solver.
    pub quadrature: QuadratureConfig,
    /// Random bump test functions for the local entropy audit.
    pub audit_bumps: usize,
    pub energy_tol: f64,
    pub entropy_tol: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            grid_size: 32,
            dt: 2e-3,
            t_end: 0.5,
            cadence: 1,
            checkpoint_interval: 0.0,
            initial: Initial::Random,
            init: InitSpec::default(),
            quadrature: QuadratureConfig {
                polar: crate::sim::SIM_QUADRATURE.0,
                azimuthal: crate::sim::SIM_QUADRATURE.1,
                tol: 1e-12,
            },
            audit_bumps: 5,
            energy_tol: 1e-4,
            entropy_tol: 5e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Selects the conductivity with the `θ^{−2}` term; `A_minus2` defaults
    /// to 1 when this is set and no value is given.
    pub singular_flux: bool,
    pub out_dir: PathBuf,
    pub model: ModelParams,
    pub quadrature: QuadratureConfig,
    pub potential: PotentialConfig,
    pub analysis: AnalysisConfig,
    pub simulation: SimulationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Simulate,
            seed: 7,
            singular_flux: false,
            out_dir: PathBuf::from("out"),
            model: ModelParams::default(),
            quadrature: QuadratureConfig::default(),
            potential: PotentialConfig::default(),
            analysis: AnalysisConfig::default(),
            simulation: SimulationConfig::default(),
        }
    }
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl QuadratureConfig {
    fn validate(&self, what: &str) -> Result<()> {
        require(self.polar >= 8 && self.azimuthal >= 16, || {
            format!("{what}: sphere rule ({}, {}) is below the minimum (8, 16)", self.polar, self.azimuthal)
        })?;
        require(self.tol > 0.0 && self.tol < 1e-3, || format!("{what}: tol = {} must lie in (0, 1e-3)", self.tol))
    }
}

impl RunConfig {
    /// Parses without validating, so command-line overrides can be applied
    /// before [`Self::finalize`].
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Resolves the flux mode and checks every constraint.
    pub fn finalize(&mut self) -> Result<()> {
        if self.singular_flux {
            if self.model.a_minus2 == 0.0 {
                self.model.a_minus2 = 1.0;
            }
        } else if self.model.a_minus2 != 0.0 {
            return Err(Error::Config(format!(
                "h12s: A_minus2 = {} requires singular_flux = true",
                self.model.a_minus2
            )));
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        require(self.singular_flux == self.model.singular_flux(), || {
            "singular_flux must agree with A_minus2 > 0".into()
        })?;
        self.quadrature.validate("quadrature")?;
        let p = &self.potential;
        require(p.grid_points >= 2, || format!("potential.grid_points = {} must be ≥ 2", p.grid_points))?;
        for (name, m) in [("potential.margin", p.margin), ("potential.verify_margin", p.verify_margin)] {
            require(m > 0.0 && m < 1.0 / 3.0, || format!("{name} = {m} must lie in (0, 1/3)"))?;
        }
        let a = &self.analysis;
        require(!a.checks.is_empty(), || "analysis.checks must not be empty".into())?;
        require(a.ftest_samples > 0, || "analysis.ftest_samples must be positive".into())?;
        require(!a.margins.is_empty() && a.margins.iter().all(|&m| m > 0.0 && m < 1.0 / 3.0), || {
            format!("analysis.margins = {:?} must be nonempty and inside (0, 1/3)", a.margins)
        })?;
        require(a.laplace_min_gap > 0.0 && a.laplace_min_gap < 1.2, || {
            format!("analysis.laplace_min_gap = {} must lie in (0, 1.2)", a.laplace_min_gap)
        })?;
        require(a.case2_alpha_max >= 1 && a.case2_order >= 8, || {
            "analysis.case2_alpha_max must be ≥ 1 and analysis.case2_order ≥ 8".into()
        })?;
        let s = &self.simulation;
        require(s.grid_size >= 4 && s.grid_size % 2 == 0, || {
            format!("simulation.grid_size = {} must be even and ≥ 4", s.grid_size)
        })?;
        require(s.dt > 0.0 && s.dt.is_finite(), || format!("simulation.dt = {} must be positive", s.dt))?;
        require(s.t_end >= 0.0 && s.t_end.is_finite(), || format!("simulation.t_end = {} must be ≥ 0", s.t_end))?;
        require(s.cadence >= 1, || "simulation.cadence must be ≥ 1".into())?;
        require(s.checkpoint_interval >= 0.0, || "simulation.checkpoint_interval must be ≥ 0".into())?;
        require(s.energy_tol > 0.0 && s.entropy_tol >= 0.0, || "simulation tolerances must be positive".into())?;
        s.quadrature.validate("simulation.quadrature")
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut c = RunConfig::from_toml_str(text)?;
    c.finalize()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!((c.model.k, c.model.m), (8.0, 2.0));
    }

    #[test]
    fn exponent_violations_are_named() {
        let e = parse_config("[model]\nk = 4.0\nm = 2.0\n").unwrap_err().to_string();
        assert!(e.contains("defiA violated: (3k+2m)/3 = 5.3333 ≤ 9"), "{e}");
        let e = parse_config("[model]\nm = 1.2\n").unwrap_err().to_string();
        assert!(e.contains("defiA violated: m = 1.2 ≤ 3/2"), "{e}");
        let e = parse_config("[model]\nm = 10.0\n").unwrap_err().to_string();
        assert!(e.contains("defiA violated: m = 10 > 6k/5"), "{e}");
    }

    #[test]
    fn unknown_keys_and_syntax_errors_are_rejected() {
        let e = parse_config("[model]\nkk = 8.0\n").unwrap_err().to_string();
        assert!(e.contains("unknown field"), "{e}");
        assert!(parse_config("sead = 3").is_err());
        let e = parse_config("seed = \n").unwrap_err().to_string();
        assert!(e.contains("line 1"), "{e}");
    }

    #[test]
    fn flux_mode_resolution() {
        let c = parse_config("singular_flux = true").unwrap();
        assert_eq!(c.model.a_minus2, 1.0);
        let c = parse_config("singular_flux = true\n[model]\nA_minus2 = 0.5\n").unwrap();
        assert_eq!(c.model.a_minus2, 0.5);
        let e = parse_config("[model]\nA_minus2 = 0.5\n").unwrap_err().to_string();
        assert!(e.contains("h12s"), "{e}");
    }

    #[test]
    fn full_document_round_trips() {
        let mut c = RunConfig::default();
        c.mode = Mode::Analysis;
        c.analysis.checks = vec![AnalysisCheck::Case2];
        c.simulation.initial = Initial::Equilibrium;
        let text = toml::to_string(&c).unwrap();
        assert_eq!(parse_config(&text).unwrap(), c);
        assert!(text.contains("mode = \"analysis\""));
    }

    #[test]
    fn out_of_range_settings() {
        assert!(parse_config("[simulation]\ngrid_size = 7\n").is_err());
        assert!(parse_config("[simulation]\ndt = 0.0\n").is_err());
        assert!(parse_config("[quadrature]\npolar = 4\n").is_err());
        assert!(parse_config("[analysis]\nmargins = []\n").is_err());
        assert!(parse_config("[model.viscosity]\nkind = \"constant\"\nvalue = -1.0\n").is_err());
    }
}
