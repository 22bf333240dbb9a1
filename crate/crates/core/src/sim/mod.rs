//! Pseudo-spectral solver for the non-isothermal Q-tensor flow on the
//! periodic torus `[−π, π)³`, with energy and entropy audits.

pub mod algebra;
pub mod diagnostics;
pub mod grid;
pub mod model;
pub mod params;
pub mod state;

pub use algebra::{compute_s, coupling_stress, mat_identity_residual, mat_identity_sides, strain_and_vorticity, stress};
pub use diagnostics::{entropy_local_audit, AuditAccumulator, BalanceTracker, DiagnosticsRecord, HistorySample, TestFunction, TrigMode};
pub use grid::{pairwise_sum, Grid, Spectral};
pub use model::{
    Kinematics, PotentialField, SpectralModel, StepOutcome, MAX_STEP_HALVINGS, SAFETY_MARGIN, SIM_QUADRATURE,
};
pub use params::{ModelParams, Viscosity};
pub use state::{FieldState, InitSpec};

use crate::error::Result;

/// Owner of an evolving state, its cached potential and the running balances.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub model: SpectralModel,
    pub state: FieldState,
    potential: PotentialField,
    tracker: BalanceTracker,
    steps: usize,
    halvings: usize,
    /// Largest step allowed regardless of the CFL bound.
    pub dt_max: f64,
    history: Option<Vec<HistorySample>>,
    audit: Option<AuditAccumulator>,
    pub records: Vec<DiagnosticsRecord>,
}

impl Simulator {
    /// Records the initial sample; when `keep_history` is set, pointwise
    /// entropy data is stored at every sample for the local audit.
    pub fn new(model: SpectralModel, state: FieldState, dt_max: f64, keep_history: bool) -> Result<Self> {
        Self::build(model, state, dt_max, keep_history, None)
    }

    /// Feeds every sample to a local entropy audit over `tests` instead of
    /// storing the history. Requires singular-flux parameters.
    pub fn new_audited(model: SpectralModel, state: FieldState, dt_max: f64, tests: Vec<TestFunction>) -> Result<Self> {
        let acc = AuditAccumulator::new(&model.grid, model.params.singular_flux(), tests)?;
        Self::build(model, state, dt_max, false, Some(acc))
    }

    fn build(
        model: SpectralModel,
        state: FieldState,
        dt_max: f64,
        keep_history: bool,
        audit: Option<AuditAccumulator>,
    ) -> Result<Self> {
        if !(dt_max > 0.0) {
            return Err(crate::error::Error::InvalidArgument(format!("dt_max must be positive, got {dt_max}")));
        }
        let potential = model.evaluate_potential(&state.q, None)?;
        let mut sim = Self {
            model,
            state,
            potential,
            tracker: BalanceTracker::new(),
            steps: 0,
            halvings: 0,
            dt_max,
            history: keep_history.then(Vec::new),
            audit,
            records: Vec::new(),
        };
        sim.sample()?;
        Ok(sim)
    }

    pub fn potential(&self) -> &PotentialField {
        &self.potential
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Total step halvings so far.
    pub fn halvings(&self) -> usize {
        self.halvings
    }

    pub fn history(&self) -> Option<&[HistorySample]> {
        self.history.as_deref()
    }

    /// Local audit values so far, one per test function.
    pub fn audit_values(&self) -> Option<Result<Vec<f64>>> {
        self.audit.as_ref().map(|a| a.values())
    }

    /// Computes, balances and stores a record of the current state.
    pub fn sample(&mut self) -> Result<DiagnosticsRecord> {
        let (mut rec, hist) = self.model.diagnostics(&self.state, &self.potential, self.steps);
        self.tracker.update(&mut rec);
        if let Some(a) = self.audit.as_mut() {
            a.push(&hist)?;
        }
        if let Some(h) = self.history.as_mut() {
            h.push(hist);
        }
        self.records.push(rec.clone());
        Ok(rec)
    }

    /// Largest step the CFL bound and `dt_max` allow at the current state.
    pub fn dt_cap(&self) -> f64 {
        self.model.cfl_dt(&self.state, &self.potential).min(self.dt_max)
    }

    /// One step of size at most `dt`.
    pub fn advance(&mut self, dt: f64) -> Result<f64> {
        let out = self.model.step_with(&self.state, &self.potential, dt)?;
        self.state = out.state;
        self.potential = out.potential;
        self.steps += 1;
        self.halvings += out.halvings;
        Ok(out.dt)
    }

    /// Advances to `t_end` with uniform steps re-planned after every step,
    /// sampling every `cadence` steps and at `t_end`. `on_sample` sees every
    /// new record.
    pub fn run_until<F: FnMut(&DiagnosticsRecord) -> Result<()>>(
        &mut self,
        t_end: f64,
        cadence: usize,
        mut on_sample: F,
    ) -> Result<()> {
        let cadence = cadence.max(1);
        let mut since = 0;
        while t_end - self.state.time > 1e-12 * t_end.abs().max(1.0) {
            let remaining = t_end - self.state.time;
            let n = (remaining / self.dt_cap() - 1e-9).ceil().max(1.0);
            let taken = self.advance(remaining / n)?;
            if taken < remaining / n {
                log::info!("step halved to {taken:.3e} at t = {}", self.state.time);
            }
            since += 1;
            let done = t_end - self.state.time <= 1e-12 * t_end.abs().max(1.0);
            if since == cadence || done {
                since = 0;
                let rec = self.sample()?;
                on_sample(&rec)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn streaming_audit_matches_stored_history() {
        let params = ModelParams {
            a_minus2: 1.0,
            ..Default::default()
        };
        let model = SpectralModel::with_default_quadrature(8, params).unwrap();
        let s = FieldState::random(&model.grid, &InitSpec::default(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tests: Vec<TestFunction> = (0..3).map(|_| TestFunction::random(&mut rng, 0.02)).collect();
        let mut a = Simulator::new_audited(model.clone(), s.clone(), 2e-3, tests.clone()).unwrap();
        let mut b = Simulator::new(model, s, 2e-3, true).unwrap();
        a.run_until(0.02, 1, |_| Ok(())).unwrap();
        b.run_until(0.02, 1, |_| Ok(())).unwrap();
        assert_eq!(a.records, b.records);
        let va = a.audit_values().unwrap().unwrap();
        for (t, v) in tests.iter().zip(va) {
            let w = entropy_local_audit(b.history().unwrap(), &b.model.grid, true, t).unwrap();
            assert_eq!(v, w);
        }
        assert!(b.audit_values().is_none());
    }

    #[test]
    fn run_until_lands_on_the_end_time() {
        let model = SpectralModel::with_default_quadrature(4, ModelParams::default()).unwrap();
        let s = FieldState::random(&model.grid, &InitSpec { band: 1, ..Default::default() }, 2).unwrap();
        let mut sim = Simulator::new(model.clone(), s.clone(), 3e-3, false).unwrap();
        let mut seen = 0;
        sim.run_until(0.01, 2, |_| {
            seen += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(sim.steps(), 4);
        assert_eq!(seen, 2);
        assert!((sim.state.time - 0.01).abs() < 1e-15);
        assert!(Simulator::new_audited(model.clone(), s.clone(), 1e-3, vec![]).is_err());
        assert!(Simulator::new(model, s, 0.0, false).is_err());
    }
}
