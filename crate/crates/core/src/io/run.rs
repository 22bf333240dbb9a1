//! Mode runners. Each writes its artifacts under the output directory and
//! a `summary.json` with every check; outputs depend only on the
//! configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::checkpoint;
use super::config::{AnalysisCheck, Initial, Mode, QuadratureConfig, RunConfig};
use crate::analysis::{
    asymptotic_iij, case2_f_alpha, case2_majorant, check_ftest1_sweep, check_h_concavity,
    check_laplace_coefficients, plateau_check, potential_suite, sampling, write_ndjson, FtestSweep,
    VerificationReport,
};
use crate::error::{Error, Result};
use crate::partition::SphereQuadrature;
use crate::potential::{boundary_blowup, BallMajumdar, PotentialEval, Spectrum};
use crate::sim::{DiagnosticsRecord, FieldState, Simulator, SpectralModel, TestFunction};

/// Required coefficient of determination of the boundary blow-up fit.
pub const BLOWUP_R2: f64 = 0.999;
/// Distances from the boundary used for the blow-up fit.
pub const BLOWUP_DELTAS: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];
/// Sphere rule that resolves the potential at `δ = 1e-5`.
pub const BLOWUP_QUADRATURE: (usize, usize) = (2048, 16);
pub const DIVERGENCE_TOL: f64 = 1e-10;
pub const MAT_IDENTITY_TOL: f64 = 1e-12;
/// Agreement of the constant test function with the integrated balance.
pub const CONSTANT_AUDIT_TOL: f64 = 1e-10;
/// Floor added to the refinement tolerance of the local audit.
pub const AUDIT_FLOOR: f64 = 1e-12;
/// `f(α)` at small `α` must stay below this.
pub const CASE2_SMALL_ALPHA: (f64, f64) = (0.01, 1e-3);

/// Overall result of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<VerificationReport>,
    /// Files written, relative to the output directory.
    pub artifacts: Vec<PathBuf>,
}

/// Sizes the global rayon pool; `None` keeps the default.
pub fn configure_threads(threads: Option<usize>) -> Result<()> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}"))),
        None => Ok(()),
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut out = Output {
        dir: cfg.out_dir.clone(),
        artifacts: Vec::new(),
    };
    let checks = match cfg.mode {
        Mode::PotentialEval => potential_eval(cfg, &mut out)?,
        Mode::PotentialVerify => potential_verify(cfg, &mut out)?,
        Mode::Analysis => analysis(cfg, &mut out)?,
        Mode::Simulate => simulate(cfg, &mut out)?,
    };
    let mut summary = RunSummary {
        mode: cfg.mode,
        seed: cfg.seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
        artifacts: Vec::new(),
    };
    out.artifacts.push(PathBuf::from("summary.json"));
    summary.artifacts = out.artifacts.clone();
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(cfg.out_dir.join("summary.json"), text + "\n")?;
    Ok(summary)
}

struct Output {
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
}

impl Output {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.artifacts.push(PathBuf::from(name));
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(PathBuf::from(name));
        self.dir.join(name)
    }

    fn reports(&mut self, name: &str, reports: &[VerificationReport]) -> Result<()> {
        let mut w = self.create(name)?;
        write_ndjson(&mut w, reports)?;
        w.flush()?;
        Ok(())
    }
}

fn evaluator(q: &QuadratureConfig) -> Result<BallMajumdar> {
    Ok(BallMajumdar::new(SphereQuadrature::new(q.polar, q.azimuthal)?, q.tol))
}

/// Spectra of the barycentric triangle with `points` nodes per edge, held
/// `margin` away from the boundary:
/// `λ = margin + (1 − 3 margin) b − 1/3` for barycentric `b`.
pub fn barycentric_grid(points: usize, margin: f64) -> Vec<Spectrum> {
    let n = points.max(2) - 1;
    let mut out = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for i in 0..=n {
        for j in 0..=n - i {
            let b = [i, j, n - i - j].map(|c| c as f64 / n as f64);
            out.push(Spectrum {
                lambda: b.map(|x| margin + (1.0 - 3.0 * margin) * x - 1.0 / 3.0),
            });
        }
    }
    out
}

/// Potential data at every grid spectrum, in grid order.
pub fn tabulate_potential(bm: &BallMajumdar, spectra: &[Spectrum]) -> Result<Vec<PotentialEval>> {
    spectra.par_iter().map(|s| bm.fbm_eval(s)).collect()
}

pub const TABLE_HEADER: &str =
    "lambda1,lambda2,lambda3,f,mu1,mu2,mu3,hess11,hess12,hess13,hess22,hess23,hess33,newton_iters";

fn potential_eval(cfg: &RunConfig, out: &mut Output) -> Result<Vec<VerificationReport>> {
    let bm = evaluator(&cfg.quadrature)?;
    let spectra = barycentric_grid(cfg.potential.grid_points, cfg.potential.margin);
    let evals = tabulate_potential(&bm, &spectra)?;
    let mut w = out.create("potential.csv")?;
    writeln!(w, "{TABLE_HEADER}")?;
    let mut worst = 0.0f64;
    for (s, e) in spectra.iter().zip(&evals) {
        let h = e.hess;
        let mu = e.mu.as_array();
        let row = [
            s.lambda[0], s.lambda[1], s.lambda[2], e.value, mu[0], mu[1], mu[2], h[0][0], h[0][1], h[0][2],
            h[1][1], h[1][2], h[2][2],
        ];
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{},{}", line.join(","), e.newton_iters)?;
        worst = worst.max(e.residual);
    }
    w.flush()?;
    Ok(vec![VerificationReport {
        check_name: "tabulation".into(),
        samples: evals.len(),
        worst_value: worst,
        witness: json!({ "grid_points": cfg.potential.grid_points, "margin": cfg.potential.margin }),
        passed: evals.iter().all(|e| e.value.is_finite()) && worst <= cfg.quadrature.tol.max(1e-10),
        tolerance: cfg.quadrature.tol.max(1e-10),
    }])
}

/// Fit of `f` against `|ln δ|` along the uniaxial ray to the boundary.
pub fn blowup_report() -> Result<VerificationReport> {
    let bm = BallMajumdar::new(
        SphereQuadrature::new(BLOWUP_QUADRATURE.0, BLOWUP_QUADRATURE.1)?,
        crate::potential::DEFAULT_TOL,
    );
    let fit = boundary_blowup(&bm, &BLOWUP_DELTAS)?;
    let increasing = fit.values.windows(2).all(|w| w[1] > w[0]);
    Ok(VerificationReport {
        check_name: "boundary_blowup".into(),
        samples: fit.deltas.len(),
        worst_value: fit.r_squared,
        passed: increasing && fit.slope > 0.0 && fit.r_squared > BLOWUP_R2,
        witness: serde_json::to_value(&fit).map_err(|e| Error::Io(e.to_string()))?,
        tolerance: BLOWUP_R2,
    })
}

fn potential_verify(cfg: &RunConfig, out: &mut Output) -> Result<Vec<VerificationReport>> {
    let bm = evaluator(&cfg.quadrature)?;
    let p = &cfg.potential;
    let mut reports = potential_suite(&bm, p.verify_samples, p.verify_margin, cfg.seed)?;
    reports.push(blowup_report()?);
    out.reports("potential_verify.ndjson", &reports)?;
    Ok(reports)
}

/// `ε̂/2` concavity check at each margin of a sweep.
pub fn concavity_reports(bm: &BallMajumdar, sweep: &FtestSweep, n: usize, seed: u64) -> Result<Vec<VerificationReport>> {
    sweep
        .margins
        .iter()
        .zip(&sweep.cumulative)
        .map(|(&m, &eps)| {
            if !(eps > 0.0 && eps.is_finite()) {
                return Ok(VerificationReport {
                    check_name: "h_concavity".into(),
                    samples: 0,
                    worst_value: f64::NAN,
                    witness: json!({ "margin": m, "epsilon_hat": eps }),
                    passed: false,
                    tolerance: 0.0,
                });
            }
            check_h_concavity(bm, 0.5 * eps, n, m, seed)
        })
        .collect()
}

/// `ρ = 1, 2, 4, …, 1024`.
pub fn plateau_rho_grid() -> Vec<f64> {
    (0..=10).map(|j| 2f64.powi(j)).collect()
}

/// Plateau and decay-rate checks along `count` random well-separated
/// directions, direction `d` drawn from stream `d` of `seed`.
pub fn laplace_reports(count: usize, min_gap: f64, seed: u64) -> Result<Vec<VerificationReport>> {
    let quad = SphereQuadrature::new(
        crate::analysis::laplace::LAPLACE_POLAR_ORDER,
        crate::analysis::laplace::LAPLACE_AZIMUTHAL_ORDER,
    )?;
    let rho = plateau_rho_grid();
    (0..count)
        .into_par_iter()
        .map(|d| {
            let gamma = sampling::random_separated_direction(&mut sampling::sample_rng(seed, d as u64), min_gap);
            let table = asymptotic_iij(&gamma, &rho, &quad)?;
            let plateau = plateau_check(&table);
            let rates = check_laplace_coefficients(&gamma)?;
            let worst = plateau.last_changes.iter().copied().fold(0.0, f64::max);
            Ok(VerificationReport {
                check_name: "laplace".into(),
                samples: rho.len(),
                worst_value: worst,
                passed: plateau.passed() && rates.passed,
                witness: json!({
                    "direction": d,
                    "gamma": gamma,
                    "plateau": plateau,
                    "den_slope": rates.den_slope,
                    "num_slope": rates.num_slope,
                    "ratio_slope": rates.ratio_slope,
                }),
                tolerance: crate::analysis::laplace::PLATEAU_TOL,
            })
        })
        .collect()
}

/// `max f(α)/majorant` over `α = 1, …, alpha_max`, plus `f(0.01)`.
pub fn case2_report(k: u32, alpha_max: usize, order: usize) -> Result<VerificationReport> {
    let alphas: Vec<f64> = (1..=alpha_max).map(|a| a as f64).collect();
    let values = case2_f_alpha(&alphas, k, order)?;
    let mut worst = (f64::NEG_INFINITY, 0usize);
    for (i, (&a, &v)) in alphas.iter().zip(&values).enumerate() {
        let r = v / case2_majorant(a, k)?.printed;
        if r > worst.0 || r.is_nan() {
            worst = (r, i);
        }
    }
    let (small_alpha, small_limit) = CASE2_SMALL_ALPHA;
    let small = case2_f_alpha(&[small_alpha], k, order)?[0];
    let i = worst.1;
    let maj = case2_majorant(alphas[i], k)?;
    Ok(VerificationReport {
        check_name: format!("case2_k{k}"),
        samples: alphas.len(),
        worst_value: worst.0,
        passed: worst.0 < 1.0 && small < small_limit,
        witness: json!({
            "alpha": alphas[i],
            "value": values[i],
            "majorant": maj,
            "small_alpha": small_alpha,
            "small_alpha_value": small,
        }),
        tolerance: 1.0,
    })
}

fn analysis(cfg: &RunConfig, out: &mut Output) -> Result<Vec<VerificationReport>> {
    let a = &cfg.analysis;
    let bm = evaluator(&cfg.quadrature)?;
    let wants = |c: AnalysisCheck| a.checks.contains(&c);
    let mut reports = Vec::new();
    if wants(AnalysisCheck::Ftest1) || wants(AnalysisCheck::Concavity) {
        let sweep = check_ftest1_sweep(&bm, a.ftest_samples, &a.margins, cfg.seed)?;
        if wants(AnalysisCheck::Ftest1) {
            for (r, cum) in sweep.reports.iter().zip(&sweep.cumulative) {
                let mut r = r.clone();
                r.witness["epsilon_hat"] = json!(cum);
                r.passed = *cum > 0.0 && cum.is_finite();
                reports.push(r);
            }
        }
        if wants(AnalysisCheck::Concavity) {
            reports.extend(concavity_reports(&bm, &sweep, a.ftest_samples, cfg.seed)?);
        }
    }
    if wants(AnalysisCheck::Laplace) {
        reports.extend(laplace_reports(a.laplace_directions, a.laplace_min_gap, cfg.seed)?);
    }
    if wants(AnalysisCheck::Case2) {
        for k in [1, 2] {
            reports.push(case2_report(k, a.case2_alpha_max, a.case2_order)?);
        }
    }
    out.reports("analysis.ndjson", &reports)?;
    Ok(reports)
}

/// Test functions of the local entropy audit: `φ ≡ 1` first, then `bumps`
/// random bumps on `[0, t_end]` from stream 3 of `seed`.
pub fn audit_tests(bumps: usize, t_end: f64, seed: u64) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    std::iter::once(TestFunction::constant(1.0))
        .chain((0..bumps).map(|_| TestFunction::random(&mut rng, t_end)))
        .collect()
}

/// Local audit values at `dt` and `dt/2`, for the tests of [`audit_tests`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditStudy {
    pub values: Vec<f64>,
    pub refined: Vec<f64>,
    /// `4 |v(dt) − v(dt/2)|` plus a floor, per bump.
    pub tolerances: Vec<f64>,
    /// Constant test function against the integrated balance.
    pub constant_gap: f64,
    pub passed: bool,
}

impl AuditStudy {
    /// `coarse` and `fine` start with the constant test function.
    pub fn assess(coarse: &[f64], fine: &[f64], balance_lhs: f64) -> Self {
        let values = coarse[1..].to_vec();
        let refined = fine[1..].to_vec();
        let tolerances: Vec<f64> = values
            .iter()
            .zip(&refined)
            .map(|(v, r)| 4.0 * (v - r).abs() + AUDIT_FLOOR)
            .collect();
        let constant_gap = (coarse[0] - balance_lhs).abs();
        let passed = values.iter().zip(&tolerances).all(|(v, t)| v <= t) && constant_gap <= CONSTANT_AUDIT_TOL;
        Self {
            values,
            refined,
            tolerances,
            constant_gap,
            passed,
        }
    }

    pub fn report(&self) -> VerificationReport {
        let worst = self
            .values
            .iter()
            .zip(&self.tolerances)
            .map(|(v, t)| v - t)
            .fold(f64::NEG_INFINITY, f64::max);
        VerificationReport {
            check_name: "local_entropy_audit".into(),
            samples: self.values.len(),
            worst_value: worst,
            witness: serde_json::to_value(self).expect("study serialises"),
            passed: self.passed,
            tolerance: 0.0,
        }
    }
}

fn run_audited(model: &SpectralModel, initial: &FieldState, dt: f64, t_end: f64, tests: &[TestFunction]) -> Result<(Vec<f64>, f64)> {
    let mut sim = Simulator::new_audited(model.clone(), initial.clone(), dt, tests.to_vec())?;
    sim.run_until(t_end, 1, |_| Ok(()))?;
    let values = sim.audit_values().expect("audited simulator")?;
    let lhs = sim.records.last().expect("records").entropy_balance_lhs;
    Ok((values, lhs))
}

/// Runs the audit at `dt` and `dt/2` with every step sampled.
pub fn local_audit_study(
    model: &SpectralModel,
    initial: &FieldState,
    dt: f64,
    t_end: f64,
    bumps: usize,
    seed: u64,
) -> Result<AuditStudy> {
    let tests = audit_tests(bumps, t_end, seed);
    let (coarse, lhs) = run_audited(model, initial, dt, t_end, &tests)?;
    let (fine, _) = run_audited(model, initial, 0.5 * dt, t_end, &tests)?;
    Ok(AuditStudy::assess(&coarse, &fine, lhs))
}

/// Worst value of `metric` over the records against `tol`.
fn record_report(
    name: &str,
    records: &[DiagnosticsRecord],
    tol: f64,
    metric: impl Fn(&DiagnosticsRecord) -> f64,
) -> VerificationReport {
    let mut worst = (f64::NEG_INFINITY, 0usize);
    for (i, r) in records.iter().enumerate() {
        let v = metric(r);
        if v > worst.0 || v.is_nan() {
            worst = (v, i);
        }
    }
    let at = records.get(worst.1);
    VerificationReport {
        check_name: name.into(),
        samples: records.len(),
        worst_value: worst.0,
        witness: json!({ "time": at.map(|r| r.time), "step": at.map(|r| r.step) }),
        passed: !records.is_empty() && worst.0 <= tol,
        tolerance: tol,
    }
}

/// Energy, entropy, dissipation sign, incompressibility and the algebraic
/// identity over a run's records.
pub fn simulation_reports(records: &[DiagnosticsRecord], energy_tol: f64, entropy_tol: f64) -> Vec<VerificationReport> {
    vec![
        record_report("energy_drift", records, energy_tol, |r| r.energy_residual),
        record_report("entropy_balance", records, entropy_tol, |r| r.entropy_balance_lhs),
        record_report("dissipation_sign", records, 0.0, |r| -r.d_visc.min(r.d_h).min(r.d_heat)),
        record_report("divergence", records, DIVERGENCE_TOL, |r| r.div_max),
        record_report("mat_identity", records, MAT_IDENTITY_TOL, |r| r.mat_residual),
    ]
}

fn initial_state(cfg: &RunConfig, model: &SpectralModel) -> Result<FieldState> {
    let s = &cfg.simulation;
    match s.initial {
        Initial::Random => FieldState::random(&model.grid, &s.init, cfg.seed),
        Initial::Equilibrium => FieldState::equilibrium(&model.grid, s.init.theta0),
    }
}

/// Solver for the configured grid, parameters and solver sphere rule.
pub fn build_model(cfg: &RunConfig) -> Result<SpectralModel> {
    let s = &cfg.simulation;
    SpectralModel::new(s.grid_size, cfg.model.clone(), evaluator(&s.quadrature)?)
}

fn write_record(w: &mut impl Write, r: &DiagnosticsRecord) -> Result<()> {
    let line = serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(w, "{line}")?;
    Ok(())
}

fn checkpoint_times(interval: f64, t_end: f64) -> Vec<f64> {
    let mut times = Vec::new();
    if interval > 0.0 {
        let mut k = 1;
        while (k as f64) * interval < t_end * (1.0 - 1e-12) {
            times.push(k as f64 * interval);
            k += 1;
        }
    }
    times.push(t_end);
    times
}

fn simulate(cfg: &RunConfig, out: &mut Output) -> Result<Vec<VerificationReport>> {
    let s = &cfg.simulation;
    let model = build_model(cfg)?;
    let initial = initial_state(cfg, &model)?;
    let tests = audit_tests(s.audit_bumps, s.t_end, cfg.seed);
    let audited = cfg.singular_flux && s.t_end > 0.0;
    let mut sim = if audited {
        Simulator::new_audited(model.clone(), initial.clone(), s.dt, tests.clone())?
    } else {
        Simulator::new(model.clone(), initial.clone(), s.dt, false)?
    };
    let mut diag = out.create("diagnostics.ndjson")?;
    write_record(&mut diag, &sim.records[0])?;
    let times = checkpoint_times(s.checkpoint_interval, s.t_end);
    for (k, &t) in times.iter().enumerate() {
        sim.run_until(t, s.cadence, |r| write_record(&mut diag, r))?;
        let name = if k + 1 == times.len() {
            "final.bmqt".to_string()
        } else {
            format!("checkpoint_{:04}.bmqt", k + 1)
        };
        let path = out.path(&name);
        checkpoint::save(&path, &sim.state, &cfg.model)?;
        log::info!("t = {:.4}: wrote {}", sim.state.time, path.display());
    }
    diag.flush()?;
    let mut reports = simulation_reports(&sim.records, s.energy_tol, s.entropy_tol);
    if audited {
        let coarse = sim.audit_values().expect("audited simulator")?;
        let lhs = sim.records.last().expect("records").entropy_balance_lhs;
        let (fine, _) = run_audited(&model, &initial, 0.5 * s.dt, s.t_end, &tests)?;
        reports.push(AuditStudy::assess(&coarse, &fine, lhs).report());
    }
    Ok(reports)
}

/// Loads a checkpoint written by a run with `cfg`.
pub fn load_checkpoint(cfg: &RunConfig, path: &Path) -> Result<FieldState> {
    checkpoint::load(path, Some(&cfg.model))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barycentric_grid_covers_the_triangle() {
        let g = barycentric_grid(5, 0.02);
        assert_eq!(g.len(), 15);
        for s in &g {
            assert!(s.lambda.iter().sum::<f64>().abs() < 1e-15);
            assert!(s.lambda.iter().all(|&l| l >= -1.0 / 3.0 + 0.02 - 1e-15));
        }
        assert!((g[0].lambda[2] - (2.0 / 3.0 - 0.04)).abs() < 1e-15);
    }

    #[test]
    fn checkpoint_schedule() {
        assert_eq!(checkpoint_times(0.0, 0.5), vec![0.5]);
        assert_eq!(checkpoint_times(0.25, 0.5), vec![0.25, 0.5]);
        assert_eq!(checkpoint_times(0.2, 0.5).len(), 3);
    }

    #[test]
    fn audit_assessment() {
        let st = AuditStudy::assess(&[1.0, -0.5, 1e-3], &[1.0, -0.4, 9e-4], 1.0);
        assert!(!st.passed);
        let st = AuditStudy::assess(&[1.0, -0.5, 1e-3], &[1.0, -0.4, 2e-4], 1.0);
        assert!(st.passed);
        assert!(st.tolerances[1] > 3.2e-3 - 1e-15);
        assert!(!AuditStudy::assess(&[1.0, -0.5], &[1.0, -0.5], 1.1).passed);
        assert_eq!(audit_tests(3, 1.0, 2), audit_tests(3, 1.0, 2));
        assert_eq!(audit_tests(3, 1.0, 2)[0], TestFunction::constant(1.0));
    }

    #[test]
    fn equilibrium_simulation_passes_and_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::default();
        cfg.out_dir = dir.path().to_path_buf();
        cfg.simulation.grid_size = 8;
        cfg.simulation.t_end = 0.02;
        cfg.simulation.checkpoint_interval = 0.01;
        cfg.simulation.initial = Initial::Equilibrium;
        let s = run(&cfg).unwrap();
        assert!(s.passed, "{s:?}");
        for a in ["diagnostics.ndjson", "checkpoint_0001.bmqt", "final.bmqt", "summary.json"] {
            assert!(dir.path().join(a).exists(), "{a}");
        }
        let fin = load_checkpoint(&cfg, &dir.path().join("final.bmqt")).unwrap();
        assert!((fin.time - 0.02).abs() < 1e-15);
        let lines = std::fs::read_to_string(dir.path().join("diagnostics.ndjson")).unwrap();
        assert_eq!(lines.lines().count(), 11);
    }

    #[test]
    fn singular_run_includes_the_local_audit() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::default();
        cfg.out_dir = dir.path().to_path_buf();
        cfg.singular_flux = true;
        cfg.model.a_minus2 = 1.0;
        cfg.simulation.grid_size = 8;
        cfg.simulation.t_end = 0.02;
        let s = run(&cfg).unwrap();
        let audit = s.checks.iter().find(|c| c.check_name == "local_entropy_audit").unwrap();
        assert!(audit.passed, "{audit:?}");
        assert!(s.passed, "{s:?}");
    }

    #[test]
    fn case2_small_grid() {
        let r = case2_report(1, 16, 64).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.worst_value > 0.0 && r.worst_value < 1.0);
    }
}
