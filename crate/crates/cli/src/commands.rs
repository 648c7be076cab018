use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;
use serde_json::json;
use ttpce::basis::{build_grouped_basis, build_moment_matrix, factorize, BasisExport, BasisSet, EpsPolicy};
use ttpce::gmm::{GroupLaw, MixtureSpec, ParameterGroups};
use ttpce::indexing::MultiIndexSet;
use ttpce::moments::{moment_table, MomentTable};
use ttpce::sampler::{history_to_csv, run_adaptive, AdaptiveRun, CandidatePool, Oracle, StopReason, Strategy};
use ttpce::sparse::{best_s_term_tail_l1, cosamp, rip_diagnostic, ErrorBoundConstants, RegressionProblem};
use ttpce::surrogate::{count_modes, kde, relative_error, validate, Bandwidth, SparseSurrogate, ValidationReport};

use crate::config::{Command, RunConfig, StrategyChoice};
use crate::error::{CliError, CliResult};
use crate::exchange::FileExchange;
use crate::oracles::{noise_of_norm, Benchmark, OracleName, SYNTHETIC_NOISE_NORM};
use crate::table;

fn log_phase(phase: &str, start: Instant) -> u128 {
    let ms = start.elapsed().as_millis();
    log::info!("phase={phase} elapsed_ms={ms}");
    ms
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(path, text + "\n")
}

fn create_output_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Input law and the builtin benchmark, when one is configured.
pub struct Inputs {
    pub law: ParameterGroups,
    pub benchmark: Option<Benchmark>,
}

fn read_mixture(path: &Path) -> CliResult<ParameterGroups> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(MixtureSpec::from_json(&text)?.build()?)
}

/// Input law alone, for commands that never call the oracle.
pub fn load_law(cfg: &RunConfig) -> CliResult<ParameterGroups> {
    match (&cfg.mixture, cfg.oracle) {
        (Some(path), _) => read_mixture(path),
        (None, OracleName::File) => Err(CliError::Config(
            "a mixture spec is required with the file oracle".into(),
        )),
        (None, name) => Ok(ParameterGroups::single(Benchmark::builtin(name)?.mixture)),
    }
}

pub fn load_inputs(cfg: &RunConfig) -> CliResult<Inputs> {
    let benchmark = match cfg.oracle {
        OracleName::File => None,
        name => Some(Benchmark::builtin(name)?),
    };
    let law = match (&cfg.mixture, &benchmark) {
        (Some(path), _) => read_mixture(path)?,
        (None, Some(b)) => ParameterGroups::single(b.mixture.clone()),
        (None, None) => {
            return Err(CliError::Config(
                "a mixture spec is required with the file oracle".into(),
            ))
        }
    };
    if let Some(b) = &benchmark {
        if b.mixture.dimension() != law.dimension() {
            return Err(CliError::Config(format!(
                "oracle {} takes {} inputs but the mixture has dimension {}",
                b.name,
                b.mixture.dimension(),
                law.dimension()
            )));
        }
    }
    Ok(Inputs { law, benchmark })
}

/// Basis with the moment tables that produced it (one per mixture block).
pub struct BuiltBasis {
    pub basis: BasisSet,
    pub tables: Vec<(Vec<usize>, MomentTable)>,
    pub elapsed_ms: u128,
}

pub fn build_basis_for(law: &ParameterGroups, p: usize) -> CliResult<BuiltBasis> {
    let start = Instant::now();
    let policy = EpsPolicy::default();
    let mut tables = Vec::new();
    let basis = if let Some(mix) = law.as_single_mixture() {
        let t = Instant::now();
        let table = moment_table(mix, p)?;
        log_phase("moments", t);
        let t = Instant::now();
        let idx = MultiIndexSet::enumerate(mix.dimension(), p)?;
        let basis = factorize(&build_moment_matrix(&table, &idx)?, &policy)?;
        log_phase("cholesky", t);
        tables.push(((0..mix.dimension()).collect(), table));
        basis
    } else {
        for g in law.groups() {
            if let GroupLaw::Mixture(m) = &g.law {
                tables.push((g.indices.clone(), moment_table(m, p)?));
            }
        }
        build_grouped_basis(law, p, &policy)?
    };
    let elapsed_ms = log_phase("basis", start);
    Ok(BuiltBasis {
        basis,
        tables,
        elapsed_ms,
    })
}

fn load_basis_file(path: &Path) -> CliResult<BasisSet> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let export: BasisExport =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(BasisSet::from_export(&export)?)
}

fn basis_for(cfg: &RunConfig, law: &ParameterGroups) -> CliResult<BasisSet> {
    let basis = match &cfg.basis {
        Some(path) => load_basis_file(path)?,
        None => build_basis_for(law, cfg.p)?.basis,
    };
    if basis.dimension() != law.dimension() {
        return Err(CliError::Config(format!(
            "basis dimension {} differs from the mixture dimension {}",
            basis.dimension(),
            law.dimension()
        )));
    }
    Ok(basis)
}

fn moments_csv(tables: &[(Vec<usize>, MomentTable)], dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (k, (_, table)) in tables.iter().enumerate() {
        let name = if tables.len() == 1 {
            "moments.csv".to_string()
        } else {
            format!("moments_group{k}.csv")
        };
        let path = dir.join(name);
        write_file(&path, table.to_csv())?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisOutcome {
    pub n: usize,
    pub d: usize,
    pub p: usize,
    pub epsilon: f64,
    pub condition_estimate: f64,
    pub elapsed_ms: u128,
}

/// Writes `basis.json`, the moment tables and `conditioning.json`.
pub fn cmd_basis(cfg: &RunConfig) -> CliResult<BasisOutcome> {
    cfg.validate(Command::Basis)?;
    let built = build_basis_for(&load_law(cfg)?, cfg.p)?;
    create_output_dir(&cfg.output_dir)?;
    let b = &built.basis;
    write_json(&cfg.output_dir.join("basis.json"), &b.export())?;
    moments_csv(&built.tables, &cfg.output_dir)?;
    let outcome = BasisOutcome {
        n: b.len(),
        d: b.dimension(),
        p: b.order(),
        epsilon: b.epsilon(),
        condition_estimate: b.condition_estimate(),
        elapsed_ms: built.elapsed_ms,
    };
    write_json(&cfg.output_dir.join("conditioning.json"), &outcome)?;
    log::info!(
        "basis functions n={} epsilon={:.3e} condition_estimate={:.3e}",
        outcome.n,
        outcome.epsilon,
        outcome.condition_estimate
    );
    Ok(outcome)
}

/// Writes the moment tables only.
pub fn cmd_moments(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    cfg.validate(Command::Moments)?;
    let law = load_law(cfg)?;
    let mut tables = Vec::new();
    let t = Instant::now();
    for g in law.groups() {
        if let GroupLaw::Mixture(m) = &g.law {
            tables.push((g.indices.clone(), moment_table(m, cfg.p)?));
        }
    }
    log_phase("moments", t);
    create_output_dir(&cfg.output_dir)?;
    moments_csv(&tables, &cfg.output_dir)
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub strategy: String,
    pub stop: StopReason,
    pub m_used: usize,
    pub training_error: f64,
    pub support_size: usize,
    pub s: usize,
    pub epsilon: f64,
    pub history_file: String,
    pub model_file: String,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub runs: Vec<(Strategy, AdaptiveRun)>,
    pub summaries: Vec<FitSummary>,
}

fn file_names(choice: StrategyChoice, s: Strategy) -> (String, String, String) {
    if choice == StrategyChoice::All {
        (
            format!("history_{s}.csv"),
            format!("model_{s}.json"),
            format!("samples_{s}.csv"),
        )
    } else {
        ("history.csv".into(), "model.json".into(), "samples.csv".into())
    }
}

/// Adaptive fit. With `strategy = all` every strategy runs on the same pool
/// and writes its own history, model and sample table.
pub fn cmd_fit(cfg: &RunConfig) -> CliResult<FitOutcome> {
    cfg.validate(Command::Fit)?;
    let inputs = load_inputs(cfg)?;
    let basis = basis_for(cfg, &inputs.law)?;
    let mut exchange = match cfg.oracle {
        OracleName::File => Some(FileExchange::open(&cfg.exchange_dir(), basis.dimension())?),
        _ => None,
    };
    if cfg.initial > basis.len() {
        return Err(CliError::Config(format!(
            "initial {} exceeds the {} basis functions",
            cfg.initial,
            basis.len()
        )));
    }
    create_output_dir(&cfg.output_dir)?;
    if exchange.is_some() {
        create_output_dir(&cfg.exchange_dir())?;
    }
    let t = Instant::now();
    let pool = CandidatePool::sample(&basis, &inputs.law, cfg.pool_size, cfg.seed)?;
    log_phase("pool", t);

    let mut outcome = FitOutcome {
        runs: Vec::new(),
        summaries: Vec::new(),
    };
    for strategy in cfg.strategy.strategies() {
        let t = Instant::now();
        let mut bench_oracle = inputs.benchmark.as_ref().map(|b| b.oracle(cfg.seed));
        let oracle: &mut dyn Oracle = match (&mut exchange, &mut bench_oracle) {
            (Some(ex), _) => ex,
            (None, Some(o)) => o,
            (None, None) => return Err(CliError::Config("no oracle configured".into())),
        };
        let run = run_adaptive(&pool, &cfg.adaptive(strategy), oracle)?;
        log_phase(&format!("fit_{strategy}"), t);
        let (hist_name, model_name, samples_name) = file_names(cfg.strategy, strategy);
        write_file(&cfg.output_dir.join(&hist_name), history_to_csv(&run.history))?;
        if let StopReason::OracleFailed(msg) = &run.stop {
            return Err(CliError::Oracle(format!(
                "run paused after {} solve(s): {}",
                run.history.len(),
                msg.strip_prefix("oracle error: ").unwrap_or(msg)
            )));
        }
        let points = pool.points().select_rows(&run.selected);
        table::write(
            &cfg.output_dir.join(&samples_name),
            &points,
            Some(&DVector::from_column_slice(&run.responses)),
        )?;
        let model = SparseSurrogate::from_run(basis.clone(), &run, Some(strategy.as_str()))?;
        write_file(&cfg.output_dir.join(&model_name), model.to_json()? + "\n")?;
        let summary = FitSummary {
            strategy: strategy.to_string(),
            stop: run.stop.clone(),
            m_used: run.selected.len(),
            training_error: run.training_error(),
            support_size: run.support.len(),
            s: run.sparsity,
            epsilon: run.epsilon,
            history_file: hist_name,
            model_file: model_name,
        };
        log::info!(
            "strategy={} m_used={} training_error={:.3e} stop={:?}",
            summary.strategy,
            summary.m_used,
            summary.training_error,
            summary.stop
        );
        outcome.summaries.push(summary);
        outcome.runs.push((strategy, run));
    }
    if let Some(ex) = &exchange {
        ex.clear_pending()?;
    }
    let summary_value = if outcome.summaries.len() == 1 {
        serde_json::to_value(&outcome.summaries[0])
    } else {
        serde_json::to_value(&outcome.summaries)
    }
    .map_err(|e| CliError::Io(e.to_string()))?;
    write_json(&cfg.output_dir.join("fit_summary.json"), &summary_value)?;
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct ValidateOutcome {
    pub report: ValidationReport,
    /// Modes of the surrogate density estimate.
    pub surrogate_modes: usize,
    /// Modes of the direct Monte Carlo estimate at the same bandwidth, for
    /// builtin oracles.
    pub reference_modes: Option<usize>,
}

/// Testing error, closed-form statistics and density grids.
pub fn cmd_validate(cfg: &RunConfig) -> CliResult<ValidateOutcome> {
    cfg.validate(Command::Validate)?;
    let inputs = load_inputs(cfg)?;
    let model_path = cfg.model_path();
    let text =
        std::fs::read_to_string(&model_path).map_err(|e| CliError::Config(format!("{}: {e}", model_path.display())))?;
    let model = SparseSurrogate::from_json(&text)?;
    if model.basis().dimension() != inputs.law.dimension() {
        return Err(CliError::Config("model and mixture dimensions differ".into()));
    }
    let (test_points, test_y) = match (&cfg.samples, &inputs.benchmark) {
        (Some(path), _) => {
            let (pts, y) = table::read(path)?;
            let y = y.ok_or_else(|| CliError::Config(format!("{} lacks a y column", path.display())))?;
            (pts, y)
        }
        (None, Some(bench)) => {
            let pts = inputs.law.sample(cfg.test_samples, cfg.seed.wrapping_add(1_000_003))?;
            let mut oracle = bench.oracle(cfg.seed.wrapping_add(1_000_003));
            let y: Vec<f64> = (0..pts.nrows())
                .map(|i| oracle.evaluate(pts.row(i).clone_owned().as_slice()))
                .collect::<ttpce::Result<_>>()?;
            (pts, DVector::from_vec(y))
        }
        (None, None) => return Err(CliError::Config("no validation data".into())),
    };
    if test_points.ncols() != model.basis().dimension() {
        return Err(CliError::Config("sample table dimension differs from the model".into()));
    }
    let training_path = model_path.with_file_name("samples.csv");
    let training_error = if training_path.is_file() {
        let (pts, y) = table::read(&training_path)?;
        match y {
            Some(y) if pts.ncols() == model.basis().dimension() => {
                Some(relative_error(&model.predict(&pts)?, &y).value)
            }
            _ => None,
        }
    } else {
        None
    };
    let t = Instant::now();
    let mut report = validate(&model, &test_points, &test_y, training_error)?;
    log_phase("validate", t);

    let t = Instant::now();
    let density_points = inputs
        .law
        .sample(cfg.density_samples, cfg.seed.wrapping_add(2_000_003))?;
    let outputs = model.predict(&density_points)?;
    let bandwidth = cfg.bandwidth.map_or(Bandwidth::Silverman, Bandwidth::Fixed);
    let est = kde(outputs.as_slice(), bandwidth)?;
    let surrogate_modes = count_modes(&est.density);
    let reference = match &inputs.benchmark {
        Some(bench) => {
            let direct = bench.exact(&density_points)?;
            Some(kde(direct.as_slice(), Bandwidth::Fixed(est.bandwidth))?)
        }
        None => None,
    };
    log_phase("density", t);
    create_output_dir(&cfg.output_dir)?;
    write_file(&cfg.output_dir.join("density.csv"), est.to_csv())?;
    let reference_modes = reference.as_ref().map(|r| count_modes(&r.density));
    if let Some(r) = &reference {
        write_file(&cfg.output_dir.join("density_reference.csv"), r.to_csv())?;
    }
    report.density = Some(est);
    let mut summary = report.summary_json();
    summary["modes"] = json!({ "surrogate": surrogate_modes, "reference": reference_modes });
    summary["test_samples"] = json!(test_y.len());
    write_json(&cfg.output_dir.join("report.json"), &summary)?;
    log::info!(
        "test_err={:.3e} mean={:.6e} std={:.6e}",
        report.testing_error,
        report.mean,
        report.std
    );
    Ok(ValidateOutcome {
        report,
        surrogate_modes,
        reference_modes,
    })
}

/// One cell of the ε × s sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub trial: usize,
    pub epsilon: f64,
    pub s: usize,
    pub coef_error: f64,
    pub test_error: f64,
    pub residual_norm: f64,
    pub support_size: usize,
    pub iterations: usize,
    /// Estimated `κ₂ₛ` (a lower bound on the true constant).
    pub kappa_2s: f64,
    /// Coefficient-error bound, present when `κ₂ₛ < 1`.
    pub bound: Option<f64>,
}

pub const SWEEP_CSV_HEADER: &str =
    "trial,epsilon,s,coef_error,test_error,residual_norm,support_size,iterations,kappa_2s_estimate,bound";

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let f = table::format_float;
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.trial,
            f(r.epsilon),
            r.s,
            f(r.coef_error),
            f(r.test_error),
            f(r.residual_norm),
            r.support_size,
            r.iterations,
            f(r.kappa_2s),
            r.bound.map_or(String::new(), f)
        ));
    }
    out
}

/// Sweep inputs that do not depend on the configuration file.
pub struct SweepSetup<'a> {
    pub bench: &'a Benchmark,
    pub samples: usize,
    pub test_samples: usize,
    pub noise_norm: f64,
    pub epsilons: &'a [f64],
    pub sparsities: &'a [usize],
    pub rip_trials: usize,
    pub max_iter: usize,
}

/// Coefficient and testing errors over `ε × s` for one planted instance
/// drawn with `seed`.
pub fn sweep_trial(setup: &SweepSetup<'_>, trial: usize, seed: u64) -> CliResult<Vec<SweepRow>> {
    let (basis, truth) = setup
        .bench
        .planted()
        .ok_or_else(|| CliError::Config("sweep needs a planted expansion".into()))?;
    let law = &setup.bench.mixture;
    let points = law.sample(setup.samples, seed)?;
    let phi = basis.eval_basis(&points)?;
    let y = &phi * truth + noise_of_norm(setup.samples, setup.noise_norm, seed ^ 0x5eed);
    let test_points = law.sample(setup.test_samples, seed.wrapping_add(7_777_777))?;
    let phi_test = basis.eval_basis(&test_points)?;
    let y_test = &phi_test * truth;
    let n = basis.len();
    let mut rows = Vec::new();
    for &s in setup.sparsities {
        let kappa = rip_diagnostic(&phi, (2 * s).min(n), setup.rip_trials, seed.wrapping_add(s as u64))?.kappa;
        let constants = ErrorBoundConstants::new(kappa, setup.samples, s);
        let tail = best_s_term_tail_l1(truth.as_slice(), s);
        for &eps in setup.epsilons {
            let problem = RegressionProblem::new(phi.clone(), y.clone(), s, eps)?;
            let sol = cosamp(&problem, setup.max_iter)?;
            rows.push(SweepRow {
                trial,
                epsilon: eps,
                s,
                coef_error: (&sol.coefficients - truth).norm(),
                test_error: relative_error(&(&phi_test * &sol.coefficients), &y_test).value,
                residual_norm: sol.residual_norm,
                support_size: sol.support.len(),
                iterations: sol.iterations,
                kappa_2s: kappa,
                bound: constants.map(|k| k.bound(tail, setup.noise_norm, eps)),
            });
        }
    }
    Ok(rows)
}

/// Writes `sweep.csv`.
pub fn cmd_sweep(cfg: &RunConfig) -> CliResult<Vec<SweepRow>> {
    cfg.validate(Command::Sweep)?;
    let inputs = load_inputs(cfg)?;
    let bench = inputs
        .benchmark
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs a builtin oracle".into()))?;
    if cfg.mixture.is_some() {
        log::warn!("sweep uses the builtin synthetic8d law; the mixture file is ignored");
    }
    if let Some(&s) = cfg
        .sweep_sparsities
        .iter()
        .find(|&&s| s > bench.planted().map_or(0, |(b, _)| b.len()))
    {
        return Err(CliError::Config(format!("sparsity {s} exceeds the basis size")));
    }
    let setup = SweepSetup {
        bench,
        samples: cfg.sweep_samples,
        test_samples: cfg.sweep_test_samples,
        noise_norm: SYNTHETIC_NOISE_NORM,
        epsilons: &cfg.sweep_epsilons,
        sparsities: &cfg.sweep_sparsities,
        rip_trials: cfg.rip_trials,
        max_iter: 100,
    };
    create_output_dir(&cfg.output_dir)?;
    let t = Instant::now();
    let mut rows = Vec::new();
    for trial in 0..cfg.sweep_trials {
        rows.extend(sweep_trial(&setup, trial, cfg.seed.wrapping_add(trial as u64))?);
    }
    log_phase("sweep", t);
    write_file(&cfg.output_dir.join("sweep.csv"), sweep_to_csv(&rows))?;
    Ok(rows)
}
