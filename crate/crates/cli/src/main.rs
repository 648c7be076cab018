use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{Map, Value};
use ttpce_cli::commands::{cmd_basis, cmd_fit, cmd_moments, cmd_sweep, cmd_validate};
use ttpce_cli::config::{RunConfig, OUTPUT_DIR_ENV};
use ttpce_cli::{CliError, CliResult};

/// Orthonormal polynomial surrogates for Gaussian-mixture inputs.
#[derive(Parser)]
#[command(name = "ttpce", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON file whose keys override every flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Build the basis; writes basis.json, moments.csv and conditioning.json.
    Basis,
    /// Adaptive sparse fit; writes model.json, history.csv and samples.csv.
    Fit,
    /// Testing error, statistics and output density of a model.
    Validate,
    /// Coefficient error over the epsilon × sparsity grid (sweep.csv).
    Sweep,
    /// Dump the moment table.
    Moments,
}

#[derive(Args, Serialize, Default)]
struct Flags {
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mixture: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    basis: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<usize>,
    /// Target sparsity; omit for floor(m/3).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sparsity: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    /// relative | absolute
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon_mode: Option<String>,
    /// d | r | e | hybrid | random | all
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    strategy: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pool_size: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    initial: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_samples: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    training_tolerance: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    coefficient_tolerance: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    support_refresh: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k_clusters: Option<usize>,
    /// signed-mean | mean-absolute
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_mode: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// synthetic8d | bimodal | quadratic-ill | file
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    exchange_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    test_samples: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    density_samples: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidth: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_epsilons: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_sparsities: Option<Vec<usize>>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_samples: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_trials: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_test_samples: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rip_trials: Option<usize>,
    /// Worker threads, 0 = automatic.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
}

fn flag_map(flags: &Flags) -> CliResult<Map<String, Value>> {
    match serde_json::to_value(flags) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::Config("flags did not serialize to an object".into())),
        Err(e) => Err(CliError::Config(e.to_string())),
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let cfg = RunConfig::assemble(
        flag_map(&cli.flags)?,
        cli.config.as_deref(),
        std::env::var(OUTPUT_DIR_ENV).ok(),
    )?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = cfg.output_dir.display().to_string();
    match cli.command {
        Cmd::Basis => {
            let o = cmd_basis(&cfg)?;
            println!(
                "n={} epsilon={:e} condition_estimate={:e} output={out}",
                o.n, o.epsilon, o.condition_estimate
            );
        }
        Cmd::Fit => {
            for s in cmd_fit(&cfg)?.summaries {
                println!(
                    "strategy={} m_used={} training_error={:e} support_size={} history={}",
                    s.strategy, s.m_used, s.training_error, s.support_size, s.history_file
                );
            }
        }
        Cmd::Validate => {
            let o = cmd_validate(&cfg)?;
            println!(
                "test_err={:e} mean={:e} std={:e} modes={} output={out}",
                o.report.testing_error, o.report.mean, o.report.std, o.surrogate_modes
            );
        }
        Cmd::Sweep => {
            let rows = cmd_sweep(&cfg)?;
            println!("rows={} output={out}/sweep.csv", rows.len());
        }
        Cmd::Moments => {
            for p in cmd_moments(&cfg)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| {
            writeln!(
                buf,
                "level={} {}",
                record.level().as_str().to_lowercase(),
                record.args()
            )
        })
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
