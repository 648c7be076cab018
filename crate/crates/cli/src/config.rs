use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use ttpce::sampler::{AdaptiveConfig, ResidualMode, Strategy, Tolerance};

use crate::error::{CliError, CliResult};
use crate::oracles::OracleName;

/// Environment variable that replaces `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "TTPCE_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonMode {
    /// `epsilon` is multiplied by `‖y‖₂`.
    Relative,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyChoice {
    D,
    R,
    E,
    Hybrid,
    Random,
    /// Runs all five strategies on the same pool.
    All,
}

impl StrategyChoice {
    pub fn strategies(self) -> Vec<Strategy> {
        match self {
            StrategyChoice::D => vec![Strategy::D],
            StrategyChoice::R => vec![Strategy::R],
            StrategyChoice::E => vec![Strategy::E],
            StrategyChoice::Hybrid => vec![Strategy::Hybrid],
            StrategyChoice::Random => vec![Strategy::Random],
            StrategyChoice::All => Strategy::ALL.to_vec(),
        }
    }
}

/// Every setting of every subcommand. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Mixture specification file; builtin oracles supply their own law
    /// when absent.
    pub mixture: Option<PathBuf>,
    /// Basis export to reuse instead of building one.
    pub basis: Option<PathBuf>,
    /// Model file for `validate` (default `<output_dir>/model.json`).
    pub model: Option<PathBuf>,
    /// Held-out sample table for `validate`.
    pub samples: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub p: usize,
    pub sparsity: Option<usize>,
    pub epsilon: f64,
    pub epsilon_mode: EpsilonMode,
    pub strategy: StrategyChoice,
    pub pool_size: usize,
    pub initial: usize,
    pub max_samples: usize,
    pub training_tolerance: f64,
    pub coefficient_tolerance: f64,
    pub support_refresh: usize,
    pub k_clusters: Option<usize>,
    pub residual_mode: ResidualMode,
    pub seed: u64,
    pub oracle: OracleName,
    /// Directory holding `responses.csv` and `pending_points.csv` in
    /// file-exchange mode (default `output_dir`).
    pub exchange_dir: Option<PathBuf>,
    pub test_samples: usize,
    pub density_samples: usize,
    pub bandwidth: Option<f64>,
    pub sweep_epsilons: Vec<f64>,
    pub sweep_sparsities: Vec<usize>,
    pub sweep_samples: usize,
    pub sweep_trials: usize,
    pub sweep_test_samples: usize,
    pub rip_trials: usize,
    /// Worker threads; 0 picks automatically.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mixture: None,
            basis: None,
            model: None,
            samples: None,
            output_dir: PathBuf::from("ttpce-out"),
            p: 3,
            sparsity: None,
            epsilon: 1e-6,
            epsilon_mode: EpsilonMode::Relative,
            strategy: StrategyChoice::Hybrid,
            pool_size: 1000,
            initial: 40,
            max_samples: 120,
            training_tolerance: 1e-8,
            coefficient_tolerance: 1e-8,
            support_refresh: 10,
            k_clusters: None,
            residual_mode: ResidualMode::SignedMean,
            seed: 0,
            oracle: OracleName::Synthetic8d,
            exchange_dir: None,
            test_samples: 9000,
            density_samples: 10_000,
            bandwidth: None,
            sweep_epsilons: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7],
            sweep_sparsities: vec![4, 6, 8, 10, 12],
            sweep_samples: 200,
            sweep_trials: 1,
            sweep_test_samples: 1000,
            rip_trials: 50,
            threads: 0,
        }
    }
}

/// Subcommand being configured; validation depends on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Basis,
    Fit,
    Validate,
    Sweep,
    Moments,
}

fn merge(base: &mut Map<String, Value>, overlay: Map<String, Value>) {
    for (k, v) in overlay {
        base.insert(k, v);
    }
}

impl RunConfig {
    /// Defaults, then `flags` (a JSON object of explicitly given flags),
    /// then the keys of `config_file`, then the output-dir environment
    /// variable.
    pub fn assemble(
        flags: Map<String, Value>,
        config_file: Option<&Path>,
        env_output: Option<String>,
    ) -> CliResult<Self> {
        let Value::Object(mut merged) =
            serde_json::to_value(RunConfig::default()).map_err(|e| CliError::Config(e.to_string()))?
        else {
            return Err(CliError::Config("default configuration is not an object".into()));
        };
        merge(&mut merged, flags);
        if let Some(path) = config_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(file)) => merge(&mut merged, file),
                Ok(_) => {
                    return Err(CliError::Config(format!(
                        "config {} must be a JSON object",
                        path.display()
                    )))
                }
                Err(e) => return Err(CliError::Config(format!("config {}: {e}", path.display()))),
            }
        }
        let mut cfg: RunConfig =
            serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(dir) = env_output.filter(|s| !s.is_empty()) {
            cfg.output_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn tolerance(&self) -> Tolerance {
        match self.epsilon_mode {
            EpsilonMode::Relative => Tolerance::Relative(self.epsilon),
            EpsilonMode::Absolute => Tolerance::Absolute(self.epsilon),
        }
    }

    pub fn adaptive(&self, strategy: Strategy) -> AdaptiveConfig {
        AdaptiveConfig {
            initial: self.initial,
            max_samples: self.max_samples,
            strategy,
            sparsity: self.sparsity,
            epsilon: self.tolerance(),
            training_tolerance: self.training_tolerance,
            support_refresh: self.support_refresh,
            coefficient_tolerance: self.coefficient_tolerance,
            k_clusters: self.k_clusters,
            residual_mode: self.residual_mode,
            cosamp_max_iter: 100,
            seed: self.seed,
        }
    }

    pub fn exchange_dir(&self) -> PathBuf {
        self.exchange_dir.clone().unwrap_or_else(|| self.output_dir.clone())
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.output_dir.join("model.json"))
    }

    /// Checks everything that can be checked without reading data files.
    pub fn validate(&self, command: Command) -> CliResult<()> {
        let fail = |m: String| Err(CliError::Config(m));
        if self.p == 0 {
            return fail("p must be at least 1".into());
        }
        for (name, path) in [
            ("mixture", &self.mixture),
            ("basis", &self.basis),
            ("samples", &self.samples),
        ] {
            if let Some(p) = path {
                if !p.is_file() {
                    return fail(format!("{name} file {} does not exist", p.display()));
                }
            }
        }
        if self.mixture.is_none()
            && self.basis.is_none()
            && self.oracle == OracleName::File
            && command != Command::Validate
        {
            return fail("file-exchange mode needs a mixture spec or a basis file".into());
        }
        match command {
            Command::Basis | Command::Moments => {}
            Command::Fit => {
                if self.pool_size <= self.initial {
                    return fail(format!(
                        "pool_size {} must exceed initial {}",
                        self.pool_size, self.initial
                    ));
                }
                if self.oracle == OracleName::File && self.strategy == StrategyChoice::All {
                    return fail("strategy \"all\" is not available in file-exchange mode".into());
                }
                self.adaptive(Strategy::D)
                    .validate(self.pool_size)
                    .map_err(|e| CliError::Config(e.to_string()))?;
            }
            Command::Validate => {
                let model = self.model_path();
                if !model.is_file() {
                    return fail(format!("model file {} does not exist", model.display()));
                }
                if self.samples.is_none() && self.oracle == OracleName::File {
                    return fail("validation needs a sample table or a builtin oracle".into());
                }
                if self.density_samples < 1000 {
                    return fail("density_samples must be at least 1000".into());
                }
                if self.samples.is_none() && self.test_samples == 0 {
                    return fail("test_samples must be positive".into());
                }
                if matches!(self.bandwidth, Some(h) if !(h > 0.0)) {
                    return fail("bandwidth must be positive".into());
                }
            }
            Command::Sweep => {
                if self.oracle != OracleName::Synthetic8d {
                    return fail("sweep needs the planted-truth oracle synthetic8d".into());
                }
                if self.sweep_epsilons.is_empty() || self.sweep_sparsities.is_empty() {
                    return fail("sweep grids must be non-empty".into());
                }
                if self.sweep_epsilons.iter().any(|e| !(*e >= 0.0)) {
                    return fail("sweep epsilons must be non-negative".into());
                }
                if self.sweep_sparsities.iter().any(|&s| s == 0 || s > self.sweep_samples) {
                    return fail("sweep sparsities must lie in 1..=sweep_samples".into());
                }
                if self.sweep_trials == 0 || self.rip_trials == 0 || self.sweep_test_samples == 0 {
                    return fail("sweep_trials, rip_trials and sweep_test_samples must be positive".into());
                }
            }
        }
        Ok(())
    }
}
