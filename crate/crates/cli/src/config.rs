//! Run configuration files: TOML with strict keys. Every hyperparameter is
//! optional and defaults to the reference values; the effective merged
//! configuration is echoed into the run directory so a run can be
//! reproduced from its own artifacts.

use crate::CliError;
use folzero::fol::parse_problem;
use folzero::hsr::{dsl_text, HsrInstance};
use folzero::train::{ExperimentConfig, ExperimentName, RunOptions};
use folzero::Problem;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: String,
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub problem: ProblemSpec,
    pub network: Option<NetworkSpec>,
    pub hyperparams: Option<HyperparamsSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    /// Benchmark instance `[k, q, n]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hsr: Option<[i64; 3]>,
    /// Path to a problem definition file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dsl: Option<PathBuf>,
    /// Inline problem definition text.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dsl_text: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub trunk: Option<Vec<usize>>,
    pub opponent_trunk: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperparamsSpec {
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub simulations: Option<usize>,
    pub self_plays: Option<usize>,
    pub buffer_iterations: Option<usize>,
    pub beta: Option<f64>,
    pub epsilon: Option<f64>,
    pub arena_games: Option<usize>,
    pub convergence_window: Option<usize>,
    pub c_puct: Option<f64>,
}

/// A fully resolved run: problem, experiment configuration, and options.
pub struct ResolvedRun {
    pub problem: Problem,
    pub config: ExperimentConfig,
    pub options: RunOptions,
    /// The effective configuration with every field made explicit.
    pub effective: ConfigFile,
}

pub fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn resolve(
    file: ConfigFile,
    seed_override: Option<u64>,
    out_override: Option<PathBuf>,
) -> Result<ResolvedRun, CliError> {
    let name =
        ExperimentName::parse(&file.experiment).map_err(|e| CliError::Config(e.to_string()))?;
    let mut config = ExperimentConfig::new(name);

    if let Some(net) = &file.network {
        if let Some(trunk) = &net.trunk {
            config.trunk = trunk.clone();
        }
        if let Some(trunk) = &net.opponent_trunk {
            config.opponent_trunk = trunk.clone();
        }
    }
    if let Some(hp) = &file.hyperparams {
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = hp.$field {
                    config.hp.$field = v;
                }
            };
        }
        take!(learning_rate);
        take!(batch_size);
        take!(epochs);
        take!(simulations);
        take!(self_plays);
        take!(buffer_iterations);
        take!(beta);
        take!(epsilon);
        take!(arena_games);
        take!(convergence_window);
        take!(c_puct);
    }

    let (problem, echoed_problem) = resolve_problem(&file.problem)?;
    let seed = seed_override.or(file.seed).unwrap_or(0);
    let out_dir = out_override.or_else(|| file.out_dir.clone());
    let options = RunOptions {
        max_iters: file.max_iters.unwrap_or(100),
        seed,
        out_dir: out_dir.clone(),
    };

    let effective = ConfigFile {
        experiment: name.as_str().to_string(),
        max_iters: Some(options.max_iters),
        seed: Some(seed),
        out_dir,
        problem: echoed_problem,
        network: Some(NetworkSpec {
            trunk: Some(config.trunk.clone()),
            opponent_trunk: Some(config.opponent_trunk.clone()),
        }),
        hyperparams: Some(HyperparamsSpec {
            learning_rate: Some(config.hp.learning_rate),
            batch_size: Some(config.hp.batch_size),
            epochs: Some(config.hp.epochs),
            simulations: Some(config.hp.simulations),
            self_plays: Some(config.hp.self_plays),
            buffer_iterations: Some(config.hp.buffer_iterations),
            beta: Some(config.hp.beta),
            epsilon: Some(config.hp.epsilon),
            arena_games: Some(config.hp.arena_games),
            convergence_window: Some(config.hp.convergence_window),
            c_puct: Some(config.hp.c_puct),
        }),
    };

    Ok(ResolvedRun {
        problem,
        config,
        options,
        effective,
    })
}

/// Build the problem and the self-contained form to echo (file-based
/// problems are inlined so the echoed config stands alone).
fn resolve_problem(spec: &ProblemSpec) -> Result<(Problem, ProblemSpec), CliError> {
    let provided = [
        spec.hsr.is_some(),
        spec.dsl.is_some(),
        spec.dsl_text.is_some(),
    ]
    .iter()
    .filter(|b| **b)
    .count();
    if provided != 1 {
        return Err(CliError::Config(
            "problem needs exactly one of `hsr`, `dsl`, `dsl_text`".to_string(),
        ));
    }
    if let Some([k, q, n]) = spec.hsr {
        let inst = HsrInstance::new(k, q, n).map_err(|e| CliError::Config(e.to_string()))?;
        let text = dsl_text(&inst);
        let problem = parse_problem(&text).map_err(|e| CliError::Config(e.to_string()))?;
        return Ok((
            problem,
            ProblemSpec {
                hsr: Some([k, q, n]),
                dsl: None,
                dsl_text: None,
            },
        ));
    }
    let text = if let Some(path) = &spec.dsl {
        std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?
    } else {
        spec.dsl_text.clone().expect("counted above")
    };
    let problem = parse_problem(&text).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((
        problem,
        ProblemSpec {
            hsr: None,
            dsl: None,
            dsl_text: Some(text),
        },
    ))
}

/// Serialize the effective configuration into the run directory.
pub fn echo_config(effective: &ConfigFile, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let text = toml::to_string_pretty(effective)
        .map_err(|e| CliError::Runtime(format!("config serialization: {e}")))?;
    std::fs::write(dir.join("config.toml"), text).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}
