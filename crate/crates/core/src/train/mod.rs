//! Self-play training: trajectory generation, the replay buffer, network
//! updates, arena evaluation against the previous iteration's networks, and
//! convergence detection, wired together by [`run_experiment`].
//!
//! The seven named experiment configurations differ only in derived flags
//! (tree retention, Q injection, network wiring, policy loss); every
//! hyperparameter is overridable but defaults to the reference values.

mod agents;
mod phases;

pub use agents::{play_game, Agent, MctsAgent, OracleAgent, RandomAgent};
pub use phases::{arena, run_experiment, run_experiment_with_clock, self_play_phase, train_phase};

use crate::fol::Problem;
use crate::hsr::HsrError;
use crate::mcts::{MctsConfig, MctsError, Retention};
use crate::nn::{NetConfig, NnError, PlayerWiring, PolicyLoss, PvWiring};
use crate::semgame::{GameError, Move, Player, StateKey};
use std::collections::VecDeque;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("problem error: {0}")]
    Fol(#[from] crate::fol::FolError),
    #[error("game error: {0}")]
    Game(#[from] GameError),
    #[error("search error: {0}")]
    Mcts(#[from] MctsError),
    #[error("network error: {0}")]
    Nn(#[from] NnError),
    #[error("fault oracle error: {0}")]
    Hsr(#[from] HsrError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown experiment name `{0}`; valid names: {1}")]
    UnknownExperiment(String, String),
    #[error(
        "the experiment loop evaluates by fault counting, which needs the \
         built-in benchmark problem; self-play and training phases accept \
         any problem through the library API"
    )]
    NoFaultOracle,
}

// ---------------------------------------------------------------------------
// experiment configurations

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentName {
    Az,
    Ce,
    CeSep,
    CeQSep,
    PpoClipSep,
    PpoKlSep,
    PpoKlSep2nn,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 7] = [
        ExperimentName::Az,
        ExperimentName::Ce,
        ExperimentName::CeSep,
        ExperimentName::CeQSep,
        ExperimentName::PpoClipSep,
        ExperimentName::PpoKlSep,
        ExperimentName::PpoKlSep2nn,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::Az => "AZ",
            ExperimentName::Ce => "CE",
            ExperimentName::CeSep => "CE_Sep",
            ExperimentName::CeQSep => "CE_Q_Sep",
            ExperimentName::PpoClipSep => "PPO_CLIP_Sep",
            ExperimentName::PpoKlSep => "PPO_KL_Sep",
            ExperimentName::PpoKlSep2nn => "PPO_KL_Sep_2NN",
        }
    }

    pub fn parse(s: &str) -> Result<ExperimentName, TrainError> {
        Self::ALL
            .iter()
            .find(|n| n.as_str() == s)
            .copied()
            .ok_or_else(|| {
                let valid = Self::ALL
                    .iter()
                    .map(|n| n.as_str())
                    .collect::<Vec<_>>()
                    .join(", ");
                TrainError::UnknownExperiment(s.to_string(), valid)
            })
    }
}

impl std::fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reference hyperparameters; every field is overridable.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub simulations: usize,
    pub self_plays: usize,
    pub buffer_iterations: usize,
    pub beta: f64,
    pub epsilon: f64,
    /// Arena games per role assignment.
    pub arena_games: usize,
    pub convergence_window: usize,
    pub c_puct: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.001,
            batch_size: 64,
            epochs: 10,
            simulations: 25,
            self_plays: 100,
            buffer_iterations: 20,
            beta: 1.0,
            epsilon: 0.2,
            arena_games: 20,
            convergence_window: 5,
            c_puct: 1.0,
        }
    }
}

/// A named configuration plus its knobs. The behavioral flags are a pure
/// function of the name.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: ExperimentName,
    pub hp: Hyperparams,
    pub trunk: Vec<usize>,
    pub opponent_trunk: Vec<usize>,
}

impl ExperimentConfig {
    /// Desk-scale defaults: reference hyperparameters with a small trunk.
    pub fn new(name: ExperimentName) -> ExperimentConfig {
        ExperimentConfig {
            name,
            hp: Hyperparams::default(),
            trunk: vec![128, 128],
            opponent_trunk: vec![128, 128],
        }
    }

    pub fn retention(&self) -> Retention {
        match self.name {
            ExperimentName::Az => Retention::Fresh,
            _ => Retention::KeepCounts,
        }
    }

    pub fn q_injection(&self) -> bool {
        matches!(
            self.name,
            ExperimentName::CeQSep
                | ExperimentName::PpoClipSep
                | ExperimentName::PpoKlSep
                | ExperimentName::PpoKlSep2nn
        )
    }

    pub fn pv_wiring(&self) -> PvWiring {
        match self.name {
            ExperimentName::Az | ExperimentName::Ce => PvWiring::SharedHeads,
            _ => PvWiring::SeparatePv,
        }
    }

    pub fn player_wiring(&self) -> PlayerWiring {
        match self.name {
            ExperimentName::PpoKlSep2nn => PlayerWiring::PerPlayer,
            _ => PlayerWiring::Shared,
        }
    }

    pub fn policy_loss(&self) -> PolicyLoss {
        match self.name {
            ExperimentName::PpoClipSep => PolicyLoss::PpoClip {
                epsilon: self.hp.epsilon,
            },
            ExperimentName::PpoKlSep | ExperimentName::PpoKlSep2nn => {
                PolicyLoss::PpoKl { beta: self.hp.beta }
            }
            _ => PolicyLoss::Cem,
        }
    }

    pub fn mcts_config(&self) -> MctsConfig {
        MctsConfig {
            num_simulations: self.hp.simulations,
            c_puct: self.hp.c_puct,
            q_injection: self.q_injection(),
            retention: self.retention(),
        }
    }

    pub fn net_config(
        &self,
        problem: &Problem,
        seed: u64,
    ) -> Result<NetConfig, crate::fol::FolError> {
        Ok(NetConfig {
            input_dim: problem.encoding_len(),
            action_dim: crate::fol::max_action_bound(problem)?,
            trunk: self.trunk.clone(),
            opponent_trunk: self.opponent_trunk.clone(),
            pv_wiring: self.pv_wiring(),
            player_wiring: self.player_wiring(),
            seed,
        })
    }
}

// ---------------------------------------------------------------------------
// trajectories and the replay buffer

/// One decision made during self-play.
#[derive(Debug, Clone)]
pub struct Step {
    pub key: StateKey,
    /// Scaled encoding fed to the networks.
    pub x: Vec<f64>,
    /// Legality mask padded to the action-space bound.
    pub mask: Vec<bool>,
    /// Empirical policy padded to the action-space bound.
    pub pi_hat: Vec<f64>,
    pub player: Player,
    pub mv: Move,
    /// Probability the empirical policy assigned to `mv`.
    pub behavior_prob: f64,
    /// Game outcome from this step's mover perspective, filled after the
    /// game ends.
    pub z: f64,
}

/// A finished self-play game.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub moves: Vec<Move>,
    /// Outcome for `Player0`.
    pub outcome_p0: i8,
}

/// What follows a sample's transition; used to recompute advantages from the
/// value network of record at training time.
#[derive(Debug, Clone)]
pub enum SampleNext {
    /// The move ended the game; the reward is the sample's own `z`.
    Terminal,
    /// The game continued into a decision state for `player`.
    Continues { x: Vec<f64>, player: Player },
}

/// A flattened training example.
#[derive(Debug, Clone)]
pub struct Sample {
    pub x: Vec<f64>,
    pub mask: Vec<bool>,
    pub pi_hat: Vec<f64>,
    pub player: Player,
    pub mv: Move,
    pub behavior_prob: f64,
    pub z: f64,
    pub next: SampleNext,
}

/// Keeps the trajectories of the most recent iterations; the oldest
/// iteration is evicted beyond the cap.
#[derive(Debug, Default)]
pub struct ReplayBuffer {
    iterations: VecDeque<Vec<Trajectory>>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        ReplayBuffer {
            iterations: VecDeque::new(),
            capacity,
        }
    }

    pub fn push_iteration(&mut self, trajectories: Vec<Trajectory>) {
        self.iterations.push_back(trajectories);
        while self.iterations.len() > self.capacity {
            self.iterations.pop_front();
        }
    }

    pub fn iteration_count(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn total_steps(&self) -> usize {
        self.iterations
            .iter()
            .flat_map(|batch| batch.iter())
            .map(|t| t.steps.len())
            .sum()
    }

    /// Flatten everything into training samples, oldest first.
    pub fn samples(&self) -> Vec<Sample> {
        let mut out = Vec::with_capacity(self.total_steps());
        for batch in &self.iterations {
            for traj in batch {
                for (i, step) in traj.steps.iter().enumerate() {
                    let next = match traj.steps.get(i + 1) {
                        None => SampleNext::Terminal,
                        Some(succ) => SampleNext::Continues {
                            x: succ.x.clone(),
                            player: succ.player,
                        },
                    };
                    out.push(Sample {
                        x: step.x.clone(),
                        mask: step.mask.clone(),
                        pi_hat: step.pi_hat.clone(),
                        player: step.player,
                        mv: step.mv,
                        behavior_prob: step.behavior_prob,
                        z: step.z,
                        next,
                    });
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// reports and convergence

/// Arena fault counts by role assignment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ArenaFaults {
    pub new_as_proponent: u32,
    pub new_as_opponent: u32,
    pub old_as_proponent: u32,
    pub old_as_opponent: u32,
}

impl ArenaFaults {
    pub fn all_zero(&self) -> bool {
        self.new_as_proponent == 0
            && self.new_as_opponent == 0
            && self.old_as_proponent == 0
            && self.old_as_opponent == 0
    }
}

#[derive(Debug, Clone)]
pub struct IterationReport {
    pub iteration: usize,
    pub faults: ArenaFaults,
    /// Mean (policy, value) loss per training epoch.
    pub epoch_losses: Vec<(f64, f64)>,
    pub seconds: f64,
}

impl IterationReport {
    /// Final-epoch losses, the headline numbers for the metrics log.
    pub fn final_losses(&self) -> (f64, f64) {
        self.epoch_losses.last().copied().unwrap_or((0.0, 0.0))
    }
}

/// True when the trailing `window` reports all have zero faults in all four
/// role assignments.
pub fn check_convergence(history: &[IterationReport], window: usize) -> bool {
    history.len() >= window
        && history[history.len() - window..]
            .iter()
            .all(|r| r.faults.all_zero())
}

/// Everything a finished run leaves behind.
pub struct RunResult {
    pub reports: Vec<IterationReport>,
    pub converged: bool,
    pub checkpoints: Vec<PathBuf>,
    pub final_nets: crate::nn::NetworkSet,
}

/// Knobs of a single run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub max_iters: usize,
    pub seed: u64,
    /// When set: metrics.csv, metrics.jsonl and per-iteration checkpoints
    /// are written here.
    pub out_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_iters: 100,
            seed: 0,
            out_dir: None,
        }
    }
}
