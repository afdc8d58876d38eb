//! Ground-truth-free scoring of training runs: Elo ratings from sequential
//! new-vs-previous matches, and an evolutionary ranking computed from a
//! checkpoint payoff table.
//!
//! The ranking treats Proponent-side and Opponent-side strategy choices as
//! two populations. Profiles `(i, j)` form a Markov chain over single
//! mutations whose fixation probability follows a Fermi rule in the payoff
//! difference; each checkpoint's score is its Proponent-population mass in
//! the stationary distribution.

use crate::fol::Problem;
use crate::mcts::MctsConfig;
use crate::nn::{load_params, NetworkSet, NnError};
use crate::semgame::{outcome_for, Player};
use crate::train::{play_game, Agent, MctsAgent, TrainError};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint error: {0}")]
    Nn(#[from] NnError),
    #[error("play error: {0}")]
    Train(#[from] TrainError),
    #[error("unknown rating entity `{0}`")]
    UnknownEntity(String),
    #[error("run directory `{0}` holds no checkpoints")]
    NoCheckpoints(PathBuf),
    #[error("stationary distribution did not converge within {0} iterations")]
    NonConvergent(usize),
}

// ---------------------------------------------------------------------------
// Elo

/// Logistic expected score of `a` against `b`.
pub fn elo_expected(rating_a: f64, rating_b: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((rating_b - rating_a) / 400.0))
}

/// Ratings for a set of named entities. Updates are zero-sum.
#[derive(Debug, Clone)]
pub struct EloState {
    ratings: BTreeMap<String, f64>,
    pub k_factor: f64,
    pub initial: f64,
}

impl Default for EloState {
    fn default() -> Self {
        EloState::new(32.0, 1000.0)
    }
}

impl EloState {
    pub fn new(k_factor: f64, initial: f64) -> EloState {
        EloState {
            ratings: BTreeMap::new(),
            k_factor,
            initial,
        }
    }

    /// Register an entity at the given rating (the default when `None`).
    pub fn add(&mut self, id: &str, rating: Option<f64>) {
        self.ratings
            .entry(id.to_string())
            .or_insert(rating.unwrap_or(self.initial));
    }

    pub fn rating(&self, id: &str) -> Result<f64, ScoreError> {
        self.ratings
            .get(id)
            .copied()
            .ok_or_else(|| ScoreError::UnknownEntity(id.to_string()))
    }

    /// Record one result for `a` against `b`: 1 win, 0 loss, 0.5 draw.
    pub fn update(&mut self, a: &str, b: &str, result_for_a: f64) -> Result<(), ScoreError> {
        let ra = self.rating(a)?;
        let rb = self.rating(b)?;
        let ea = elo_expected(ra, rb);
        let delta = self.k_factor * (result_for_a - ea);
        *self.ratings.get_mut(a).expect("checked") = ra + delta;
        *self.ratings.get_mut(b).expect("checked") = rb - delta;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// payoff tables

/// Mean Proponent-side outcome per ordered checkpoint pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffTable {
    size: usize,
    entries: Vec<f64>,
    pub games_per_pair: usize,
}

impl PayoffTable {
    pub fn from_entries(size: usize, entries: Vec<f64>, games_per_pair: usize) -> PayoffTable {
        assert_eq!(entries.len(), size * size);
        PayoffTable {
            size,
            entries,
            games_per_pair,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, proponent: usize, opponent: usize) -> f64 {
        self.entries[proponent * self.size + opponent]
    }

    /// The leading `k`-by-`k` corner: the table as it stood after
    /// checkpoint `k`.
    pub fn prefix(&self, k: usize) -> PayoffTable {
        let mut entries = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                entries.push(self.get(i, j));
            }
        }
        PayoffTable::from_entries(k, entries, self.games_per_pair)
    }
}

/// Mean Proponent outcome of `games` deterministic games between two
/// agents; trees persist across the games, so successive games can differ.
pub fn payoff_cell(
    problem: &Problem,
    proponent: &mut dyn Agent,
    opponent: &mut dyn Agent,
    games: usize,
) -> Result<f64, ScoreError> {
    let mut total = 0.0;
    for _ in 0..games {
        let moves = play_game(problem, proponent, opponent)?;
        let mut state = crate::semgame::initial_state(problem).map_err(TrainError::from)?;
        for &mv in &moves {
            state = crate::semgame::apply(problem, &state, mv).map_err(TrainError::from)?;
        }
        total += outcome_for(&state, Player::Player0)
            .map_err(TrainError::from)?
            .0 as f64;
    }
    Ok(total / games.max(1) as f64)
}

/// Deterministic per-cell seed.
fn pair_seed(seed: u64, i: usize, j: usize) -> u64 {
    seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (j as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Play every ordered checkpoint pair (diagonal included) with moves
/// sampled from the empirical policy under a per-pair seed, so near-equal
/// checkpoints still produce distinguishable rows. Cells are independent;
/// `threads > 1` splits them across workers and merges by index, so the
/// result does not depend on the worker count.
pub fn build_payoff_table(
    checkpoints: &[NetworkSet],
    problem: &Problem,
    mcts_cfg: MctsConfig,
    games: usize,
    threads: usize,
    seed: u64,
) -> Result<PayoffTable, ScoreError> {
    let n = checkpoints.len();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let mut entries = vec![0.0; n * n];

    let compute = |&(i, j): &(usize, usize)| -> Result<f64, ScoreError> {
        let s = pair_seed(seed, i, j);
        let mut p = MctsAgent::sampling(&checkpoints[i], mcts_cfg, s);
        let mut o = MctsAgent::sampling(&checkpoints[j], mcts_cfg, s.wrapping_add(1));
        payoff_cell(problem, &mut p, &mut o, games)
    };

    type CellBatch = Result<Vec<((usize, usize), f64)>, ScoreError>;
    if threads <= 1 || cells.len() <= 1 {
        for cell in &cells {
            entries[cell.0 * n + cell.1] = compute(cell)?;
        }
    } else {
        let workers = threads.min(cells.len());
        let chunk = cells.len().div_ceil(workers);
        let results: Vec<CellBatch> = std::thread::scope(|scope| {
            let handles: Vec<_> = cells
                .chunks(chunk)
                .map(|slice| {
                    scope.spawn(move || {
                        slice
                            .iter()
                            .map(|cell| compute(cell).map(|v| (*cell, v)))
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for result in results {
            for ((i, j), v) in result? {
                entries[i * n + j] = v;
            }
        }
    }
    Ok(PayoffTable::from_entries(n, entries, games))
}

// ---------------------------------------------------------------------------
// evolutionary ranking

/// Selection strength: a finite inverse temperature or the infinite-strength
/// limit where fixation depends only on the sign of the payoff difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    Finite(f64),
    Infinite,
}

impl std::fmt::Display for AlphaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlphaMode::Finite(a) => write!(f, "{a}"),
            AlphaMode::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlphaRankResult {
    /// Stationary mass per Proponent-population strategy; the reported
    /// score per checkpoint.
    pub proponent_mass: Vec<f64>,
    pub opponent_mass: Vec<f64>,
    /// Joint stationary distribution over profiles, row-major.
    pub joint: Vec<f64>,
    pub alpha: AlphaMode,
    pub iterations: usize,
}

/// Fixation probability of one mutant against `m - 1` incumbents under the
/// Fermi selection rule; `1/m` at zero payoff difference.
fn fixation(alpha: AlphaMode, m: f64, delta: f64) -> f64 {
    match alpha {
        AlphaMode::Infinite => {
            if delta > 0.0 {
                1.0
            } else if delta < 0.0 {
                0.0
            } else {
                1.0 / m
            }
        }
        AlphaMode::Finite(a) => {
            if delta == 0.0 {
                return 1.0 / m;
            }
            let x = a * delta;
            if x > 0.0 {
                (1.0 - (-x).exp()) / (1.0 - (-m * x).exp())
            } else {
                let y = -x;
                if y > 700.0 {
                    return 0.0;
                }
                // (e^y - 1) / (e^(m y) - 1); an overflowing denominator
                // correctly collapses to zero.
                (y.exp() - 1.0) / ((m * y).exp() - 1.0)
            }
        }
    }
}

/// Sparse row-stochastic transition structure over strategy profiles:
/// single mutations with uniform target choice, Fermi fixation odds.
fn transitions(table: &PayoffTable, alpha: AlphaMode, m: f64) -> Vec<Vec<(usize, f64)>> {
    let n = table.size();
    let profiles = n * n;
    let mutations = 2 * (n - 1);
    let mut rows = Vec::with_capacity(profiles);
    for i in 0..n {
        for j in 0..n {
            let mut row = Vec::with_capacity(mutations + 1);
            let mut outgoing = 0.0;
            if mutations > 0 {
                let w = 1.0 / mutations as f64;
                for i2 in 0..n {
                    if i2 != i {
                        // Proponent-population mutant payoff difference.
                        let delta = table.get(i2, j) - table.get(i, j);
                        let p = w * fixation(alpha, m, delta);
                        if p > 0.0 {
                            row.push((i2 * n + j, p));
                            outgoing += p;
                        }
                    }
                }
                for j2 in 0..n {
                    if j2 != j {
                        // Opponent payoffs are the negated table.
                        let delta = table.get(i, j) - table.get(i, j2);
                        let p = w * fixation(alpha, m, delta);
                        if p > 0.0 {
                            row.push((i * n + j2, p));
                            outgoing += p;
                        }
                    }
                }
            }
            row.push((i * n + j, 1.0 - outgoing));
            rows.push(row);
        }
    }
    rows
}

/// Stationary distribution of the profile chain by power iteration to an
/// L1 residual of 1e-10.
pub fn alpha_rank(
    table: &PayoffTable,
    alpha: AlphaMode,
    population: f64,
) -> Result<AlphaRankResult, ScoreError> {
    let n = table.size();
    let profiles = n * n;
    let rows = transitions(table, alpha, population);
    let mut x = vec![1.0 / profiles as f64; profiles];
    let cap = 200_000;
    let mut iterations = 0;
    loop {
        let mut next = vec![0.0; profiles];
        for (s, row) in rows.iter().enumerate() {
            let xs = x[s];
            if xs == 0.0 {
                continue;
            }
            for &(t, p) in row {
                next[t] += xs * p;
            }
        }
        let residual: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        iterations += 1;
        if residual < 1e-10 {
            break;
        }
        if iterations >= cap {
            return Err(ScoreError::NonConvergent(cap));
        }
    }
    let mut proponent_mass = vec![0.0; n];
    let mut opponent_mass = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            proponent_mass[i] += x[i * n + j];
            opponent_mass[j] += x[i * n + j];
        }
    }
    Ok(AlphaRankResult {
        proponent_mass,
        opponent_mass,
        joint: x,
        alpha,
        iterations,
    })
}

/// Sweep from the strongest selection down and keep the first converging
/// setting.
pub fn alpha_rank_auto(
    table: &PayoffTable,
    population: f64,
) -> Result<AlphaRankResult, ScoreError> {
    let sweep = [
        AlphaMode::Infinite,
        AlphaMode::Finite(10.0),
        AlphaMode::Finite(1.0),
        AlphaMode::Finite(0.1),
    ];
    let mut last_err = None;
    for alpha in sweep {
        match alpha_rank(table, alpha, population) {
            Ok(result) => return Ok(result),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("sweep is non-empty"))
}

// ---------------------------------------------------------------------------
// scoring a run directory

#[derive(Debug, Clone)]
pub struct ScoreOptions {
    pub games_per_pair: usize,
    /// Games per direction in the sequential Elo matches.
    pub elo_games: usize,
    pub elo_k: f64,
    pub elo_initial: f64,
    pub population: f64,
    pub threads: usize,
    pub seed: u64,
    pub mcts: MctsConfig,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            games_per_pair: 4,
            elo_games: 20,
            elo_k: 32.0,
            elo_initial: 1000.0,
            population: 50.0,
            threads: 1,
            seed: 0,
            // Fresh trees per move: scoring matches measure the checkpoint
            // parameters, not what a warm search can rescue on its own.
            mcts: MctsConfig {
                retention: crate::mcts::Retention::Fresh,
                q_injection: true,
                ..MctsConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScoreSeries {
    /// (iteration, rating of that iteration's networks, rating of the
    /// previous iteration's networks after their sequential match).
    pub elo: Vec<(usize, f64, f64)>,
    /// (iteration, Proponent mass of that iteration's checkpoint in the
    /// ranking over the cumulative payoff table).
    pub alpharank: Vec<(usize, f64)>,
    pub payoff: PayoffTable,
}

/// Load `iter_*.ckpt` files in order.
pub fn load_checkpoints(run_dir: &Path) -> Result<Vec<(usize, NetworkSet)>, ScoreError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(run_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "ckpt")
                && p.file_stem()
                    .and_then(|s| s.to_str())
                    .is_some_and(|s| s.starts_with("iter_"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(ScoreError::NoCheckpoints(run_dir.to_path_buf()));
    }
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let stem = p.file_stem().unwrap().to_str().unwrap();
        let iter: usize = stem
            .trim_start_matches("iter_")
            .parse()
            .map_err(|_| ScoreError::NoCheckpoints(run_dir.to_path_buf()))?;
        out.push((iter, load_params(&p)?));
    }
    Ok(out)
}

/// Score a finished run: a sequential-match Elo series and a ranking series
/// over cumulative payoff tables, both also written as CSV files
/// (`elo.csv`, `alpharank.csv`, `payoff.csv`) into the run directory.
pub fn score_run(
    run_dir: &Path,
    problem: &Problem,
    opts: &ScoreOptions,
) -> Result<ScoreSeries, ScoreError> {
    let checkpoints = load_checkpoints(run_dir)?;
    let nets: Vec<NetworkSet> = checkpoints.iter().map(|(_, n)| n.clone()).collect();
    let iters: Vec<usize> = checkpoints.iter().map(|(i, _)| *i).collect();

    // Elo: each checkpoint inherits its predecessor's rating, then plays a
    // sequential match against it, new networks on the Proponent side first.
    let mut elo = EloState::new(opts.elo_k, opts.elo_initial);
    let mut series = Vec::with_capacity(nets.len());
    elo.add(&name(iters[0]), None);
    series.push((iters[0], opts.elo_initial, opts.elo_initial));
    for t in 1..nets.len() {
        let new_id = name(iters[t]);
        let prev_id = name(iters[t - 1]);
        let start = elo.rating(&prev_id)?;
        elo.add(&new_id, Some(start));
        // Arena-rule play (argmax), one game per side alternately so the
        // sequential updates stay balanced; a decisive sweep still shows up
        // as a sharp rating jump.
        let mut new_p = MctsAgent::new(&nets[t], opts.mcts);
        let mut prev_o = MctsAgent::new(&nets[t - 1], opts.mcts);
        let mut prev_p = MctsAgent::new(&nets[t - 1], opts.mcts);
        let mut new_o = MctsAgent::new(&nets[t], opts.mcts);
        for _ in 0..opts.elo_games {
            let outcome = payoff_cell(problem, &mut new_p, &mut prev_o, 1)?;
            elo.update(&new_id, &prev_id, win_share(outcome))?;
            let outcome = payoff_cell(problem, &mut prev_p, &mut new_o, 1)?;
            elo.update(&new_id, &prev_id, win_share(-outcome))?;
        }
        series.push((iters[t], elo.rating(&new_id)?, elo.rating(&prev_id)?));
    }

    // Ranking over cumulative payoff tables.
    let payoff = build_payoff_table(
        &nets,
        problem,
        opts.mcts,
        opts.games_per_pair,
        opts.threads,
        opts.seed,
    )?;
    let mut alpharank = Vec::with_capacity(nets.len());
    for (t, &iter) in iters.iter().enumerate() {
        let result = alpha_rank_auto(&payoff.prefix(t + 1), opts.population)?;
        alpharank.push((iter, result.proponent_mass[t]));
    }

    let out = ScoreSeries {
        elo: series,
        alpharank,
        payoff,
    };
    write_csvs(run_dir, &iters, &out)?;
    Ok(out)
}

fn name(iter: usize) -> String {
    format!("iter_{iter:03}")
}

fn win_share(outcome: f64) -> f64 {
    // Semantic games have no draws; map the +-1 outcome to 1/0.
    if outcome > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn write_csvs(dir: &Path, iters: &[usize], series: &ScoreSeries) -> Result<(), ScoreError> {
    let mut f = File::create(dir.join("elo.csv"))?;
    writeln!(f, "iter,rating_new,rating_prev")?;
    for (iter, new, prev) in &series.elo {
        writeln!(f, "{iter},{new:.3},{prev:.3}")?;
    }

    let mut f = File::create(dir.join("alpharank.csv"))?;
    writeln!(f, "iter,score")?;
    for (iter, score) in &series.alpharank {
        writeln!(f, "{iter},{score:.6}")?;
    }

    let mut f = File::create(dir.join("payoff.csv"))?;
    writeln!(f, "i,j,mean_outcome,games")?;
    for (a, &i) in iters.iter().enumerate() {
        for (b, &j) in iters.iter().enumerate() {
            writeln!(
                f,
                "{i},{j},{:.4},{}",
                series.payoff.get(a, b),
                series.payoff.games_per_pair
            )?;
        }
    }
    Ok(())
}
