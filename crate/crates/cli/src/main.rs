//! Command-line front end: train runs, oracle queries, run scoring, a
//! text-mode human-play loop, and checkpoint evaluation.

mod config;

use clap::{Parser, Subcommand};
use folzero::hsr::{
    self, brute_force_truth, fault_check, hsr_problem, n_max, opponent_correct, proponent_correct,
    Correctness, HsrInstance, OpBranch,
};
use folzero::mcts::MctsConfig;
use folzero::nn::load_params;
use folzero::score::{score_run, ScoreOptions};
use folzero::semgame::{
    self, apply, initial_state, is_terminal, legal_action_count, move_value, outcome_for,
    player_to_move, Player,
};
use folzero::train::{arena, play_game, run_experiment, Agent, MctsAgent};
use folzero::Problem;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments; exit code 2.
    Config(String),
    /// Failure while executing; exit code 3.
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Runtime(msg) => f.write_str(msg),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "folzero",
    about = "Compile first-order-logic problems into two-player semantic games and learn strategies by neural MCTS self-play",
    version
)]
struct Cli {
    /// Random seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent jobs (payoff-table cells).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a training experiment from a TOML configuration file.
    Train { config: PathBuf },
    /// Print ground-truth verdicts for a benchmark instance.
    Oracle {
        k: i64,
        q: i64,
        n: i64,
        /// Optional rung pick to classify.
        m: Option<i64>,
    },
    /// Score a finished run directory (Elo and evolutionary ranking).
    Score {
        run_dir: PathBuf,
        /// Games per checkpoint pair in the payoff table.
        #[arg(long, default_value_t = 4)]
        games: usize,
    },
    /// Play against a checkpoint in the terminal.
    Play {
        checkpoint: PathBuf,
        /// Benchmark instance to play, as `k q n`.
        #[arg(long, num_args = 3, value_names = ["K", "Q", "N"])]
        hsr: Vec<i64>,
        /// Side for the human: the Proponent (P) defends truth.
        #[arg(long, default_value = "P")]
        role: String,
        /// Search simulations per agent move.
        #[arg(long, default_value_t = 25)]
        simulations: usize,
    },
    /// Fault-counted evaluation matches between two checkpoints (or a
    /// checkpoint against itself).
    Eval {
        checkpoint: PathBuf,
        opponent: Option<PathBuf>,
        /// Benchmark instance, as `k q n`.
        #[arg(long, num_args = 3, value_names = ["K", "Q", "N"])]
        hsr: Vec<i64>,
        /// Games per role assignment.
        #[arg(long, default_value_t = 20)]
        games: usize,
        /// Search simulations per move.
        #[arg(long, default_value_t = 25)]
        simulations: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            3
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config } => cmd_train(&config, cli.seed, cli.out),
        Command::Oracle { k, q, n, m } => cmd_oracle(k, q, n, m),
        Command::Score { run_dir, games } => cmd_score(&run_dir, games, cli.threads),
        Command::Play {
            checkpoint,
            hsr,
            role,
            simulations,
        } => cmd_play(&checkpoint, &hsr, &role, simulations),
        Command::Eval {
            checkpoint,
            opponent,
            hsr,
            games,
            simulations,
        } => cmd_eval(&checkpoint, opponent.as_deref(), &hsr, games, simulations),
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn cmd_train(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let file = config::load_config(path)?;
    let run = config::resolve(file, seed, out)?;
    if let Some(dir) = &run.options.out_dir {
        config::echo_config(&run.effective, dir)?;
    }
    let result = run_experiment(&run.config, &run.problem, &run.options).map_err(|e| match e {
        folzero::train::TrainError::NoFaultOracle => CliError::Config(e.to_string()),
        other => runtime(other),
    })?;
    for report in &result.reports {
        let (pl, vl) = report.final_losses();
        println!(
            "iter {:3}  faults new P/OP {}/{}  old P/OP {}/{}  policy_loss {:.4}  value_loss {:.4}  {:.1}s",
            report.iteration,
            report.faults.new_as_proponent,
            report.faults.new_as_opponent,
            report.faults.old_as_proponent,
            report.faults.old_as_opponent,
            pl,
            vl,
            report.seconds
        );
    }
    println!(
        "{} after {} iterations",
        if result.converged {
            "converged"
        } else {
            "stopped"
        },
        result.reports.len()
    );
    Ok(())
}

fn cmd_oracle(k: i64, q: i64, n: i64, m: Option<i64>) -> Result<(), CliError> {
    let inst = HsrInstance::new(k, q, n).map_err(|e| CliError::Config(e.to_string()))?;
    let closed = hsr::hsr_truth(k, q, n);
    let brute = brute_force_truth(&inst, 8_000_000)
        .map_err(|e| CliError::Runtime(format!("brute force: {e}")))?;
    let verdict = if closed == brute {
        if closed {
            "true"
        } else {
            "false"
        }
    } else {
        "DISAGREEMENT"
    };
    println!(
        "HSR({k},{q},{n}): {verdict} (closed form {closed}, brute force {brute}); N({k},{q})={}",
        n_max(k, q)
    );
    print!("n_max row (q'=0..{}):", q.min(16));
    for q2 in 0..=q.min(16) {
        print!(" {}", n_max(k, q2));
    }
    println!();
    if let Some(m) = m {
        if !(1..n).contains(&m) {
            return Err(CliError::Config(format!(
                "m={m} is outside the legal range [1, {n})"
            )));
        }
        let verdict = proponent_correct(k, q, n, m);
        println!("Proponent m={m}: {}", verdict_str(verdict));
        for (branch, label) in [
            (OpBranch::Break, "break"),
            (OpBranch::NotBreak, "not-break"),
        ] {
            let verdict = opponent_correct(k, q, n, m, branch);
            println!("Opponent {label} after m={m}: {}", verdict_str(verdict));
        }
    }
    Ok(())
}

fn verdict_str(c: Correctness) -> &'static str {
    match c {
        Correctness::Correct => "Correct",
        Correctness::Fault => "Fault",
        Correctness::NoCorrectActionExists => "NoCorrectActionExists",
    }
}

fn cmd_score(run_dir: &Path, games: usize, threads: usize) -> Result<(), CliError> {
    let config_path = run_dir.join("config.toml");
    if !config_path.exists() {
        return Err(CliError::Config(format!(
            "{} has no config.toml; score needs the echoed run configuration",
            run_dir.display()
        )));
    }
    let file = config::load_config(&config_path)?;
    let run = config::resolve(file, None, None)?;
    let defaults = ScoreOptions::default();
    let opts = ScoreOptions {
        games_per_pair: games,
        threads,
        mcts: MctsConfig {
            num_simulations: run.config.hp.simulations,
            c_puct: run.config.hp.c_puct,
            ..defaults.mcts
        },
        ..defaults
    };
    let series = score_run(run_dir, &run.problem, &opts).map_err(runtime)?;
    for ((iter, rating, prev), (_, score)) in series.elo.iter().zip(&series.alpharank) {
        println!("iter {iter:3}  elo {rating:7.1} (prev {prev:7.1})  score {score:.4}");
    }
    println!(
        "wrote elo.csv, alpharank.csv, payoff.csv to {}",
        run_dir.display()
    );
    Ok(())
}

fn parse_hsr_triple(hsr: &[i64]) -> Result<Problem, CliError> {
    if hsr.len() != 3 {
        return Err(CliError::Config(
            "expected --hsr K Q N to pick the instance".to_string(),
        ));
    }
    let inst =
        HsrInstance::new(hsr[0], hsr[1], hsr[2]).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(hsr_problem(&inst))
}

fn cmd_play(
    checkpoint: &Path,
    hsr_args: &[i64],
    role: &str,
    simulations: usize,
) -> Result<(), CliError> {
    let problem = parse_hsr_triple(hsr_args)?;
    let nets = load_params(checkpoint).map_err(runtime)?;
    let human = match role.to_ascii_uppercase().as_str() {
        "P" | "PROPONENT" => Player::Player0,
        "OP" | "OPPONENT" => Player::Player1,
        other => {
            return Err(CliError::Config(format!(
                "role must be P or OP, got `{other}`"
            )))
        }
    };
    let mcts_cfg = MctsConfig {
        num_simulations: simulations,
        q_injection: true,
        ..MctsConfig::default()
    };
    let mut agent = MctsAgent::new(&nets, mcts_cfg);
    let mut state = initial_state(&problem).map_err(runtime)?;
    agent.begin_game(&problem, &state).map_err(runtime)?;

    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    let mut moves = Vec::new();
    while !is_terminal(&state) {
        let mover = player_to_move(&problem, &state).map_err(runtime)?;
        print_position(&problem, &state)?;
        let mv = if mover == human {
            prompt_move(&problem, &state, &mut lines)?
        } else {
            let mv = agent.choose_move(&problem, &state).map_err(runtime)?;
            println!(
                "agent plays move {mv} ({})",
                describe_move(&problem, &state, mv)?
            );
            mv
        };
        agent.observe_move(&problem, mv).map_err(runtime)?;
        state = apply(&problem, &state, mv).map_err(runtime)?;
        moves.push(mv);
    }

    let human_outcome = outcome_for(&state, human).map_err(runtime)?;
    println!(
        "game over: you {}",
        if human_outcome.0 > 0 { "win" } else { "lose" }
    );
    let record = fault_check(&problem, &moves).map_err(runtime)?;
    println!(
        "faults: you {}, agent {}",
        record.faults_for(human),
        record.faults_for(human.other())
    );
    for note in &record.annotations {
        println!(
            "  step {}: {:?} {:?} -> {}{}",
            note.step,
            note.player,
            note.kind,
            verdict_str(note.classification),
            if note.forced_loss { " (forced)" } else { "" }
        );
    }
    Ok(())
}

fn print_position(problem: &Problem, state: &semgame::GameState) -> Result<(), CliError> {
    let pred = &problem.preds[state.pred_id()];
    let legal = legal_action_count(problem, state).map_err(runtime)?;
    let mover = player_to_move(problem, state).map_err(runtime)?;
    println!(
        "\nposition: {}({}), {} to move ({} moves)",
        pred.name,
        state
            .params()
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(","),
        match mover {
            Player::Player0 => "Player0",
            Player::Player1 => "Player1",
        },
        legal
    );
    Ok(())
}

fn describe_move(
    problem: &Problem,
    state: &semgame::GameState,
    mv: usize,
) -> Result<String, CliError> {
    let value = move_value(problem, state, mv).map_err(runtime)?;
    let node = semgame::current_node(problem, state).expect("non-terminal");
    Ok(match &node.kind {
        folzero::fol::FormulaKind::Exists { var, .. }
        | folzero::fol::FormulaKind::ForAll { var, .. } => format!("{var} = {value}"),
        _ => {
            if mv == 0 {
                "left branch".to_string()
            } else {
                "right branch".to_string()
            }
        }
    })
}

fn prompt_move(
    problem: &Problem,
    state: &semgame::GameState,
    lines: &mut impl Iterator<Item = std::io::Result<String>>,
) -> Result<usize, CliError> {
    let legal = legal_action_count(problem, state).map_err(runtime)?;
    for mv in 0..legal {
        println!("  {mv}: {}", describe_move(problem, state, mv)?);
    }
    loop {
        print!("your move index> ");
        std::io::stdout().flush().ok();
        let line = match lines.next() {
            Some(Ok(line)) => line,
            Some(Err(e)) => return Err(runtime(e)),
            None => return Err(CliError::Runtime("input closed mid-game".to_string())),
        };
        match line.trim().parse::<usize>() {
            Ok(mv) if mv < legal => return Ok(mv),
            _ => println!("invalid move; enter an index in 0..{legal}"),
        }
    }
}

fn cmd_eval(
    checkpoint: &Path,
    opponent: Option<&std::path::Path>,
    hsr_args: &[i64],
    games: usize,
    simulations: usize,
) -> Result<(), CliError> {
    let problem = parse_hsr_triple(hsr_args)?;
    let nets = load_params(checkpoint).map_err(runtime)?;
    let other = match opponent {
        Some(path) => load_params(path).map_err(runtime)?,
        None => nets.clone(),
    };
    let mut cfg = folzero::train::ExperimentConfig::new(folzero::train::ExperimentName::CeQSep);
    cfg.hp.arena_games = games;
    cfg.hp.simulations = simulations;
    let faults = arena(&nets, &other, &problem, &cfg).map_err(runtime)?;
    println!(
        "faults over {games} games per side: first P {}, first OP {}, second P {}, second OP {}",
        faults.new_as_proponent,
        faults.new_as_opponent,
        faults.old_as_proponent,
        faults.old_as_opponent
    );

    // One illustrative game with move annotations.
    let mcts_cfg = MctsConfig {
        num_simulations: simulations,
        q_injection: true,
        ..MctsConfig::default()
    };
    let mut a = MctsAgent::new(&nets, mcts_cfg);
    let mut b = MctsAgent::new(&other, mcts_cfg);
    let moves = play_game(&problem, &mut a, &mut b).map_err(runtime)?;
    let record = fault_check(&problem, &moves).map_err(runtime)?;
    println!(
        "sample game: {} moves, faults {:?}",
        moves.len(),
        record.faults
    );
    Ok(())
}
