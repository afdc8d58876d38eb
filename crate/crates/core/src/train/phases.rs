//! The per-iteration phases and the outer experiment loop.

use super::agents::MctsAgent;
use super::*;
use crate::hsr::fault_check;
use crate::mcts::{Mcts, NetEvaluator};
use crate::nn::{advantage, save_params, AdvantageNext, NetworkSet, PolicyLoss, TrainRow};
use crate::semgame::{
    apply, encode_scaled, initial_state, is_terminal, outcome_for, player_to_move, state_key,
    Player,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::Write;
use std::time::Instant;

/// Generate one iteration's worth of self-play games. Moves are sampled
/// from the empirical policy at temperature 1; with count retention the
/// search tree survives across moves and games of the whole phase.
pub fn self_play_phase(
    nets: &NetworkSet,
    problem: &Problem,
    cfg: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Trajectory>, TrainError> {
    let mut eval = NetEvaluator::new(nets);
    let mcts_cfg = cfg.mcts_config();
    let action_dim = nets.config.action_dim;
    let mut tree: Option<Mcts> = None;
    let mut trajectories = Vec::with_capacity(cfg.hp.self_plays);

    for _ in 0..cfg.hp.self_plays {
        let mut state = initial_state(problem)?;
        match tree.as_mut() {
            Some(t) => t.reroot(problem, state.clone())?,
            None => tree = Some(Mcts::new(problem, state.clone(), mcts_cfg)?),
        }
        let tree = tree.as_mut().expect("created above");

        let mut steps = Vec::new();
        let mut moves = Vec::new();
        while !is_terminal(&state) {
            tree.run_simulations(problem, &mut eval)?;
            let pi = tree.root_policy()?;
            let mv = sample_index(&pi, rng);
            let player = player_to_move(problem, &state)?;
            let legal = pi.len();
            let mut mask = vec![false; action_dim];
            let mut pi_hat = vec![0.0; action_dim];
            for a in 0..legal {
                mask[a] = true;
                pi_hat[a] = pi[a];
            }
            steps.push(Step {
                key: state_key(problem, &state),
                x: encode_scaled(problem, &state),
                mask,
                pi_hat,
                player,
                mv,
                behavior_prob: pi[mv],
                z: 0.0,
            });
            moves.push(mv);
            tree.advance_root(problem, mv)?;
            state = apply(problem, &state, mv)?;
        }

        let outcome_p0 = outcome_for(&state, Player::Player0)?.0;
        for step in steps.iter_mut() {
            step.z = match step.player {
                Player::Player0 => outcome_p0 as f64,
                Player::Player1 => -outcome_p0 as f64,
            };
        }
        trajectories.push(Trajectory {
            steps,
            moves,
            outcome_p0,
        });
    }
    Ok(trajectories)
}

fn sample_index(pi: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in pi.iter().enumerate() {
        acc += p;
        if r < acc {
            return i;
        }
    }
    pi.len() - 1
}

/// Train the networks on the whole buffer: shuffled mini-batches, the
/// configured policy loss (PPO advantages recomputed from the current value
/// network at use time), and the mean-squared value loss. Returns mean
/// (policy, value) losses per epoch.
pub fn train_phase(
    buffer: &ReplayBuffer,
    nets: &mut NetworkSet,
    cfg: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(f64, f64)>, TrainError> {
    let samples = buffer.samples();
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let loss_kind = cfg.policy_loss();
    let needs_advantage = !matches!(loss_kind, PolicyLoss::Cem);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.hp.epochs);

    for _ in 0..cfg.hp.epochs {
        order.shuffle(rng);
        let mut policy_sum = 0.0;
        let mut value_sum = 0.0;
        let mut rows_seen = 0usize;
        for chunk in order.chunks(cfg.hp.batch_size) {
            let rows: Vec<TrainRow> = chunk
                .iter()
                .map(|&i| {
                    let s = &samples[i];
                    let adv = if needs_advantage {
                        let v_state = nets.value(s.player, &s.x);
                        match &s.next {
                            SampleNext::Terminal => {
                                advantage(v_state, AdvantageNext::Terminal { reward: s.z }, true)
                            }
                            SampleNext::Continues { x, player } => {
                                let v_next = nets.value(*player, x);
                                advantage(
                                    v_state,
                                    AdvantageNext::Estimate { v_next },
                                    *player == s.player,
                                )
                            }
                        }
                    } else {
                        0.0
                    };
                    TrainRow {
                        x: s.x.clone(),
                        mask: s.mask.clone(),
                        target_pi: s.pi_hat.clone(),
                        player: s.player,
                        action: s.mv,
                        behavior_prob: s.behavior_prob,
                        z: s.z,
                        advantage: adv,
                    }
                })
                .collect();
            let (pl, vl) = nets.train_batch(&rows, loss_kind, cfg.hp.learning_rate)?;
            policy_sum += pl * rows.len() as f64;
            value_sum += vl * rows.len() as f64;
            rows_seen += rows.len();
        }
        epoch_losses.push((policy_sum / rows_seen as f64, value_sum / rows_seen as f64));
    }
    Ok(epoch_losses)
}

/// Evaluation matches: `games` per role assignment, argmax play, faults
/// counted by the benchmark oracles. Deterministic given the networks.
pub fn arena(
    new_nets: &NetworkSet,
    old_nets: &NetworkSet,
    problem: &Problem,
    cfg: &ExperimentConfig,
) -> Result<ArenaFaults, TrainError> {
    let mcts_cfg = cfg.mcts_config();
    let games = cfg.hp.arena_games;
    let mut faults = ArenaFaults::default();

    // New networks on the Proponent side (Player0).
    {
        let mut new_agent = MctsAgent::new(new_nets, mcts_cfg);
        let mut old_agent = MctsAgent::new(old_nets, mcts_cfg);
        for _ in 0..games {
            let moves = play_game(problem, &mut new_agent, &mut old_agent)?;
            let record = fault_check(problem, &moves)?;
            faults.new_as_proponent += record.faults_for(Player::Player0);
            faults.old_as_opponent += record.faults_for(Player::Player1);
        }
    }
    // Roles swapped.
    {
        let mut old_agent = MctsAgent::new(old_nets, mcts_cfg);
        let mut new_agent = MctsAgent::new(new_nets, mcts_cfg);
        for _ in 0..games {
            let moves = play_game(problem, &mut old_agent, &mut new_agent)?;
            let record = fault_check(problem, &moves)?;
            faults.old_as_proponent += record.faults_for(Player::Player0);
            faults.new_as_opponent += record.faults_for(Player::Player1);
        }
    }
    Ok(faults)
}

/// The full loop: self-play, buffer push, training, arena, report,
/// checkpoint; stops at convergence or `max_iters`. Wall time is read from
/// the ambient clock.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    problem: &Problem,
    opts: &RunOptions,
) -> Result<RunResult, TrainError> {
    let start = Instant::now();
    run_experiment_with_clock(cfg, problem, opts, &mut || start.elapsed().as_secs_f64())
}

/// Same loop with an injectable clock so runs can be compared byte for
/// byte.
pub fn run_experiment_with_clock(
    cfg: &ExperimentConfig,
    problem: &Problem,
    opts: &RunOptions,
    clock: &mut dyn FnMut() -> f64,
) -> Result<RunResult, TrainError> {
    // Fail fast: the arena counts faults, so the loop only runs on
    // problems the correctness oracles understand.
    if opts.max_iters > 0 && crate::hsr::instance_of(problem).is_err() {
        return Err(TrainError::NoFaultOracle);
    }
    let net_config = cfg.net_config(problem, opts.seed)?;
    let mut nets = NetworkSet::init(net_config);
    let mut buffer = ReplayBuffer::new(cfg.hp.buffer_iterations);
    let mut master = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut reports: Vec<IterationReport> = Vec::new();
    let mut checkpoints = Vec::new();

    let mut metrics_csv = match &opts.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut f = File::create(dir.join("metrics.csv"))?;
            writeln!(
                f,
                "iter,faults_newP,faults_newOP,faults_oldP,faults_oldOP,policy_loss,value_loss,seconds"
            )?;
            Some(f)
        }
        None => None,
    };
    let mut metrics_jsonl = match &opts.out_dir {
        Some(dir) => Some(File::create(dir.join("metrics.jsonl"))?),
        None => None,
    };

    for iteration in 1..=opts.max_iters {
        let iter_start = clock();
        let mut selfplay_rng = ChaCha8Rng::seed_from_u64(master.gen());
        let mut train_rng = ChaCha8Rng::seed_from_u64(master.gen());

        let trajectories = self_play_phase(&nets, problem, cfg, &mut selfplay_rng)?;
        buffer.push_iteration(trajectories);

        let old_nets = nets.clone();
        let epoch_losses = train_phase(&buffer, &mut nets, cfg, &mut train_rng)?;
        let faults = arena(&nets, &old_nets, problem, cfg)?;

        let report = IterationReport {
            iteration,
            faults,
            epoch_losses,
            seconds: clock() - iter_start,
        };
        let (policy_loss, value_loss) = report.final_losses();
        if let Some(f) = metrics_csv.as_mut() {
            writeln!(
                f,
                "{},{},{},{},{},{:.6},{:.6},{:.3}",
                iteration,
                faults.new_as_proponent,
                faults.new_as_opponent,
                faults.old_as_proponent,
                faults.old_as_opponent,
                policy_loss,
                value_loss,
                report.seconds
            )?;
        }
        if let Some(f) = metrics_jsonl.as_mut() {
            writeln!(
                f,
                "{{\"iter\":{},\"faults_newP\":{},\"faults_newOP\":{},\"faults_oldP\":{},\"faults_oldOP\":{},\"policy_loss\":{:.6},\"value_loss\":{:.6},\"seconds\":{:.3}}}",
                iteration,
                faults.new_as_proponent,
                faults.new_as_opponent,
                faults.old_as_proponent,
                faults.old_as_opponent,
                policy_loss,
                value_loss,
                report.seconds
            )?;
        }
        if let Some(dir) = &opts.out_dir {
            let path = dir.join(format!("iter_{iteration:03}.ckpt"));
            save_params(&nets, &path)?;
            checkpoints.push(path);
        }
        reports.push(report);

        if check_convergence(&reports, cfg.hp.convergence_window) {
            break;
        }
    }

    let converged = check_convergence(&reports, cfg.hp.convergence_window);
    Ok(RunResult {
        reports,
        converged,
        checkpoints,
        final_nets: nets,
    })
}
