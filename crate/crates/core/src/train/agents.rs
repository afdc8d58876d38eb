//! Move-selection agents used by self-play, the arena, and the CLI play
//! command.

use super::TrainError;
use crate::fol::Problem;
use crate::mcts::{Mcts, MctsConfig, NetEvaluator};
use crate::nn::NetworkSet;
use crate::semgame::{
    self, apply, initial_state, is_terminal, legal_action_count, BruteForce, GameState, Move,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Something that can play a semantic game move by move. Agents observe
/// every move (their own included) so stateful searches stay rooted at the
/// current position.
pub trait Agent {
    fn begin_game(&mut self, problem: &Problem, state: &GameState) -> Result<(), TrainError>;
    fn choose_move(&mut self, problem: &Problem, state: &GameState) -> Result<Move, TrainError>;
    fn observe_move(&mut self, problem: &Problem, mv: Move) -> Result<(), TrainError>;
}

/// Search-backed agent: runs a simulation session and plays from the
/// empirical policy, either its argmax (deterministic; the arena rule) or a
/// temperature-1 sample from a seeded generator.
pub struct MctsAgent<'a> {
    eval: NetEvaluator<'a>,
    cfg: MctsConfig,
    tree: Option<Mcts>,
    sampler: Option<ChaCha8Rng>,
}

impl<'a> MctsAgent<'a> {
    pub fn new(nets: &'a NetworkSet, cfg: MctsConfig) -> Self {
        MctsAgent {
            eval: NetEvaluator::new(nets),
            cfg,
            tree: None,
            sampler: None,
        }
    }

    /// Sample moves from the empirical policy instead of playing its argmax.
    pub fn sampling(nets: &'a NetworkSet, cfg: MctsConfig, seed: u64) -> Self {
        MctsAgent {
            eval: NetEvaluator::new(nets),
            cfg,
            tree: None,
            sampler: Some(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

impl Agent for MctsAgent<'_> {
    fn begin_game(&mut self, problem: &Problem, state: &GameState) -> Result<(), TrainError> {
        match self.tree.as_mut() {
            // Re-rooting keeps accumulated statistics under KeepCounts.
            Some(tree) => tree.reroot(problem, state.clone())?,
            None => self.tree = Some(Mcts::new(problem, state.clone(), self.cfg)?),
        }
        Ok(())
    }

    fn choose_move(&mut self, problem: &Problem, _state: &GameState) -> Result<Move, TrainError> {
        let tree = self.tree.as_mut().expect("begin_game precedes moves");
        tree.run_simulations(problem, &mut self.eval)?;
        let pi = tree.root_policy()?;
        Ok(match self.sampler.as_mut() {
            None => argmax(&pi),
            Some(rng) => sample_from(&pi, rng),
        })
    }

    fn observe_move(&mut self, problem: &Problem, mv: Move) -> Result<(), TrainError> {
        let tree = self.tree.as_mut().expect("begin_game precedes moves");
        tree.advance_root(problem, mv)?;
        Ok(())
    }
}

fn sample_from(pi: &[f64], rng: &mut ChaCha8Rng) -> usize {
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

/// Uniform random play; a weak baseline for arena sanity checks.
pub struct RandomAgent {
    pub rng: ChaCha8Rng,
}

impl Agent for RandomAgent {
    fn begin_game(&mut self, _problem: &Problem, _state: &GameState) -> Result<(), TrainError> {
        Ok(())
    }

    fn choose_move(&mut self, problem: &Problem, state: &GameState) -> Result<Move, TrainError> {
        let legal = legal_action_count(problem, state)?;
        Ok(self.rng.gen_range(0..legal))
    }

    fn observe_move(&mut self, _problem: &Problem, _mv: Move) -> Result<(), TrainError> {
        Ok(())
    }
}

/// Perfect play via exhaustive search: picks the lowest-index move with the
/// best exact value.
pub struct OracleAgent {
    oracle: BruteForce,
}

impl OracleAgent {
    pub fn new(cap: usize) -> Self {
        OracleAgent {
            oracle: BruteForce::new(cap),
        }
    }
}

impl Default for OracleAgent {
    fn default() -> Self {
        OracleAgent::new(4_000_000)
    }
}

impl Agent for OracleAgent {
    fn begin_game(&mut self, _problem: &Problem, _state: &GameState) -> Result<(), TrainError> {
        Ok(())
    }

    fn choose_move(&mut self, problem: &Problem, state: &GameState) -> Result<Move, TrainError> {
        let mover = semgame::player_to_move(problem, state)?;
        let mut best = (i8::MIN, 0usize);
        for mv in 0..legal_action_count(problem, state)? {
            let child = apply(problem, state, mv)?;
            let v = self.oracle.value_for(problem, &child, mover)?;
            if v > best.0 {
                best = (v, mv);
            }
        }
        Ok(best.1)
    }

    fn observe_move(&mut self, _problem: &Problem, _mv: Move) -> Result<(), TrainError> {
        Ok(())
    }
}

/// Play one game from the initial state; returns the move list.
pub fn play_game(
    problem: &Problem,
    player0: &mut dyn Agent,
    player1: &mut dyn Agent,
) -> Result<Vec<Move>, TrainError> {
    let mut state = initial_state(problem)?;
    player0.begin_game(problem, &state)?;
    player1.begin_game(problem, &state)?;
    let mut moves = Vec::new();
    while !is_terminal(&state) {
        let mover = semgame::player_to_move(problem, &state)?;
        let mv = match mover {
            semgame::Player::Player0 => player0.choose_move(problem, &state)?,
            semgame::Player::Player1 => player1.choose_move(problem, &state)?,
        };
        player0.observe_move(problem, mv)?;
        player1.observe_move(problem, mv)?;
        state = apply(problem, &state, mv)?;
        moves.push(mv);
    }
    Ok(moves)
}

/// Lowest index wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}
