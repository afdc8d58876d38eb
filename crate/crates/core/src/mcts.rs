//! Neural Monte Carlo tree search over semantic games.
//!
//! Each simulation runs four phases: select a path by the upper confidence
//! rule, fully expand the reached leaf, estimate every child with the value
//! network (exact outcomes at terminals), and back the leaf estimate up the
//! path as an incremental mean. Two warm-start mechanisms are available:
//! keeping visit counts across simulation sessions instead of rebuilding the
//! tree each move, and seeding expanded actions' Q values from the child
//! estimates instead of zero.
//!
//! The tree is a transposition table keyed by the raw state encoding plus
//! polarity, so identical positions reached along different paths share
//! statistics. One worker owns a tree at a time.

use crate::fol::Problem;
use crate::nn::NetworkSet;
use crate::semgame::{
    apply, encode_scaled, is_terminal, legal_action_count, outcome_for, player_to_move, state_key,
    BruteForce, GameError, GameState, Move, Player, StateKey,
};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MctsError {
    #[error("game error: {0}")]
    Game(#[from] GameError),
    #[error("state is not expanded")]
    NotExpanded,
    #[error("root state is unknown to the tree")]
    MissingRoot,
}

/// What survives between simulation sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retention {
    /// Rebuild the tree from scratch at every new root.
    Fresh,
    /// Keep all node statistics and reuse them.
    KeepCounts,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MctsConfig {
    pub num_simulations: usize,
    pub c_puct: f64,
    pub q_injection: bool,
    pub retention: Retention,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig {
            num_simulations: 25,
            c_puct: 1.0,
            q_injection: false,
            retention: Retention::KeepCounts,
        }
    }
}

/// Source of priors and value estimates for the search.
pub trait Evaluator {
    /// Prior distribution over the `legal` action indices of `state`.
    fn priors(
        &mut self,
        problem: &Problem,
        state: &GameState,
        legal: usize,
    ) -> Result<Vec<f64>, MctsError>;

    /// Value estimate for a non-terminal `state` from its mover's
    /// perspective, in [-1, 1].
    fn value(&mut self, problem: &Problem, state: &GameState) -> Result<f64, MctsError>;
}

/// Per-node statistics: one slot per legal action.
#[derive(Debug, Clone)]
struct Node {
    state: GameState,
    mover: Option<Player>,
    expanded: bool,
    n: Vec<u32>,
    q: Vec<f64>,
    prior: Vec<f64>,
    children: Vec<StateKey>,
}

impl Node {
    fn new(problem: &Problem, state: GameState) -> Result<Node, GameError> {
        let (mover, actions) = if is_terminal(&state) {
            (None, 0)
        } else {
            (
                Some(player_to_move(problem, &state)?),
                legal_action_count(problem, &state)?,
            )
        };
        Ok(Node {
            state,
            mover,
            expanded: false,
            n: vec![0; actions],
            q: vec![0.0; actions],
            prior: vec![0.0; actions],
            children: Vec::new(),
        })
    }

    fn visit_sum(&self) -> u32 {
        self.n.iter().sum()
    }
}

/// One simulation's audit record: the selected path, the reached leaf, and
/// the value (from Player0's perspective) that was backed up.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub sim: u64,
    pub path: Vec<(StateKey, Move)>,
    pub leaf: StateKey,
    pub value_p0: f64,
}

impl SimulationTrace {
    /// Line-oriented rendering for debug dumps.
    pub fn render(&self) -> String {
        let path: Vec<String> = self
            .path
            .iter()
            .map(|(k, a)| format!("{:?}/{:?}:{a}", k.raw, k.polarity))
            .collect();
        format!(
            "sim={} path=[{}] leaf={:?} value_p0={}",
            self.sim,
            path.join(" "),
            self.leaf.raw,
            self.value_p0
        )
    }
}

/// The search tree plus its root cursor.
pub struct Mcts {
    cfg: MctsConfig,
    nodes: HashMap<StateKey, Node>,
    root: StateKey,
    trace: Option<Vec<SimulationTrace>>,
    sims_run: u64,
}

impl Mcts {
    pub fn new(problem: &Problem, root: GameState, cfg: MctsConfig) -> Result<Mcts, MctsError> {
        let key = state_key(problem, &root);
        let mut nodes = HashMap::new();
        nodes.insert(key.clone(), Node::new(problem, root)?);
        Ok(Mcts {
            cfg,
            nodes,
            root: key,
            trace: None,
            sims_run: 0,
        })
    }

    pub fn config(&self) -> &MctsConfig {
        &self.cfg
    }

    pub fn root_key(&self) -> &StateKey {
        &self.root
    }

    pub fn root_state(&self) -> &GameState {
        &self.nodes[&self.root].state
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Record one entry per simulation for debugging; fetch with
    /// [`Mcts::take_trace`] or [`Mcts::take_trace_records`].
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    /// Drain the trace as line-delimited text.
    pub fn take_trace(&mut self) -> Vec<String> {
        self.take_trace_records()
            .iter()
            .map(SimulationTrace::render)
            .collect()
    }

    /// Drain the trace as structured records.
    pub fn take_trace_records(&mut self) -> Vec<SimulationTrace> {
        self.trace.take().unwrap_or_default()
    }

    /// Point the tree at a new root position. With `KeepCounts` all existing
    /// statistics stay alive; with `Fresh` the tree is discarded.
    pub fn reroot(&mut self, problem: &Problem, state: GameState) -> Result<(), MctsError> {
        let key = state_key(problem, &state);
        if self.cfg.retention == Retention::Fresh {
            self.nodes.clear();
        }
        if !self.nodes.contains_key(&key) {
            self.nodes.insert(key.clone(), Node::new(problem, state)?);
        }
        self.root = key;
        Ok(())
    }

    /// Advance the root along a legal move.
    pub fn advance_root(&mut self, problem: &Problem, mv: Move) -> Result<(), MctsError> {
        let root = self.nodes.get(&self.root).ok_or(MctsError::MissingRoot)?;
        let child_state = apply(problem, &root.state, mv)?;
        self.reroot(problem, child_state)
    }

    /// N(s, a) of the root, for inspection.
    pub fn root_visits(&self) -> Vec<u32> {
        self.nodes[&self.root].n.clone()
    }

    /// Run the configured number of select/expand/roll-out/backup
    /// iterations from the root. A terminal root is a no-op.
    pub fn run_simulations(
        &mut self,
        problem: &Problem,
        eval: &mut dyn Evaluator,
    ) -> Result<(), MctsError> {
        for _ in 0..self.cfg.num_simulations {
            self.simulate(problem, eval)?;
        }
        Ok(())
    }

    fn simulate(&mut self, problem: &Problem, eval: &mut dyn Evaluator) -> Result<(), MctsError> {
        self.sims_run += 1;
        let mut path: Vec<(StateKey, usize)> = Vec::new();
        let mut key = self.root.clone();
        loop {
            let node = self.nodes.get(&key).ok_or(MctsError::MissingRoot)?;
            if node.mover.is_none() || !node.expanded {
                break;
            }
            let action = select_action(node, self.cfg.c_puct);
            let child = node.children[action].clone();
            path.push((key, action));
            key = child;
        }

        // Leaf value from Player0's perspective; per-edge conversion happens
        // during backup.
        let leaf = &self.nodes[&key];
        let value_p0 = if leaf.mover.is_none() {
            outcome_for(&leaf.state, Player::Player0)?.0 as f64
        } else {
            self.expand(problem, &key, eval)?
        };

        if let Some(trace) = self.trace.as_mut() {
            trace.push(SimulationTrace {
                sim: self.sims_run,
                path: path.clone(),
                leaf: key.clone(),
                value_p0,
            });
        }

        self.backup(&path, value_p0);
        Ok(())
    }

    /// Create all children of an unexpanded leaf, fill priors, roll out
    /// every child with the evaluator, optionally seed Q from those
    /// estimates, and return the leaf value (best child from the leaf
    /// mover's point of view) converted to Player0's perspective.
    fn expand(
        &mut self,
        problem: &Problem,
        key: &StateKey,
        eval: &mut dyn Evaluator,
    ) -> Result<f64, MctsError> {
        let (state, mover) = {
            let node = &self.nodes[key];
            (node.state.clone(), node.mover.expect("non-terminal leaf"))
        };
        let legal = legal_action_count(problem, &state)?;
        let priors = eval.priors(problem, &state, legal)?;
        debug_assert_eq!(priors.len(), legal);

        let mut children = Vec::with_capacity(legal);
        let mut child_values = Vec::with_capacity(legal);
        for mv in 0..legal {
            let child_state = apply(problem, &state, mv)?;
            let child_key = state_key(problem, &child_state);
            // Roll-out: exact outcome at terminals, value estimate
            // otherwise, always re-expressed for the leaf's mover.
            let v = match player_to_move(problem, &child_state) {
                Err(_) => outcome_for(&child_state, mover)?.0 as f64,
                Ok(child_mover) => {
                    let v_child = eval.value(problem, &child_state)?;
                    if child_mover == mover {
                        v_child
                    } else {
                        -v_child
                    }
                }
            };
            child_values.push(v);
            if !self.nodes.contains_key(&child_key) {
                self.nodes
                    .insert(child_key.clone(), Node::new(problem, child_state)?);
            }
            children.push(child_key);
        }

        let node = self.nodes.get_mut(key).expect("leaf exists");
        node.expanded = true;
        node.prior = priors;
        node.children = children;
        if self.cfg.q_injection {
            node.q.copy_from_slice(&child_values);
        }

        // The mover will take the best continuation; that is the leaf's own
        // roll-out estimate.
        let best = child_values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(if mover == Player::Player0 {
            best
        } else {
            -best
        })
    }

    /// Incremental-mean update along the path, with the value converted to
    /// each step's mover perspective.
    fn backup(&mut self, path: &[(StateKey, usize)], value_p0: f64) {
        for (key, action) in path {
            let node = self.nodes.get_mut(key).expect("path node exists");
            let v = match node.mover.expect("decision node") {
                Player::Player0 => value_p0,
                Player::Player1 => -value_p0,
            };
            node.n[*action] += 1;
            let n = node.n[*action] as f64;
            node.q[*action] += (v - node.q[*action]) / n;
        }
    }

    /// Expand the root if it is still a leaf, so a following session's
    /// simulations all count toward root visits.
    pub fn ensure_root_expanded(
        &mut self,
        problem: &Problem,
        eval: &mut dyn Evaluator,
    ) -> Result<(), MctsError> {
        let root = self.nodes.get(&self.root).ok_or(MctsError::MissingRoot)?;
        if root.mover.is_some() && !root.expanded {
            let key = self.root.clone();
            self.expand(problem, &key, eval)?;
        }
        Ok(())
    }

    /// Visit-derived empirical policy at the root.
    pub fn root_policy(&self) -> Result<Vec<f64>, MctsError> {
        self.policy_at(&self.root)
    }

    /// Visit-derived empirical policy at any expanded state.
    pub fn policy_at(&self, key: &StateKey) -> Result<Vec<f64>, MctsError> {
        let node = self.nodes.get(key).ok_or(MctsError::MissingRoot)?;
        if !node.expanded {
            return Err(MctsError::NotExpanded);
        }
        Ok(empirical_policy_from_counts(&node.n))
    }

    /// Q and N snapshots for inspection.
    pub fn stats_at(&self, key: &StateKey) -> Option<(Vec<u32>, Vec<f64>)> {
        self.nodes.get(key).map(|n| (n.n.clone(), n.q.clone()))
    }
}

/// The empirical policy `(1 + N(s,a)) / (|A| + sum_a' N(s,a'))`.
pub fn empirical_policy_from_counts(n: &[u32]) -> Vec<f64> {
    let total: u64 = n.iter().map(|&v| v as u64).sum();
    let denom = (n.len() as u64 + total) as f64;
    n.iter().map(|&v| (1 + v) as f64 / denom).collect()
}

/// Argmax of the upper-confidence score, lowest index on ties.
fn select_action(node: &Node, c_puct: f64) -> usize {
    let sqrt_total = (node.visit_sum() as f64).sqrt();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for a in 0..node.n.len() {
        let score = node.q[a] + c_puct * node.prior[a] * sqrt_total / (node.n[a] as f64 + 1.0);
        if score > best_score {
            best_score = score;
            best = a;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// evaluators

/// Network-backed evaluator with per-state memoization. The cache is only
/// valid while the parameters are frozen; build a fresh evaluator after any
/// update.
pub struct NetEvaluator<'a> {
    nets: &'a NetworkSet,
    cache: HashMap<StateKey, (Vec<f64>, f64)>,
}

impl<'a> NetEvaluator<'a> {
    pub fn new(nets: &'a NetworkSet) -> Self {
        NetEvaluator {
            nets,
            cache: HashMap::new(),
        }
    }

    fn entry(
        &mut self,
        problem: &Problem,
        state: &GameState,
    ) -> Result<&(Vec<f64>, f64), MctsError> {
        let key = state_key(problem, state);
        if !self.cache.contains_key(&key) {
            let mover = player_to_move(problem, state)?;
            let legal = legal_action_count(problem, state)?;
            let x = encode_scaled(problem, state);
            let action_dim = self.nets.config.action_dim;
            assert!(
                legal <= action_dim,
                "action space bound too small: {legal} > {action_dim}"
            );
            let mut mask = vec![false; action_dim];
            for m in mask.iter_mut().take(legal) {
                *m = true;
            }
            let pi = self
                .nets
                .policy(mover, &x, &mask)
                .expect("mask has legal entries");
            let value = self.nets.value(mover, &x);
            self.cache
                .insert(key.clone(), (pi[..legal].to_vec(), value));
        }
        Ok(&self.cache[&key])
    }
}

impl Evaluator for NetEvaluator<'_> {
    fn priors(
        &mut self,
        problem: &Problem,
        state: &GameState,
        legal: usize,
    ) -> Result<Vec<f64>, MctsError> {
        let (pi, _) = self.entry(problem, state)?;
        debug_assert_eq!(pi.len(), legal);
        let mut pi = pi.clone();
        // Masked softmax already normalizes over the full mask; re-normalize
        // the legal slice defensively against padding drift.
        let sum: f64 = pi.iter().sum();
        if sum > 0.0 {
            for p in pi.iter_mut() {
                *p /= sum;
            }
        }
        Ok(pi)
    }

    fn value(&mut self, problem: &Problem, state: &GameState) -> Result<f64, MctsError> {
        Ok(self.entry(problem, state)?.1)
    }
}

/// Exact-value evaluator: uniform priors and brute-force game values.
/// Useful for isolating search behavior from learning.
pub struct OracleEvaluator {
    oracle: BruteForce,
}

impl OracleEvaluator {
    pub fn new(cap: usize) -> Self {
        OracleEvaluator {
            oracle: BruteForce::new(cap),
        }
    }
}

impl Default for OracleEvaluator {
    fn default() -> Self {
        OracleEvaluator::new(4_000_000)
    }
}

impl Evaluator for OracleEvaluator {
    fn priors(
        &mut self,
        _problem: &Problem,
        _state: &GameState,
        legal: usize,
    ) -> Result<Vec<f64>, MctsError> {
        Ok(vec![1.0 / legal as f64; legal])
    }

    fn value(&mut self, problem: &Problem, state: &GameState) -> Result<f64, MctsError> {
        Ok(self.oracle.value_for_mover(problem, state)? as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hsr::{hsr_problem, proponent_correct, Correctness, HsrInstance};
    use crate::nn::{NetConfig, NetworkSet, PlayerWiring, PvWiring};
    use crate::semgame::initial_state;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hsr(k: i64, q: i64, n: i64) -> Problem {
        hsr_problem(&HsrInstance::new(k, q, n).unwrap())
    }

    fn uniform_cfg(sims: usize) -> MctsConfig {
        MctsConfig {
            num_simulations: sims,
            ..MctsConfig::default()
        }
    }

    /// Zero values, uniform priors.
    struct Flat;

    impl Evaluator for Flat {
        fn priors(
            &mut self,
            _p: &Problem,
            _s: &GameState,
            legal: usize,
        ) -> Result<Vec<f64>, MctsError> {
            Ok(vec![1.0 / legal as f64; legal])
        }

        fn value(&mut self, _p: &Problem, _s: &GameState) -> Result<f64, MctsError> {
            Ok(0.0)
        }
    }

    #[test]
    fn select_breaks_ties_toward_lowest_index() {
        let p = hsr(3, 3, 8);
        let root = initial_state(&p).unwrap();
        let mut mcts = Mcts::new(&p, root, uniform_cfg(1)).unwrap();
        mcts.ensure_root_expanded(&p, &mut Flat).unwrap();
        let node = &mcts.nodes[&mcts.root];
        assert_eq!(select_action(node, 1.0), 0);
    }

    #[test]
    fn exploration_prefers_unvisited_actions() {
        let p = hsr(3, 3, 8);
        let root = initial_state(&p).unwrap();
        let mut mcts = Mcts::new(&p, root, uniform_cfg(1)).unwrap();
        mcts.ensure_root_expanded(&p, &mut Flat).unwrap();
        let node = mcts.nodes.get_mut(&mcts.root.clone()).unwrap();
        node.n[0] = 50;
        assert_ne!(select_action(node, 1.0), 0);
    }

    #[test]
    fn selection_argmax_invariant_under_q_shift() {
        let p = hsr(3, 3, 8);
        let root = initial_state(&p).unwrap();
        let mut mcts = Mcts::new(&p, root, uniform_cfg(1)).unwrap();
        mcts.ensure_root_expanded(&p, &mut Flat).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let node = mcts.nodes.get_mut(&mcts.root.clone()).unwrap();
            for a in 0..node.n.len() {
                node.n[a] = rng.gen_range(0..20);
                node.q[a] = rng.gen_range(-1.0..1.0);
            }
            let before = select_action(node, 1.0);
            let shift = rng.gen_range(-3.0..3.0);
            for q in node.q.iter_mut() {
                *q += shift;
            }
            assert_eq!(select_action(node, 1.0), before);
        }
    }

    #[test]
    fn expand_fills_children_and_priors() {
        let p = hsr(3, 3, 8);
        let root = initial_state(&p).unwrap();
        let mut mcts = Mcts::new(&p, root, uniform_cfg(1)).unwrap();
        mcts.ensure_root_expanded(&p, &mut Flat).unwrap();
        let node = &mcts.nodes[&mcts.root];
        assert_eq!(node.children.len(), 7);
        assert!((node.prior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(node.q.iter().all(|&q| q == 0.0), "no injection by default");
    }

    #[test]
    fn q_injection_seeds_exact_terminal_values() {
        // At HSR(1,1,2) the root pick m=1 leads to the And node; with
        // injection the And node's q holds the children's exact outcomes
        // once expanded.
        let p = hsr(1, 1, 2);
        let root = initial_state(&p).unwrap();
        let cfg = MctsConfig {
            num_simulations: 4,
            q_injection: true,
            ..MctsConfig::default()
        };
        let mut mcts = Mcts::new(&p, root.clone(), cfg).unwrap();
        mcts.run_simulations(&p, &mut Flat).unwrap();
        let and_state = apply(&p, &root, 0).unwrap();
        let and_key = state_key(&p, &and_state);
        let (_, q) = mcts.stats_at(&and_key).unwrap();
        // Both branches resolve true: losing (-1) for the Opponent mover.
        assert!(
            q.iter().all(|&v| v == -1.0),
            "expected injected -1s, got {q:?}"
        );
    }

    #[test]
    fn q_injection_off_leaves_zero() {
        let p = hsr(1, 1, 2);
        let root = initial_state(&p).unwrap();
        let mut mcts = Mcts::new(&p, root, uniform_cfg(1)).unwrap();
        mcts.ensure_root_expanded(&p, &mut Flat).unwrap();
        let node = &mcts.nodes[&mcts.root];
        assert!(node.q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backup_is_incremental_mean() {
        let p = hsr(3, 3, 8);
        let root = initial_state(&p).unwrap();
        let mut mcts = Mcts::new(&p, root, uniform_cfg(1)).unwrap();
        mcts.ensure_root_expanded(&p, &mut Flat).unwrap();
        let key = mcts.root.clone();
        mcts.backup(&[(key.clone(), 2)], 1.0);
        let (n, q) = mcts.stats_at(&key).unwrap();
        assert_eq!(n[2], 1);
        assert_eq!(q[2], 1.0);
        mcts.backup(&[(key.clone(), 2)], -1.0);
        let (n, q) = mcts.stats_at(&key).unwrap();
        assert_eq!(n[2], 2);
        assert_eq!(q[2], 0.0);
    }

    #[test]
    fn backup_matches_shadow_mean_oracle() {
        let p = hsr(3, 3, 8);
        let root = initial_state(&p).unwrap();
        let mut mcts = Mcts::new(&p, root, uniform_cfg(1)).unwrap();
        mcts.ensure_root_expanded(&p, &mut Flat).unwrap();
        let key = mcts.root.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut shadow: Vec<Vec<f64>> = vec![Vec::new(); 7];
        for _ in 0..500 {
            let a = rng.gen_range(0..7);
            let v = rng.gen_range(-1.0..1.0);
            shadow[a].push(v);
            mcts.backup(&[(key.clone(), a)], v);
        }
        let (n, q) = mcts.stats_at(&key).unwrap();
        for a in 0..7 {
            assert_eq!(n[a] as usize, shadow[a].len());
            if !shadow[a].is_empty() {
                let mean: f64 = shadow[a].iter().sum::<f64>() / shadow[a].len() as f64;
                assert!((q[a] - mean).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn backup_converts_perspective_per_mover() {
        // Root (Player0 moves) -> And (Player1 moves): a +1-for-Player0
        // value must appear as +1 at the root and -1 at the And node.
        let p = hsr(3, 3, 8);
        let root = initial_state(&p).unwrap();
        let mut mcts = Mcts::new(&p, root.clone(), uniform_cfg(1)).unwrap();
        mcts.ensure_root_expanded(&p, &mut Flat).unwrap();
        let root_key = mcts.root.clone();
        let and_state = apply(&p, &root, 3).unwrap();
        let and_key = state_key(&p, &and_state);
        mcts.nodes
            .insert(and_key.clone(), Node::new(&p, and_state).unwrap());
        mcts.backup(&[(root_key.clone(), 3), (and_key.clone(), 0)], 1.0);
        let (_, q_root) = mcts.stats_at(&root_key).unwrap();
        let (_, q_and) = mcts.stats_at(&and_key).unwrap();
        assert_eq!(q_root[3], 1.0);
        assert_eq!(q_and[0], -1.0);
    }

    #[test]
    fn empirical_policy_formula() {
        assert_eq!(empirical_policy_from_counts(&[0, 0, 0, 0]), vec![0.25; 4]);
        let pi = empirical_policy_from_counts(&[24, 0, 0, 0, 0, 0, 0]);
        assert!((pi[0] - 25.0 / 31.0).abs() < 1e-12);
        for v in &pi[1..] {
            assert!((v - 1.0 / 31.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_policy_floor_and_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let len = rng.gen_range(1..12);
            let n: Vec<u32> = (0..len).map(|_| rng.gen_range(0..1000)).collect();
            let pi = empirical_policy_from_counts(&n);
            let total: u64 = n.iter().map(|&v| v as u64).sum();
            let floor = 1.0 / (len as f64 + total as f64);
            assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for v in pi {
                assert!(v >= floor - 1e-12);
            }
        }
    }

    #[test]
    fn simulations_increment_root_visits_exactly() {
        let p = hsr(3, 3, 8);
        let root = initial_state(&p).unwrap();
        let cfg = MctsConfig {
            num_simulations: 25,
            retention: Retention::Fresh,
            ..MctsConfig::default()
        };
        let mut mcts = Mcts::new(&p, root, cfg).unwrap();
        mcts.ensure_root_expanded(&p, &mut Flat).unwrap();
        mcts.run_simulations(&p, &mut Flat).unwrap();
        let total: u32 = mcts.root_visits().iter().sum();
        assert_eq!(total, 25);
    }

    #[test]
    fn terminal_root_is_a_no_op() {
        let p = hsr(3, 3, 1);
        let root = initial_state(&p).unwrap();
        let mut mcts = Mcts::new(&p, root, uniform_cfg(10)).unwrap();
        mcts.run_simulations(&p, &mut Flat).unwrap();
        assert_eq!(mcts.node_count(), 1);
        assert!(mcts.root_policy().is_err());
    }

    #[test]
    fn oracle_guided_search_finds_the_unique_correct_move() {
        let p = hsr(3, 3, 8);
        let root = initial_state(&p).unwrap();
        let cfg = MctsConfig {
            num_simulations: 25,
            q_injection: true,
            ..MctsConfig::default()
        };
        let mut mcts = Mcts::new(&p, root, cfg).unwrap();
        let mut oracle = OracleEvaluator::default();
        mcts.run_simulations(&p, &mut oracle).unwrap();
        let pi = mcts.root_policy().unwrap();
        let best = pi
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        // index 3 picks m = 4, the only correct rung
        assert_eq!(best, 3);
        assert_eq!(proponent_correct(3, 3, 8, 4), Correctness::Correct);
    }

    #[test]
    fn keep_counts_retains_subtree_after_advance() {
        let p = hsr(3, 3, 8);
        let root = initial_state(&p).unwrap();
        let cfg = MctsConfig {
            num_simulations: 25,
            retention: Retention::KeepCounts,
            q_injection: false,
            ..MctsConfig::default()
        };
        let mut mcts = Mcts::new(&p, root.clone(), cfg).unwrap();
        mcts.run_simulations(&p, &mut Flat).unwrap();
        let child_state = apply(&p, &root, 3).unwrap();
        let child_key = state_key(&p, &child_state);
        let before = mcts.stats_at(&child_key);
        assert!(before.is_some(), "child visited during simulations");
        mcts.advance_root(&p, 3).unwrap();
        assert_eq!(mcts.root_key(), &child_key);
        let after = mcts.stats_at(&child_key).unwrap();
        assert_eq!(Some(after.clone()), before, "stats preserved bit-exactly");
    }

    #[test]
    fn fresh_retention_discards_everything() {
        let p = hsr(3, 3, 8);
        let root = initial_state(&p).unwrap();
        let cfg = MctsConfig {
            num_simulations: 25,
            retention: Retention::Fresh,
            ..MctsConfig::default()
        };
        let mut mcts = Mcts::new(&p, root, cfg).unwrap();
        mcts.run_simulations(&p, &mut Flat).unwrap();
        assert!(mcts.node_count() > 1);
        mcts.advance_root(&p, 3).unwrap();
        assert_eq!(mcts.node_count(), 1);
        let (n, _) = mcts.stats_at(mcts.root_key()).unwrap();
        assert!(n.iter().all(|&v| v == 0));
    }

    #[test]
    fn net_evaluator_caches_and_matches_direct_forward() {
        let p = hsr(3, 3, 8);
        let nets = NetworkSet::init(NetConfig {
            input_dim: p.encoding_len(),
            action_dim: crate::fol::max_action_bound(&p).unwrap(),
            trunk: vec![16, 16],
            opponent_trunk: vec![16, 16],
            pv_wiring: PvWiring::SeparatePv,
            player_wiring: PlayerWiring::Shared,
            seed: 42,
        });
        let mut eval = NetEvaluator::new(&nets);
        let root = initial_state(&p).unwrap();
        let v1 = eval.value(&p, &root).unwrap();
        let v2 = eval.value(&p, &root).unwrap();
        assert_eq!(v1, v2);
        let x = encode_scaled(&p, &root);
        let direct = nets.value(Player::Player0, &x);
        assert_eq!(v1, direct);
        let pri = eval.priors(&p, &root, 7).unwrap();
        assert_eq!(pri.len(), 7);
        assert!((pri.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn trace_records_one_line_per_simulation() {
        let p = hsr(2, 2, 4);
        let root = initial_state(&p).unwrap();
        let mut mcts = Mcts::new(&p, root, uniform_cfg(8)).unwrap();
        mcts.enable_trace();
        mcts.run_simulations(&p, &mut Flat).unwrap();
        let trace = mcts.take_trace();
        assert_eq!(trace.len(), 8);
        assert!(trace[0].starts_with("sim=1 "));
    }
}
