//! The two-player game induced by a problem under game-theoretic semantics.
//!
//! The Proponent owns existential quantifiers and disjunctions, the Opponent
//! owns universal quantifiers and conjunctions; negations silently swap the
//! roles, and predicate calls silently unfold into a fresh tree. A game ends
//! when a predicate case resolves to a constant, and the player holding the
//! Proponent role at that point wins exactly when the constant is true.
//!
//! States are plain values: `apply` returns a new state and never mutates,
//! so states can be shared and replayed freely across workers.

use crate::fol::{
    eval_arith, eval_guard, CaseResult, Env, EvalError, Formula, FormulaKind, Problem,
};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("operation requires a non-terminal state")]
    TerminalState,
    #[error("operation requires a terminal state")]
    NonTerminalState,
    #[error("illegal move {mv} (state has {legal} legal moves)")]
    IllegalMove { mv: usize, legal: usize },
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("search exceeded the node cap of {0}")]
    NodeCapExceeded(usize),
}

/// Game role. The Proponent defends the formula's truth, the Opponent
/// attacks it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Proponent,
    Opponent,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Proponent => Role::Opponent,
            Role::Opponent => Role::Proponent,
        }
    }
}

/// Physical player. `Player0` holds the Proponent role at the entry formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    Player0,
    Player1,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::Player0 => Player::Player1,
            Player::Player1 => Player::Player0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Player::Player0 => 0,
            Player::Player1 => 1,
        }
    }
}

/// Which role `Player0` currently holds; flips once per traversed negation.
pub type Polarity = Role;

/// Slot value for formula nodes not yet acted on.
pub const NULL_ACTION: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    /// Cursor rests on a decision node (quantifier or connective).
    InPlay { cursor: usize },
    /// A constant case fired (or a quantifier domain was empty); the payload
    /// is the truth value of the resolved subformula.
    Terminal(bool),
}

/// A position in the semantic game: the predicate being evaluated, its
/// arguments, one action slot per preorder node of the fired case body, and
/// the role assignment. `env` caches the variable bindings accumulated along
/// the path from the body root to the cursor; it is reconstructible from the
/// other fields.
#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pred_id: usize,
    params: Vec<i64>,
    action_vec: Vec<i64>,
    /// Index of the fired case within the predicate.
    case: usize,
    status: Status,
    polarity: Polarity,
    env: Env,
}

/// A move index: for a quantifier over `[lo, hi)` move `i` picks value
/// `lo + i`; for a connective 0 picks the left branch and 1 the right.
pub type Move = usize;

/// Terminal payoff, always relative to a named player.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome(pub i8);

impl GameState {
    pub fn pred_id(&self) -> usize {
        self.pred_id
    }

    pub fn params(&self) -> &[i64] {
        &self.params
    }

    pub fn action_vec(&self) -> &[i64] {
        &self.action_vec
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn cursor(&self) -> Option<usize> {
        match self.status {
            Status::InPlay { cursor } => Some(cursor),
            Status::Terminal(_) => None,
        }
    }

    fn node<'p>(&self, problem: &'p Problem) -> &'p Formula {
        let cursor = match self.status {
            Status::InPlay { cursor } => cursor,
            Status::Terminal(_) => unreachable!("no node on terminal states"),
        };
        let case = &problem.preds[self.pred_id].cases[self.case];
        match &case.result {
            CaseResult::Formula(f) => f.node_at(cursor).expect("cursor in body"),
            CaseResult::Const(_) => unreachable!("constant case is terminal"),
        }
    }
}

/// Enter a predicate: fire the first matching case guard and either stop at
/// a constant or place the cursor at the fired body's root.
fn enter_predicate(
    problem: &Problem,
    pred_id: usize,
    params: Vec<i64>,
    polarity: Polarity,
) -> Result<GameState, GameError> {
    let pred = &problem.preds[pred_id];
    let env = Env::from_params(&pred.params, &params);
    let mut fired = None;
    for (i, case) in pred.cases.iter().enumerate() {
        if eval_guard(&case.guard, &env)? {
            fired = Some(i);
            break;
        }
    }
    let case = fired.expect("catch-all guarantees a firing case");
    let body_len = match &pred.cases[case].result {
        CaseResult::Formula(f) => f.len(),
        CaseResult::Const(_) => 0,
    };
    let status = match &pred.cases[case].result {
        CaseResult::Const(b) => Status::Terminal(*b),
        CaseResult::Formula(_) => Status::InPlay { cursor: 0 },
    };
    let state = GameState {
        pred_id,
        params,
        action_vec: vec![NULL_ACTION; body_len],
        case,
        status,
        polarity,
        env,
    };
    resolve(problem, state)
}

/// Auto-resolve non-decision nodes: negations flip polarity, predicate calls
/// re-enter a fresh tree, and empty quantifier domains terminate vacuously.
fn resolve(problem: &Problem, mut state: GameState) -> Result<GameState, GameError> {
    loop {
        if matches!(state.status, Status::Terminal(_)) {
            return Ok(state);
        }
        let node = state.node(problem);
        match &node.kind {
            FormulaKind::Not(child) => {
                let cursor = child.index;
                state.polarity = state.polarity.other();
                state.status = Status::InPlay { cursor };
            }
            FormulaKind::Call { pred, args } => {
                let callee = problem.pred_id(pred).expect("validated call");
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(eval_arith(a, &state.env)?);
                }
                return enter_predicate(problem, callee, values, state.polarity);
            }
            FormulaKind::ForAll { domain, .. } | FormulaKind::Exists { domain, .. } => {
                let lo = eval_arith(&domain.lo, &state.env)?;
                let hi = eval_arith(&domain.hi, &state.env)?;
                if lo >= hi {
                    // Empty domain: vacuous truth for the universal,
                    // falsity for the existential.
                    let truth = matches!(node.kind, FormulaKind::ForAll { .. });
                    state.status = Status::Terminal(truth);
                }
                return Ok(state);
            }
            FormulaKind::And(..) | FormulaKind::Or(..) => return Ok(state),
        }
    }
}

/// The decision node under the cursor (`None` on terminal states).
pub fn current_node<'p>(problem: &'p Problem, state: &GameState) -> Option<&'p Formula> {
    state.cursor().map(|_| state.node(problem))
}

/// State at the entry call, after auto-resolution.
pub fn initial_state(problem: &Problem) -> Result<GameState, GameError> {
    enter_predicate(
        problem,
        problem.entry_pred,
        problem.entry_args.clone(),
        Role::Proponent,
    )
}

pub fn is_terminal(state: &GameState) -> bool {
    matches!(state.status, Status::Terminal(_))
}

/// Truth value of the resolved subformula at a terminal state.
pub fn terminal_truth(state: &GameState) -> Result<bool, GameError> {
    match state.status {
        Status::Terminal(truth) => Ok(truth),
        Status::InPlay { .. } => Err(GameError::NonTerminalState),
    }
}

/// The player who owns the decision at the cursor, per the semantic-game
/// rules: the Proponent picks at `exists`/`or`, the Opponent at
/// `forall`/`and`.
pub fn player_to_move(problem: &Problem, state: &GameState) -> Result<Player, GameError> {
    if is_terminal(state) {
        return Err(GameError::TerminalState);
    }
    let role = match state.node(problem).kind {
        FormulaKind::Exists { .. } | FormulaKind::Or(..) => Role::Proponent,
        FormulaKind::ForAll { .. } | FormulaKind::And(..) => Role::Opponent,
        _ => unreachable!("resolved states stop on decision nodes"),
    };
    Ok(player_holding(state.polarity, role))
}

/// Which physical player holds `role` given the current polarity.
pub fn player_holding(polarity: Polarity, role: Role) -> Player {
    if polarity == role {
        Player::Player0
    } else {
        Player::Player1
    }
}

/// Number of legal moves; moves are the indices `0..count`.
pub fn legal_action_count(problem: &Problem, state: &GameState) -> Result<usize, GameError> {
    if is_terminal(state) {
        return Err(GameError::TerminalState);
    }
    match &state.node(problem).kind {
        FormulaKind::ForAll { domain, .. } | FormulaKind::Exists { domain, .. } => {
            let lo = eval_arith(&domain.lo, &state.env)?;
            let hi = eval_arith(&domain.hi, &state.env)?;
            Ok((hi - lo).max(0) as usize)
        }
        FormulaKind::And(..) | FormulaKind::Or(..) => Ok(2),
        _ => unreachable!(),
    }
}

pub fn legal_actions(problem: &Problem, state: &GameState) -> Result<Vec<Move>, GameError> {
    Ok((0..legal_action_count(problem, state)?).collect())
}

/// The domain value a quantifier move selects (`lo + mv`); for connectives
/// the branch index itself.
pub fn move_value(problem: &Problem, state: &GameState, mv: Move) -> Result<i64, GameError> {
    match &state.node(problem).kind {
        FormulaKind::ForAll { domain, .. } | FormulaKind::Exists { domain, .. } => {
            Ok(eval_arith(&domain.lo, &state.env)? + mv as i64)
        }
        _ => Ok(mv as i64),
    }
}

/// Apply a move: record it in the action vector, descend, then auto-resolve
/// negations, predicate re-entries, and degenerate quantifiers until the
/// next decision point or a terminal.
pub fn apply(problem: &Problem, state: &GameState, mv: Move) -> Result<GameState, GameError> {
    let legal = legal_action_count(problem, state)?;
    if mv >= legal {
        return Err(GameError::IllegalMove { mv, legal });
    }
    let cursor = state.cursor().expect("non-terminal");
    let mut next = state.clone();
    let node = state.node(problem);
    match &node.kind {
        FormulaKind::ForAll { var, domain, body } | FormulaKind::Exists { var, domain, body } => {
            let value = eval_arith(&domain.lo, &state.env)? + mv as i64;
            next.action_vec[cursor] = value;
            next.env.bind(var, value);
            next.status = Status::InPlay { cursor: body.index };
        }
        FormulaKind::And(l, r) | FormulaKind::Or(l, r) => {
            next.action_vec[cursor] = mv as i64;
            let child = if mv == 0 { l } else { r };
            next.status = Status::InPlay {
                cursor: child.index,
            };
        }
        _ => unreachable!(),
    }
    resolve(problem, next)
}

/// Payoff of a terminal state for `player`: +1 when the player held the
/// Proponent role and the formula resolved true (or Opponent and false),
/// else -1.
pub fn outcome_for(state: &GameState, player: Player) -> Result<Outcome, GameError> {
    let truth = terminal_truth(state)?;
    let proponent = player_holding(state.polarity, Role::Proponent);
    let wins = if truth {
        player == proponent
    } else {
        player != proponent
    };
    Ok(Outcome(if wins { 1 } else { -1 }))
}

/// Raw numeric encoding `[pred_id, params.., action_vec..]`, padded with
/// `NULL_ACTION` to the problem-wide fixed width. The raw vector plus the
/// polarity is a complete state key.
pub fn encode_state(problem: &Problem, state: &GameState) -> Vec<i64> {
    let mut out = Vec::with_capacity(problem.encoding_len());
    out.push(state.pred_id as i64);
    out.extend_from_slice(&state.params);
    out.resize(1 + problem.max_params, NULL_ACTION);
    out.extend_from_slice(&state.action_vec);
    out.resize(problem.encoding_len(), NULL_ACTION);
    out
}

/// Hashable identity of a state: raw encoding plus polarity. States with the
/// same vector but opposite polarity have negated values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateKey {
    pub raw: Vec<i64>,
    pub polarity: Polarity,
}

pub fn state_key(problem: &Problem, state: &GameState) -> StateKey {
    StateKey {
        raw: encode_state(problem, state),
        polarity: state.polarity,
    }
}

/// Per-slot divisor that maps raw encodings into `[-1, 1]` for network
/// consumption: integer slots are scaled by the largest entry-argument
/// magnitude. Branch choices (0/1) shrink but stay in range.
pub fn encoding_scale(problem: &Problem) -> f64 {
    problem
        .entry_args
        .iter()
        .map(|a| a.unsigned_abs())
        .max()
        .unwrap_or(1)
        .max(1) as f64
}

/// Scaled encoding for the networks: the id slot is divided by the predicate
/// count, parameters and quantifier-action slots by [`encoding_scale`], and
/// connective slots (already 0/1) by nothing. The raw vector stays canonical
/// for keys; this view only normalizes magnitudes.
pub fn encode_scaled(problem: &Problem, state: &GameState) -> Vec<f64> {
    let raw = encode_state(problem, state);
    let scale = encoding_scale(problem);
    let npred = problem.preds.len().max(1) as f64;
    let body = match &problem.preds[state.pred_id].cases[state.case].result {
        CaseResult::Formula(f) => Some(f),
        CaseResult::Const(_) => None,
    };
    let action_base = 1 + problem.max_params;
    raw.iter()
        .enumerate()
        .map(|(i, &v)| {
            let s = if i == 0 {
                npred
            } else if i >= action_base {
                // Slot scale follows the node kind of the fired case body.
                match body.and_then(|f| f.node_at(i - action_base)) {
                    Some(node) => match node.kind {
                        FormulaKind::ForAll { .. } | FormulaKind::Exists { .. } => scale,
                        _ => 1.0,
                    },
                    None => 1.0,
                }
            } else {
                scale
            };
            (v as f64 / s).clamp(-1.0, 1.0)
        })
        .collect()
}

/// Exhaustive minimax with memoization on the state key. Values are exact
/// game outcomes; the node cap bounds runaway problems.
pub struct BruteForce {
    memo: HashMap<StateKey, i8>,
    cap: usize,
}

impl Default for BruteForce {
    fn default() -> Self {
        BruteForce::new(4_000_000)
    }
}

impl BruteForce {
    pub fn new(cap: usize) -> Self {
        BruteForce {
            memo: HashMap::new(),
            cap,
        }
    }

    pub fn nodes_seen(&self) -> usize {
        self.memo.len()
    }

    /// Exact outcome of `state` for the player to move (terminal states are
    /// rejected; use `outcome_for` there).
    pub fn value_for_mover(
        &mut self,
        problem: &Problem,
        state: &GameState,
    ) -> Result<i8, GameError> {
        let mover = player_to_move(problem, state)?;
        self.value_for(problem, state, mover)
    }

    /// Exact outcome of `state` for `player`.
    pub fn value_for(
        &mut self,
        problem: &Problem,
        state: &GameState,
        player: Player,
    ) -> Result<i8, GameError> {
        if is_terminal(state) {
            return Ok(outcome_for(state, player)?.0);
        }
        let mover = player_to_move(problem, state)?;
        let v = self.mover_value(problem, state)?;
        Ok(if mover == player { v } else { -v })
    }

    fn mover_value(&mut self, problem: &Problem, state: &GameState) -> Result<i8, GameError> {
        let key = state_key(problem, state);
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        if self.memo.len() >= self.cap {
            return Err(GameError::NodeCapExceeded(self.cap));
        }
        let mover = player_to_move(problem, state)?;
        let mut best = -1i8;
        for mv in 0..legal_action_count(problem, state)? {
            let child = apply(problem, state, mv)?;
            let v = self.value_for(problem, &child, mover)?;
            if v > best {
                best = v;
            }
            if best == 1 {
                break;
            }
        }
        self.memo.insert(key, best);
        Ok(best)
    }
}

/// All distinct reachable states (by key), paired with the maximum branching
/// factor seen. Serves as the independent oracle for `fol::max_action_bound`
/// and the encoding-injectivity check.
pub fn reachable_states(
    problem: &Problem,
    cap: usize,
) -> Result<(Vec<GameState>, usize), GameError> {
    let mut seen: HashMap<StateKey, ()> = HashMap::new();
    let mut queue = vec![initial_state(problem)?];
    let mut out = Vec::new();
    let mut max_branching = 0usize;
    while let Some(state) = queue.pop() {
        let key = state_key(problem, &state);
        if seen.insert(key, ()).is_some() {
            continue;
        }
        if seen.len() > cap {
            return Err(GameError::NodeCapExceeded(cap));
        }
        if !is_terminal(&state) {
            let n = legal_action_count(problem, &state)?;
            max_branching = max_branching.max(n);
            for mv in 0..n {
                queue.push(apply(problem, &state, mv)?);
            }
        }
        out.push(state);
    }
    Ok((out, max_branching))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::parse_problem;
    use std::collections::HashSet;

    fn hsr(k: i64, q: i64, n: i64) -> Problem {
        crate::hsr::hsr_problem(&crate::hsr::HsrInstance::new(k, q, n).unwrap())
    }

    #[test]
    fn initial_state_matches_vector_layout() {
        let p = hsr(4, 4, 16);
        let s = initial_state(&p).unwrap();
        assert_eq!(encode_state(&p, &s), vec![0, 4, 4, 16, -1, -1, -1, -1]);
        assert_eq!(s.cursor(), Some(0));
        assert_eq!(s.polarity(), Role::Proponent);
        assert!(!is_terminal(&s));
    }

    #[test]
    fn constant_entry_is_terminal_immediately() {
        let p = hsr(3, 3, 1);
        let s = initial_state(&p).unwrap();
        assert!(is_terminal(&s));
        assert!(terminal_truth(&s).unwrap());
        assert_eq!(outcome_for(&s, Player::Player0).unwrap(), Outcome(1));
    }

    #[test]
    fn negated_entry_flips_polarity() {
        let src = "
pred P(n) {
  case n = 1 -> true;
  case _ -> exists m in [1, n): Q(m) and Q(n - m);
}
pred Q(n) { case n <= 1 -> true; case _ -> false; }
pred Root(n) { case _ -> not P(n); }
entry Root(4)
";
        let p = parse_problem(src).unwrap();
        let s = initial_state(&p).unwrap();
        assert_eq!(s.polarity(), Role::Opponent);
        assert_eq!(s.pred_id(), 0); // inside P's expansion
                                    // the Exists now belongs to Player1
        assert_eq!(player_to_move(&p, &s).unwrap(), Player::Player1);
    }

    #[test]
    fn player_to_move_follows_node_kind_and_polarity() {
        let p = hsr(4, 4, 16);
        let root = initial_state(&p).unwrap();
        // Exists with Proponent polarity -> Player0
        assert_eq!(player_to_move(&p, &root).unwrap(), Player::Player0);
        // And node after the pick -> Player1
        let and = apply(&p, &root, 4).unwrap();
        assert_eq!(player_to_move(&p, &and).unwrap(), Player::Player1);
    }

    #[test]
    fn legal_actions_counts() {
        let p = hsr(4, 4, 16);
        let root = initial_state(&p).unwrap();
        assert_eq!(legal_action_count(&p, &root).unwrap(), 15);
        let and = apply(&p, &root, 0).unwrap();
        assert_eq!(legal_action_count(&p, &and).unwrap(), 2);
        assert_eq!(legal_actions(&p, &and).unwrap(), vec![0, 1]);
    }

    #[test]
    fn apply_reproduces_reference_transition() {
        let p = hsr(4, 4, 16);
        let root = initial_state(&p).unwrap();
        // Pick m = 5: move index 4 since the domain starts at 1.
        let after_m = apply(&p, &root, 4).unwrap();
        assert_eq!(encode_state(&p, &after_m), vec![0, 4, 4, 16, 5, -1, -1, -1]);
        assert_eq!(move_value(&p, &root, 4).unwrap(), 5);
        // Before re-entry the vector records both decisions.
        assert_eq!(
            {
                let mut v = encode_state(&p, &after_m);
                v[5] = 0; // what the Opponent is about to write
                v
            },
            vec![0, 4, 4, 16, 5, 0, -1, -1]
        );
        // Opponent picks the left branch: re-enters HSR(3, 3, 5).
        let reentered = apply(&p, &after_m, 0).unwrap();
        assert_eq!(
            encode_state(&p, &reentered),
            vec![0, 3, 3, 5, -1, -1, -1, -1]
        );
        assert_eq!(reentered.cursor(), Some(0));
    }

    #[test]
    fn reentry_into_base_case_terminates() {
        let p = hsr(1, 1, 2);
        let root = initial_state(&p).unwrap();
        let and = apply(&p, &root, 0).unwrap(); // m = 1
        let left = apply(&p, &and, 0).unwrap(); // HSR(0, 0, 1) -> true
        assert!(is_terminal(&left));
        assert!(terminal_truth(&left).unwrap());
        let right = apply(&p, &and, 1).unwrap(); // HSR(1, 0, 1) -> true
        assert!(is_terminal(&right));
        assert!(terminal_truth(&right).unwrap());
    }

    #[test]
    fn terminal_examples() {
        let p = hsr(0, 2, 5);
        let s = initial_state(&p).unwrap();
        assert!(is_terminal(&s));
        assert!(!terminal_truth(&s).unwrap());
        assert_eq!(outcome_for(&s, Player::Player0).unwrap(), Outcome(-1));

        let p = hsr(3, 3, 8);
        let s = initial_state(&p).unwrap();
        assert!(!is_terminal(&s));
        assert!(terminal_truth(&s).is_err());
    }

    #[test]
    fn outcomes_are_zero_sum() {
        let p = hsr(1, 1, 3);
        let (states, _) = reachable_states(&p, 100_000).unwrap();
        let mut checked = 0;
        for s in states.iter().filter(|s| is_terminal(s)) {
            let a = outcome_for(s, Player::Player0).unwrap().0;
            let b = outcome_for(s, Player::Player1).unwrap().0;
            assert_eq!(a, -b);
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn negation_parity_decides_outcome_owner() {
        // Root(n) := not Q(n); Q resolves true, so Player1, holding the
        // Proponent role after the flip, wins.
        let src = "
pred Q(n) { case n = 1 -> true; case _ -> false; }
pred Root(n) { case _ -> not Q(n); }
entry Root(1)
";
        let p = parse_problem(src).unwrap();
        let s = initial_state(&p).unwrap();
        assert!(is_terminal(&s));
        assert!(terminal_truth(&s).unwrap());
        assert_eq!(outcome_for(&s, Player::Player1).unwrap(), Outcome(1));
        assert_eq!(outcome_for(&s, Player::Player0).unwrap(), Outcome(-1));
    }

    #[test]
    fn double_negation_restores_polarity() {
        let src = "
pred Q(n) { case n = 1 -> true; case _ -> false; }
pred Root(n) { case _ -> not (not Q(n)); }
entry Root(1)
";
        let p = parse_problem(src).unwrap();
        let s = initial_state(&p).unwrap();
        assert_eq!(s.polarity(), Role::Proponent);
        assert_eq!(outcome_for(&s, Player::Player0).unwrap(), Outcome(1));
    }

    #[test]
    fn empty_domain_resolves_vacuously() {
        let src = "
pred A() { case _ -> true; }
pred P(n) { case _ -> forall x in [n, 0): A(); }
pred Q(n) { case _ -> exists x in [n, 0): A(); }
entry P(5)
";
        let p = parse_problem(src).unwrap();
        let s = initial_state(&p).unwrap();
        assert!(is_terminal(&s));
        assert!(terminal_truth(&s).unwrap());

        let q = parse_problem(&src.replace("entry P(5)", "entry Q(5)")).unwrap();
        let s = initial_state(&q).unwrap();
        assert!(is_terminal(&s));
        assert!(!terminal_truth(&s).unwrap());
    }

    #[test]
    fn apply_is_pure() {
        let p = hsr(3, 3, 8);
        let root = initial_state(&p).unwrap();
        let snapshot = root.clone();
        let a = apply(&p, &root, 3).unwrap();
        let b = apply(&p, &root, 3).unwrap();
        assert_eq!(root, snapshot);
        assert_eq!(a, b);
    }

    #[test]
    fn illegal_move_rejected() {
        let p = hsr(3, 3, 8);
        let root = initial_state(&p).unwrap();
        assert!(matches!(
            apply(&p, &root, 7),
            Err(GameError::IllegalMove { mv: 7, legal: 7 })
        ));
    }

    #[test]
    fn encoding_is_injective_over_reachable_states() {
        let p = hsr(3, 3, 8);
        let (states, max_branching) = reachable_states(&p, 1_000_000).unwrap();
        let mut seen = HashSet::new();
        for s in &states {
            // Keys include polarity; this benchmark never flips it, so the
            // raw vector alone must already be collision-free.
            assert!(seen.insert(encode_state(&p, s)), "collision for {s:?}");
        }
        assert_eq!(max_branching, 7);
        assert_eq!(
            crate::fol::max_action_bound(&p).unwrap(),
            max_branching,
            "static bound should be tight for this family"
        );
    }

    #[test]
    fn scaled_encoding_is_bounded() {
        let p = hsr(3, 3, 8);
        let (states, _) = reachable_states(&p, 1_000_000).unwrap();
        for s in &states {
            for v in encode_scaled(&p, s) {
                assert!((-1.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn scaled_encoding_respects_slot_kinds() {
        let p = hsr(4, 4, 16);
        let root = initial_state(&p).unwrap();
        let after_m = apply(&p, &root, 4).unwrap(); // m = 5 at the Exists
        let x = encode_scaled(&p, &after_m);
        // params and the quantifier slot scale by the largest entry value
        assert_eq!(x[1], 4.0 / 16.0);
        assert_eq!(x[3], 1.0);
        assert_eq!(x[4], 5.0 / 16.0);
        // A connective slot divides by 1. The pre-reentry vector is never a
        // reachable state (predicate calls reset it), so write the branch
        // choice into a copy directly.
        let mut probe = after_m.clone();
        probe.action_vec[1] = 1;
        let x = encode_scaled(&p, &probe);
        assert_eq!(x[5], 1.0, "connective slots keep their branch index");
    }

    #[test]
    fn brute_force_small_instances() {
        let mut bf = BruteForce::default();
        let p = hsr(1, 1, 2);
        let s = initial_state(&p).unwrap();
        assert_eq!(bf.value_for(&p, &s, Player::Player0).unwrap(), 1);

        let p = hsr(1, 1, 3);
        let s = initial_state(&p).unwrap();
        assert_eq!(bf.value_for(&p, &s, Player::Player0).unwrap(), -1);

        for k in 0..=3 {
            for q in 0..=3 {
                let p = hsr(k, q, 1);
                let s = initial_state(&p).unwrap();
                assert!(is_terminal(&s));
                assert_eq!(outcome_for(&s, Player::Player0).unwrap(), Outcome(1));
            }
        }
    }

    #[test]
    fn brute_force_respects_node_cap() {
        let mut bf = BruteForce::new(3);
        let p = hsr(3, 3, 8);
        let s = initial_state(&p).unwrap();
        assert!(matches!(
            bf.value_for(&p, &s, Player::Player0),
            Err(GameError::NodeCapExceeded(3))
        ));
    }

    #[test]
    fn games_terminate_within_depth_bound() {
        // Two decisions per body, recursion depth at most k + q.
        let p = hsr(3, 3, 8);
        let bound = 2 * 6;
        let mut stack = vec![(initial_state(&p).unwrap(), 0usize)];
        while let Some((s, depth)) = stack.pop() {
            assert!(depth <= bound, "game exceeded move bound");
            if is_terminal(&s) {
                continue;
            }
            for mv in 0..legal_action_count(&p, &s).unwrap() {
                stack.push((apply(&p, &s, mv).unwrap(), depth + 1));
            }
        }
    }
}
