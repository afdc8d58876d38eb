//! The highest-safe-rung benchmark: locate the highest safe rung of an
//! `n`-rung ladder with `k` breakable jars and `q` test throws.
//!
//! Ships three things: a DSL emitter (so the parser is exercised end to
//! end), the closed-form solvability bound `n_max`, and per-move
//! correctness oracles used for fault counting. A fault is a move that
//! abandons a winning position; a player who is already lost can never be
//! charged one.

use crate::fol::{parse_problem, FormulaKind, Problem};
use crate::semgame::{
    self, apply, initial_state, is_terminal, legal_action_count, move_value, player_to_move,
    GameError, GameState, Move, Player,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HsrError {
    #[error("invalid instance: need k >= 0, q >= 0, n >= 1 (got k={k}, q={q}, n={n})")]
    InvalidInstance { k: i64, q: i64, n: i64 },
    #[error("problem is not the highest-safe-rung benchmark")]
    NotHsrProblem,
    #[error("trajectory replay failed: {0}")]
    Replay(#[from] GameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HsrInstance {
    pub k: i64,
    pub q: i64,
    pub n: i64,
}

impl HsrInstance {
    pub fn new(k: i64, q: i64, n: i64) -> Result<Self, HsrError> {
        if k < 0 || q < 0 || n < 1 {
            return Err(HsrError::InvalidInstance { k, q, n });
        }
        Ok(HsrInstance { k, q, n })
    }
}

/// DSL text of the three-case predicate for one instance.
pub fn dsl_text(inst: &HsrInstance) -> String {
    format!(
        "pred HSR(k, q, n) {{\n  \
           case n = 1 -> true;\n  \
           case n > 1 and (k = 0 or q = 0) -> false;\n  \
           case _ -> exists m in [1, n): HSR(k - 1, q - 1, m) and HSR(k, q - 1, n - m);\n\
         }}\n\n\
         entry HSR({}, {}, {})\n",
        inst.k, inst.q, inst.n
    )
}

/// Emit and parse the benchmark problem.
pub fn hsr_problem(inst: &HsrInstance) -> Problem {
    parse_problem(&dsl_text(inst)).expect("emitted benchmark text always parses")
}

/// Largest ladder height solvable with `k` jars and `q` tests, from the
/// recurrence `N(k,q) = N(k-1,q-1) + N(k,q-1)` with `N(0,.) = N(.,0) = 1`.
/// Saturating, so callers can compare against it safely for any `n`.
pub fn n_max(k: i64, q: i64) -> i64 {
    if k <= 0 || q <= 0 {
        return 1;
    }
    // One row of the DP at a time; row index walks q.
    let k = k as usize;
    let q = q as usize;
    let mut prev: Vec<i64> = vec![1; k + 1]; // q = 0
    for _ in 1..=q {
        let mut row = vec![1i64; k + 1];
        for ki in 1..=k {
            row[ki] = prev[ki - 1].saturating_add(prev[ki]);
        }
        prev = row;
    }
    prev[k]
}

/// Truth of the benchmark statement by the closed form.
pub fn hsr_truth(k: i64, q: i64, n: i64) -> bool {
    n <= n_max(k, q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correctness {
    Correct,
    Fault,
    /// The mover is already lost; no move can be blamed.
    NoCorrectActionExists,
}

/// Opponent branch after the Proponent tested rung `m`: `Break` spends a
/// jar and continues below `m` (the left conjunct), `NotBreak` keeps the
/// jar and continues above (the right conjunct).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpBranch {
    Break,
    NotBreak,
}

impl OpBranch {
    pub fn from_move(mv: Move) -> OpBranch {
        if mv == 0 {
            OpBranch::Break
        } else {
            OpBranch::NotBreak
        }
    }
}

/// Classify a Proponent rung pick `m` at `(k, q, n)`: correct picks lie in
/// `[n - N(k, q-1), N(k-1, q-1)]`, and none exist when `n > N(k, q)`.
pub fn proponent_correct(k: i64, q: i64, n: i64, m: i64) -> Correctness {
    debug_assert!((1..n).contains(&m), "rung pick out of domain");
    if n > n_max(k, q) {
        return Correctness::NoCorrectActionExists;
    }
    let lo = n - n_max(k, q - 1);
    let hi = n_max(k - 1, q - 1);
    if lo <= m && m <= hi {
        Correctness::Correct
    } else {
        Correctness::Fault
    }
}

/// Classify an Opponent branch choice at `(k, q, n)` after the Proponent
/// picked `m`. A branch is correct exactly when its subformula is false:
/// - break leads to a win for the Opponent iff `m > N(k-1,q-1)`;
/// - not-break iff `n - m > N(k,q-1)`, i.e. `m < n - N(k,q-1)`.
///
/// When `n > N(k,q)` at least one of the two holds (the Proponent is lost),
/// and both hold on the open interval `N(k-1,q-1) < m < n - N(k,q-1)`, where
/// either branch wins. When `n <= N(k,q)` and `m` sits inside the closed
/// interval `[n - N(k,q-1), N(k-1,q-1)]` both subformulas are true and the
/// Opponent is forced to lose.
pub fn opponent_correct(k: i64, q: i64, n: i64, m: i64, branch: OpBranch) -> Correctness {
    debug_assert!((1..n).contains(&m), "rung pick out of domain");
    let break_wins = m > n_max(k - 1, q - 1);
    let not_break_wins = m < n - n_max(k, q - 1);
    match (break_wins, not_break_wins) {
        (false, false) => Correctness::NoCorrectActionExists,
        (true, true) => Correctness::Correct,
        (true, false) => tick(branch, OpBranch::Break),
        (false, true) => tick(branch, OpBranch::NotBreak),
    }
}

fn tick(chosen: OpBranch, required: OpBranch) -> Correctness {
    if chosen == required {
        Correctness::Correct
    } else {
        Correctness::Fault
    }
}

/// Whether an Opponent in a winning position has exactly one winning branch
/// (the open any-branch interval is empty). Kept as an annotation: these
/// are the positions where a coarser reading of the branch rule would
/// misclassify.
fn any_branch_interval_empty(k: i64, q: i64, n: i64) -> bool {
    n > n_max(k, q) && n_max(k - 1, q - 1) + 1 >= n - n_max(k, q - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    /// Proponent tested rung `m` at `(k, q, n)`.
    RungPick { k: i64, q: i64, n: i64, m: i64 },
    /// Opponent answered `branch` at `(k, q, n)` after rung `m`.
    BranchPick {
        k: i64,
        q: i64,
        n: i64,
        m: i64,
        branch: OpBranch,
    },
}

#[derive(Debug, Clone)]
pub struct MoveAnnotation {
    pub step: usize,
    pub player: Player,
    pub kind: MoveKind,
    pub classification: Correctness,
    /// The mover was already lost; not charged.
    pub forced_loss: bool,
    /// The residual clause order decided this classification.
    pub empty_interval_rule: bool,
}

/// Per-player fault counts plus a per-move audit trail.
#[derive(Debug, Clone, Default)]
pub struct FaultRecord {
    pub faults: [u32; 2],
    pub annotations: Vec<MoveAnnotation>,
}

impl FaultRecord {
    pub fn faults_for(&self, player: Player) -> u32 {
        self.faults[player.index()]
    }

    pub fn merge(&mut self, other: &FaultRecord) {
        self.faults[0] += other.faults[0];
        self.faults[1] += other.faults[1];
        self.annotations.extend(other.annotations.iter().cloned());
    }
}

/// Confirm the problem is structurally this benchmark and return its
/// instance.
pub fn instance_of(problem: &Problem) -> Result<HsrInstance, HsrError> {
    let args = &problem.entry_args;
    if args.len() != 3 {
        return Err(HsrError::NotHsrProblem);
    }
    let inst = HsrInstance::new(args[0], args[1], args[2]).map_err(|_| HsrError::NotHsrProblem)?;
    if *problem == hsr_problem(&inst) {
        Ok(inst)
    } else {
        Err(HsrError::NotHsrProblem)
    }
}

/// Replay a move sequence from the initial state and classify every move
/// with the correctness oracles. Deterministic; independent of timing.
pub fn fault_check(problem: &Problem, moves: &[Move]) -> Result<FaultRecord, HsrError> {
    instance_of(problem)?;
    let mut record = FaultRecord::default();
    let mut state = initial_state(problem)?;
    for (step, &mv) in moves.iter().enumerate() {
        record_move(problem, &state, step, mv, &mut record)?;
        state = apply(problem, &state, mv)?;
    }
    Ok(record)
}

fn record_move(
    problem: &Problem,
    state: &GameState,
    step: usize,
    mv: Move,
    record: &mut FaultRecord,
) -> Result<(), HsrError> {
    let player = player_to_move(problem, state)?;
    let legal = legal_action_count(problem, state)?;
    if mv >= legal {
        return Err(HsrError::Replay(GameError::IllegalMove { mv, legal }));
    }
    let params = state.params();
    let (k, q, n) = (params[0], params[1], params[2]);
    let node = semgame::current_node(problem, state).expect("non-terminal replay state");
    let (kind, classification) = match node.kind {
        FormulaKind::Exists { .. } => {
            let m = move_value(problem, state, mv)?;
            (
                MoveKind::RungPick { k, q, n, m },
                proponent_correct(k, q, n, m),
            )
        }
        FormulaKind::And(..) => {
            let m = state.action_vec()[0];
            let branch = OpBranch::from_move(mv);
            (
                MoveKind::BranchPick { k, q, n, m, branch },
                opponent_correct(k, q, n, m, branch),
            )
        }
        _ => unreachable!("benchmark bodies only stop on exists/and"),
    };
    if classification == Correctness::Fault {
        record.faults[player.index()] += 1;
    }
    record.annotations.push(MoveAnnotation {
        step,
        player,
        kind,
        classification,
        forced_loss: classification == Correctness::NoCorrectActionExists,
        empty_interval_rule: matches!(node.kind, FormulaKind::And(..))
            && any_branch_interval_empty(k, q, n),
    });
    Ok(())
}

/// Convenience for tests and the CLI oracle view: brute-force truth of an
/// instance through the game engine.
pub fn brute_force_truth(inst: &HsrInstance, cap: usize) -> Result<bool, GameError> {
    let problem = hsr_problem(inst);
    let s = initial_state(&problem)?;
    if is_terminal(&s) {
        return semgame::terminal_truth(&s);
    }
    let mut bf = semgame::BruteForce::new(cap);
    Ok(bf.value_for(&problem, &s, Player::Player0)? == 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emitted_problem_has_expected_shape() {
        let inst = HsrInstance::new(3, 3, 8).unwrap();
        let p = hsr_problem(&inst);
        assert_eq!(p.preds.len(), 1);
        assert_eq!(p.max_tree_len, 4);
        assert_eq!(crate::fol::max_action_bound(&p).unwrap(), 7);

        let big = hsr_problem(&HsrInstance::new(7, 7, 128).unwrap());
        assert_eq!(crate::fol::max_action_bound(&big).unwrap(), 127);
    }

    #[test]
    fn trivial_instance_is_terminal_true() {
        let p = hsr_problem(&HsrInstance::new(1, 1, 1).unwrap());
        let s = initial_state(&p).unwrap();
        assert!(is_terminal(&s));
        assert!(semgame::terminal_truth(&s).unwrap());
    }

    #[test]
    fn invalid_instances_rejected() {
        assert!(HsrInstance::new(-1, 0, 1).is_err());
        assert!(HsrInstance::new(0, -1, 1).is_err());
        assert!(HsrInstance::new(0, 0, 0).is_err());
    }

    #[test]
    fn n_max_table() {
        assert_eq!(n_max(0, 5), 1);
        assert_eq!(n_max(5, 0), 1);
        assert_eq!(n_max(1, 1), 2);
        assert_eq!(n_max(2, 2), 4);
        assert_eq!(n_max(3, 2), 4);
        assert_eq!(n_max(3, 3), 8);
        assert_eq!(n_max(4, 4), 16);
        assert_eq!(n_max(7, 7), 128);
        // one jar: sequential testing
        assert_eq!(n_max(1, 6), 7);
        // saturation instead of overflow
        assert!(n_max(40, 200) > 0);
    }

    #[test]
    fn n_max_agrees_with_brute_force() {
        for k in 0..=3 {
            for q in 0..=3 {
                let bound = n_max(k, q);
                for n in 1..=(2 * bound).min(10) {
                    let truth =
                        brute_force_truth(&HsrInstance::new(k, q, n).unwrap(), 1_000_000).unwrap();
                    assert_eq!(truth, n <= bound, "closed form disagrees at ({k},{q},{n})");
                }
            }
        }
    }

    #[test]
    fn proponent_rules() {
        // range at (3,3,8) is [8 - N(3,2), N(2,2)] = [4, 4]
        assert_eq!(proponent_correct(3, 3, 8, 4), Correctness::Correct);
        assert_eq!(proponent_correct(3, 3, 8, 5), Correctness::Fault);
        assert_eq!(proponent_correct(3, 3, 8, 3), Correctness::Fault);
        assert_eq!(
            proponent_correct(3, 3, 9, 4),
            Correctness::NoCorrectActionExists
        );
        assert_eq!(
            proponent_correct(3, 3, 9, 1),
            Correctness::NoCorrectActionExists
        );
    }

    #[test]
    fn opponent_rules() {
        // n > N(k,q): not-break wins iff m < 9 - N(3,2) = 5; break wins iff
        // m > N(2,2) = 4. At m = 4 only not-break keeps the win: break
        // re-enters HSR(2,2,4), which is exactly solvable and so true.
        assert_eq!(
            opponent_correct(3, 3, 9, 4, OpBranch::NotBreak),
            Correctness::Correct
        );
        assert_eq!(
            opponent_correct(3, 3, 9, 4, OpBranch::Break),
            Correctness::Fault
        );
        // Strictly inside the open interval either branch wins.
        assert_eq!(
            opponent_correct(3, 3, 10, 5, OpBranch::Break),
            Correctness::Correct
        );
        assert_eq!(
            opponent_correct(3, 3, 10, 5, OpBranch::NotBreak),
            Correctness::Correct
        );
        // n <= N(k,q), m above the break bound
        assert_eq!(
            opponent_correct(3, 3, 8, 5, OpBranch::Break),
            Correctness::Correct
        );
        assert_eq!(
            opponent_correct(3, 3, 8, 5, OpBranch::NotBreak),
            Correctness::Fault
        );
        // m below the not-break bound
        assert_eq!(
            opponent_correct(3, 3, 8, 3, OpBranch::NotBreak),
            Correctness::Correct
        );
        assert_eq!(
            opponent_correct(3, 3, 8, 3, OpBranch::Break),
            Correctness::Fault
        );
        // perfect Proponent play forces the Opponent
        assert_eq!(
            opponent_correct(3, 3, 8, 4, OpBranch::Break),
            Correctness::NoCorrectActionExists
        );
        assert_eq!(
            opponent_correct(3, 3, 8, 4, OpBranch::NotBreak),
            Correctness::NoCorrectActionExists
        );
    }

    #[test]
    fn fault_check_perfect_play_is_clean() {
        let p = hsr_problem(&HsrInstance::new(3, 3, 8).unwrap());
        // m = 4 (move index 3), opponent break, then perfect continuation in
        // HSR(2,2,4): m = 2 (index 1), break -> HSR(1,1,2): m = 1, break ->
        // HSR(0,0,1) true.
        let record = fault_check(&p, &[3, 0, 1, 0, 0, 0]).unwrap();
        assert_eq!(record.faults, [0, 0]);
        assert!(record.annotations.iter().all(|a| !a.empty_interval_rule));
    }

    #[test]
    fn fault_check_blames_bad_rung_pick() {
        let p = hsr_problem(&HsrInstance::new(3, 3, 8).unwrap());
        // m = 5 is a fault; opponent answers break.
        let record = fault_check(&p, &[4, 0]).unwrap();
        assert_eq!(record.faults_for(Player::Player0), 1);
        assert_eq!(record.faults_for(Player::Player1), 0);
        assert_eq!(record.annotations[0].classification, Correctness::Fault);
        assert_eq!(record.annotations[1].classification, Correctness::Correct);
    }

    #[test]
    fn forced_loss_never_blamed() {
        let p = hsr_problem(&HsrInstance::new(3, 3, 9).unwrap());
        // Whatever the Proponent does on an unsolvable instance, no fault.
        for first in 0..8 {
            let record = fault_check(&p, &[first]).unwrap();
            assert_eq!(record.faults_for(Player::Player0), 0);
            assert!(record.annotations[0].forced_loss);
        }
    }

    #[test]
    fn foreign_problem_rejected() {
        let p = crate::fol::parse_problem(
            "pred P(n) { case n = 1 -> true; case _ -> false; } entry P(3)",
        )
        .unwrap();
        assert!(matches!(fault_check(&p, &[]), Err(HsrError::NotHsrProblem)));
    }

    #[test]
    fn fault_check_is_deterministic() {
        let p = hsr_problem(&HsrInstance::new(3, 3, 8).unwrap());
        let a = fault_check(&p, &[4, 0, 0, 1]).unwrap();
        let b = fault_check(&p, &[4, 0, 0, 1]).unwrap();
        assert_eq!(a.faults, b.faults);
        assert_eq!(a.annotations.len(), b.annotations.len());
    }
}
