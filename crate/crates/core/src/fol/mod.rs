//! Problem definitions: a small first-order-logic DSL over finite integer
//! domains, arithmetic/guard evaluation, and preorder node indexing.
//!
//! A problem is a table of predicate definitions plus one entry call with
//! constant arguments. Each predicate is a guarded case list; a case result
//! is either a boolean constant or a quantifier/connective formula whose
//! leaves are calls to other predicates. Formula nodes are numbered by
//! preorder traversal so a game can be recorded as one action slot per node.

mod lexer;
mod parser;
mod print;

pub use parser::parse_problem;
pub use print::pretty_print;

use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FolError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("predicate `{pred}`: unbound variable `{name}`")]
    UnboundVariable { pred: String, name: String },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("predicate `{name}` called with {got} arguments, expects {want}")]
    ArityMismatch {
        name: String,
        got: usize,
        want: usize,
    },
    #[error("predicate `{0}`: last case guard must be the catch-all `_`")]
    MissingCatchAll(String),
    #[error("predicate `{0}` defined twice")]
    DuplicatePredicate(String),
    #[error("predicate `{pred}`: duplicate parameter `{name}`")]
    DuplicateParam { pred: String, name: String },
    #[error("division by a constant zero")]
    ConstDivisionByZero,
    #[error("missing entry declaration")]
    MissingEntry,
    #[error("more than one entry declaration")]
    MultipleEntries,
    #[error("cannot bound the action space statically: {0}")]
    UnboundedActionSpace(String),
}

/// Runtime failure while evaluating arithmetic or a guard.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArithExpr {
    Const(i64),
    Var(String),
    Add(Box<ArithExpr>, Box<ArithExpr>),
    Sub(Box<ArithExpr>, Box<ArithExpr>),
    Mul(Box<ArithExpr>, Box<ArithExpr>),
    FloorDiv(Box<ArithExpr>, Box<ArithExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

/// Boolean expression allowed in guard position of a predicate case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    /// The `_` catch-all; always true. Required as the last case.
    CatchAll,
    Cmp(ArithExpr, CmpOp, ArithExpr),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
    Not(Box<Guard>),
}

/// Half-open quantifier domain `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub lo: ArithExpr,
    pub hi: ArithExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub kind: FormulaKind,
    /// Preorder index within the owning case body; root = 0.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormulaKind {
    ForAll {
        var: String,
        domain: Domain,
        body: Box<Formula>,
    },
    Exists {
        var: String,
        domain: Domain,
        body: Box<Formula>,
    },
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
    Call {
        pred: String,
        args: Vec<ArithExpr>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseResult {
    Const(bool),
    Formula(Formula),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Case {
    pub guard: Guard,
    pub result: CaseResult,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDef {
    pub name: String,
    pub params: Vec<String>,
    pub cases: Vec<Case>,
}

/// A parsed, validated problem. Immutable after construction; predicate ids
/// are indices into `preds` in definition order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub preds: Vec<PredicateDef>,
    pub entry_pred: usize,
    pub entry_args: Vec<i64>,
    /// Longest case-body preorder length over all predicates.
    pub max_tree_len: usize,
    /// Largest predicate arity.
    pub max_params: usize,
}

/// Variable bindings, innermost last. Lookup scans backwards so quantifier
/// bindings shadow parameters of the same name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Env(Vec<(String, i64)>);

impl Env {
    pub fn new() -> Self {
        Env(Vec::new())
    }

    pub fn from_params(names: &[String], values: &[i64]) -> Self {
        Env(names.iter().cloned().zip(values.iter().copied()).collect())
    }

    pub fn bind(&mut self, name: &str, value: i64) {
        self.0.push((name.to_string(), value));
    }

    pub fn get(&self, name: &str) -> Option<i64> {
        self.0
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

/// Floor division (truncation toward negative infinity).
fn floor_div(a: i64, b: i64) -> Result<i64, EvalError> {
    if b == 0 {
        return Err(EvalError::DivisionByZero);
    }
    let q = a.checked_div(b).ok_or(EvalError::Overflow)?;
    let r = a % b;
    if r != 0 && ((r < 0) != (b < 0)) {
        Ok(q - 1)
    } else {
        Ok(q)
    }
}

pub fn eval_arith(e: &ArithExpr, env: &Env) -> Result<i64, EvalError> {
    match e {
        ArithExpr::Const(v) => Ok(*v),
        ArithExpr::Var(name) => env
            .get(name)
            .ok_or_else(|| EvalError::UnboundVariable(name.clone())),
        ArithExpr::Add(a, b) => eval_arith(a, env)?
            .checked_add(eval_arith(b, env)?)
            .ok_or(EvalError::Overflow),
        ArithExpr::Sub(a, b) => eval_arith(a, env)?
            .checked_sub(eval_arith(b, env)?)
            .ok_or(EvalError::Overflow),
        ArithExpr::Mul(a, b) => eval_arith(a, env)?
            .checked_mul(eval_arith(b, env)?)
            .ok_or(EvalError::Overflow),
        ArithExpr::FloorDiv(a, b) => floor_div(eval_arith(a, env)?, eval_arith(b, env)?),
    }
}

pub fn eval_guard(g: &Guard, env: &Env) -> Result<bool, EvalError> {
    match g {
        Guard::CatchAll => Ok(true),
        Guard::Cmp(a, op, b) => {
            let a = eval_arith(a, env)?;
            let b = eval_arith(b, env)?;
            Ok(match op {
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
            })
        }
        Guard::And(a, b) => Ok(eval_guard(a, env)? && eval_guard(b, env)?),
        Guard::Or(a, b) => Ok(eval_guard(a, env)? || eval_guard(b, env)?),
        Guard::Not(a) => Ok(!eval_guard(a, env)?),
    }
}

impl Formula {
    fn children(&self) -> Vec<&Formula> {
        match &self.kind {
            FormulaKind::ForAll { body, .. } | FormulaKind::Exists { body, .. } => vec![body],
            FormulaKind::And(l, r) | FormulaKind::Or(l, r) => vec![l, r],
            FormulaKind::Not(c) => vec![c],
            FormulaKind::Call { .. } => vec![],
        }
    }

    fn children_mut(&mut self) -> Vec<&mut Formula> {
        match &mut self.kind {
            FormulaKind::ForAll { body, .. } | FormulaKind::Exists { body, .. } => vec![body],
            FormulaKind::And(l, r) | FormulaKind::Or(l, r) => vec![l, r],
            FormulaKind::Not(c) => vec![c],
            FormulaKind::Call { .. } => vec![],
        }
    }

    /// Number of nodes in this subtree.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        1 + self.children().iter().map(|c| c.len()).sum::<usize>()
    }

    /// Node with the given preorder index, if it lies in this subtree.
    pub fn node_at(&self, index: usize) -> Option<&Formula> {
        if self.index == index {
            return Some(self);
        }
        self.children().into_iter().find_map(|c| c.node_at(index))
    }
}

/// Assign preorder indices (root-left-right) starting at 0. Idempotent.
pub fn preorder_index(body: &mut Formula) {
    fn walk(f: &mut Formula, next: &mut usize) {
        f.index = *next;
        *next += 1;
        for c in f.children_mut() {
            walk(c, next);
        }
    }
    let mut next = 0;
    walk(body, &mut next);
}

impl Problem {
    pub fn pred_id(&self, name: &str) -> Option<usize> {
        self.preds.iter().position(|p| p.name == name)
    }

    pub fn entry(&self) -> &PredicateDef {
        &self.preds[self.entry_pred]
    }

    /// Input width of the numeric state encoding.
    pub fn encoding_len(&self) -> usize {
        1 + self.max_params + self.max_tree_len
    }
}

/// Static upper bound on the number of legal actions over all reachable
/// states: connectives contribute 2; quantifier domains are measured under
/// the entry bindings (endpoint bindings for enclosing quantifiers). Relies
/// on domain bounds not growing through recursive calls; errors when some
/// domain cannot be bounded statically.
pub fn max_action_bound(p: &Problem) -> Result<usize, FolError> {
    let mut best: i64 = 2;
    for (id, pred) in p.preds.iter().enumerate() {
        // Only the entry predicate has statically known parameter values.
        // Other predicates are still scanned: their quantifier bounds must be
        // closed over enclosing quantifier variables alone.
        let base = if id == p.entry_pred {
            vec![Env::from_params(&pred.params, &p.entry_args)]
        } else {
            vec![Env::new()]
        };
        for case in &pred.cases {
            if let CaseResult::Formula(f) = &case.result {
                scan_widths(f, &base, &mut best)?;
            }
        }
    }
    Ok(best.max(2) as usize)
}

fn scan_widths(f: &Formula, envs: &[Env], best: &mut i64) -> Result<(), FolError> {
    match &f.kind {
        FormulaKind::ForAll { var, domain, body } | FormulaKind::Exists { var, domain, body } => {
            let mut widest: Option<i64> = None;
            let mut child_envs = Vec::new();
            for env in envs {
                if let (Ok(lo), Ok(hi)) = (eval_arith(&domain.lo, env), eval_arith(&domain.hi, env))
                {
                    widest = Some(widest.unwrap_or(0).max((hi - lo).max(0)));
                    // Endpoint bindings cover monotone dependencies of
                    // nested domains on this variable.
                    let mut at_lo = env.clone();
                    at_lo.bind(var, lo);
                    child_envs.push(at_lo);
                    if hi - 1 != lo {
                        let mut at_hi = env.clone();
                        at_hi.bind(var, hi - 1);
                        child_envs.push(at_hi);
                    }
                }
            }
            match widest {
                Some(w) => *best = (*best).max(w),
                None => {
                    return Err(FolError::UnboundedActionSpace(format!(
                        "quantifier over `{var}` has bounds that depend on unknown parameters"
                    )))
                }
            }
            scan_widths(body, &child_envs, best)
        }
        FormulaKind::And(l, r) | FormulaKind::Or(l, r) => {
            scan_widths(l, envs, best)?;
            scan_widths(r, envs, best)
        }
        FormulaKind::Not(c) => scan_widths(c, envs, best),
        FormulaKind::Call { .. } => Ok(()),
    }
}

/// Structural validation run by the parser after assembly.
pub(crate) fn validate(p: &Problem) -> Result<(), FolError> {
    let mut seen = HashSet::new();
    for pred in &p.preds {
        if !seen.insert(pred.name.clone()) {
            return Err(FolError::DuplicatePredicate(pred.name.clone()));
        }
        let mut params = HashSet::new();
        for param in &pred.params {
            if !params.insert(param.clone()) {
                return Err(FolError::DuplicateParam {
                    pred: pred.name.clone(),
                    name: param.clone(),
                });
            }
        }
        match pred.cases.last() {
            Some(case) if case.guard == Guard::CatchAll => {}
            _ => return Err(FolError::MissingCatchAll(pred.name.clone())),
        }
        for case in &pred.cases {
            check_guard(&case.guard, &pred.name, &pred.params)?;
            if let CaseResult::Formula(f) = &case.result {
                let mut scope: Vec<String> = pred.params.clone();
                check_formula(f, &pred.name, &mut scope, p)?;
            }
        }
    }
    let entry = &p.preds[p.entry_pred];
    if entry.params.len() != p.entry_args.len() {
        return Err(FolError::ArityMismatch {
            name: entry.name.clone(),
            got: p.entry_args.len(),
            want: entry.params.len(),
        });
    }
    Ok(())
}

fn check_arith(e: &ArithExpr, pred: &str, scope: &[String]) -> Result<(), FolError> {
    match e {
        ArithExpr::Const(_) => Ok(()),
        ArithExpr::Var(name) => {
            if scope.iter().any(|s| s == name) {
                Ok(())
            } else {
                Err(FolError::UnboundVariable {
                    pred: pred.to_string(),
                    name: name.clone(),
                })
            }
        }
        ArithExpr::Add(a, b) | ArithExpr::Sub(a, b) | ArithExpr::Mul(a, b) => {
            check_arith(a, pred, scope)?;
            check_arith(b, pred, scope)
        }
        ArithExpr::FloorDiv(a, b) => {
            check_arith(a, pred, scope)?;
            check_arith(b, pred, scope)?;
            if matches!(**b, ArithExpr::Const(0)) {
                return Err(FolError::ConstDivisionByZero);
            }
            Ok(())
        }
    }
}

fn check_guard(g: &Guard, pred: &str, params: &[String]) -> Result<(), FolError> {
    match g {
        Guard::CatchAll => Ok(()),
        Guard::Cmp(a, _, b) => {
            check_arith(a, pred, params)?;
            check_arith(b, pred, params)
        }
        Guard::And(a, b) | Guard::Or(a, b) => {
            check_guard(a, pred, params)?;
            check_guard(b, pred, params)
        }
        Guard::Not(a) => check_guard(a, pred, params),
    }
}

fn check_formula(
    f: &Formula,
    pred: &str,
    scope: &mut Vec<String>,
    p: &Problem,
) -> Result<(), FolError> {
    match &f.kind {
        FormulaKind::ForAll { var, domain, body } | FormulaKind::Exists { var, domain, body } => {
            check_arith(&domain.lo, pred, scope)?;
            check_arith(&domain.hi, pred, scope)?;
            scope.push(var.clone());
            check_formula(body, pred, scope, p)?;
            scope.pop();
            Ok(())
        }
        FormulaKind::And(l, r) | FormulaKind::Or(l, r) => {
            check_formula(l, pred, scope, p)?;
            check_formula(r, pred, scope, p)
        }
        FormulaKind::Not(c) => check_formula(c, pred, scope, p),
        FormulaKind::Call { pred: callee, args } => {
            for a in args {
                check_arith(a, pred, scope)?;
            }
            match p.pred_id(callee) {
                None => Err(FolError::UnknownPredicate(callee.clone())),
                Some(id) => {
                    let want = p.preds[id].params.len();
                    if args.len() != want {
                        Err(FolError::ArityMismatch {
                            name: callee.clone(),
                            got: args.len(),
                            want,
                        })
                    } else {
                        Ok(())
                    }
                }
            }
        }
    }
}
