//! Canonical DSL text for parsed problems; `parse(print(p))` is structurally
//! identical to `p`.

use super::*;
use std::fmt::{self, Write};

fn arith_prec(e: &ArithExpr) -> u8 {
    match e {
        ArithExpr::Add(..) | ArithExpr::Sub(..) => 1,
        ArithExpr::Mul(..) | ArithExpr::FloorDiv(..) => 2,
        ArithExpr::Const(_) | ArithExpr::Var(_) => 3,
    }
}

fn write_arith(out: &mut String, e: &ArithExpr) {
    fn side(out: &mut String, child: &ArithExpr, parent: u8, right: bool) {
        let p = arith_prec(child);
        let needs = if right { p <= parent } else { p < parent };
        if needs {
            out.push('(');
            write_arith(out, child);
            out.push(')');
        } else {
            write_arith(out, child);
        }
    }
    match e {
        ArithExpr::Const(v) => {
            let _ = write!(out, "{v}");
        }
        ArithExpr::Var(name) => out.push_str(name),
        ArithExpr::Add(a, b) => {
            side(out, a, 1, false);
            out.push_str(" + ");
            side(out, b, 1, true);
        }
        ArithExpr::Sub(a, b) => {
            side(out, a, 1, false);
            out.push_str(" - ");
            side(out, b, 1, true);
        }
        ArithExpr::Mul(a, b) => {
            side(out, a, 2, false);
            out.push_str(" * ");
            side(out, b, 2, true);
        }
        ArithExpr::FloorDiv(a, b) => {
            side(out, a, 2, false);
            out.push_str(" / ");
            side(out, b, 2, true);
        }
    }
}

fn guard_prec(g: &Guard) -> u8 {
    match g {
        Guard::Or(..) => 1,
        Guard::And(..) => 2,
        Guard::Not(..) => 3,
        Guard::Cmp(..) | Guard::CatchAll => 4,
    }
}

fn write_guard(out: &mut String, g: &Guard) {
    fn side(out: &mut String, child: &Guard, parent: u8, right: bool) {
        let p = guard_prec(child);
        let needs = if right { p <= parent } else { p < parent };
        if needs {
            out.push('(');
            write_guard(out, child);
            out.push(')');
        } else {
            write_guard(out, child);
        }
    }
    match g {
        Guard::CatchAll => out.push('_'),
        Guard::Cmp(a, op, b) => {
            write_arith(out, a);
            out.push_str(match op {
                CmpOp::Eq => " = ",
                CmpOp::Ne => " != ",
                CmpOp::Lt => " < ",
                CmpOp::Le => " <= ",
                CmpOp::Gt => " > ",
                CmpOp::Ge => " >= ",
            });
            write_arith(out, b);
        }
        Guard::And(a, b) => {
            side(out, a, 2, false);
            out.push_str(" and ");
            side(out, b, 2, true);
        }
        Guard::Or(a, b) => {
            side(out, a, 1, false);
            out.push_str(" or ");
            side(out, b, 1, true);
        }
        Guard::Not(a) => {
            out.push_str("not ");
            side(out, a, 3, true);
        }
    }
}

fn formula_prec(f: &Formula) -> u8 {
    match &f.kind {
        FormulaKind::ForAll { .. } | FormulaKind::Exists { .. } => 0,
        FormulaKind::Or(..) => 1,
        FormulaKind::And(..) => 2,
        FormulaKind::Not(..) => 3,
        FormulaKind::Call { .. } => 4,
    }
}

fn write_formula(out: &mut String, f: &Formula) {
    fn side(out: &mut String, child: &Formula, parent: u8, right: bool) {
        let p = formula_prec(child);
        let needs = if right { p <= parent } else { p < parent };
        if needs {
            out.push('(');
            write_formula(out, child);
            out.push(')');
        } else {
            write_formula(out, child);
        }
    }
    match &f.kind {
        FormulaKind::ForAll { var, domain, body } | FormulaKind::Exists { var, domain, body } => {
            let kw = if matches!(f.kind, FormulaKind::Exists { .. }) {
                "exists"
            } else {
                "forall"
            };
            let _ = write!(out, "{kw} {var} in [");
            write_arith(out, &domain.lo);
            out.push_str(", ");
            write_arith(out, &domain.hi);
            out.push_str("): ");
            write_formula(out, body);
        }
        FormulaKind::And(l, r) => {
            side(out, l, 2, false);
            out.push_str(" and ");
            side(out, r, 2, true);
        }
        FormulaKind::Or(l, r) => {
            side(out, l, 1, false);
            out.push_str(" or ");
            side(out, r, 1, true);
        }
        FormulaKind::Not(c) => {
            out.push_str("not ");
            side(out, c, 3, true);
        }
        FormulaKind::Call { pred, args } => {
            out.push_str(pred);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_arith(out, a);
            }
            out.push(')');
        }
    }
}

/// Emit the problem as canonical DSL text.
pub fn pretty_print(p: &Problem) -> String {
    let mut out = String::new();
    for pred in &p.preds {
        let _ = write!(out, "pred {}(", pred.name);
        for (i, param) in pred.params.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(param);
        }
        out.push_str(") {\n");
        for case in &pred.cases {
            out.push_str("  case ");
            write_guard(&mut out, &case.guard);
            out.push_str(" -> ");
            match &case.result {
                CaseResult::Const(true) => out.push_str("true"),
                CaseResult::Const(false) => out.push_str("false"),
                CaseResult::Formula(f) => write_formula(&mut out, f),
            }
            out.push_str(";\n");
        }
        out.push_str("}\n\n");
    }
    let _ = write!(out, "entry {}(", p.preds[p.entry_pred].name);
    for (i, a) in p.entry_args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{a}");
    }
    out.push_str(")\n");
    out
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_print(self))
    }
}
