use super::lexer::{tokenize, Tok, Token};
use super::*;

/// Parse DSL source text into a validated [`Problem`] with preorder indices
/// assigned to every case body.
pub fn parse_problem(source: &str) -> Result<Problem, FolError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0 };
    parser.problem()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, FolError> {
        let t = &self.tokens[self.pos];
        Err(FolError::Syntax {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), FolError> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected {what}, found {:?}", self.peek()))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, FolError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.next();
                Ok(name)
            }
            other => self.err(format!("expected {what}, found {other:?}")),
        }
    }

    fn problem(&mut self) -> Result<Problem, FolError> {
        let mut preds = Vec::new();
        let mut entry: Option<(String, Vec<i64>)> = None;
        loop {
            match self.peek() {
                Tok::Pred => preds.push(self.pred_def()?),
                Tok::Entry => {
                    if entry.is_some() {
                        return Err(FolError::MultipleEntries);
                    }
                    entry = Some(self.entry_decl()?);
                }
                Tok::Eof => break,
                _ => return self.err("expected `pred` or `entry`"),
            }
        }
        let (entry_name, entry_args) = entry.ok_or(FolError::MissingEntry)?;

        let entry_pred = preds
            .iter()
            .position(|p: &PredicateDef| p.name == entry_name)
            .ok_or_else(|| FolError::UnknownPredicate(entry_name.clone()))?;

        for pred in &mut preds {
            for case in &mut pred.cases {
                if let CaseResult::Formula(f) = &mut case.result {
                    preorder_index(f);
                }
            }
        }

        let max_tree_len = preds
            .iter()
            .flat_map(|p| p.cases.iter())
            .filter_map(|c| match &c.result {
                CaseResult::Formula(f) => Some(f.len()),
                CaseResult::Const(_) => None,
            })
            .max()
            .unwrap_or(0);
        let max_params = preds.iter().map(|p| p.params.len()).max().unwrap_or(0);

        let problem = Problem {
            preds,
            entry_pred,
            entry_args,
            max_tree_len,
            max_params,
        };
        validate(&problem)?;
        Ok(problem)
    }

    fn pred_def(&mut self) -> Result<PredicateDef, FolError> {
        self.expect(Tok::Pred, "`pred`")?;
        let name = self.ident("predicate name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                params.push(self.ident("parameter name")?);
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut cases = Vec::new();
        while *self.peek() == Tok::Case {
            cases.push(self.case()?);
        }
        if cases.is_empty() {
            return self.err("predicate needs at least one case");
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(PredicateDef {
            name,
            params,
            cases,
        })
    }

    fn case(&mut self) -> Result<Case, FolError> {
        self.expect(Tok::Case, "`case`")?;
        let guard = if *self.peek() == Tok::Underscore {
            self.next();
            Guard::CatchAll
        } else {
            self.guard_or()?
        };
        self.expect(Tok::Arrow, "`->`")?;
        let result = match self.peek() {
            Tok::True => {
                self.next();
                CaseResult::Const(true)
            }
            Tok::False => {
                self.next();
                CaseResult::Const(false)
            }
            _ => CaseResult::Formula(self.formula()?),
        };
        self.expect(Tok::Semi, "`;`")?;
        Ok(Case { guard, result })
    }

    fn entry_decl(&mut self) -> Result<(String, Vec<i64>), FolError> {
        self.expect(Tok::Entry, "`entry`")?;
        let name = self.ident("predicate name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.int_literal()?);
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok((name, args))
    }

    fn int_literal(&mut self) -> Result<i64, FolError> {
        let negate = if *self.peek() == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Int(v) => {
                self.next();
                Ok(if negate { -v } else { v })
            }
            other => self.err(format!("expected integer literal, found {other:?}")),
        }
    }

    // --- guards ---

    fn guard_or(&mut self) -> Result<Guard, FolError> {
        let mut left = self.guard_and()?;
        while *self.peek() == Tok::Or {
            self.next();
            let right = self.guard_and()?;
            left = Guard::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn guard_and(&mut self) -> Result<Guard, FolError> {
        let mut left = self.guard_unary()?;
        while *self.peek() == Tok::And {
            self.next();
            let right = self.guard_unary()?;
            left = Guard::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn guard_unary(&mut self) -> Result<Guard, FolError> {
        match self.peek() {
            Tok::Not => {
                self.next();
                Ok(Guard::Not(Box::new(self.guard_unary()?)))
            }
            Tok::LParen => {
                // `(` opens either a nested guard or the left arithmetic
                // operand of a comparison; try the guard reading first.
                let save = self.pos;
                self.next();
                if let Ok(inner) = self.guard_or() {
                    if *self.peek() == Tok::RParen {
                        self.next();
                        // A comparison operator here means the parens were
                        // arithmetic after all, e.g. `(a + b) < c`.
                        if !matches!(
                            self.peek(),
                            Tok::Eq | Tok::Ne | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge
                        ) {
                            return Ok(inner);
                        }
                    }
                }
                self.pos = save;
                self.comparison()
            }
            _ => self.comparison(),
        }
    }

    fn comparison(&mut self) -> Result<Guard, FolError> {
        let left = self.arith()?;
        let op = match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return self.err("expected comparison operator"),
        };
        self.next();
        let right = self.arith()?;
        Ok(Guard::Cmp(left, op, right))
    }

    // --- formulas ---

    fn formula(&mut self) -> Result<Formula, FolError> {
        match self.peek() {
            Tok::Exists | Tok::Forall => self.quantified(),
            _ => self.formula_or(),
        }
    }

    fn quantified(&mut self) -> Result<Formula, FolError> {
        let exists = match self.next() {
            Tok::Exists => true,
            Tok::Forall => false,
            _ => unreachable!(),
        };
        let var = self.ident("quantified variable")?;
        self.expect(Tok::In, "`in`")?;
        self.expect(Tok::LBracket, "`[`")?;
        let lo = self.arith()?;
        self.expect(Tok::Comma, "`,`")?;
        let hi = self.arith()?;
        self.expect(Tok::RParen, "`)` closing the half-open domain")?;
        self.expect(Tok::Colon, "`:`")?;
        let body = Box::new(self.formula()?);
        let domain = Domain { lo, hi };
        let kind = if exists {
            FormulaKind::Exists { var, domain, body }
        } else {
            FormulaKind::ForAll { var, domain, body }
        };
        Ok(Formula { kind, index: 0 })
    }

    fn formula_or(&mut self) -> Result<Formula, FolError> {
        let mut left = self.formula_and()?;
        while *self.peek() == Tok::Or {
            self.next();
            let right = self.formula_and()?;
            left = Formula {
                kind: FormulaKind::Or(Box::new(left), Box::new(right)),
                index: 0,
            };
        }
        Ok(left)
    }

    fn formula_and(&mut self) -> Result<Formula, FolError> {
        let mut left = self.formula_unary()?;
        while *self.peek() == Tok::And {
            self.next();
            let right = self.formula_unary()?;
            left = Formula {
                kind: FormulaKind::And(Box::new(left), Box::new(right)),
                index: 0,
            };
        }
        Ok(left)
    }

    fn formula_unary(&mut self) -> Result<Formula, FolError> {
        match self.peek() {
            Tok::Not => {
                self.next();
                let child = self.formula_unary()?;
                Ok(Formula {
                    kind: FormulaKind::Not(Box::new(child)),
                    index: 0,
                })
            }
            Tok::LParen => {
                self.next();
                let inner = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(_) => self.call(),
            _ => self.err("expected a formula"),
        }
    }

    fn call(&mut self) -> Result<Formula, FolError> {
        let pred = self.ident("predicate name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.arith()?);
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(Formula {
            kind: FormulaKind::Call { pred, args },
            index: 0,
        })
    }

    // --- arithmetic ---

    fn arith(&mut self) -> Result<ArithExpr, FolError> {
        let mut left = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.next();
                    left = ArithExpr::Add(Box::new(left), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.next();
                    left = ArithExpr::Sub(Box::new(left), Box::new(self.term()?));
                }
                _ => return Ok(left),
            }
        }
    }

    fn term(&mut self) -> Result<ArithExpr, FolError> {
        let mut left = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.next();
                    left = ArithExpr::Mul(Box::new(left), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.next();
                    left = ArithExpr::FloorDiv(Box::new(left), Box::new(self.factor()?));
                }
                _ => return Ok(left),
            }
        }
    }

    fn factor(&mut self) -> Result<ArithExpr, FolError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.next();
                Ok(ArithExpr::Const(v))
            }
            Tok::Ident(name) => {
                // Reject call syntax in arithmetic position early for a
                // clearer message than "expected comparison operator".
                if *self.peek2() == Tok::LParen {
                    return self.err(format!("`{name}(...)` is not valid in arithmetic"));
                }
                self.next();
                Ok(ArithExpr::Var(name))
            }
            Tok::LParen => {
                self.next();
                let inner = self.arith()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Minus => {
                self.next();
                let inner = self.factor()?;
                Ok(match inner {
                    ArithExpr::Const(v) => ArithExpr::Const(-v),
                    other => ArithExpr::Sub(Box::new(ArithExpr::Const(0)), Box::new(other)),
                })
            }
            other => self.err(format!("expected arithmetic expression, found {other:?}")),
        }
    }
}
