//! Recursive-descent parser for the `.nsl` grammar.

use super::ast::*;
use super::lexer::{Token, TokenKind};
use super::LogicError;

pub struct Parser<'a> {
    toks: &'a [Token],
    idx: usize,
}

impl<'a> Parser<'a> {
    pub fn new(toks: &'a [Token]) -> Self {
        Parser { toks, idx: 0 }
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.idx)
    }

    fn pos(&self) -> Pos {
        self.peek()
            .map(|t| t.pos)
            .or_else(|| self.toks.last().map(|t| t.pos))
            .unwrap_or_default()
    }

    fn bump(&mut self) -> Option<&Token> {
        let t = self.toks.get(self.idx);
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn err(&self, expected: &str) -> LogicError {
        LogicError::Parse {
            expected: expected.to_string(),
            found: self.peek().map(|t| t.kind.to_string()).unwrap_or_else(|| "end of input".into()),
            pos: self.pos(),
        }
    }

    fn expect(&mut self, kind: &TokenKind, expected: &str) -> Result<Pos, LogicError> {
        match self.peek() {
            Some(t) if &t.kind == kind => {
                let p = t.pos;
                self.idx += 1;
                Ok(p)
            }
            _ => Err(self.err(expected)),
        }
    }

    fn ident(&mut self, expected: &str) -> Result<(String, Pos), LogicError> {
        match self.peek() {
            Some(Token { kind: TokenKind::Ident(s), pos }) => {
                let out = (s.clone(), *pos);
                self.idx += 1;
                Ok(out)
            }
            _ => Err(self.err(expected)),
        }
    }

    fn at_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Ident(s), .. }) if s == name)
    }

    pub fn program(&mut self) -> Result<Program, LogicError> {
        let mut prog = Program::default();
        while let Some(tok) = self.peek() {
            match &tok.kind {
                TokenKind::AggAssign | TokenKind::LBrace | TokenKind::RBrace => {
                    return Err(LogicError::UnsupportedFeature {
                        feature: "aggregation".into(),
                        pos: tok.pos,
                    });
                }
                TokenKind::Ident(s) if s == "rel" => prog.relations.push(self.relation_decl()?),
                TokenKind::Ident(s) if s == "query" => prog.queries.push(self.query_decl()?),
                TokenKind::Float(_) | TokenKind::Int(_) => prog.fact_groups.push(self.fact_line()?),
                TokenKind::Ident(s) if s == "nn" => prog.fact_groups.push(self.fact_line()?),
                TokenKind::Ident(_) => {
                    let rule = self.rule_or_fact()?;
                    prog.rules.push(rule);
                }
                _ => return Err(self.err("declaration, rule, fact, or query")),
            }
        }
        Ok(prog)
    }

    fn relation_decl(&mut self) -> Result<RelationDecl, LogicError> {
        let (_, pos) = self.ident("`rel`")?;
        let (name, _) = self.ident("relation name")?;
        self.expect(&TokenKind::LParen, "`(`")?;
        let mut column_types = Vec::new();
        if !matches!(self.peek().map(|t| &t.kind), Some(TokenKind::RParen)) {
            loop {
                let (ty, tpos) = self.ident("column type")?;
                let ty = match ty.as_str() {
                    "int" => ColumnType::Int,
                    "sym" => ColumnType::Sym,
                    "float" => ColumnType::Float,
                    _ => {
                        return Err(LogicError::Parse {
                            expected: "column type `int`, `sym`, or `float`".into(),
                            found: format!("identifier `{ty}`"),
                            pos: tpos,
                        })
                    }
                };
                column_types.push(ty);
                if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Comma)) {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(&TokenKind::RParen, "`)`")?;
        self.expect(&TokenKind::Period, "`.`")?;
        Ok(RelationDecl { name, column_types, pos })
    }

    fn query_decl(&mut self) -> Result<QueryDecl, LogicError> {
        let (_, pos) = self.ident("`query`")?;
        let atom = self.atom()?;
        self.expect(&TokenKind::Period, "`.`")?;
        Ok(QueryDecl { atom, pos })
    }

    /// A line starting with a probability annotation: `prob :: atom (; ...)* .`
    fn fact_line(&mut self) -> Result<FactGroup, LogicError> {
        let pos = self.pos();
        let mut members = Vec::new();
        loop {
            let slot = self.prob_slot()?;
            self.expect(&TokenKind::DoubleColon, "`::`")?;
            let atom = self.atom()?;
            members.push(FactMember { atom, slot });
            match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Semicolon) => {
                    self.bump();
                }
                _ => break,
            }
        }
        self.expect(&TokenKind::Period, "`.`")?;
        let kind = if members.len() > 1 { FactGroupKind::CategoricalAd } else { FactGroupKind::Independent };
        Ok(FactGroup { kind, members, pos })
    }

    fn prob_slot(&mut self) -> Result<ProbSlot, LogicError> {
        match self.peek().cloned() {
            Some(Token { kind: TokenKind::Float(p), .. }) => {
                self.bump();
                Ok(ProbSlot::Constant(p))
            }
            Some(Token { kind: TokenKind::Int(i), .. }) => {
                self.bump();
                Ok(ProbSlot::Constant(i as f64))
            }
            Some(Token { kind: TokenKind::Ident(s), pos }) if s == "nn" => {
                self.bump();
                self.expect(&TokenKind::LParen, "`(`")?;
                let (head, _) = self.ident("neural head id")?;
                self.expect(&TokenKind::Comma, "`,`")?;
                let index = match self.peek() {
                    Some(Token { kind: TokenKind::Int(i), .. }) if *i >= 0 => *i as usize,
                    _ => {
                        return Err(LogicError::Parse {
                            expected: "non-negative output index".into(),
                            found: self.peek().map(|t| t.kind.to_string()).unwrap_or_else(|| "end of input".into()),
                            pos,
                        })
                    }
                };
                self.bump();
                self.expect(&TokenKind::RParen, "`)`")?;
                Ok(ProbSlot::NeuralOutput { head, index })
            }
            _ => Err(self.err("probability or `nn(head, index)`")),
        }
    }

    /// Either a rule `head :- body.` or a certain fact `atom.` (sugar for
    /// probability 1).
    fn rule_or_fact(&mut self) -> Result<Rule, LogicError> {
        let head = self.atom()?;
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Period) => {
                // A bare ground atom is a bodiless rule.
                let pos = head.pos;
                self.bump();
                Ok(Rule { head, body: Vec::new(), pos })
            }
            Some(TokenKind::Turnstile) => {
                let pos = head.pos;
                self.bump();
                let mut body = vec![self.literal()?];
                while matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Comma)) {
                    self.bump();
                    body.push(self.literal()?);
                }
                self.expect(&TokenKind::Period, "`.`")?;
                Ok(Rule { head, body, pos })
            }
            Some(TokenKind::AggAssign) => Err(LogicError::UnsupportedFeature {
                feature: "aggregation".into(),
                pos: self.pos(),
            }),
            _ => Err(self.err("`:-` or `.`")),
        }
    }

    fn literal(&mut self) -> Result<Literal, LogicError> {
        if self.at_ident("not") {
            self.bump();
            return Ok(Literal::Neg(self.atom()?));
        }
        // Atom iff an identifier directly followed by `(`; anything else is a
        // guard expression.
        if let Some(Token { kind: TokenKind::Ident(_), .. }) = self.peek() {
            if matches!(self.toks.get(self.idx + 1).map(|t| &t.kind), Some(TokenKind::LParen)) {
                return Ok(Literal::Pos(self.atom()?));
            }
        }
        let pos = self.pos();
        let lhs = self.expr()?;
        let op = match self.peek().map(|t| &t.kind) {
            Some(TokenKind::EqEq) => CmpOp::Eq,
            Some(TokenKind::NotEq) => CmpOp::Ne,
            Some(TokenKind::Lt) => CmpOp::Lt,
            Some(TokenKind::Le) => CmpOp::Le,
            Some(TokenKind::Gt) => CmpOp::Gt,
            Some(TokenKind::Ge) => CmpOp::Ge,
            _ => return Err(self.err("comparison operator")),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Literal::Guard { lhs, op, rhs, pos })
    }

    fn atom(&mut self) -> Result<Atom, LogicError> {
        let (relation, pos) = self.ident("relation name")?;
        self.expect(&TokenKind::LParen, "`(`")?;
        let mut terms = Vec::new();
        if !matches!(self.peek().map(|t| &t.kind), Some(TokenKind::RParen)) {
            loop {
                terms.push(self.term()?);
                if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Comma)) {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(&TokenKind::RParen, "`)`")?;
        Ok(Atom { relation, terms, pos })
    }

    fn term(&mut self) -> Result<Term, LogicError> {
        match self.peek().cloned() {
            Some(Token { kind: TokenKind::Ident(s), .. }) => {
                self.bump();
                Ok(Term::Var(s))
            }
            Some(Token { kind: TokenKind::Int(i), .. }) => {
                self.bump();
                Ok(Term::Const(Value::Int(i)))
            }
            Some(Token { kind: TokenKind::Float(x), .. }) => {
                self.bump();
                Ok(Term::Const(Value::float(x)))
            }
            Some(Token { kind: TokenKind::Str(s), .. }) => {
                self.bump();
                Ok(Term::Const(Value::Sym(s)))
            }
            Some(Token { kind: TokenKind::Minus, .. }) => {
                self.bump();
                match self.peek().cloned() {
                    Some(Token { kind: TokenKind::Int(i), .. }) => {
                        self.bump();
                        Ok(Term::Const(Value::Int(-i)))
                    }
                    Some(Token { kind: TokenKind::Float(x), .. }) => {
                        self.bump();
                        Ok(Term::Const(Value::float(-x)))
                    }
                    _ => Err(self.err("number after `-`")),
                }
            }
            _ => Err(self.err("term")),
        }
    }

    // expr := mul (('+'|'-') mul)*
    fn expr(&mut self) -> Result<Expr, LogicError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Plus) => ArithOp::Add,
                Some(TokenKind::Minus) => ArithOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> Result<Expr, LogicError> {
        let mut lhs = Expr::Term(self.term()?);
        while matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Star)) {
            self.bump();
            let rhs = Expr::Term(self.term()?);
            lhs = Expr::Binary(ArithOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }
}

/// Parse a token stream into a `Program`.
pub fn parse_program(tokens: &[Token]) -> Result<Program, LogicError> {
    Parser::new(tokens).program()
}

/// Tokenize and parse in one step.
pub fn parse_source(source: &str) -> Result<Program, LogicError> {
    parse_program(&super::lexer::tokenize(source)?)
}
