//! Concrete syntax for the two-sorted language.
//!
//! ```text
//! formula  := ('forall'|'exists') binders '.' formula | prop
//! binders  := ident ':' ('R'|'V') (',' ident ':' ('R'|'V'))*
//! prop     := iff-chain over { '<->', '->', '|', '&', '~' }  (precedence
//!             ~ > & > | > -> > <->, '->' right-associative; a quantifier
//!             body extends maximally to the right)
//! atom     := expr REL expr                 REL in { =, <, <=, >, >= }
//! expr     := term (('+'|'-') term)*
//! term     := factor ('*' factor)*
//! factor   := '-' factor | primary
//! primary  := RATIONAL | '0v' | IDENT | 'inner' '(' expr ',' expr ')'
//!           | 'norm' '(' expr ')' | 'd' '(' expr ',' expr ')'
//!           | 'abs' '(' expr ')' | '(' formula-or-expr ')'
//! RATIONAL := INT ('/' POSINT)?
//! ```
//!
//! Sorts are inferred during elaboration: binders declare the sort of bound
//! variables; unbound identifiers default to the scalar sort.  Rebinding a
//! name that is already bound with a *different* sort is rejected; same-sort
//! shadowing is allowed.  `abs(t)` is sugar and is expanded at the enclosing
//! atom: `P(abs(t))` becomes `(t >= 0 & P(t)) | (t < 0 & P(-t))`.

use crate::ast::*;
use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("sort error at {line}:{col}: {msg}")]
    Sort { line: usize, col: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Nat(BigInt),
    ZeroVec,
    LParen,
    RParen,
    Dot,
    Comma,
    Colon,
    Slash,
    Plus,
    Minus,
    Star,
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
    Tilde,
    Amp,
    Bar,
    Arrow,
    DArrow,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Nat(n) => format!("number `{n}`"),
            Tok::ZeroVec => "`0v`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Tilde => "`~`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::DArrow => "`<->`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let advance = |i: &mut usize, n: usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                advance(&mut i, 1, &mut col);
            }
            '#' => {
                // comment to end of line
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => {
                out.push((Tok::LParen, pos));
                advance(&mut i, 1, &mut col);
            }
            ')' => {
                out.push((Tok::RParen, pos));
                advance(&mut i, 1, &mut col);
            }
            '.' => {
                out.push((Tok::Dot, pos));
                advance(&mut i, 1, &mut col);
            }
            ',' => {
                out.push((Tok::Comma, pos));
                advance(&mut i, 1, &mut col);
            }
            ':' => {
                out.push((Tok::Colon, pos));
                advance(&mut i, 1, &mut col);
            }
            '/' => {
                out.push((Tok::Slash, pos));
                advance(&mut i, 1, &mut col);
            }
            '+' => {
                out.push((Tok::Plus, pos));
                advance(&mut i, 1, &mut col);
            }
            '*' => {
                out.push((Tok::Star, pos));
                advance(&mut i, 1, &mut col);
            }
            '~' => {
                out.push((Tok::Tilde, pos));
                advance(&mut i, 1, &mut col);
            }
            '&' => {
                out.push((Tok::Amp, pos));
                advance(&mut i, 1, &mut col);
            }
            '|' => {
                out.push((Tok::Bar, pos));
                advance(&mut i, 1, &mut col);
            }
            '=' => {
                out.push((Tok::Eq, pos));
                advance(&mut i, 1, &mut col);
            }
            '-' => {
                if i + 1 < chars.len() && chars[i + 1] == '>' {
                    out.push((Tok::Arrow, pos));
                    advance(&mut i, 2, &mut col);
                } else {
                    out.push((Tok::Minus, pos));
                    advance(&mut i, 1, &mut col);
                }
            }
            '<' => {
                if i + 2 < chars.len() && chars[i + 1] == '-' && chars[i + 2] == '>' {
                    out.push((Tok::DArrow, pos));
                    advance(&mut i, 3, &mut col);
                } else if i + 1 < chars.len() && chars[i + 1] == '=' {
                    out.push((Tok::Le, pos));
                    advance(&mut i, 2, &mut col);
                } else {
                    out.push((Tok::Lt, pos));
                    advance(&mut i, 1, &mut col);
                }
            }
            '>' => {
                if i + 1 < chars.len() && chars[i + 1] == '=' {
                    out.push((Tok::Ge, pos));
                    advance(&mut i, 2, &mut col);
                } else {
                    out.push((Tok::Gt, pos));
                    advance(&mut i, 1, &mut col);
                }
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                // `0v` is the zero-vector literal.
                if digits == "0" && i < chars.len() && chars[i] == 'v' {
                    let after_alnum = i + 1 < chars.len()
                        && (chars[i + 1].is_ascii_alphanumeric() || chars[i + 1] == '_');
                    if !after_alnum {
                        i += 1;
                        col += digits.len() + 1;
                        out.push((Tok::ZeroVec, pos));
                        continue;
                    }
                }
                if i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '_') {
                    return Err(ParseError::Syntax {
                        line: pos.line,
                        col: pos.col,
                        msg: format!("identifier may not start with a digit: `{digits}...`"),
                    });
                }
                col += digits.len();
                out.push((Tok::Nat(digits.parse().unwrap()), pos));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                col += word.len();
                out.push((Tok::Ident(word), pos));
            }
            _ => {
                return Err(ParseError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    msg: format!("unexpected character `{c}`"),
                });
            }
        }
    }
    out.push((
        Tok::Eof,
        Pos { line, col },
    ));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Surface syntax (untyped)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Expr {
    Num(Rat),
    ZeroVec,
    Ident(String, Pos),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>, Pos),
    Inner(Box<Expr>, Box<Expr>, Pos),
    Norm(Box<Expr>, Pos),
    Dist(Box<Expr>, Box<Expr>, Pos),
    Abs(Box<Expr>, Pos),
}

#[derive(Debug, Clone)]
enum SF {
    Rel(RelOp, Expr, Expr, Pos),
    Not(Box<SF>),
    And(Box<SF>, Box<SF>),
    Or(Box<SF>, Box<SF>),
    Implies(Box<SF>, Box<SF>),
    Iff(Box<SF>, Box<SF>),
    Forall(String, Sort, Pos, Box<SF>),
    Exists(String, Sort, Pos, Box<SF>),
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_pos(&self) -> Pos {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let p = self.peek_pos();
        Err(ParseError::Syntax {
            line: p.line,
            col: p.col,
            msg: msg.into(),
        })
    }

    fn expect(&mut self, t: &Tok) -> Result<(), ParseError> {
        if self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!(
                "expected {}, found {}",
                t.describe(),
                self.peek().describe()
            ))
        }
    }

    fn parse_formula(&mut self) -> Result<SF, ParseError> {
        self.parse_iff()
    }

    fn parse_iff(&mut self) -> Result<SF, ParseError> {
        let mut lhs = self.parse_implies()?;
        while *self.peek() == Tok::DArrow {
            self.bump();
            let rhs = self.parse_implies()?;
            lhs = SF::Iff(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_implies(&mut self) -> Result<SF, ParseError> {
        let lhs = self.parse_or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.parse_implies()?; // right-associative
            Ok(SF::Implies(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn parse_or(&mut self) -> Result<SF, ParseError> {
        let mut lhs = self.parse_and()?;
        while *self.peek() == Tok::Bar {
            self.bump();
            let rhs = self.parse_and()?;
            lhs = SF::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<SF, ParseError> {
        let mut lhs = self.parse_not()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.parse_not()?;
            lhs = SF::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_not(&mut self) -> Result<SF, ParseError> {
        if *self.peek() == Tok::Tilde {
            self.bump();
            let inner = self.parse_not()?;
            Ok(SF::Not(Box::new(inner)))
        } else {
            self.parse_primary_formula()
        }
    }

    fn is_quantifier(&self) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == "forall" || w == "exists")
    }

    fn parse_primary_formula(&mut self) -> Result<SF, ParseError> {
        if self.is_quantifier() {
            return self.parse_quantified();
        }
        if *self.peek() == Tok::LParen {
            // Could be a parenthesized formula or a parenthesized term that
            // starts an atom.  Try the formula reading first and fall back.
            let save = self.pos;
            self.bump();
            if let Ok(f) = self.parse_formula() {
                if *self.peek() == Tok::RParen {
                    let after = self.pos;
                    self.pos = after;
                    self.bump();
                    // If a term operator or relation follows, the parens
                    // belonged to a term after all.
                    if !matches!(
                        self.peek(),
                        Tok::Plus
                            | Tok::Minus
                            | Tok::Star
                            | Tok::Eq
                            | Tok::Lt
                            | Tok::Le
                            | Tok::Gt
                            | Tok::Ge
                    ) {
                        return Ok(f);
                    }
                }
            }
            self.pos = save;
        }
        self.parse_atom()
    }

    fn parse_quantified(&mut self) -> Result<SF, ParseError> {
        let word = match self.bump() {
            Tok::Ident(w) => w,
            _ => unreachable!(),
        };
        let mut binders: Vec<(String, Sort, Pos)> = Vec::new();
        loop {
            let pos = self.peek_pos();
            let name = match self.bump() {
                Tok::Ident(n) => n,
                t => {
                    return Err(ParseError::Syntax {
                        line: pos.line,
                        col: pos.col,
                        msg: format!("expected binder name, found {}", t.describe()),
                    })
                }
            };
            if name == "forall" || name == "exists" {
                return Err(ParseError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    msg: format!("`{name}` is a keyword and cannot be a variable"),
                });
            }
            self.expect(&Tok::Colon)?;
            let sort_pos = self.peek_pos();
            let sort = match self.bump() {
                Tok::Ident(s) if s == "R" => Sort::Scalar,
                Tok::Ident(s) if s == "V" => Sort::Vector,
                t => {
                    return Err(ParseError::Syntax {
                        line: sort_pos.line,
                        col: sort_pos.col,
                        msg: format!("expected sort `R` or `V`, found {}", t.describe()),
                    })
                }
            };
            binders.push((name, sort, pos));
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(&Tok::Dot)?;
        let body = self.parse_formula()?;
        let mut f = body;
        for (name, sort, pos) in binders.into_iter().rev() {
            f = if word == "forall" {
                SF::Forall(name, sort, pos, Box::new(f))
            } else {
                SF::Exists(name, sort, pos, Box::new(f))
            };
        }
        Ok(f)
    }

    fn parse_atom(&mut self) -> Result<SF, ParseError> {
        let lhs = self.parse_expr()?;
        let pos = self.peek_pos();
        let op = match self.peek() {
            Tok::Eq => RelOp::Eq,
            Tok::Lt => RelOp::Lt,
            Tok::Le => RelOp::Le,
            Tok::Gt => RelOp::Gt,
            Tok::Ge => RelOp::Ge,
            t => {
                return self.err(format!(
                    "expected a comparison operator, found {}",
                    t.describe()
                ))
            }
        };
        self.bump();
        let rhs = self.parse_expr()?;
        Ok(SF::Rel(op, lhs, rhs, pos))
    }

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.parse_term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.parse_term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn parse_term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_factor()?;
        while *self.peek() == Tok::Star {
            let pos = self.peek_pos();
            self.bump();
            let rhs = self.parse_factor()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs), pos);
        }
        Ok(lhs)
    }

    fn parse_factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            // Fold a negated numeric literal (but not a parenthesized
            // expression that happens to evaluate to a number) into a
            // negative rational constant so that printing negative
            // constants round-trips structurally.
            let literal = matches!(self.peek(), Tok::Nat(_));
            let inner = self.parse_factor()?;
            if literal {
                if let Expr::Num(q) = &inner {
                    return Ok(Expr::Num(-q.clone()));
                }
            }
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.parse_primary_expr()
    }

    fn parse_primary_expr(&mut self) -> Result<Expr, ParseError> {
        let pos = self.peek_pos();
        match self.peek().clone() {
            Tok::Nat(n) => {
                self.bump();
                if *self.peek() == Tok::Slash {
                    self.bump();
                    let dpos = self.peek_pos();
                    match self.bump() {
                        Tok::Nat(d) => {
                            if d.is_zero() {
                                return Err(ParseError::Syntax {
                                    line: dpos.line,
                                    col: dpos.col,
                                    msg: "zero denominator".into(),
                                });
                            }
                            Ok(Expr::Num(Rat::new(n, d)))
                        }
                        t => Err(ParseError::Syntax {
                            line: dpos.line,
                            col: dpos.col,
                            msg: format!("expected denominator, found {}", t.describe()),
                        }),
                    }
                } else {
                    Ok(Expr::Num(Rat::from_integer(n)))
                }
            }
            Tok::ZeroVec => {
                self.bump();
                Ok(Expr::ZeroVec)
            }
            Tok::LParen => {
                self.bump();
                let e = self.parse_expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "inner" | "d" if *self.peek() == Tok::LParen => {
                        self.bump();
                        let a = self.parse_expr()?;
                        self.expect(&Tok::Comma)?;
                        let b = self.parse_expr()?;
                        self.expect(&Tok::RParen)?;
                        if name == "inner" {
                            Ok(Expr::Inner(Box::new(a), Box::new(b), pos))
                        } else {
                            Ok(Expr::Dist(Box::new(a), Box::new(b), pos))
                        }
                    }
                    "norm" | "abs" if *self.peek() == Tok::LParen => {
                        self.bump();
                        let a = self.parse_expr()?;
                        self.expect(&Tok::RParen)?;
                        if name == "norm" {
                            Ok(Expr::Norm(Box::new(a), pos))
                        } else {
                            Ok(Expr::Abs(Box::new(a), pos))
                        }
                    }
                    "forall" | "exists" => Err(ParseError::Syntax {
                        line: pos.line,
                        col: pos.col,
                        msg: format!("`{name}` is a keyword and cannot be a variable"),
                    }),
                    _ => Ok(Expr::Ident(name, pos)),
                }
            }
            t => Err(ParseError::Syntax {
                line: pos.line,
                col: pos.col,
                msg: format!("expected a term, found {}", t.describe()),
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Absolute-value expansion (surface level)
// ---------------------------------------------------------------------------

/// Find the first `abs` node (preorder) in an expression.
fn find_abs(e: &Expr) -> Option<&Expr> {
    match e {
        Expr::Abs(_, _) => Some(e),
        Expr::Num(_) | Expr::ZeroVec | Expr::Ident(_, _) => None,
        Expr::Neg(a) | Expr::Norm(a, _) => find_abs(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b, _) => {
            find_abs(a).or_else(|| find_abs(b))
        }
        Expr::Inner(a, b, _) | Expr::Dist(a, b, _) => find_abs(a).or_else(|| find_abs(b)),
    }
}

/// Replace every occurrence of `target` (syntactic equality) by `repl`.
fn replace_expr(e: &Expr, target: &Expr, repl: &Expr) -> Expr {
    if e == target {
        return repl.clone();
    }
    match e {
        Expr::Num(_) | Expr::ZeroVec | Expr::Ident(_, _) => e.clone(),
        Expr::Neg(a) => Expr::Neg(Box::new(replace_expr(a, target, repl))),
        Expr::Add(a, b) => Expr::Add(
            Box::new(replace_expr(a, target, repl)),
            Box::new(replace_expr(b, target, repl)),
        ),
        Expr::Sub(a, b) => Expr::Sub(
            Box::new(replace_expr(a, target, repl)),
            Box::new(replace_expr(b, target, repl)),
        ),
        Expr::Mul(a, b, p) => Expr::Mul(
            Box::new(replace_expr(a, target, repl)),
            Box::new(replace_expr(b, target, repl)),
            *p,
        ),
        Expr::Inner(a, b, p) => Expr::Inner(
            Box::new(replace_expr(a, target, repl)),
            Box::new(replace_expr(b, target, repl)),
            *p,
        ),
        Expr::Norm(a, p) => Expr::Norm(Box::new(replace_expr(a, target, repl)), *p),
        Expr::Dist(a, b, p) => Expr::Dist(
            Box::new(replace_expr(a, target, repl)),
            Box::new(replace_expr(b, target, repl)),
            *p,
        ),
        Expr::Abs(a, p) => Expr::Abs(Box::new(replace_expr(a, target, repl)), *p),
    }
}

/// Expand `abs` sugar inside an atom: `P(abs(t))` becomes
/// `(t >= 0 & P(t)) | (t < 0 & P(-t))`, iterated until no `abs` remains.
fn expand_abs_atom(op: RelOp, lhs: Expr, rhs: Expr, pos: Pos) -> SF {
    let found = find_abs(&lhs).or_else(|| find_abs(&rhs)).cloned();
    match found {
        None => SF::Rel(op, lhs, rhs, pos),
        Some(abs_node) => {
            let arg = match &abs_node {
                Expr::Abs(a, _) => (**a).clone(),
                _ => unreachable!(),
            };
            let pos_case = {
                let l = replace_expr(&lhs, &abs_node, &arg);
                let r = replace_expr(&rhs, &abs_node, &arg);
                SF::And(
                    Box::new(SF::Rel(RelOp::Ge, arg.clone(), Expr::Num(Rat::zero()), pos)),
                    Box::new(expand_abs_atom(op, l, r, pos)),
                )
            };
            let neg_arg = Expr::Neg(Box::new(arg.clone()));
            let neg_case = {
                let l = replace_expr(&lhs, &abs_node, &neg_arg);
                let r = replace_expr(&rhs, &abs_node, &neg_arg);
                SF::And(
                    Box::new(SF::Rel(RelOp::Lt, arg.clone(), Expr::Num(Rat::zero()), pos)),
                    Box::new(expand_abs_atom(op, l, r, pos)),
                )
            };
            SF::Or(Box::new(pos_case), Box::new(neg_case))
        }
    }
}

// ---------------------------------------------------------------------------
// Elaboration (sort inference)
// ---------------------------------------------------------------------------

enum Elab {
    S(ScalarTerm),
    V(VectorTerm),
}

struct Scope {
    stack: Vec<(String, Sort)>,
}

impl Scope {
    fn lookup(&self, name: &str) -> Option<Sort> {
        self.stack
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, s)| *s)
    }
}

fn sort_err<T>(pos: Pos, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError::Sort {
        line: pos.line,
        col: pos.col,
        msg: msg.into(),
    })
}

fn elab_expr(e: &Expr, scope: &Scope) -> Result<Elab, ParseError> {
    match e {
        Expr::Num(q) => Ok(Elab::S(ScalarTerm::Rat(q.clone()))),
        Expr::ZeroVec => Ok(Elab::V(VectorTerm::Zero)),
        Expr::Ident(name, _) => match scope.lookup(name) {
            Some(Sort::Scalar) | None => Ok(Elab::S(ScalarTerm::var(name.clone()))),
            Some(Sort::Vector) => Ok(Elab::V(VectorTerm::var(name.clone()))),
        },
        Expr::Neg(a) => match elab_expr(a, scope)? {
            Elab::S(t) => Ok(Elab::S(ScalarTerm::neg(t))),
            Elab::V(t) => Ok(Elab::V(VectorTerm::neg(t))),
        },
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            let sub = matches!(e, Expr::Sub(_, _));
            let ea = elab_expr(a, scope)?;
            let eb = elab_expr(b, scope)?;
            match (ea, eb) {
                (Elab::S(x), Elab::S(y)) => Ok(Elab::S(if sub {
                    ScalarTerm::sub(x, y)
                } else {
                    ScalarTerm::add(x, y)
                })),
                (Elab::V(x), Elab::V(y)) => Ok(Elab::V(if sub {
                    VectorTerm::sub(x, y)
                } else {
                    VectorTerm::add(x, y)
                })),
                _ => sort_err(
                    expr_pos(e),
                    "`+`/`-` operands must have the same sort".to_string(),
                ),
            }
        }
        Expr::Mul(a, b, pos) => {
            let ea = elab_expr(a, scope)?;
            let eb = elab_expr(b, scope)?;
            match (ea, eb) {
                (Elab::S(x), Elab::S(y)) => Ok(Elab::S(ScalarTerm::mul(x, y))),
                (Elab::S(x), Elab::V(y)) => Ok(Elab::V(VectorTerm::scale(x, y))),
                (Elab::V(_), _) => sort_err(
                    *pos,
                    "left operand of `*` must be a scalar (vectors cannot multiply)",
                ),
            }
        }
        Expr::Inner(a, b, pos) => {
            let x = expect_vector(a, scope, *pos, "inner")?;
            let y = expect_vector(b, scope, *pos, "inner")?;
            Ok(Elab::S(ScalarTerm::inner(x, y)))
        }
        Expr::Norm(a, pos) => {
            let x = expect_vector(a, scope, *pos, "norm")?;
            Ok(Elab::S(ScalarTerm::norm(x)))
        }
        Expr::Dist(a, b, pos) => {
            let x = expect_vector(a, scope, *pos, "d")?;
            let y = expect_vector(b, scope, *pos, "d")?;
            Ok(Elab::S(ScalarTerm::dist(x, y)))
        }
        Expr::Abs(_, pos) => sort_err(*pos, "internal: abs must be expanded before elaboration"),
    }
}

fn expr_pos(e: &Expr) -> Pos {
    match e {
        Expr::Ident(_, p)
        | Expr::Mul(_, _, p)
        | Expr::Inner(_, _, p)
        | Expr::Norm(_, p)
        | Expr::Dist(_, _, p)
        | Expr::Abs(_, p) => *p,
        Expr::Neg(a) => expr_pos(a),
        Expr::Add(a, _) | Expr::Sub(a, _) => expr_pos(a),
        Expr::Num(_) | Expr::ZeroVec => Pos { line: 1, col: 1 },
    }
}

fn expect_vector(
    e: &Expr,
    scope: &Scope,
    pos: Pos,
    fun: &str,
) -> Result<VectorTerm, ParseError> {
    match elab_expr(e, scope)? {
        Elab::V(v) => Ok(v),
        Elab::S(_) => sort_err(pos, format!("`{fun}` expects vector arguments")),
    }
}

fn elab_formula(sf: &SF, scope: &mut Scope) -> Result<Formula, ParseError> {
    match sf {
        SF::Rel(op, lhs, rhs, pos) => {
            // Expand abs sugar first; re-enter elaboration on the expansion.
            if find_abs(lhs).is_some() || find_abs(rhs).is_some() {
                let expanded = expand_abs_atom(*op, lhs.clone(), rhs.clone(), *pos);
                return elab_formula(&expanded, scope);
            }
            let ea = elab_expr(lhs, scope)?;
            let eb = elab_expr(rhs, scope)?;
            match (ea, eb) {
                (Elab::S(a), Elab::S(b)) => Ok(Formula::Cmp(*op, a, b)),
                (Elab::V(a), Elab::V(b)) => {
                    if *op == RelOp::Eq {
                        Ok(Formula::VecEq(a, b))
                    } else {
                        sort_err(*pos, "vectors admit only `=` comparisons")
                    }
                }
                _ => sort_err(*pos, "comparison operands must have the same sort"),
            }
        }
        SF::Not(p) => Ok(Formula::not(elab_formula(p, scope)?)),
        SF::And(a, b) => Ok(Formula::and(
            elab_formula(a, scope)?,
            elab_formula(b, scope)?,
        )),
        SF::Or(a, b) => Ok(Formula::or(
            elab_formula(a, scope)?,
            elab_formula(b, scope)?,
        )),
        SF::Implies(a, b) => Ok(Formula::implies(
            elab_formula(a, scope)?,
            elab_formula(b, scope)?,
        )),
        SF::Iff(a, b) => Ok(Formula::iff(
            elab_formula(a, scope)?,
            elab_formula(b, scope)?,
        )),
        SF::Forall(name, sort, pos, body) | SF::Exists(name, sort, pos, body) => {
            if let Some(prev) = scope.lookup(name) {
                if prev != *sort {
                    return sort_err(
                        *pos,
                        format!(
                            "variable `{name}` is already bound with sort {prev}; \
                             rebinding with sort {sort} is not allowed"
                        ),
                    );
                }
            }
            scope.stack.push((name.clone(), *sort));
            let b = elab_formula(body, scope);
            scope.stack.pop();
            let b = b?;
            Ok(match sf {
                SF::Forall(_, _, _, _) => Formula::forall(name.clone(), *sort, b),
                _ => Formula::exists(name.clone(), *sort, b),
            })
        }
    }
}

/// Parse a formula from text.  Free identifiers default to the scalar sort.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let sf = p.parse_formula()?;
    if *p.peek() != Tok::Eof {
        return p.err(format!(
            "unexpected {} after formula",
            p.peek().describe()
        ));
    }
    let mut scope = Scope { stack: Vec::new() };
    elab_formula(&sf, &mut scope)
}
