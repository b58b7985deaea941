//! Tokenizer and precedence-climbing parser for EVAL expressions.

use super::{Atom, BoolExpr, CmpOp, EvalAst, EvalError, ValueExpr};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Var(String),
    Int(i64),
    Str(String),
    Ident(String),
    Cmp(CmpOp),
    Plus,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, EvalError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, msg: String| EvalError::Syntax { pos: pos + 1, msg };
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        match c {
            ' ' | '\t' => {
                i += 1;
                continue;
            }
            '{' => {
                let close = chars[i + 1..]
                    .iter()
                    .position(|&c| c == '}')
                    .ok_or_else(|| err(i, "unclosed `{`".into()))?;
                let name: String = chars[i + 1..i + 1 + close].iter().collect();
                let name = name.trim().to_string();
                let ok = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                    && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                if !ok {
                    return Err(err(i, format!("bad placeholder `{{{name}}}`")));
                }
                out.push((start, Tok::Var(name)));
                i += close + 2;
            }
            '\'' | '"' => {
                let close = chars[i + 1..]
                    .iter()
                    .position(|&x| x == c)
                    .ok_or_else(|| err(i, "unterminated string".into()))?;
                out.push((start, Tok::Str(chars[i + 1..i + 1 + close].iter().collect())));
                i += close + 2;
            }
            '0'..='9' => {
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let n = text
                    .parse::<i64>()
                    .map_err(|_| err(start, format!("integer `{text}` out of range")))?;
                out.push((start, Tok::Int(n)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(chars[start..i].iter().collect())));
            }
            '+' => {
                out.push((start, Tok::Plus));
                i += 1;
            }
            '(' => {
                out.push((start, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((start, Tok::RParen));
                i += 1;
            }
            '=' | '!' | '<' | '>' => {
                let two = chars.get(i + 1) == Some(&'=');
                let op = match (c, two) {
                    ('=', true) => CmpOp::Eq,
                    ('!', true) => CmpOp::Ne,
                    ('<', true) => CmpOp::Le,
                    ('>', true) => CmpOp::Ge,
                    ('<', false) => CmpOp::Lt,
                    ('>', false) => CmpOp::Gt,
                    _ => return Err(err(i, format!("unexpected `{c}`"))),
                };
                out.push((start, Tok::Cmp(op)));
                i += if two { 2 } else { 1 };
            }
            _ => return Err(err(i, format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

/// Untyped parse tree; classified into [`EvalAst`] afterwards.
#[derive(Clone, Debug)]
enum Expr {
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Xor(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Var(String),
    Int(i64),
    Str(String),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn at(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |(p, _)| *p) + 1
    }

    fn err(&self, msg: impl Into<String>) -> EvalError {
        EvalError::Syntax {
            pos: self.at(),
            msg: msg.into(),
        }
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn expr(&mut self) -> Result<Expr, EvalError> {
        let then = self.or()?;
        if !self.keyword("if") {
            return Ok(then);
        }
        self.pos += 1;
        let cond = self.or()?;
        if !self.keyword("else") {
            return Err(self.err("expected `else`"));
        }
        self.pos += 1;
        let otherwise = self.or()?;
        if self.keyword("if") {
            return Err(self.err("chained conditional expressions are not supported"));
        }
        Ok(Expr::Cond(Box::new(then), Box::new(cond), Box::new(otherwise)))
    }

    fn or(&mut self) -> Result<Expr, EvalError> {
        let mut lhs = self.and()?;
        loop {
            if self.keyword("or") {
                self.pos += 1;
                lhs = Expr::Or(Box::new(lhs), Box::new(self.and()?));
            } else if self.keyword("xor") {
                self.pos += 1;
                lhs = Expr::Xor(Box::new(lhs), Box::new(self.and()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn and(&mut self) -> Result<Expr, EvalError> {
        let mut lhs = self.not()?;
        while self.keyword("and") {
            self.pos += 1;
            lhs = Expr::And(Box::new(lhs), Box::new(self.not()?));
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, EvalError> {
        if self.keyword("not") {
            self.pos += 1;
            return Ok(Expr::Not(Box::new(self.not()?)));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Result<Expr, EvalError> {
        let lhs = self.sum()?;
        let Some(Tok::Cmp(op)) = self.peek().cloned() else {
            return Ok(lhs);
        };
        self.pos += 1;
        let rhs = self.sum()?;
        if matches!(self.peek(), Some(Tok::Cmp(_))) {
            return Err(self.err("chained comparisons are not supported"));
        }
        Ok(Expr::Cmp(op, Box::new(lhs), Box::new(rhs)))
    }

    fn sum(&mut self) -> Result<Expr, EvalError> {
        let mut lhs = self.primary()?;
        while self.peek() == Some(&Tok::Plus) {
            self.pos += 1;
            lhs = Expr::Add(Box::new(lhs), Box::new(self.primary()?));
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<Expr, EvalError> {
        let tok = self.peek().cloned();
        match tok {
            Some(Tok::Var(v)) => {
                self.pos += 1;
                Ok(Expr::Var(v))
            }
            Some(Tok::Int(n)) => {
                self.pos += 1;
                Ok(Expr::Int(n))
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Expr::Str(s))
            }
            Some(Tok::Ident(s)) if s == "True" || s == "False" => {
                self.pos += 1;
                Ok(Expr::Str(s))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(Tok::Ident(s)) => Err(self.err(format!("unexpected word `{s}`"))),
            Some(t) => Err(self.err(format!("unexpected token {t:?}"))),
            None => Err(self.err("unexpected end of expression")),
        }
    }
}

/// Parses an EVAL expression.
///
/// Precedence from loosest to tightest: `x if c else y`, `or`/`xor`, `and`,
/// `not`, comparisons, `+`. Comparisons do not chain.
pub fn parse_eval(src: &str) -> Result<EvalAst, EvalError> {
    if src.trim().is_empty() {
        return Err(EvalError::Syntax {
            pos: 1,
            msg: "empty expression".into(),
        });
    }
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        len: src.chars().count(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    classify(e)
}

fn classify(e: Expr) -> Result<EvalAst, EvalError> {
    match e {
        Expr::Cond(then, cond, otherwise) => Ok(EvalAst::Conditional {
            cond: to_bool(*cond)?,
            then: to_value(*then)?,
            otherwise: to_value(*otherwise)?,
        }),
        e @ (Expr::Or(..) | Expr::Xor(..) | Expr::And(..) | Expr::Not(_) | Expr::Cmp(..)) => {
            Ok(EvalAst::Bool(to_bool(e)?))
        }
        e => Ok(EvalAst::Value(to_value(e)?)),
    }
}

fn type_err(msg: &str) -> EvalError {
    EvalError::Syntax {
        pos: 0,
        msg: msg.to_string(),
    }
}

fn to_bool(e: Expr) -> Result<BoolExpr, EvalError> {
    let b = |x: Box<Expr>| to_bool(*x).map(Box::new);
    Ok(match e {
        Expr::Not(x) => BoolExpr::Not(b(x)?),
        Expr::And(x, y) => BoolExpr::And(b(x)?, b(y)?),
        Expr::Or(x, y) => BoolExpr::Or(b(x)?, b(y)?),
        Expr::Xor(x, y) => BoolExpr::Xor(b(x)?, b(y)?),
        Expr::Cmp(op, l, r) => BoolExpr::Atom(Atom::Compare {
            op,
            lhs: to_value(*l)?,
            rhs: to_value(*r)?,
        }),
        Expr::Var(v) => BoolExpr::Atom(Atom::Truthy(v)),
        Expr::Cond(..) => return Err(type_err("a conditional expression cannot be used as a condition")),
        Expr::Int(_) | Expr::Str(_) | Expr::Add(..) => {
            return Err(type_err(
                "constant or arithmetic operand used where a boolean is expected",
            ))
        }
    })
}

fn to_value(e: Expr) -> Result<ValueExpr, EvalError> {
    Ok(match e {
        Expr::Var(v) => ValueExpr::Var(v),
        Expr::Int(n) => ValueExpr::Int(n),
        Expr::Str(s) => ValueExpr::Str(s),
        Expr::Add(a, b) => ValueExpr::Add(Box::new(to_value(*a)?), Box::new(to_value(*b)?)),
        Expr::Cond(..) => return Err(type_err("nested conditional expressions are not supported")),
        _ => return Err(type_err("boolean expression used where a value is expected")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(s: &str) -> ValueExpr {
        ValueExpr::Var(s.into())
    }

    #[test]
    fn conditional_selection() {
        let ast = parse_eval("'yes' if {ANSWER0} != {ANSWER1} else 'no'").unwrap();
        assert_eq!(
            ast,
            EvalAst::Conditional {
                cond: BoolExpr::Atom(Atom::Compare {
                    op: CmpOp::Ne,
                    lhs: var("ANSWER0"),
                    rhs: var("ANSWER1"),
                }),
                then: ValueExpr::Str("yes".into()),
                otherwise: ValueExpr::Str("no".into()),
            }
        );
    }

    #[test]
    fn threshold_comparison() {
        assert_eq!(
            parse_eval("{ANSWER0} >= 7").unwrap(),
            EvalAst::Bool(BoolExpr::Atom(Atom::Compare {
                op: CmpOp::Ge,
                lhs: var("ANSWER0"),
                rhs: ValueExpr::Int(7),
            }))
        );
    }

    #[test]
    fn double_negation_structure() {
        let t = BoolExpr::Atom(Atom::Truthy("ANSWER0".into()));
        assert_eq!(
            parse_eval("not not {ANSWER0}").unwrap(),
            EvalAst::Bool(BoolExpr::Not(Box::new(BoolExpr::Not(Box::new(t)))))
        );
    }

    #[test]
    fn precedence() {
        // and binds tighter than or/xor; + tighter than ==.
        let ast = parse_eval("{A} or {B} and {C} == 1 + 2").unwrap();
        let EvalAst::Bool(BoolExpr::Or(_, rhs)) = ast else {
            panic!("expected or at the root")
        };
        let BoolExpr::And(_, cmp) = *rhs else {
            panic!("expected and")
        };
        assert!(matches!(
            *cmp,
            BoolExpr::Atom(Atom::Compare {
                op: CmpOp::Eq,
                rhs: ValueExpr::Add(..),
                ..
            })
        ));
    }

    #[test]
    fn seal_program_expressions() {
        parse_eval("{ANSWER0} == 2 and {ANSWER2} and {ANSWER4}").unwrap();
        parse_eval("{ANSWER6} xor {ANSWER7}").unwrap();
        parse_eval("{ANSWER0} + {ANSWER1} == 1").unwrap();
        parse_eval("{ANSWER1} if {ANSWER0} == 'yes' else {ANSWER2}").unwrap();
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "",
            "{A} ==",
            "1 < {A} < 3",
            "'a' if {A} else 'b' if {B} else 'c'",
            "{A} and 3",
            "({A}",
            "{A} @ {B}",
            "{1A}",
            "'unterminated",
        ] {
            assert!(parse_eval(bad).is_err(), "accepted {bad:?}");
        }
    }
}
