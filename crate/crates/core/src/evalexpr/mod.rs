//! The EVAL expression language and its probabilistic semantics.
//!
//! Grammar and typing rules are documented in `docs/eval-grammar.md`.

mod parse;
mod semantics;

pub use parse::parse_eval;
pub use semantics::{
    and, atom_prob, atom_prob_joint, bool_prob, conditional_mixture, eval_dist, eval_point, not, or, value_dist, xor,
    Bernoulli, JointTable,
};

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Ge,
    Le,
    Gt,
    Lt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ValueExpr {
    Var(String),
    Int(i64),
    Str(String),
    Add(Box<ValueExpr>, Box<ValueExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    Compare {
        op: CmpOp,
        lhs: ValueExpr,
        rhs: ValueExpr,
    },
    /// A yes/no or True/False answer used directly as a condition.
    Truthy(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BoolExpr {
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Xor(Box<BoolExpr>, Box<BoolExpr>),
    Atom(Atom),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EvalAst {
    /// `then if cond else otherwise`
    Conditional {
        cond: BoolExpr,
        then: ValueExpr,
        otherwise: ValueExpr,
    },
    Bool(BoolExpr),
    Value(ValueExpr),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("cannot apply `{op}` to {lhs} and {rhs}")]
    TypeMismatch { op: &'static str, lhs: String, rhs: String },
    #[error("`{var}` = `{value}` is not a yes/no or True/False answer")]
    NonBooleanTruthy { var: String, value: String },
    #[error("support of the joint table exceeds {0} assignments")]
    TooLarge(usize),
}

impl ValueExpr {
    fn collect<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ValueExpr::Var(v) => out.push(v),
            ValueExpr::Add(a, b) => {
                a.collect(out);
                b.collect(out);
            }
            ValueExpr::Int(_) | ValueExpr::Str(_) => {}
        }
    }
}

impl Atom {
    /// Placeholder occurrences, left to right, with repetition.
    pub fn var_occurrences(&self) -> Vec<&str> {
        let mut out = Vec::new();
        match self {
            Atom::Compare { lhs, rhs, .. } => {
                lhs.collect(&mut out);
                rhs.collect(&mut out);
            }
            Atom::Truthy(v) => out.push(v),
        }
        out
    }

    /// Distinct variables in first-occurrence order.
    pub fn vars(&self) -> Vec<&str> {
        dedup(self.var_occurrences())
    }
}

impl BoolExpr {
    fn collect<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            BoolExpr::Not(x) => x.collect(out),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) | BoolExpr::Xor(a, b) => {
                a.collect(out);
                b.collect(out);
            }
            BoolExpr::Atom(a) => out.extend(a.var_occurrences()),
        }
    }

    /// Atoms in pre-order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        fn go<'a>(e: &'a BoolExpr, out: &mut Vec<&'a Atom>) {
            match e {
                BoolExpr::Not(x) => go(x, out),
                BoolExpr::And(a, b) | BoolExpr::Or(a, b) | BoolExpr::Xor(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                BoolExpr::Atom(a) => out.push(a),
            }
        }
        go(self, &mut out);
        out
    }
}

impl EvalAst {
    /// Placeholder occurrences with repetition: condition first, then the
    /// selected branches.
    pub fn var_occurrences(&self) -> Vec<&str> {
        let mut out = Vec::new();
        match self {
            EvalAst::Conditional { cond, then, otherwise } => {
                cond.collect(&mut out);
                then.collect(&mut out);
                otherwise.collect(&mut out);
            }
            EvalAst::Bool(b) => b.collect(&mut out),
            EvalAst::Value(v) => v.collect(&mut out),
        }
        out
    }

    /// Distinct variables in first-occurrence order.
    pub fn vars(&self) -> Vec<&str> {
        dedup(self.var_occurrences())
    }
}

fn dedup(v: Vec<&str>) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::with_capacity(v.len());
    for x in v {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

impl fmt::Display for ValueExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueExpr::Var(v) => write!(f, "{{{v}}}"),
            ValueExpr::Int(n) => write!(f, "{n}"),
            ValueExpr::Str(s) if s == "True" || s == "False" => f.write_str(s),
            ValueExpr::Str(s) if s.contains('\'') => write!(f, "\"{s}\""),
            ValueExpr::Str(s) => write!(f, "'{s}'"),
            ValueExpr::Add(a, b) => write!(f, "{a} + {b}"),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Compare { op, lhs, rhs } => write!(f, "{lhs} {} {rhs}", op.symbol()),
            Atom::Truthy(v) => write!(f, "{{{v}}}"),
        }
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolExpr::Not(x) => write!(f, "not {}", Paren(x)),
            BoolExpr::And(a, b) => write!(f, "{} and {}", Paren(a), Paren(b)),
            BoolExpr::Or(a, b) => write!(f, "{} or {}", Paren(a), Paren(b)),
            BoolExpr::Xor(a, b) => write!(f, "{} xor {}", Paren(a), Paren(b)),
            BoolExpr::Atom(a) => a.fmt(f),
        }
    }
}

/// Parenthesizes compound operands so printing never depends on precedence.
struct Paren<'a>(&'a BoolExpr);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            BoolExpr::Atom(a) => a.fmt(f),
            BoolExpr::Not(_) => self.0.fmt(f),
            e => write!(f, "({e})"),
        }
    }
}

impl fmt::Display for EvalAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalAst::Conditional { cond, then, otherwise } => write!(f, "{then} if {cond} else {otherwise}"),
            EvalAst::Bool(b) => b.fmt(f),
            EvalAst::Value(v) => v.fmt(f),
        }
    }
}
