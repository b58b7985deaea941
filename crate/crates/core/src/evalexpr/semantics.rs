//! Point evaluation and the probabilistic (independence-assuming) semantics.

use crate::diff::{Scalar, Tape};
use crate::value::{Categorical, Value};

use super::{Atom, BoolExpr, CmpOp, EvalAst, EvalError, ValueExpr};

/// Cap on enumerated assignments inside one atom or value expression.
const MAX_ASSIGNMENTS: usize = 1 << 20;

fn lookup(env: &dyn Fn(&str) -> Option<Value>, v: &str) -> Result<Value, EvalError> {
    env(v).ok_or_else(|| EvalError::UnboundVariable(v.to_string()))
}

fn value_point(e: &ValueExpr, env: &dyn Fn(&str) -> Option<Value>) -> Result<Value, EvalError> {
    match e {
        ValueExpr::Var(v) => lookup(env, v),
        ValueExpr::Int(n) => Ok(Value::Int(*n)),
        ValueExpr::Str(s) => Ok(Value::token(s.clone())),
        ValueExpr::Add(a, b) => {
            let (x, y) = (value_point(a, env)?, value_point(b, env)?);
            match (&x, &y) {
                (Value::Int(p), Value::Int(q)) => Ok(Value::Int(p + q)),
                _ => Err(mismatch("+", &x, &y)),
            }
        }
    }
}

fn mismatch(op: &'static str, a: &Value, b: &Value) -> EvalError {
    EvalError::TypeMismatch {
        op,
        lhs: format!("{} `{a}`", a.type_name()),
        rhs: format!("{} `{b}`", b.type_name()),
    }
}

fn compare(op: CmpOp, a: &Value, b: &Value) -> Result<bool, EvalError> {
    use std::cmp::Ordering::*;
    let ord = match (a, b) {
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Token(x), Value::Token(y)) if matches!(op, CmpOp::Eq | CmpOp::Ne) => {
            if x == y {
                Equal
            } else {
                Less
            }
        }
        _ => return Err(mismatch(op.symbol(), a, b)),
    };
    Ok(match op {
        CmpOp::Eq => ord == Equal,
        CmpOp::Ne => ord != Equal,
        CmpOp::Ge => ord != Less,
        CmpOp::Le => ord != Greater,
        CmpOp::Gt => ord == Greater,
        CmpOp::Lt => ord == Less,
    })
}

fn truthy(var: &str, v: &Value) -> Result<bool, EvalError> {
    match v.as_token() {
        Some("yes" | "True") => Ok(true),
        Some("no" | "False") => Ok(false),
        _ => Err(EvalError::NonBooleanTruthy {
            var: var.to_string(),
            value: v.to_string(),
        }),
    }
}

fn atom_point(a: &Atom, env: &dyn Fn(&str) -> Option<Value>) -> Result<bool, EvalError> {
    match a {
        Atom::Compare { op, lhs, rhs } => compare(*op, &value_point(lhs, env)?, &value_point(rhs, env)?),
        Atom::Truthy(v) => truthy(v, &lookup(env, v)?),
    }
}

fn bool_point(e: &BoolExpr, env: &dyn Fn(&str) -> Option<Value>) -> Result<bool, EvalError> {
    Ok(match e {
        BoolExpr::Not(x) => !bool_point(x, env)?,
        BoolExpr::And(a, b) => {
            let (x, y) = (bool_point(a, env)?, bool_point(b, env)?);
            x && y
        }
        BoolExpr::Or(a, b) => {
            let (x, y) = (bool_point(a, env)?, bool_point(b, env)?);
            x || y
        }
        BoolExpr::Xor(a, b) => bool_point(a, env)? != bool_point(b, env)?,
        BoolExpr::Atom(a) => atom_point(a, env)?,
    })
}

/// Evaluates an expression on fixed answers. Boolean expressions yield the
/// tokens `True`/`False`.
///
/// Both operands of every connective are evaluated (no short-circuit), so a
/// type error anywhere in the expression is always reported.
pub fn eval_point(ast: &EvalAst, env: &dyn Fn(&str) -> Option<Value>) -> Result<Value, EvalError> {
    match ast {
        EvalAst::Conditional { cond, then, otherwise } => {
            let c = bool_point(cond, env)?;
            let (t, o) = (value_point(then, env)?, value_point(otherwise, env)?);
            Ok(if c { t } else { o })
        }
        EvalAst::Bool(b) => Ok(Value::boolean(bool_point(b, env)?)),
        EvalAst::Value(v) => value_point(v, env),
    }
}

/// A probability of truth. `P(false)` is implicitly `1 - p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bernoulli {
    pub p: Scalar,
}

impl Bernoulli {
    pub fn new(p: Scalar) -> Self {
        Bernoulli { p }
    }

    pub fn constant(p: f64) -> Self {
        Bernoulli { p: Scalar::constant(p) }
    }

    pub fn value(self) -> f64 {
        self.p.value()
    }
}

pub fn not(tape: &mut Tape, a: Bernoulli) -> Bernoulli {
    Bernoulli::new(tape.complement(a.p))
}

pub fn and(tape: &mut Tape, a: Bernoulli, b: Bernoulli) -> Bernoulli {
    Bernoulli::new(tape.mul(a.p, b.p))
}

pub fn or(tape: &mut Tape, a: Bernoulli, b: Bernoulli) -> Bernoulli {
    let na = tape.complement(a.p);
    let nb = tape.complement(b.p);
    let both = tape.mul(na, nb);
    Bernoulli::new(tape.complement(both))
}

pub fn xor(tape: &mut Tape, a: Bernoulli, b: Bernoulli) -> Bernoulli {
    let na = tape.complement(a.p);
    let nb = tape.complement(b.p);
    let l = tape.mul(a.p, nb);
    let r = tape.mul(na, b.p);
    Bernoulli::new(tape.add(l, r))
}

/// Combines atom probabilities with the product-form connectives, treating
/// the two operands of every connective as independent.
pub fn bool_prob(
    expr: &BoolExpr,
    tape: &mut Tape,
    atom: &mut dyn FnMut(&Atom, &mut Tape) -> Result<Bernoulli, EvalError>,
) -> Result<Bernoulli, EvalError> {
    Ok(match expr {
        BoolExpr::Not(x) => {
            let p = bool_prob(x, tape, atom)?;
            not(tape, p)
        }
        BoolExpr::And(a, b) => {
            let (x, y) = (bool_prob(a, tape, atom)?, bool_prob(b, tape, atom)?);
            and(tape, x, y)
        }
        BoolExpr::Or(a, b) => {
            let (x, y) = (bool_prob(a, tape, atom)?, bool_prob(b, tape, atom)?);
            or(tape, x, y)
        }
        BoolExpr::Xor(a, b) => {
            let (x, y) = (bool_prob(a, tape, atom)?, bool_prob(b, tape, atom)?);
            xor(tape, x, y)
        }
        BoolExpr::Atom(a) => atom(a, tape)?,
    })
}

/// Enumerates the product of the given marginals, calling `f` with each
/// assignment and its probability.
fn for_each_assignment<F>(
    vars: &[&str],
    dists: &dyn Fn(&str) -> Option<Categorical>,
    tape: &mut Tape,
    mut f: F,
) -> Result<(), EvalError>
where
    F: FnMut(&[Value], Scalar, &mut Tape) -> Result<(), EvalError>,
{
    let ds: Vec<Categorical> = vars
        .iter()
        .map(|v| dists(v).ok_or_else(|| EvalError::UnboundVariable(v.to_string())))
        .collect::<Result<_, _>>()?;
    let total: usize = ds.iter().map(Categorical::len).product();
    if total > MAX_ASSIGNMENTS {
        return Err(EvalError::TooLarge(MAX_ASSIGNMENTS));
    }
    let mut idx = vec![0usize; ds.len()];
    let mut vals: Vec<Value> = ds.iter().map(|d| d.support()[0].clone()).collect();
    for _ in 0..total {
        let mut w = Scalar::ONE;
        for (k, d) in ds.iter().enumerate() {
            vals[k] = d.support()[idx[k]].clone();
            w = tape.mul(w, d.probs()[idx[k]]);
        }
        f(&vals, w, tape)?;
        for k in (0..ds.len()).rev() {
            idx[k] += 1;
            if idx[k] < ds[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(())
}

fn env_from<'a>(vars: &'a [&'a str], vals: &'a [Value]) -> impl Fn(&str) -> Option<Value> + 'a {
    move |name| vars.iter().position(|v| *v == name).map(|i| vals[i].clone())
}

/// Probability that an atom holds when its variables are independent with
/// the given marginals.
pub fn atom_prob(
    atom: &Atom,
    tape: &mut Tape,
    dists: &dyn Fn(&str) -> Option<Categorical>,
) -> Result<Bernoulli, EvalError> {
    let vars = atom.vars();
    let mut hits = Vec::new();
    for_each_assignment(&vars, dists, tape, |vals, w, _| {
        if atom_point(atom, &env_from(&vars, vals))? {
            hits.push(w);
        }
        Ok(())
    })?;
    Ok(Bernoulli::new(tape.sum(&hits)))
}

/// An explicit joint distribution over several variables.
#[derive(Clone, Debug)]
pub struct JointTable {
    pub vars: Vec<String>,
    pub rows: Vec<(Vec<Value>, Scalar)>,
}

impl JointTable {
    /// The product of independent marginals.
    pub fn product(
        tape: &mut Tape,
        vars: &[&str],
        dists: &dyn Fn(&str) -> Option<Categorical>,
    ) -> Result<Self, EvalError> {
        let mut rows = Vec::new();
        for_each_assignment(vars, dists, tape, |vals, w, _| {
            rows.push((vals.to_vec(), w));
            Ok(())
        })?;
        Ok(JointTable {
            vars: vars.iter().map(|s| s.to_string()).collect(),
            rows,
        })
    }
}

/// Probability that an atom holds under an explicit joint table.
pub fn atom_prob_joint(atom: &Atom, tape: &mut Tape, joint: &JointTable) -> Result<Bernoulli, EvalError> {
    for v in atom.vars() {
        if !joint.vars.iter().any(|j| j == v) {
            return Err(EvalError::UnboundVariable(v.to_string()));
        }
    }
    let names: Vec<&str> = joint.vars.iter().map(String::as_str).collect();
    let mut hits = Vec::new();
    for (vals, w) in &joint.rows {
        if atom_point(atom, &env_from(&names, vals))? {
            hits.push(*w);
        }
    }
    Ok(Bernoulli::new(tape.sum(&hits)))
}

/// Distribution of a value expression under independent marginals.
pub fn value_dist(
    e: &ValueExpr,
    tape: &mut Tape,
    dists: &dyn Fn(&str) -> Option<Categorical>,
) -> Result<Categorical, EvalError> {
    match e {
        ValueExpr::Var(v) => dists(v).ok_or_else(|| EvalError::UnboundVariable(v.clone())),
        ValueExpr::Int(n) => Ok(Categorical::point(Value::Int(*n))),
        ValueExpr::Str(s) => Ok(Categorical::point(Value::token(s.clone()))),
        ValueExpr::Add(..) => {
            let mut vars = Vec::new();
            e.collect(&mut vars);
            let vars = super::dedup(vars);
            let mut items = Vec::new();
            for_each_assignment(&vars, dists, tape, |vals, w, _| {
                items.push((value_point(e, &env_from(&vars, vals))?, w));
                Ok(())
            })?;
            Ok(Categorical::from_weighted(tape, items))
        }
    }
}

/// `P(a) = p * P_then(a) + (1 - p) * P_else(a)` over the union of supports
/// (then-support first).
pub fn conditional_mixture(
    tape: &mut Tape,
    cond: Bernoulli,
    then: &Categorical,
    otherwise: &Categorical,
) -> Categorical {
    let q = tape.complement(cond.p);
    let mut items = Vec::with_capacity(then.len() + otherwise.len());
    for (v, p) in then.iter() {
        items.push((v.clone(), tape.mul(cond.p, p)));
    }
    for (v, p) in otherwise.iter() {
        items.push((v.clone(), tape.mul(q, p)));
    }
    Categorical::from_weighted(tape, items)
}

/// Answer distribution of an EVAL expression from the marginals of its
/// variables, combining atoms with the product-form connectives. Exact only
/// when distinct atoms and branches are independent.
pub fn eval_dist(
    ast: &EvalAst,
    tape: &mut Tape,
    dists: &dyn Fn(&str) -> Option<Categorical>,
) -> Result<Categorical, EvalError> {
    let mut atom_fn = |a: &Atom, t: &mut Tape| atom_prob(a, t, dists);
    match ast {
        EvalAst::Conditional { cond, then, otherwise } => {
            let c = bool_prob(cond, tape, &mut atom_fn)?;
            let t = value_dist(then, tape, dists)?;
            let o = value_dist(otherwise, tape, dists)?;
            Ok(conditional_mixture(tape, c, &t, &o))
        }
        EvalAst::Bool(b) => {
            let p = bool_prob(b, tape, &mut atom_fn)?;
            let q = tape.complement(p.p);
            Ok(
                Categorical::new(vec![Value::boolean(true), Value::boolean(false)], vec![p.p, q])
                    .expect("two distinct tokens"),
            )
        }
        EvalAst::Value(v) => value_dist(v, tape, dists),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalexpr::parse_eval;

    fn cat(pairs: &[(Value, f64)]) -> Categorical {
        Categorical::from_f64(pairs.iter().cloned()).unwrap()
    }

    fn ints(pairs: &[(i64, f64)]) -> Categorical {
        cat(&pairs.iter().map(|&(v, p)| (Value::Int(v), p)).collect::<Vec<_>>())
    }

    fn toks(pairs: &[(&str, f64)]) -> Categorical {
        cat(&pairs.iter().map(|&(v, p)| (Value::token(v), p)).collect::<Vec<_>>())
    }

    fn atom_of(src: &str) -> Atom {
        match parse_eval(src).unwrap() {
            EvalAst::Bool(BoolExpr::Atom(a)) => a,
            other => panic!("not an atom: {other:?}"),
        }
    }

    #[test]
    fn direct_mass_lookup() {
        let d = ints(&[(2, 0.7), (3, 0.3)]);
        let mut t = Tape::inference();
        let p = atom_prob(&atom_of("{A0} == 2"), &mut t, &|_| Some(d.clone())).unwrap();
        assert_eq!(p.value(), 0.7);
    }

    #[test]
    fn sum_atom_over_independent_answers() {
        let a0 = ints(&[(0, 0.5), (1, 0.5)]);
        let a1 = ints(&[(0, 0.4), (1, 0.6)]);
        let dists = |v: &str| match v {
            "A0" => Some(a0.clone()),
            "A1" => Some(a1.clone()),
            _ => None,
        };
        let mut t = Tape::inference();
        let p = atom_prob(&atom_of("{A0} + {A1} == 1"), &mut t, &dists).unwrap();
        // Enumerate the four joint assignments by hand.
        let oracle = 0.5 * 0.6 + 0.5 * 0.4;
        assert!((p.value() - oracle).abs() < 1e-15);
    }

    #[test]
    fn inequality_of_independent_colors() {
        let d = toks(&[("red", 0.8), ("blue", 0.2)]);
        let mut t = Tape::inference();
        let p = atom_prob(&atom_of("{A0} != {A1}"), &mut t, &|_| Some(d.clone())).unwrap();
        let oracle = 0.8 * 0.2 + 0.2 * 0.8;
        assert!((p.value() - oracle).abs() < 1e-15);
    }

    #[test]
    fn connective_formulas() {
        let mut t = Tape::inference();
        assert!((not(&mut t, Bernoulli::constant(0.3)).value() - 0.7).abs() < 1e-15);
        for x in [0.0, 0.13, 0.5, 1.0] {
            assert_eq!(and(&mut t, Bernoulli::constant(1.0), Bernoulli::constant(x)).value(), x);
        }
        let p = xor(&mut t, Bernoulli::constant(0.2), Bernoulli::constant(0.7)).value();
        assert!((p - (0.2 * 0.3 + 0.8 * 0.7)).abs() < 1e-15);
        let p = or(&mut t, Bernoulli::constant(0.2), Bernoulli::constant(0.7)).value();
        assert!((p - (1.0 - 0.8 * 0.3)).abs() < 1e-15);
    }

    #[test]
    fn mixtures() {
        let mut t = Tape::inference();
        let yes = toks(&[("yes", 1.0)]);
        let no = toks(&[("no", 1.0)]);
        let m = conditional_mixture(&mut t, Bernoulli::constant(1.0), &yes, &no);
        assert_eq!(m.p(&Value::token("yes")), 1.0);
        assert_eq!(m.p(&Value::token("no")), 0.0);

        let m = conditional_mixture(&mut t, Bernoulli::constant(0.5), &yes, &no);
        assert_eq!(m.values(), vec![0.5, 0.5]);

        let m = conditional_mixture(&mut t, Bernoulli::constant(0.69), &no, &yes);
        assert!((m.p(&Value::token("no")) - 0.69).abs() < 1e-15);
        assert!((m.p(&Value::token("yes")) - 0.31).abs() < 1e-15);
    }

    #[test]
    fn point_semantics() {
        let env = |v: &str| match v {
            "A0" => Some(Value::Int(3)),
            "A1" => Some(Value::token("yes")),
            "A2" => Some(Value::token("red")),
            _ => None,
        };
        let run = |s: &str| eval_point(&parse_eval(s).unwrap(), &env);
        assert_eq!(run("{A0} >= 3").unwrap(), Value::boolean(true));
        assert_eq!(run("{A0} + 2 == 5 and {A1}").unwrap(), Value::boolean(true));
        assert_eq!(run("'x' if not {A1} else {A2}").unwrap(), Value::token("red"));
        assert_eq!(run("{A0} + {A0}").unwrap(), Value::Int(6));
        assert!(matches!(run("{A0} == 'red'"), Err(EvalError::TypeMismatch { .. })));
        assert!(matches!(run("{A2} > 'a'"), Err(EvalError::TypeMismatch { .. })));
        assert!(matches!(run("{A2} or {A1}"), Err(EvalError::NonBooleanTruthy { .. })));
        assert!(matches!(run("{A9}"), Err(EvalError::UnboundVariable(_))));
    }

    #[test]
    fn joint_mode_on_product_tables_matches_independent_mode() {
        let a0 = toks(&[("red", 0.3), ("blue", 0.7)]);
        let a1 = toks(&[("red", 0.6), ("blue", 0.25), ("green", 0.15)]);
        let dists = |v: &str| match v {
            "A0" => Some(a0.clone()),
            "A1" => Some(a1.clone()),
            _ => None,
        };
        let mut t = Tape::inference();
        let atom = atom_of("{A0} == {A1}");
        let joint = JointTable::product(&mut t, &["A1", "A0"], &dists).unwrap();
        let a = atom_prob(&atom, &mut t, &dists).unwrap().value();
        let b = atom_prob_joint(&atom, &mut t, &joint).unwrap().value();
        assert!((a - b).abs() < 1e-15);
    }
}
