use diffvp::diff::{Scalar, Tape};
use diffvp::evalexpr::{and, eval_dist, eval_point, not, or, parse_eval, xor, Bernoulli};
use diffvp::value::{Categorical, Value};
use proptest::prelude::*;

fn b(p: f64) -> Bernoulli {
    Bernoulli::constant(p)
}

fn close(x: Bernoulli, y: Bernoulli) -> Result<(), TestCaseError> {
    prop_assert!((x.value() - y.value()).abs() < 1e-12, "{} vs {}", x.value(), y.value());
    Ok(())
}

proptest! {
    #[test]
    fn double_negation(p in 0.0..=1.0f64) {
        let t = &mut Tape::inference();
        let nn = not(t, b(p));
        close(not(t, nn), b(p))?;
    }

    #[test]
    fn de_morgan(p in 0.0..=1.0f64, q in 0.0..=1.0f64) {
        let t = &mut Tape::inference();
        let (np, nq) = (not(t, b(p)), not(t, b(q)));
        let both = and(t, b(p), b(q));
        let lhs = not(t, both);
        close(lhs, or(t, np, nq))?;
        let either = or(t, b(p), b(q));
        let lhs = not(t, either);
        close(lhs, and(t, np, nq))?;
    }

    #[test]
    fn connectives_commute_and_associate(p in 0.0..=1.0f64, q in 0.0..=1.0f64, r in 0.0..=1.0f64) {
        let t = &mut Tape::inference();
        close(and(t, b(p), b(q)), and(t, b(q), b(p)))?;
        close(or(t, b(p), b(q)), or(t, b(q), b(p)))?;
        close(xor(t, b(p), b(q)), xor(t, b(q), b(p)))?;
        let (pq, qr) = (and(t, b(p), b(q)), and(t, b(q), b(r)));
        close(and(t, pq, b(r)), and(t, b(p), qr))?;
        let (pq, qr) = (or(t, b(p), b(q)), or(t, b(q), b(r)));
        close(or(t, pq, b(r)), or(t, b(p), qr))?;
    }

    #[test]
    fn results_stay_in_unit_interval(p in 0.0..=1.0f64, q in 0.0..=1.0f64) {
        let t = &mut Tape::inference();
        for x in [and(t, b(p), b(q)), or(t, b(p), b(q)), xor(t, b(p), b(q))] {
            prop_assert!((0.0..=1.0).contains(&x.value()));
        }
    }
}

fn yes_no(p: f64) -> Categorical {
    Categorical::new(
        vec![Value::token("yes"), Value::token("no")],
        vec![Scalar::constant(p), Scalar::constant(1.0 - p)],
    )
    .unwrap()
}

fn leaf(name: &str, negate: bool, compare: bool) -> String {
    let atom = if compare {
        format!("{{{name}}} == 'yes'")
    } else {
        format!("{{{name}}}")
    };
    if negate {
        format!("not ({atom})")
    } else {
        atom
    }
}

/// Three independent answers, each used once, joined by `and`/`or` in one of
/// the two possible groupings, optionally wrapped in a conditional.
fn expression() -> impl Strategy<Value = String> {
    (
        any::<bool>(),
        prop::array::uniform3((any::<bool>(), any::<bool>())),
        prop::array::uniform2(any::<bool>()),
        any::<bool>(),
    )
        .prop_map(|(left, leaves, ops, conditional)| {
            let l: Vec<String> = ["A", "B", "C"]
                .iter()
                .zip(leaves)
                .map(|(n, (neg, cmp))| leaf(n, neg, cmp))
                .collect();
            let op = |x: bool| if x { "and" } else { "or" };
            let cond = if left {
                format!("({} {} {}) {} {}", l[0], op(ops[0]), l[1], op(ops[1]), l[2])
            } else {
                format!("{} {} ({} {} {})", l[0], op(ops[0]), l[1], op(ops[1]), l[2])
            };
            if conditional {
                format!("'yes' if {cond} else 'no'")
            } else {
                cond
            }
        })
}

proptest! {
    // With every variable used once the product-form semantics is exact, so
    // it must agree with enumerating all eight joint answers.
    #[test]
    fn matches_enumeration_when_variables_are_used_once(
        src in expression(),
        ps in prop::array::uniform3(0.0..=1.0f64),
    ) {
        let ast = parse_eval(&src).unwrap();
        let marginals: Vec<Categorical> = ps.iter().map(|&p| yes_no(p)).collect();
        let lookup = |v: &str| match v {
            "A" => Some(marginals[0].clone()),
            "B" => Some(marginals[1].clone()),
            "C" => Some(marginals[2].clone()),
            _ => None,
        };
        let dist = eval_dist(&ast, &mut Tape::inference(), &lookup).unwrap();
        prop_assert!((dist.total() - 1.0).abs() < 1e-12);

        let mut oracle: Vec<(Value, f64)> = Vec::new();
        for bits in 0..8u8 {
            let answer = |i: usize| if bits >> i & 1 == 1 { "yes" } else { "no" };
            let weight: f64 = (0..3).map(|i| if answer(i) == "yes" { ps[i] } else { 1.0 - ps[i] }).product();
            let env = |v: &str| match v {
                "A" => Some(Value::token(answer(0))),
                "B" => Some(Value::token(answer(1))),
                "C" => Some(Value::token(answer(2))),
                _ => None,
            };
            let v = eval_point(&ast, &env).unwrap();
            match oracle.iter_mut().find(|(u, _)| *u == v) {
                Some((_, w)) => *w += weight,
                None => oracle.push((v, weight)),
            }
        }
        for (v, w) in &oracle {
            prop_assert!((dist.p(v) - w).abs() < 1e-12, "{src}: P({v}) = {} vs {w}", dist.p(v));
        }
    }
}
