use std::collections::HashMap;

use super::{apply_deterministic, Calls, EngineError, InferenceOptions, Runtime};
use crate::diff::{Scalar, Tape};
use crate::dsl::{ModuleKind, Program};
use crate::evalexpr::eval_dist;
use crate::value::{Categorical, Value};

/// Per-variable marginals computed in program order, treating the inputs
/// of every statement as independent.
///
/// A LOC or VQA marginal sums the module output over its image's marginal
/// (for a crop of one LOC this is `sum_k f(crop_k) p_k`). CROP and COUNT push
/// their inputs' product measure forward; EVAL combines its inputs' marginals
/// with the product-form connectives. Equals exact inference when no latent
/// feeds two inputs of one statement.
pub fn infer_factorized(
    program: &Program,
    rt: Runtime<'_>,
    tape: &mut Tape,
    options: &InferenceOptions,
) -> Result<Categorical, EngineError> {
    options.check(program)?;
    let mut calls = Calls::new(rt);
    let mut marginals: HashMap<String, Categorical> = HashMap::new();
    for s in &program.statements {
        let dist = if let Some(v) = options.interventions.get(&s.target) {
            Categorical::point(v.clone())
        } else {
            let mut inputs: Vec<(&str, Categorical)> = Vec::new();
            for v in s.inputs() {
                let d = match rt.input(v) {
                    Some(r) => Categorical::point(r?),
                    None => marginals[v].clone(),
                };
                inputs.push((v, d));
            }
            match s.module {
                m if m.is_visual() => {
                    let image = &inputs[0].1;
                    let mut items = Vec::new();
                    for (r, pr) in image.iter() {
                        let d = calls.call(tape, s, r)?;
                        for (v, p) in d.iter() {
                            items.push((v.clone(), tape.mul(pr, p)));
                        }
                    }
                    Categorical::from_weighted(tape, items)
                }
                ModuleKind::Eval => {
                    let ast = s.expr.as_ref().expect("validated");
                    eval_dist(ast, tape, &|v| find(&inputs, v).cloned()).map_err(|source| EngineError::Eval {
                        target: s.target.clone(),
                        source,
                    })?
                }
                _ => pushforward(s, &inputs, tape)?,
            }
        };
        marginals.insert(s.target.clone(), dist);
    }
    Ok(marginals.remove(&program.result().target).expect("RESULT is bound"))
}

fn find<'a>(inputs: &'a [(&str, Categorical)], name: &str) -> Option<&'a Categorical> {
    inputs.iter().find(|x| x.0 == name).map(|x| &x.1)
}

/// Distribution of a deterministic statement's output under the product of
/// its inputs' marginals.
fn pushforward(
    s: &crate::dsl::Statement,
    inputs: &[(&str, Categorical)],
    tape: &mut Tape,
) -> Result<Categorical, EngineError> {
    let names: Vec<&str> = inputs.iter().map(|x| x.0).collect();
    let dists: Vec<&Categorical> = inputs.iter().map(|x| &x.1).collect();
    let mut idx = vec![0usize; dists.len()];
    let mut items = Vec::new();
    loop {
        let mut w = Scalar::ONE;
        let mut env: HashMap<&str, Value> = HashMap::new();
        for (k, d) in dists.iter().enumerate() {
            env.insert(names[k], d.support()[idx[k]].clone());
            w = tape.mul(w, d.probs()[idx[k]]);
        }
        items.push((apply_deterministic(s, &|v| env.get(v).cloned())?, w));
        let mut k = dists.len();
        loop {
            if k == 0 {
                return Ok(Categorical::from_weighted(tape, items));
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < dists[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;

    #[test]
    fn two_detection_mixture() {
        let p = program(MIXTURE_PROGRAM);
        let (s, m, params) = (empty_scenes(), table(MIXTURE_TABLE), no_params());
        let mut t = Tape::inference();
        let d = infer_factorized(&p, Runtime::new(&s, &m, &params), &mut t, &InferenceOptions::default()).unwrap();
        assert!((d.p(&Value::token("yes")) - (0.6 * 0.9 + 0.4 * 0.2)).abs() < 1e-15);
        assert!(d.is_normalized(1e-12));
    }

    #[test]
    fn shared_latent_uses_product_of_marginals() {
        let p = program(SHARED_PROGRAM);
        let (s, m, params) = (empty_scenes(), table(SHARED_TABLE), no_params());
        let mut t = Tape::inference();
        let d = infer_factorized(&p, Runtime::new(&s, &m, &params), &mut t, &InferenceOptions::default()).unwrap();
        assert!((d.p(&Value::boolean(true)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn one_hot_detection_gives_the_crop_answer() {
        let p = program(MIXTURE_PROGRAM);
        let (s, m, params) = (empty_scenes(), table(MIXTURE_TABLE), no_params());
        let mut t = Tape::inference();
        let det = Value::Detection(crate::value::Detection {
            image: crate::value::ImageName::Image,
            cells: vec![crate::value::Cell::new(1, 1)],
        });
        let opts = InferenceOptions::default().intervene("BOX0", det);
        let d = infer_factorized(&p, Runtime::new(&s, &m, &params), &mut t, &opts).unwrap();
        assert_eq!(d.p(&Value::token("yes")), 0.2);
    }
}
