use std::collections::HashMap;

use super::{apply_deterministic, Calls, EngineError, InferenceOptions, Runtime};
use crate::diff::Tape;
use crate::dsl::Program;
use crate::value::{Categorical, Value};

/// Largest number of complete assignments the oracle will enumerate.
pub const BRUTE_FORCE_LEAF_CAP: usize = 100_000;

struct Search<'p, 'r> {
    program: &'p Program,
    rt: Runtime<'r>,
    options: &'p InferenceOptions,
    calls: Calls<'r>,
    tape: Tape,
    leaves: usize,
    mass: Vec<(Value, f64)>,
    index: HashMap<Value, usize>,
}

impl Search<'_, '_> {
    fn value_of(&self, env: &HashMap<String, Value>, name: &str) -> Result<Value, EngineError> {
        match self.rt.input(name) {
            Some(r) => r,
            None => Ok(env[name].clone()),
        }
    }

    fn visit(&mut self, i: usize, env: &mut HashMap<String, Value>, weight: f64) -> Result<(), EngineError> {
        let Some(s) = self.program.statements.get(i) else {
            self.leaves += 1;
            if self.leaves > BRUTE_FORCE_LEAF_CAP {
                return Err(EngineError::SupportExplosion {
                    size: self.leaves,
                    cap: BRUTE_FORCE_LEAF_CAP,
                });
            }
            let v = env[&self.program.result().target].clone();
            let k = *self.index.entry(v.clone()).or_insert_with(|| {
                self.mass.push((v, 0.0));
                self.mass.len() - 1
            });
            self.mass[k].1 += weight;
            return Ok(());
        };
        let branches: Vec<(Value, f64)> = if let Some(v) = self.options.interventions.get(&s.target) {
            vec![(v.clone(), 1.0)]
        } else if s.module.is_visual() {
            let image = self.value_of(env, s.var_arg("image").expect("validated"))?;
            let d = self.calls.call(&mut self.tape, s, &image)?;
            d.iter().map(|(v, p)| (v.clone(), p.value())).collect()
        } else {
            let mut bound = HashMap::new();
            for v in s.inputs() {
                bound.insert(v.to_string(), self.value_of(env, v)?);
            }
            vec![(apply_deterministic(s, &|v| bound.get(v).cloned())?, 1.0)]
        };
        for (v, p) in branches {
            if p == 0.0 {
                continue;
            }
            env.insert(s.target.clone(), v);
            self.visit(i + 1, env, weight * p)?;
        }
        env.remove(&s.target);
        Ok(())
    }
}

/// Enumerates every joint assignment of the stochastic variables in program
/// order, evaluating deterministic statements along each branch. Plain
/// floating point; not differentiable.
pub fn brute_force(program: &Program, rt: Runtime<'_>, options: &InferenceOptions) -> Result<Categorical, EngineError> {
    options.check(program)?;
    let mut search = Search {
        program,
        rt,
        options,
        calls: Calls::new(rt),
        tape: Tape::inference(),
        leaves: 0,
        mass: Vec::new(),
        index: HashMap::new(),
    };
    search.visit(0, &mut HashMap::new(), 1.0)?;
    Ok(Categorical::from_f64(search.mass).expect("merged support is distinct"))
}
