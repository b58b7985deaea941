use std::collections::BTreeMap;

use serde::Serialize;

use super::{apply_deterministic, Calls, EngineError, InferenceOptions, Runtime};
use crate::diff::Tape;
use crate::dsl::Program;
use crate::value::Value;

/// Result of the argmax executor: the answer plus every variable's value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Execution {
    pub result: Value,
    pub trace: BTreeMap<String, Value>,
}

/// Runs the program with every LOC/VQA call replaced by the mode of its
/// distribution (first entry on ties).
pub fn execute_argmax(
    program: &Program,
    rt: Runtime<'_>,
    options: &InferenceOptions,
) -> Result<Execution, EngineError> {
    options.check(program)?;
    let mut tape = Tape::inference();
    let mut calls = Calls::new(rt);
    let mut trace: BTreeMap<String, Value> = BTreeMap::new();
    for s in &program.statements {
        let value = if let Some(v) = options.interventions.get(&s.target) {
            v.clone()
        } else if s.module.is_visual() {
            let image = lookup(rt, &trace, s.var_arg("image").expect("validated"))?;
            let d = calls.call(&mut tape, s, &image)?;
            d.argmax().0.clone()
        } else {
            for v in s.inputs() {
                if let Some(r) = rt.input(v) {
                    trace.insert(v.to_string(), r?);
                }
            }
            let get = |v: &str| trace.get(v).cloned();
            apply_deterministic(s, &get)?
        };
        trace.insert(s.target.clone(), value);
    }
    for image in crate::value::ImageName::ALL {
        trace.remove(image.as_str());
    }
    let result = trace[&program.result().target].clone();
    Ok(Execution { result, trace })
}

fn lookup(rt: Runtime<'_>, trace: &BTreeMap<String, Value>, name: &str) -> Result<Value, EngineError> {
    match rt.input(name) {
        Some(r) => r,
        None => Ok(trace[name].clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;

    #[test]
    fn picks_the_mode_of_each_call() {
        let json = r#"{"vqa": [{"question": "Is the dog made of wood?",
            "answers": [["no", 0.69], ["yes", 0.30], ["maybe", 0.01]]}]}"#;
        let p =
            program("ANSWER0=VQA(image=IMAGE,question='Is the dog made of wood?')\nFINAL_ANSWER=RESULT(var=ANSWER0)");
        let (s, m, params) = (empty_scenes(), table(json), no_params());
        let ex = execute_argmax(&p, Runtime::new(&s, &m, &params), &InferenceOptions::default()).unwrap();
        assert_eq!(ex.result, Value::token("no"));
        assert_eq!(ex.trace["ANSWER0"], Value::token("no"));
    }

    #[test]
    fn crops_follow_the_chosen_detection() {
        let p = program(MIXTURE_PROGRAM);
        let (s, m, params) = (empty_scenes(), table(MIXTURE_TABLE), no_params());
        let ex = execute_argmax(&p, Runtime::new(&s, &m, &params), &InferenceOptions::default()).unwrap();
        assert_eq!(ex.result, Value::token("yes"));
        assert_eq!(ex.trace["IMAGE0"].to_string(), "IMAGE[0..1,0..1]");
    }

    #[test]
    fn interventions_override_modules() {
        let p = program(MIXTURE_PROGRAM);
        let (s, m, params) = (empty_scenes(), table(MIXTURE_TABLE), no_params());
        let opts = InferenceOptions::default().intervene("ANSWER0", Value::token("maybe"));
        let ex = execute_argmax(&p, Runtime::new(&s, &m, &params), &opts).unwrap();
        assert_eq!(ex.result, Value::token("maybe"));
        let bad = InferenceOptions::default().intervene("NOPE", Value::Int(1));
        assert!(execute_argmax(&p, Runtime::new(&s, &m, &params), &bad).is_err());
    }
}
