//! Program execution: the argmax executor, factorized and exact
//! probabilistic inference, and a brute-force enumeration oracle.

mod argmax;
mod brute;
mod exact;
mod factorized;

pub use argmax::{execute_argmax, Execution};
pub use brute::{brute_force, BRUTE_FORCE_LEAF_CAP};
pub use exact::{build_model, elimination_order, infer_exact, Factor, Model};
pub use factorized::infer_factorized;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::diff::{ParamStore, Tape};
use crate::dsl::{ModuleKind, Program, Statement};
use crate::evalexpr::{eval_point, EvalError};
use crate::modules::{self, ModuleError, ModuleSet};
use crate::value::{Categorical, Detection, ImageName, Region, Value};
use crate::world::SceneSet;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("{target}: module failure: {source}")]
    Module { target: String, source: ModuleError },
    #[error("{target}: {source}")]
    Eval { target: String, source: EvalError },
    #[error("no scene bound to input image {0}")]
    MissingImage(String),
    #[error("{target}: expected a {expected}, got `{got}`")]
    ValueType {
        target: String,
        expected: &'static str,
        got: String,
    },
    #[error("support of {size} assignments exceeds the cap of {cap}")]
    SupportExplosion { size: usize, cap: usize },
    #[error("intervention on unknown variable `{0}`")]
    UnknownIntervention(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMode {
    Argmax,
    Factorized,
    Exact,
    #[serde(rename = "brute")]
    BruteForce,
}

impl InferenceMode {
    pub const ALL: [InferenceMode; 4] = [
        InferenceMode::Argmax,
        InferenceMode::Factorized,
        InferenceMode::Exact,
        InferenceMode::BruteForce,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InferenceMode::Argmax => "argmax",
            InferenceMode::Factorized => "factorized",
            InferenceMode::Exact => "exact",
            InferenceMode::BruteForce => "brute",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl std::fmt::Display for InferenceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const DEFAULT_SUPPORT_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct InferenceOptions {
    /// Variables forced to a value, replacing their module or expression.
    /// Honored by every mode.
    pub interventions: BTreeMap<String, Value>,
    /// Largest factor (or enumerated parent product) exact inference may
    /// build.
    pub support_cap: usize,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        InferenceOptions {
            interventions: BTreeMap::new(),
            support_cap: DEFAULT_SUPPORT_CAP,
        }
    }
}

impl InferenceOptions {
    pub fn intervene(mut self, var: &str, value: Value) -> Self {
        self.interventions.insert(var.to_string(), value);
        self
    }

    fn check(&self, program: &Program) -> Result<(), EngineError> {
        match self.interventions.keys().find(|k| program.index_of(k).is_none()) {
            Some(k) => Err(EngineError::UnknownIntervention(k.clone())),
            None => Ok(()),
        }
    }
}

/// What a program runs against.
#[derive(Clone, Copy, Debug)]
pub struct Runtime<'a> {
    pub scenes: &'a SceneSet,
    pub modules: &'a ModuleSet,
    pub params: &'a ParamStore,
}

impl<'a> Runtime<'a> {
    pub fn new(scenes: &'a SceneSet, modules: &'a ModuleSet, params: &'a ParamStore) -> Self {
        Runtime {
            scenes,
            modules,
            params,
        }
    }

    /// The whole-scene region of a predefined image variable, or `None` for
    /// program variables.
    pub(crate) fn input(&self, name: &str) -> Option<Result<Value, EngineError>> {
        let image = ImageName::from_name(name)?;
        Some(
            self.scenes
                .get(image)
                .map(|s| Value::Region(s.whole(image)))
                .ok_or_else(|| EngineError::MissingImage(name.to_string())),
        )
    }
}

/// Memoized LOC/VQA calls for one tape.
pub(crate) struct Calls<'a> {
    rt: Runtime<'a>,
    cache: HashMap<(ModuleKind, String, Region), Categorical>,
}

impl<'a> Calls<'a> {
    pub(crate) fn new(rt: Runtime<'a>) -> Self {
        Calls {
            rt,
            cache: HashMap::new(),
        }
    }

    /// Output distribution of a LOC or VQA statement on `image`.
    pub(crate) fn call(&mut self, tape: &mut Tape, s: &Statement, image: &Value) -> Result<Categorical, EngineError> {
        let region = *as_region(&s.target, image)?;
        let (literal, loc) = match s.module {
            ModuleKind::Loc => (s.literal_arg("object").expect("validated"), true),
            ModuleKind::Vqa => (s.literal_arg("question").expect("validated"), false),
            other => unreachable!("{other} is not a visual module"),
        };
        let key = (s.module, literal.to_string(), region);
        if let Some(d) = self.cache.get(&key) {
            return Ok(d.clone());
        }
        let rt = self.rt;
        let d = if loc {
            rt.modules
                .loc
                .distribution(rt.scenes, &region, literal, rt.params, tape)
        } else {
            rt.modules
                .vqa
                .distribution(rt.scenes, &region, literal, rt.params, tape)
        }
        .map_err(|source| EngineError::Module {
            target: s.target.clone(),
            source,
        })?;
        self.cache.insert(key, d.clone());
        Ok(d)
    }
}

fn as_region<'v>(target: &str, v: &'v Value) -> Result<&'v Region, EngineError> {
    match v {
        Value::Region(r) => Ok(r),
        other => Err(EngineError::ValueType {
            target: target.to_string(),
            expected: "region",
            got: other.to_string(),
        }),
    }
}

fn as_detection<'v>(target: &str, v: &'v Value) -> Result<&'v Detection, EngineError> {
    match v {
        Value::Detection(d) => Ok(d),
        other => Err(EngineError::ValueType {
            target: target.to_string(),
            expected: "detection",
            got: other.to_string(),
        }),
    }
}

/// Output of a CROP, COUNT, EVAL or RESULT statement given its inputs.
pub(crate) fn apply_deterministic(s: &Statement, get: &dyn Fn(&str) -> Option<Value>) -> Result<Value, EngineError> {
    let arg = |name: &str| -> Value {
        let var = s.var_arg(name).expect("validated signature");
        get(var).expect("parents are bound before children")
    };
    match s.module {
        m if m.is_crop() => {
            let image = arg("image");
            let boxes = arg("box");
            Ok(Value::Region(modules::crop(
                as_region(&s.target, &image)?,
                as_detection(&s.target, &boxes)?,
                m,
            )))
        }
        ModuleKind::Count => {
            let boxes = arg("box");
            Ok(Value::Int(modules::count(as_detection(&s.target, &boxes)?)))
        }
        ModuleKind::Eval => {
            let ast = s.expr.as_ref().expect("validated EVAL carries its expression");
            eval_point(ast, get).map_err(|source| EngineError::Eval {
                target: s.target.clone(),
                source,
            })
        }
        ModuleKind::Result => Ok(arg("var")),
        other => unreachable!("{other} is not deterministic"),
    }
}

/// Mode dispatch. Argmax returns a point mass on its answer.
pub fn infer(
    mode: InferenceMode,
    program: &Program,
    rt: Runtime<'_>,
    tape: &mut Tape,
    options: &InferenceOptions,
) -> Result<Categorical, EngineError> {
    match mode {
        InferenceMode::Argmax => Ok(Categorical::point(execute_argmax(program, rt, options)?.result)),
        InferenceMode::Factorized => infer_factorized(program, rt, tape, options),
        InferenceMode::Exact => infer_exact(program, rt, tape, options),
        InferenceMode::BruteForce => brute_force(program, rt, options),
    }
}

/// `{support, probs, mode, program_id}`.
pub fn inference_json(dist: &Categorical, mode: InferenceMode, program_id: &str) -> serde_json::Value {
    serde_json::json!({
        "support": dist.support(),
        "probs": dist.values(),
        "mode": mode.as_str(),
        "program_id": program_id,
    })
}
