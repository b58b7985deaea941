//! Differentiable execution of visual programs.
//!
//! A program in the LOC/CROP/VQA/COUNT/EVAL language becomes a directed
//! probabilistic graph; the answer distribution is computed exactly by
//! variable elimination (or by an independence approximation) and
//! differentiated end to end, so module parameters can be trained from final
//! answers alone.

pub mod diff;
pub mod dsl;
pub mod engine;
pub mod evalexpr;
pub mod fixtures;
pub mod graph;
pub mod modules;
pub mod trainer;
pub mod value;
pub mod world;

pub use diff::{ParamStore, Scalar, Tape};
pub use dsl::{parse_program, Program};
pub use engine::{infer, EngineError, InferenceMode, InferenceOptions, Runtime};
pub use modules::ModuleSet;
pub use trainer::{Metrics, TrainConfig};
pub use value::{Categorical, Cell, Detection, ImageName, Region, Value};
pub use world::{CaseRecord, SceneSet};
