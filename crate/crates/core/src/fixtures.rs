//! Small hand-built cases with known answers, shared by tests, the CLI and
//! the benchmarks.

use crate::diff::ParamStore;
use crate::dsl::{parse_program, Program};
use crate::modules::{ModuleSet, TableFixture};
use crate::world::{Scene, SceneSet};

/// A 3x3 scene with no objects; table modules ignore scene content.
pub fn empty_scenes() -> SceneSet {
    SceneSet::single(Scene {
        rows: 3,
        cols: 3,
        objects: vec![],
    })
}

pub fn table(json: &str) -> ModuleSet {
    ModuleSet::table(TableFixture::from_json(json).expect("fixture tables are valid"))
}

pub fn no_params() -> ParamStore {
    ParamStore::new()
}

pub fn program(src: &str) -> Program {
    parse_program(src).expect("fixture programs are valid")
}

/// Everything needed to run a fixture program.
pub struct Fixture {
    pub scenes: SceneSet,
    pub modules: ModuleSet,
    pub params: ParamStore,
    pub program: Program,
}

impl Fixture {
    fn new(program_src: &str, table_json: &str) -> Self {
        Fixture {
            scenes: empty_scenes(),
            modules: table(table_json),
            params: ParamStore::new(),
            program: program(program_src),
        }
    }

    /// One LOC whose two detections lead to different answer mixtures:
    /// `P(yes) = 0.6 * 0.9 + 0.4 * 0.2 = 0.62`.
    pub fn mixture() -> Self {
        Self::new(MIXTURE_PROGRAM, MIXTURE_TABLE)
    }

    /// Two answers read the same crop: exact inference gives 0.5 for True,
    /// the independence approximation 0.25.
    pub fn shared() -> Self {
        Self::new(SHARED_PROGRAM, SHARED_TABLE)
    }

    pub fn runtime(&self) -> crate::engine::Runtime<'_> {
        crate::engine::Runtime::new(&self.scenes, &self.modules, &self.params)
    }
}

/// LOC with two single-cell detections (0.6, 0.4); VQA 'yes' with 0.9 on
/// the first crop and 0.2 on the second.
pub const MIXTURE_TABLE: &str = r#"{
    "loc": [{"object": "dog", "outcomes": [
        {"cells": [{"row": 0, "col": 0}], "p": 0.6},
        {"cells": [{"row": 1, "col": 1}], "p": 0.4}]}],
    "vqa": [
        {"question": "Is the dog standing?",
         "region": {"image": "IMAGE", "top": 0, "left": 0, "bottom": 1, "right": 1},
         "answers": [["yes", 0.9], ["no", 0.1]]},
        {"question": "Is the dog standing?",
         "region": {"image": "IMAGE", "top": 1, "left": 1, "bottom": 2, "right": 2},
         "answers": [["yes", 0.2], ["no", 0.8]]}]
}"#;

pub const MIXTURE_PROGRAM: &str = "BOX0=LOC(image=IMAGE,object='dog')
IMAGE0=CROP(image=IMAGE,box=BOX0)
ANSWER0=VQA(image=IMAGE0,question='Is the dog standing?')
FINAL_RESULT=RESULT(var=ANSWER0)";

/// One LOC over two detections; both answers are 'yes' on the first crop
/// and 'no' on the second, so they are perfectly correlated.
pub const SHARED_TABLE: &str = r#"{
    "loc": [{"object": "dog", "outcomes": [
        {"cells": [{"row": 0, "col": 0}], "p": 0.5},
        {"cells": [{"row": 1, "col": 1}], "p": 0.5}]}],
    "vqa": [
        {"question": "Is the dog standing?",
         "region": {"image": "IMAGE", "top": 0, "left": 0, "bottom": 1, "right": 1},
         "answers": [["yes", 1.0], ["no", 0.0]]},
        {"question": "Is the dog standing?",
         "region": {"image": "IMAGE", "top": 1, "left": 1, "bottom": 2, "right": 2},
         "answers": [["yes", 0.0], ["no", 1.0]]},
        {"question": "Is the dog made of wood?",
         "region": {"image": "IMAGE", "top": 0, "left": 0, "bottom": 1, "right": 1},
         "answers": [["yes", 1.0], ["no", 0.0]]},
        {"question": "Is the dog made of wood?",
         "region": {"image": "IMAGE", "top": 1, "left": 1, "bottom": 2, "right": 2},
         "answers": [["yes", 0.0], ["no", 1.0]]}]
}"#;

pub const SHARED_PROGRAM: &str = "BOX0=LOC(image=IMAGE,object='dog')
IMAGE0=CROP(image=IMAGE,box=BOX0)
ANSWER0=VQA(image=IMAGE0,question='Is the dog standing?')
ANSWER1=VQA(image=IMAGE0,question='Is the dog made of wood?')
ANSWER2=EVAL(expr='{ANSWER0} and {ANSWER1}')
FINAL_RESULT=RESULT(var=ANSWER2)";
