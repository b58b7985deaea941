//! One-hot modules that read ground truth from the scene. They exist for
//! labeling and evaluation; training must never reach them.

use std::cell::Cell as StdCell;

use super::questions::{Question, Template};
use super::{LocModule, ModuleError, VqaModule};
use crate::diff::{ParamStore, Tape};
use crate::value::{Categorical, Detection, Region, Value};
use crate::world::{Category, Object, Scene, SceneSet};

thread_local! {
    static ACCESSES: StdCell<u64> = const { StdCell::new(0) };
}

/// Ground-truth reads performed on this thread so far. Tests snapshot it
/// around a call to prove the call never touched ground truth.
pub fn truth_accesses() -> u64 {
    ACCESSES.with(StdCell::get)
}

pub(crate) fn note_truth_access() {
    ACCESSES.with(|a| a.set(a.get() + 1));
}

fn scene_of<'a>(scenes: &'a SceneSet, region: &Region) -> Result<&'a Scene, ModuleError> {
    scenes
        .get(region.image)
        .ok_or_else(|| ModuleError::MissingImage(region.image.to_string()))
}

/// All cells of the category inside the region, row-major.
pub(crate) fn true_detection(scene: &Scene, region: &Region, category: Category) -> Detection {
    Detection {
        image: region.image,
        cells: scene
            .objects_in(region)
            .filter(|o| o.category == category)
            .map(Object::cell)
            .collect(),
    }
}

/// The object a question about `category` refers to: the first such object
/// in the region, else the first object of any kind.
fn subject<'a>(scene: &'a Scene, region: &'a Region, q: &Question) -> Option<&'a Object> {
    let mut objs = scene.objects_in(region).peekable();
    let first = objs.peek().copied();
    let cat = q.category();
    scene.objects_in(region).find(|o| Some(o.category) == cat).or(first)
}

pub(crate) fn true_answer(scene: &Scene, region: &Region, q: &Question) -> Value {
    let yes_no = |b: bool| Value::token(if b { "yes" } else { "no" });
    let subj = subject(scene, region, q);
    let fallback = || q.template.answers()[0].clone();
    match q.template {
        Template::WhatColor => subj.map_or_else(fallback, |o| Value::token(o.color.as_str())),
        Template::WhatMaterial => subj.map_or_else(fallback, |o| Value::token(o.material.as_str())),
        Template::Doing => subj.map_or_else(fallback, |o| Value::token(o.activity.as_str())),
        Template::HasColor => yes_no(subj.is_some_and(|o| Some(o.color) == q.color())),
        Template::MadeOf => yes_no(subj.is_some_and(|o| Some(o.material) == q.material())),
        Template::IsActivity => yes_no(subj.is_some_and(|o| Some(o.activity) == q.activity())),
        Template::HowMany => {
            let n = scene
                .objects_in(region)
                .filter(|o| Some(o.category) == q.category())
                .count();
            Value::Int((n as i64).min(Template::MAX_COUNT))
        }
        Template::IsThere => yes_no(scene.objects_in(region).any(|o| Some(o.category) == q.category())),
        Template::AnythingColor => yes_no(scene.objects_in(region).any(|o| Some(o.color) == q.color())),
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TruthLoc;

impl LocModule for TruthLoc {
    fn name(&self) -> &str {
        "truth"
    }

    fn distribution(
        &self,
        scenes: &SceneSet,
        region: &Region,
        object: &str,
        _params: &ParamStore,
        _tape: &mut Tape,
    ) -> Result<Categorical, ModuleError> {
        note_truth_access();
        let category = Category::from_name(object).ok_or_else(|| ModuleError::OutOfVocabulary(object.into()))?;
        let scene = scene_of(scenes, region)?;
        Ok(Categorical::point(Value::Detection(true_detection(
            scene, region, category,
        ))))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TruthVqa;

impl VqaModule for TruthVqa {
    fn name(&self) -> &str {
        "truth"
    }

    fn distribution(
        &self,
        scenes: &SceneSet,
        region: &Region,
        question: &str,
        _params: &ParamStore,
        _tape: &mut Tape,
    ) -> Result<Categorical, ModuleError> {
        note_truth_access();
        let q = Question::parse(question).ok_or_else(|| ModuleError::UnknownTemplate(question.into()))?;
        let scene = scene_of(scenes, region)?;
        Ok(Categorical::point(true_answer(scene, region, &q)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{Cell, ImageName};
    use crate::world::{Activity, Color, Material};

    fn scene() -> Scene {
        let o = |row, col, category, color| Object {
            row,
            col,
            category,
            color,
            material: Material::Metal,
            activity: Activity::Running,
        };
        Scene {
            rows: 3,
            cols: 3,
            objects: vec![
                o(0, 1, Category::Dog, Color::Red),
                o(1, 0, Category::Dog, Color::Blue),
                o(2, 2, Category::Post, Color::Red),
            ],
        }
    }

    fn answer(q: &str, region: Region) -> Value {
        true_answer(&scene(), &region, &Question::parse(q).unwrap())
    }

    #[test]
    fn answers_follow_the_scene() {
        let whole = Region::whole(ImageName::Image, 3, 3);
        assert_eq!(answer("How many dogs are in the image?", whole), Value::Int(2));
        assert_eq!(answer("Is there a cat?", whole), Value::token("no"));
        assert_eq!(answer("What color is the post?", whole), Value::token("red"));
        assert_eq!(answer("What color is the dog?", whole), Value::token("red"));
        assert_eq!(answer("Is the post made of metal?", whole), Value::token("yes"));
        let lower = Region { top: 1, ..whole };
        assert_eq!(answer("What color is the dog?", lower), Value::token("blue"));
        assert_eq!(
            answer("Is there anything red?", Region { right: 2, ..lower }),
            Value::token("no")
        );
    }

    #[test]
    fn detections_are_row_major_and_counted() {
        let whole = Region::whole(ImageName::Image, 3, 3);
        let before = truth_accesses();
        let d = TruthLoc
            .distribution(
                &SceneSet::single(scene()),
                &whole,
                "dog",
                &ParamStore::new(),
                &mut Tape::inference(),
            )
            .unwrap();
        assert_eq!(truth_accesses(), before + 1);
        let Value::Detection(det) = &d.support()[0] else {
            panic!()
        };
        assert_eq!(det.cells, vec![Cell::new(0, 1), Cell::new(1, 0)]);
        let empty = true_detection(&scene(), &whole, Category::Car);
        assert!(empty.is_empty());
    }
}
