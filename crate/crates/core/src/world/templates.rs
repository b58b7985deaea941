//! Program templates: each builds a program and question for given scenes.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activity, Category, Color, Material, Object, Scene, SceneSet};
use crate::dsl::{quote_literal, ModuleKind};
use crate::modules::crop;
use crate::value::{Detection, ImageName, Region};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Exists,
    AnyColor,
    LocExists,
    CountThreshold,
    LocCountThreshold,
    AttributeQuery,
    VerifyColor,
    VerifyMaterial,
    ActivityQuery,
    ExistenceOr,
    CountSum,
    BothImages,
    SpatialExists,
    VerifyThenExists,
    CountOrExists,
    SpatialAttribute,
    SharedVerify,
    AttributeCompare,
    Conjunction,
    ConditionalSelection,
    XorAcrossImages,
    TripleVerify,
    DoubleCompare,
}

/// Positive and negative answers of a balanced binary template.
pub type BinaryLabels = (&'static str, &'static str);

const YES_NO: Option<BinaryLabels> = Some(("yes", "no"));
const TRUE_FALSE: Option<BinaryLabels> = Some(("True", "False"));

impl TemplateId {
    pub const ALL: [TemplateId; 23] = [
        TemplateId::Exists,
        TemplateId::AnyColor,
        TemplateId::LocExists,
        TemplateId::CountThreshold,
        TemplateId::LocCountThreshold,
        TemplateId::AttributeQuery,
        TemplateId::VerifyColor,
        TemplateId::VerifyMaterial,
        TemplateId::ActivityQuery,
        TemplateId::ExistenceOr,
        TemplateId::CountSum,
        TemplateId::BothImages,
        TemplateId::SpatialExists,
        TemplateId::VerifyThenExists,
        TemplateId::CountOrExists,
        TemplateId::SpatialAttribute,
        TemplateId::SharedVerify,
        TemplateId::AttributeCompare,
        TemplateId::Conjunction,
        TemplateId::ConditionalSelection,
        TemplateId::XorAcrossImages,
        TemplateId::TripleVerify,
        TemplateId::DoubleCompare,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Exists => "exists",
            TemplateId::AnyColor => "any_color",
            TemplateId::LocExists => "loc_exists",
            TemplateId::CountThreshold => "count_threshold",
            TemplateId::LocCountThreshold => "loc_count_threshold",
            TemplateId::AttributeQuery => "attribute_query",
            TemplateId::VerifyColor => "verify_color",
            TemplateId::VerifyMaterial => "verify_material",
            TemplateId::ActivityQuery => "activity_query",
            TemplateId::ExistenceOr => "existence_or",
            TemplateId::CountSum => "count_sum",
            TemplateId::BothImages => "both_images",
            TemplateId::SpatialExists => "spatial_exists",
            TemplateId::VerifyThenExists => "verify_then_exists",
            TemplateId::CountOrExists => "count_or_exists",
            TemplateId::SpatialAttribute => "spatial_attribute",
            TemplateId::SharedVerify => "shared_verify",
            TemplateId::AttributeCompare => "attribute_compare",
            TemplateId::Conjunction => "conjunction",
            TemplateId::ConditionalSelection => "conditional_selection",
            TemplateId::XorAcrossImages => "xor_across_images",
            TemplateId::TripleVerify => "triple_verify",
            TemplateId::DoubleCompare => "double_compare",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// LOC plus VQA calls in every program this template emits.
    pub fn visual_steps(self) -> usize {
        use TemplateId::*;
        match self {
            Exists | AnyColor | LocExists | CountThreshold | LocCountThreshold => 1,
            AttributeQuery | VerifyColor | VerifyMaterial | ActivityQuery | ExistenceOr | CountSum | BothImages
            | SpatialExists => 2,
            VerifyThenExists | CountOrExists | SpatialAttribute | SharedVerify => 3,
            AttributeCompare | Conjunction | ConditionalSelection => 4,
            XorAcrossImages | TripleVerify => 6,
            DoubleCompare => 8,
        }
    }

    /// Balanced binary templates name their two answers; the rest answer
    /// from a larger vocabulary.
    pub fn binary_labels(self) -> Option<BinaryLabels> {
        use TemplateId::*;
        match self {
            AttributeQuery | ActivityQuery | SpatialAttribute | ConditionalSelection => None,
            CountThreshold | LocCountThreshold | CountSum | BothImages | Conjunction | XorAcrossImages
            | TripleVerify => TRUE_FALSE,
            _ => YES_NO,
        }
    }

    /// Uses the LEFT/RIGHT image pair instead of a single IMAGE.
    pub fn paired(self) -> bool {
        matches!(
            self,
            TemplateId::CountSum | TemplateId::BothImages | TemplateId::XorAcrossImages
        )
    }

    pub fn with_max_steps(max_steps: usize) -> Vec<TemplateId> {
        Self::ALL
            .into_iter()
            .filter(|t| t.visual_steps() <= max_steps)
            .collect()
    }

    /// Builds a program and question for `scenes`, or `None` when the scenes
    /// lack what the template needs (for example a category that occurs
    /// exactly once). `lean` in `[0,1]` biases verification slots toward the
    /// true attribute so that conjunctions are not almost always false.
    pub fn instantiate<R: Rng>(self, rng: &mut R, scenes: &SceneSet, lean: f64) -> Option<Instance> {
        let mut g = Gen {
            rng,
            lean,
            prog: ProgramBuilder::default(),
        };
        let question = match self {
            TemplateId::Exists => g.exists(scenes.get(ImageName::Image)?),
            TemplateId::AnyColor => g.any_color(scenes.get(ImageName::Image)?),
            TemplateId::LocExists => g.loc_exists(scenes.get(ImageName::Image)?),
            TemplateId::CountThreshold => g.count_threshold(scenes.get(ImageName::Image)?, false),
            TemplateId::LocCountThreshold => g.count_threshold(scenes.get(ImageName::Image)?, true),
            TemplateId::AttributeQuery => g.attribute_query(scenes.get(ImageName::Image)?),
            TemplateId::VerifyColor => g.verify_one(scenes.get(ImageName::Image)?, Attr::Color),
            TemplateId::VerifyMaterial => g.verify_one(scenes.get(ImageName::Image)?, Attr::Material),
            TemplateId::ActivityQuery => g.activity_query(scenes.get(ImageName::Image)?),
            TemplateId::ExistenceOr => g.existence_or(scenes.get(ImageName::Image)?),
            TemplateId::CountSum => g.count_sum(scenes.get(ImageName::Left)?, scenes.get(ImageName::Right)?),
            TemplateId::BothImages => g.both_images(scenes.get(ImageName::Left)?, scenes.get(ImageName::Right)?),
            TemplateId::SpatialExists => g.spatial_exists(scenes.get(ImageName::Image)?),
            TemplateId::VerifyThenExists => g.verify_then_exists(scenes.get(ImageName::Image)?),
            TemplateId::CountOrExists => g.count_or_exists(scenes.get(ImageName::Image)?),
            TemplateId::SpatialAttribute => g.spatial_attribute(scenes.get(ImageName::Image)?),
            TemplateId::SharedVerify => g.shared_verify(scenes.get(ImageName::Image)?),
            TemplateId::AttributeCompare => g.attribute_compare(scenes.get(ImageName::Image)?),
            TemplateId::Conjunction => g.conjunction(scenes.get(ImageName::Image)?),
            TemplateId::ConditionalSelection => g.conditional_selection(scenes.get(ImageName::Image)?),
            TemplateId::XorAcrossImages => {
                g.xor_across_images(scenes.get(ImageName::Left)?, scenes.get(ImageName::Right)?)
            }
            TemplateId::TripleVerify => g.triple_verify(scenes.get(ImageName::Image)?),
            TemplateId::DoubleCompare => g.double_compare(scenes.get(ImageName::Image)?),
        }?;
        Some(Instance {
            program_text: g.prog.finish(),
            question_text: question,
        })
    }
}

impl std::fmt::Display for TemplateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub program_text: String,
    pub question_text: String,
}

/// Appends statements with fresh `BOXn`/`IMAGEn`/`ANSWERn` targets.
#[derive(Default)]
struct ProgramBuilder {
    lines: Vec<String>,
    boxes: usize,
    images: usize,
    answers: usize,
}

impl ProgramBuilder {
    fn loc(&mut self, image: &str, object: Category) -> String {
        let t = format!("BOX{}", self.boxes);
        self.boxes += 1;
        self.lines.push(format!(
            "{t}=LOC(image={image},object={})",
            quote_literal(object.as_str())
        ));
        t
    }

    fn crop(&mut self, kind: ModuleKind, image: &str, boxes: &str) -> String {
        let t = format!("IMAGE{}", self.images);
        self.images += 1;
        self.lines.push(format!("{t}={kind}(image={image},box={boxes})"));
        t
    }

    fn vqa(&mut self, image: &str, question: &str) -> String {
        let t = self.answer();
        self.lines
            .push(format!("{t}=VQA(image={image},question={})", quote_literal(question)));
        t
    }

    fn count(&mut self, boxes: &str) -> String {
        let t = self.answer();
        self.lines.push(format!("{t}=COUNT(box={boxes})"));
        t
    }

    fn eval(&mut self, expr: &str) -> String {
        let t = self.answer();
        self.lines.push(format!("{t}=EVAL(expr={})", quote_literal(expr)));
        t
    }

    fn answer(&mut self) -> String {
        let t = format!("ANSWER{}", self.answers);
        self.answers += 1;
        t
    }

    fn finish(mut self) -> String {
        let last = self
            .lines
            .last()
            .and_then(|l| l.split('=').next())
            .unwrap_or("ANSWER0")
            .to_string();
        self.lines.push(format!("FINAL_RESULT=RESULT(var={last})"));
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

#[derive(Clone, Copy)]
enum Attr {
    Color,
    Material,
    Activity,
}

impl Attr {
    fn of(self, o: &Object) -> &'static str {
        match self {
            Attr::Color => o.color.as_str(),
            Attr::Material => o.material.as_str(),
            Attr::Activity => o.activity.as_str(),
        }
    }

    fn vocab(self) -> Vec<&'static str> {
        match self {
            Attr::Color => Color::ALL.iter().map(|c| c.as_str()).collect(),
            Attr::Material => Material::ALL.iter().map(|c| c.as_str()).collect(),
            Attr::Activity => Activity::ALL.iter().map(|c| c.as_str()).collect(),
        }
    }

    fn question(self, obj: Category, value: &str) -> String {
        match self {
            Attr::Color => format!("Does the {obj} have {value} color?"),
            Attr::Material => format!("Is the {obj} made of {value}?"),
            Attr::Activity => format!("Is the {obj} {value}?"),
        }
    }
}

const DIRECTIONS: [ModuleKind; 6] = [
    ModuleKind::CropRightof,
    ModuleKind::CropLeftof,
    ModuleKind::CropBelow,
    ModuleKind::CropAbove,
    ModuleKind::CropInfrontof,
    ModuleKind::CropBehind,
];

fn direction_words(kind: ModuleKind) -> &'static str {
    match kind {
        ModuleKind::CropRightof => "to the right of",
        ModuleKind::CropLeftof => "to the left of",
        ModuleKind::CropBelow => "below",
        ModuleKind::CropAbove => "above",
        ModuleKind::CropInfrontof => "in front of",
        ModuleKind::CropBehind => "behind",
        _ => "at",
    }
}

/// Categories occurring exactly once, in vocabulary order.
fn unique_categories(scene: &Scene) -> Vec<Category> {
    Category::ALL.iter().copied().filter(|&c| scene.count(c) == 1).collect()
}

fn only(scene: &Scene, c: Category) -> &Object {
    scene
        .objects
        .iter()
        .find(|o| o.category == c)
        .expect("unique category is present")
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    lean: f64,
    prog: ProgramBuilder,
}

impl<R: Rng> Gen<'_, R> {
    fn category(&mut self) -> Category {
        *Category::ALL.choose(self.rng).expect("nonempty")
    }

    /// A category that, with probability `lean`, occurs in `scene`.
    fn category_leaning_present(&mut self, scene: &Scene) -> Category {
        if self.rng.gen_bool(self.lean) && !scene.objects.is_empty() {
            scene.objects.choose(self.rng).expect("nonempty").category
        } else {
            self.category()
        }
    }

    /// `k` distinct categories that occur exactly once.
    fn uniques(&mut self, scene: &Scene, k: usize) -> Option<Vec<Category>> {
        let u = unique_categories(scene);
        (u.len() >= k).then(|| u.choose_multiple(self.rng, k).copied().collect())
    }

    /// The true attribute with probability `lean`, else a uniformly drawn
    /// value (which may also be the true one).
    fn verify_value(&mut self, attr: Attr, o: &Object) -> &'static str {
        if self.rng.gen_bool(self.lean) {
            attr.of(o)
        } else {
            attr.vocab().choose(self.rng).expect("nonempty")
        }
    }

    fn locate_crop(&mut self, image: &str, c: Category) -> String {
        let b = self.prog.loc(image, c);
        self.prog.crop(ModuleKind::Crop, image, &b)
    }

    fn verify(&mut self, scene: &Scene, image: &str, c: Category, attr: Attr) -> (String, String) {
        let v = self.verify_value(attr, only(scene, c));
        let q = attr.question(c, v);
        let crop = self.locate_crop(image, c);
        (self.prog.vqa(&crop, &q), q)
    }

    fn exists(&mut self, scene: &Scene) -> Option<String> {
        let c = self.category_leaning_present(scene);
        let q = format!("Is there a {c}?");
        self.prog.vqa("IMAGE", &q);
        Some(q)
    }

    fn any_color(&mut self, scene: &Scene) -> Option<String> {
        let color = if self.rng.gen_bool(self.lean) && !scene.objects.is_empty() {
            scene.objects.choose(self.rng).expect("nonempty").color
        } else {
            *Color::ALL.choose(self.rng).expect("nonempty")
        };
        let q = format!("Is there anything {color}?");
        self.prog.vqa("IMAGE", &q);
        Some(q)
    }

    fn loc_exists(&mut self, scene: &Scene) -> Option<String> {
        let c = self.category_leaning_present(scene);
        let b = self.prog.loc("IMAGE", c);
        let n = self.prog.count(&b);
        self.prog.eval(&format!("'yes' if {{{n}}} > 0 else 'no'"));
        Some(format!("Is there a {c}?"))
    }

    fn count_threshold(&mut self, scene: &Scene, via_loc: bool) -> Option<String> {
        let c = self.category_leaning_present(scene);
        let k = self.rng.gen_range(1..=3);
        let n = if via_loc {
            let b = self.prog.loc("IMAGE", c);
            self.prog.count(&b)
        } else {
            self.prog.vqa("IMAGE", &format!("How many {c}s are in the image?"))
        };
        self.prog.eval(&format!("{{{n}}} >= {k}"));
        Some(format!("Are there at least {k} {c}s?"))
    }

    fn attribute_query(&mut self, scene: &Scene) -> Option<String> {
        let c = self.uniques(scene, 1)?[0];
        let crop = self.locate_crop("IMAGE", c);
        let q = format!("What color is the {c}?");
        self.prog.vqa(&crop, &q);
        Some(q)
    }

    fn activity_query(&mut self, scene: &Scene) -> Option<String> {
        let c = self.uniques(scene, 1)?[0];
        let crop = self.locate_crop("IMAGE", c);
        let q = format!("What is the {c} doing?");
        self.prog.vqa(&crop, &q);
        Some(q)
    }

    fn verify_one(&mut self, scene: &Scene, attr: Attr) -> Option<String> {
        let c = self.uniques(scene, 1)?[0];
        Some(self.verify(scene, "IMAGE", c, attr).1)
    }

    fn existence_or(&mut self, scene: &Scene) -> Option<String> {
        let a = self.category_leaning_present(scene);
        let b = loop {
            let b = self.category_leaning_present(scene);
            if b != a {
                break b;
            }
        };
        let x = self.prog.vqa("IMAGE", &format!("Is there a {a}?"));
        let y = self.prog.vqa("IMAGE", &format!("Is there a {b}?"));
        self.prog
            .eval(&format!("'yes' if {{{x}}} == 'yes' or {{{y}}} == 'yes' else 'no'"));
        Some(format!("Is there a {a} or a {b}?"))
    }

    fn count_sum(&mut self, left: &Scene, right: &Scene) -> Option<String> {
        let c = self.category_leaning_present(left);
        let truth = left.count(c) + right.count(c);
        let n = if self.rng.gen_bool(0.5) {
            truth
        } else {
            self.rng.gen_range(0..=3)
        };
        let q = format!("How many {c}s are in the image?");
        let x = self.prog.vqa("LEFT", &q);
        let y = self.prog.vqa("RIGHT", &q);
        self.prog.eval(&format!("{{{x}}} + {{{y}}} == {n}"));
        Some(format!("Are there exactly {n} {c}s in the two images?"))
    }

    fn both_images(&mut self, left: &Scene, right: &Scene) -> Option<String> {
        let c = if self.rng.gen_bool(self.lean) {
            let shared: Vec<Category> = Category::ALL
                .iter()
                .copied()
                .filter(|&c| left.count(c) > 0 && right.count(c) > 0)
                .collect();
            shared.choose(self.rng).copied().unwrap_or_else(|| self.category())
        } else {
            self.category()
        };
        let q = format!("Is there a {c}?");
        let x = self.prog.vqa("LEFT", &q);
        let y = self.prog.vqa("RIGHT", &q);
        self.prog.eval(&format!("{{{x}}} and {{{y}}}"));
        Some(format!("Is there a {c} in both images?"))
    }

    /// A unique anchor and the part of the scene beyond it in a random
    /// direction.
    fn anchor(&mut self, scene: &Scene) -> Option<(Category, ModuleKind, Region)> {
        let a = self.uniques(scene, 1)?[0];
        let dir = *DIRECTIONS.choose(self.rng).expect("nonempty");
        let det = Detection {
            image: ImageName::Image,
            cells: vec![only(scene, a).cell()],
        };
        let region = crop(&scene.whole(ImageName::Image), &det, dir);
        Some((a, dir, region))
    }

    fn spatial_exists(&mut self, scene: &Scene) -> Option<String> {
        let (a, dir, region) = self.anchor(scene)?;
        let inside: Vec<Category> = scene
            .objects_in(&region)
            .map(|o| o.category)
            .filter(|&c| c != a)
            .collect();
        let b = match inside.choose(self.rng) {
            Some(&b) if self.rng.gen_bool(self.lean) => b,
            _ => loop {
                let b = self.category();
                if b != a {
                    break b;
                }
            },
        };
        let bx = self.prog.loc("IMAGE", a);
        let im = self.prog.crop(dir, "IMAGE", &bx);
        let q = format!("Is there a {b}?");
        self.prog.vqa(&im, &q);
        Some(format!("Is there a {b} {} the {a}?", direction_words(dir)))
    }

    fn verify_then_exists(&mut self, scene: &Scene) -> Option<String> {
        let a = self.uniques(scene, 1)?[0];
        let (x, q) = self.verify(scene, "IMAGE", a, Attr::Color);
        let b = self.category_leaning_present(scene);
        let y = self.prog.vqa("IMAGE", &format!("Is there a {b}?"));
        self.prog
            .eval(&format!("'yes' if {{{x}}} == 'yes' and {{{y}}} == 'yes' else 'no'"));
        Some(format!("{} And is there a {b}?", q))
    }

    fn count_or_exists(&mut self, scene: &Scene) -> Option<String> {
        let a = self.category_leaning_present(scene);
        let b = self.category_leaning_present(scene);
        let c = self.category_leaning_present(scene);
        let bx = self.prog.loc("IMAGE", a);
        let n = self.prog.count(&bx);
        let y = self.prog.vqa("IMAGE", &format!("Is there a {b}?"));
        let z = self.prog.vqa("IMAGE", &format!("Is there a {c}?"));
        self.prog.eval(&format!(
            "'yes' if {{{n}}} >= 2 or ({{{y}}} == 'yes' and {{{z}}} == 'yes') else 'no'"
        ));
        Some(format!("Are there at least two {a}s, or both a {b} and a {c}?"))
    }

    fn spatial_attribute(&mut self, scene: &Scene) -> Option<String> {
        let (a, dir, region) = self.anchor(scene)?;
        let inside: Vec<Category> = Category::ALL
            .iter()
            .copied()
            .filter(|&c| c != a && scene.objects_in(&region).filter(|o| o.category == c).count() == 1)
            .collect();
        let b = *inside.choose(self.rng)?;
        let bx = self.prog.loc("IMAGE", a);
        let half = self.prog.crop(dir, "IMAGE", &bx);
        let by = self.prog.loc(&half, b);
        let im = self.prog.crop(ModuleKind::Crop, &half, &by);
        self.prog.vqa(&im, &format!("What color is the {b}?"));
        Some(format!("What color is the {b} {} the {a}?", direction_words(dir)))
    }

    fn shared_verify(&mut self, scene: &Scene) -> Option<String> {
        let a = self.uniques(scene, 1)?[0];
        let o = only(scene, a);
        let color = self.verify_value(Attr::Color, o);
        let material = self.verify_value(Attr::Material, o);
        let im = self.locate_crop("IMAGE", a);
        let x = self.prog.vqa(&im, &Attr::Color.question(a, color));
        let y = self.prog.vqa(&im, &Attr::Material.question(a, material));
        self.prog
            .eval(&format!("'yes' if {{{x}}} == 'yes' and {{{y}}} == 'yes' else 'no'"));
        Some(format!("Is the {a} {color} and made of {material}?"))
    }

    fn attribute_compare(&mut self, scene: &Scene) -> Option<String> {
        let u = self.uniques(scene, 2)?;
        let (a, b) = (u[0], u[1]);
        let ia = self.locate_crop("IMAGE", a);
        let ib = self.locate_crop("IMAGE", b);
        let x = self.prog.vqa(&ia, &format!("What color is the {a}?"));
        let y = self.prog.vqa(&ib, &format!("What color is the {b}?"));
        self.prog.eval(&format!("'yes' if {{{x}}} != {{{y}}} else 'no'"));
        Some(format!("Do the {a} and the {b} have different colors?"))
    }

    fn conjunction(&mut self, scene: &Scene) -> Option<String> {
        let u = self.uniques(scene, 2)?;
        let (x, qa) = self.verify(scene, "IMAGE", u[0], Attr::Color);
        let (y, qb) = self.verify(scene, "IMAGE", u[1], Attr::Material);
        self.prog.eval(&format!("{{{x}}} and {{{y}}}"));
        Some(format!("{qa} {qb}"))
    }

    fn conditional_selection(&mut self, scene: &Scene) -> Option<String> {
        let u = self.uniques(scene, 2)?;
        let (x, qa) = self.verify(scene, "IMAGE", u[0], Attr::Activity);
        let ib = self.locate_crop("IMAGE", u[1]);
        let y = self.prog.vqa(&ib, &format!("What color is the {}?", u[1]));
        self.prog.eval(&format!("{{{y}}} if {{{x}}} == 'yes' else 'none'"));
        Some(format!("{qa} If so, what color is the {}?", u[1]))
    }

    fn xor_across_images(&mut self, left: &Scene, right: &Scene) -> Option<String> {
        let a = *unique_categories(left)
            .iter()
            .filter(|c| right.count(**c) == 1)
            .copied()
            .collect::<Vec<_>>()
            .choose(self.rng)?;
        let b = self.category_leaning_present(left);
        let (x, _) = self.verify(left, "LEFT", a, Attr::Color);
        let (y, _) = self.verify(right, "RIGHT", a, Attr::Color);
        let ql = format!("Is there a {b}?");
        let z = self.prog.vqa("LEFT", &ql);
        let w = self.prog.vqa("RIGHT", &ql);
        self.prog
            .eval(&format!("({{{x}}} xor {{{y}}}) and ({{{z}}} or {{{w}}})"));
        Some(format!(
            "Does exactly one image show the {a} in the asked color, with a {b} in either image?"
        ))
    }

    fn triple_verify(&mut self, scene: &Scene) -> Option<String> {
        let u = self.uniques(scene, 3)?;
        let (x, _) = self.verify(scene, "IMAGE", u[0], Attr::Color);
        let (y, _) = self.verify(scene, "IMAGE", u[1], Attr::Material);
        let (z, _) = self.verify(scene, "IMAGE", u[2], Attr::Activity);
        self.prog.eval(&format!("{{{x}}} and {{{y}}} and {{{z}}}"));
        Some(format!("Do the {}, the {} and the {} all match?", u[0], u[1], u[2]))
    }

    fn double_compare(&mut self, scene: &Scene) -> Option<String> {
        let u = self.uniques(scene, 4)?;
        let crops: Vec<String> = u.iter().map(|&c| self.locate_crop("IMAGE", c)).collect();
        let x = self.prog.vqa(&crops[0], &format!("What color is the {}?", u[0]));
        let y = self.prog.vqa(&crops[1], &format!("What color is the {}?", u[1]));
        let z = self
            .prog
            .vqa(&crops[2], &format!("What material is the {} made of?", u[2]));
        let w = self
            .prog
            .vqa(&crops[3], &format!("What material is the {} made of?", u[3]));
        self.prog
            .eval(&format!("'yes' if {{{x}}} != {{{y}}} and {{{z}}} == {{{w}}} else 'no'"));
        Some(format!(
            "Do the {} and the {} differ in color while the {} and the {} share a material?",
            u[0], u[1], u[2], u[3]
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{count_visual_steps, parse_program};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_template_emits_valid_programs_with_declared_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in TemplateId::ALL {
            let mut made = 0;
            for _ in 0..400 {
                let scenes = if t.paired() {
                    SceneSet::pair(Scene::random(&mut rng, 4, 4), Scene::random(&mut rng, 4, 4))
                } else {
                    SceneSet::single(Scene::random(&mut rng, 4, 4))
                };
                let Some(inst) = t.instantiate(&mut rng, &scenes, 0.5) else {
                    continue;
                };
                let p = parse_program(&inst.program_text).unwrap_or_else(|e| panic!("{t}: {e}\n{}", inst.program_text));
                assert_eq!(count_visual_steps(&p), t.visual_steps(), "{t}");
                made += 1;
            }
            assert!(made >= 20, "{t} instantiated only {made} times");
        }
    }

    #[test]
    fn names_roundtrip() {
        for t in TemplateId::ALL {
            assert_eq!(TemplateId::from_name(t.as_str()), Some(t));
        }
        assert!(TemplateId::with_max_steps(4).iter().all(|t| t.visual_steps() <= 4));
        assert_eq!(TemplateId::with_max_steps(8).len(), TemplateId::ALL.len());
    }
}
