//! Differentiable linear stand-ins for the detector and the VQA model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::questions::{Question, Template, SLOT_DIM};
use super::{LocModule, ModuleError, VqaModule};
use crate::diff::{ParamStore, Scalar, Tape, TensorId};
use crate::value::{Categorical, Cell, Detection, Region, Value};
use crate::world::{Category, Scene, SceneSet, FEATURE_DIM};

/// Cells kept in the detection candidate pool. Outcomes are all subsets of
/// the pool, so one LOC call has at most 16 outcomes.
pub const LOC_POOL: usize = 4;

/// Pooled region features followed by their product with the slot indicator.
pub const VQA_INPUT_DIM: usize = FEATURE_DIM + FEATURE_DIM * SLOT_DIM;

const LOC_WEIGHT: &str = "loc.weight";
const LOC_BIAS: &str = "loc.bias";

fn vqa_weight(t: Template) -> String {
    format!("vqa.{}.weight", t.id())
}

fn vqa_bias(t: Template) -> String {
    format!("vqa.{}.bias", t.id())
}

/// Registers every toy tensor. Weights are drawn from `N(0, sigma^2)`,
/// biases start at zero. `sigma = 0` gives the all-zero store.
pub fn init_params(seed: u64, sigma: f64) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let mut draw = |n: usize| -> Vec<f64> {
        if sigma > 0.0 {
            (0..n).map(|_| normal.sample(&mut rng)).collect()
        } else {
            vec![0.0; n]
        }
    };
    let mut store = ParamStore::new();
    let cats = Category::ALL.len();
    store
        .register(LOC_WEIGHT, vec![cats, FEATURE_DIM], draw(cats * FEATURE_DIM))
        .expect("fresh store");
    store
        .register(LOC_BIAS, vec![cats], vec![0.0; cats])
        .expect("fresh store");
    for t in Template::ALL {
        let a = t.answers().len();
        store
            .register(vqa_weight(t), vec![a, VQA_INPUT_DIM], draw(a * VQA_INPUT_DIM))
            .expect("fresh store");
        store.register(vqa_bias(t), vec![a], vec![0.0; a]).expect("fresh store");
    }
    store
}

fn tensor(params: &ParamStore, name: &str) -> Result<TensorId, ModuleError> {
    params
        .id(name)
        .ok_or_else(|| ModuleError::MissingParams(name.to_string()))
}

fn scene_of<'a>(scenes: &'a SceneSet, region: &Region) -> Result<&'a Scene, ModuleError> {
    scenes
        .get(region.image)
        .ok_or_else(|| ModuleError::MissingImage(region.image.to_string()))
}

/// Linear cell scorer with one weight row and bias per object word:
/// `s(cell) = w_obj . phi(cell) + b_obj`. Each pooled cell is detected
/// independently with probability `sigmoid(s)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ToyLoc;

impl ToyLoc {
    /// The candidate pool: the top [`LOC_POOL`] occupied cells of `region`
    /// by score, ties in row-major order, with their scores. Empty cells are
    /// never proposed.
    pub fn pool(
        scene: &Scene,
        region: &Region,
        category: Category,
        params: &ParamStore,
    ) -> Result<Vec<(Cell, f64)>, ModuleError> {
        let w = params.tensor(tensor(params, LOC_WEIGHT)?).values();
        let b = params.tensor(tensor(params, LOC_BIAS)?).values();
        let row = category.index() * FEATURE_DIM;
        let mut scored: Vec<(Cell, f64)> = scene
            .objects_in(region)
            .map(|o| {
                let s = o.active_features().iter().map(|&f| w[row + f]).sum::<f64>() + b[category.index()];
                (o.cell(), s)
            })
            .collect();
        // Stable sort keeps row-major order among equal scores.
        scored.sort_by(|x, y| y.1.total_cmp(&x.1));
        scored.truncate(LOC_POOL);
        Ok(scored)
    }
}

impl LocModule for ToyLoc {
    fn name(&self) -> &str {
        "toy"
    }

    fn distribution(
        &self,
        scenes: &SceneSet,
        region: &Region,
        object: &str,
        params: &ParamStore,
        tape: &mut Tape,
    ) -> Result<Categorical, ModuleError> {
        let category = Category::from_name(object).ok_or_else(|| ModuleError::OutOfVocabulary(object.into()))?;
        let scene = scene_of(scenes, region)?;
        let pool = Self::pool(scene, region, category, params)?;
        let (wt, bt) = (tensor(params, LOC_WEIGHT)?, tensor(params, LOC_BIAS)?);
        let row = category.index() * FEATURE_DIM;
        let mut on = Vec::with_capacity(pool.len());
        let mut off = Vec::with_capacity(pool.len());
        for &(c, _) in &pool {
            let mut terms = vec![(tape.param(params, bt, category.index()), 1.0)];
            if let Some(o) = scene.object_at(c) {
                for f in o.active_features() {
                    terms.push((tape.param(params, wt, row + f), 1.0));
                }
            }
            let s = tape.linear(terms, 0.0);
            on.push(tape.sigmoid(s));
            let neg = tape.neg(s);
            off.push(tape.sigmoid(neg));
        }
        let n = pool.len();
        let mut support = Vec::with_capacity(1 << n);
        let mut probs = Vec::with_capacity(1 << n);
        for mask in 0..(1usize << n) {
            let mut p = Scalar::ONE;
            let mut cells = Vec::new();
            for (i, &(c, _)) in pool.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    cells.push(c);
                    p = tape.mul(p, on[i]);
                } else {
                    p = tape.mul(p, off[i]);
                }
            }
            support.push(Value::Detection(Detection {
                image: region.image,
                cells,
            }));
            probs.push(p);
        }
        Ok(Categorical::new(support, probs).expect("distinct subsets"))
    }
}

/// Sum-pooled region features: feature index and count, sorted by index.
pub(crate) fn pooled_features(scene: &Scene, region: &Region) -> Vec<(usize, f64)> {
    let mut acc = [0.0; FEATURE_DIM];
    for o in scene.objects_in(region) {
        for f in o.active_features() {
            acc[f] += 1.0;
        }
    }
    acc.iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, &v)| (i, v))
        .collect()
}

/// Nonzero coordinates of the VQA input vector `[phi_R; phi_R (x) slots]`.
pub(crate) fn vqa_input(scene: &Scene, region: &Region, q: &Question) -> Vec<(usize, f64)> {
    let phi = pooled_features(scene, region);
    let slots = q.slot_indices();
    let mut x = phi.clone();
    for &(f, v) in &phi {
        for &s in &slots {
            x.push((FEATURE_DIM + f * SLOT_DIM + s, v));
        }
    }
    x
}

/// One linear classifier per question template over the answer vocabulary.
#[derive(Clone, Copy, Debug, Default)]
pub struct ToyVqa;

impl ToyVqa {
    /// Distribution over `vocab`, each answer scored by its canonical row.
    /// Reordering `vocab` reorders the output the same way.
    pub fn distribution_over(
        scenes: &SceneSet,
        region: &Region,
        question: &str,
        params: &ParamStore,
        tape: &mut Tape,
        vocab: &[Value],
    ) -> Result<Categorical, ModuleError> {
        let q = Question::parse(question).ok_or_else(|| ModuleError::UnknownTemplate(question.into()))?;
        let scene = scene_of(scenes, region)?;
        let canonical = q.template.answers();
        let (wt, bt) = (
            tensor(params, &vqa_weight(q.template))?,
            tensor(params, &vqa_bias(q.template))?,
        );
        let x = vqa_input(scene, region, &q);
        let logits: Vec<Scalar> = vocab
            .iter()
            .map(|a| {
                let row = canonical
                    .iter()
                    .position(|c| c == a)
                    .expect("vocabulary entries come from the template");
                let mut terms = Vec::with_capacity(x.len() + 1);
                terms.push((tape.param(params, bt, row), 1.0));
                for &(j, v) in &x {
                    terms.push((tape.param(params, wt, row * VQA_INPUT_DIM + j), v));
                }
                tape.linear(terms, 0.0)
            })
            .collect();
        let probs = tape.softmax(&logits);
        Ok(Categorical::new(vocab.to_vec(), probs).expect("template vocabularies are distinct"))
    }
}

impl VqaModule for ToyVqa {
    fn name(&self) -> &str {
        "toy"
    }

    fn distribution(
        &self,
        scenes: &SceneSet,
        region: &Region,
        question: &str,
        params: &ParamStore,
        tape: &mut Tape,
    ) -> Result<Categorical, ModuleError> {
        let vocab = Question::parse(question)
            .ok_or_else(|| ModuleError::UnknownTemplate(question.into()))?
            .template
            .answers();
        Self::distribution_over(scenes, region, question, params, tape, &vocab)
    }
}
