//! Case generation: scenes, a templated program, and its ground-truth label.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::templates::TemplateId;
use super::{Scene, SceneSet};
use crate::diff::ParamStore;
use crate::dsl::{count_visual_steps, parse_program, Program};
use crate::engine::{execute_argmax, EngineError, InferenceOptions, Runtime};
use crate::modules::ModuleSet;
use crate::value::Value;

/// Version written into every dataset record.
pub const DATASET_SCHEMA: u32 = 1;

/// Resampling attempts before a case is given up on.
pub const MAX_ATTEMPTS: usize = 200;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseMeta {
    pub num_visual_steps: usize,
    pub stage: usize,
    pub template_id: TemplateId,
    pub seed: u64,
}

/// One training or evaluation example.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseRecord {
    pub schema: u32,
    pub id: String,
    pub scenes: SceneSet,
    pub program_text: String,
    pub question_text: String,
    pub label: String,
    pub meta: CaseMeta,
}

impl CaseRecord {
    pub fn program(&self) -> Result<Program, crate::dsl::ParseError> {
        parse_program(&self.program_text)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("template {template} found no acceptable case in {attempts} attempts")]
    ExhaustedResampling { template: TemplateId, attempts: usize },
    #[error("no template has at most {0} visual steps")]
    EmptyPool(usize),
    #[error("generated program failed to parse: {0}")]
    Parse(#[from] crate::dsl::ParseError),
    #[error("labelling failed: {0}")]
    Engine(#[from] EngineError),
}

/// Knobs for corpus generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub seed: u64,
    pub rows: u8,
    pub cols: u8,
    /// New cases at 1, 2, 3 and 4 visual steps; cumulative stage sizes are
    /// the running sums.
    pub stage_counts: [usize; 4],
    /// Extra cases from templates with more than four visual steps.
    pub long_cases: usize,
    /// Probability that a verification slot is filled with the true value.
    pub lean: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            rows: 4,
            cols: 4,
            stage_counts: [500, 1000, 500, 300],
            long_cases: 0,
            lean: 0.5,
        }
    }
}

impl GenConfig {
    /// Scales `stage_counts` so they sum to `total`, keeping proportions;
    /// rounding slack goes to the earliest stages.
    pub fn with_total(mut self, total: usize) -> Self {
        let sum: usize = self.stage_counts.iter().sum();
        let mut counts = self.stage_counts.map(|c| c * total / sum.max(1));
        let mut slack = total - counts.iter().sum::<usize>();
        for c in counts.iter_mut() {
            if slack == 0 {
                break;
            }
            *c += 1;
            slack -= 1;
        }
        self.stage_counts = counts;
        self
    }

    pub fn total(&self) -> usize {
        self.stage_counts.iter().sum::<usize>() + self.long_cases
    }
}

/// Runs `program` with the ground-truth modules and returns its trace.
pub fn truth_execution(scenes: &SceneSet, program: &Program) -> Result<crate::engine::Execution, EngineError> {
    let modules = ModuleSet::truth();
    let params = ParamStore::new();
    execute_argmax(
        program,
        Runtime::new(scenes, &modules, &params),
        &InferenceOptions::default(),
    )
}

/// True value of every intermediate variable of `case`, from the scene
/// annotations. Never reachable from the training loop.
pub fn intermediate_truth(case: &CaseRecord) -> Result<BTreeMap<String, Value>, GenError> {
    Ok(truth_execution(&case.scenes, &case.program()?)?.trace)
}

fn scenes_for<R: Rng>(t: TemplateId, rng: &mut R, rows: u8, cols: u8) -> SceneSet {
    if t.paired() {
        SceneSet::pair(Scene::random(rng, rows, cols), Scene::random(rng, rows, cols))
    } else {
        SceneSet::single(Scene::random(rng, rows, cols))
    }
}

/// Generates one case of template `t` from `seed`. For binary templates a
/// `target` of `Some(true)` asks for the positive answer; candidates with
/// the other answer are resampled.
pub fn gen_case_of(t: TemplateId, seed: u64, target: Option<bool>, config: &GenConfig) -> Result<CaseRecord, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let scenes = scenes_for(t, &mut rng, config.rows, config.cols);
        let Some(inst) = t.instantiate(&mut rng, &scenes, config.lean) else {
            continue;
        };
        let program = parse_program(&inst.program_text)?;
        let result = truth_execution(&scenes, &program)?.result;
        if let (Some(want), Some((pos, neg))) = (target, t.binary_labels()) {
            let wanted = if want { pos } else { neg };
            if !result.matches_label(wanted) {
                continue;
            }
        }
        let steps = count_visual_steps(&program);
        return Ok(CaseRecord {
            schema: DATASET_SCHEMA,
            id: format!("case-{seed:016x}"),
            scenes,
            program_text: inst.program_text,
            question_text: inst.question_text,
            label: result.to_string(),
            meta: CaseMeta {
                num_visual_steps: steps,
                stage: steps.min(4),
                template_id: t,
                seed,
            },
        });
    }
    Err(GenError::ExhaustedResampling {
        template: t,
        attempts: MAX_ATTEMPTS,
    })
}

/// One case from a template drawn uniformly among those with at most
/// `max_steps` visual steps; binary targets are a fair coin.
pub fn gen_case(seed: u64, max_steps: usize, config: &GenConfig) -> Result<CaseRecord, GenError> {
    let pool = TemplateId::with_max_steps(max_steps);
    if pool.is_empty() {
        return Err(GenError::EmptyPool(max_steps));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = pool[rng.gen_range(0..pool.len())];
    let target = t.binary_labels().map(|_| rng.gen_bool(0.5));
    gen_case_of(t, rng.gen(), target, config)
}

/// Seed of case `index` in a corpus drawn with `seed`.
fn case_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.gen()
}

/// The staged corpus: for each step count, templates are taken round-robin
/// and binary targets alternate per template, so label balance holds by
/// construction.
pub fn gen_dataset(config: &GenConfig) -> Result<Vec<CaseRecord>, GenError> {
    let mut plan: Vec<(TemplateId, bool)> = Vec::with_capacity(config.total());
    let mut groups: Vec<(Vec<TemplateId>, usize)> = (1..=4)
        .map(|k| {
            let ts = TemplateId::ALL.into_iter().filter(|t| t.visual_steps() == k).collect();
            (ts, config.stage_counts[k - 1])
        })
        .collect();
    groups.push((
        TemplateId::ALL.into_iter().filter(|t| t.visual_steps() > 4).collect(),
        config.long_cases,
    ));
    for (templates, n) in groups {
        for i in 0..n {
            let t = templates[i % templates.len()];
            plan.push((t, (i / templates.len()) % 2 == 0));
        }
    }
    plan.iter()
        .enumerate()
        .map(|(i, &(t, positive))| {
            let target = t.binary_labels().map(|_| positive);
            let mut case = gen_case_of(t, case_seed(config.seed, i), target, config)?;
            case.id = format!("case-{i:05}");
            Ok(case)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modules::truth_accesses;

    fn small() -> GenConfig {
        GenConfig {
            seed: 3,
            ..GenConfig::default()
        }
        .with_total(120)
    }

    #[test]
    fn with_total_keeps_sum() {
        let c = GenConfig::default().with_total(2000);
        assert_eq!(c.stage_counts.iter().sum::<usize>(), 2000);
        assert_eq!(
            GenConfig::default().with_total(2300).stage_counts,
            [500, 1000, 500, 300]
        );
    }

    #[test]
    fn dataset_is_deterministic_and_labelled_by_truth() {
        let a = gen_dataset(&small()).unwrap();
        let b = gen_dataset(&small()).unwrap();
        assert_eq!(a, b);
        for case in &a {
            let p = case.program().unwrap();
            assert_eq!(count_visual_steps(&p), case.meta.num_visual_steps);
            let ex = truth_execution(&case.scenes, &p).unwrap();
            assert!(ex.result.matches_label(&case.label), "{}", case.id);
        }
    }

    #[test]
    fn intermediate_truth_is_counted() {
        let case = gen_case(9, 4, &GenConfig::default()).unwrap();
        let before = truth_accesses();
        let trace = intermediate_truth(&case).unwrap();
        assert!(truth_accesses() > before);
        assert!(trace.contains_key("FINAL_RESULT") || !trace.is_empty());
    }

    #[test]
    fn binary_targets_are_honoured() {
        let c = GenConfig::default();
        for seed in 0..10 {
            let yes = gen_case_of(TemplateId::TripleVerify, seed, Some(true), &c).unwrap();
            assert_eq!(yes.label, "True");
            let no = gen_case_of(TemplateId::AttributeCompare, seed, Some(false), &c).unwrap();
            assert_eq!(no.label, "no");
        }
    }
}
