use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::loss::example_nll;
use super::{ErrorCounts, Failure, TrainConfig, TrainError};
use crate::diff::{Gradients, Optimizer, ParamGrads, ParamStore, Tape};
use crate::dsl::{parse_program, Program};
use crate::engine::{infer, InferenceOptions, Runtime};
use crate::modules::ModuleSet;
use crate::world::CaseRecord;

/// Training-side numbers for one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// 1-based stage, 0 without a curriculum.
    pub stage: usize,
    pub loss: f64,
    pub examples: usize,
    pub skipped: ErrorCounts,
    pub seconds: f64,
    /// True for the final epoch of a stage.
    pub stage_end: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ParamStore,
    pub epochs: Vec<EpochStats>,
    /// Parameters at the end of each stage, in stage order.
    pub stage_checkpoints: Vec<ParamStore>,
    pub skipped: ErrorCounts,
}

/// Gradient descent on the mean NLL of final labels.
pub fn train(
    config: &TrainConfig,
    dataset: &[CaseRecord],
    modules: &ModuleSet,
    params: ParamStore,
) -> Result<TrainOutcome, TrainError> {
    train_with(config, dataset, modules, params, &mut |_, _| {})
}

/// [`train`], calling `on_epoch` after every epoch with the epoch's numbers
/// and the current parameters.
pub fn train_with(
    config: &TrainConfig,
    dataset: &[CaseRecord],
    modules: &ModuleSet,
    mut params: ParamStore,
    on_epoch: &mut dyn FnMut(&EpochStats, &ParamStore),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if modules.loc.name() == "truth" || modules.vqa.name() == "truth" {
        return Err(TrainError::TruthModules("truth".into()));
    }
    let programs: Vec<Option<Program>> = dataset.iter().map(|c| parse_program(&c.program_text).ok()).collect();
    let schedule = schedule(config, dataset);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| TrainError::Pool(e.to_string()))?;
    let mut optimizer = Optimizer::new(config.optimizer.clone(), &params);
    let mut out = TrainOutcome {
        params: ParamStore::new(),
        epochs: Vec::new(),
        stage_checkpoints: Vec::new(),
        skipped: ErrorCounts::default(),
    };
    let mut epoch = 0;
    for (stage, members) in &schedule {
        for e in 0..config.epochs_per_stage {
            epoch += 1;
            let start = Instant::now();
            let mut order = members.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(epoch as u64);
            order.shuffle(&mut rng);

            let mut loss_sum = 0.0;
            let mut examples = 0;
            let mut skipped = ErrorCounts::default();
            for batch in order.chunks(config.batch_size) {
                let run = |&i: &usize| example_gradient(config, &dataset[i], programs[i].as_ref(), modules, &params);
                let results: Vec<Result<(f64, Gradients), Failure>> = if config.jobs > 1 {
                    pool.install(|| batch.par_iter().map(run).collect())
                } else {
                    batch.iter().map(run).collect()
                };
                let ok = results.iter().filter(|r| r.is_ok()).count();
                if ok == 0 {
                    results.iter().for_each(|r| skipped.add(*r.as_ref().unwrap_err()));
                    continue;
                }
                let mut grads = ParamGrads::zeros_like(&params);
                for r in &results {
                    match r {
                        Ok((l, g)) => {
                            loss_sum += l;
                            g.accumulate_into(&mut grads, 1.0 / ok as f64);
                        }
                        Err(f) => skipped.add(*f),
                    }
                }
                examples += ok;
                optimizer.step(&mut params, &grads)?;
            }
            let stats = EpochStats {
                epoch,
                stage: *stage,
                loss: if examples > 0 { loss_sum / examples as f64 } else { 0.0 },
                examples,
                skipped,
                seconds: if config.deterministic {
                    0.0
                } else {
                    start.elapsed().as_secs_f64()
                },
                stage_end: e + 1 == config.epochs_per_stage,
            };
            out.skipped.program += skipped.program;
            out.skipped.module += skipped.module;
            out.skipped.other += skipped.other;
            on_epoch(&stats, &params);
            out.epochs.push(stats);
        }
        if config.epochs_per_stage > 0 {
            out.stage_checkpoints.push(params.clone());
        }
    }
    out.params = params;
    Ok(out)
}

/// `(stage number, case indices)` per stage. Without the curriculum every
/// stage is numbered 0 and holds a seeded uniform sample of all eligible
/// cases, as large as the corresponding curriculum stage, so both runs take
/// the same number of optimizer steps and differ only in data ordering.
fn schedule(config: &TrainConfig, dataset: &[CaseRecord]) -> Vec<(usize, Vec<usize>)> {
    let members = |max_steps: usize, limit: Option<usize>| -> Vec<usize> {
        let it = (0..dataset.len()).filter(|&i| dataset[i].meta.num_visual_steps <= max_steps);
        it.take(limit.unwrap_or(usize::MAX)).collect()
    };
    let staged: Vec<(usize, Vec<usize>)> = config
        .stages
        .iter()
        .enumerate()
        .map(|(k, s)| (k + 1, members(s.max_visual_steps, s.limit)))
        .collect();
    if config.curriculum {
        return staged;
    }
    let last = config.stages.last().expect("validated");
    let all = members(last.max_visual_steps, last.limit);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(u64::MAX);
    staged
        .iter()
        .map(|(_, m)| {
            let mut pick: Vec<usize> = all.choose_multiple(&mut rng, m.len()).copied().collect();
            pick.sort_unstable();
            (0, pick)
        })
        .collect()
}

fn example_gradient(
    config: &TrainConfig,
    case: &CaseRecord,
    program: Option<&Program>,
    modules: &ModuleSet,
    params: &ParamStore,
) -> Result<(f64, Gradients), Failure> {
    let program = program.ok_or(Failure::Program)?;
    let mut tape = Tape::new();
    let rt = Runtime::new(&case.scenes, modules, params);
    let pred = infer(config.mode, program, rt, &mut tape, &InferenceOptions::default()).map_err(|e| Failure::of(&e))?;
    let loss = example_nll(&mut tape, &pred, &case.label).map_err(|_| Failure::Other)?;
    let grads = tape.backward(loss).map_err(|_| Failure::Other)?;
    Ok((loss.value(), grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modules::init_params;
    use crate::world::{gen_dataset, GenConfig};

    fn corpus(n: usize) -> Vec<CaseRecord> {
        gen_dataset(&GenConfig::default().with_total(n)).unwrap()
    }

    #[test]
    fn zero_epochs_leave_params_unchanged() {
        let data = corpus(20);
        let p0 = init_params(1, 0.01);
        let c = TrainConfig {
            epochs_per_stage: 0,
            ..TrainConfig::default()
        };
        let out = train(&c, &data, &ModuleSet::toy(), p0.clone()).unwrap();
        assert_eq!(out.params, p0);
        assert!(out.epochs.is_empty());
    }

    #[test]
    fn stages_are_cumulative() {
        let data = corpus(60);
        let s = schedule(&TrainConfig::default(), &data);
        assert_eq!(s.len(), 4);
        for w in s.windows(2) {
            assert!(w[0].1.len() <= w[1].1.len());
            assert!(w[0].1.iter().all(|i| w[1].1.contains(i)));
        }
        assert_eq!(s[3].1.len(), 60);
        let flat = schedule(
            &TrainConfig {
                curriculum: false,
                ..TrainConfig::default()
            },
            &data,
        );
        assert!(flat.iter().all(|(k, _)| *k == 0));
        for (a, b) in s.iter().zip(&flat) {
            assert_eq!(a.1.len(), b.1.len());
        }
        assert!(flat[0].1.iter().any(|&i| data[i].meta.num_visual_steps > 1));
    }

    #[test]
    fn refuses_truth_modules() {
        let data = corpus(4);
        let r = train(&TrainConfig::default(), &data, &ModuleSet::truth(), init_params(0, 0.0));
        assert!(matches!(r, Err(TrainError::TruthModules(_))));
    }

    #[test]
    fn parallel_and_serial_runs_agree() {
        let data = corpus(40);
        let c = TrainConfig {
            epochs_per_stage: 1,
            ..TrainConfig::default()
        };
        let a = train(&c, &data, &ModuleSet::toy(), init_params(2, 0.01)).unwrap();
        let b = train(
            &TrainConfig { jobs: 3, ..c },
            &data,
            &ModuleSet::toy(),
            init_params(2, 0.01),
        )
        .unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.epochs, b.epochs);
    }
}
