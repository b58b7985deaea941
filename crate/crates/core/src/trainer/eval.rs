use serde::{Deserialize, Serialize};

use super::loss::example_nll;
use super::{
    disrupt_programs, train_with, ErrorCounts, Failure, Metrics, MetricsRow, TrainConfig, TrainError, TrainOutcome,
};
use crate::diff::{ParamStore, Tape};
use crate::dsl::{parse_program, ModuleKind};
use crate::engine::{execute_argmax, infer, InferenceMode, InferenceOptions, Runtime};
use crate::modules::ModuleSet;
use crate::value::Value;
use crate::world::{intermediate_truth, CaseRecord};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cases: usize,
    pub correct: usize,
    pub acc_final: f64,
    pub acc_loc: f64,
    pub acc_vqa: f64,
    pub loc_calls: usize,
    pub vqa_calls: usize,
    /// Mean NLL of the labels under the inference mode, over cases where
    /// inference succeeded.
    pub loss: f64,
    /// Wrong or failed cases by cause. A wrong answer counts as a module
    /// error when some LOC/VQA output differs from the truth, and as a
    /// program error when every intermediate matches (the program itself
    /// does not compute the label).
    pub errors: ErrorCounts,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn same(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Detection(x), Value::Detection(y)) => x.same_set(y),
        _ => a == b,
    }
}

/// Scores `dataset`: final answers from the argmax executor, intermediate
/// LOC/VQA outputs against [`intermediate_truth`], and the NLL of the labels
/// under `mode`.
pub fn evaluate(dataset: &[CaseRecord], modules: &ModuleSet, params: &ParamStore, mode: InferenceMode) -> EvalReport {
    let mut r = EvalReport {
        cases: dataset.len(),
        ..EvalReport::default()
    };
    let (mut loc_ok, mut vqa_ok) = (0, 0);
    let (mut loss_sum, mut loss_n) = (0.0, 0);
    for case in dataset {
        let Ok(program) = parse_program(&case.program_text) else {
            r.errors.add(Failure::Program);
            continue;
        };
        let rt = Runtime::new(&case.scenes, modules, params);
        if mode != InferenceMode::Argmax {
            let mut tape = Tape::inference();
            if let Ok(pred) = infer(mode, &program, rt, &mut tape, &InferenceOptions::default()) {
                if let Ok(l) = example_nll(&mut tape, &pred, &case.label) {
                    loss_sum += l.value();
                    loss_n += 1;
                }
            }
        }
        let ex = match execute_argmax(&program, rt, &InferenceOptions::default()) {
            Ok(ex) => ex,
            Err(e) => {
                r.errors.add(Failure::of(&e));
                continue;
            }
        };
        let truth = intermediate_truth(case).ok();
        let mut mismatch = false;
        for s in &program.statements {
            let (Some(t), Some(v)) = (truth.as_ref().and_then(|t| t.get(&s.target)), ex.trace.get(&s.target)) else {
                continue;
            };
            let ok = same(v, t);
            match s.module {
                ModuleKind::Loc => {
                    r.loc_calls += 1;
                    loc_ok += ok as usize;
                }
                ModuleKind::Vqa => {
                    r.vqa_calls += 1;
                    vqa_ok += ok as usize;
                }
                _ => continue,
            }
            mismatch |= !ok;
        }
        if ex.result.matches_label(&case.label) {
            r.correct += 1;
        } else if mismatch {
            r.errors.add(Failure::Module);
        } else {
            r.errors.add(Failure::Program);
        }
    }
    r.acc_final = ratio(r.correct, r.cases);
    r.acc_loc = ratio(loc_ok, r.loc_calls);
    r.acc_vqa = ratio(vqa_ok, r.vqa_calls);
    r.loss = if loss_n > 0 { loss_sum / loss_n as f64 } else { 0.0 };
    r
}

fn row(epoch: usize, stage: usize, loss: f64, seconds: f64, e: &EvalReport) -> MetricsRow {
    MetricsRow {
        epoch,
        stage,
        loss,
        acc_final: e.acc_final,
        acc_loc: e.acc_loc,
        acc_vqa: e.acc_vqa,
        err_program: e.errors.program,
        err_module: e.errors.module,
        err_other: e.errors.other,
        seconds,
    }
}

/// Disrupts the training programs if configured, trains, and evaluates on
/// `eval_set` before training and every `eval_every` epochs. The training
/// loop itself never sees the evaluation set or the intermediate truth; it
/// only hands parameters to the callback that scores them.
pub fn run_experiment(
    config: &TrainConfig,
    train_set: &[CaseRecord],
    eval_set: &[CaseRecord],
    modules: &ModuleSet,
    params: ParamStore,
) -> Result<(TrainOutcome, Metrics), TrainError> {
    config.validate()?;
    let disrupted;
    let train_set = if config.disruption.fraction > 0.0 {
        disrupted = disrupt_programs(train_set, config.disruption.fraction, config.disruption.seed);
        &disrupted[..]
    } else {
        train_set
    };
    let initial = evaluate(eval_set, modules, &params, config.mode);
    let mut metrics = Metrics {
        rows: vec![row(0, 0, initial.loss, 0.0, &initial)],
        skipped: ErrorCounts::default(),
    };
    let total = config.total_epochs();
    let outcome = train_with(config, train_set, modules, params, &mut |stats, p| {
        if stats.epoch % config.eval_every == 0 || stats.epoch == total {
            let e = evaluate(eval_set, modules, p, config.mode);
            metrics
                .rows
                .push(row(stats.epoch, stats.stage, stats.loss, stats.seconds, &e));
        }
    })?;
    metrics.skipped = outcome.skipped;
    Ok((outcome, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modules::init_params;
    use crate::world::{gen_dataset, GenConfig};

    #[test]
    fn truth_modules_are_perfect() {
        let data = gen_dataset(&GenConfig::default().with_total(80)).unwrap();
        let r = evaluate(&data, &ModuleSet::truth(), &ParamStore::new(), InferenceMode::Argmax);
        assert_eq!(r.acc_final, 1.0);
        assert_eq!(r.acc_loc, 1.0);
        assert_eq!(r.acc_vqa, 1.0);
        assert_eq!(r.errors.total(), 0);
        assert!(r.loc_calls > 0 && r.vqa_calls > 0);
    }

    #[test]
    fn zero_epoch_experiment_has_only_the_initial_row() {
        let data = gen_dataset(&GenConfig::default().with_total(12)).unwrap();
        let c = TrainConfig {
            epochs_per_stage: 0,
            ..TrainConfig::default()
        };
        let p = init_params(0, 0.01);
        let (out, m) = run_experiment(&c, &data, &data, &ModuleSet::toy(), p.clone()).unwrap();
        assert_eq!(out.params, p);
        assert_eq!(m.rows.len(), 1);
        assert_eq!(m.rows[0].epoch, 0);
    }
}
