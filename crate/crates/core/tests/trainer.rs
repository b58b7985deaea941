use diffvp::dsl::detect_shared_latents;
use diffvp::engine::{execute_argmax, infer_exact, InferenceMode, InferenceOptions, Runtime};
use diffvp::modules::{init_params, ModuleSet};
use diffvp::trainer::{evaluate, run_experiment, train, StageSpec, TrainConfig};
use diffvp::world::{gen_dataset, CaseRecord, GenConfig};
use diffvp::{ParamStore, Tape};

fn corpus(seed: u64, n: usize) -> Vec<CaseRecord> {
    gen_dataset(
        &GenConfig {
            seed,
            ..GenConfig::default()
        }
        .with_total(n),
    )
    .unwrap()
}

#[test]
fn loss_on_a_fixed_batch_falls_over_ten_steps() {
    for seed in 0..3 {
        let batch = corpus(seed, 32);
        // One stage holding the whole batch: every epoch is one step on it.
        let config = TrainConfig {
            batch_size: 32,
            epochs_per_stage: 10,
            stages: vec![StageSpec {
                max_visual_steps: 4,
                limit: None,
            }],
            seed,
            ..TrainConfig::default()
        };
        let out = train(&config, &batch, &ModuleSet::toy(), init_params(seed, 0.01)).unwrap();
        let losses: Vec<f64> = out.epochs.iter().map(|e| e.loss).collect();
        assert_eq!(losses.len(), 10);
        assert!(losses[9] < losses[0], "seed {seed}: {losses:?}");
    }
}

#[test]
fn zero_weight_modules_score_near_chance_on_binary_templates() {
    let binary: Vec<CaseRecord> = corpus(3, 2000)
        .into_iter()
        .filter(|c| c.meta.template_id.binary_labels().is_some())
        .collect();
    assert!(binary.len() > 500);
    let r = evaluate(&binary, &ModuleSet::toy(), &init_params(0, 0.0), InferenceMode::Argmax);
    assert!((r.acc_final - 0.5).abs() <= 0.05, "accuracy {}", r.acc_final);
}

#[test]
fn training_reduces_module_errors() {
    let (train_set, eval_set) = (corpus(4, 600), corpus(5, 200));
    let config = TrainConfig {
        epochs_per_stage: 2,
        ..TrainConfig::default()
    };
    let (_, m) = run_experiment(&config, &train_set, &eval_set, &ModuleSet::toy(), init_params(1, 0.01)).unwrap();
    let (first, last) = (m.first().unwrap(), m.last().unwrap());
    assert!(
        last.err_module < first.err_module,
        "{} -> {}",
        first.err_module,
        last.err_module
    );
    assert!(last.acc_final > first.acc_final);
    assert_eq!(m.rows.len(), config.total_epochs() + 1);
}

#[test]
fn exact_argmax_agrees_with_executor_under_one_hot_modules() {
    let data = corpus(6, 300);
    let modules = ModuleSet::truth();
    let params = ParamStore::new();
    let mut checked = 0;
    for case in &data {
        let p = case.program().unwrap();
        if !detect_shared_latents(&p).is_empty() {
            continue;
        }
        let rt = Runtime::new(&case.scenes, &modules, &params);
        let exact = infer_exact(&p, rt, &mut Tape::inference(), &InferenceOptions::default()).unwrap();
        let ex = execute_argmax(&p, rt, &InferenceOptions::default()).unwrap();
        assert_eq!(
            exact.argmax().0.matches_label(&case.label),
            ex.result.matches_label(&case.label)
        );
        checked += 1;
    }
    assert!(checked > 200);
}

#[test]
fn identical_configs_give_identical_metrics_and_checkpoints() {
    let (train_set, eval_set) = (corpus(7, 120), corpus(8, 40));
    let config = TrainConfig {
        epochs_per_stage: 1,
        ..TrainConfig::default()
    };
    let run = || run_experiment(&config, &train_set, &eval_set, &ModuleSet::toy(), init_params(2, 0.01)).unwrap();
    let ((a, ma), (b, mb)) = (run(), run());
    assert_eq!(ma.to_csv(), mb.to_csv());
    assert_eq!(a.params.to_json(), b.params.to_json());
    assert_eq!(a.stage_checkpoints, b.stage_checkpoints);
    assert!(ma.rows.iter().all(|r| r.seconds == 0.0));
}
