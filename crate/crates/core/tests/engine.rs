use diffvp::diff::Tape;
use diffvp::dsl::detect_shared_latents;
use diffvp::engine::{brute_force, execute_argmax, infer_exact, infer_factorized, InferenceOptions, Runtime};
use diffvp::fixtures::Fixture;
use diffvp::modules::{init_params, ModuleSet};
use diffvp::value::{Categorical, Value};
use diffvp::world::{gen_case, GenConfig};
use proptest::prelude::*;

fn gap(a: &Categorical, b: &Categorical) -> f64 {
    a.support()
        .iter()
        .chain(b.support())
        .map(|v| (a.p(v) - b.p(v)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn shared_fixture_separates_the_two_modes() {
    let f = Fixture::shared();
    let opts = InferenceOptions::default();
    let yes = Value::boolean(true);
    let exact = infer_exact(&f.program, f.runtime(), &mut Tape::inference(), &opts).unwrap();
    let fact = infer_factorized(&f.program, f.runtime(), &mut Tape::inference(), &opts).unwrap();
    assert!((exact.p(&yes) - 0.5).abs() < 1e-12);
    assert!((fact.p(&yes) - 0.25).abs() < 1e-12);
    assert!(gap(&exact, &brute_force(&f.program, f.runtime(), &opts).unwrap()) < 1e-12);
}

#[test]
fn mixture_fixture_matches_hand_value() {
    let f = Fixture::mixture();
    let exact = infer_exact(
        &f.program,
        f.runtime(),
        &mut Tape::inference(),
        &InferenceOptions::default(),
    )
    .unwrap();
    assert!((exact.p(&Value::token("yes")) - 0.62).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_matches_brute_force(seed in any::<u64>(), steps in 1usize..=4, pseed in any::<u64>()) {
        let case = gen_case(seed, steps, &GenConfig::default()).unwrap();
        let p = case.program().unwrap();
        let modules = ModuleSet::toy();
        let params = init_params(pseed, 0.7);
        let rt = Runtime::new(&case.scenes, &modules, &params);
        let opts = InferenceOptions::default();
        let exact = infer_exact(&p, rt, &mut Tape::inference(), &opts).unwrap();
        let brute = brute_force(&p, rt, &opts).unwrap();
        prop_assert!(gap(&exact, &brute) < 1e-9);
        prop_assert!((exact.total() - 1.0).abs() < 1e-9);
        if detect_shared_latents(&p).is_empty() {
            let fact = infer_factorized(&p, rt, &mut Tape::inference(), &opts).unwrap();
            prop_assert!(gap(&exact, &fact) < 1e-9);
        }
        // The argmax path is one joint assignment, so its answer has support.
        let ex = execute_argmax(&p, rt, &opts).unwrap();
        prop_assert!(exact.p(&ex.result) > 0.0);
    }

    #[test]
    fn one_hot_modules_make_inference_deterministic(seed in any::<u64>(), steps in 1usize..=4) {
        let case = gen_case(seed, steps, &GenConfig::default()).unwrap();
        let p = case.program().unwrap();
        let modules = ModuleSet::truth();
        let params = diffvp::ParamStore::new();
        let rt = Runtime::new(&case.scenes, &modules, &params);
        let exact = infer_exact(&p, rt, &mut Tape::inference(), &InferenceOptions::default()).unwrap();
        let (top, mass) = exact.argmax();
        prop_assert!((mass - 1.0).abs() < 1e-12);
        prop_assert!(top.matches_label(&case.label));
    }
}
