use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use serde_json::json;

use diffvp::diff::{gradcheck, GradCheckConfig};
use diffvp::dsl::detect_shared_latents;
use diffvp::engine::{brute_force, infer, infer_exact, inference_json, InferenceMode, InferenceOptions};
use diffvp::fixtures::Fixture;
use diffvp::graph::build_graph;
use diffvp::modules::{init_params, ModuleSet};
use diffvp::trainer::{disrupt_programs, evaluate, example_nll, run_experiment};
use diffvp::world::{dataset, gen_dataset, CaseRecord, GenConfig};
use diffvp::{parse_program, Categorical, ParamStore, Program, Runtime, SceneSet, Tape};

use crate::config::{derive_seed, ExperimentConfig, Stream};
use crate::{CheckArgs, Cli, Command, Failure, FixtureArg, GenArgs, InferArgs, ModeArg, ModulesArg};

type Outcome = Result<(), Failure>;

pub fn run(cli: &Cli) -> Outcome {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Parse { program } => {
            let p = read_program(program)?;
            println!("{}", serde_json::to_string_pretty(&p).expect("programs serialize"));
            Ok(())
        }
        Command::Graph {
            program,
            dot,
            hide_deterministic,
        } => {
            let g = build_graph(&read_program(program)?);
            if *dot {
                print!("{}", g.to_dot(*hide_deterministic));
            } else {
                println!("{}", serde_json::to_string_pretty(&g).expect("graphs serialize"));
            }
            Ok(())
        }
        Command::Infer(args) => cmd_infer(args),
        Command::Gen(args) => cmd_gen(args, seed),
        Command::Disrupt { data, out, fraction } => {
            if !(0.0..=1.0).contains(fraction) {
                return Err(anyhow!("--fraction must lie in [0, 1]").into());
            }
            let cases = load(data)?;
            let disrupted = disrupt_programs(&cases, *fraction, derive_seed(seed, Stream::Disruption));
            let changed = cases
                .iter()
                .zip(&disrupted)
                .filter(|(a, b)| a.program_text != b.program_text)
                .count();
            save(out, &disrupted)?;
            eprintln!("disrupted {changed} of {} programs -> {}", cases.len(), out.display());
            Ok(())
        }
        Command::Train { config, out, fractions } => cmd_train(cli, config, out.as_deref(), fractions.as_deref()),
        Command::Eval {
            data,
            params,
            modules,
            mode,
        } => {
            let cases = load(data)?;
            let params = load_params(params.as_deref(), || init_params(0, 0.0))?;
            let report = evaluate(&cases, &module_set(*modules), &params, mode_of(*mode));
            println!("{}", serde_json::to_string_pretty(&report).expect("reports serialize"));
            Ok(())
        }
        Command::OracleCheck(check) => cmd_oracle_check(check, seed),
        Command::Gradcheck {
            check,
            epsilon,
            tolerance,
            coords,
        } => cmd_gradcheck(check, seed, *epsilon, *tolerance, *coords),
    }
}

fn read_program(path: &Path) -> Result<Program, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_program(&text).map_err(|e| anyhow!("{}: {}: {e}", path.display(), e.kind()).into())
}

fn load(path: &Path) -> anyhow::Result<Vec<CaseRecord>> {
    dataset::load(path).with_context(|| format!("loading {}", path.display()))
}

fn save(path: &Path, cases: &[CaseRecord]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    dataset::save(path, cases).with_context(|| format!("writing {}", path.display()))
}

fn load_params(path: Option<&Path>, default: impl FnOnce() -> ParamStore) -> anyhow::Result<ParamStore> {
    match path {
        Some(p) => ParamStore::load(p).with_context(|| format!("loading checkpoint {}", p.display())),
        None => Ok(default()),
    }
}

fn mode_of(m: ModeArg) -> InferenceMode {
    match m {
        ModeArg::Argmax => InferenceMode::Argmax,
        ModeArg::Factorized => InferenceMode::Factorized,
        ModeArg::Exact => InferenceMode::Exact,
        ModeArg::Brute => InferenceMode::BruteForce,
    }
}

fn module_set(m: ModulesArg) -> ModuleSet {
    match m {
        ModulesArg::Toy => ModuleSet::toy(),
        ModulesArg::Truth => ModuleSet::truth(),
    }
}

fn max_gap(a: &Categorical, b: &Categorical) -> f64 {
    a.support()
        .iter()
        .chain(b.support())
        .map(|v| (a.p(v) - b.p(v)).abs())
        .fold(0.0, f64::max)
}

fn cmd_infer(args: &InferArgs) -> Outcome {
    let mode = mode_of(args.mode);
    let (fixture, case);
    let (id, program, scenes, modules, params): (String, Program, &SceneSet, ModuleSet, ParamStore) =
        match (&args.fixture, &args.case) {
            (Some(f), _) => {
                fixture = match f {
                    FixtureArg::Mixture => Fixture::mixture(),
                    FixtureArg::Shared => Fixture::shared(),
                };
                let name = format!("{f:?}").to_lowercase();
                (
                    name,
                    fixture.program.clone(),
                    &fixture.scenes,
                    fixture.modules.clone(),
                    fixture.params.clone(),
                )
            }
            (None, Some(path)) => {
                let cases = load(path)?;
                case = cases
                    .into_iter()
                    .nth(args.index)
                    .ok_or_else(|| anyhow!("{} has no case at index {}", path.display(), args.index))?;
                let program = case.program().map_err(|e| anyhow!("case {}: {e}", case.id))?;
                let params = load_params(args.params.as_deref(), || init_params(0, 0.0))?;
                (case.id.clone(), program, &case.scenes, module_set(args.modules), params)
            }
            (None, None) => unreachable!("clap requires a source"),
        };
    let rt = Runtime::new(scenes, &modules, &params);
    let opts = InferenceOptions::default();
    let run =
        |m: InferenceMode| infer(m, &program, rt, &mut Tape::inference(), &opts).map_err(|e| anyhow!("{id}: {e}"));
    let dist = run(mode)?;
    let mut out = inference_json(&dist, mode, &id);

    // The independence approximation is wrong when answers share a latent;
    // show both numbers so the gap is visible.
    let shared = detect_shared_latents(&program);
    if !shared.is_empty() && matches!(mode, InferenceMode::Exact | InferenceMode::Factorized) {
        let other_mode = if mode == InferenceMode::Exact {
            InferenceMode::Factorized
        } else {
            InferenceMode::Exact
        };
        let other = run(other_mode)?;
        let gap = max_gap(&dist, &other);
        let latents: Vec<&str> = shared.iter().map(|s| s.latent.as_str()).collect();
        if gap > 1e-12 {
            eprintln!("warning: exact and factorized inference diverge by {gap:.3e} (shared latents: {latents:?})");
        }
        out["divergence"] = json!({
            "shared_latents": latents,
            "other": inference_json(&other, other_mode, &id),
            "max_abs_diff": gap,
        });
    }
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

fn cmd_gen(args: &GenArgs, seed: u64) -> Outcome {
    let mut config = GenConfig {
        seed: derive_seed(seed, Stream::Dataset),
        rows: args.rows,
        cols: args.cols,
        long_cases: args.long,
        ..GenConfig::default()
    };
    config = match &args.stages {
        Some(counts) => {
            let mut stage_counts = [0; 4];
            stage_counts[..counts.len()].copy_from_slice(counts);
            GenConfig { stage_counts, ..config }
        }
        None => config.with_total(args.cases),
    };
    let cases = gen_dataset(&config).context("generating dataset")?;
    save(&args.out, &cases)?;
    eprintln!(
        "wrote {} cases (per stage {:?}, long {}) -> {}",
        cases.len(),
        config.stage_counts,
        config.long_cases,
        args.out.display()
    );
    Ok(())
}

fn dataset_or_generate(path: Option<&Path>, cases: usize, seed: u64) -> anyhow::Result<Vec<CaseRecord>> {
    match path {
        Some(p) => load(p),
        None => gen_dataset(
            &GenConfig {
                seed,
                ..GenConfig::default()
            }
            .with_total(cases),
        )
        .context("generating dataset"),
    }
}

fn cmd_train(cli: &Cli, config_path: &Path, out: Option<&Path>, fractions: Option<&[f64]>) -> Outcome {
    let mut config = ExperimentConfig::load(config_path)?;
    config.apply_flags(cli.seed, cli.jobs, cli.deterministic);
    config.train.validate().context("after applying flags")?;
    let data = &config.data;
    let train_set = dataset_or_generate(data.train.as_deref(), data.train_cases, data.train_seed)?;
    let eval_set = dataset_or_generate(data.eval.as_deref(), data.eval_cases, data.eval_seed)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| config.output.dir.clone());

    let runs: Vec<(Option<f64>, std::path::PathBuf)> = match fractions {
        Some(fs) => fs
            .iter()
            .map(|&f| (Some(f), dir.join(format!("disrupt-{f}"))))
            .collect(),
        None => vec![(None, dir.clone())],
    };
    for (fraction, dir) in runs {
        let mut train_config = config.train.clone();
        if let Some(f) = fraction {
            train_config.disruption.fraction = f;
        }
        train_config.validate().context("disruption fraction")?;
        let params = init_params(train_config.seed, train_config.init_sigma);
        let (outcome, metrics) = run_experiment(&train_config, &train_set, &eval_set, &ModuleSet::toy(), params)
            .map_err(|e| anyhow!("training: {e}"))?;
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let write = |name: &str, text: &str| {
            let p = dir.join(name);
            fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
        };
        write("metrics.csv", &metrics.to_csv())?;
        write("metrics.json", &metrics.to_json())?;
        write("params.json", &outcome.params.to_json())?;
        for (k, ck) in outcome.stage_checkpoints.iter().enumerate() {
            write(&format!("stage-{}.json", k + 1), &ck.to_json())?;
        }
        let (first, last) = (
            metrics.first().expect("initial row"),
            metrics.last().expect("initial row"),
        );
        println!(
            "{}: accuracy {:.3} -> {:.3} (LOC {:.3} -> {:.3}, VQA {:.3} -> {:.3}) over {} epochs",
            dir.display(),
            first.acc_final,
            last.acc_final,
            first.acc_loc,
            last.acc_loc,
            first.acc_vqa,
            last.acc_vqa,
            train_config.total_epochs()
        );
    }
    Ok(())
}

fn check_inputs(
    check: &CheckArgs,
    seed: u64,
    default_cases: usize,
    sigma: f64,
) -> anyhow::Result<(Vec<CaseRecord>, ParamStore)> {
    let cases = dataset_or_generate(
        check.data.as_deref(),
        check.cases.unwrap_or(default_cases),
        derive_seed(seed, Stream::Dataset),
    )?;
    let params = load_params(check.params.as_deref(), || {
        init_params(derive_seed(seed, Stream::Init), sigma)
    })?;
    Ok((cases, params))
}

fn write_report(check: &CheckArgs, report: &serde_json::Value) -> anyhow::Result<()> {
    if let Some(p) = &check.report {
        let text = serde_json::to_string_pretty(report).expect("json");
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

const ORACLE_TOLERANCE: f64 = 1e-9;

fn cmd_oracle_check(check: &CheckArgs, seed: u64) -> Outcome {
    let (cases, params) = check_inputs(check, seed, 200, 0.5)?;
    let modules = ModuleSet::toy();
    let opts = InferenceOptions::default();
    let (mut worst, mut worst_id) = (0.0f64, String::new());
    for case in &cases {
        let p = case.program().map_err(|e| anyhow!("case {}: {e}", case.id))?;
        let rt = Runtime::new(&case.scenes, &modules, &params);
        let exact = infer_exact(&p, rt, &mut Tape::inference(), &opts).map_err(|e| anyhow!("case {}: {e}", case.id))?;
        let brute = brute_force(&p, rt, &opts).map_err(|e| anyhow!("case {}: {e}", case.id))?;
        let gap = max_gap(&exact, &brute);
        if gap > worst {
            (worst, worst_id) = (gap, case.id.clone());
        }
    }
    let passed = worst < ORACLE_TOLERANCE;
    println!("max |exact - brute| = {worst:.3e} over {} programs", cases.len());
    write_report(
        check,
        &json!({"cases": cases.len(), "max_abs_diff": worst, "worst_case": worst_id, "tolerance": ORACLE_TOLERANCE, "passed": passed}),
    )?;
    if !passed {
        return Err(Failure::Internal(anyhow!("case {worst_id} deviates by {worst:.3e}")));
    }
    Ok(())
}

fn cmd_gradcheck(check: &CheckArgs, seed: u64, epsilon: f64, tolerance: f64, coords: usize) -> Outcome {
    let (cases, params) = check_inputs(check, seed, 100, 0.3)?;
    let modules = ModuleSet::toy();
    let base = GradCheckConfig {
        epsilon,
        tolerance,
        max_coords: coords,
        untouched: coords,
        ..GradCheckConfig::default()
    };
    let (mut worst, mut checked, mut failures) = (0.0f64, 0, Vec::new());
    for (i, case) in cases.iter().enumerate() {
        let p = case.program().map_err(|e| anyhow!("case {}: {e}", case.id))?;
        let config = GradCheckConfig {
            seed: i as u64,
            ..base.clone()
        };
        let report = gradcheck(&params, &config, |tape: &mut Tape, store: &ParamStore| {
            let rt = Runtime::new(&case.scenes, &modules, store);
            let pred = infer_exact(&p, rt, tape, &InferenceOptions::default()).map_err(|e| e.to_string())?;
            example_nll(tape, &pred, &case.label).map_err(|e| e.to_string())
        })
        .map_err(|e| anyhow!("case {}: {e}", case.id))?;
        worst = worst.max(report.max_rel_err);
        checked += report.checked;
        failures.extend(report.failures.iter().map(|f| {
            json!({"case": case.id, "tensor": f.tensor, "index": f.index,
                   "analytic": f.analytic, "numeric": f.numeric, "rel_err": f.rel_err})
        }));
    }
    println!(
        "max relative error {worst:.3e} over {checked} coordinates in {} cases; {} failures",
        cases.len(),
        failures.len()
    );
    let n = failures.len();
    write_report(
        check,
        &json!({"cases": cases.len(), "coordinates": checked, "max_rel_err": worst,
                "epsilon": epsilon, "tolerance": tolerance, "failures": failures}),
    )?;
    if n > 0 {
        return Err(Failure::Internal(anyhow!(
            "{n} coordinates exceed relative error {tolerance}"
        )));
    }
    Ok(())
}
