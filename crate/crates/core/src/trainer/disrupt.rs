use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dsl::{parse_program, Arg, ModuleKind, Program};
use crate::engine::{execute_argmax, InferenceOptions, Runtime};
use crate::modules::{init_params, ModuleSet, Question, SlotKind};
use crate::world::{CaseRecord, Category};

/// Every single-edit variant of `program`: one LOC object or one VQA slot
/// filler swapped for another in-vocabulary word, or one CROP statement
/// switched to another CROP variant.
fn candidates(program: &Program) -> Vec<Program> {
    let mut out = Vec::new();
    for (i, s) in program.statements.iter().enumerate() {
        let mut with_literal = |arg: &str, text: String| {
            let mut p = program.clone();
            for (k, a) in &mut p.statements[i].args {
                if k == arg {
                    *a = Arg::Literal(text.clone());
                }
            }
            out.push(p);
        };
        match s.module {
            ModuleKind::Loc => {
                let current = s.literal_arg("object").unwrap_or_default();
                for c in Category::ALL.iter().filter(|c| c.as_str() != current) {
                    with_literal("object", c.as_str().to_string());
                }
            }
            ModuleKind::Vqa => {
                let Some(q) = s.literal_arg("question").and_then(Question::parse) else {
                    continue;
                };
                for (j, (kind, word)) in q.slots.iter().enumerate() {
                    for w in SlotKind::vocab(*kind).iter().filter(|w| *w != word) {
                        let mut q2 = q.clone();
                        q2.slots[j].1 = w.to_string();
                        with_literal("question", q2.render());
                    }
                }
            }
            m if m.is_crop() => {
                for v in ModuleKind::CROPS.into_iter().filter(|&v| v != m) {
                    let mut p = program.clone();
                    p.statements[i].module = v;
                    out.push(p);
                }
            }
            _ => {}
        }
    }
    out
}

/// Replaces `floor(fraction * N)` seeded-randomly chosen programs with a
/// disrupted variant that still parses and executes. Labels are kept.
pub fn disrupt_programs(dataset: &[CaseRecord], fraction: f64, seed: u64) -> Vec<CaseRecord> {
    let mut out = dataset.to_vec();
    let k = ((fraction.clamp(0.0, 1.0) * dataset.len() as f64).floor() as usize).min(dataset.len());
    if k == 0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    // Executability is checked with untrained toy modules, which fail on
    // exactly the inputs every learned module would.
    let modules = ModuleSet::toy();
    let params = init_params(0, 0.0);
    for &i in &order[..k] {
        let Ok(program) = parse_program(&dataset[i].program_text) else {
            continue;
        };
        let mut options = candidates(&program);
        options.shuffle(&mut rng);
        for p in options {
            let text = p.to_string();
            let Ok(reparsed) = parse_program(&text) else {
                continue;
            };
            let rt = Runtime::new(&dataset[i].scenes, &modules, &params);
            if execute_argmax(&reparsed, rt, &InferenceOptions::default()).is_ok() {
                out[i].program_text = text;
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{gen_dataset, GenConfig};

    #[test]
    fn zero_fraction_is_identity() {
        let data = gen_dataset(&GenConfig::default().with_total(10)).unwrap();
        assert_eq!(disrupt_programs(&data, 0.0, 1), data);
    }

    #[test]
    fn full_fraction_changes_every_program() {
        let data = gen_dataset(&GenConfig::default().with_total(10)).unwrap();
        let d = disrupt_programs(&data, 1.0, 1);
        for (a, b) in data.iter().zip(&d) {
            assert_ne!(a.program_text, b.program_text);
            assert_eq!(a.label, b.label);
            parse_program(&b.program_text).unwrap();
        }
    }

    #[test]
    fn fraction_selects_floor_count() {
        let data = gen_dataset(&GenConfig::default().with_total(10)).unwrap();
        let d = disrupt_programs(&data, 0.25, 4);
        let changed = data
            .iter()
            .zip(&d)
            .filter(|(a, b)| a.program_text != b.program_text)
            .count();
        assert_eq!(changed, 2);
        assert_eq!(d, disrupt_programs(&data, 0.25, 4));
    }
}
