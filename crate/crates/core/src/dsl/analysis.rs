//! Static analyses over validated programs.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::{ModuleKind, Program};

/// Number of statements that call a visual model (LOC and VQA).
pub fn count_visual_steps(program: &Program) -> usize {
    program.statements.iter().filter(|s| s.module.is_visual()).count()
}

/// For each statement, the indices of the statements it transitively reads
/// (not including itself). Predefined images are not statements and never
/// appear.
pub fn latent_ancestors(program: &Program) -> Vec<BTreeSet<usize>> {
    let mut anc: Vec<BTreeSet<usize>> = Vec::with_capacity(program.statements.len());
    for s in &program.statements {
        let mut set = BTreeSet::new();
        for v in s.inputs() {
            if let Some(j) = program.index_of(v) {
                set.insert(j);
                set.extend(anc[j].iter().copied());
            }
        }
        anc.push(set);
    }
    anc
}

/// A latent variable that reaches one statement along two or more operand
/// paths, together with the operands it feeds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedLatent {
    pub latent: String,
    pub dependents: BTreeSet<String>,
}

/// Latents whose influence reaches a single statement through more than one
/// operand. The per-operand factorization treats operands as independent, so
/// it is exact exactly when this list is empty.
///
/// Operands are the variable arguments of ordinary statements and the
/// placeholder occurrences (with repetition) of EVAL expressions. For each
/// pair of operands the common ancestors-or-self are collected and only the
/// ones closest to the operands are reported: if `IMAGE0=CROP(..., box=BOX0)`
/// feeds two answers, IMAGE0 is reported and BOX0 is not.
pub fn detect_shared_latents(program: &Program) -> Vec<SharedLatent> {
    let anc = latent_ancestors(program);
    let closure = |i: usize| -> BTreeSet<usize> {
        let mut c = anc[i].clone();
        c.insert(i);
        c
    };
    let mut found: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();

    for s in &program.statements {
        if s.module == ModuleKind::Result {
            continue;
        }
        let operands: Vec<usize> = match &s.expr {
            Some(e) => e
                .var_occurrences()
                .into_iter()
                .filter_map(|v| program.index_of(v))
                .collect(),
            None => s
                .args
                .iter()
                .filter_map(|(_, a)| a.as_var())
                .filter_map(|v| program.index_of(v))
                .collect(),
        };
        for a in 0..operands.len() {
            for b in a + 1..operands.len() {
                let (oa, ob) = (operands[a], operands[b]);
                let common: BTreeSet<usize> = closure(oa).intersection(&closure(ob)).copied().collect();
                for &x in &common {
                    let closest = !common.iter().any(|&y| y != x && anc[y].contains(&x));
                    if closest {
                        let deps = found.entry(x).or_default();
                        deps.insert(program.statements[oa].target.clone());
                        deps.insert(program.statements[ob].target.clone());
                    }
                }
            }
        }
    }

    found
        .into_iter()
        .map(|(i, dependents)| SharedLatent {
            latent: program.statements[i].target.clone(),
            dependents,
        })
        .collect()
}
