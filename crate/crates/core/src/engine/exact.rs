//! Exact inference by variable elimination over sparse factors.

use std::collections::{BTreeSet, HashMap};

use super::{apply_deterministic, Calls, EngineError, InferenceOptions, Runtime};
use crate::diff::{Scalar, Tape};
use crate::dsl::{ModuleKind, Program};
use crate::value::{Categorical, Value};

/// A nonnegative table over the joint assignments of `scope`. Rows hold
/// indices into each variable's support; assignments without a row are
/// zero.
#[derive(Clone, Debug)]
pub struct Factor {
    pub scope: Vec<usize>,
    pub rows: Vec<(Vec<u32>, Scalar)>,
}

fn is_zero(x: Scalar) -> bool {
    x.is_constant() && x.value() == 0.0
}

impl Factor {
    fn multiply(&self, other: &Factor, tape: &mut Tape, cap: usize) -> Result<Factor, EngineError> {
        let shared: Vec<(usize, usize)> = other
            .scope
            .iter()
            .enumerate()
            .filter_map(|(j, v)| self.scope.iter().position(|u| u == v).map(|i| (i, j)))
            .collect();
        let extra: Vec<usize> = (0..other.scope.len())
            .filter(|j| !shared.iter().any(|&(_, k)| k == *j))
            .collect();
        let mut by_key: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
        for (r, (a, _)) in other.rows.iter().enumerate() {
            let key = shared.iter().map(|&(_, j)| a[j]).collect();
            by_key.entry(key).or_default().push(r);
        }
        let mut scope = self.scope.clone();
        scope.extend(extra.iter().map(|&j| other.scope[j]));
        let mut rows = Vec::new();
        for (a, pa) in &self.rows {
            let key: Vec<u32> = shared.iter().map(|&(i, _)| a[i]).collect();
            let Some(matches) = by_key.get(&key) else {
                continue;
            };
            for &r in matches {
                let (b, pb) = &other.rows[r];
                let p = tape.mul(*pa, *pb);
                if is_zero(p) {
                    continue;
                }
                let mut assign = a.clone();
                assign.extend(extra.iter().map(|&j| b[j]));
                rows.push((assign, p));
            }
            if rows.len() > cap {
                return Err(EngineError::SupportExplosion { size: rows.len(), cap });
            }
        }
        Ok(Factor { scope, rows })
    }

    fn sum_out(&self, var: usize, tape: &mut Tape) -> Factor {
        let pos = self.scope.iter().position(|&v| v == var).expect("var in scope");
        let mut scope = self.scope.clone();
        scope.remove(pos);
        let mut groups: Vec<(Vec<u32>, Vec<Scalar>)> = Vec::new();
        let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
        for (a, p) in &self.rows {
            let mut key = a.clone();
            key.remove(pos);
            let g = *index.entry(key.clone()).or_insert_with(|| {
                groups.push((key, Vec::new()));
                groups.len() - 1
            });
            groups[g].1.push(*p);
        }
        let rows = groups.into_iter().map(|(k, ps)| (k, tape.sum(&ps))).collect();
        Factor { scope, rows }
    }
}

/// The factorized joint of a program's variables, restricted to the
/// ancestors of the result.
#[derive(Clone, Debug)]
pub struct Model {
    names: Vec<String>,
    supports: Vec<Vec<Value>>,
    factors: Vec<Factor>,
    query: usize,
    cap: usize,
}

struct VarBuilder {
    support: Vec<Value>,
    index: HashMap<Value, u32>,
}

impl VarBuilder {
    fn new() -> Self {
        VarBuilder {
            support: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn intern(&mut self, v: &Value) -> u32 {
        if let Some(&i) = self.index.get(v) {
            return i;
        }
        let i = self.support.len() as u32;
        self.support.push(v.clone());
        self.index.insert(v.clone(), i);
        i
    }
}

/// One factor per statement: the module's conditional table for LOC/VQA
/// (over the image variable when it is a crop), and a 0/1 indicator for
/// CROP, COUNT and EVAL. RESULT aliases its argument. Intervened variables
/// get a point-mass factor and lose their parents.
pub fn build_model(
    program: &Program,
    rt: Runtime<'_>,
    tape: &mut Tape,
    options: &InferenceOptions,
) -> Result<Model, EngineError> {
    options.check(program)?;
    let cap = options.support_cap;
    let mut calls = Calls::new(rt);
    let mut var_of: HashMap<&str, usize> = HashMap::new();
    let mut vars: Vec<VarBuilder> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut factors: Vec<(usize, Factor)> = Vec::new();
    for s in &program.statements {
        if s.module == ModuleKind::Result && !options.interventions.contains_key(&s.target) {
            let src = var_of[s.var_arg("var").expect("validated")];
            var_of.insert(&s.target, src);
            continue;
        }
        let x = vars.len();
        vars.push(VarBuilder::new());
        names.push(s.target.clone());
        var_of.insert(&s.target, x);
        if let Some(v) = options.interventions.get(&s.target) {
            let i = vars[x].intern(v);
            factors.push((
                x,
                Factor {
                    scope: vec![x],
                    rows: vec![(vec![i], Scalar::ONE)],
                },
            ));
            continue;
        }
        // Parents that are program variables, and constant input images.
        let mut parents: Vec<usize> = Vec::new();
        let mut constants: HashMap<String, Value> = HashMap::new();
        for v in s.inputs() {
            match rt.input(v) {
                Some(r) => {
                    constants.insert(v.to_string(), r?);
                }
                None => parents.push(var_of[v]),
            }
        }
        let size: usize = parents.iter().map(|&p| vars[p].support.len()).product();
        if size > cap {
            return Err(EngineError::SupportExplosion { size, cap });
        }
        let mut rows = Vec::new();
        let mut idx = vec![0u32; parents.len()];
        for _ in 0..size {
            let get = |name: &str| -> Option<Value> {
                constants.get(name).cloned().or_else(|| {
                    let p = var_of.get(name)?;
                    let k = parents.iter().position(|q| q == p)?;
                    Some(vars[*p].support[idx[k] as usize].clone())
                })
            };
            if s.module.is_visual() {
                let image = get(s.var_arg("image").expect("validated")).expect("bound");
                let d = calls.call(tape, s, &image)?;
                for (v, p) in d.iter() {
                    if is_zero(p) {
                        continue;
                    }
                    let mut assign = idx.clone();
                    assign.push(vars[x].intern(v));
                    rows.push((assign, p));
                }
            } else {
                let v = apply_deterministic(s, &get)?;
                let mut assign = idx.clone();
                assign.push(vars[x].intern(&v));
                rows.push((assign, Scalar::ONE));
            }
            for k in (0..parents.len()).rev() {
                idx[k] += 1;
                if (idx[k] as usize) < vars[parents[k]].support.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        let mut scope = parents;
        scope.push(x);
        factors.push((x, Factor { scope, rows }));
    }
    let query = var_of[program.result().target.as_str()];

    // Drop barren variables: anything that is not an ancestor of the query
    // sums out to one.
    let mut keep = BTreeSet::from([query]);
    for (owner, f) in factors.iter().rev() {
        if keep.contains(owner) {
            keep.extend(f.scope.iter().copied());
        }
    }
    Ok(Model {
        names,
        supports: vars.into_iter().map(|v| v.support).collect(),
        factors: factors
            .into_iter()
            .filter(|(owner, _)| keep.contains(owner))
            .map(|(_, f)| f)
            .collect(),
        query,
        cap,
    })
}

impl Model {
    /// Variables that appear in some kept factor, query included.
    pub fn variables(&self) -> Vec<&str> {
        let ids: BTreeSet<usize> = self.factors.iter().flat_map(|f| f.scope.iter().copied()).collect();
        ids.into_iter().map(|i| self.names[i].as_str()).collect()
    }

    pub fn query(&self) -> &str {
        &self.names[self.query]
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn support(&self, name: &str) -> Option<&[Value]> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&self.supports[i])
    }

    /// Greedy min-degree order over the interaction graph of the factor
    /// scopes, ties broken by variable name. The query is never eliminated.
    pub fn elimination_order(&self) -> Vec<String> {
        let scopes: Vec<Vec<&str>> = self
            .factors
            .iter()
            .map(|f| f.scope.iter().map(|&i| self.names[i].as_str()).collect())
            .collect();
        elimination_order(&scopes, self.query())
    }

    /// Eliminates every non-query variable in `order` and returns the
    /// query's distribution. Structurally impossible values are dropped.
    pub fn eliminate(&self, order: &[String], tape: &mut Tape) -> Result<Categorical, EngineError> {
        let mut pool: Vec<Factor> = self.factors.clone();
        for name in order {
            let Some(v) = self.names.iter().position(|n| n == name) else {
                continue;
            };
            assert_ne!(v, self.query, "the query cannot be eliminated");
            let (touching, rest): (Vec<Factor>, Vec<Factor>) = pool.into_iter().partition(|f| f.scope.contains(&v));
            pool = rest;
            let Some(first) = touching.first() else {
                continue;
            };
            let mut prod = first.clone();
            for f in &touching[1..] {
                prod = prod.multiply(f, tape, self.cap)?;
            }
            pool.push(prod.sum_out(v, tape));
        }
        let mut result = Factor {
            scope: Vec::new(),
            rows: vec![(Vec::new(), Scalar::ONE)],
        };
        for f in &pool {
            result = result.multiply(f, tape, self.cap)?;
        }
        assert_eq!(
            result.scope,
            vec![self.query],
            "order must eliminate every other variable"
        );
        result.rows.sort_by_key(|(a, _)| a[0]);
        let (support, probs) = result
            .rows
            .into_iter()
            .map(|(a, p)| (self.supports[self.query][a[0] as usize].clone(), p))
            .unzip();
        Ok(Categorical::new(support, probs).expect("one row per support value"))
    }
}

/// Min-degree greedy elimination order for factors with the given scopes.
/// Disconnected groups are handled independently since degrees only count
/// neighbors.
pub fn elimination_order(scopes: &[Vec<&str>], query: &str) -> Vec<String> {
    let mut adj: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for scope in scopes {
        for &a in scope {
            let e = adj.entry(a).or_default();
            e.extend(scope.iter().copied().filter(|&b| b != a));
        }
    }
    let mut remaining: BTreeSet<&str> = adj.keys().copied().filter(|&v| v != query).collect();
    let mut order = Vec::with_capacity(remaining.len());
    while let Some(&v) = remaining.iter().min_by_key(|&&v| (adj[v].len(), v)) {
        let nbrs: Vec<&str> = adj[v].iter().copied().collect();
        for &a in &nbrs {
            let e = adj.get_mut(a).expect("symmetric");
            e.remove(v);
            e.extend(nbrs.iter().copied().filter(|&b| b != a));
        }
        adj.remove(v);
        remaining.remove(v);
        order.push(v.to_string());
    }
    order
}

/// Exact answer distribution: builds the model and eliminates with the
/// min-degree order. Differentiable in the module parameters.
pub fn infer_exact(
    program: &Program,
    rt: Runtime<'_>,
    tape: &mut Tape,
    options: &InferenceOptions,
) -> Result<Categorical, EngineError> {
    let model = build_model(program, rt, tape, options)?;
    let order = model.elimination_order();
    model.eliminate(&order, tape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;

    fn run(src: &str, json: &str, opts: &InferenceOptions) -> Categorical {
        let p = program(src);
        let (s, m, params) = (empty_scenes(), table(json), no_params());
        let mut t = Tape::inference();
        infer_exact(&p, Runtime::new(&s, &m, &params), &mut t, opts).unwrap()
    }

    #[test]
    fn two_detection_mixture() {
        let d = run(MIXTURE_PROGRAM, MIXTURE_TABLE, &InferenceOptions::default());
        assert!((d.p(&Value::token("yes")) - 0.62).abs() < 1e-15);
        assert!((d.p(&Value::token("no")) - 0.38).abs() < 1e-15);
    }

    #[test]
    fn shared_latent_is_exact() {
        let d = run(SHARED_PROGRAM, SHARED_TABLE, &InferenceOptions::default());
        assert_eq!(d.p(&Value::boolean(true)), 0.5);
        assert_eq!(d.p(&Value::boolean(false)), 0.5);
    }

    #[test]
    fn chain_is_eliminated_root_first() {
        let p = program(MIXTURE_PROGRAM);
        let (s, m, params) = (empty_scenes(), table(MIXTURE_TABLE), no_params());
        let mut t = Tape::inference();
        let model = build_model(&p, Runtime::new(&s, &m, &params), &mut t, &InferenceOptions::default()).unwrap();
        assert_eq!(model.query(), "ANSWER0");
        assert_eq!(model.elimination_order(), vec!["BOX0", "IMAGE0"]);
    }

    #[test]
    fn every_order_gives_the_same_answer() {
        let p = program(SHARED_PROGRAM);
        let (s, m, params) = (empty_scenes(), table(SHARED_TABLE), no_params());
        let mut t = Tape::inference();
        let model = build_model(&p, Runtime::new(&s, &m, &params), &mut t, &InferenceOptions::default()).unwrap();
        let vars: Vec<String> = model
            .variables()
            .into_iter()
            .filter(|v| *v != model.query())
            .map(str::to_string)
            .collect();
        assert_eq!(vars.len(), 4);
        let reference = model.eliminate(&model.elimination_order(), &mut t).unwrap();
        let mut perm = vars.clone();
        permutations(&mut perm, 0, &mut |order| {
            let d = model.eliminate(order, &mut t).unwrap();
            assert!(d.max_abs_diff(&reference) < 1e-12, "{order:?}");
        });
    }

    fn permutations(xs: &mut Vec<String>, k: usize, f: &mut dyn FnMut(&[String])) {
        if k == xs.len() {
            f(xs);
            return;
        }
        for i in k..xs.len() {
            xs.swap(k, i);
            permutations(xs, k + 1, f);
            xs.swap(k, i);
        }
    }

    #[test]
    fn disconnected_groups() {
        let scopes = vec![vec!["A", "B"], vec!["C", "D"], vec!["B", "Q"], vec!["D", "Q"]];
        assert_eq!(elimination_order(&scopes, "Q"), vec!["A", "B", "C", "D"]);
        let isolated = vec![vec!["A"], vec!["B"], vec!["Q"]];
        assert_eq!(elimination_order(&isolated, "Q"), vec!["A", "B"]);
    }

    #[test]
    fn barren_statements_are_pruned() {
        let src = "BOX0=LOC(image=IMAGE,object='dog')
ANSWER0=VQA(image=IMAGE,question='Is the dog standing?')
R=RESULT(var=ANSWER0)";
        let json = r#"{"loc": [{"object": "dog", "outcomes": [{"cells": [], "p": 1.0}]}],
            "vqa": [{"question": "Is the dog standing?", "answers": [["yes", 0.3], ["no", 0.7]]}]}"#;
        let p = program(src);
        let (s, m, params) = (empty_scenes(), table(json), no_params());
        let mut t = Tape::inference();
        let model = build_model(&p, Runtime::new(&s, &m, &params), &mut t, &InferenceOptions::default()).unwrap();
        assert_eq!(model.variables(), vec!["ANSWER0"]);
    }

    #[test]
    fn support_cap_is_enforced() {
        let opts = InferenceOptions {
            support_cap: 1,
            ..Default::default()
        };
        let p = program(MIXTURE_PROGRAM);
        let (s, m, params) = (empty_scenes(), table(MIXTURE_TABLE), no_params());
        let mut t = Tape::inference();
        assert!(matches!(
            infer_exact(&p, Runtime::new(&s, &m, &params), &mut t, &opts),
            Err(EngineError::SupportExplosion { .. })
        ));
    }
}
