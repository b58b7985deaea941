//! Compilation of programs into heterogeneous directed graphs of input,
//! latent and parameter nodes.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use serde::Serialize;

use crate::dsl::{Arg, ModuleKind, Program};
use crate::value::ImageName;

pub const THETA_LOC: &str = "theta_loc";
pub const THETA_VQA: &str = "theta_vqa";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Input,
    Latent,
    Parameter,
}

impl NodeKind {
    fn class(self) -> &'static str {
        match self {
            NodeKind::Input => "input",
            NodeKind::Latent => "latent",
            NodeKind::Parameter => "parameter",
        }
    }

    fn fill(self) -> &'static str {
        match self {
            NodeKind::Input => "lightblue",
            NodeKind::Latent => "palegreen",
            NodeKind::Parameter => "lightcoral",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Producer {
    pub module: ModuleKind,
    pub statement: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GraphNode {
    pub id: usize,
    /// Variable name, quoted literal text, or parameter family.
    pub name: String,
    pub kind: NodeKind,
    pub producer: Option<Producer>,
    /// Produced by a module that does not change probabilities (CROP, RESULT).
    /// Such nodes are hidden in the condensed rendering.
    pub deterministic: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProbGraph {
    pub nodes: Vec<GraphNode>,
    /// `(parent, child)` pairs, sorted.
    pub edges: Vec<(usize, usize)>,
    pub result_node: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("cycle detected among nodes {0:?}")]
    CycleDetected(Vec<usize>),
}

/// Builds the graph: one input node per predefined image and per distinct
/// object/question literal, one latent node per statement (including RESULT),
/// one parameter node per module family used.
///
/// Node ids: inputs in first-use order, then parameters (LOC before VQA),
/// then latents in statement order.
pub fn build_graph(program: &Program) -> ProbGraph {
    let mut inputs: Vec<String> = Vec::new();
    let mut input_id: BTreeMap<String, usize> = BTreeMap::new();
    let mut note_input = |key: String| {
        if !input_id.contains_key(&key) {
            input_id.insert(key.clone(), inputs.len());
            inputs.push(key);
        }
    };
    for s in &program.statements {
        for (k, a) in &s.args {
            match a {
                Arg::Var(v) if ImageName::from_name(v).is_some() => note_input(v.clone()),
                Arg::Literal(text) if k == "object" || k == "question" => note_input(crate::dsl::quote_literal(text)),
                _ => {}
            }
        }
    }
    let uses = |m: ModuleKind| program.statements.iter().any(|s| s.module == m);
    let mut params = Vec::new();
    if uses(ModuleKind::Loc) {
        params.push(THETA_LOC);
    }
    if uses(ModuleKind::Vqa) {
        params.push(THETA_VQA);
    }

    let mut nodes = Vec::new();
    for name in &inputs {
        nodes.push(GraphNode {
            id: nodes.len(),
            name: name.clone(),
            kind: NodeKind::Input,
            producer: None,
            deterministic: false,
        });
    }
    let mut param_id = BTreeMap::new();
    for p in &params {
        param_id.insert(*p, nodes.len());
        nodes.push(GraphNode {
            id: nodes.len(),
            name: p.to_string(),
            kind: NodeKind::Parameter,
            producer: None,
            deterministic: false,
        });
    }
    let first_latent = nodes.len();
    let mut var_id: BTreeMap<&str, usize> = BTreeMap::new();
    let mut edges = BTreeSet::new();
    for (i, s) in program.statements.iter().enumerate() {
        let id = first_latent + i;
        nodes.push(GraphNode {
            id,
            name: s.target.clone(),
            kind: NodeKind::Latent,
            producer: Some(Producer {
                module: s.module,
                statement: i,
            }),
            deterministic: s.module.is_crop() || s.module == ModuleKind::Result,
        });
        for (k, a) in &s.args {
            let parent = match a {
                Arg::Var(v) => var_id.get(v.as_str()).copied().or_else(|| input_id.get(v).copied()),
                Arg::Literal(text) if k == "object" || k == "question" => {
                    input_id.get(&crate::dsl::quote_literal(text)).copied()
                }
                Arg::Literal(_) => None,
            };
            if let Some(p) = parent {
                edges.insert((p, id));
            }
        }
        if let Some(e) = &s.expr {
            for v in e.vars() {
                edges.insert((var_id[v], id));
            }
        }
        match s.module {
            ModuleKind::Loc => {
                edges.insert((param_id[THETA_LOC], id));
            }
            ModuleKind::Vqa => {
                edges.insert((param_id[THETA_VQA], id));
            }
            _ => {}
        }
        var_id.insert(&s.target, id);
    }
    ProbGraph {
        result_node: nodes.len() - 1,
        nodes,
        edges: edges.into_iter().collect(),
    }
}

impl ProbGraph {
    pub fn parents(&self, id: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.1 == id).map(|e| e.0).collect()
    }

    pub fn children(&self, id: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.0 == id).map(|e| e.1).collect()
    }

    pub fn node(&self, name: &str) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// The same nodes with every edge reversed.
    pub fn reversed(&self) -> ProbGraph {
        let mut edges: Vec<_> = self.edges.iter().map(|&(a, b)| (b, a)).collect();
        edges.sort();
        ProbGraph {
            nodes: self.nodes.clone(),
            edges,
            result_node: self.result_node,
        }
    }

    /// Parents before children. Among ready nodes, statement-less nodes come
    /// first by id, then latents by statement index.
    pub fn topological_order(&self) -> Result<Vec<usize>, GraphError> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            indeg[b] += 1;
            out[a].push(b);
        }
        let key = |id: usize| {
            let stmt = self.nodes[id].producer.as_ref().map_or(-1, |p| p.statement as i64);
            Reverse((stmt, id))
        };
        let mut ready: BinaryHeap<_> = (0..n).filter(|&i| indeg[i] == 0).map(key).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse((_, id))) = ready.pop() {
            order.push(id);
            for &c in &out[id] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(key(c));
                }
            }
        }
        if order.len() < n {
            let stuck = (0..n).filter(|&i| indeg[i] > 0).collect();
            return Err(GraphError::CycleDetected(stuck));
        }
        Ok(order)
    }

    /// Removes deterministic nodes, connecting each one's parents to its
    /// children.
    pub fn contract_deterministic(&self) -> (Vec<&GraphNode>, Vec<(usize, usize)>) {
        let hidden: BTreeSet<usize> = self.nodes.iter().filter(|n| n.deterministic).map(|n| n.id).collect();
        // Visible ancestors reached through hidden nodes only.
        fn visible_parents(g: &ProbGraph, hidden: &BTreeSet<usize>, id: usize, out: &mut BTreeSet<usize>) {
            for p in g.parents(id) {
                if hidden.contains(&p) {
                    visible_parents(g, hidden, p, out);
                } else {
                    out.insert(p);
                }
            }
        }
        let mut edges = BTreeSet::new();
        for n in &self.nodes {
            if hidden.contains(&n.id) {
                continue;
            }
            let mut ps = BTreeSet::new();
            visible_parents(self, &hidden, n.id, &mut ps);
            for p in ps {
                edges.insert((p, n.id));
            }
        }
        let nodes = self.nodes.iter().filter(|n| !hidden.contains(&n.id)).collect();
        (nodes, edges.into_iter().collect())
    }

    /// Graphviz text. Node kinds map to fill colors (inputs blue, latents
    /// green, parameters red) and to a `class` attribute.
    pub fn to_dot(&self, hide_deterministic: bool) -> String {
        let (nodes, edges): (Vec<&GraphNode>, Vec<(usize, usize)>) = if hide_deterministic {
            self.contract_deterministic()
        } else {
            (self.nodes.iter().collect(), self.edges.clone())
        };
        let mut s = String::from("digraph program {\n  rankdir=LR;\n  node [style=filled];\n");
        for n in nodes {
            let shape = if n.kind == NodeKind::Parameter {
                "diamond"
            } else if n.deterministic {
                "box"
            } else {
                "ellipse"
            };
            let _ = writeln!(
                s,
                "  n{} [label=\"{}\", class=\"{}\", fillcolor=\"{}\", shape={}];",
                n.id,
                escape(&n.name),
                n.kind.class(),
                n.kind.fill(),
                shape
            );
        }
        for (a, b) in edges {
            let _ = writeln!(s, "  n{a} -> n{b};");
        }
        s.push_str("}\n");
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("graph serializes")
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
