//! Cell-level data-dependency graph.
//!
//! Nodes are all formula cells plus every cell some formula references
//! (including referenced empty cells). An edge `a -> b` means the formula in
//! `b` reads `a`. Unreferenced non-formula cells are not nodes.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::fmt::Write;

use serde::Serialize;
use serde_json::json;

use crate::formula::references;
use crate::grid::CellAddr;
use crate::parsed::ParsedSheet;

/// A reference that could not be resolved; the edge is dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RefDiagnostic {
    pub cell: CellAddr,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Ddg {
    nodes: Vec<CellAddr>,
    index: HashMap<CellAddr, usize>,
    formula: Vec<bool>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    edge_count: usize,
    diagnostics: Vec<RefDiagnostic>,
    digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Acyclicity {
    Acyclic { order: Vec<CellAddr> },
    Cyclic { cycle: Vec<CellAddr> },
}

pub fn build_ddg(sheet: &ParsedSheet) -> Ddg {
    let mut edges: BTreeSet<(CellAddr, CellAddr)> = BTreeSet::new();
    let mut node_set: BTreeSet<CellAddr> = BTreeSet::new();
    let mut diagnostics = Vec::new();
    for (cell, ast) in sheet.formulas() {
        node_set.insert(cell);
        for item in references(ast) {
            match item.expand(cell) {
                Ok(targets) => {
                    for t in targets {
                        node_set.insert(t);
                        edges.insert((t, cell));
                    }
                }
                Err(e) => diagnostics.push(RefDiagnostic {
                    cell,
                    message: e.to_string(),
                }),
            }
        }
    }
    let nodes: Vec<CellAddr> = node_set.into_iter().collect();
    let index: HashMap<CellAddr, usize> = nodes.iter().enumerate().map(|(i, a)| (*a, i)).collect();
    let formula = nodes.iter().map(|a| sheet.formula(*a).is_some()).collect();
    let mut succ = vec![Vec::new(); nodes.len()];
    let mut pred = vec![Vec::new(); nodes.len()];
    for (from, to) in &edges {
        let (f, t) = (index[from], index[to]);
        succ[f].push(t);
        pred[t].push(f);
    }
    for list in succ.iter_mut().chain(pred.iter_mut()) {
        list.sort_unstable();
    }
    Ddg {
        nodes,
        index,
        formula,
        succ,
        pred,
        edge_count: edges.len(),
        diagnostics,
        digest: sheet.digest().to_string(),
    }
}

impl Ddg {
    /// Row-major.
    pub fn nodes(&self) -> &[CellAddr] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn contains(&self, a: CellAddr) -> bool {
        self.index.contains_key(&a)
    }

    pub fn is_formula(&self, a: CellAddr) -> bool {
        self.index.get(&a).is_some_and(|i| self.formula[*i])
    }

    /// Edges sorted by source, then target (row-major).
    pub fn edges(&self) -> impl Iterator<Item = (CellAddr, CellAddr)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(move |(f, ts)| ts.iter().map(move |t| (self.nodes[f], self.nodes[*t])))
    }

    pub fn has_edge(&self, from: CellAddr, to: CellAddr) -> bool {
        match (self.index.get(&from), self.index.get(&to)) {
            (Some(f), Some(t)) => self.succ[*f].binary_search(t).is_ok(),
            _ => false,
        }
    }

    /// Cells reading `a`, row-major.
    pub fn successors(&self, a: CellAddr) -> Vec<CellAddr> {
        self.index
            .get(&a)
            .map(|i| self.succ[*i].iter().map(|j| self.nodes[*j]).collect())
            .unwrap_or_default()
    }

    /// Cells `a` reads, row-major.
    pub fn predecessors(&self, a: CellAddr) -> Vec<CellAddr> {
        self.index
            .get(&a)
            .map(|i| self.pred[*i].iter().map(|j| self.nodes[*j]).collect())
            .unwrap_or_default()
    }

    pub fn diagnostics(&self) -> &[RefDiagnostic] {
        &self.diagnostics
    }

    /// Digest of the sheet the graph was built from.
    pub fn sheet_digest(&self) -> &str {
        &self.digest
    }

    pub(crate) fn idx(&self, a: CellAddr) -> Option<usize> {
        self.index.get(&a).copied()
    }

    pub(crate) fn node(&self, i: usize) -> CellAddr {
        self.nodes[i]
    }

    pub(crate) fn succ_idx(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    pub(crate) fn pred_idx(&self, i: usize) -> &[usize] {
        &self.pred[i]
    }

    /// Nodes that no formula reads, row-major.
    pub fn sinks(&self) -> Vec<CellAddr> {
        (0..self.nodes.len())
            .filter(|i| self.succ[*i].is_empty())
            .map(|i| self.nodes[i])
            .collect()
    }

    /// Topological order (row-major among ready nodes), or the shortest cycle found.
    pub fn check_acyclic(&self) -> Acyclicity {
        let n = self.nodes.len();
        let mut indegree: Vec<usize> = self.pred.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|i| indegree[*i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(i)) = ready.pop() {
            order.push(i);
            for &j in &self.succ[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(Reverse(j));
                }
            }
        }
        if order.len() == n {
            return Acyclicity::Acyclic {
                order: order.into_iter().map(|i| self.nodes[i]).collect(),
            };
        }
        let stuck: Vec<bool> = indegree.iter().map(|d| *d > 0).collect();
        let mut best: Option<Vec<usize>> = None;
        for start in (0..n).filter(|i| stuck[*i]) {
            if let Some(cycle) = self.shortest_cycle_through(start, &stuck) {
                if best.as_ref().is_none_or(|b| cycle.len() < b.len()) {
                    best = Some(cycle);
                }
                if best.as_ref().is_some_and(|b| b.len() == 2) {
                    break;
                }
            }
        }
        let cycle = best.expect("a node left with positive in-degree lies on or behind a cycle");
        Acyclicity::Cyclic {
            cycle: cycle.into_iter().map(|i| self.nodes[i]).collect(),
        }
    }

    /// BFS path `start -> ... -> start` within `allowed`, closed (first == last).
    fn shortest_cycle_through(&self, start: usize, allowed: &[bool]) -> Option<Vec<usize>> {
        let mut parent: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.succ[u] {
                if !allowed[v] {
                    continue;
                }
                if v == start {
                    let mut path = vec![start];
                    let mut cur = u;
                    while cur != start {
                        path.push(cur);
                        cur = parent[&cur];
                    }
                    path.push(start);
                    path.reverse();
                    return Some(path);
                }
                if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(v) {
                    e.insert(u);
                    queue.push_back(v);
                }
            }
        }
        None
    }

    pub fn to_json(&self) -> serde_json::Value {
        let inputs: Vec<CellAddr> = (0..self.nodes.len())
            .filter(|i| !self.formula[*i])
            .map(|i| self.nodes[i])
            .collect();
        let edges: Vec<[CellAddr; 2]> = self.edges().map(|(f, t)| [f, t]).collect();
        json!({ "nodes": self.nodes, "inputs": inputs, "edges": edges })
    }

    /// Graphviz text; input (non-formula) nodes are dashed boxes, sinks are red.
    pub fn to_dot(&self) -> String {
        if self.nodes.is_empty() {
            return "digraph ddg {}\n".to_string();
        }
        let mut out = String::from("digraph ddg {\n");
        for (i, a) in self.nodes.iter().enumerate() {
            let mut attrs = vec![format!("label=\"{a}\"")];
            if !self.formula[i] {
                attrs.push("shape=box".into());
                attrs.push("style=dashed".into());
            } else if self.succ[i].is_empty() {
                attrs.push("color=red".into());
            }
            writeln!(out, "  \"{a}\" [{}];", attrs.join(", ")).unwrap();
        }
        for (f, t) in self.edges() {
            writeln!(out, "  \"{f}\" -> \"{t}\";").unwrap();
        }
        out.push_str("}\n");
        out
    }
}
