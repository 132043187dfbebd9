//! Set-relation graphs: the DDG quotiented by a grouping of cells into
//! vertices (semantic units or data modules), with fish-eye expansion of
//! single modules and Graphviz/JSON export.
//!
//! Every SRG edge keeps one witnessing DDG edge (the row-major smallest).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;

use serde::Serialize;
use serde_json::json;

use crate::classes::SemanticClass;
use crate::ddg::Ddg;
use crate::error::Error;
use crate::grid::CellAddr;
use crate::modules::{module_id, parse_module_id, DataModule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Unit,
    Module,
    Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SrgMode {
    Units,
    Modules,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Vertex {
    pub id: String,
    pub kind: VertexKind,
    pub cells: Vec<CellAddr>,
    /// Result cell of a module vertex, or of the module an expanded cell heads.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<CellAddr>,
    /// Owning class of a unit vertex.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub singleton: bool,
    /// A cell removed from the result list during curation.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub excluded: bool,
}

impl Vertex {
    fn cell(addr: CellAddr) -> Self {
        Vertex {
            id: addr.to_string(),
            kind: VertexKind::Cell,
            cells: vec![addr],
            result: None,
            class: None,
            singleton: false,
            excluded: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SrgEdge {
    pub from: String,
    pub to: String,
    pub witness: (CellAddr, CellAddr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Expansion {
    vertex: Vertex,
    position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Srg {
    mode: SrgMode,
    vertices: Vec<Vertex>,
    edges: Vec<SrgEdge>,
    expanded: Vec<Expansion>,
}

impl Srg {
    fn build(mode: SrgMode, vertices: Vec<Vertex>, ddg: &Ddg) -> Self {
        let edges = quotient_edges(&vertices, ddg);
        Srg {
            mode,
            vertices,
            edges,
            expanded: Vec::new(),
        }
    }

    pub fn mode(&self) -> SrgMode {
        self.mode
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[SrgEdge] {
        &self.edges
    }

    pub fn vertex(&self, id: &str) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.id == id)
    }

    /// Vertices with an edge into `id`, in vertex order.
    pub fn predecessors(&self, id: &str) -> Vec<&Vertex> {
        let from: BTreeSet<&str> = self
            .edges
            .iter()
            .filter(|e| e.to == id)
            .map(|e| e.from.as_str())
            .collect();
        self.vertices.iter().filter(|v| from.contains(v.id.as_str())).collect()
    }

    /// Ids of modules currently shown as cells.
    pub fn expanded_modules(&self) -> Vec<&str> {
        self.expanded.iter().map(|e| e.vertex.id.as_str()).collect()
    }

    fn index(&self) -> HashMap<&str, usize> {
        self.vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.as_str(), i))
            .collect()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let index = self.index();
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for e in &self.edges {
            adj[index[e.from.as_str()]].push(index[e.to.as_str()]);
        }
        adj
    }

    pub fn is_acyclic(&self) -> bool {
        let adj = self.adjacency();
        let mut indegree = vec![0usize; adj.len()];
        for targets in &adj {
            for t in targets {
                indegree[*t] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..adj.len()).filter(|i| indegree[*i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = ready.pop() {
            seen += 1;
            for &t in &adj[i] {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    ready.push(t);
                }
            }
        }
        seen == adj.len()
    }

    /// Strongly connected component id per vertex (Tarjan).
    fn components(&self) -> Vec<usize> {
        struct State<'a> {
            adj: &'a [Vec<usize>],
            index: Vec<Option<usize>>,
            low: Vec<usize>,
            on_stack: Vec<bool>,
            stack: Vec<usize>,
            comp: Vec<usize>,
            next: usize,
            comps: usize,
        }
        fn visit(s: &mut State<'_>, v: usize) {
            s.index[v] = Some(s.next);
            s.low[v] = s.next;
            s.next += 1;
            s.stack.push(v);
            s.on_stack[v] = true;
            for &w in &s.adj[v] {
                match s.index[w] {
                    None => {
                        visit(s, w);
                        s.low[v] = s.low[v].min(s.low[w]);
                    }
                    Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                    _ => {}
                }
            }
            if Some(s.low[v]) == s.index[v] {
                loop {
                    let w = s.stack.pop().expect("component root is on the stack");
                    s.on_stack[w] = false;
                    s.comp[w] = s.comps;
                    if w == v {
                        break;
                    }
                }
                s.comps += 1;
            }
        }
        let adj = self.adjacency();
        let n = adj.len();
        let mut s = State {
            adj: &adj,
            index: vec![None; n],
            low: vec![0; n],
            on_stack: vec![false; n],
            stack: Vec::new(),
            comp: vec![0; n],
            next: 0,
            comps: 0,
        };
        for v in 0..n {
            if s.index[v].is_none() {
                visit(&mut s, v);
            }
        }
        s.comp
    }

    /// Number of DDG edges that connect two different vertices.
    pub fn covered_ddg_edges(&self, ddg: &Ddg) -> usize {
        let owner = owners(&self.vertices);
        ddg.edges()
            .filter(|(f, t)| match (owner.get(f), owner.get(t)) {
                (Some(a), Some(b)) => a != b,
                _ => false,
            })
            .count()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| json!({ "from": e.from, "to": e.to, "witness": [e.witness.0, e.witness.1] }))
            .collect();
        json!({
            "mode": self.mode,
            "expanded": self.expanded_modules(),
            "vertices": self.vertices,
            "edges": edges,
        })
    }
}

fn owners(vertices: &[Vertex]) -> HashMap<CellAddr, usize> {
    vertices
        .iter()
        .enumerate()
        .flat_map(|(i, v)| v.cells.iter().map(move |c| (*c, i)))
        .collect()
}

/// One edge per ordered vertex pair joined by at least one DDG edge.
fn quotient_edges(vertices: &[Vertex], ddg: &Ddg) -> Vec<SrgEdge> {
    let owner = owners(vertices);
    let mut edges: BTreeMap<(usize, usize), (CellAddr, CellAddr)> = BTreeMap::new();
    for (f, t) in ddg.edges() {
        if let (Some(&a), Some(&b)) = (owner.get(&f), owner.get(&t)) {
            if a != b {
                edges.entry((a, b)).or_insert((f, t));
            }
        }
    }
    edges
        .into_iter()
        .map(|((a, b), witness)| SrgEdge {
            from: vertices[a].id.clone(),
            to: vertices[b].id.clone(),
            witness,
        })
        .collect()
}

/// SRG over semantic units. With `include_cells`, cells outside every unit
/// that read or are read by a unit cell appear as cell vertices after the
/// unit vertices. Edges inside one unit are not emitted.
pub fn srg_of_units(classes: &[SemanticClass], ddg: &Ddg, include_cells: bool) -> Result<Srg, Error> {
    let mut vertices = Vec::new();
    let mut in_unit = BTreeSet::new();
    for class in classes {
        for unit in &class.units {
            for c in &unit.cells {
                if !ddg.is_formula(*c) {
                    return Err(Error::SheetMismatch(format!(
                        "unit {} holds {c}, which is not a formula in this graph",
                        unit.id
                    )));
                }
                in_unit.insert(*c);
            }
            vertices.push(Vertex {
                id: unit.id.clone(),
                kind: VertexKind::Unit,
                cells: unit.cells.clone(),
                result: None,
                class: Some(class.id.clone()),
                singleton: class.singleton,
                excluded: false,
            });
        }
    }
    if include_cells {
        let mut extra = BTreeSet::new();
        for (f, t) in ddg.edges() {
            match (in_unit.contains(&f), in_unit.contains(&t)) {
                (false, true) => extra.insert(f),
                (true, false) => extra.insert(t),
                _ => false,
            };
        }
        vertices.extend(extra.into_iter().map(Vertex::cell));
    }
    Ok(Srg::build(SrgMode::Units, vertices, ddg))
}

/// SRG over data modules: `M1 -> M2` when a cell of `M2` reads the result of `M1`.
pub fn srg_of_modules(modules: &[DataModule], ddg: &Ddg) -> Result<Srg, Error> {
    srg_of_modules_with(modules, ddg, &[])
}

/// As [`srg_of_modules`], adding each curated-away cell as a flagged cell vertex.
pub fn srg_of_modules_with(modules: &[DataModule], ddg: &Ddg, excluded: &[CellAddr]) -> Result<Srg, Error> {
    let mut vertices = Vec::with_capacity(modules.len() + excluded.len());
    for m in modules {
        if let Some(c) = m.members.iter().find(|c| !ddg.contains(**c)) {
            return Err(Error::SheetMismatch(format!(
                "module {} holds {c}, which is not in this graph",
                m.id
            )));
        }
        vertices.push(Vertex {
            id: m.id.clone(),
            kind: VertexKind::Module,
            cells: m.members.clone(),
            result: Some(m.result),
            class: None,
            singleton: false,
            excluded: false,
        });
    }
    let mut excluded = excluded.to_vec();
    excluded.sort();
    for c in excluded {
        if !ddg.contains(c) {
            return Err(Error::SheetMismatch(format!("excluded cell {c} is not in this graph")));
        }
        vertices.push(Vertex {
            excluded: true,
            ..Vertex::cell(c)
        });
    }
    Ok(Srg::build(SrgMode::Modules, vertices, ddg))
}

/// Replaces module `focus` by its member cells and their DDG edges. Edges
/// into the module re-attach to the member cells actually read; edges out of
/// it leave from the result cell.
pub fn fisheye_expand(srg: &Srg, focus: &str, ddg: &Ddg) -> Result<Srg, Error> {
    let id = resolve_focus(srg, focus)?;
    let position = srg.vertices.iter().position(|v| v.id == id).expect("resolved");
    let vertex = srg.vertices[position].clone();
    if vertex.kind != VertexKind::Module {
        return Err(Error::NotAModuleVertex(vertex.id));
    }
    let cells = vertex.cells.iter().map(|c| Vertex {
        result: (Some(*c) == vertex.result).then_some(*c),
        ..Vertex::cell(*c)
    });
    let mut vertices = srg.vertices[..position].to_vec();
    vertices.extend(cells);
    vertices.extend_from_slice(&srg.vertices[position + 1..]);
    let mut out = Srg::build(srg.mode, vertices, ddg);
    out.expanded = srg.expanded.clone();
    out.expanded.push(Expansion { vertex, position });
    Ok(out)
}

/// Folds an expanded module back into one vertex.
pub fn fisheye_collapse(srg: &Srg, focus: &str, ddg: &Ddg) -> Result<Srg, Error> {
    let id = parse_module_id(focus)
        .map(module_id)
        .ok_or_else(|| Error::UnknownModule(focus.to_string()))?;
    let k = srg
        .expanded
        .iter()
        .position(|e| e.vertex.id == id)
        .ok_or(Error::NotExpanded(id))?;
    let Expansion { vertex, position } = srg.expanded[k].clone();
    let members: BTreeSet<CellAddr> = vertex.cells.iter().copied().collect();
    let mut vertices: Vec<Vertex> = srg
        .vertices
        .iter()
        .filter(|v| !(v.kind == VertexKind::Cell && !v.excluded && members.contains(&v.cells[0])))
        .cloned()
        .collect();
    vertices.insert(position.min(vertices.len()), vertex);
    let mut out = Srg::build(srg.mode, vertices, ddg);
    out.expanded = srg.expanded.clone();
    out.expanded.remove(k);
    Ok(out)
}

fn resolve_focus(srg: &Srg, focus: &str) -> Result<String, Error> {
    if let Some(v) = srg.vertex(focus) {
        return Ok(v.id.clone());
    }
    parse_module_id(focus)
        .map(module_id)
        .filter(|id| srg.vertex(id).is_some())
        .ok_or_else(|| Error::UnknownModule(focus.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DotStyle {
    Plain,
    /// Colors sinks, singleton classes, curated-away cells and cycle edges.
    Audit,
}

/// Compact rendering of a cell set: `A1:B2` for a full rectangle, otherwise
/// comma-separated horizontal runs.
pub fn cell_ranges(cells: &[CellAddr]) -> String {
    let mut sorted = cells.to_vec();
    sorted.sort();
    sorted.dedup();
    let (Some(first), Some(last)) = (sorted.first(), sorted.last()) else {
        return String::new();
    };
    let (top, bottom) = (first.row, last.row);
    let left = sorted.iter().map(|c| c.col).min().unwrap();
    let right = sorted.iter().map(|c| c.col).max().unwrap();
    let area = (bottom - top + 1) as usize * (right - left + 1) as usize;
    if sorted.len() == 1 {
        return first.to_string();
    }
    if area == sorted.len() {
        return format!("{}:{}", CellAddr::new(top, left), CellAddr::new(bottom, right));
    }
    let mut runs = Vec::new();
    let mut start = sorted[0];
    let mut prev = sorted[0];
    for c in sorted
        .iter()
        .skip(1)
        .chain(std::iter::once(&CellAddr { row: 0, col: 0 }))
    {
        if c.row == prev.row && c.col == prev.col + 1 {
            prev = *c;
            continue;
        }
        runs.push(if start == prev {
            start.to_string()
        } else {
            format!("{start}:{prev}")
        });
        start = *c;
        prev = *c;
    }
    runs.join(",")
}

pub fn to_dot(srg: &Srg, style: DotStyle) -> String {
    if srg.vertices.is_empty() {
        return "digraph srg {}\n".to_string();
    }
    let adj = srg.adjacency();
    let comps = srg.components();
    let mut comp_size: HashMap<usize, usize> = HashMap::new();
    for c in &comps {
        *comp_size.entry(*c).or_default() += 1;
    }
    let index = srg.index();

    let mut out = String::from("digraph srg {\n");
    for (i, v) in srg.vertices.iter().enumerate() {
        let label = if v.kind == VertexKind::Cell {
            v.id.clone()
        } else {
            format!("{}\\n{}", v.id, cell_ranges(&v.cells))
        };
        let mut attrs = vec![format!("label=\"{label}\"")];
        if v.kind == VertexKind::Cell {
            attrs.push("shape=box".into());
        }
        if style == DotStyle::Audit {
            if v.excluded {
                attrs.push("style=dashed".into());
                attrs.push("color=gray".into());
            } else if adj[i].is_empty() {
                attrs.push("color=red".into());
            }
            if v.singleton {
                attrs.push("style=filled".into());
                attrs.push("fillcolor=orange".into());
            }
        }
        writeln!(out, "  \"{}\" [{}];", v.id, attrs.join(", ")).unwrap();
    }
    for e in &srg.edges {
        let (a, b) = (index[e.from.as_str()], index[e.to.as_str()]);
        let on_cycle = comps[a] == comps[b] && comp_size[&comps[a]] > 1;
        if style == DotStyle::Audit && on_cycle {
            writeln!(out, "  \"{}\" -> \"{}\" [color=blue, penwidth=2];", e.from, e.to).unwrap();
        } else {
            writeln!(out, "  \"{}\" -> \"{}\";", e.from, e.to).unwrap();
        }
    }
    out.push_str("}\n");
    out
}
