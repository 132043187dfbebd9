//! Result-cell curation and data-module recovery.
//!
//! A data module is a set of cells with one result cell that depends on all
//! of them; cells outside the module may only reference the result. Modules
//! are recovered from the result cells backwards: a cell joins the module of
//! the single result it feeds, and a cell feeding several modules becomes the
//! result of a new one. "Feeds" follows DDG paths up to the first result
//! cell on the path.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;

use serde::Serialize;

use crate::ddg::{Acyclicity, Ddg};
use crate::error::Error;
use crate::grid::{parse_a1, CellAddr};
use crate::srg::{Srg, VertexKind};

/// Module id for a result cell: `A3-module`.
pub fn module_id(result: CellAddr) -> String {
    format!("{result}-module")
}

/// Accepts `A3-module` or a bare `A3`.
pub fn parse_module_id(id: &str) -> Option<CellAddr> {
    parse_a1(id.strip_suffix("-module").unwrap_or(id)).ok()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CurationStep {
    pub excluded: CellAddr,
    /// Predecessors that became sinks because of this exclusion.
    pub promoted: Vec<CellAddr>,
}

/// The auditor's working list of result cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SinkCuration {
    active: BTreeSet<CellAddr>,
    excluded: BTreeSet<CellAddr>,
    history: Vec<CurationStep>,
}

impl SinkCuration {
    pub fn active(&self) -> &BTreeSet<CellAddr> {
        &self.active
    }

    pub fn excluded(&self) -> &BTreeSet<CellAddr> {
        &self.excluded
    }

    pub fn history(&self) -> &[CurationStep] {
        &self.history
    }

    /// Excluded cells in the order they were excluded.
    pub fn exclusions(&self) -> Vec<CellAddr> {
        self.history.iter().map(|s| s.excluded).collect()
    }
}

/// Starts curation with every DDG sink as a candidate result.
pub fn curate_init(ddg: &Ddg) -> Result<SinkCuration, Error> {
    if let Acyclicity::Cyclic { cycle } = ddg.check_acyclic() {
        return Err(Error::CyclicDdg(cycle));
    }
    Ok(SinkCuration {
        active: ddg.sinks().into_iter().collect(),
        excluded: BTreeSet::new(),
        history: Vec::new(),
    })
}

/// Removes `cell` from the candidate results; predecessors left without a
/// live successor take its place.
pub fn exclude_sink(cur: &SinkCuration, ddg: &Ddg, cell: CellAddr) -> Result<SinkCuration, Error> {
    if !cur.active.contains(&cell) {
        return Err(Error::NotASink(cell));
    }
    let mut next = cur.clone();
    next.active.remove(&cell);
    next.excluded.insert(cell);
    let mut promoted = Vec::new();
    for p in ddg.predecessors(cell) {
        if next.excluded.contains(&p) || next.active.contains(&p) {
            continue;
        }
        if ddg.successors(p).iter().all(|s| next.excluded.contains(s)) {
            next.active.insert(p);
            promoted.push(p);
        }
    }
    next.history.push(CurationStep {
        excluded: cell,
        promoted,
    });
    Ok(next)
}

/// Undoes the exclusion of `cell` by replaying every other exclusion from
/// the initial sink list.
pub fn restore_sink(cur: &SinkCuration, ddg: &Ddg, cell: CellAddr) -> Result<SinkCuration, Error> {
    if !cur.excluded.contains(&cell) {
        return Err(Error::NotExcluded(cell));
    }
    let mut state = curate_init(ddg)?;
    for step in cur.history.iter().filter(|s| s.excluded != cell) {
        state = exclude_sink(&state, ddg, step.excluded).map_err(|_| Error::RestoreBlocked {
            cell,
            dependent: step.excluded,
        })?;
    }
    Ok(state)
}

/// Applies exclusions in order starting from the DDG's sinks.
pub fn curate(ddg: &Ddg, exclusions: &[CellAddr]) -> Result<SinkCuration, Error> {
    exclusions
        .iter()
        .try_fold(curate_init(ddg)?, |cur, cell| exclude_sink(&cur, ddg, *cell))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DataModule {
    pub id: String,
    pub result: CellAddr,
    /// Row-major, including the result.
    pub members: Vec<CellAddr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModuleSet {
    pub modules: Vec<DataModule>,
    /// Nodes that reach none of the results.
    pub unassigned: Vec<CellAddr>,
}

/// Partitions the cells that reach `results` into data modules.
///
/// Walking the DDG in reverse topological order, each cell's contribution
/// set is the set of modules its successors belong to (a result successor
/// counts as its own module). A cell contributing to more than one module
/// becomes a result itself. Because every successor is settled first, the
/// outcome does not depend on which reverse topological order is used.
pub fn recover_modules(ddg: &Ddg, results: &BTreeSet<CellAddr>) -> Result<ModuleSet, Error> {
    let order = match ddg.check_acyclic() {
        Acyclicity::Acyclic { order } => order,
        Acyclicity::Cyclic { cycle } => return Err(Error::CyclicDdg(cycle)),
    };
    let n = ddg.node_count();
    let mut is_result = vec![false; n];
    for r in results {
        let i = ddg
            .idx(*r)
            .ok_or_else(|| Error::SheetMismatch(format!("result {r} is not in the graph")))?;
        is_result[i] = true;
    }

    let mut in_scope = is_result.clone();
    let mut stack: Vec<usize> = (0..n).filter(|i| is_result[*i]).collect();
    while let Some(i) = stack.pop() {
        for &p in ddg.pred_idx(i) {
            if !in_scope[p] {
                in_scope[p] = true;
                stack.push(p);
            }
        }
    }

    let mut owner: Vec<Option<usize>> = vec![None; n];
    for addr in order.iter().rev() {
        let i = ddg.idx(*addr).expect("order lists graph nodes");
        if !in_scope[i] {
            continue;
        }
        if is_result[i] {
            owner[i] = Some(i);
            continue;
        }
        let mut feeds = BTreeSet::new();
        for &s in ddg.succ_idx(i) {
            if let Some(o) = owner[s] {
                feeds.insert(o);
            }
        }
        if feeds.len() > 1 {
            is_result[i] = true;
            owner[i] = Some(i);
        } else {
            owner[i] = feeds.first().copied();
        }
    }

    let mut members: BTreeMap<usize, Vec<CellAddr>> = BTreeMap::new();
    let mut unassigned = Vec::new();
    for (i, o) in owner.iter().enumerate() {
        match o {
            Some(r) => members.entry(*r).or_default().push(ddg.node(i)),
            None => unassigned.push(ddg.node(i)),
        }
    }
    // node indices are row-major, so both maps come out ordered
    let modules = members
        .into_iter()
        .map(|(r, members)| {
            let result = ddg.node(r);
            DataModule {
                id: module_id(result),
                result,
                members,
            }
        })
        .collect();
    Ok(ModuleSet { modules, unassigned })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// A non-result cell is read from another module.
    CrossBoundary,
    /// A result cell is read inside its own module.
    ResultNotSink,
    /// A non-result member reaches nothing in its module.
    ExtraSink,
    /// A result that is neither a DDG sink nor shared by several modules.
    SingleConsumerResult,
    /// A cell listed in more than one module.
    Overlap,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge: Option<(CellAddr, CellAddr)>,
    pub cell: CellAddr,
    pub module: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other_module: Option<String>,
}

/// Checks the data-module conditions on a partition; empty when valid.
pub fn module_boundary_check(modules: &[DataModule], ddg: &Ddg) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut owner: HashMap<CellAddr, usize> = HashMap::new();
    for (m, module) in modules.iter().enumerate() {
        for c in &module.members {
            if let Some(prev) = owner.insert(*c, m) {
                violations.push(Violation {
                    kind: ViolationKind::Overlap,
                    edge: None,
                    cell: *c,
                    module: modules[prev].id.clone(),
                    other_module: Some(module.id.clone()),
                });
            }
        }
    }

    for (from, to) in ddg.edges() {
        let (Some(&mf), Some(&mt)) = (owner.get(&from), owner.get(&to)) else {
            continue;
        };
        let is_result = modules[mf].result == from;
        let kind = match (mf == mt, is_result) {
            (false, false) => ViolationKind::CrossBoundary,
            (true, true) => ViolationKind::ResultNotSink,
            _ => continue,
        };
        violations.push(Violation {
            kind,
            edge: Some((from, to)),
            cell: from,
            module: modules[mf].id.clone(),
            other_module: (mf != mt).then(|| modules[mt].id.clone()),
        });
    }

    for (m, module) in modules.iter().enumerate() {
        for c in &module.members {
            if *c == module.result {
                continue;
            }
            let succ = ddg.successors(*c);
            let leaves_module = succ.iter().any(|s| owner.get(s).is_some_and(|o| *o != m));
            if !leaves_module && !succ.iter().any(|s| owner.get(s) == Some(&m)) {
                violations.push(Violation {
                    kind: ViolationKind::ExtraSink,
                    edge: None,
                    cell: *c,
                    module: module.id.clone(),
                    other_module: None,
                });
            }
        }

        let consumers: Vec<(CellAddr, usize)> = ddg
            .successors(module.result)
            .into_iter()
            .filter_map(|s| owner.get(&s).map(|o| (s, *o)))
            .collect();
        let distinct: BTreeSet<usize> = consumers.iter().map(|(_, o)| *o).collect();
        if distinct.len() == 1 && !distinct.contains(&m) {
            let (to, other) = consumers[0];
            violations.push(Violation {
                kind: ViolationKind::SingleConsumerResult,
                edge: Some((module.result, to)),
                cell: module.result,
                module: module.id.clone(),
                other_module: Some(modules[other].id.clone()),
            });
        }
    }
    violations
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub module: String,
    pub result: CellAddr,
}

/// Direct predecessor modules of `suspect` in a module SRG, with the result
/// cells the auditor should check next. Empty means the fault lies inside
/// `suspect` itself.
pub fn fault_trace_step(srg: &Srg, suspect: &str) -> Result<Vec<TraceStep>, Error> {
    let id = parse_module_id(suspect)
        .map(module_id)
        .ok_or_else(|| Error::UnknownModule(suspect.to_string()))?;
    let vertex = srg
        .vertex(&id)
        .ok_or_else(|| Error::UnknownModule(suspect.to_string()))?;
    if vertex.kind != VertexKind::Module {
        return Err(Error::NotAModuleVertex(id));
    }
    Ok(srg
        .predecessors(&id)
        .into_iter()
        .filter(|v| v.kind == VertexKind::Module)
        .map(|v| TraceStep {
            module: v.id.clone(),
            result: v.result.expect("module vertices carry their result"),
        })
        .collect())
}

/// `cell,module_id` rows, row-major, with a header.
pub fn highlight_csv(modules: &[DataModule]) -> String {
    let mut rows: Vec<(CellAddr, &str)> = modules
        .iter()
        .flat_map(|m| m.members.iter().map(move |c| (*c, m.id.as_str())))
        .collect();
    rows.sort();
    let mut out = String::from("cell,module_id\n");
    for (cell, id) in rows {
        writeln!(out, "{cell},{id}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddg::build_ddg;
    use crate::grid::{load_workbook, WorkbookFormat};
    use crate::parsed::ParsedSheet;
    use crate::srg::srg_of_modules;

    const S1: &str = "1,2,=A1+B1\n3,4,=A2+B2\n,,=C1+C2";
    const S2: &str = "1,,\n2,,\n=A1+A2,=A3*2,=A3+1";

    fn ddg(csv: &str) -> Ddg {
        build_ddg(&ParsedSheet::new(load_workbook(csv, WorkbookFormat::Csv).unwrap()).unwrap())
    }

    fn a(s: &str) -> CellAddr {
        parse_a1(s).unwrap()
    }

    fn set(cells: &[&str]) -> BTreeSet<CellAddr> {
        cells.iter().map(|c| a(c)).collect()
    }

    fn layout(ms: &ModuleSet) -> Vec<(String, Vec<String>)> {
        ms.modules
            .iter()
            .map(|m| {
                (
                    m.result.to_string(),
                    m.members.iter().map(ToString::to_string).collect(),
                )
            })
            .collect()
    }

    #[test]
    fn initial_sinks() {
        assert_eq!(curate_init(&ddg(S2)).unwrap().active, set(&["B3", "C3"]));
        assert_eq!(curate_init(&ddg(S1)).unwrap().active, set(&["C3"]));
        assert!(matches!(curate_init(&ddg("=B1,=A1")), Err(Error::CyclicDdg(_))));
    }

    #[test]
    fn exclusion_keeps_shared_predecessor() {
        let g = ddg(S2);
        let cur = exclude_sink(&curate_init(&g).unwrap(), &g, a("B3")).unwrap();
        assert_eq!(cur.active, set(&["C3"]));
        assert_eq!(cur.excluded, set(&["B3"]));
        assert!(cur.history[0].promoted.is_empty());
    }

    #[test]
    fn exclusion_promotes_predecessors() {
        let g = ddg(S1);
        let cur = exclude_sink(&curate_init(&g).unwrap(), &g, a("C3")).unwrap();
        assert_eq!(cur.active, set(&["C1", "C2"]));
        assert_eq!(cur.history[0].promoted, vec![a("C1"), a("C2")]);
    }

    #[test]
    fn exclusion_of_non_sink() {
        let g = ddg(S2);
        let cur = curate_init(&g).unwrap();
        assert_eq!(exclude_sink(&cur, &g, a("A1")), Err(Error::NotASink(a("A1"))));
    }

    #[test]
    fn restore_is_inverse() {
        let g = ddg(S1);
        let init = curate_init(&g).unwrap();
        let ex = exclude_sink(&init, &g, a("C3")).unwrap();
        assert_eq!(restore_sink(&ex, &g, a("C3")).unwrap(), init);
        let ex2 = exclude_sink(&ex, &g, a("C1")).unwrap();
        assert_eq!(restore_sink(&ex2, &g, a("C1")).unwrap(), ex);
        assert_eq!(
            restore_sink(&ex2, &g, a("C3")),
            Err(Error::RestoreBlocked {
                cell: a("C3"),
                dependent: a("C1")
            })
        );
        assert_eq!(restore_sink(&init, &g, a("C3")), Err(Error::NotExcluded(a("C3"))));
    }

    #[test]
    fn s2_modules() {
        let g = ddg(S2);
        let ms = recover_modules(&g, &set(&["B3", "C3"])).unwrap();
        assert_eq!(
            layout(&ms),
            vec![
                ("A3".into(), vec!["A1".into(), "A2".into(), "A3".into()]),
                ("B3".into(), vec!["B3".into()]),
                ("C3".into(), vec!["C3".into()]),
            ]
        );
        assert_eq!(ms.modules[0].id, "A3-module");
        assert!(module_boundary_check(&ms.modules, &g).is_empty());
    }

    #[test]
    fn s1_single_module() {
        let g = ddg(S1);
        let ms = recover_modules(&g, &set(&["C3"])).unwrap();
        assert_eq!(ms.modules.len(), 1);
        assert_eq!(ms.modules[0].members.len(), 7);
        assert!(module_boundary_check(&ms.modules, &g).is_empty());
    }

    #[test]
    fn no_results_no_modules() {
        let g = ddg(S2);
        let ms = recover_modules(&g, &BTreeSet::new()).unwrap();
        assert!(ms.modules.is_empty());
        assert_eq!(ms.unassigned.len(), 5);
    }

    #[test]
    fn modules_after_exclusion() {
        let g = ddg(S2);
        let cur = curate(&g, &[a("B3")]).unwrap();
        let ms = recover_modules(&g, cur.active()).unwrap();
        assert_eq!(
            layout(&ms),
            vec![("C3".into(), vec!["A1".into(), "A2".into(), "A3".into(), "C3".into()])]
        );
        assert_eq!(ms.unassigned, vec![a("B3")]);
    }

    #[test]
    fn hand_built_bad_partition() {
        let g = ddg(S2);
        let bad = vec![
            DataModule {
                id: module_id(a("A1")),
                result: a("A1"),
                members: vec![a("A1")],
            },
            DataModule {
                id: module_id(a("A3")),
                result: a("A3"),
                members: vec![a("A2"), a("A3")],
            },
            DataModule {
                id: module_id(a("B3")),
                result: a("B3"),
                members: vec![a("B3")],
            },
            DataModule {
                id: module_id(a("C3")),
                result: a("C3"),
                members: vec![a("C3")],
            },
        ];
        let v = module_boundary_check(&bad, &g);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].edge, Some((a("A1"), a("A3"))));
        assert_eq!(v[0].module, "A1-module");
        assert_eq!(v[0].other_module.as_deref(), Some("A3-module"));

        // a non-result member read from outside
        let leaky = vec![
            DataModule {
                id: module_id(a("B3")),
                result: a("B3"),
                members: vec![a("A1"), a("B3")],
            },
            DataModule {
                id: module_id(a("A3")),
                result: a("A3"),
                members: vec![a("A2"), a("A3")],
            },
        ];
        let v = module_boundary_check(&leaky, &g);
        assert!(v
            .iter()
            .any(|v| v.kind == ViolationKind::CrossBoundary && v.edge == Some((a("A1"), a("A3")))));
    }

    #[test]
    fn fault_trace() {
        let g = ddg(S2);
        let ms = recover_modules(&g, &set(&["B3", "C3"])).unwrap();
        let srg = srg_of_modules(&ms.modules, &g).unwrap();
        assert_eq!(
            fault_trace_step(&srg, "B3-module").unwrap(),
            vec![TraceStep {
                module: "A3-module".into(),
                result: a("A3")
            }]
        );
        assert!(fault_trace_step(&srg, "A3").unwrap().is_empty());
        assert!(matches!(
            fault_trace_step(&srg, "Z9-module"),
            Err(Error::UnknownModule(_))
        ));
        assert!(matches!(
            fault_trace_step(&srg, "nonsense"),
            Err(Error::UnknownModule(_))
        ));
    }

    #[test]
    fn module_highlight_map() {
        let g = ddg(S2);
        let ms = recover_modules(&g, &set(&["B3", "C3"])).unwrap();
        assert_eq!(
            highlight_csv(&ms.modules),
            "cell,module_id\nA1,A3-module\nA2,A3-module\nA3,A3-module\nB3,B3-module\nC3,C3-module\n"
        );
    }
}
