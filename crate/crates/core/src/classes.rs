//! Semantic units and semantic classes.
//!
//! A semantic unit is a connected block of formula cells, where two cells
//! are neighbours when their row and column distances stay within `d_v` and
//! `d_h` and their Manhattan distance within `d_man`. A semantic class groups
//! units of identical shape whose top-left cells are equivalent at
//! `eq_start` and whose remaining cells are pairwise equivalent, position by
//! position, at `eq_rest`.
//!
//! Classes are grown in lockstep: every cell sharing an `eq_start` key is an
//! anchor, and all anchors of a group extend one shared shape together. When
//! anchors disagree about the next offset the group splits by key, anchors
//! that cannot extend at all keep the shape reached so far.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write;

use serde::{Serialize, Serializer};

use crate::equivalence::{fingerprint, EqKey, EqLevel};
use crate::error::Error;
use crate::grid::CellAddr;
use crate::parsed::ParsedSheet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct GeometryParams {
    pub d_h: u32,
    pub d_v: u32,
    pub d_man: u32,
}

impl GeometryParams {
    /// `d_man` defaults to `d_h + d_v`.
    pub fn new(d_h: u32, d_v: u32, d_man: Option<u32>) -> Result<Self, Error> {
        let d_man = d_man.unwrap_or(d_h + d_v);
        if d_man < 1 {
            return Err(Error::InvalidParameter(
                "d_man must be at least 1 (d_h + d_v must be positive)".into(),
            ));
        }
        if d_man > d_h + d_v {
            return Err(Error::InvalidParameter(format!(
                "d_man ({d_man}) exceeds d_h + d_v ({})",
                d_h + d_v
            )));
        }
        Ok(Self { d_h, d_v, d_man })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ClassParams {
    pub geometry: GeometryParams,
    pub eq_start: EqLevel,
    pub eq_rest: EqLevel,
}

impl Default for ClassParams {
    /// One step in any direction, diagonals included; copy equivalence throughout.
    fn default() -> Self {
        Self {
            geometry: GeometryParams {
                d_h: 1,
                d_v: 1,
                d_man: 2,
            },
            eq_start: EqLevel::Copy,
            eq_rest: EqLevel::Copy,
        }
    }
}

/// Whether `a` and `b` may be consecutive members of one unit.
pub fn neighbor(a: CellAddr, b: CellAddr, g: &GeometryParams) -> bool {
    let dr = a.row.abs_diff(b.row);
    let dc = a.col.abs_diff(b.col);
    a != b && dc <= g.d_h && dr <= g.d_v && dr + dc <= g.d_man
}

/// Position relative to a unit's anchor. Ordered row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Offset {
    pub d_row: i64,
    pub d_col: i64,
}

impl Offset {
    pub const ORIGIN: Offset = Offset { d_row: 0, d_col: 0 };

    pub fn new(d_row: i64, d_col: i64) -> Self {
        Self { d_row, d_col }
    }

    fn apply(self, a: CellAddr) -> Option<CellAddr> {
        a.offset(self.d_row, self.d_col)
    }
}

impl Serialize for Offset {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.d_row, self.d_col].serialize(serializer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemanticUnit {
    pub id: String,
    pub anchor: CellAddr,
    #[serde(skip)]
    pub shape: Vec<Offset>,
    /// Row-major.
    pub cells: Vec<CellAddr>,
}

impl SemanticUnit {
    fn new(anchor: CellAddr, shape: &BTreeSet<Offset>) -> Self {
        let mut cells: Vec<CellAddr> = shape
            .iter()
            .map(|o| o.apply(anchor).expect("shape cells were checked in-grid"))
            .collect();
        cells.sort();
        Self {
            id: String::new(),
            anchor,
            shape: shape.iter().copied().collect(),
            cells,
        }
    }
}

/// Canonical text for a unit's shape: sorted `d_row,d_col` pairs joined by `;`.
pub fn shape_signature(unit: &SemanticUnit) -> String {
    signature_of(&unit.shape)
}

fn signature_of(shape: &[Offset]) -> String {
    let mut sorted = shape.to_vec();
    sorted.sort();
    let mut out = String::new();
    for (i, o) in sorted.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        write!(out, "{},{}", o.d_row, o.d_col).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestKey {
    pub offset: Offset,
    pub key: EqKey,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemanticClass {
    pub id: String,
    pub shape: String,
    pub singleton: bool,
    pub units: Vec<SemanticUnit>,
    pub start_key: EqKey,
    pub rest_keys: Vec<RestKey>,
}

impl SemanticClass {
    pub fn cells(&self) -> impl Iterator<Item = CellAddr> + '_ {
        self.units.iter().flat_map(|u| u.cells.iter().copied())
    }
}

struct Keys {
    start: EqKey,
    rest: EqKey,
}

struct Grower<'a> {
    keys: BTreeMap<CellAddr, Keys>,
    geometry: &'a GeometryParams,
    consumed: HashSet<CellAddr>,
    /// Cells held by units that are still growing or awaiting their turn.
    reserved: HashSet<CellAddr>,
    frozen: Vec<(Vec<CellAddr>, BTreeSet<Offset>)>,
}

#[derive(Clone)]
struct Pending {
    anchors: Vec<CellAddr>,
    shape: BTreeSet<Offset>,
    rejected: BTreeSet<Offset>,
    frontier: BTreeSet<Offset>,
}

impl Grower<'_> {
    fn add_frontier(&self, p: &mut Pending, from: Offset) {
        let g = self.geometry;
        let (dv, dh) = (i64::from(g.d_v), i64::from(g.d_h));
        for dr in -dv..=dv {
            for dc in -dh..=dh {
                if dr.unsigned_abs() + dc.unsigned_abs() > u64::from(g.d_man) || (dr, dc) == (0, 0) {
                    continue;
                }
                let o = Offset::new(from.d_row + dr, from.d_col + dc);
                // anchors are the top-left member, so offsets stay row-major after the origin
                if o > Offset::ORIGIN && !p.shape.contains(&o) && !p.rejected.contains(&o) {
                    p.frontier.insert(o);
                }
            }
        }
    }

    fn rest_key_at(&self, anchor: CellAddr, o: Offset) -> Option<&EqKey> {
        let cell = o.apply(anchor)?;
        if self.consumed.contains(&cell) || self.reserved.contains(&cell) {
            return None;
        }
        self.keys.get(&cell).map(|k| &k.rest)
    }

    fn freeze(&mut self, anchors: Vec<CellAddr>, shape: BTreeSet<Offset>) {
        for a in &anchors {
            for o in &shape {
                let c = o.apply(*a).expect("in grid");
                self.reserved.remove(&c);
                self.consumed.insert(c);
            }
        }
        self.frozen.push((anchors, shape));
    }

    fn reserve(&mut self, anchors: &[CellAddr], o: Offset) {
        for a in anchors {
            self.reserved.insert(o.apply(*a).expect("in grid"));
        }
    }

    fn grow_group(&mut self, anchors: Vec<CellAddr>) {
        let origin_only: BTreeSet<Offset> = [Offset::ORIGIN].into();
        if anchors.len() == 1 {
            self.freeze(anchors, origin_only);
            return;
        }
        self.reserved.extend(anchors.iter().copied());
        let mut first = Pending {
            anchors,
            shape: origin_only,
            rejected: BTreeSet::new(),
            frontier: BTreeSet::new(),
        };
        self.add_frontier(&mut first, Offset::ORIGIN);
        let mut stack = vec![first];

        while let Some(mut p) = stack.pop() {
            loop {
                let Some(o) = p.frontier.pop_first() else {
                    self.freeze(p.anchors, p.shape);
                    break;
                };
                let mut parts: BTreeMap<Option<EqKey>, Vec<CellAddr>> = BTreeMap::new();
                for &a in &p.anchors {
                    parts.entry(self.rest_key_at(a, o).cloned()).or_default().push(a);
                }
                if parts.len() == 1 {
                    if parts.contains_key(&None) {
                        p.rejected.insert(o);
                    } else {
                        self.reserve(&p.anchors, o);
                        p.shape.insert(o);
                        self.add_frontier(&mut p, o);
                    }
                    continue;
                }

                let mut subgroups = Vec::new();
                for (key, members) in parts {
                    if key.is_none() || members.len() == 1 {
                        self.freeze(members, p.shape.clone());
                    } else {
                        self.reserve(&members, o);
                        let mut sub = Pending {
                            anchors: members,
                            shape: p.shape.clone(),
                            rejected: p.rejected.clone(),
                            frontier: p.frontier.clone(),
                        };
                        sub.shape.insert(o);
                        self.add_frontier(&mut sub, o);
                        subgroups.push(sub);
                    }
                }
                // the stack pops from the end: largest subgroup, then earliest anchor, goes last
                subgroups.sort_by(|a, b| {
                    a.anchors
                        .len()
                        .cmp(&b.anchors.len())
                        .then_with(|| b.anchors[0].cmp(&a.anchors[0]))
                });
                stack.extend(subgroups);
                break;
            }
        }
    }
}

/// Grows semantic units and groups them into classes.
///
/// Classes are ordered by the anchor of their first unit; units by anchor.
/// Class ids are `K1`, `K2`, …; unit ids `K<n>.<m>`.
pub fn grow_classes(sheet: &ParsedSheet, params: &ClassParams) -> Vec<SemanticClass> {
    let keys: BTreeMap<CellAddr, Keys> = sheet
        .formulas()
        .map(|(a, ast)| {
            let start = fingerprint(ast, params.eq_start);
            let rest = if params.eq_rest == params.eq_start {
                start.clone()
            } else {
                fingerprint(ast, params.eq_rest)
            };
            (a, Keys { start, rest })
        })
        .collect();

    let mut groups: BTreeMap<&EqKey, Vec<CellAddr>> = BTreeMap::new();
    for (a, k) in &keys {
        groups.entry(&k.start).or_default().push(*a);
    }
    let mut ordered: Vec<Vec<CellAddr>> = groups.into_values().collect();
    ordered.sort_by_key(|g| g[0]);

    let mut grower = Grower {
        keys,
        geometry: &params.geometry,
        consumed: HashSet::new(),
        reserved: HashSet::new(),
        frozen: Vec::new(),
    };
    for group in ordered {
        let anchors: Vec<CellAddr> = group.into_iter().filter(|a| !grower.consumed.contains(a)).collect();
        if !anchors.is_empty() {
            grower.grow_group(anchors);
        }
    }

    let keys = &grower.keys;
    let mut classes: Vec<SemanticClass> = grower
        .frozen
        .iter()
        .map(|(anchors, shape)| {
            let mut units: Vec<SemanticUnit> = anchors.iter().map(|a| SemanticUnit::new(*a, shape)).collect();
            units.sort_by_key(|u| u.anchor);
            let first = units[0].anchor;
            let rest_keys = shape
                .iter()
                .filter(|o| **o != Offset::ORIGIN)
                .map(|o| RestKey {
                    offset: *o,
                    key: keys[&o.apply(first).unwrap()].rest.clone(),
                })
                .collect();
            let shape_vec: Vec<Offset> = shape.iter().copied().collect();
            SemanticClass {
                id: String::new(),
                shape: signature_of(&shape_vec),
                singleton: units.len() == 1,
                start_key: keys[&first].start.clone(),
                rest_keys,
                units,
            }
        })
        .collect();
    classes.sort_by_key(|c| c.units[0].anchor);
    for (i, class) in classes.iter_mut().enumerate() {
        class.id = format!("K{}", i + 1);
        for (j, unit) in class.units.iter_mut().enumerate() {
            unit.id = format!("K{}.{}", i + 1, j + 1);
        }
    }
    classes
}

/// `cell,class_id,unit_id` rows for every unit cell, row-major, with a header.
pub fn highlight_csv(classes: &[SemanticClass]) -> String {
    let mut rows: Vec<(CellAddr, &str, &str)> = classes
        .iter()
        .flat_map(|c| {
            c.units
                .iter()
                .flat_map(move |u| u.cells.iter().map(move |cell| (*cell, c.id.as_str(), u.id.as_str())))
        })
        .collect();
    rows.sort();
    let mut out = String::from("cell,class_id,unit_id\n");
    for (cell, class, unit) in rows {
        writeln!(out, "{cell},{class},{unit}").unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Anchors share a column and step down rows.
    Rows,
    /// Anchors share a row and step across columns.
    Columns,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierReport {
    pub class_id: String,
    pub axis: Option<Axis>,
    /// Detected step between consecutive anchors, if the anchors follow one.
    pub stride: Option<u32>,
    /// Share of the expected progression matched by anchors.
    pub agreement: f64,
    /// Progression positions with no anchor.
    pub missing: Vec<CellAddr>,
    /// Anchors that fall between progression positions.
    pub off_pattern: Vec<CellAddr>,
    /// Formula cells inside the class's bounding box that belong to none of its units.
    pub holes: Vec<CellAddr>,
}

/// Fraction of the progression that must be matched for a stride to count.
pub const STRIDE_AGREEMENT: f64 = 0.8;

/// Checks whether a class's units repeat along one axis at a fixed stride
/// and reports the irregularities.
///
/// The stride is the most common gap between consecutive anchors (the
/// smaller one on ties). It is accepted when anchors cover at least
/// [`STRIDE_AGREEMENT`] of the progression from the first anchor to the last,
/// counting off-progression anchors against it.
pub fn pattern_outliers(class: &SemanticClass, sheet: &ParsedSheet) -> Result<OutlierReport, Error> {
    if class.units.len() < 3 {
        return Err(Error::TooFewUnits(class.units.len()));
    }
    let anchors: Vec<CellAddr> = class.units.iter().map(|u| u.anchor).collect();
    let axis = if anchors.iter().all(|a| a.col == anchors[0].col) {
        Some(Axis::Rows)
    } else if anchors.iter().all(|a| a.row == anchors[0].row) {
        Some(Axis::Columns)
    } else {
        None
    };

    let mut report = OutlierReport {
        class_id: class.id.clone(),
        axis,
        stride: None,
        agreement: 0.0,
        missing: Vec::new(),
        off_pattern: Vec::new(),
        holes: holes(class, sheet),
    };
    let Some(axis) = axis else {
        return Ok(report);
    };

    let pos = |a: &CellAddr| match axis {
        Axis::Rows => a.row,
        Axis::Columns => a.col,
    };
    let at = |p: u32| match axis {
        Axis::Rows => CellAddr::new(p, anchors[0].col),
        Axis::Columns => CellAddr::new(anchors[0].row, p),
    };
    let positions: Vec<u32> = anchors.iter().map(pos).collect();
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for w in positions.windows(2) {
        *counts.entry(w[1] - w[0]).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap_or(0);
    let stride = *counts.iter().find(|(_, c)| **c == best).unwrap().0;

    let first = positions[0];
    let last = *positions.last().unwrap();
    let present: BTreeSet<u32> = positions.iter().copied().collect();
    let expected: Vec<u32> = (first..=last).step_by(stride as usize).collect();
    let on_lattice = positions.iter().filter(|p| (*p - first).is_multiple_of(stride)).count();
    let off: Vec<u32> = positions
        .iter()
        .copied()
        .filter(|p| !(p - first).is_multiple_of(stride))
        .collect();
    report.agreement = on_lattice as f64 / (expected.len() + off.len()) as f64;
    if report.agreement >= STRIDE_AGREEMENT {
        report.stride = Some(stride);
        report.missing = expected
            .iter()
            .filter(|p| !present.contains(p))
            .map(|p| at(*p))
            .collect();
        report.off_pattern = off.into_iter().map(at).collect();
    }
    Ok(report)
}

fn holes(class: &SemanticClass, sheet: &ParsedSheet) -> Vec<CellAddr> {
    let members: HashSet<CellAddr> = class.cells().collect();
    let (mut top, mut left, mut bottom, mut right) = (u32::MAX, u32::MAX, 0, 0);
    for c in &members {
        top = top.min(c.row);
        left = left.min(c.col);
        bottom = bottom.max(c.row);
        right = right.max(c.col);
    }
    sheet
        .sheet()
        .cells()
        .filter(|(a, content)| {
            content.is_formula()
                && (top..=bottom).contains(&a.row)
                && (left..=right).contains(&a.col)
                && !members.contains(a)
        })
        .map(|(a, _)| a)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{load_workbook, parse_a1, WorkbookFormat};

    fn a(s: &str) -> CellAddr {
        parse_a1(s).unwrap()
    }

    fn sheet(csv: &str) -> ParsedSheet {
        ParsedSheet::new(load_workbook(csv, WorkbookFormat::Csv).unwrap()).unwrap()
    }

    fn params(d_h: u32, d_v: u32, d_man: Option<u32>, start: EqLevel, rest: EqLevel) -> ClassParams {
        ClassParams {
            geometry: GeometryParams::new(d_h, d_v, d_man).unwrap(),
            eq_start: start,
            eq_rest: rest,
        }
    }

    fn copy_row() -> ClassParams {
        params(1, 0, None, EqLevel::Copy, EqLevel::Copy)
    }

    fn layout(classes: &[SemanticClass]) -> Vec<Vec<Vec<String>>> {
        classes
            .iter()
            .map(|c| {
                c.units
                    .iter()
                    .map(|u| u.cells.iter().map(ToString::to_string).collect())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn neighbor_relation() {
        let g = GeometryParams::new(1, 0, None).unwrap();
        assert!(neighbor(a("A1"), a("B1"), &g));
        assert!(!neighbor(a("A1"), a("A2"), &g));
        let gap = GeometryParams::new(2, 0, Some(2)).unwrap();
        assert!(neighbor(a("A1"), a("C1"), &gap));
        assert!(!neighbor(a("A1"), a("D1"), &gap));
        let diag1 = GeometryParams::new(1, 1, Some(1)).unwrap();
        let diag2 = GeometryParams::new(1, 1, Some(2)).unwrap();
        assert!(!neighbor(a("A1"), a("B2"), &diag1));
        assert!(neighbor(a("A1"), a("B2"), &diag2));
    }

    #[test]
    fn geometry_validation() {
        assert!(GeometryParams::new(0, 0, None).is_err());
        assert!(GeometryParams::new(1, 1, Some(3)).is_err());
        assert_eq!(GeometryParams::new(2, 1, None).unwrap().d_man, 3);
    }

    #[test]
    fn s3_two_cell_units() {
        let s = sheet(",,\n,=A2*2,=B2+1\n,=A3*2,=B3+1");
        let classes = grow_classes(&s, &copy_row());
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].shape, "0,0;0,1");
        assert_eq!(layout(&classes), [[vec!["B2", "C2"], vec!["B3", "C3"]]]);
        assert!(!classes[0].singleton);
        assert_eq!(classes[0].rest_keys.len(), 1);
    }

    #[test]
    fn s1_blocked_growth() {
        let s = sheet("1,2,=A1+B1\n3,4,=A2+B2\n,,=C1+C2");
        let classes = grow_classes(&s, &copy_row());
        assert_eq!(layout(&classes), vec![vec![vec!["C1"], vec!["C2"]], vec![vec!["C3"]]]);
        assert!(classes[1].singleton);
        assert_eq!(classes[0].id, "K1");
        assert_eq!(classes[0].units[1].id, "K1.2");
    }

    #[test]
    fn empty_sheet_has_no_classes() {
        assert!(grow_classes(&sheet(""), &copy_row()).is_empty());
    }

    #[test]
    fn gaps_bridged_only_when_allowed() {
        // one-cell gap between the two halves of each row block
        let csv = "1,=A1*2,,=B1+1\n2,=A2*2,,=B2+1";
        let adjacent = grow_classes(&sheet(csv), &copy_row());
        assert_eq!(adjacent.len(), 2);
        let gapped = grow_classes(&sheet(csv), &params(2, 0, Some(2), EqLevel::Copy, EqLevel::Copy));
        assert_eq!(gapped.len(), 1);
        assert_eq!(gapped[0].shape, "0,0;0,2");
    }

    #[test]
    fn disagreeing_anchors_split() {
        // rows 1-2 continue with =B+1, row 3 continues with =B*3
        let csv = "1,=A1*2,=B1+1\n2,=A2*2,=B2+1\n3,=A3*2,=B3*3";
        let classes = grow_classes(&sheet(csv), &copy_row());
        assert_eq!(
            layout(&classes),
            vec![
                vec![vec!["B1", "C1"], vec!["B2", "C2"]],
                vec![vec!["B3"]],
                vec![vec!["C3"]],
            ]
        );
    }

    #[test]
    fn anchors_never_absorb_each_other() {
        // a column of copies grown vertically must not chain anchors together
        let csv = "1,=A1\n2,=A2\n3,=A3";
        let classes = grow_classes(&sheet(csv), &params(0, 1, None, EqLevel::Copy, EqLevel::Copy));
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].units.len(), 3);
        assert_eq!(classes[0].shape, "0,0");
    }

    #[test]
    fn shape_signatures() {
        let unit = |shape: &[(i64, i64)]| SemanticUnit {
            id: String::new(),
            anchor: a("A1"),
            shape: shape.iter().map(|(r, c)| Offset::new(*r, *c)).collect(),
            cells: vec![],
        };
        assert_eq!(shape_signature(&unit(&[(0, 1), (0, 0)])), "0,0;0,1");
        assert_eq!(shape_signature(&unit(&[(0, 0)])), "0,0");
        assert_ne!(
            shape_signature(&unit(&[(0, 0), (1, 1)])),
            shape_signature(&unit(&[(0, 0), (0, 1)]))
        );
    }

    #[test]
    fn highlight_map() {
        let s = sheet("1,2,=A1+B1\n3,4,=A2+B2\n,,=C1+C2");
        let csv = highlight_csv(&grow_classes(&s, &copy_row()));
        assert_eq!(csv, "cell,class_id,unit_id\nC1,K1,K1.1\nC2,K1,K1.2\nC3,K2,K2.1\n");
    }

    fn column_class(rows: &[u32]) -> (SemanticClass, ParsedSheet) {
        let max = *rows.iter().max().unwrap();
        let csv: Vec<String> = (1..=max)
            .map(|r| {
                if rows.contains(&r) {
                    format!("{r},=A{r}*2")
                } else {
                    format!("{r},")
                }
            })
            .collect();
        let s = sheet(&csv.join("\n"));
        let mut classes = grow_classes(&s, &copy_row());
        assert_eq!(classes.len(), 1);
        (classes.remove(0), s)
    }

    #[test]
    fn outlier_gap_in_progression() {
        let (class, s) = column_class(&[2, 3, 4, 6]);
        let r = pattern_outliers(&class, &s).unwrap();
        assert_eq!(r.axis, Some(Axis::Rows));
        assert_eq!(r.stride, Some(1));
        assert_eq!(r.missing, vec![a("B5")]);
        assert!(r.off_pattern.is_empty());
        assert!((r.agreement - 0.8).abs() < 1e-12);
    }

    #[test]
    fn outlier_perfect_progression() {
        let (class, s) = column_class(&[2, 3, 4]);
        let r = pattern_outliers(&class, &s).unwrap();
        assert_eq!(r.stride, Some(1));
        assert!(r.missing.is_empty() && r.off_pattern.is_empty() && r.holes.is_empty());
    }

    #[test]
    fn outlier_needs_three_units() {
        let (class, s) = column_class(&[2, 3]);
        assert_eq!(pattern_outliers(&class, &s), Err(Error::TooFewUnits(2)));
    }

    #[test]
    fn outlier_irregular_and_holes() {
        // stride 2 with one anchor off the lattice, and a foreign formula inside the box
        let csv = "1,=A1*2\n2,\n3,=A3*2\n4,=A4*5\n5,=A5*2\n6,\n7,=A7*2\n8,=A8*2";
        let s = sheet(csv);
        let classes = grow_classes(&s, &copy_row());
        let class = classes.iter().find(|c| c.units.len() == 5).unwrap();
        let r = pattern_outliers(class, &s).unwrap();
        assert_eq!(r.holes, vec![a("B4")]);
        // deltas 2,2,2,1: stride 2, lattice 1..7 has 4 positions, B8 is off it
        assert_eq!(r.stride, Some(2));
        assert_eq!(r.off_pattern, vec![a("B8")]);
        assert!(r.missing.is_empty());
    }
}
