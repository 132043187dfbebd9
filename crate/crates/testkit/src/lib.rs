//! Seeded sheet generators and brute-force oracles for the sheetaudit test
//! suites. Nothing here calls into the algorithms under test except to read
//! a DDG's edges; addresses are rendered with a local A1 encoder.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sheetaudit::{CellAddr, Ddg};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bijective base-26 column label, written independently of the core crate.
pub fn col_label(mut col: u32) -> String {
    let mut out = Vec::new();
    while col > 0 {
        let rem = (col - 1) % 26;
        out.push(b'A' + rem as u8);
        col = (col - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).unwrap()
}

pub fn a1(row: u32, col: u32) -> String {
    format!("{}{}", col_label(col), row)
}

/// A sparse grid of raw CSV fields.
#[derive(Debug, Clone, Default)]
pub struct Grid {
    pub cells: BTreeMap<(u32, u32), String>,
}

impl Grid {
    pub fn set(&mut self, row: u32, col: u32, field: impl Into<String>) {
        self.cells.insert((row, col), field.into());
    }

    /// RFC-4180 text, one line per row up to the last non-empty row.
    pub fn to_csv(&self) -> String {
        let rows = self.cells.keys().map(|k| k.0).max().unwrap_or(0);
        let cols = self.cells.keys().map(|k| k.1).max().unwrap_or(0);
        let mut out = String::new();
        for r in 1..=rows {
            let fields: Vec<String> = (1..=cols)
                .map(|c| quote(self.cells.get(&(r, c)).map(String::as_str).unwrap_or("")))
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn formula_count(&self) -> usize {
        self.cells.values().filter(|f| f.starts_with('=')).count()
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// One coordinate of a generated reference: fixed, or an offset from the
/// formula's own cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Axis {
    Abs(u32),
    Rel(i64),
}

impl Axis {
    fn at(self, origin: u32) -> Option<(u32, bool)> {
        match self {
            Axis::Abs(v) => Some((v, true)),
            Axis::Rel(d) => {
                let v = i64::from(origin) + d;
                (v >= 1).then_some((v as u32, false))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenRef {
    pub row: Axis,
    pub col: Axis,
}

impl GenRef {
    pub fn render(&self, origin: (u32, u32)) -> Option<String> {
        let (r, abs_r) = self.row.at(origin.0)?;
        let (c, abs_c) = self.col.at(origin.1)?;
        if r > 1_048_576 || c > 16_384 {
            return None;
        }
        Some(format!(
            "{}{}{}{}",
            if abs_c { "$" } else { "" },
            col_label(c),
            if abs_r { "$" } else { "" },
            r
        ))
    }
}

/// Formula skeleton whose rendering depends on the cell it is placed in.
#[derive(Debug, Clone, PartialEq)]
pub enum GenExpr {
    Num(u32),
    Text(String),
    Ref(GenRef),
    Range(GenRef, GenRef),
    Call(&'static str, Vec<GenExpr>),
    Bin(&'static str, Box<GenExpr>, Box<GenExpr>),
    Neg(Box<GenExpr>),
}

const OPS: [&str; 12] = ["+", "-", "*", "/", "^", "&", "=", "<>", "<", "<=", ">", ">="];
const FUNCS: [&str; 5] = ["SUM", "MAX", "MIN", "IF", "AVERAGE"];

impl GenExpr {
    /// A1 source text without the leading `=`; `None` if a reference leaves the grid.
    pub fn render(&self, origin: (u32, u32)) -> Option<String> {
        Some(match self {
            GenExpr::Num(n) => n.to_string(),
            GenExpr::Text(s) => format!("\"{}\"", s.replace('"', "\"\"")),
            GenExpr::Ref(r) => r.render(origin)?,
            GenExpr::Range(a, b) => format!("{}:{}", a.render(origin)?, b.render(origin)?),
            GenExpr::Call(name, args) => {
                let args: Option<Vec<String>> = args.iter().map(|a| a.render(origin)).collect();
                format!("{name}({})", args?.join(","))
            }
            // parenthesized, so generated precedence never depends on the grammar
            GenExpr::Bin(op, l, r) => format!("({}{op}{})", l.render(origin)?, r.render(origin)?),
            GenExpr::Neg(e) => format!("-({})", e.render(origin)?),
        })
    }

    pub fn formula(&self, origin: (u32, u32)) -> Option<String> {
        self.render(origin).map(|s| format!("={s}"))
    }
}

fn gen_axis<R: Rng>(rng: &mut R, extent: u32) -> Axis {
    if rng.random_bool(0.3) {
        Axis::Abs(rng.random_range(1..=extent))
    } else {
        let e = i64::from(extent);
        Axis::Rel(rng.random_range(-e + 1..e))
    }
}

fn gen_ref<R: Rng>(rng: &mut R, rows: u32, cols: u32) -> GenRef {
    GenRef {
        row: gen_axis(rng, rows),
        col: gen_axis(rng, cols),
    }
}

/// A random formula skeleton with references into a `rows` x `cols` window.
pub fn gen_expr<R: Rng>(rng: &mut R, depth: u32, rows: u32, cols: u32) -> GenExpr {
    let leaf = depth == 0 || rng.random_bool(0.35);
    if leaf {
        return match rng.random_range(0..10) {
            0..=1 => GenExpr::Num(rng.random_range(0..100)),
            2 => GenExpr::Text(["a", "x y", "q\"t", ""][rng.random_range(0..4)].to_string()),
            3 => GenExpr::Range(gen_ref(rng, rows, cols), gen_ref(rng, rows, cols)),
            _ => GenExpr::Ref(gen_ref(rng, rows, cols)),
        };
    }
    match rng.random_range(0..10) {
        0..=5 => {
            let op = OPS[rng.random_range(0..OPS.len())];
            GenExpr::Bin(
                op,
                Box::new(gen_expr(rng, depth - 1, rows, cols)),
                Box::new(gen_expr(rng, depth - 1, rows, cols)),
            )
        }
        6 => GenExpr::Neg(Box::new(gen_expr(rng, depth - 1, rows, cols))),
        _ => {
            let name = FUNCS[rng.random_range(0..FUNCS.len())];
            let n = rng.random_range(1..=3);
            GenExpr::Call(name, (0..n).map(|_| gen_expr(rng, depth - 1, rows, cols)).collect())
        }
    }
}

/// A formula skeleton placed at two cells related by a pure translation.
#[derive(Debug, Clone)]
pub struct TranslationPair {
    pub expr: GenExpr,
    pub origin: (u32, u32),
    pub target: (u32, u32),
    pub source: String,
    pub copy: String,
}

/// Draws skeletons and translations until both placements stay in the grid.
pub fn translation_pair<R: Rng>(rng: &mut R) -> TranslationPair {
    loop {
        let expr = gen_expr(rng, 3, 40, 40);
        let origin = (rng.random_range(1..=200), rng.random_range(1..=60));
        let target = (rng.random_range(1..=5000), rng.random_range(1..=500));
        if let (Some(source), Some(copy)) = (expr.formula(origin), expr.formula(target)) {
            return TranslationPair {
                expr,
                origin,
                target,
                source,
                copy,
            };
        }
    }
}

/// Mixed sheet of at most `max` x `max` cells: numbers, text, empties and
/// formulas (cycles allowed).
pub fn random_sheet<R: Rng>(rng: &mut R, max: u32) -> Grid {
    let rows = rng.random_range(1..=max);
    let cols = rng.random_range(1..=max);
    let mut grid = Grid::default();
    // a few templates copied around so that equivalence classes are non-trivial
    let templates: Vec<GenExpr> = (0..rng.random_range(1..=4)).map(|_| gen_expr(rng, 2, 3, 3)).collect();
    for r in 1..=rows {
        for c in 1..=cols {
            let field = match rng.random_range(0..20) {
                0..=6 => continue,
                7..=9 => rng.random_range(-50..50).to_string(),
                10 => "label".to_string(),
                11..=15 => {
                    let t = &templates[rng.random_range(0..templates.len())];
                    match t.formula((r, c)) {
                        Some(f) => f,
                        None => continue,
                    }
                }
                _ => match gen_expr(rng, 2, rows, cols).formula((r, c)) {
                    Some(f) => f,
                    None => continue,
                },
            };
            grid.set(r, c, field);
        }
    }
    grid
}

/// Acyclic sheet with at most `max_cells` non-empty cells in a small window.
/// Formulas only read cells strictly earlier in row-major order; ranges only
/// cover rows above the formula.
pub fn random_acyclic_sheet<R: Rng>(rng: &mut R, max_cells: usize) -> Grid {
    let rows = rng.random_range(2..=7u32);
    let cols = rng.random_range(2..=6u32);
    let mut slots: Vec<(u32, u32)> = (1..=rows).flat_map(|r| (1..=cols).map(move |c| (r, c))).collect();
    slots.shuffle(rng);
    let n = rng.random_range(2..=max_cells.min(slots.len()));
    let mut chosen: Vec<(u32, u32)> = slots[..n].to_vec();
    chosen.sort();
    let mut grid = Grid::default();
    for (i, &(r, c)) in chosen.iter().enumerate() {
        let earlier = &chosen[..i];
        if earlier.is_empty() || rng.random_bool(0.3) {
            grid.set(r, c, rng.random_range(1..10).to_string());
            continue;
        }
        let mut terms = Vec::new();
        for _ in 0..rng.random_range(1..=3) {
            if r > 1 && rng.random_bool(0.15) {
                let r1 = rng.random_range(1..r);
                let r2 = rng.random_range(r1..r);
                let c1 = rng.random_range(1..=cols);
                let c2 = (c1 + rng.random_range(0..2)).min(cols);
                terms.push(format!("SUM({}:{})", a1(r1, c1), a1(r2, c2)));
            } else if rng.random_bool(0.1) {
                // a referenced empty cell
                let (er, ec) = (1..=r)
                    .flat_map(|rr| (1..=cols).map(move |cc| (rr, cc)))
                    .rfind(|p| *p < (r, c) && !chosen.contains(p))
                    .unwrap_or(earlier[0]);
                terms.push(a1(er, ec));
            } else {
                let (er, ec) = earlier[rng.random_range(0..earlier.len())];
                terms.push(a1(er, ec));
            }
        }
        grid.set(r, c, format!("={}", terms.join("+")));
    }
    grid
}

/// Edges of a DDG as plain adjacency.
#[derive(Debug, Clone)]
pub struct Graph {
    pub nodes: Vec<CellAddr>,
    pub succ: BTreeMap<CellAddr, Vec<CellAddr>>,
}

impl Graph {
    pub fn of(ddg: &Ddg) -> Self {
        let mut succ: BTreeMap<CellAddr, Vec<CellAddr>> = ddg.nodes().iter().map(|n| (*n, Vec::new())).collect();
        for (f, t) in ddg.edges() {
            succ.get_mut(&f).unwrap().push(t);
        }
        Graph {
            nodes: ddg.nodes().to_vec(),
            succ,
        }
    }

    /// Results reached by `c` along paths that stop at the first result,
    /// found by enumerating every such path.
    pub fn reached_results(&self, c: CellAddr, results: &BTreeSet<CellAddr>) -> BTreeSet<CellAddr> {
        let mut found = BTreeSet::new();
        let mut stack = vec![vec![c]];
        while let Some(path) = stack.pop() {
            let last = *path.last().unwrap();
            for &s in &self.succ[&last] {
                if results.contains(&s) {
                    found.insert(s);
                } else {
                    let mut next = path.clone();
                    next.push(s);
                    stack.push(next);
                }
            }
        }
        found
    }
}

/// Expected data modules: result -> members, plus cells reaching no result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleModules {
    pub modules: BTreeMap<CellAddr, BTreeSet<CellAddr>>,
    pub unassigned: BTreeSet<CellAddr>,
}

/// Module partition by path enumeration with minimal promotion.
///
/// Each round computes D(c), the results reached first from `c`. A cell with
/// several such results must become a result, but a cell further upstream
/// only needs promotion if it still reaches several results after the cells
/// below it are promoted. So each round promotes only the candidates none of
/// whose successors is a candidate.
pub fn oracle_modules(g: &Graph, results: &BTreeSet<CellAddr>) -> OracleModules {
    let mut results = results.clone();
    loop {
        let d: BTreeMap<CellAddr, BTreeSet<CellAddr>> = g
            .nodes
            .iter()
            .filter(|n| !results.contains(n))
            .map(|n| (*n, g.reached_results(*n, &results)))
            .collect();
        let candidates: BTreeSet<CellAddr> = d.iter().filter(|(_, r)| r.len() > 1).map(|(n, _)| *n).collect();
        if candidates.is_empty() {
            let mut modules: BTreeMap<CellAddr, BTreeSet<CellAddr>> =
                results.iter().map(|r| (*r, BTreeSet::from([*r]))).collect();
            let mut unassigned = BTreeSet::new();
            for (n, rs) in d {
                match rs.first() {
                    Some(r) => {
                        modules.get_mut(r).unwrap().insert(n);
                    }
                    None => {
                        unassigned.insert(n);
                    }
                }
            }
            return OracleModules { modules, unassigned };
        }
        let lowest: Vec<CellAddr> = candidates
            .iter()
            .filter(|c| !g.succ[c].iter().any(|s| candidates.contains(s)))
            .copied()
            .collect();
        results.extend(lowest);
    }
}

/// Active result list after excluding `excluded`: every remaining node whose
/// successors are all excluded.
pub fn oracle_active(g: &Graph, excluded: &BTreeSet<CellAddr>) -> BTreeSet<CellAddr> {
    g.nodes
        .iter()
        .filter(|n| !excluded.contains(n) && g.succ[n].iter().all(|s| excluded.contains(s)))
        .copied()
        .collect()
}

/// Row template used by [`compression_sheet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowTemplate {
    pub width: u32,
    /// Sheet rows holding an instance.
    pub rows: Vec<u32>,
}

/// A sheet with `templates` distinct row templates spread over exactly
/// `formulas` formula cells. Column A holds an input; each instance fills
/// columns B onwards with a left-to-right chain. Rows are shuffled, so
/// instances of one template are scattered.
pub fn compression_sheet(templates: u32, formulas: u32, seed: u64) -> (Grid, Vec<RowTemplate>) {
    let widths: Vec<u32> = (0..templates).map(|t| 1 + t % 6).collect();
    let mut counts = vec![1u32; templates as usize];
    let mut remaining = formulas - widths.iter().sum::<u32>();
    // round-robin over the widest templates that still fit
    let mut t = 0;
    while remaining > 0 {
        let i = t % templates as usize;
        if widths[i] <= remaining {
            counts[i] += 1;
            remaining -= widths[i];
        }
        t += 1;
    }
    let mut order: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(i, n)| std::iter::repeat_n(i, *n as usize))
        .collect();
    order.shuffle(&mut rng(seed));

    let mut grid = Grid::default();
    let mut out: Vec<RowTemplate> = widths
        .iter()
        .map(|w| RowTemplate {
            width: *w,
            rows: Vec::new(),
        })
        .collect();
    for (i, &tpl) in order.iter().enumerate() {
        let r = i as u32 + 1;
        grid.set(r, 1, (r % 97).to_string());
        for j in 0..widths[tpl] {
            let left = a1(r, j + 1);
            let k = 100 * (tpl as u32 + 1) + j;
            grid.set(r, j + 2, format!("={left}*{k}"));
        }
        out[tpl].rows.push(r);
    }
    (grid, out)
}

/// A sheet with `blocks` blocks of ten rows. Each row holds an input and a
/// nine-step chain; the tenth row of a block sums the block's chain ends and
/// adds the previous block's total, and the last column carries a check-sum.
/// Formula count is `blocks * 100`.
pub fn large_sheet(blocks: u32) -> Grid {
    let mut grid = Grid::default();
    for b in 0..blocks {
        let top = b * 10 + 1;
        for r in top..top + 9 {
            grid.set(r, 1, (r % 13 + 1).to_string());
            grid.set(r, 2, format!("=A{r}*2"));
            for c in 3..=10 {
                grid.set(r, c, format!("={}+{}", a1(r, c - 1), c));
            }
            grid.set(r, 11, format!("=J{r}-B{r}"));
        }
        let total = top + 9;
        let prev = if b == 0 {
            "0".to_string()
        } else {
            format!("B{}", total - 10)
        };
        grid.set(total, 2, format!("=SUM(J{top}:J{})+{prev}", total - 1));
        for c in 3..=11 {
            grid.set(total, c, format!("={}*{}", a1(total, c - 1), c));
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(col_label(1), "A");
        assert_eq!(col_label(26), "Z");
        assert_eq!(col_label(27), "AA");
        assert_eq!(col_label(702), "ZZ");
        assert_eq!(col_label(703), "AAA");
    }

    #[test]
    fn compression_counts() {
        let (grid, templates) = compression_sheet(23, 1200, 7);
        assert_eq!(grid.formula_count(), 1200);
        assert_eq!(templates.len(), 23);
        assert!(templates.iter().all(|t| t.rows.len() >= 2));
    }

    #[test]
    fn large_sheet_size() {
        assert_eq!(large_sheet(3).formula_count(), 300);
    }

    #[test]
    fn quoting() {
        let mut g = Grid::default();
        g.set(1, 2, "=IF(A1,\"a\",1)");
        assert_eq!(g.to_csv(), ",\"=IF(A1,\"\"a\"\",1)\"\n");
    }
}
