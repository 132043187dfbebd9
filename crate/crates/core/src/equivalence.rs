//! Copy, logical and structural equivalence of formulas, and the logical
//! areas (equivalence classes) they induce over a sheet.
//!
//! Each level is a projection of the normalized AST:
//!
//! | level      | relative offsets | absolute coordinates | literals | ref kind |
//! |------------|------------------|----------------------|----------|----------|
//! | copy       | kept             | kept                 | kept     | kept     |
//! | logical    | kept             | masked               | masked   | kept     |
//! | structural | masked           | masked               | masked   | masked   |
//!
//! Operators, function names and argument counts are never masked. Since
//! every coarser projection is a function of the finer one, copy areas
//! always refine logical areas, which refine structural areas.

use std::collections::BTreeMap;
use std::fmt::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::Error;
use crate::formula::{format_number, CellRef, Coord, Expr, NormalizedAst, UnaryOp};
use crate::grid::CellAddr;
use crate::parsed::ParsedSheet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EqLevel {
    Copy,
    Logical,
    Structural,
}

impl EqLevel {
    pub const ALL: [EqLevel; 3] = [EqLevel::Copy, EqLevel::Logical, EqLevel::Structural];

    pub fn as_str(self) -> &'static str {
        match self {
            EqLevel::Copy => "copy",
            EqLevel::Logical => "logical",
            EqLevel::Structural => "structural",
        }
    }
}

impl fmt::Display for EqLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EqLevel {
    type Err = Error;

    /// Lower-case names only.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "copy" => Ok(EqLevel::Copy),
            "logical" => Ok(EqLevel::Logical),
            "structural" => Ok(EqLevel::Structural),
            other => Err(Error::InvalidParameter(format!(
                "unknown equivalence level `{other}` (expected copy|logical|structural)"
            ))),
        }
    }
}

/// Canonical fingerprint of a formula at one equivalence level.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EqKey {
    pub level: EqLevel,
    pub fingerprint: String,
}

impl Serialize for EqKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.fingerprint)
    }
}

pub fn fingerprint(ast: &NormalizedAst, level: EqLevel) -> EqKey {
    let mut fingerprint = String::new();
    write_node(ast, level, &mut fingerprint);
    EqKey { level, fingerprint }
}

fn write_coord(c: Coord, level: EqLevel, out: &mut String) {
    match (c, level) {
        (Coord::Abs(v), EqLevel::Copy) => write!(out, "a{v}").unwrap(),
        (Coord::Abs(_), _) => out.push_str("a#"),
        (Coord::Rel(d), _) => write!(out, "r{d}").unwrap(),
    }
}

fn write_ref(r: &CellRef, level: EqLevel, out: &mut String) {
    if level == EqLevel::Structural {
        out.push_str("ref");
        return;
    }
    out.push_str("ref(");
    write_coord(r.row, level, out);
    out.push(',');
    write_coord(r.col, level, out);
    out.push(')');
}

fn write_node(e: &Expr, level: EqLevel, out: &mut String) {
    match e {
        Expr::Number { value } => match level {
            EqLevel::Copy => write!(out, "num({})", format_number(*value)).unwrap(),
            _ => out.push_str("const"),
        },
        Expr::Text { value } => match level {
            EqLevel::Copy => write!(out, "str({value:?})").unwrap(),
            _ => out.push_str("const"),
        },
        Expr::Ref { cell } => write_ref(cell, level, out),
        Expr::Range { start, end } => {
            out.push_str("range");
            if level != EqLevel::Structural {
                out.push('(');
                write_ref(start, level, out);
                out.push(',');
                write_ref(end, level, out);
                out.push(')');
            }
        }
        Expr::Call { name, args } => {
            write!(out, "call:{name}(").unwrap();
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_node(a, level, out);
            }
            out.push(')');
        }
        Expr::Binary { op, lhs, rhs } => {
            write!(out, "op{}(", op.symbol()).unwrap();
            write_node(lhs, level, out);
            out.push(',');
            write_node(rhs, level, out);
            out.push(')');
        }
        Expr::Unary {
            op: UnaryOp::Neg,
            operand,
        } => {
            out.push_str("neg(");
            write_node(operand, level, out);
            out.push(')');
        }
    }
}

/// Formula cells sharing one key at one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogicalArea {
    pub level: EqLevel,
    pub key: EqKey,
    /// Row-major.
    pub members: Vec<CellAddr>,
}

/// The logical areas of one sheet at one level; together they cover every
/// parsed formula cell exactly once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub level: EqLevel,
    pub areas: Vec<LogicalArea>,
}

impl Partition {
    /// Area index for each member cell.
    pub fn owner_map(&self) -> BTreeMap<CellAddr, usize> {
        self.areas
            .iter()
            .enumerate()
            .flat_map(|(i, a)| a.members.iter().map(move |m| (*m, i)))
            .collect()
    }
}

/// Groups formula cells by key; areas ordered by their first member.
pub fn logical_areas(sheet: &ParsedSheet, level: EqLevel) -> Partition {
    let mut index: BTreeMap<EqKey, usize> = BTreeMap::new();
    let mut areas: Vec<LogicalArea> = Vec::new();
    for (addr, ast) in sheet.formulas() {
        let key = fingerprint(ast, level);
        match index.get(&key) {
            Some(&i) => areas[i].members.push(addr),
            None => {
                index.insert(key.clone(), areas.len());
                areas.push(LogicalArea {
                    level,
                    key,
                    members: vec![addr],
                });
            }
        }
    }
    Partition { level, areas }
}

/// How one coarse area breaks up at the finer level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaSplit {
    pub key: EqKey,
    pub members: Vec<CellAddr>,
    /// Member lists of the fine areas inside this coarse area, in area order.
    pub parts: Vec<Vec<CellAddr>>,
    /// More than one fine area: a candidate hot-spot.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffReport {
    pub fine_level: EqLevel,
    pub coarse_level: EqLevel,
    pub splits: Vec<AreaSplit>,
}

impl DiffReport {
    pub fn hot_spots(&self) -> impl Iterator<Item = &AreaSplit> {
        self.splits.iter().filter(|s| s.flagged)
    }
}

/// Lists, for each coarse area, the fine areas it splits into.
pub fn compare_partitions(fine: &Partition, coarse: &Partition) -> Result<DiffReport, Error> {
    if fine.level >= coarse.level {
        return Err(Error::LevelMismatch {
            fine: fine.level.to_string(),
            coarse: coarse.level.to_string(),
        });
    }
    let coarse_owner = coarse.owner_map();
    let mut parts: Vec<Vec<Vec<CellAddr>>> = vec![Vec::new(); coarse.areas.len()];
    for area in &fine.areas {
        let mut owners = area.members.iter().map(|m| coarse_owner.get(m));
        let first = owners.next().flatten();
        let Some(&owner) = first else {
            return Err(Error::NotARefinement(format!(
                "{} is missing from the coarse partition",
                area.members[0]
            )));
        };
        if owners.any(|o| o != Some(&owner)) {
            return Err(Error::NotARefinement(format!(
                "fine area starting at {} spans several coarse areas",
                area.members[0]
            )));
        }
        parts[owner].push(area.members.clone());
    }
    let splits = coarse
        .areas
        .iter()
        .zip(parts)
        .map(|(area, parts)| AreaSplit {
            key: area.key.clone(),
            members: area.members.clone(),
            flagged: parts.len() > 1,
            parts,
        })
        .collect();
    Ok(DiffReport {
        fine_level: fine.level,
        coarse_level: coarse.level,
        splits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Literal {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellConstants {
    pub cell: CellAddr,
    pub values: Vec<Literal>,
}

/// Literal constants of every formula that has any, in source order.
/// A minus sign directly applied to a number is folded into it.
pub fn constants_report(sheet: &ParsedSheet) -> Vec<CellConstants> {
    sheet
        .formulas()
        .filter_map(|(cell, ast)| {
            let mut values = Vec::new();
            collect_literals(ast, &mut values);
            (!values.is_empty()).then_some(CellConstants { cell, values })
        })
        .collect()
}

fn negated_number(e: &Expr) -> Option<f64> {
    match e {
        Expr::Number { value } => Some(*value),
        Expr::Unary {
            op: UnaryOp::Neg,
            operand,
        } => negated_number(operand).map(|v| -v),
        _ => None,
    }
}

fn collect_literals(e: &Expr, out: &mut Vec<Literal>) {
    if let Some(v) = negated_number(e) {
        out.push(Literal::Number(v));
        return;
    }
    match e {
        Expr::Text { value } => out.push(Literal::Text(value.clone())),
        Expr::Call { args, .. } => args.iter().for_each(|a| collect_literals(a, out)),
        Expr::Binary { lhs, rhs, .. } => {
            collect_literals(lhs, out);
            collect_literals(rhs, out);
        }
        Expr::Unary { operand, .. } => collect_literals(operand, out),
        _ => {}
    }
}
