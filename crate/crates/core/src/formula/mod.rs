//! Formula parsing and reference handling.

mod ast;
mod parser;

use std::collections::BTreeSet;

pub(crate) use ast::format_number;
pub use ast::{BinaryOp, CellRef, Coord, Expr, NormalizedAst, UnaryOp};
pub use parser::{parse_formula, ParseError};

use crate::error::Error;
use crate::grid::CellAddr;

/// Resolves `r` against the formula's own cell.
pub fn resolve(r: &CellRef, origin: CellAddr) -> Result<CellAddr, Error> {
    r.resolve(origin)
}

/// Every reference and range endpoint in source order.
pub fn references(ast: &Expr) -> Vec<RefItem> {
    let mut out = Vec::new();
    ast.walk(&mut |e| match e {
        Expr::Ref { cell } => out.push(RefItem::Cell(*cell)),
        Expr::Range { start, end } => out.push(RefItem::Range(*start, *end)),
        _ => {}
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefItem {
    Cell(CellRef),
    Range(CellRef, CellRef),
}

impl RefItem {
    /// Addresses covered by the item when evaluated at `origin`; ranges expand
    /// to their full inclusive rectangle.
    pub fn expand(&self, origin: CellAddr) -> Result<Vec<CellAddr>, Error> {
        match self {
            RefItem::Cell(r) => Ok(vec![r.resolve(origin)?]),
            RefItem::Range(a, b) => {
                let a = a.resolve(origin)?;
                let b = b.resolve(origin)?;
                let (r0, r1) = (a.row.min(b.row), a.row.max(b.row));
                let (c0, c1) = (a.col.min(b.col), a.col.max(b.col));
                Ok((r0..=r1)
                    .flat_map(|r| (c0..=c1).map(move |c| CellAddr::new(r, c)))
                    .collect())
            }
        }
    }
}

/// All addresses the formula at `origin` reads, deduplicated.
///
/// Emptiness is not considered here; a range contributes every cell of its
/// rectangle.
pub fn referenced_cells(ast: &Expr, origin: CellAddr) -> Result<BTreeSet<CellAddr>, Error> {
    let mut out = BTreeSet::new();
    for item in references(ast) {
        out.extend(item.expand(origin)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::parse_a1;

    fn a(s: &str) -> CellAddr {
        parse_a1(s).unwrap()
    }

    fn refs(src: &str, origin: &str) -> Vec<String> {
        let e = parse_formula(src, a(origin)).unwrap();
        referenced_cells(&e, a(origin))
            .unwrap()
            .iter()
            .map(ToString::to_string)
            .collect()
    }

    #[test]
    fn resolve_examples() {
        assert_eq!(resolve(&CellRef::relative(-1, -1), a("B2")).unwrap(), a("A1"));
        assert_eq!(resolve(&CellRef::absolute(3, 3), a("Z99")).unwrap(), a("C3"));
        assert_eq!(
            resolve(&CellRef::relative(-5, 0), a("A2")),
            Err(Error::OutOfGrid { row: -3, col: 1 })
        );
    }

    #[test]
    fn referenced_cell_examples() {
        assert_eq!(refs("=A1+B1", "C1"), ["A1", "B1"]);
        assert_eq!(refs("=SUM(A1:B2)", "C3"), ["A1", "B1", "A2", "B2"]);
        assert_eq!(refs("=A1+A1", "B1"), ["A1"]);
        // reversed corners cover the same rectangle
        assert_eq!(refs("=SUM(B2:A1)", "C3"), ["A1", "B1", "A2", "B2"]);
        assert!(refs("=1+2", "A1").is_empty());
    }
}
