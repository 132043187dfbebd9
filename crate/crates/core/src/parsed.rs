use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::error::{CellParseError, Error};
use crate::formula::{parse_formula, Expr};
use crate::grid::{CellAddr, CellContent, Sheet};

/// A sheet with every formula parsed once.
///
/// Cells whose formula fails to parse are kept in `parse_errors` and are
/// otherwise treated as opaque non-formula cells.
#[derive(Debug, Clone)]
pub struct ParsedSheet {
    sheet: Sheet,
    formulas: BTreeMap<CellAddr, Expr>,
    parse_errors: Vec<CellParseError>,
    digest: String,
}

impl ParsedSheet {
    /// Fails with every parse error if any formula is malformed.
    pub fn new(sheet: Sheet) -> Result<Self, Error> {
        let parsed = Self::lenient(sheet);
        if parsed.parse_errors.is_empty() {
            Ok(parsed)
        } else {
            Err(Error::Parse(parsed.parse_errors))
        }
    }

    pub fn lenient(sheet: Sheet) -> Self {
        let mut formulas = BTreeMap::new();
        let mut parse_errors = Vec::new();
        for (addr, content) in sheet.cells() {
            if let CellContent::Formula(src) = content {
                match parse_formula(src, addr) {
                    Ok(ast) => {
                        formulas.insert(addr, ast);
                    }
                    Err(error) => parse_errors.push(CellParseError { cell: addr, error }),
                }
            }
        }
        let digest = Sha256::digest(sheet.to_csv().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Self {
            sheet,
            formulas,
            parse_errors,
            digest,
        }
    }

    pub fn sheet(&self) -> &Sheet {
        &self.sheet
    }

    /// Parsed formula at `addr`, if the cell holds a well-formed formula.
    pub fn formula(&self, addr: CellAddr) -> Option<&Expr> {
        self.formulas.get(&addr)
    }

    /// Well-formed formula cells in row-major order.
    pub fn formulas(&self) -> impl Iterator<Item = (CellAddr, &Expr)> {
        self.formulas.iter().map(|(a, e)| (*a, e))
    }

    pub fn formula_count(&self) -> usize {
        self.formulas.len()
    }

    pub fn parse_errors(&self) -> &[CellParseError] {
        &self.parse_errors
    }

    /// SHA-256 of the canonical CSV rendering; equal sheets share a digest
    /// regardless of input format.
    pub fn digest(&self) -> &str {
        &self.digest
    }
}
