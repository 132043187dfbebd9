use thiserror::Error;

use crate::formula::ParseError;
use crate::grid::CellAddr;

/// A formula that failed to parse, with the cell that holds it.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct CellParseError {
    pub cell: CellAddr,
    #[serde(flatten)]
    pub error: ParseError,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed cell address `{0}`")]
    MalformedAddress(String),
    #[error("malformed workbook: {0}")]
    MalformedWorkbook(String),
    #[error("workbook contains {0} sheets; exactly one is supported")]
    MultipleSheets(usize),
    #[error("{} formula(s) failed to parse, first at {}: {}", .0.len(), .0[0].cell, .0[0].error)]
    Parse(Vec<CellParseError>),
    #[error("reference resolves outside the grid (row {row}, column {col})")]
    OutOfGrid { row: i64, col: i64 },
    #[error("fine level {fine} is not finer than coarse level {coarse}")]
    LevelMismatch { fine: String, coarse: String },
    #[error("partitions are not nested: {0}")]
    NotARefinement(String),
    #[error("class has {0} unit(s); at least 3 are needed to detect a pattern")]
    TooFewUnits(usize),
    #[error("data-dependency graph has a cycle through {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    CyclicDdg(Vec<CellAddr>),
    #[error("{0} is not a current sink")]
    NotASink(CellAddr),
    #[error("{0} is not excluded")]
    NotExcluded(CellAddr),
    #[error("{cell} cannot be restored while the exclusion of {dependent} depends on it")]
    RestoreBlocked { cell: CellAddr, dependent: CellAddr },
    #[error("unknown module `{0}`")]
    UnknownModule(String),
    #[error("vertex `{0}` is not a module")]
    NotAModuleVertex(String),
    #[error("vertex `{0}` is not an expanded module")]
    NotExpanded(String),
    #[error("input was produced from a different sheet: {0}")]
    SheetMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// Stable machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MalformedAddress(_) => "MalformedAddress",
            Error::MalformedWorkbook(_) => "MalformedWorkbook",
            Error::MultipleSheets(_) => "MultipleSheets",
            Error::Parse(_) => "ParseError",
            Error::OutOfGrid { .. } => "OutOfGrid",
            Error::LevelMismatch { .. } => "LevelMismatch",
            Error::NotARefinement(_) => "NotARefinement",
            Error::TooFewUnits(_) => "TooFewUnits",
            Error::CyclicDdg(_) => "CyclicDDG",
            Error::NotASink(_) => "NotASink",
            Error::NotExcluded(_) => "NotExcluded",
            Error::RestoreBlocked { .. } => "RestoreBlocked",
            Error::UnknownModule(_) => "UnknownModule",
            Error::NotAModuleVertex(_) => "NotAModuleVertex",
            Error::NotExpanded(_) => "NotExpanded",
            Error::SheetMismatch(_) => "SheetMismatch",
            Error::InvalidParameter(_) => "InvalidParameter",
        }
    }
}
