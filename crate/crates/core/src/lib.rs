//! Static auditing of spreadsheet programs.
//!
//! A sheet is abstracted into logical areas (formula cells grouped by
//! equivalence level), semantic classes (similar blocks of formula cells)
//! and data modules (single-sink slices of the data-dependency graph).
//! Set-relation graphs render the relations between those sets compactly.
//!
//! ```
//! use sheetaudit::{build_ddg, load_workbook, recover_modules, ParsedSheet, WorkbookFormat};
//!
//! let sheet = load_workbook("1,,\n2,,\n=A1+A2,=A3*2,=A3+1\n", WorkbookFormat::Csv).unwrap();
//! let parsed = ParsedSheet::new(sheet).unwrap();
//! let ddg = build_ddg(&parsed);
//! let modules = recover_modules(&ddg, &ddg.sinks().into_iter().collect()).unwrap();
//! assert_eq!(modules.modules.len(), 3);
//! ```

pub mod classes;
pub mod ddg;
pub mod equivalence;
pub mod error;
pub mod formula;
pub mod grid;
pub mod modules;
pub mod parsed;
pub mod report;
pub mod srg;

pub use classes::{
    grow_classes, neighbor, pattern_outliers, shape_signature, Axis, ClassParams, GeometryParams, Offset,
    OutlierReport, RestKey, SemanticClass, SemanticUnit,
};
pub use ddg::{build_ddg, Acyclicity, Ddg, RefDiagnostic};
pub use equivalence::{
    compare_partitions, constants_report, fingerprint, logical_areas, AreaSplit, CellConstants, DiffReport, EqKey,
    EqLevel, Literal, LogicalArea, Partition,
};
pub use error::{CellParseError, Error};
pub use formula::{parse_formula, BinaryOp, CellRef, Coord, Expr, NormalizedAst, ParseError, UnaryOp};
pub use grid::{
    column_label, load_workbook, parse_a1, sheet_to_json, CellAddr, CellContent, Extent, Sheet, WorkbookFormat,
};
pub use modules::{
    curate, curate_init, exclude_sink, fault_trace_step, module_boundary_check, module_id, recover_modules,
    restore_sink, DataModule, ModuleSet, SinkCuration, TraceStep, Violation, ViolationKind,
};
pub use parsed::ParsedSheet;
pub use report::{Analysis, Diagnostic, Report, SrgRequest};
pub use srg::{
    fisheye_collapse, fisheye_expand, srg_of_modules, srg_of_modules_with, srg_of_units, to_dot, DotStyle, Srg,
    SrgEdge, SrgMode, Vertex, VertexKind,
};
