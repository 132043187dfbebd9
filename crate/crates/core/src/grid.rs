//! Workbook model: cell addresses, cell contents and single-sheet ingestion
//! from CSV and JSON.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Largest column index accepted (XFD).
pub const MAX_COLS: u32 = 16_384;
/// Largest row index accepted.
pub const MAX_ROWS: u32 = 1_048_576;

/// A 1-based cell coordinate.
///
/// Ordering is row-major: row first, then column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellAddr {
    pub row: u32,
    pub col: u32,
}

impl CellAddr {
    /// Panics if either coordinate is zero.
    pub fn new(row: u32, col: u32) -> Self {
        assert!(row >= 1 && col >= 1, "cell coordinates are 1-based");
        Self { row, col }
    }

    pub fn checked(row: i64, col: i64) -> Option<Self> {
        if (1..=MAX_ROWS as i64).contains(&row) && (1..=MAX_COLS as i64).contains(&col) {
            Some(Self {
                row: row as u32,
                col: col as u32,
            })
        } else {
            None
        }
    }

    pub fn offset(self, d_row: i64, d_col: i64) -> Option<Self> {
        Self::checked(self.row as i64 + d_row, self.col as i64 + d_col)
    }

    pub fn manhattan(self, other: CellAddr) -> u32 {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

/// Column label for a 1-based column index: 1 → "A", 27 → "AA".
pub fn column_label(col: u32) -> String {
    let mut n = col;
    let mut out = Vec::new();
    while n > 0 {
        let rem = ((n - 1) % 26) as u8;
        out.push(b'A' + rem);
        n = (n - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Decodes bijective base-26 column letters. Letters must be ASCII; case is ignored.
pub(crate) fn decode_column(letters: &str) -> Option<u32> {
    let mut col: u64 = 0;
    for b in letters.bytes() {
        if !b.is_ascii_alphabetic() {
            return None;
        }
        col = col * 26 + u64::from(b.to_ascii_uppercase() - b'A' + 1);
        if col > u64::from(MAX_COLS) {
            return None;
        }
    }
    if col == 0 {
        None
    } else {
        Some(col as u32)
    }
}

/// Parses an A1-style address such as `B7` or `aa10`.
pub fn parse_a1(text: &str) -> Result<CellAddr, Error> {
    let malformed = || Error::MalformedAddress(text.to_string());
    let split = text.find(|c: char| !c.is_ascii_alphabetic()).ok_or_else(malformed)?;
    let (letters, digits) = text.split_at(split);
    if letters.is_empty() || digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit())
    {
        return Err(malformed());
    }
    let col = decode_column(letters).ok_or_else(malformed)?;
    let row: u32 = digits.parse().map_err(|_| malformed())?;
    if row > MAX_ROWS {
        return Err(malformed());
    }
    Ok(CellAddr { row, col })
}

impl fmt::Display for CellAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", column_label(self.col), self.row)
    }
}

impl FromStr for CellAddr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_a1(s)
    }
}

impl Serialize for CellAddr {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CellAddr {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_a1(&s).map_err(serde::de::Error::custom)
    }
}

/// What a cell holds. Sheets never store `Empty`; absence encodes emptiness.
#[derive(Debug, Clone, PartialEq)]
pub enum CellContent {
    Empty,
    Number(f64),
    Text(String),
    /// Formula source, including the leading `=`.
    Formula(String),
}

impl CellContent {
    /// Classifies one CSV field (or JSON cell string).
    pub fn from_field(field: &str) -> Self {
        if field.is_empty() {
            CellContent::Empty
        } else if field.starts_with('=') {
            CellContent::Formula(field.to_string())
        } else if let Some(n) = parse_decimal(field) {
            CellContent::Number(n)
        } else {
            CellContent::Text(field.to_string())
        }
    }

    /// The field text that reloads to this content.
    pub fn to_field(&self) -> String {
        match self {
            CellContent::Empty => String::new(),
            CellContent::Number(n) => n.to_string(),
            CellContent::Text(t) => t.clone(),
            CellContent::Formula(f) => f.clone(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CellContent::Empty => "empty",
            CellContent::Number(_) => "number",
            CellContent::Text(_) => "text",
            CellContent::Formula(_) => "formula",
        }
    }

    pub fn is_formula(&self) -> bool {
        matches!(self, CellContent::Formula(_))
    }
}

/// Optional sign, digits with optional fraction (or a bare fraction), optional exponent.
fn parse_decimal(field: &str) -> Option<f64> {
    let b = field.as_bytes();
    let mut i = 0;
    if matches!(b.first(), Some(b'+' | b'-')) {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return None;
    }
    if i < b.len() && matches!(b[i], b'e' | b'E') {
        i += 1;
        if i < b.len() && matches!(b[i], b'+' | b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return None;
        }
    }
    if i != b.len() {
        return None;
    }
    field.parse::<f64>().ok().filter(|n| n.is_finite())
}

/// Inclusive bounding box of the non-empty cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Extent {
    pub top_left: CellAddr,
    pub bottom_right: CellAddr,
}

impl Extent {
    pub fn contains(&self, a: CellAddr) -> bool {
        (self.top_left.row..=self.bottom_right.row).contains(&a.row)
            && (self.top_left.col..=self.bottom_right.col).contains(&a.col)
    }
}

/// A single worksheet. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Sheet {
    name: String,
    cells: BTreeMap<CellAddr, CellContent>,
}

impl Sheet {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            cells: BTreeMap::new(),
        }
    }

    /// Builds a sheet from `(address, content)` pairs; `Empty` contents are dropped.
    pub fn from_cells<I>(name: impl Into<String>, cells: I) -> Self
    where
        I: IntoIterator<Item = (CellAddr, CellContent)>,
    {
        let cells = cells.into_iter().filter(|(_, c)| *c != CellContent::Empty).collect();
        Self {
            name: name.into(),
            cells,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn get(&self, addr: CellAddr) -> Option<&CellContent> {
        self.cells.get(&addr)
    }

    /// Non-empty cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (CellAddr, &CellContent)> {
        self.cells.iter().map(|(a, c)| (*a, c))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn extent(&self) -> Option<Extent> {
        let mut it = self.cells.keys();
        let first = *it.next()?;
        let (mut top, mut left, mut bottom, mut right) = (first.row, first.col, first.row, first.col);
        for a in self.cells.keys() {
            top = top.min(a.row);
            bottom = bottom.max(a.row);
            left = left.min(a.col);
            right = right.max(a.col);
        }
        Some(Extent {
            top_left: CellAddr::new(top, left),
            bottom_right: CellAddr::new(bottom, right),
        })
    }

    /// Formula cells in row-major order.
    pub fn formula_cells(&self) -> Vec<CellAddr> {
        self.cells
            .iter()
            .filter(|(_, c)| c.is_formula())
            .map(|(a, _)| *a)
            .collect()
    }

    /// Canonical CSV: one record per row up to the last non-empty row, each
    /// record as wide as that row's last non-empty cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let Some(extent) = self.extent() else {
            return out;
        };
        let mut rows = self.cells.iter().peekable();
        for row in 1..=extent.bottom_right.row {
            let mut fields: Vec<String> = Vec::new();
            while let Some((addr, content)) = rows.next_if(|(a, _)| a.row == row) {
                while fields.len() + 1 < addr.col as usize {
                    fields.push(String::new());
                }
                fields.push(quote_csv(&content.to_field()));
            }
            out.push_str(&fields.join(","));
            out.push_str("\r\n");
        }
        out
    }
}

fn quote_csv(field: &str) -> String {
    if field.contains([',', '"', '\r', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkbookFormat {
    Csv,
    Json,
}

impl FromStr for WorkbookFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(WorkbookFormat::Csv),
            "json" => Ok(WorkbookFormat::Json),
            other => Err(Error::InvalidParameter(format!("unknown workbook format `{other}`"))),
        }
    }
}

/// Sheet name given to CSV input, which carries none.
pub const DEFAULT_SHEET_NAME: &str = "Sheet1";

pub fn load_workbook(source: &str, format: WorkbookFormat) -> Result<Sheet, Error> {
    match format {
        WorkbookFormat::Csv => load_csv(source, DEFAULT_SHEET_NAME),
        WorkbookFormat::Json => load_json(source),
    }
}

/// Splits RFC-4180 text into records. Both CRLF and bare LF end a record; a
/// final line terminator does not start another record.
fn csv_records(source: &str) -> Result<Vec<Vec<String>>, Error> {
    let bad = |msg: &str, line: usize| Error::MalformedWorkbook(format!("CSV line {line}: {msg}"));
    let mut records = Vec::new();
    let mut record = Vec::new();
    let mut field = String::new();
    let mut chars = source.chars().peekable();
    let mut line = 1;
    let mut at_field_start = true;
    let mut pending = false;

    while let Some(c) = chars.next() {
        pending = true;
        match c {
            '"' if at_field_start => {
                let start_line = line;
                loop {
                    match chars.next() {
                        None => return Err(bad("unterminated quoted field", start_line)),
                        Some('"') => {
                            if chars.peek() == Some(&'"') {
                                chars.next();
                                field.push('"');
                            } else {
                                break;
                            }
                        }
                        Some(ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            field.push(ch);
                        }
                    }
                }
                match chars.peek() {
                    None | Some(',') | Some('\r') | Some('\n') => {}
                    Some(_) => return Err(bad("text after closing quote", line)),
                }
                at_field_start = false;
            }
            '"' => return Err(bad("quote inside unquoted field", line)),
            ',' => {
                record.push(std::mem::take(&mut field));
                at_field_start = true;
            }
            '\r' | '\n' => {
                if c == '\r' {
                    if chars.peek() == Some(&'\n') {
                        chars.next();
                    } else {
                        return Err(bad("bare carriage return", line));
                    }
                }
                record.push(std::mem::take(&mut field));
                records.push(std::mem::take(&mut record));
                at_field_start = true;
                pending = false;
                line += 1;
            }
            ch => {
                field.push(ch);
                at_field_start = false;
            }
        }
    }
    if pending {
        record.push(field);
        records.push(record);
    }
    Ok(records)
}

fn load_csv(source: &str, name: &str) -> Result<Sheet, Error> {
    let records = csv_records(source)?;
    let mut cells = BTreeMap::new();
    for (r, record) in records.iter().enumerate() {
        for (c, field) in record.iter().enumerate() {
            let content = CellContent::from_field(field);
            if content == CellContent::Empty {
                continue;
            }
            let addr = CellAddr::checked(r as i64 + 1, c as i64 + 1).ok_or_else(|| {
                Error::MalformedWorkbook(format!(
                    "cell at row {}, column {} exceeds the {MAX_ROWS}x{MAX_COLS} grid",
                    r + 1,
                    c + 1
                ))
            })?;
            cells.insert(addr, content);
        }
    }
    Ok(Sheet {
        name: name.to_string(),
        cells,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonSheet {
    name: String,
    cells: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonWorkbook {
    Sheet(JsonSheet),
    Wrapped { sheets: Vec<JsonSheet> },
}

fn load_json(source: &str) -> Result<Sheet, Error> {
    let parsed: JsonWorkbook =
        serde_json::from_str(source).map_err(|e| Error::MalformedWorkbook(format!("JSON: {e}")))?;
    let sheet = match parsed {
        JsonWorkbook::Sheet(s) => s,
        JsonWorkbook::Wrapped { mut sheets } => match sheets.len() {
            0 => return Err(Error::MalformedWorkbook("workbook has no sheets".into())),
            1 => sheets.remove(0),
            n => return Err(Error::MultipleSheets(n)),
        },
    };
    let mut cells = BTreeMap::new();
    for (key, value) in &sheet.cells {
        let addr = parse_a1(key).map_err(|_| Error::MalformedWorkbook(format!("bad cell address `{key}`")))?;
        let content = CellContent::from_field(value);
        if content != CellContent::Empty {
            cells.insert(addr, content);
        }
    }
    Ok(Sheet {
        name: sheet.name,
        cells,
    })
}

/// Serializes to the JSON workbook form accepted by [`load_workbook`].
pub fn sheet_to_json(sheet: &Sheet) -> serde_json::Value {
    let cells: serde_json::Map<String, serde_json::Value> = sheet
        .cells()
        .map(|(a, c)| (a.to_string(), serde_json::Value::String(c.to_field())))
        .collect();
    serde_json::json!({ "name": sheet.name(), "cells": cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(s: &str) -> CellAddr {
        parse_a1(s).unwrap()
    }

    #[test]
    fn parse_origin() {
        assert_eq!(addr("A1"), CellAddr::new(1, 1));
    }

    #[test]
    fn parse_two_letter_column() {
        // brute-force enumeration of labels A..AZ
        let mut labels = Vec::new();
        for first in std::iter::once(None).chain((b'A'..=b'Z').map(Some)) {
            for second in b'A'..=b'Z' {
                let mut s = String::new();
                if let Some(f) = first {
                    s.push(f as char);
                }
                s.push(second as char);
                labels.push(s);
            }
        }
        let aa = labels.iter().position(|l| l == "AA").unwrap() as u32 + 1;
        assert_eq!(aa, 27);
        assert_eq!(addr("AA10"), CellAddr::new(10, aa));
        for (i, l) in labels.iter().enumerate() {
            assert_eq!(column_label(i as u32 + 1), *l);
        }
    }

    #[test]
    fn lower_case_accepted() {
        assert_eq!(addr("ab3"), addr("AB3"));
    }

    #[test]
    fn malformed_addresses() {
        for bad in [
            "1A", "", "A", "7", "A0", "A01", "A-1", "$A$1", "A1B", "XFE1", "A1048577",
        ] {
            assert!(
                matches!(parse_a1(bad), Err(Error::MalformedAddress(_))),
                "{bad} accepted"
            );
        }
        assert_eq!(addr("XFD1048576"), CellAddr::new(MAX_ROWS, MAX_COLS));
    }

    #[test]
    fn csv_direct_mapping() {
        let s = load_workbook("1,2,=A1+B1", WorkbookFormat::Csv).unwrap();
        assert_eq!(s.get(addr("A1")), Some(&CellContent::Number(1.0)));
        assert_eq!(s.get(addr("B1")), Some(&CellContent::Number(2.0)));
        assert_eq!(s.get(addr("C1")), Some(&CellContent::Formula("=A1+B1".into())));
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn csv_empty_fields_are_absent() {
        let s = load_workbook(",,=C1", WorkbookFormat::Csv).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.get(addr("A1")).is_none());
        assert!(s.get(addr("C1")).unwrap().is_formula());
    }

    #[test]
    fn csv_unbalanced_quote() {
        let err = load_workbook("1,\"abc\n2,3", WorkbookFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::MalformedWorkbook(_)));
        let err = load_workbook("a\"b", WorkbookFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::MalformedWorkbook(_)));
    }

    #[test]
    fn csv_blank_lines_keep_row_numbers() {
        let s = load_workbook("1\n\n=A1\n", WorkbookFormat::Csv).unwrap();
        assert!(s.get(addr("A3")).unwrap().is_formula());
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn csv_quoted_fields() {
        let s = load_workbook("\"a,b\",\"=\"\"x\"\"&A1\"\r\n", WorkbookFormat::Csv).unwrap();
        assert_eq!(s.get(addr("A1")), Some(&CellContent::Text("a,b".into())));
        assert_eq!(s.get(addr("B1")), Some(&CellContent::Formula("=\"x\"&A1".into())));
    }

    #[test]
    fn number_detection() {
        for n in ["1", "-2", "+3.5", ".5", "5.", "1e3", "-1.5E-2"] {
            assert!(matches!(CellContent::from_field(n), CellContent::Number(_)), "{n}");
        }
        for t in ["inf", "NaN", "1e", "e3", "1,5", " 1", "0x10", "-", ".", "1e999"] {
            assert!(matches!(CellContent::from_field(t), CellContent::Text(_)), "{t}");
        }
    }

    #[test]
    fn json_single_sheet() {
        let s = load_workbook(
            r#"{"name":"S","cells":{"A1":"1","b1":"=A1*2","C1":""}}"#,
            WorkbookFormat::Json,
        )
        .unwrap();
        assert_eq!(s.name(), "S");
        assert_eq!(s.len(), 2);
        assert_eq!(s.formula_cells(), vec![addr("B1")]);
    }

    #[test]
    fn json_wrapper_and_multiple_sheets() {
        let one = r#"{"sheets":[{"name":"S","cells":{"A1":"=1"}}]}"#;
        assert_eq!(load_workbook(one, WorkbookFormat::Json).unwrap().len(), 1);
        let two = r#"{"sheets":[{"name":"S","cells":{}},{"name":"T","cells":{}}]}"#;
        assert!(matches!(
            load_workbook(two, WorkbookFormat::Json),
            Err(Error::MultipleSheets(2))
        ));
        assert!(matches!(
            load_workbook("{\"name\":", WorkbookFormat::Json),
            Err(Error::MalformedWorkbook(_))
        ));
    }

    #[test]
    fn formula_cells_row_major() {
        let s = load_workbook("1,2,=A1+B1\n3,4,=A2+B2\n,,=C1+C2", WorkbookFormat::Csv).unwrap();
        assert_eq!(s.formula_cells(), vec![addr("C1"), addr("C2"), addr("C3")]);
        assert!(Sheet::new("x").formula_cells().is_empty());
        let lone = load_workbook("42", WorkbookFormat::Csv).unwrap();
        assert!(lone.formula_cells().is_empty());
    }

    #[test]
    fn extent_bounds() {
        let s = load_workbook(",,\n,x,\n,,=1", WorkbookFormat::Csv).unwrap();
        let e = s.extent().unwrap();
        assert_eq!(e.top_left, addr("B2"));
        assert_eq!(e.bottom_right, addr("C3"));
        assert!(Sheet::new("x").extent().is_none());
    }

    #[test]
    fn oversized_grid_rejected() {
        let wide = ",".repeat(MAX_COLS as usize) + "x";
        assert!(matches!(
            load_workbook(&wide, WorkbookFormat::Csv),
            Err(Error::MalformedWorkbook(_))
        ));
    }
}
