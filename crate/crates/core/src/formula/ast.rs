use std::fmt;

use serde::Serialize;

use crate::error::Error;
use crate::grid::{column_label, CellAddr, MAX_COLS, MAX_ROWS};

/// One axis of a cell reference.
///
/// `Rel` holds a signed offset from the cell that owns the formula, so a
/// formula copied to another cell keeps identical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum Coord {
    Abs(u32),
    Rel(i64),
}

impl Coord {
    fn resolve(self, origin: u32) -> i64 {
        match self {
            Coord::Abs(v) => i64::from(v),
            Coord::Rel(d) => i64::from(origin) + d,
        }
    }

    pub fn is_absolute(self) -> bool {
        matches!(self, Coord::Abs(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CellRef {
    pub row: Coord,
    pub col: Coord,
}

impl CellRef {
    pub fn relative(d_row: i64, d_col: i64) -> Self {
        Self {
            row: Coord::Rel(d_row),
            col: Coord::Rel(d_col),
        }
    }

    pub fn absolute(row: u32, col: u32) -> Self {
        Self {
            row: Coord::Abs(row),
            col: Coord::Abs(col),
        }
    }

    /// The referenced address when the formula lives at `origin`.
    pub fn resolve(&self, origin: CellAddr) -> Result<CellAddr, Error> {
        let row = self.row.resolve(origin.row);
        let col = self.col.resolve(origin.col);
        if row < 1 || col < 1 || row > i64::from(MAX_ROWS) || col > i64::from(MAX_COLS) {
            return Err(Error::OutOfGrid { row, col });
        }
        Ok(CellAddr::new(row as u32, col as u32))
    }

    /// A1 text for this reference seen from `origin`, with `$` on absolute axes.
    pub fn to_a1(&self, origin: CellAddr) -> Result<String, Error> {
        let target = self.resolve(origin)?;
        let mut s = String::new();
        if self.col.is_absolute() {
            s.push('$');
        }
        s.push_str(&column_label(target.col));
        if self.row.is_absolute() {
            s.push('$');
        }
        s.push_str(&target.row.to_string());
        Ok(s)
    }
}

fn fmt_axis(f: &mut fmt::Formatter<'_>, letter: char, c: Coord) -> fmt::Result {
    match c {
        Coord::Abs(v) => write!(f, "{letter}{v}"),
        Coord::Rel(0) => write!(f, "{letter}"),
        Coord::Rel(d) => write!(f, "{letter}[{d}]"),
    }
}

/// R1C1 notation: `R[-1]C2`, `RC[3]`.
impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_axis(f, 'R', self.row)?;
        fmt_axis(f, 'C', self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Concat,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
            BinaryOp::Concat => "&",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 1,
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Concat => 2,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Pow => 3,
        }
    }

    pub const ALL: [BinaryOp; 12] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Pow,
        BinaryOp::Concat,
        BinaryOp::Eq,
        BinaryOp::Ne,
        BinaryOp::Lt,
        BinaryOp::Le,
        BinaryOp::Gt,
        BinaryOp::Ge,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum UnaryOp {
    Neg,
}

/// Parsed formula with origin-relative references.
///
/// Children keep source order. Function names are stored upper-case and
/// never interpreted.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Expr {
    Number {
        value: f64,
    },
    Text {
        value: String,
    },
    Ref {
        cell: CellRef,
    },
    Range {
        start: CellRef,
        end: CellRef,
    },
    Call {
        name: String,
        args: Vec<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
}

/// Parser output is already origin-relative; the alias names that guarantee.
pub type NormalizedAst = Expr;

impl Expr {
    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn negate(operand: Expr) -> Self {
        Expr::Unary {
            op: UnaryOp::Neg,
            operand: Box::new(operand),
        }
    }

    pub fn number(value: f64) -> Self {
        Expr::Number { value }
    }

    pub fn cell(cell: CellRef) -> Self {
        Expr::Ref { cell }
    }

    pub fn call(name: &str, args: Vec<Expr>) -> Self {
        Expr::Call {
            name: name.to_ascii_uppercase(),
            args,
        }
    }

    /// Pre-order walk (node before children, children left to right).
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        match self {
            Expr::Call { args, .. } => args.iter().for_each(|a| a.walk(visit)),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.walk(visit);
                rhs.walk(visit);
            }
            Expr::Unary { operand, .. } => operand.walk(visit),
            _ => {}
        }
    }

    /// Renders A1 source text (with leading `=`) for this formula placed at `origin`.
    pub fn to_a1(&self, origin: CellAddr) -> Result<String, Error> {
        let mut out = String::from("=");
        render(self, &mut out, &mut |r: &CellRef, out: &mut String| {
            out.push_str(&r.to_a1(origin)?);
            Ok(())
        })?;
        Ok(out)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => op.precedence(),
            Expr::Unary { .. } => 4,
            _ => 5,
        }
    }
}

fn render(
    e: &Expr,
    out: &mut String,
    cell: &mut dyn FnMut(&CellRef, &mut String) -> Result<(), Error>,
) -> Result<(), Error> {
    match e {
        Expr::Number { value } => out.push_str(&format_number(*value)),
        Expr::Text { value } => {
            out.push('"');
            out.push_str(&value.replace('"', "\"\""));
            out.push('"');
        }
        Expr::Ref { cell: r } => cell(r, out)?,
        Expr::Range { start, end } => {
            cell(start, out)?;
            out.push(':');
            cell(end, out)?;
        }
        Expr::Call { name, args } => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                render(a, out, cell)?;
            }
            out.push(')');
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let wrap_l = lhs.precedence() < p;
            let wrap_r = rhs.precedence() <= p;
            render_wrapped(lhs, wrap_l, out, cell)?;
            out.push_str(op.symbol());
            render_wrapped(rhs, wrap_r, out, cell)?;
        }
        Expr::Unary { operand, .. } => {
            out.push('-');
            let wrap = operand.precedence() < 4;
            render_wrapped(operand, wrap, out, cell)?;
        }
    }
    Ok(())
}

fn render_wrapped(
    e: &Expr,
    wrap: bool,
    out: &mut String,
    cell: &mut dyn FnMut(&CellRef, &mut String) -> Result<(), Error>,
) -> Result<(), Error> {
    if wrap {
        out.push('(');
    }
    render(e, out, cell)?;
    if wrap {
        out.push(')');
    }
    Ok(())
}

/// Shortest text that parses back to the same `f64`; never uses a sign.
pub(crate) fn format_number(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('e') || s.len() <= 17 {
        s
    } else {
        format!("{v:e}")
    }
}

/// Canonical R1C1 rendering without whitespace.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        render(self, &mut out, &mut |r: &CellRef, out: &mut String| {
            out.push_str(&r.to_string());
            Ok(())
        })
        .map_err(|_| fmt::Error)?;
        f.write_str(&out)
    }
}
