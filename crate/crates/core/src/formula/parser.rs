//! Recursive-descent parser for the formula grammar:
//!
//! ```text
//! formula := "=" expr
//! expr    := cmp
//! cmp     := add (("=" | "<>" | "<" | "<=" | ">" | ">=") add)*
//! add     := mul (("+" | "-" | "&") mul)*
//! mul     := unary (("*" | "/" | "^") unary)*
//! unary   := "-" unary | atom
//! atom    := number | string | ref | ref ":" ref
//!          | name "(" [expr ("," expr)*] ")" | "(" expr ")"
//! ```
//!
//! Whitespace between tokens is ignored.

use std::fmt;

use serde::Serialize;

use super::ast::{BinaryOp, CellRef, Coord, Expr};
use crate::grid::{decode_column, CellAddr, MAX_ROWS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseError {
    /// Character offset into the formula source.
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at position {}: {}", self.position, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Text(String),
    Word(String),
    Op(BinaryOp),
    Minus,
    LParen,
    RParen,
    Comma,
    Colon,
    End,
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.chars().collect(),
            pos: 0,
            src,
        }
    }

    fn err(&self, position: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            position,
            message: message.into(),
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek_char().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    /// Next token and the position it starts at.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(c) = self.peek_char() else {
            return Ok((Tok::End, start));
        };
        self.pos += 1;
        let tok = match c {
            '+' => Tok::Op(BinaryOp::Add),
            '-' => Tok::Minus,
            '*' => Tok::Op(BinaryOp::Mul),
            '/' => Tok::Op(BinaryOp::Div),
            '^' => Tok::Op(BinaryOp::Pow),
            '&' => Tok::Op(BinaryOp::Concat),
            '=' => Tok::Op(BinaryOp::Eq),
            '<' => match self.peek_char() {
                Some('>') => {
                    self.pos += 1;
                    Tok::Op(BinaryOp::Ne)
                }
                Some('=') => {
                    self.pos += 1;
                    Tok::Op(BinaryOp::Le)
                }
                _ => Tok::Op(BinaryOp::Lt),
            },
            '>' => {
                if self.peek_char() == Some('=') {
                    self.pos += 1;
                    Tok::Op(BinaryOp::Ge)
                } else {
                    Tok::Op(BinaryOp::Gt)
                }
            }
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '"' => self.string(start)?,
            c if c.is_ascii_digit() || c == '.' => self.number(start)?,
            c if c == '$' || c.is_ascii_alphabetic() || c == '_' => {
                while self
                    .peek_char()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || matches!(c, '$' | '_' | '.'))
                {
                    self.pos += 1;
                }
                Tok::Word(self.chars[start..self.pos].iter().collect())
            }
            other => return Err(self.err(start, format!("unexpected character `{other}`"))),
        };
        Ok((tok, start))
    }

    fn string(&mut self, start: usize) -> Result<Tok, ParseError> {
        let mut s = String::new();
        loop {
            match self.peek_char() {
                None => return Err(self.err(start, "unterminated string literal")),
                Some('"') => {
                    self.pos += 1;
                    if self.peek_char() == Some('"') {
                        self.pos += 1;
                        s.push('"');
                    } else {
                        return Ok(Tok::Text(s));
                    }
                }
                Some(c) => {
                    self.pos += 1;
                    s.push(c);
                }
            }
        }
    }

    fn number(&mut self, start: usize) -> Result<Tok, ParseError> {
        // first char (digit or '.') already consumed
        while self.peek_char().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.chars[start] != '.' && self.peek_char() == Some('.') {
            self.pos += 1;
            while self.peek_char().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek_char(), Some('e' | 'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek_char(), Some('+' | '-')) {
                self.pos += 1;
            }
            if self.peek_char().is_some_and(|c| c.is_ascii_digit()) {
                while self.peek_char().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() && text != "." => Ok(Tok::Number(v)),
            _ => Err(self.err(start, format!("malformed number `{text}`"))),
        }
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    tok_pos: usize,
    origin: CellAddr,
}

/// Parses formula source text owned by the cell at `origin`.
///
/// Relative reference components are stored as offsets from `origin`.
pub fn parse_formula(src: &str, origin: CellAddr) -> Result<Expr, ParseError> {
    let mut lexer = Lexer::new(src);
    lexer.skip_ws();
    if lexer.peek_char() != Some('=') {
        return Err(lexer.err(lexer.pos, "formula must start with `=`"));
    }
    lexer.pos += 1;
    let (tok, tok_pos) = lexer.next()?;
    let mut p = Parser {
        lexer,
        tok,
        tok_pos,
        origin,
    };
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.unexpected());
    }
    Ok(e)
}

impl Parser<'_> {
    fn bump(&mut self) -> Result<Tok, ParseError> {
        let (next, pos) = self.lexer.next()?;
        self.tok_pos = pos;
        Ok(std::mem::replace(&mut self.tok, next))
    }

    fn unexpected(&self) -> ParseError {
        let what = match &self.tok {
            Tok::End => "unexpected end of formula".to_string(),
            _ => format!(
                "unexpected `{}`",
                self.lexer.src.chars().skip(self.tok_pos).take(8).collect::<String>()
            ),
        };
        self.lexer.err(self.tok_pos, what)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary_level(1)
    }

    fn binary_level(&mut self, level: u8) -> Result<Expr, ParseError> {
        if level > 3 {
            return self.unary();
        }
        let mut lhs = self.binary_level(level + 1)?;
        loop {
            let op = match self.tok {
                Tok::Op(op) if op.precedence() == level => op,
                Tok::Minus if level == 2 => BinaryOp::Sub,
                _ => break,
            };
            self.bump()?;
            let rhs = self.binary_level(level + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Tok::Minus {
            self.bump()?;
            return Ok(Expr::negate(self.unary()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.tok_pos;
        match self.tok.clone() {
            Tok::Number(value) => {
                self.bump()?;
                Ok(Expr::Number { value })
            }
            Tok::Text(value) => {
                self.bump()?;
                Ok(Expr::Text { value })
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Word(word) => {
                self.bump()?;
                if self.tok == Tok::LParen {
                    return self.call(word, pos);
                }
                let start = self.reference(&word, pos)?;
                if self.tok == Tok::Colon {
                    self.bump()?;
                    let end_pos = self.tok_pos;
                    let Tok::Word(end_word) = self.bump()? else {
                        return Err(self.lexer.err(end_pos, "expected a cell reference after `:`"));
                    };
                    let end = self.reference(&end_word, end_pos)?;
                    return Ok(Expr::Range { start, end });
                }
                Ok(Expr::Ref { cell: start })
            }
            _ => Err(self.unexpected()),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.tok == tok {
            self.bump()?;
            Ok(())
        } else {
            let mut e = self.unexpected();
            e.message = format!("{}; expected {what}", e.message);
            Err(e)
        }
    }

    fn call(&mut self, name: String, pos: usize) -> Result<Expr, ParseError> {
        let valid = name.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') && !name.contains('$');
        if !valid {
            return Err(self.lexer.err(pos, format!("invalid function name `{name}`")));
        }
        self.bump()?; // (
        let mut args = Vec::new();
        if self.tok != Tok::RParen {
            loop {
                args.push(self.expr()?);
                if self.tok == Tok::Comma {
                    self.bump()?;
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)` or `,`")?;
        Ok(Expr::call(&name, args))
    }

    /// Decodes `$?LETTERS$?DIGITS` against the formula's origin.
    fn reference(&self, word: &str, pos: usize) -> Result<CellRef, ParseError> {
        let bad = || self.lexer.err(pos, format!("`{word}` is not a cell reference"));
        let mut rest = word;
        let col_abs = rest.starts_with('$');
        if col_abs {
            rest = &rest[1..];
        }
        let letters_end = rest.find(|c: char| !c.is_ascii_alphabetic()).ok_or_else(bad)?;
        let (letters, mut digits) = rest.split_at(letters_end);
        let row_abs = digits.starts_with('$');
        if row_abs {
            digits = &digits[1..];
        }
        if letters.is_empty()
            || digits.is_empty()
            || digits.starts_with('0')
            || !digits.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        let col =
            decode_column(letters).ok_or_else(|| self.lexer.err(pos, format!("column of `{word}` is out of range")))?;
        let row: u32 = digits
            .parse()
            .ok()
            .filter(|r| *r <= MAX_ROWS)
            .ok_or_else(|| self.lexer.err(pos, format!("row of `{word}` is out of range")))?;
        let axis = |abs: bool, value: u32, origin: u32| {
            if abs {
                Coord::Abs(value)
            } else {
                Coord::Rel(i64::from(value) - i64::from(origin))
            }
        };
        Ok(CellRef {
            row: axis(row_abs, row, self.origin.row),
            col: axis(col_abs, col, self.origin.col),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::parse_a1;

    fn at(src: &str, origin: &str) -> Result<Expr, ParseError> {
        parse_formula(src, parse_a1(origin).unwrap())
    }

    #[test]
    fn plain_refs_become_offsets() {
        let e = at("=A1+B1", "C1").unwrap();
        assert_eq!(
            e,
            Expr::binary(
                BinaryOp::Add,
                Expr::cell(CellRef::relative(0, -2)),
                Expr::cell(CellRef::relative(0, -1))
            )
        );
    }

    #[test]
    fn mixed_range_in_call() {
        let e = at("=SUM($C$3:C5)*2", "D4").unwrap();
        let expected = Expr::binary(
            BinaryOp::Mul,
            Expr::call(
                "SUM",
                vec![Expr::Range {
                    start: CellRef::absolute(3, 3),
                    end: CellRef::relative(1, -1),
                }],
            ),
            Expr::number(2.0),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn mixed_axis_modes() {
        let e = at("=$A1+A$1", "B2").unwrap();
        let Expr::Binary { lhs, rhs, .. } = e else { panic!() };
        assert_eq!(
            *lhs,
            Expr::cell(CellRef {
                row: Coord::Rel(-1),
                col: Coord::Abs(1)
            })
        );
        assert_eq!(
            *rhs,
            Expr::cell(CellRef {
                row: Coord::Abs(1),
                col: Coord::Rel(-1)
            })
        );
    }

    #[test]
    fn errors_carry_positions() {
        let e = at("=)", "A1").unwrap_err();
        assert_eq!(e.position, 1);
        assert_eq!(at("A1+1", "A1").unwrap_err().position, 0);
        assert!(at("=1+", "A1").is_err());
        assert!(at("=SUM(1,", "A1").is_err());
        assert!(at("=\"abc", "A1").is_err());
        assert!(at("=foo", "A1").is_err());
        assert!(at("=A1 B1", "A1").is_err());
        assert!(at("=A1:3", "A1").is_err());
        assert!(at("=+1", "A1").is_err());
        assert!(at("=1#", "A1").is_err());
        assert!(at("=XFE1", "A1").is_err());
    }

    #[test]
    fn precedence_and_associativity() {
        // comparison binds loosest; * / ^ share a level and associate left
        let e = at("=1+2*3^4=5", "A1").unwrap();
        assert_eq!(e.to_string(), "1+2*3^4=5");
        let Expr::Binary {
            op: BinaryOp::Eq, lhs, ..
        } = &e
        else {
            panic!()
        };
        let Expr::Binary {
            op: BinaryOp::Add, rhs, ..
        } = lhs.as_ref()
        else {
            panic!()
        };
        let Expr::Binary {
            op: BinaryOp::Pow,
            lhs: inner,
            ..
        } = rhs.as_ref()
        else {
            panic!()
        };
        assert!(matches!(inner.as_ref(), Expr::Binary { op: BinaryOp::Mul, .. }));
        assert_eq!(at("=1-(2-3)", "A1").unwrap().to_string(), "1-(2-3)");
        assert_eq!(at("=(1-2)-3", "A1").unwrap().to_string(), "1-2-3");
    }

    #[test]
    fn unary_minus_and_comparisons() {
        let e = at("=IF(A1>=0,-1,\"x\"\"y\")&B1<>C1", "D1").unwrap();
        assert_eq!(e.to_string(), "IF(RC[-3]>=0,-1,\"x\"\"y\")&RC[-2]<>RC[-1]");
        assert_eq!(at("=--1", "A1").unwrap(), Expr::negate(Expr::negate(Expr::number(1.0))));
        assert_eq!(at("=2<=3", "A1").unwrap().to_string(), "2<=3");
    }

    #[test]
    fn whitespace_and_case_insensitive() {
        let a = at("= sum ( a1 : b2 , 1.5e2 ) ", "C3").unwrap();
        let b = at("=SUM(A1:B2,150)", "C3").unwrap();
        assert_eq!(a, b);
        assert_eq!(at("=NOW()", "A1").unwrap(), Expr::call("NOW", vec![]));
        assert_eq!(
            at("=LOG10(.5)", "A1").unwrap(),
            Expr::call("LOG10", vec![Expr::number(0.5)])
        );
    }

    #[test]
    fn a1_rendering_round_trips() {
        for (src, origin) in [
            ("=SUM($C$3:C5)*2", "D4"),
            ("=-(A1+B$2)^2&\"q\"", "F9"),
            ("=IF(A1>0,1,-1)", "B1"),
            ("=1-(2-3)", "A1"),
        ] {
            let o = parse_a1(origin).unwrap();
            let e = parse_formula(src, o).unwrap();
            assert_eq!(parse_formula(&e.to_a1(o).unwrap(), o).unwrap(), e, "{src}");
        }
    }
}
