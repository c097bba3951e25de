//! Plain-text complex matrix format.
//!
//! ```text
//! hmatrix 1
//! dims <rows> <cols>
//! layout system_slow <d_s> <d_b>     (or: layout none)
//! <re> <im>                           (rows * cols lines, row-major)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Numbers are written
//! in shortest round-trip form, so a write/read cycle is exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hilbert::SpaceLayout;
use crate::linalg::{CMatrix, C64};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub matrix: CMatrix,
    pub layout: Option<SpaceLayout>,
}

pub fn to_string(matrix: &CMatrix, layout: Option<&SpaceLayout>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "hmatrix {FORMAT_VERSION}");
    let _ = writeln!(out, "dims {} {}", matrix.nrows(), matrix.ncols());
    match layout {
        Some(l) => {
            let _ = writeln!(out, "layout system_slow {} {}", l.d_system(), l.d_bath());
        }
        None => out.push_str("layout none\n"),
    }
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            let z = matrix[(i, j)];
            let _ = writeln!(out, "{} {}", z.re, z.im);
        }
    }
    out
}

pub fn write(path: &Path, matrix: &CMatrix, layout: Option<&SpaceLayout>) -> Result<()> {
    std::fs::write(path, to_string(matrix, layout))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<MatrixFile> {
    parse(&std::fs::read_to_string(path)?)
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::MatrixFormat {
        line,
        message: message.into(),
    }
}

fn number<T: std::str::FromStr>(line: usize, token: Option<&str>, what: &str) -> Result<T> {
    token
        .ok_or_else(|| err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| err(line, format!("invalid {what}")))
}

pub fn parse(text: &str) -> Result<MatrixFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (ln, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("hmatrix") {
        return Err(err(ln, "expected 'hmatrix <version>'"));
    }
    let version: u32 = number(ln, tok.next(), "version")?;
    if version != FORMAT_VERSION {
        return Err(err(ln, format!("unsupported version {version}")));
    }

    let (ln, dims) = lines.next().ok_or_else(|| err(ln + 1, "missing dims line"))?;
    let mut tok = dims.split_whitespace();
    if tok.next() != Some("dims") {
        return Err(err(ln, "expected 'dims <rows> <cols>'"));
    }
    let rows: usize = number(ln, tok.next(), "row count")?;
    let cols: usize = number(ln, tok.next(), "column count")?;

    let (ln, layout_line) = lines.next().ok_or_else(|| err(ln + 1, "missing layout line"))?;
    let mut tok = layout_line.split_whitespace();
    if tok.next() != Some("layout") {
        return Err(err(ln, "expected 'layout ...'"));
    }
    let layout = match tok.next() {
        Some("none") => None,
        Some("system_slow") => {
            let ds: usize = number(ln, tok.next(), "d_s")?;
            let db: usize = number(ln, tok.next(), "d_b")?;
            let l = SpaceLayout::new(ds, db).map_err(|e| err(ln, e.to_string()))?;
            if l.d() != rows || rows != cols {
                return Err(err(ln, format!("layout {ds}x{db} does not match a {rows}x{cols} matrix")));
            }
            Some(l)
        }
        other => return Err(err(ln, format!("unknown layout tag {other:?}"))),
    };

    let mut entries = Vec::with_capacity(rows * cols);
    let mut last = ln;
    for (ln, line) in lines {
        last = ln;
        let mut tok = line.split_whitespace();
        let re: f64 = number(ln, tok.next(), "real part")?;
        let im: f64 = number(ln, tok.next(), "imaginary part")?;
        if tok.next().is_some() {
            return Err(err(ln, "expected exactly two numbers"));
        }
        if entries.len() == rows * cols {
            return Err(err(ln, "more entries than dims declare"));
        }
        entries.push(C64::new(re, im));
    }
    if entries.len() != rows * cols {
        return Err(err(last, format!("expected {} entries, found {}", rows * cols, entries.len())));
    }
    Ok(MatrixFile {
        matrix: CMatrix::from_row_slice(rows, cols, &entries),
        layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_small_example() {
        let text = "# equally spaced\nhmatrix 1\ndims 2 2\nlayout none\n0 0\n0.5 -1\n0.5 1\n2 0\n";
        let f = parse(text).unwrap();
        assert_eq!(f.layout, None);
        assert_eq!(f.matrix[(0, 1)], C64::new(0.5, -1.0));
        assert_eq!(f.matrix[(1, 1)], C64::new(2.0, 0.0));
    }

    #[test]
    fn reports_line_numbers() {
        let text = "hmatrix 1\ndims 1 2\nlayout none\n0 0\n1 x\n";
        match parse(text) {
            Err(Error::MatrixFormat { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("hmatrix 1\ndims 2 2\nlayout none\n0 0\n"), Err(Error::MatrixFormat { line: 4, .. })));
        assert!(matches!(parse("hmatrix 1\ndims 2 2\nlayout system_slow 3 1\n"), Err(Error::MatrixFormat { line: 3, .. })));
    }

    proptest! {
        #[test]
        fn write_read_is_exact(entries in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 6)) {
            let m = CMatrix::from_row_slice(2, 3, &entries.iter().map(|&(a, b)| C64::new(a, b)).collect::<Vec<_>>());
            let back = parse(&to_string(&m, None)).unwrap();
            prop_assert_eq!(back.matrix, m);
        }
    }
}
