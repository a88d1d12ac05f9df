//! Plain-text density matrix files.
//!
//! Line 1 holds `d_A d_B`. Each of the next `d_A * d_B` lines is one matrix
//! row of whitespace-separated `re,im` entries. Floats are written with the
//! shortest representation that parses back to the same bits, so a write
//! followed by a read is exact.

use entangle_core::{BipartiteDensity, ComplexMatrix};
use num_complex::Complex64;
use std::fmt::Write as _;

#[derive(Debug, thiserror::Error)]
pub enum StateFileError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Invalid(#[from] entangle_core::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> StateFileError {
    StateFileError::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn write_state(rho: &BipartiteDensity) -> String {
    let mut s = format!("{} {}\n", rho.d_a(), rho.d_b());
    for r in 0..rho.dim() {
        let row: Vec<String> = rho
            .mat()
            .row(r)
            .iter()
            .map(|z| format!("{},{}", z.re, z.im))
            .collect();
        writeln!(s, "{}", row.join(" ")).expect("writing to a String");
    }
    s
}

fn parse_entry(tok: &str, line: usize) -> Result<Complex64, StateFileError> {
    let (re, im) = tok
        .split_once(',')
        .ok_or_else(|| parse_err(line, format!("entry {tok:?} is not of the form re,im")))?;
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| parse_err(line, format!("{t:?} is not a number")))
    };
    Ok(Complex64::new(num(re)?, num(im)?))
}

/// Parses and validates a state. Blank lines are ignored.
pub fn read_state(text: &str) -> Result<BipartiteDensity, StateFileError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "empty state file"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| parse_err(hl, "header must be two positive integers `d_A d_B`"))?;
    let (d_a, d_b) = match dims[..] {
        [a, b] if a > 0 && b > 0 => (a, b),
        _ => return Err(parse_err(hl, "header must be two positive integers `d_A d_B`")),
    };
    let dim = d_a
        .checked_mul(d_b)
        .filter(|&d| d <= 1024)
        .ok_or_else(|| parse_err(hl, "total dimension above 1024"))?;

    let mut data = Vec::with_capacity(dim * dim);
    for r in 0..dim {
        let (ln, row) = lines
            .next()
            .ok_or_else(|| parse_err(hl + r + 1, format!("expected {dim} rows, found {r}")))?;
        let before = data.len();
        for tok in row.split_whitespace() {
            data.push(parse_entry(tok, ln)?);
        }
        if data.len() - before != dim {
            return Err(parse_err(
                ln,
                format!("expected {dim} entries, found {}", data.len() - before),
            ));
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "unexpected content after the last row"));
    }
    let mat = ComplexMatrix::from_row_major(dim, data)?;
    Ok(BipartiteDensity::new(mat, d_a, d_b)?)
}
