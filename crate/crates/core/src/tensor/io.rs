//! Portable text format.
//!
//! ```text
//! T3 N M K
//! v v v ...        (N*M*K values, first index fastest)
//!
//! M2 rows cols
//! v v v ...        (row-major)
//! ```
//!
//! Values are written with 17 significant digits so they read back bit-exact.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use super::{Matrix, Tensor3};
use crate::error::{Error, Result};

/// Number formatting shared by every text output in the crate.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

const VALUES_PER_LINE: usize = 8;

fn write_values<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    let mut line = String::new();
    for chunk in values.chunks(VALUES_PER_LINE) {
        line.clear();
        for (idx, v) in chunk.iter().enumerate() {
            if idx > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{v:.16e}");
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn write_tensor<W: Write>(mut w: W, t: &Tensor3) -> Result<()> {
    let (n, m, k) = t.dims();
    writeln!(w, "T3 {n} {m} {k}")?;
    write_values(&mut w, t.as_slice())?;
    w.flush()?;
    Ok(())
}

pub fn write_matrix<W: Write>(mut w: W, mat: &Matrix) -> Result<()> {
    writeln!(w, "M2 {} {}", mat.rows(), mat.cols())?;
    write_values(&mut w, mat.as_slice())?;
    w.flush()?;
    Ok(())
}

/// Either kind of data file.
#[derive(Debug, Clone, PartialEq)]
pub enum DataFile {
    Tensor(Tensor3),
    Matrix(Matrix),
}

fn parse_dim(tok: Option<&str>) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::Parse("truncated header".into()))?;
    tok.parse::<usize>()
        .map_err(|_| Error::Parse(format!("bad dimension {tok:?}")))
}

pub fn read_data<R: Read>(r: R) -> Result<DataFile> {
    let mut reader = BufReader::new(r);
    let mut header = String::new();
    if reader.read_line(&mut header)? == 0 {
        return Err(Error::Parse("empty data file".into()));
    }
    let mut toks = header.split_whitespace();
    let tag = toks.next().unwrap_or("");
    let dims: Vec<usize> = match tag {
        "T3" => vec![
            parse_dim(toks.next())?,
            parse_dim(toks.next())?,
            parse_dim(toks.next())?,
        ],
        "M2" => vec![parse_dim(toks.next())?, parse_dim(toks.next())?],
        other => return Err(Error::Parse(format!("unknown header tag {other:?}"))),
    };
    if toks.next().is_some() {
        return Err(Error::Parse("trailing tokens in header".into()));
    }
    let expected: usize = dims.iter().product();
    let mut body = String::new();
    reader.read_to_string(&mut body)?;
    let mut values = Vec::with_capacity(expected);
    for tok in body.split_whitespace() {
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::Parse(format!("bad value {tok:?}")))?;
        values.push(v);
    }
    if values.len() != expected {
        return Err(Error::Parse(format!(
            "expected {expected} values, found {}",
            values.len()
        )));
    }
    match tag {
        "T3" => Ok(DataFile::Tensor(Tensor3::new(
            (dims[0], dims[1], dims[2]),
            values,
        )?)),
        _ => Ok(DataFile::Matrix(Matrix::new(dims[0], dims[1], values)?)),
    }
}

pub fn read_tensor<R: Read>(r: R) -> Result<Tensor3> {
    match read_data(r)? {
        DataFile::Tensor(t) => Ok(t),
        DataFile::Matrix(_) => Err(Error::Parse("expected a T3 tensor, found M2".into())),
    }
}

pub fn read_matrix<R: Read>(r: R) -> Result<Matrix> {
    match read_data(r)? {
        DataFile::Matrix(m) => Ok(m),
        DataFile::Tensor(_) => Err(Error::Parse("expected an M2 matrix, found T3".into())),
    }
}
