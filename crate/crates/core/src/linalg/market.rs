//! Matrix Market coordinate I/O for complex sparse matrices and plain-text
//! vectors.
//!
//! Hermitian matrices are written with the `hermitian` symmetry qualifier and
//! only their lower triangle; readers expand symmetric / hermitian storage.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::sparse::HermitianSparse;
use super::vector::C64;
use crate::error::{Error, Result};

pub const HERMITIAN_HEADER: &str = "%%MatrixMarket matrix coordinate complex hermitian";
pub const GENERAL_HEADER: &str = "%%MatrixMarket matrix coordinate complex general";

pub fn write_matrix<W: Write>(mut w: W, a: &HermitianSparse) -> std::io::Result<()> {
    let hermitian = a.is_hermitian();
    let entries: Vec<_> = a.triplets().filter(|&(i, j, _)| !hermitian || i >= j).collect();
    writeln!(w, "{}", if hermitian { HERMITIAN_HEADER } else { GENERAL_HEADER })?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {:.17e} {:.17e}", i + 1, j + 1, v.re, v.im)?;
    }
    Ok(())
}

pub fn write_matrix_file(path: &Path, a: &HermitianSparse) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_matrix(&mut w, a)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Real,
    Complex,
    Pattern,
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    Hermitian,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn read_matrix<R: Read>(r: R) -> Result<HermitianSparse> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let header = header.map_err(|e| parse_err(1, e.to_string()))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'"));
    }
    let field = match tokens[3].as_str() {
        "real" | "integer" => Field::Real,
        "complex" => Field::Complex,
        "pattern" => Field::Pattern,
        other => return Err(parse_err(1, format!("unsupported field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "hermitian" => Symmetry::Hermitian,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        let num = |k: usize| -> Result<f64> {
            parts
                .get(k)
                .ok_or_else(|| parse_err(lineno, "missing field"))?
                .parse::<f64>()
                .map_err(|e| parse_err(lineno, e.to_string()))
        };
        let idx = |k: usize| -> Result<usize> {
            parts
                .get(k)
                .ok_or_else(|| parse_err(lineno, "missing index"))?
                .parse::<usize>()
                .map_err(|e| parse_err(lineno, e.to_string()))
        };
        match size {
            None => size = Some((idx(0)?, idx(1)?, idx(2)?)),
            Some((nr, nc, _)) => {
                let (i, j) = (idx(0)?, idx(1)?);
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(parse_err(lineno, "index out of range"));
                }
                let v = match field {
                    Field::Real => C64::new(num(2)?, 0.0),
                    Field::Complex => C64::new(num(2)?, num(3)?),
                    Field::Pattern => C64::new(1.0, 0.0),
                };
                let (i, j) = (i - 1, j - 1);
                triplets.push((i, j, v));
                if i != j {
                    match symmetry {
                        Symmetry::General => {}
                        Symmetry::Symmetric => triplets.push((j, i, v)),
                        Symmetry::Hermitian => triplets.push((j, i, v.conj())),
                    }
                }
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| parse_err(2, "missing size line"))?;
    let stored = triplets
        .iter()
        .filter(|(i, j, _)| symmetry == Symmetry::General || i >= j)
        .count();
    if stored != nnz {
        return Err(parse_err(0, format!("expected {nnz} entries, found {stored}")));
    }
    let hermitian = symmetry == Symmetry::Hermitian
        || (symmetry == Symmetry::Symmetric && field != Field::Complex);
    HermitianSparse::from_triplets(nr, nc, &triplets, hermitian)
}

pub fn read_matrix_file(path: &Path) -> Result<HermitianSparse> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix(f)
}

/// One `re im` pair per line.
pub fn write_vector<W: Write>(mut w: W, v: &[C64]) -> std::io::Result<()> {
    for x in v {
        writeln!(w, "{:.17e} {:.17e}", x.re, x.im)?;
    }
    Ok(())
}

pub fn read_vector<R: Read>(r: R) -> Result<Vec<C64>> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| parse_err(idx + 1, e.to_string()))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        let mut parts = t.split_whitespace();
        let mut next = || -> Result<f64> {
            parts
                .next()
                .unwrap_or("0")
                .parse::<f64>()
                .map_err(|e| parse_err(idx + 1, e.to_string()))
        };
        let re = next()?;
        let im = next()?;
        out.push(C64::new(re, im));
    }
    Ok(out)
}
