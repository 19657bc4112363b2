//! Matrix Market I/O (`array` and `coordinate` formats, `real general`).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{Csc, Dense, Matrix};

/// Read a Matrix Market file. `coordinate` input yields sparse storage,
/// `array` input dense.
pub fn read(path: impl AsRef<Path>) -> Result<Matrix> {
    read_impl(path.as_ref(), false)
}

/// Like [`read`], but reject any negative entry.
pub fn read_nonnegative(path: impl AsRef<Path>) -> Result<Matrix> {
    read_impl(path.as_ref(), true)
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read_impl(path: &Path, require_nonneg: bool) -> Result<Matrix> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (banner_no, banner) = loop {
        match lines.next() {
            Some((no, line)) => {
                let line = line.map_err(|e| io_err(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                break (no + 1, line);
            }
            None => return Err(parse_err(path, 1, "empty file, missing banner")),
        }
    };

    let tokens: Vec<String> = banner
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(
            path,
            banner_no,
            "banner must be '%%MatrixMarket matrix <format> <field> <symmetry>'",
        ));
    }
    let coordinate = match tokens[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => {
            return Err(parse_err(
                path,
                banner_no,
                format!("unsupported format '{other}' (expected coordinate or array)"),
            ))
        }
    };
    if tokens[3] != "real" {
        return Err(parse_err(
            path,
            banner_no,
            format!("unsupported field '{}' (only real is supported)", tokens[3]),
        ));
    }
    if tokens[4] != "general" {
        return Err(parse_err(
            path,
            banner_no,
            format!(
                "unsupported symmetry '{}' (only general is supported)",
                tokens[4]
            ),
        ));
    }

    // comments, then the size line
    let (size_no, size_line) = loop {
        match lines.next() {
            Some((no, line)) => {
                let line = line.map_err(|e| io_err(path, e))?;
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('%') {
                    continue;
                }
                break (no + 1, line);
            }
            None => return Err(parse_err(path, banner_no + 1, "missing size line")),
        }
    };

    let sizes: Vec<&str> = size_line.split_whitespace().collect();
    let expect = if coordinate { 3 } else { 2 };
    if sizes.len() != expect {
        return Err(parse_err(
            path,
            size_no,
            format!("size line must have {expect} integers"),
        ));
    }
    let parse_count = |s: &str, no: usize| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| parse_err(path, no, format!("invalid integer '{s}'")))
    };
    let rows = parse_count(sizes[0], size_no)?;
    let cols = parse_count(sizes[1], size_no)?;

    let check_value = |v: f64, row: usize, col: usize, no: usize| -> Result<f64> {
        if !v.is_finite() {
            return Err(parse_err(path, no, "non-finite value"));
        }
        if require_nonneg && v < 0.0 {
            return Err(Error::NegativeEntry {
                row,
                col,
                value: v,
            });
        }
        Ok(v)
    };

    if coordinate {
        let nnz = parse_count(sizes[2], size_no)?;
        let mut triplets = Vec::with_capacity(nnz);
        for (no, line) in &mut lines {
            let line = line.map_err(|e| io_err(path, e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(parse_err(path, no + 1, "expected 'i j value'"));
            }
            let i = parse_count(parts[0], no + 1)?;
            let j = parse_count(parts[1], no + 1)?;
            if i < 1 || i > rows || j < 1 || j > cols {
                return Err(parse_err(
                    path,
                    no + 1,
                    format!("index ({i}, {j}) outside {rows}x{cols}"),
                ));
            }
            let v: f64 = parts[2]
                .parse()
                .map_err(|_| parse_err(path, no + 1, format!("invalid value '{}'", parts[2])))?;
            let v = check_value(v, i - 1, j - 1, no + 1)?;
            triplets.push((i - 1, j - 1, v));
        }
        if triplets.len() != nnz {
            return Err(parse_err(
                path,
                size_no,
                format!("declared {} entries, found {}", nnz, triplets.len()),
            ));
        }
        Ok(Matrix::Sparse(Csc::from_triplets(rows, cols, triplets)?))
    } else {
        // array entries are listed in column-major order
        let mut values = Vec::with_capacity(rows * cols);
        for (no, line) in &mut lines {
            let line = line.map_err(|e| io_err(path, e))?;
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| parse_err(path, no + 1, format!("invalid value '{tok}'")))?;
                let idx = values.len();
                let v = check_value(v, idx % rows.max(1), idx / rows.max(1), no + 1)?;
                values.push(v);
            }
        }
        if values.len() != rows * cols {
            return Err(parse_err(
                path,
                size_no,
                format!("expected {} values, found {}", rows * cols, values.len()),
            ));
        }
        let mut d = Dense::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                d.set(i, j, values[j * rows + i]);
            }
        }
        Ok(Matrix::Dense(d))
    }
}

/// Write a matrix in Matrix Market format: dense storage as `array`,
/// sparse storage as `coordinate`. Values are printed with Rust's shortest
/// round-trip formatting, so read-after-write reproduces them exactly.
pub fn write(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        match m {
            Matrix::Dense(d) => {
                writeln!(w, "%%MatrixMarket matrix array real general")?;
                writeln!(w, "{} {}", d.rows(), d.cols())?;
                for j in 0..d.cols() {
                    for i in 0..d.rows() {
                        writeln!(w, "{}", d.get(i, j))?;
                    }
                }
            }
            Matrix::Sparse(s) => {
                writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
                writeln!(w, "{} {} {}", s.rows(), s.cols(), s.nnz())?;
                for (i, j, v) in s.iter() {
                    writeln!(w, "{} {} {}", i + 1, j + 1, v)?;
                }
            }
        }
        w.flush()
    })();
    res.map_err(|e| io_err(path, e))
}
