//! Matrix Market reading and writing for real matrices.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use faer::Mat;
use phred_core::linalg::Matrix;

use crate::CliError;

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn to_string(m: &Matrix) -> String {
    let mut out = String::new();
    match m {
        Matrix::Dense(d) => {
            out.push_str("%%MatrixMarket matrix array real general\n");
            let _ = writeln!(out, "{} {}", d.nrows(), d.ncols());
            for j in 0..d.ncols() {
                for i in 0..d.nrows() {
                    let _ = writeln!(out, "{}", fmt_f64(d[(i, j)]));
                }
            }
        }
        Matrix::Sparse(_) => {
            let t = m.triplets();
            out.push_str("%%MatrixMarket matrix coordinate real general\n");
            let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), t.len());
            for (i, j, v) in t {
                let _ = writeln!(out, "{} {} {}", i + 1, j + 1, fmt_f64(v));
            }
        }
    }
    out
}

pub fn write(path: &Path, m: &Matrix) -> Result<(), CliError> {
    fs::write(path, to_string(m)).map_err(|e| CliError::io(path, e))
}

pub fn write_dense(path: &Path, m: &Mat<f64>) -> Result<(), CliError> {
    write(path, &Matrix::Dense(m.clone()))
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

fn bad(path: &Path, msg: impl Into<String>) -> CliError {
    CliError::Config(format!("{}: {}", path.display(), msg.into()))
}

pub fn parse(text: &str, path: &Path) -> Result<Matrix, CliError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(path, "empty file"))?;
    let h: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(bad(path, "missing MatrixMarket header"));
    }
    let coordinate = match h[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(bad(path, format!("unsupported format {other}"))),
    };
    if h[3] != "real" && h[3] != "integer" {
        return Err(bad(path, format!("unsupported field {}", h[3])));
    }
    let sym = match h[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(bad(path, format!("unsupported symmetry {other}"))),
    };
    let mut body = lines.map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size = body.next().ok_or_else(|| bad(path, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(path, format!("bad size line '{size}'"))))
        .collect::<Result<_, _>>()?;
    let num = |t: &str| t.parse::<f64>().map_err(|_| bad(path, format!("bad value '{t}'")));
    if coordinate {
        let [nr, nc, nnz] = dims[..] else { return Err(bad(path, "size line needs rows, columns, entries")) };
        let mut trip = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let line = body.next().ok_or_else(|| bad(path, "fewer entries than declared"))?;
            let mut it = line.split_whitespace();
            let (Some(i), Some(j), Some(v)) = (it.next(), it.next(), it.next()) else {
                return Err(bad(path, format!("bad entry '{line}'")));
            };
            let i: usize = i.parse().map_err(|_| bad(path, format!("bad index '{i}'")))?;
            let j: usize = j.parse().map_err(|_| bad(path, format!("bad index '{j}'")))?;
            if i == 0 || j == 0 || i > nr || j > nc {
                return Err(bad(path, format!("index ({i}, {j}) out of range")));
            }
            let v = num(v)?;
            trip.push((i - 1, j - 1, v));
            match sym {
                Symmetry::Symmetric if i != j => trip.push((j - 1, i - 1, v)),
                Symmetry::Skew if i != j => trip.push((j - 1, i - 1, -v)),
                _ => {}
            }
        }
        Ok(Matrix::from_triplets(nr, nc, &trip).normalized())
    } else {
        let [nr, nc] = dims[..] else { return Err(bad(path, "size line needs rows and columns")) };
        let mut m = Mat::<f64>::zeros(nr, nc);
        for j in 0..nc {
            let start = if sym == Symmetry::General { 0 } else { j };
            for i in start..nr {
                if sym == Symmetry::Skew && i == j {
                    continue;
                }
                let line = body.next().ok_or_else(|| bad(path, "fewer entries than declared"))?;
                let v = num(line)?;
                m[(i, j)] = v;
                match sym {
                    Symmetry::Symmetric => m[(j, i)] = v,
                    Symmetry::Skew => m[(j, i)] = -v,
                    Symmetry::General => {}
                }
            }
        }
        Ok(Matrix::Dense(m))
    }
}

pub fn read(path: &Path) -> Result<Matrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, path)
}
