//! Sparse feature storage.
//!
//! [`SparseFeatureMatrix`] is the coordinate form written to disk: binary
//! `(row, col)` pairs plus dense numeric columns. [`CsrMatrix`] is the
//! row-compressed form the network reads during training.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::extract::FeatureRow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NumericColumn {
    pub col: u32,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseFeatureMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Unique `(row, col)` pairs with implicit value 1, row-major order.
    pub coords: Vec<(u32, u32)>,
    pub numeric: Vec<NumericColumn>,
    pub row_ids: Vec<String>,
}

impl SparseFeatureMatrix {
    pub fn from_rows(rows: &[FeatureRow], row_ids: Vec<String>, n_cols: usize) -> Result<Self> {
        if rows.len() != row_ids.len() {
            return Err(Error::Contract(format!(
                "{} feature rows but {} row ids",
                rows.len(),
                row_ids.len()
            )));
        }
        let mut coords = Vec::new();
        let mut numeric: Vec<NumericColumn> = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            for &c in &row.binary {
                if c as usize >= n_cols {
                    return Err(Error::Contract(format!("column {c} out of range {n_cols}")));
                }
                coords.push((r as u32, c));
            }
            for &(c, v) in &row.numeric {
                let slot = match numeric.iter().position(|n| n.col == c) {
                    Some(i) => i,
                    None => {
                        numeric.push(NumericColumn {
                            col: c,
                            values: vec![0.0; rows.len()],
                        });
                        numeric.len() - 1
                    }
                };
                numeric[slot].values[r] = v;
            }
        }
        coords.sort_unstable();
        coords.dedup();
        numeric.sort_by_key(|n| n.col);
        Ok(SparseFeatureMatrix {
            n_rows: rows.len(),
            n_cols,
            coords,
            numeric,
            row_ids,
        })
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut per_row: Vec<Vec<(u32, f64)>> = vec![Vec::new(); self.n_rows];
        for &(r, c) in &self.coords {
            per_row[r as usize].push((c, 1.0));
        }
        for n in &self.numeric {
            for (r, v) in n.values.iter().enumerate() {
                per_row[r].push((n.col, *v));
            }
        }
        let mut indptr = Vec::with_capacity(self.n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in per_row {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            indptr,
            indices,
            values,
        }
    }

    /// Header `n_rows n_cols`, then one `row col` pair per line (0-indexed).
    pub fn write_coords(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.n_rows, self.n_cols).map_err(io)?;
        for (r, c) in &self.coords {
            writeln!(w, "{r} {c}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Read the coordinate file; numeric columns and row ids are supplied separately.
    pub fn read_coords(path: &Path) -> Result<(usize, usize, Vec<(u32, u32)>)> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, reason: &str| Error::Parse {
            path: path.display().to_string(),
            line,
            reason: reason.to_string(),
        };
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header"))?
            .map_err(|e| Error::io(path, e))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(1, "bad header")))
            .collect::<Result<_>>()?;
        let [n_rows, n_cols] = dims[..] else {
            return Err(parse_err(1, "header must be `n_rows n_cols`"));
        };
        let mut coords = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<u32>);
            let (Some(Ok(r)), Some(Ok(c)), None) = (it.next(), it.next(), it.next()) else {
                return Err(parse_err(i + 2, "expected `row col`"));
            };
            if r as usize >= n_rows || c as usize >= n_cols {
                return Err(parse_err(i + 2, "index out of range"));
            }
            coords.push((r, c));
        }
        Ok((n_rows, n_cols, coords))
    }
}

/// Row-compressed sparse matrix with explicit values.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut m = CsrMatrix {
            n_rows: rows.len(),
            n_cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        };
        for row in rows {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    m.indices.push(c as u32);
                    m.values.push(v);
                }
            }
            m.indptr.push(m.indices.len());
        }
        m
    }
}
