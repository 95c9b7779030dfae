//! Overcomplete patch dictionaries.
//!
//! The built-in dictionary stacks three orthonormal bases of `R^{P×P}`:
//! the separable 2-D DCT-II, a separable 2-D Haar system and the coordinate
//! spikes. A patch pixel `(i, j)` maps to row `i * P + j`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Largest accepted `d * p` for dictionaries read from text.
pub const MAX_ENTRIES: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictionaryKind {
    DctHaarSpike,
}

#[derive(Debug, Clone)]
pub struct Dictionary {
    atoms: DenseMatrix,
}

/// Orthonormal DCT-II basis, one basis vector per entry.
fn dct_basis(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| {
            let s = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|i| s * (std::f64::consts::PI * (i as f64 + 0.5) * k as f64 / n as f64).cos())
                .collect()
        })
        .collect()
}

/// Orthonormal Haar system on `n` points. For lengths that are not a power of
/// two the interval is split as evenly as possible at every level.
fn haar_basis(n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0 / (n as f64).sqrt(); n]];
    let mut queue = std::collections::VecDeque::from([(0usize, n)]);
    while let Some((a, b)) = queue.pop_front() {
        if b - a < 2 {
            continue;
        }
        let m = a + (b - a) / 2;
        let (l, r) = ((m - a) as f64, (b - m) as f64);
        let norm = (1.0 / l + 1.0 / r).sqrt();
        let mut v = vec![0.0; n];
        v[a..m].iter_mut().for_each(|x| *x = 1.0 / l / norm);
        v[m..b].iter_mut().for_each(|x| *x = -1.0 / r / norm);
        out.push(v);
        queue.push_back((a, m));
        queue.push_back((m, b));
    }
    out
}

fn separable(basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = basis.len();
    let mut atoms = Vec::with_capacity(n * n);
    for u in basis {
        for v in basis {
            let mut a = Vec::with_capacity(n * n);
            for ui in u {
                a.extend(v.iter().map(|vj| ui * vj));
            }
            atoms.push(a);
        }
    }
    atoms
}

impl Dictionary {
    pub fn build(patch_size: usize, kind: DictionaryKind) -> Result<Self> {
        if patch_size < 2 {
            return Err(Error::InvalidProblem(format!(
                "patch size must be at least 2, got {patch_size}"
            )));
        }
        match kind {
            DictionaryKind::DctHaarSpike => {
                let d = patch_size * patch_size;
                let mut cols = separable(&dct_basis(patch_size));
                cols.extend(separable(&haar_basis(patch_size)));
                cols.extend((0..d).map(|i| {
                    let mut e = vec![0.0; d];
                    e[i] = 1.0;
                    e
                }));
                Ok(Self {
                    atoms: DenseMatrix::from_columns(&cols)?,
                })
            }
        }
    }

    /// Wraps a matrix, normalizing its columns to unit length.
    pub fn from_matrix(m: DenseMatrix) -> Result<Self> {
        let norms = m.column_norms();
        if let Some(j) = norms.iter().position(|&v| v == 0.0) {
            return Err(Error::InvalidProblem(format!(
                "dictionary atom {j} is zero"
            )));
        }
        let inv: Vec<f64> = norms.iter().map(|v| 1.0 / v).collect();
        let atoms = m.scale_columns(&inv)?;
        if let Some(j) = atoms
            .column_norms()
            .iter()
            .position(|n| n.is_nan() || (n - 1.0).abs() > 1e-10)
        {
            return Err(Error::InvalidProblem(format!(
                "dictionary atom {j} cannot be normalized to unit length"
            )));
        }
        Ok(Self { atoms })
    }

    /// Text format: a first line `d p`, then `d` rows of `p` reals.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, head) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty dictionary file"))?;
        let dims: Vec<usize> = head
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(hline, format!("invalid header: {e}")))?;
        let [d, p] = dims[..] else {
            return Err(Error::parse(hline, "header must be \"d p\""));
        };
        if d == 0 || p == 0 || d.checked_mul(p).map_or(true, |n| n > MAX_ENTRIES) {
            return Err(Error::parse(
                hline,
                format!("unsupported dictionary size {d}x{p}"),
            ));
        }
        let mut rows = Vec::with_capacity(d * p);
        for r in 0..d {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse(hline, format!("expected {d} rows, found {r}")))?;
            let before = rows.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|e| Error::parse(ln, format!("invalid number {tok:?}: {e}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(ln, "non-finite entry"));
                }
                rows.push(v);
            }
            if rows.len() - before != p {
                return Err(Error::parse(
                    ln,
                    format!("expected {p} values, found {}", rows.len() - before),
                ));
            }
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::parse(ln, "trailing data after dictionary rows"));
        }
        Self::from_matrix(DenseMatrix::from_row_major(d, p, &rows)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn atoms(&self) -> &DenseMatrix {
        &self.atoms
    }

    pub fn atom_dim(&self) -> usize {
        self.atoms.rows()
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.cols()
    }
}
