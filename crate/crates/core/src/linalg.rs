//! Minimal dense linear algebra for the solvers.
//!
//! # Storage
//!
//! [`DenseMatrix`] stores its entries in **column-major** order with 0-based
//! indices: entry `(i, j)` lives at `data[i + j * rows]`. Every routine in the
//! crate uses this layout, which makes column access (the hot path of the
//! Householder factorization and of `Xᵀv`) contiguous.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidProblem(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "non-finite matrix entry at ({}, {})",
                pos % rows,
                pos / rows
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row-major data (the natural order of text files).
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        let mut cm = vec![0.0; data.len()];
        for i in 0..rows {
            for j in 0..cols {
                cm[i + j * rows] = data[i * cols + j];
            }
        }
        Self::from_col_major(rows, cols, cm)
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * columns.len());
        for col in columns {
            if col.len() != rows {
                return Err(Error::DimensionMismatch {
                    context: "matrix column",
                    expected: rows,
                    found: col.len(),
                });
            }
            data.extend_from_slice(col);
        }
        Self::from_col_major(rows, columns.len(), data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i + i * n] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    /// Returns a copy with an all-ones column prepended.
    pub fn with_leading_ones(&self) -> Self {
        let mut data = vec![1.0; self.rows];
        data.extend_from_slice(&self.data);
        Self {
            rows: self.rows,
            cols: self.cols + 1,
            data,
        }
    }

    /// `X v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("matvec operand", self.cols, v.len())?;
        let mut out = vec![0.0; self.rows];
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                axpy(vj, self.column(j), &mut out);
            }
        }
        Ok(out)
    }

    /// `Xᵀ v`.
    pub fn t_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("transposed matvec operand", self.rows, v.len())?;
        Ok((0..self.cols).map(|j| dot(self.column(j), v)).collect())
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.cols).map(|j| norm(self.column(j))).collect()
    }

    /// Returns `X diag(s)`.
    pub fn scale_columns(&self, s: &[f64]) -> Result<Self> {
        check_len("column scale", self.cols, s.len())?;
        let mut data = self.data.clone();
        for (j, &sj) in s.iter().enumerate() {
            for v in &mut data[j * self.rows..(j + 1) * self.rows] {
                *v *= sj;
            }
        }
        Self::from_col_major(self.rows, self.cols, data)
    }

    /// Max-row-sum norm of `Xᵀ`, i.e. the largest absolute column sum of `X`.
    pub fn transpose_inf_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| self.column(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Householder QR factorization of a full-column-rank `N x p` matrix, used to
/// apply `X⁺ = (XᵀX)⁻¹Xᵀ` without forming `XᵀX`.
#[derive(Debug, Clone)]
pub struct Pseudoinverse {
    rows: usize,
    cols: usize,
    // Column-major N x p. Strictly upper part holds R; column k from row k
    // down holds the Householder vector v_k.
    qr: Vec<f64>,
    beta: Vec<f64>,
    rdiag: Vec<f64>,
}

impl Pseudoinverse {
    pub fn factorize(x: &DenseMatrix) -> Result<Self> {
        let (n, p) = (x.rows, x.cols);
        if n < p {
            return Err(Error::InvalidProblem(format!(
                "pseudoinverse needs rows >= cols, got {n}x{p}"
            )));
        }
        let mut qr = x.data.clone();
        let mut beta = vec![0.0; p];
        let mut rdiag = vec![0.0; p];

        for k in 0..p {
            let (head, tail) = qr.split_at_mut((k + 1) * n);
            let colk = &mut head[k * n + k..];
            let nrm = norm(colk);
            if nrm == 0.0 {
                continue;
            }
            let alpha = if colk[0] > 0.0 { -nrm } else { nrm };
            colk[0] -= alpha;
            let vtv = dot(colk, colk);
            let b = 2.0 / vtv;
            beta[k] = b;
            rdiag[k] = alpha;
            for j in 0..p - k - 1 {
                let colj = &mut tail[j * n + k..(j + 1) * n];
                let s = b * dot(colk, colj);
                axpy(-s, colk, colj);
            }
        }

        let rmax = rdiag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = n as f64 * f64::EPSILON * rmax;
        let rank = rdiag.iter().filter(|v| v.abs() > tol).count();
        if rank < p || rmax == 0.0 {
            return Err(Error::RankDeficient { rank, cols: p });
        }
        Ok(Self {
            rows: n,
            cols: p,
            qr,
            beta,
            rdiag,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Least-squares solution `argmin_b ||v - X b||₂`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("pseudoinverse operand", self.rows, v.len())?;
        let n = self.rows;
        let mut w = v.to_vec();
        for k in 0..self.cols {
            let vk = &self.qr[k * n + k..(k + 1) * n];
            let s = self.beta[k] * dot(vk, &w[k..]);
            axpy(-s, vk, &mut w[k..]);
        }
        let mut b = w;
        b.truncate(self.cols);
        for i in (0..self.cols).rev() {
            let tail: f64 = (i + 1..self.cols).map(|j| self.qr[i + j * n] * b[j]).sum();
            b[i] = (b[i] - tail) / self.rdiag[i];
        }
        Ok(b)
    }
}

/// Factorizes `X` for repeated pseudoinverse application.
pub fn factorize(x: &DenseMatrix) -> Result<Pseudoinverse> {
    Pseudoinverse::factorize(x)
}

pub fn apply_pinv(pinv: &Pseudoinverse, v: &[f64]) -> Result<Vec<f64>> {
    pinv.apply(v)
}

/// `Σ aᵢ bᵢ wᵢ`.
pub fn weighted_inner(a: &[f64], b: &[f64], w: &[f64]) -> Result<f64> {
    check_len("weighted inner product", a.len(), b.len())?;
    check_len("weighted inner product weights", a.len(), w.len())?;
    Ok(a.iter().zip(b).zip(w).map(|((x, y), z)| x * y * z).sum())
}

/// `⟨a, a⟩_w`.
pub fn weighted_norm_sq(a: &[f64], w: &[f64]) -> Result<f64> {
    check_len("weighted norm weights", a.len(), w.len())?;
    Ok(a.iter().zip(w).map(|(x, z)| x * x * z).sum())
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}
