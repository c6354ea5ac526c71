//! Exact-size dense linear algebra for the quadratic-model systems.
//!
//! Every system solved here is at most 4×3, so matrices live on the stack.
//! Singularity is judged column by column: a pivot is rejected when it falls
//! below [`PIVOT_TOL`] times the largest magnitude originally present in its
//! column. That keeps the test invariant under the extreme column scalings
//! that appear when the step size is tiny (α² ≈ 1e-12) or huge (α² ≈ 1e12).

use std::fmt;
use std::ops::Index;

use crate::error::{Error, Result};

pub const MAX_ROWS: usize = 4;
pub const MAX_COLS: usize = 3;

/// Relative pivot threshold used by the solvers.
pub const PIVOT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq)]
pub struct SmallMatrix {
    rows: usize,
    cols: usize,
    data: [[f64; MAX_COLS]; MAX_ROWS],
}

#[derive(Clone, Copy, PartialEq)]
pub struct SmallVector {
    len: usize,
    data: [f64; MAX_ROWS],
}

impl SmallMatrix {
    /// Builds a matrix from row slices. All rows must have the same length.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if !(1..=MAX_ROWS).contains(&r) || !(1..=MAX_COLS).contains(&c) {
            return Err(Error::DimensionMismatch(format!("{r}x{c} exceeds {MAX_ROWS}x{MAX_COLS}")));
        }
        let mut data = [[0.0; MAX_COLS]; MAX_ROWS];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("matrix entry"));
            }
            data[i][..c].copy_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn identity(n: usize) -> Self {
        assert!((1..=MAX_COLS).contains(&n));
        let mut data = [[0.0; MAX_COLS]; MAX_ROWS];
        for (i, row) in data.iter_mut().enumerate().take(n) {
            row[i] = 1.0;
        }
        Self { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols);
        self.data[i][j]
    }

    pub fn mul_vec(&self, k: &SmallVector) -> SmallVector {
        assert_eq!(k.len(), self.cols);
        let mut out = [0.0; MAX_ROWS];
        for (i, o) in out.iter_mut().enumerate().take(self.rows) {
            *o = (0..self.cols).map(|j| self.data[i][j] * k[j]).sum();
        }
        SmallVector { len: self.rows, data: out }
    }

    pub fn transpose_mul_vec(&self, r: &SmallVector) -> SmallVector {
        assert_eq!(r.len(), self.rows);
        let mut out = [0.0; MAX_ROWS];
        for (j, o) in out.iter_mut().enumerate().take(self.cols) {
            *o = (0..self.rows).map(|i| self.data[i][j] * r[i]).sum();
        }
        SmallVector { len: self.cols, data: out }
    }

    fn column_scales(&self) -> [f64; MAX_COLS] {
        let mut s = [0.0; MAX_COLS];
        for (j, sj) in s.iter_mut().enumerate().take(self.cols) {
            *sj = (0..self.rows).map(|i| self.data[i][j].abs()).fold(0.0, f64::max);
        }
        s
    }
}

impl fmt::Debug for SmallMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.rows).map(|i| &self.data[i][..self.cols]).collect();
        f.debug_struct("SmallMatrix").field("rows", &rows).finish()
    }
}

impl SmallVector {
    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if !(1..=MAX_ROWS).contains(&v.len()) {
            return Err(Error::DimensionMismatch(format!("vector length {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("vector entry"));
        }
        let mut data = [0.0; MAX_ROWS];
        data[..v.len()].copy_from_slice(v);
        Ok(Self { len: v.len(), data })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data[..self.len]
    }

    pub fn norm_inf(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<usize> for SmallVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl fmt::Debug for SmallVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

/// Solves the square system `a · k = b` by Gaussian elimination with partial
/// pivoting on the column-equilibrated matrix.
pub fn solve_square(a: &SmallMatrix, b: &SmallVector) -> Result<SmallVector> {
    let n = a.rows;
    if a.cols != n || b.len != n {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} system with rhs of length {}",
            a.rows, a.cols, b.len
        )));
    }
    let scales = a.column_scales();
    if scales[..n].contains(&0.0) {
        return Err(Error::SingularMatrix);
    }
    let mut m = [[0.0; MAX_COLS]; MAX_COLS];
    let mut rhs = [0.0; MAX_COLS];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = a.data[i][j] / scales[j];
        }
        rhs[i] = b[i];
    }

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&p, &q| m[p][col].abs().total_cmp(&m[q][col].abs()))
            .unwrap();
        if m[pivot_row][col].abs() < PIVOT_TOL {
            return Err(Error::SingularMatrix);
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                m[row][j] -= factor * m[col][j];
            }
            rhs[row] -= factor * rhs[col];
        }
    }

    let mut y = [0.0; MAX_ROWS];
    for i in (0..n).rev() {
        let tail: f64 = (i + 1..n).map(|j| m[i][j] * y[j]).sum();
        y[i] = (rhs[i] - tail) / m[i][i];
    }
    for j in 0..n {
        y[j] /= scales[j];
    }
    if y[..n].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linear solve"));
    }
    Ok(SmallVector { len: n, data: y })
}

/// Least-squares solution of an overdetermined system by Householder QR on
/// the column-equilibrated matrix.
pub fn solve_least_squares(a: &SmallMatrix, b: &SmallVector) -> Result<SmallVector> {
    if b.len != a.rows || a.rows < a.cols {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} least squares with rhs of length {}",
            a.rows, a.cols, b.len
        )));
    }
    let rank = column_rank(a, PIVOT_TOL);
    if rank < a.cols {
        return Err(Error::RankDeficient { rank, needed: a.cols });
    }
    let (rows, n) = (a.rows, a.cols);
    let scales = a.column_scales();
    let mut r = a.data;
    for row in r.iter_mut().take(rows) {
        for j in 0..n {
            row[j] /= scales[j];
        }
    }
    let mut y = b.data;
    for k in 0..n {
        let norm = (k..rows).map(|i| r[i][k] * r[i][k]).sum::<f64>().sqrt();
        let alpha = if r[k][k] > 0.0 { -norm } else { norm };
        let mut v = [0.0; MAX_ROWS];
        for i in k..rows {
            v[i] = r[i][k];
        }
        v[k] -= alpha;
        let vv: f64 = v[k..rows].iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for j in k..n {
            let s: f64 = (k..rows).map(|i| v[i] * r[i][j]).sum();
            for i in k..rows {
                r[i][j] -= 2.0 * s / vv * v[i];
            }
        }
        let s: f64 = (k..rows).map(|i| v[i] * y[i]).sum();
        for i in k..rows {
            y[i] -= 2.0 * s / vv * v[i];
        }
    }
    let mut k = [0.0; MAX_ROWS];
    for i in (0..n).rev() {
        if r[i][i].abs() < PIVOT_TOL {
            return Err(Error::RankDeficient { rank: i, needed: n });
        }
        let tail: f64 = (i + 1..n).map(|j| r[i][j] * k[j]).sum();
        k[i] = (y[i] - tail) / r[i][i];
    }
    for j in 0..n {
        k[j] /= scales[j];
    }
    if k[..n].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least squares"));
    }
    Ok(SmallVector { len: n, data: k })
}

/// Numerical column rank: the number of pivots that survive elimination with
/// the column-relative threshold `tol`.
pub fn column_rank(a: &SmallMatrix, tol: f64) -> usize {
    assert!(tol > 0.0, "rank tolerance must be positive");
    let scales = a.column_scales();
    let mut m = a.data;
    let mut rank = 0;
    for col in 0..a.cols {
        if scales[col] == 0.0 || rank == a.rows {
            continue;
        }
        for row in rank..a.rows {
            m[row][col] /= scales[col];
        }
        let pivot_row = (rank..a.rows)
            .max_by(|&p, &q| m[p][col].abs().total_cmp(&m[q][col].abs()))
            .unwrap();
        if m[pivot_row][col].abs() < tol {
            continue;
        }
        m.swap(rank, pivot_row);
        // Later columns are normalized lazily when they are reached.
        for row in rank + 1..a.rows {
            let factor = m[row][col] / m[rank][col];
            for j in col..a.cols {
                m[row][j] -= factor * m[rank][j];
            }
        }
        rank += 1;
    }
    rank
}
