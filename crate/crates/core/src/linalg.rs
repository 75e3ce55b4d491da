//! Sparse and dense matrix kernels.
//!
//! [`SparseBinaryMatrix`] stores the document x item feedback pattern in CSR
//! form without values. [`SparseMatrix`] is the valued CSR variant used for
//! TF-IDF rows. [`DenseMatrix`] is a plain row-major buffer used for the
//! co-occurrence matrix, SVD factors and all neural activations.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dense matrix (in entries) that [`gram`], [`DenseMatrix::zeros_checked`]
/// and the SVD densification will allocate: 2^27 entries, i.e. 1 GiB of `f64`.
pub const DENSE_ENTRY_LIMIT: usize = 1 << 27;

/// CSR pattern of a binary matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseBinaryMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparseBinaryMatrix {
    /// An empty `0 x n_cols` matrix.
    pub fn empty(n_cols: usize) -> Self {
        Self {
            n_rows: 0,
            n_cols,
            row_ptr: vec![0],
            col_idx: Vec::new(),
        }
    }

    /// Builds a matrix from per-row column lists. Columns are sorted and
    /// deduplicated; any column `>= n_cols` is rejected.
    pub fn from_rows<R: AsRef<[usize]>>(n_cols: usize, rows: &[R]) -> Result<Self> {
        let mut m = Self::empty(n_cols);
        for row in rows {
            m.push_row(row.as_ref())?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, cols: &[usize]) -> Result<()> {
        let mut cols = cols.to_vec();
        cols.sort_unstable();
        cols.dedup();
        if let Some(&c) = cols.last() {
            if c >= self.n_cols {
                return Err(Error::InvalidArgument(format!(
                    "column index {c} out of range for {} columns",
                    self.n_cols
                )));
            }
        }
        self.col_idx.extend_from_slice(&cols);
        self.row_ptr.push(self.col_idx.len());
        self.n_rows += 1;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// Sorted column indices of row `i`.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&j).is_ok()
    }

    /// Number of nonzeros in every column.
    pub fn col_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_cols];
        for &c in &self.col_idx {
            counts[c] += 1;
        }
        counts
    }

    /// Rows `range` as a new matrix.
    pub fn slice_rows(&self, rows: std::ops::Range<usize>) -> Self {
        let mut m = Self::empty(self.n_cols);
        for i in rows {
            m.col_idx.extend_from_slice(self.row(i));
            m.row_ptr.push(m.col_idx.len());
            m.n_rows += 1;
        }
        m
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut m = Self::empty(self.n_cols);
        for &i in rows {
            m.col_idx.extend_from_slice(self.row(i));
            m.row_ptr.push(m.col_idx.len());
            m.n_rows += 1;
        }
        m
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (i, row) in self.rows().enumerate() {
            for &c in row {
                d.set(i, c, 1.0);
            }
        }
        d
    }
}

/// Valued CSR matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn empty(n_cols: usize) -> Self {
        Self {
            n_rows: 0,
            n_cols,
            row_ptr: vec![0],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a row given as `(column, value)` pairs. Entries are sorted by
    /// column; duplicate columns are summed and explicit zeros dropped.
    pub fn push_row(&mut self, entries: &[(usize, f64)]) -> Result<()> {
        let mut entries = entries.to_vec();
        entries.sort_by_key(|&(c, _)| c);
        let start = self.col_idx.len();
        for (c, v) in entries {
            if c >= self.n_cols {
                return Err(Error::InvalidArgument(format!(
                    "column index {c} out of range for {} columns",
                    self.n_cols
                )));
            }
            if self.col_idx.len() > start && *self.col_idx.last().unwrap() == c {
                *self.values.last_mut().unwrap() += v;
            } else {
                self.col_idx.push(c);
                self.values.push(v);
            }
        }
        // drop explicit zeros created by cancellation
        let mut w = start;
        for r in start..self.col_idx.len() {
            if self.values[r] != 0.0 {
                self.col_idx[w] = self.col_idx[r];
                self.values[w] = self.values[r];
                w += 1;
            }
        }
        self.col_idx.truncate(w);
        self.values.truncate(w);
        self.row_ptr.push(self.col_idx.len());
        self.n_rows += 1;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                d.set(i, c, v);
            }
        }
        d
    }
}

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            values: vec![0.0; n_rows * n_cols],
        }
    }

    /// Like [`DenseMatrix::zeros`] but refuses allocations above
    /// [`DENSE_ENTRY_LIMIT`].
    pub fn zeros_checked(n_rows: usize, n_cols: usize) -> Result<Self> {
        match n_rows.checked_mul(n_cols) {
            Some(n) if n <= DENSE_ENTRY_LIMIT => Ok(Self::zeros(n_rows, n_cols)),
            _ => Err(Error::Capacity {
                rows: n_rows,
                cols: n_cols,
                limit: DENSE_ENTRY_LIMIT,
            }),
        }
    }

    pub fn from_vec(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::InvalidArgument(format!(
                "{} values cannot fill a {n_rows}x{n_cols} matrix",
                values.len()
            )));
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
        })
    }

    /// Builds a matrix from equally long rows.
    ///
    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            values.extend_from_slice(r);
        }
        Self {
            n_rows: rows.len(),
            n_cols,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n_cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::Shape {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            let out_row = &mut out.values[i * other.n_cols..(i + 1) * other.n_cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ * other`.
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_rows != other.n_rows {
            return Err(Error::Shape {
                op: "t_matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.n_cols, other.n_cols);
        for r in 0..self.n_rows {
            let b_row = other.row(r);
            for (i, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.values[i * other.n_cols..(i + 1) * other.n_cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * otherᵀ`.
    pub fn matmul_t(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != other.n_cols {
            return Err(Error::Shape {
                op: "matmul_t",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = DenseMatrix::zeros(self.n_rows, other.n_rows);
        for i in 0..self.n_rows {
            let a = self.row(i);
            for j in 0..other.n_rows {
                out.values[i * other.n_rows + j] =
                    a.iter().zip(other.row(j)).map(|(x, y)| x * y).sum();
            }
        }
        Ok(out)
    }

    /// Column-wise concatenation `[self | other]`.
    pub fn hconcat(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_rows != other.n_rows {
            return Err(Error::Shape {
                op: "hconcat",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let n_cols = self.n_cols + other.n_cols;
        let mut values = Vec::with_capacity(self.n_rows * n_cols);
        for i in 0..self.n_rows {
            values.extend_from_slice(self.row(i));
            values.extend_from_slice(other.row(i));
        }
        Ok(DenseMatrix {
            n_rows: self.n_rows,
            n_cols,
            values,
        })
    }

    /// Columns `cols` as a new matrix.
    pub fn slice_cols(&self, cols: std::ops::Range<usize>) -> DenseMatrix {
        let width = cols.end - cols.start;
        let mut values = Vec::with_capacity(self.n_rows * width);
        for i in 0..self.n_rows {
            values.extend_from_slice(&self.row(i)[cols.clone()]);
        }
        DenseMatrix {
            n_rows: self.n_rows,
            n_cols: width,
            values,
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> DenseMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        DenseMatrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            values,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Column sums.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_cols];
        for row in self.rows() {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_rows, self.n_cols, &self.values)
    }

}

/// Co-occurrence matrix `XᵀX` of a binary matrix.
///
/// Entry `(j, k)` counts the rows containing both `j` and `k`; the diagonal
/// holds per-column occurrence counts.
pub fn gram(x: &SparseBinaryMatrix) -> Result<DenseMatrix> {
    if x.n_rows() == 0 {
        return Err(Error::InvalidArgument(
            "co-occurrence of an empty matrix".into(),
        ));
    }
    let n = x.n_cols();
    let mut c = DenseMatrix::zeros_checked(n, n)?;
    for row in x.rows() {
        for &j in row {
            let c_row = c.row_mut(j);
            for &k in row {
                c_row[k] += 1.0;
            }
        }
    }
    Ok(c)
}

/// Sparse-binary times dense product.
pub fn spmm(x: &SparseBinaryMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
    if x.n_cols() != d.n_rows() {
        return Err(Error::Shape {
            op: "spmm",
            left: x.shape(),
            right: d.shape(),
        });
    }
    let mut out = DenseMatrix::zeros(x.n_rows(), d.n_cols());
    for (i, row) in x.rows().enumerate() {
        let out_row = out.row_mut(i);
        for &k in row {
            for (o, v) in out_row.iter_mut().zip(d.row(k)) {
                *o += v;
            }
        }
    }
    Ok(out)
}

/// Rank-`k` factorization `U · diag(sigma) · Vᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdFactors {
    /// `m x k`, orthonormal columns.
    pub u: DenseMatrix,
    /// Non-increasing, non-negative.
    pub sigma: Vec<f64>,
    /// `k x n`, orthonormal rows.
    pub vt: DenseMatrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for i in 0..us.n_rows() {
            for (v, s) in us.row_mut(i).iter_mut().zip(&self.sigma) {
                *v *= s;
            }
        }
        us.matmul(&self.vt).expect("factor shapes agree")
    }
}

/// Tuning knobs of the randomized range finder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvdOptions {
    pub oversampling: usize,
    pub power_iterations: usize,
}

impl Default for SvdOptions {
    fn default() -> Self {
        Self {
            oversampling: 10,
            power_iterations: 4,
        }
    }
}

/// Truncated SVD by randomized subspace iteration with default options.
pub fn truncated_svd(m: &DenseMatrix, k: usize, seed: u64) -> Result<SvdFactors> {
    truncated_svd_with(m, k, seed, SvdOptions::default())
}

/// Randomized truncated SVD: Gaussian range sketch, QR-stabilised power
/// iterations, then an exact SVD of the small projected matrix.
///
/// Singular vector pairs are signed so that the largest-magnitude entry of
/// each right singular vector is positive.
pub fn truncated_svd_with(
    m: &DenseMatrix,
    k: usize,
    seed: u64,
    opts: SvdOptions,
) -> Result<SvdFactors> {
    let (rows, cols) = m.shape();
    let max_rank = rows.min(cols);
    if k == 0 || k > max_rank {
        return Err(Error::InvalidArgument(format!(
            "rank {k} outside 1..={max_rank} for a {rows}x{cols} matrix"
        )));
    }
    if !m.is_finite() {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let sketch = (k + opts.oversampling).min(max_rank);

    let a = m.to_nalgebra();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::<f64>::from_fn(cols, sketch, |_, _| StandardNormal.sample(&mut rng));

    let mut q = (&a * &omega).qr().q();
    for _ in 0..opts.power_iterations {
        let z = (a.transpose() * &q).qr().q();
        q = (&a * z).qr().q();
    }

    let b = q.transpose() * &a;
    let svd = b.svd(true, true);
    let u_small = svd.u.expect("requested U");
    let vt_small = svd.v_t.expect("requested Vt");
    let u_full = &q * u_small;

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .expect("finite singular values")
    });
    order.truncate(k);

    let mut u = DenseMatrix::zeros(rows, k);
    let mut vt = DenseMatrix::zeros(k, cols);
    let mut sigma = Vec::with_capacity(k);
    for (out, &src) in order.iter().enumerate() {
        let v_row = vt_small.row(src);
        let pivot = v_row
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..cols {
            vt.set(out, j, sign * v_row[j]);
        }
        for i in 0..rows {
            u.set(i, out, sign * u_full[(i, src)]);
        }
        sigma.push(svd.singular_values[src].max(0.0));
    }
    Ok(SvdFactors { u, sigma, vt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn naive_spmm(x: &SparseBinaryMatrix, d: &DenseMatrix) -> DenseMatrix {
        let xd = x.to_dense();
        let mut out = DenseMatrix::zeros(xd.n_rows(), d.n_cols());
        for i in 0..xd.n_rows() {
            for j in 0..d.n_cols() {
                let mut s = 0.0;
                for k in 0..xd.n_cols() {
                    s += xd.get(i, k) * d.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn random_binary(rng: &mut impl Rng, rows: usize, cols: usize) -> SparseBinaryMatrix {
        let rows: Vec<Vec<usize>> = (0..rows)
            .map(|_| (0..cols).filter(|_| rng.random_bool(0.3)).collect())
            .collect();
        SparseBinaryMatrix::from_rows(cols, &rows).unwrap()
    }

    fn random_dense(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
        let v = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        DenseMatrix::from_vec(rows, cols, v).unwrap()
    }

    #[test]
    fn gram_hand_example() {
        let x = SparseBinaryMatrix::from_rows(3, &[vec![0, 1], vec![0, 2]]).unwrap();
        let c = gram(&x).unwrap();
        let expected = DenseMatrix::from_rows(&[
            vec![2.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
        ]);
        assert_eq!(c, expected);
    }

    #[test]
    fn gram_single_row() {
        let x = SparseBinaryMatrix::from_rows(2, &[vec![0, 1]]).unwrap();
        let c = gram(&x).unwrap();
        assert_eq!(c, DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]));
    }

    #[test]
    fn gram_rejects_empty_and_oversized() {
        assert!(gram(&SparseBinaryMatrix::empty(3)).is_err());
        let x = SparseBinaryMatrix::from_rows(20_000, &[vec![0]]).unwrap();
        assert!(matches!(gram(&x), Err(Error::Capacity { .. })));
    }

    #[test]
    fn spmm_examples() {
        let x = SparseBinaryMatrix::from_rows(2, &[vec![0, 1]]).unwrap();
        let d = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(spmm(&x, &d).unwrap().row(0), &[4.0, 6.0]);

        let eye = SparseBinaryMatrix::from_rows(2, &[vec![0], vec![1]]).unwrap();
        assert_eq!(spmm(&eye, &d).unwrap(), d);

        let empty = SparseBinaryMatrix::empty(2);
        assert_eq!(spmm(&empty, &d).unwrap().shape(), (0, 2));

        let bad = DenseMatrix::zeros(3, 2);
        let err = spmm(&x, &bad).unwrap_err().to_string();
        assert!(err.contains("(1, 2)") && err.contains("(3, 2)"), "{err}");
    }

    #[test]
    fn from_rows_sorts_and_dedups() {
        let x = SparseBinaryMatrix::from_rows(4, &[vec![3, 1, 3]]).unwrap();
        assert_eq!(x.row(0), &[1, 3]);
        assert!(SparseBinaryMatrix::from_rows(2, &[vec![2]]).is_err());
    }

    #[test]
    fn svd_of_diagonal() {
        let m = DenseMatrix::from_diagonal(&[3.0, 2.0, 1.0]);
        let f = truncated_svd(&m, 2, 7).unwrap();
        assert!((f.sigma[0] - 3.0).abs() < 1e-6);
        assert!((f.sigma[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn svd_full_rank_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_dense(&mut rng, 12, 7);
        let f = truncated_svd(&m, 7, 11).unwrap();
        let mut diff = f.reconstruct();
        for (d, v) in diff.values_mut().iter_mut().zip(m.values()) {
            *d -= v;
        }
        assert!(diff.frobenius_norm() / m.frobenius_norm() < 1e-6);
    }

    #[test]
    fn svd_rank_one_outer_product() {
        let u = [1.0, -2.0, 0.5, 3.0];
        let v = [2.0, 1.0, -1.0];
        let rows: Vec<Vec<f64>> = u.iter().map(|a| v.iter().map(|b| a * b).collect()).collect();
        let m = DenseMatrix::from_rows(&rows);
        let f = truncated_svd(&m, 1, 0).unwrap();
        let r = f.reconstruct();
        let err: f64 = r
            .values()
            .iter()
            .zip(m.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err / m.frobenius_norm() < 1e-6);
    }

    #[test]
    fn svd_orthonormal_and_signed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_dense(&mut rng, 15, 9);
        let f = truncated_svd(&m, 5, 1).unwrap();
        let utu = f.u.t_matmul(&f.u).unwrap();
        let vvt = f.vt.matmul_t(&f.vt).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((utu.get(i, j) - e).abs() < 1e-6);
                assert!((vvt.get(i, j) - e).abs() < 1e-6);
            }
            let row = f.vt.row(i);
            let pivot = row.iter().copied().fold(0.0f64, |b, v| if v.abs() > b.abs() { v } else { b });
            assert!(pivot > 0.0);
        }
        assert!(f.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_rejects_bad_rank() {
        let m = DenseMatrix::zeros(3, 4);
        assert!(truncated_svd(&m, 0, 0).is_err());
        assert!(truncated_svd(&m, 4, 0).is_err());
    }

    #[test]
    fn svd_error_non_increasing_in_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_dense(&mut rng, 10, 8);
        let mut prev = f64::INFINITY;
        for k in 1..=8 {
            let r = truncated_svd(&m, k, 4).unwrap().reconstruct();
            let err: f64 = r
                .values()
                .iter()
                .zip(m.values())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(err <= prev + 1e-9, "k={k}: {err} > {prev}");
            prev = err;
        }
    }

    #[test]
    fn svd_reproducible_under_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = random_dense(&mut rng, 20, 10);
        let a = truncated_svd(&m, 4, 99).unwrap();
        let b = truncated_svd(&m, 4, 99).unwrap();
        for (x, y) in a.vt.values().iter().zip(b.vt.values()) {
            assert!((x - y).abs() < 1e-10);
        }
        for (x, y) in a.sigma.iter().zip(&b.sigma) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn gram_diagonal_is_column_counts(seed in any::<u64>(), rows in 1usize..15, cols in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_binary(&mut rng, rows, cols);
            let c = gram(&x).unwrap();
            let counts = x.col_counts();
            for (j, &n) in counts.iter().enumerate() {
                prop_assert_eq!(c.get(j, j), n as f64);
                for k in 0..cols {
                    prop_assert_eq!(c.get(j, k), c.get(k, j));
                }
            }
        }

        #[test]
        fn spmm_matches_naive(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_binary(&mut rng, 20, 20);
            let d = random_dense(&mut rng, 20, 20);
            let fast = spmm(&x, &d).unwrap();
            let slow = naive_spmm(&x, &d);
            for (a, b) in fast.values().iter().zip(slow.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
