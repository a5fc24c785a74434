//! Design matrix storage with row- and column-oriented access.
//!
//! Coordinate methods need fast column slices (subspace gradients, Hessian
//! submatrices, incremental residual updates) while residual recomputation and
//! data generation walk rows. Sparse data therefore keeps both a compressed-row
//! and a compressed-column copy of the nonzeros; dense data is a plain
//! `ndarray` array. Construction picks the dense layout whenever the nonzero
//! density exceeds 25%.

use ndarray::{Array1, Array2, ArrayView1};

/// Density above which sparse input is stored densely instead.
pub const DENSE_FALLBACK_DENSITY: f64 = 0.25;

/// Row-major triplet input: one `(column, value)` list per row.
pub type RowEntries = Vec<Vec<(usize, f64)>>;

#[derive(Debug, Clone)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    // compressed rows
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    row_val: Vec<f64>,
    // compressed columns (same nonzeros, column order)
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    col_val: Vec<f64>,
}

impl SparseMatrix {
    fn from_rows(nrows: usize, ncols: usize, rows: &RowEntries) -> Self {
        assert_eq!(rows.len(), nrows);
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut row_val = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for &(j, v) in row {
                assert!(j < ncols, "column index {j} out of range for {ncols} columns");
                col_idx.push(j);
                row_val.push(v);
            }
            row_ptr.push(col_idx.len());
        }

        // transpose pass: counting sort by column
        let mut col_counts = vec![0usize; ncols + 1];
        for &j in &col_idx {
            col_counts[j + 1] += 1;
        }
        for j in 0..ncols {
            col_counts[j + 1] += col_counts[j];
        }
        let col_ptr = col_counts.clone();
        let mut cursor = col_counts;
        let mut row_idx = vec![0usize; nnz];
        let mut col_val = vec![0.0f64; nnz];
        for i in 0..nrows {
            for k in row_ptr[i]..row_ptr[i + 1] {
                let j = col_idx[k];
                let slot = cursor[j];
                row_idx[slot] = i;
                col_val[slot] = row_val[k];
                cursor[j] += 1;
            }
        }

        SparseMatrix { nrows, ncols, row_ptr, col_idx, row_val, col_ptr, row_idx, col_val }
    }

    pub fn nnz(&self) -> usize {
        self.row_val.len()
    }

    fn col_range(&self, j: usize) -> std::ops::Range<usize> {
        self.col_ptr[j]..self.col_ptr[j + 1]
    }
}

/// Feature matrix behind the linear-model and quadratic oracles.
#[derive(Debug, Clone)]
pub enum DesignMatrix {
    Dense(Array2<f64>),
    Sparse(SparseMatrix),
}

impl DesignMatrix {
    /// Builds from per-row `(column, value)` entries, choosing sparse or dense
    /// storage by nonzero density.
    pub fn from_row_entries(nrows: usize, ncols: usize, rows: &RowEntries) -> Self {
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let density = if nrows * ncols == 0 { 1.0 } else { nnz as f64 / (nrows * ncols) as f64 };
        if density > DENSE_FALLBACK_DENSITY {
            let mut a = Array2::zeros((nrows, ncols));
            for (i, row) in rows.iter().enumerate() {
                for &(j, v) in row {
                    a[(i, j)] = v;
                }
            }
            DesignMatrix::Dense(a)
        } else {
            DesignMatrix::Sparse(SparseMatrix::from_rows(nrows, ncols, rows))
        }
    }

    pub fn nrows(&self) -> usize {
        match self {
            DesignMatrix::Dense(a) => a.nrows(),
            DesignMatrix::Sparse(s) => s.nrows,
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            DesignMatrix::Dense(a) => a.ncols(),
            DesignMatrix::Sparse(s) => s.ncols,
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, DesignMatrix::Sparse(_))
    }

    /// Fraction of stored entries that are nonzero.
    pub fn density(&self) -> f64 {
        let cells = (self.nrows() * self.ncols()) as f64;
        if cells == 0.0 {
            return 1.0;
        }
        match self {
            DesignMatrix::Dense(a) => a.iter().filter(|v| **v != 0.0).count() as f64 / cells,
            DesignMatrix::Sparse(s) => s.nnz() as f64 / cells,
        }
    }

    /// `A x` (fresh residual computation, O(nnz)).
    pub fn matvec(&self, x: &ArrayView1<f64>) -> Array1<f64> {
        assert_eq!(x.len(), self.ncols());
        match self {
            DesignMatrix::Dense(a) => a.dot(x),
            DesignMatrix::Sparse(s) => {
                let mut out = Array1::zeros(s.nrows);
                for i in 0..s.nrows {
                    let mut acc = 0.0;
                    for k in s.row_ptr[i]..s.row_ptr[i + 1] {
                        acc += s.row_val[k] * x[s.col_idx[k]];
                    }
                    out[i] = acc;
                }
                out
            }
        }
    }

    /// `Aᵀ w` (full gradients, O(nnz)).
    pub fn t_matvec(&self, w: &ArrayView1<f64>) -> Array1<f64> {
        assert_eq!(w.len(), self.nrows());
        match self {
            DesignMatrix::Dense(a) => a.t().dot(w),
            DesignMatrix::Sparse(s) => {
                let mut out = Array1::zeros(s.ncols);
                for j in 0..s.ncols {
                    let mut acc = 0.0;
                    for k in s.col_range(j) {
                        acc += s.col_val[k] * w[s.row_idx[k]];
                    }
                    out[j] = acc;
                }
                out
            }
        }
    }

    /// `out += alpha * A[:, j]` (incremental residual update, O(nnz(col j))).
    pub fn col_axpy(&self, j: usize, alpha: f64, out: &mut Array1<f64>) {
        assert!(j < self.ncols());
        assert_eq!(out.len(), self.nrows());
        match self {
            DesignMatrix::Dense(a) => {
                for i in 0..a.nrows() {
                    out[i] += alpha * a[(i, j)];
                }
            }
            DesignMatrix::Sparse(s) => {
                for k in s.col_range(j) {
                    out[s.row_idx[k]] += alpha * s.col_val[k];
                }
            }
        }
    }

    /// `Σ_i w_i A[i, j]` (one subspace gradient entry).
    pub fn col_dot(&self, j: usize, w: &ArrayView1<f64>) -> f64 {
        assert!(j < self.ncols());
        assert_eq!(w.len(), self.nrows());
        match self {
            DesignMatrix::Dense(a) => a.column(j).dot(w),
            DesignMatrix::Sparse(s) => {
                s.col_range(j).map(|k| s.col_val[k] * w[s.row_idx[k]]).sum()
            }
        }
    }

    /// Dense copy of the columns in `indices` (n × τ scratch for Hessian blocks).
    pub fn sub_columns(&self, indices: &[usize]) -> Array2<f64> {
        let n = self.nrows();
        let mut out = Array2::zeros((n, indices.len()));
        for (slot, &j) in indices.iter().enumerate() {
            assert!(j < self.ncols(), "sketch index {j} out of range");
            match self {
                DesignMatrix::Dense(a) => out.column_mut(slot).assign(&a.column(j)),
                DesignMatrix::Sparse(s) => {
                    for k in s.col_range(j) {
                        out[(s.row_idx[k], slot)] = s.col_val[k];
                    }
                }
            }
        }
        out
    }

    /// Squared Euclidean norm of every column (coordinate smoothness constants).
    pub fn col_sq_norms(&self) -> Array1<f64> {
        match self {
            DesignMatrix::Dense(a) => {
                Array1::from_iter(a.columns().into_iter().map(|c| c.dot(&c)))
            }
            DesignMatrix::Sparse(s) => {
                let mut out = Array1::zeros(s.ncols);
                for j in 0..s.ncols {
                    out[j] = s.col_range(j).map(|k| s.col_val[k] * s.col_val[k]).sum();
                }
                out
            }
        }
    }

    /// `Σ_i |A[i, j]|³` per column (coordinate cubic constants).
    pub fn col_abs_cubed(&self) -> Array1<f64> {
        match self {
            DesignMatrix::Dense(a) => Array1::from_iter(
                a.columns().into_iter().map(|c| c.iter().map(|v| v.abs().powi(3)).sum()),
            ),
            DesignMatrix::Sparse(s) => {
                let mut out = Array1::zeros(s.ncols);
                for j in 0..s.ncols {
                    out[j] = s.col_range(j).map(|k| s.col_val[k].abs().powi(3)).sum();
                }
                out
            }
        }
    }

    /// `Σ_i ‖a_i‖³` over rows (global cubic constant).
    pub fn row_norms_cubed_sum(&self) -> f64 {
        match self {
            DesignMatrix::Dense(a) => {
                a.rows().into_iter().map(|r| r.dot(&r).sqrt().powi(3)).sum()
            }
            DesignMatrix::Sparse(s) => (0..s.nrows)
                .map(|i| {
                    let sq: f64 = (s.row_ptr[i]..s.row_ptr[i + 1])
                        .map(|k| s.row_val[k] * s.row_val[k])
                        .sum();
                    sq.sqrt().powi(3)
                })
                .sum(),
        }
    }

    /// Scales column `j` by `factor` in place (both layouts stay consistent).
    pub fn scale_column(&mut self, j: usize, factor: f64) {
        assert!(j < self.ncols());
        match self {
            DesignMatrix::Dense(a) => a.column_mut(j).mapv_inplace(|v| v * factor),
            DesignMatrix::Sparse(s) => {
                for k in s.col_ptr[j]..s.col_ptr[j + 1] {
                    s.col_val[k] *= factor;
                }
                for i in 0..s.nrows {
                    for k in s.row_ptr[i]..s.row_ptr[i + 1] {
                        if s.col_idx[k] == j {
                            s.row_val[k] *= factor;
                        }
                    }
                }
            }
        }
    }

    /// Dense copy (diagnostics and small full-Hessian assembly).
    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            DesignMatrix::Dense(a) => a.clone(),
            DesignMatrix::Sparse(s) => {
                let mut a = Array2::zeros((s.nrows, s.ncols));
                for i in 0..s.nrows {
                    for k in s.row_ptr[i]..s.row_ptr[i + 1] {
                        a[(i, s.col_idx[k])] = s.row_val[k];
                    }
                }
                a
            }
        }
    }

    /// Per-row `(column, value)` entries of the nonzeros, in column order.
    pub fn row_entries(&self) -> RowEntries {
        match self {
            DesignMatrix::Dense(a) => (0..a.nrows())
                .map(|i| {
                    (0..a.ncols()).filter(|&j| a[(i, j)] != 0.0).map(|j| (j, a[(i, j)])).collect()
                })
                .collect(),
            DesignMatrix::Sparse(s) => (0..s.nrows)
                .map(|i| {
                    (s.row_ptr[i]..s.row_ptr[i + 1])
                        .map(|k| (s.col_idx[k], s.row_val[k]))
                        .collect()
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample_rows() -> RowEntries {
        // 3 x 4, density 4/12 > 25% would densify; keep it at 3/12 = 25% (sparse)
        vec![vec![(0, 1.0), (2, -2.0)], vec![(3, 4.0)], vec![]]
    }

    #[test]
    fn sparse_dense_agree_on_all_ops() {
        let rows = sample_rows();
        let sp = DesignMatrix::Sparse(SparseMatrix::from_rows(3, 4, &rows));
        let de = DesignMatrix::Dense(sp.to_dense());
        let x = array![1.0, -1.0, 0.5, 2.0];
        let w = array![0.3, -0.7, 1.1];

        assert_eq!(sp.matvec(&x.view()), de.matvec(&x.view()));
        assert_eq!(sp.t_matvec(&w.view()), de.t_matvec(&w.view()));
        assert_eq!(sp.col_sq_norms(), de.col_sq_norms());
        assert_eq!(sp.col_abs_cubed(), de.col_abs_cubed());
        assert_eq!(sp.row_norms_cubed_sum(), de.row_norms_cubed_sum());
        assert_eq!(sp.sub_columns(&[0, 2, 3]), de.sub_columns(&[0, 2, 3]));
        assert_eq!(sp.col_dot(2, &w.view()), de.col_dot(2, &w.view()));

        let mut r1 = w.clone();
        let mut r2 = w.clone();
        sp.col_axpy(2, 0.5, &mut r1);
        de.col_axpy(2, 0.5, &mut r2);
        assert_eq!(r1, r2);
    }

    #[test]
    fn density_threshold_picks_layout() {
        let rows = sample_rows();
        let m = DesignMatrix::from_row_entries(3, 4, &rows);
        assert!(m.is_sparse(), "25% density stays sparse");

        let dense_rows: RowEntries =
            vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 3.0)], vec![(1, 5.0)]];
        let m = DesignMatrix::from_row_entries(3, 2, &dense_rows);
        assert!(!m.is_sparse(), "5/6 density densifies");
    }

    #[test]
    fn scale_column_touches_both_layouts() {
        let rows = sample_rows();
        let mut m = DesignMatrix::from_row_entries(3, 4, &rows);
        m.scale_column(2, 0.5);
        let x = array![0.0, 0.0, 1.0, 0.0];
        assert_eq!(m.matvec(&x.view()), array![-1.0, 0.0, 0.0]);
        assert_eq!(m.col_dot(2, &array![1.0, 1.0, 1.0].view()), -1.0);
    }

    #[test]
    fn round_trip_row_entries() {
        let rows = sample_rows();
        let m = DesignMatrix::from_row_entries(3, 4, &rows);
        assert_eq!(m.row_entries(), rows);
    }
}
