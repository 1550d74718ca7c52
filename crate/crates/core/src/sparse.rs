//! Thin helpers around `nalgebra_sparse` CSR matrices: triplet assembly,
//! matrix-vector products (plain and transposed), dense conversion.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

/// Build a CSR matrix from (row, col, value) triplets; duplicates are summed
/// in insertion order, which keeps repeated assemblies bitwise identical.
pub fn csr_from_triplets(
    nrows: usize,
    ncols: usize,
    triplets: impl IntoIterator<Item = (usize, usize, f64)>,
) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(nrows, ncols);
    for (i, j, v) in triplets {
        coo.push(i, j, v);
    }
    CsrMatrix::from(&coo)
}

pub fn spmv(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(a.nrows());
    spmv_into(a, x, &mut y);
    y
}

pub fn spmv_into(a: &CsrMatrix<f64>, x: &DVector<f64>, y: &mut DVector<f64>) {
    debug_assert_eq!(a.ncols(), x.len());
    for (i, row) in a.row_iter().enumerate() {
        let mut s = 0.0;
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            s += v * x[j];
        }
        y[i] = s;
    }
}

/// y = Aᵀ x without forming the transpose.
pub fn spmv_transpose(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(a.nrows(), x.len());
    let mut y = DVector::zeros(a.ncols());
    for (i, row) in a.row_iter().enumerate() {
        let xi = x[i];
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            y[j] += v * xi;
        }
    }
    y
}

pub fn to_dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplet_iter() {
        m[(i, j)] = *v;
    }
    m
}

/// max |A - Aᵀ| relative to max |A|.
pub fn symmetry_error(a: &CsrMatrix<f64>) -> f64 {
    let at = a.transpose();
    let mut max_diff: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for ((i, j, v), (it, jt, vt)) in a.triplet_iter().zip(at.triplet_iter()) {
        debug_assert_eq!((i, j), (it, jt));
        max_diff = max_diff.max((v - vt).abs());
        max_abs = max_abs.max(v.abs());
    }
    if max_abs == 0.0 {
        0.0
    } else {
        max_diff / max_abs
    }
}

/// Diagonal of a square CSR matrix.
pub fn diagonal(a: &CsrMatrix<f64>) -> DVector<f64> {
    let mut d = DVector::zeros(a.nrows());
    for (i, row) in a.row_iter().enumerate() {
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            if j == i {
                d[i] = v;
            }
        }
    }
    d
}

/// Coordinate-format text dump: one `row col value` line per stored entry,
/// row-major. Used by the golden-file tests for transfer matrices.
pub fn dump_coo(a: &CsrMatrix<f64>) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    writeln!(s, "# {} {} {}", a.nrows(), a.ncols(), a.nnz()).unwrap();
    for (i, j, v) in a.triplet_iter() {
        writeln!(s, "{} {} {}", i, j, v).unwrap();
    }
    s
}
