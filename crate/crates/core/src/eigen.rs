//! Generalized symmetric eigenvalue helpers for the assumption checkers:
//! sup/inf of N(λ)/D(λ) over a space, with D possibly only semidefinite.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::Result;

/// Problem sizes up to this bound use a full dense generalized eigensolve;
/// larger ones fall back to iteration or sampling.
pub const DENSE_EIGEN_LIMIT: usize = 2000;

/// Relative eigenvalue cutoff below which D-directions count as nullspace.
pub const NULLSPACE_CUT: f64 = 1e-10;

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Largest and smallest generalized eigenvalue of N x = θ D x restricted to
/// the D-positive subspace. Errors if D vanishes identically.
pub fn dense_gen_extremes(n_mat: &DMatrix<f64>, d_mat: &DMatrix<f64>) -> Result<(f64, f64)> {
    let n = symmetrize(n_mat);
    let d = symmetrize(d_mat);
    let eig = d.symmetric_eigen();
    let max_ev = eig.eigenvalues.amax();
    if !(max_ev > 0.0) {
        return Err(Error::SingularDenominator);
    }
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > NULLSPACE_CUT * max_ev)
        .collect();
    if keep.is_empty() {
        return Err(Error::SingularDenominator);
    }
    // columns of B span the D-positive subspace with Bᵀ D B = I
    let mut b = DMatrix::zeros(d_mat.nrows(), keep.len());
    for (col, &i) in keep.iter().enumerate() {
        let scale = 1.0 / eig.eigenvalues[i].sqrt();
        b.set_column(col, &(scale * eig.eigenvectors.column(i)));
    }
    let reduced = symmetrize(&(b.transpose() * n * b));
    let revals = reduced.symmetric_eigen().eigenvalues;
    Ok((revals.max(), revals.min()))
}

/// Largest generalized eigenvalue (the sup of the form ratio).
pub fn dense_gen_sup(n_mat: &DMatrix<f64>, d_mat: &DMatrix<f64>) -> Result<f64> {
    dense_gen_extremes(n_mat, d_mat).map(|(sup, _)| sup)
}

/// Power iteration for the largest generalized eigenvalue of N x = θ D x
/// using operator applications only; D must be positive definite.
pub fn power_sup_ratio(
    dim: usize,
    apply_n: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    apply_d: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    apply_d_inv: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    tol: f64,
) -> f64 {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    x /= x.norm();
    let mut theta_old = 0.0;
    for _ in 0..10_000 {
        let nx = apply_n(&x);
        let dx = apply_d(&x);
        let theta = x.dot(&nx) / x.dot(&dx);
        let mut y = apply_d_inv(&nx);
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        y /= norm;
        x = y;
        if (theta - theta_old).abs() <= tol * theta.abs().max(1e-300) {
            return theta;
        }
        theta_old = theta;
    }
    theta_old
}

/// Max of N(z)/D(z) over seeded unit-norm Gaussian draws; a sampled lower
/// bound for the sup used when the space is too large for a dense solve.
pub fn sampled_sup_ratio(
    dim: usize,
    form_n: &dyn Fn(&DVector<f64>) -> f64,
    form_d: &dyn Fn(&DVector<f64>) -> f64,
    trials: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> f64 {
    let mut sup: f64 = 0.0;
    for _ in 0..trials {
        let mut z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        z /= z.norm();
        let d = form_d(&z);
        if d <= 1e-14 {
            continue;
        }
        sup = sup.max(form_n(&z) / d);
    }
    sup
}
