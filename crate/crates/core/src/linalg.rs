//! Dense complex linear-algebra helpers.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// Hermitian eigendecomposition with eigenvalues in ascending order.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Eigenvalues of the Hermitian part, ascending.
pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(hermitize(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `max |m - m†|`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `Tr[a b]` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `½ ‖a − b‖₁` on the Hermitian part of the difference.
pub fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    0.5 * eigvalsh(&(a - b)).iter().map(|x| x.abs()).sum::<f64>()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

fn norm1(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring around a truncated Taylor
/// series. Terms are added until the last one falls below `tol` relative to
/// the partial sum.
pub fn expm(a: &CMat, tol: f64) -> Result<CMat> {
    let n = a.nrows();
    let norm = norm1(a);
    if !norm.is_finite() {
        return Err(Error::Numerical("expm: non-finite input".into()));
    }
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * Complex64::new(0.5f64.powi(squarings), 0.0);
    let mut sum = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    let mut converged = false;
    for k in 1..=80 {
        term = &term * &scaled * Complex64::new(1.0 / k as f64, 0.0);
        sum += &term;
        if norm1(&term) <= tol * norm1(&sum) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "expm: Taylor series did not reach tolerance {tol:e}"
        )));
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}
