//! Thin helpers over `nalgebra_sparse::CsrMatrix<Complex64>`.
//!
//! The operator and superoperator layers only need a handful of sparse
//! primitives that the crate does not ship directly: Kronecker products,
//! adjoints, pruning, principal submatrices and directed reachability over
//! the sparsity graph.

use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;

pub type Csr = CsrMatrix<Complex64>;

/// Builds a CSR matrix from `(row, col, value)` triplets. Duplicates are
/// summed and exact zeros are dropped.
pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Csr
where
    I: IntoIterator<Item = (usize, usize, Complex64)>,
{
    let mut coo = CooMatrix::new(nrows, ncols);
    for (i, j, v) in triplets {
        if v != Complex64::new(0.0, 0.0) {
            coo.push(i, j, v);
        }
    }
    let csr = Csr::from(&coo);
    prune(&csr, 0.0)
}

pub fn identity(n: usize) -> Csr {
    Csr::identity(n)
}

pub fn zeros(n: usize) -> Csr {
    Csr::zeros(n, n)
}

/// Drops entries with modulus `<= tol`.
pub fn prune(a: &Csr, tol: f64) -> Csr {
    a.filter(|_, _, v| v.norm() > tol)
}

pub fn scale(a: &Csr, c: Complex64) -> Csr {
    a.clone() * c
}

pub fn adjoint(a: &Csr) -> Csr {
    let mut t = a.transpose();
    for v in t.values_mut() {
        *v = v.conj();
    }
    t
}

pub fn conj(a: &Csr) -> Csr {
    let mut c = a.clone();
    for v in c.values_mut() {
        *v = v.conj();
    }
    c
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Csr, b: &Csr) -> Csr {
    let (br, bc) = (b.nrows(), b.ncols());
    let mut trips = Vec::with_capacity(a.nnz() * b.nnz());
    for (i, j, x) in a.triplet_iter() {
        for (k, l, y) in b.triplet_iter() {
            trips.push((i * br + k, j * bc + l, x * y));
        }
    }
    from_triplets(a.nrows() * br, a.ncols() * bc, trips)
}

pub fn get(a: &Csr, i: usize, j: usize) -> Complex64 {
    let row = a.row(i);
    match row.col_indices().binary_search(&j) {
        Ok(k) => row.values()[k],
        Err(_) => Complex64::new(0.0, 0.0),
    }
}

/// `y = a x`.
pub fn matvec(a: &Csr, x: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(a.ncols(), x.len());
    a.row_iter()
        .map(|row| {
            row.col_indices()
                .iter()
                .zip(row.values())
                .map(|(&j, v)| v * x[j])
                .sum()
        })
        .collect()
}

/// `y = a x` into a caller-provided buffer.
pub fn matvec_into(a: &Csr, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, row) in y.iter_mut().zip(a.row_iter()) {
        *yi = row
            .col_indices()
            .iter()
            .zip(row.values())
            .map(|(&j, v)| v * x[j])
            .sum();
    }
}

pub fn to_dense(a: &Csr) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplet_iter() {
        m[(i, j)] += *v;
    }
    m
}

pub fn from_dense(m: &DMatrix<Complex64>, tol: f64) -> Csr {
    let mut trips = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v.norm() > tol {
                trips.push((i, j, v));
            }
        }
    }
    from_triplets(m.nrows(), m.ncols(), trips)
}

/// Largest entry modulus.
pub fn max_abs(a: &Csr) -> f64 {
    a.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Principal submatrix on `idx` (which must be sorted and unique).
pub fn principal_submatrix(a: &Csr, idx: &[usize]) -> Csr {
    let mut pos = vec![usize::MAX; a.ncols()];
    for (k, &i) in idx.iter().enumerate() {
        pos[i] = k;
    }
    let mut trips = Vec::new();
    for (k, &i) in idx.iter().enumerate() {
        let row = a.row(i);
        for (&j, v) in row.col_indices().iter().zip(row.values()) {
            if pos[j] != usize::MAX {
                trips.push((k, pos[j], *v));
            }
        }
    }
    from_triplets(idx.len(), idx.len(), trips)
}

/// Smallest index set containing `seeds` that is closed under `j -> i`
/// whenever `a[i, j] != 0`. The span of the returned unit vectors is an
/// invariant subspace of `a`. Returned sorted.
pub fn forward_closure(a: &Csr, seeds: impl IntoIterator<Item = usize>) -> Vec<usize> {
    // Row j of the transpose lists the nonzero rows of column j.
    let at = a.transpose();
    let mut seen = vec![false; a.ncols()];
    let mut stack: Vec<usize> = Vec::new();
    for s in seeds {
        if !seen[s] {
            seen[s] = true;
            stack.push(s);
        }
    }
    while let Some(j) = stack.pop() {
        for &i in at.row(j).col_indices() {
            if !seen[i] {
                seen[i] = true;
                stack.push(i);
            }
        }
    }
    seen.iter()
        .enumerate()
        .filter_map(|(i, &s)| s.then_some(i))
        .collect()
}

/// Connected components of the symmetric sparsity graph of a square matrix.
pub fn components(a: &Csr) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let at = a.transpose();
    let mut label = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![start];
        label[start] = id;
        let mut stack = vec![start];
        while let Some(j) = stack.pop() {
            let (out_row, in_row) = (a.row(j), at.row(j));
            let neigh = out_row.col_indices().iter().chain(in_row.col_indices());
            for &i in neigh {
                if label[i] == usize::MAX {
                    label[i] = id;
                    members.push(i);
                    stack.push(i);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn kron_matches_dense_definition() {
        let a = from_triplets(2, 2, [(0, 1, c(2.0)), (1, 0, c(1.0))]);
        let b = from_triplets(2, 2, [(0, 0, c(1.0)), (1, 1, Complex64::new(0.0, 1.0))]);
        let k = to_dense(&kron(&a, &b));
        assert_eq!(k[(0, 2)], c(2.0));
        assert_eq!(k[(1, 3)], Complex64::new(0.0, 2.0));
        assert_eq!(k[(2, 0)], c(1.0));
        assert_eq!(k[(3, 1)], Complex64::new(0.0, 1.0));
        assert_eq!(kron(&a, &b).nnz(), 4);
    }

    #[test]
    fn closure_follows_column_to_row_edges() {
        // 0 -> 1 -> 2, 3 isolated
        let a = from_triplets(4, 4, [(1, 0, c(1.0)), (2, 1, c(1.0)), (3, 3, c(1.0))]);
        assert_eq!(forward_closure(&a, [0]), vec![0, 1, 2]);
        assert_eq!(forward_closure(&a, [2]), vec![2]);
        assert_eq!(components(&a), vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn submatrix_keeps_only_selected_entries() {
        let a = from_triplets(3, 3, [(0, 0, c(1.0)), (0, 2, c(2.0)), (2, 1, c(3.0))]);
        let s = to_dense(&principal_submatrix(&a, &[0, 2]));
        assert_eq!(s[(0, 0)], c(1.0));
        assert_eq!(s[(0, 1)], c(2.0));
        assert_eq!(s[(1, 0)], c(0.0));
    }
}
