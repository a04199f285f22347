//! Truncated composite Hilbert space (qubit 1 ⊗ qubit 2 ⊗ rotor) and its
//! elementary operators.
//!
//! # Basis convention
//!
//! Each qubit uses the basis `{|g⟩, |e⟩}` with excitation number `e ∈ {0, 1}`
//! and `σᶻ = diag(−1, +1)`. The rotor uses the angular-momentum eigenbasis
//! `|l⟩`, `l_min ≤ l ≤ l_max`. The composite index is row-major over the
//! fixed ordering:
//!
//! ```text
//! index(e1, e2, l) = (2·e1 + e2)·n_rotor + (l − l_min)
//! ```
//!
//! The angle shift `E = e^{iφ}` raises the ladder, `E|l⟩ = |l+1⟩`, fixed by
//! `[E, L_z] = −E`. The ladder has open ends: `E|l_max⟩ = 0` and
//! `E†|l_min⟩ = 0`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::sparse::{self, Csr};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceSpec {
    l_min: i64,
    l_max: i64,
}

/// Quantum numbers of a composite basis state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BasisLabel {
    pub e1: u8,
    pub e2: u8,
    pub l: i64,
}

impl SpaceSpec {
    pub fn new(l_min: i64, l_max: i64) -> Result<Self> {
        if l_min >= l_max {
            return Err(Error::InvalidTruncation { l_min, l_max });
        }
        Ok(Self { l_min, l_max })
    }

    pub fn l_min(&self) -> i64 {
        self.l_min
    }

    pub fn l_max(&self) -> i64 {
        self.l_max
    }

    pub fn n_rotor(&self) -> usize {
        (self.l_max - self.l_min + 1) as usize
    }

    pub fn dim(&self) -> usize {
        4 * self.n_rotor()
    }

    pub fn ladder(&self) -> impl Iterator<Item = i64> {
        self.l_min..=self.l_max
    }

    pub fn index(&self, e1: u8, e2: u8, l: i64) -> usize {
        debug_assert!(e1 < 2 && e2 < 2 && (self.l_min..=self.l_max).contains(&l));
        (2 * e1 as usize + e2 as usize) * self.n_rotor() + (l - self.l_min) as usize
    }

    pub fn label(&self, index: usize) -> BasisLabel {
        let n = self.n_rotor();
        let q = index / n;
        BasisLabel {
            e1: (q / 2) as u8,
            e2: (q % 2) as u8,
            l: self.l_min + (index % n) as i64,
        }
    }

    /// Same truncation widened by `step` levels on both ends.
    pub fn widened(&self, step: i64) -> Result<Self> {
        Self::new(self.l_min - step, self.l_max + step)
    }
}

/// Creates the truncated space for `l_min ≤ l ≤ l_max`.
pub fn make_space(l_min: i64, l_max: i64) -> Result<SpaceSpec> {
    SpaceSpec::new(l_min, l_max)
}

/// Sparse operator on a [`SpaceSpec`].
#[derive(Clone, Debug)]
pub struct QOperator {
    space: SpaceSpec,
    matrix: Csr,
    hermitian: bool,
}

impl QOperator {
    pub fn new(space: SpaceSpec, matrix: Csr) -> Result<Self> {
        check_dims(&space, matrix.nrows(), matrix.ncols())?;
        Ok(Self {
            space,
            matrix,
            hermitian: false,
        })
    }

    /// Wraps `matrix` and sets the Hermitian flag after verifying
    /// `max|A − A†| ≤ 1e-12 · max|A|`.
    pub fn new_hermitian(space: SpaceSpec, matrix: Csr) -> Result<Self> {
        let mut op = Self::new(space, matrix)?;
        let scale = sparse::max_abs(&op.matrix);
        let defect = op.hermiticity_defect();
        if defect > 1e-12 * scale {
            return Err(Error::Argument(format!(
                "operator is not Hermitian (defect {defect:e}, scale {scale:e})"
            )));
        }
        op.hermitian = true;
        Ok(op)
    }

    pub fn from_dense(space: SpaceSpec, m: &CMat) -> Result<Self> {
        check_dims(&space, m.nrows(), m.ncols())?;
        Self::new(space, sparse::from_dense(m, 0.0))
    }

    pub fn identity(space: SpaceSpec) -> Self {
        Self {
            space,
            matrix: sparse::identity(space.dim()),
            hermitian: true,
        }
    }

    pub fn zero(space: SpaceSpec) -> Self {
        Self {
            space,
            matrix: sparse::zeros(space.dim()),
            hermitian: true,
        }
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn matrix(&self) -> &Csr {
        &self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn hermiticity_defect(&self) -> f64 {
        sparse::max_abs(&(&self.matrix - &sparse::adjoint(&self.matrix)))
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space,
            matrix: sparse::adjoint(&self.matrix),
            hermitian: self.hermitian,
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            space: self.space,
            matrix: sparse::scale(&self.matrix, c),
            hermitian: self.hermitian && c.im == 0.0,
        }
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix
            .triplet_iter()
            .filter(|(i, j, _)| i == j)
            .map(|(_, _, v)| *v)
            .sum()
    }

    /// `Tr[self · rho]`.
    pub fn expect(&self, rho: &QOperator) -> Complex64 {
        assert_eq!(self.space, rho.space, "operators live on different spaces");
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, k, a) in self.matrix.triplet_iter() {
            acc += a * sparse::get(&rho.matrix, k, i);
        }
        acc
    }

    /// `Tr[self · rho]` against a dense matrix.
    pub fn expect_dense(&self, rho: &CMat) -> Complex64 {
        self.matrix
            .triplet_iter()
            .map(|(i, k, a)| a * rho[(k, i)])
            .sum()
    }

    pub fn to_dense(&self) -> CMat {
        sparse::to_dense(&self.matrix)
    }

    pub fn max_abs(&self) -> f64 {
        sparse::max_abs(&self.matrix)
    }

    pub fn pruned(&self, tol: f64) -> Self {
        Self {
            space: self.space,
            matrix: sparse::prune(&self.matrix, tol),
            hermitian: self.hermitian,
        }
    }

    pub(crate) fn with_hermitian_flag(mut self, flag: bool) -> Self {
        self.hermitian = flag;
        self
    }
}

fn check_dims(space: &SpaceSpec, rows: usize, cols: usize) -> Result<()> {
    let dim = space.dim();
    if rows != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: rows,
        });
    }
    if cols != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: cols,
        });
    }
    Ok(())
}

impl Add for &QOperator {
    type Output = QOperator;
    fn add(self, rhs: &QOperator) -> QOperator {
        assert_eq!(self.space, rhs.space, "operators live on different spaces");
        QOperator {
            space: self.space,
            matrix: &self.matrix + &rhs.matrix,
            hermitian: self.hermitian && rhs.hermitian,
        }
    }
}

impl Sub for &QOperator {
    type Output = QOperator;
    fn sub(self, rhs: &QOperator) -> QOperator {
        assert_eq!(self.space, rhs.space, "operators live on different spaces");
        QOperator {
            space: self.space,
            matrix: &self.matrix - &rhs.matrix,
            hermitian: self.hermitian && rhs.hermitian,
        }
    }
}

impl Mul for &QOperator {
    type Output = QOperator;
    fn mul(self, rhs: &QOperator) -> QOperator {
        assert_eq!(self.space, rhs.space, "operators live on different spaces");
        QOperator {
            space: self.space,
            matrix: &self.matrix * &rhs.matrix,
            hermitian: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Qubit {
    One,
    Two,
}

impl TryFrom<u8> for Qubit {
    type Error = Error;
    fn try_from(which: u8) -> Result<Self> {
        match which {
            1 => Ok(Qubit::One),
            2 => Ok(Qubit::Two),
            other => Err(Error::Argument(format!(
                "qubit index must be 1 or 2, got {other}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PauliKind {
    Z,
    /// `σ⁺ = |e⟩⟨g|`
    Plus,
    /// `σ⁻ = |g⟩⟨e|`
    Minus,
}

fn single_qubit(kind: PauliKind) -> Csr {
    match kind {
        PauliKind::Z => sparse::from_triplets(2, 2, [(0, 0, -ONE), (1, 1, ONE)]),
        PauliKind::Plus => sparse::from_triplets(2, 2, [(1, 0, ONE)]),
        PauliKind::Minus => sparse::from_triplets(2, 2, [(0, 1, ONE)]),
    }
}

/// Pauli operator on one qubit, identity on the other factors.
pub fn qubit_op(which: Qubit, kind: PauliKind, space: SpaceSpec) -> QOperator {
    let id2 = sparse::identity(2);
    let idr = sparse::identity(space.n_rotor());
    let p = single_qubit(kind);
    let m = match which {
        Qubit::One => sparse::kron(&sparse::kron(&p, &id2), &idr),
        Qubit::Two => sparse::kron(&sparse::kron(&id2, &p), &idr),
    };
    QOperator {
        space,
        matrix: m,
        hermitian: kind == PauliKind::Z,
    }
}

/// Same as [`qubit_op`] with a numeric qubit index (1 or 2).
pub fn embed_qubit_op(which: u8, kind: PauliKind, space: SpaceSpec) -> Result<QOperator> {
    Ok(qubit_op(Qubit::try_from(which)?, kind, space))
}

/// Lifts an `n_rotor × n_rotor` matrix to the composite space.
pub fn embed_rotor(space: SpaceSpec, rotor: &Csr) -> Result<QOperator> {
    if rotor.nrows() != space.n_rotor() || rotor.ncols() != space.n_rotor() {
        return Err(Error::DimensionMismatch {
            expected: space.n_rotor(),
            found: rotor.nrows(),
        });
    }
    Ok(QOperator {
        space,
        matrix: sparse::kron(&sparse::identity(4), rotor),
        hermitian: false,
    })
}

/// Rotor-factor `L_z` (n_rotor × n_rotor).
pub fn rotor_lz(space: SpaceSpec) -> Csr {
    sparse::from_triplets(
        space.n_rotor(),
        space.n_rotor(),
        space
            .ladder()
            .enumerate()
            .map(|(k, l)| (k, k, Complex64::new(l as f64, 0.0))),
    )
}

/// Rotor-factor `e^{iφ}` (n_rotor × n_rotor), `|l⟩ → |l+1⟩`.
pub fn rotor_e(space: SpaceSpec) -> Csr {
    let n = space.n_rotor();
    sparse::from_triplets(n, n, (0..n - 1).map(|k| (k + 1, k, ONE)))
}

/// `L_z`, diagonal with `L_z|l⟩ = l|l⟩`.
pub fn angular_momentum(space: SpaceSpec) -> QOperator {
    embed_rotor(space, &rotor_lz(space))
        .expect("rotor factor has matching size")
        .with_hermitian_flag(true)
}

/// `E = e^{iφ}` with open boundary at `l_max`.
pub fn rotor_shift(space: SpaceSpec) -> QOperator {
    embed_rotor(space, &rotor_e(space)).expect("rotor factor has matching size")
}

/// `cos φ = (E + E†)/2`.
pub fn cos_phi(space: SpaceSpec) -> QOperator {
    let e = rotor_shift(space);
    (&e + &e.adjoint()).scale_re(0.5).with_hermitian_flag(true)
}

/// `sin φ = (E − E†)/(2i)`.
pub fn sin_phi(space: SpaceSpec) -> QOperator {
    let e = rotor_shift(space);
    (&e - &e.adjoint())
        .scale(Complex64::new(0.0, -0.5))
        .with_hermitian_flag(true)
}

/// Tensor factors of the composite space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subsystem {
    Qubit1,
    Qubit2,
    Rotor,
}

impl Subsystem {
    fn position(self) -> usize {
        match self {
            Subsystem::Qubit1 => 0,
            Subsystem::Qubit2 => 1,
            Subsystem::Rotor => 2,
        }
    }
}

/// Reduced density matrix on an ordered subset of factors.
#[derive(Clone, Debug)]
pub struct ReducedState {
    pub factors: Vec<Subsystem>,
    pub matrix: CMat,
}

/// Partial trace over the complement of `keep`. Kept factors appear in the
/// fixed ordering regardless of the order given.
pub fn partial_trace(rho: &CMat, space: SpaceSpec, keep: &[Subsystem]) -> Result<ReducedState> {
    if keep.is_empty() {
        return Err(Error::Argument("partial trace needs at least one kept subsystem".into()));
    }
    check_dims(&space, rho.nrows(), rho.ncols())?;
    let mut factors: Vec<Subsystem> = keep.to_vec();
    factors.sort();
    factors.dedup();
    let dims = [2usize, 2, space.n_rotor()];
    let kept: Vec<usize> = factors.iter().map(|f| f.position()).collect();
    let traced: Vec<usize> = (0..3).filter(|p| !kept.contains(p)).collect();
    let kdim: usize = kept.iter().map(|&p| dims[p]).product();
    let tdim: usize = traced.iter().map(|&p| dims[p]).product();

    // composite index from per-factor digits
    let compose = |digits: &[usize; 3]| (digits[0] * 2 + digits[1]) * dims[2] + digits[2];
    let split = |mut idx: usize, positions: &[usize]| {
        let mut out = [0usize; 3];
        for &p in positions.iter().rev() {
            out[p] = idx % dims[p];
            idx /= dims[p];
        }
        out
    };

    let mut out = CMat::zeros(kdim, kdim);
    for a in 0..kdim {
        let ka = split(a, &kept);
        for b in 0..kdim {
            let kb = split(b, &kept);
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..tdim {
                let tt = split(t, &traced);
                let mut da = ka;
                let mut db = kb;
                for &p in &traced {
                    da[p] = tt[p];
                    db[p] = tt[p];
                }
                acc += rho[(compose(&da), compose(&db))];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(ReducedState {
        factors,
        matrix: out,
    })
}

/// Diagonal of the reduced rotor state, `⟨l|ρ_r|l⟩` for each ladder level.
pub fn rotor_populations(rho: &CMat, space: SpaceSpec) -> Vec<f64> {
    let n = space.n_rotor();
    (0..n)
        .map(|k| (0..4).map(|q| rho[(q * n + k, q * n + k)].re).sum())
        .collect()
}
