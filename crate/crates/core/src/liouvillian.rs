//! Superoperators on column-stacked density matrices and the local master
//! equation generator.
//!
//! `vec(ρ)[j·d + i] = ρ[i, j]`, so `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`. With that
//! convention
//!
//! * `−i[H, ρ]  ↦  −i(1 ⊗ H) + i(Hᵀ ⊗ 1)`
//! * `D[O]ρ     ↦  (Ō ⊗ O) − ½(1 ⊗ O†O) − ½((O†O)ᵀ ⊗ 1)`

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::model::{build_hamiltonians, Params};
use crate::operators::{
    angular_momentum, cos_phi, qubit_op, sin_phi, PauliKind, QOperator, Qubit, SpaceSpec,
};
use crate::sparse::{self, Csr};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which piece of a master equation a superoperator represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    Hamiltonian,
    Bath1,
    Bath2,
    Rotor,
    Total,
    Other,
}

#[derive(Clone, Debug)]
pub struct Superoperator {
    space: SpaceSpec,
    matrix: Csr,
    kind: GeneratorKind,
}

impl Superoperator {
    pub fn new(space: SpaceSpec, matrix: Csr, kind: GeneratorKind) -> Result<Self> {
        let d2 = space.dim() * space.dim();
        if matrix.nrows() != d2 || matrix.ncols() != d2 {
            return Err(Error::DimensionMismatch {
                expected: d2,
                found: matrix.nrows(),
            });
        }
        Ok(Self {
            space,
            matrix,
            kind,
        })
    }

    pub fn zero(space: SpaceSpec, kind: GeneratorKind) -> Self {
        let d2 = space.dim() * space.dim();
        Self {
            space,
            matrix: Csr::zeros(d2, d2),
            kind,
        }
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn matrix(&self) -> &Csr {
        &self.matrix
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn tagged(mut self, kind: GeneratorKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            space: self.space,
            matrix: sparse::prune(&sparse::scale(&self.matrix, Complex64::new(c, 0.0)), 0.0),
            kind: self.kind,
        }
    }

    pub(crate) fn from_parts_unchecked(space: SpaceSpec, matrix: Csr, kind: GeneratorKind) -> Self {
        Self {
            space,
            matrix,
            kind,
        }
    }

    /// Sum of superoperators on the same space, tagged `kind`.
    pub fn sum<'a>(
        space: SpaceSpec,
        parts: impl IntoIterator<Item = &'a Superoperator>,
        kind: GeneratorKind,
    ) -> Result<Self> {
        let mut acc = Self::zero(space, kind);
        for p in parts {
            if p.space != space {
                return Err(Error::GeneratorMismatch(
                    "superoperators act on different spaces".into(),
                ));
            }
            acc.matrix = &acc.matrix + &p.matrix;
        }
        Ok(acc)
    }

    pub fn apply_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        sparse::matvec(&self.matrix, v)
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        unvectorize(&self.apply_vec(&vectorize(rho)), self.space.dim())
    }

    pub fn max_abs(&self) -> f64 {
        sparse::max_abs(&self.matrix)
    }

    /// Largest `|Σ_i M[(i,i), c]|` over columns, i.e. the trace defect of
    /// the output for unit inputs.
    pub fn trace_defect(&self) -> f64 {
        let d = self.space.dim();
        let mut acc = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            let row = self.matrix.row(i * d + i);
            for (&c, v) in row.col_indices().iter().zip(row.values()) {
                acc[c] += v;
            }
        }
        acc.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Column-stacking vectorization.
pub fn vectorize(rho: &CMat) -> Vec<Complex64> {
    rho.as_slice().to_vec()
}

pub fn unvectorize(v: &[Complex64], dim: usize) -> CMat {
    CMat::from_column_slice(dim, dim, v)
}

/// `−i[H, ·]` for a bare matrix.
pub(crate) fn hamiltonian_matrix(h: &Csr) -> Csr {
    let n = h.nrows();
    let id = sparse::identity(n);
    let left = sparse::scale(&sparse::kron(&id, h), -I);
    let right = sparse::scale(&sparse::kron(&h.transpose(), &id), I);
    sparse::prune(&(&left + &right), 0.0)
}

/// `D[O]` for a bare matrix.
pub(crate) fn dissipator_matrix(o: &Csr) -> Csr {
    let n = o.nrows();
    let id = sparse::identity(n);
    let odo = &sparse::adjoint(o) * o;
    let half = Complex64::new(-0.5, 0.0);
    let jump = sparse::kron(&sparse::conj(o), o);
    let left = sparse::scale(&sparse::kron(&id, &odo), half);
    let right = sparse::scale(&sparse::kron(&odo.transpose(), &id), half);
    sparse::prune(&(&(&jump + &left) + &right), 0.0)
}

/// `Σ_k r_k D[O_k]` assembled in one pass.
pub(crate) fn lindblad_sum(terms: &[(f64, Csr)], n: usize) -> Csr {
    let mut jumps = Vec::new();
    let mut odo = Csr::zeros(n, n);
    for (rate, o) in terms {
        if *rate == 0.0 {
            continue;
        }
        let r = Complex64::new(*rate, 0.0);
        let oc = sparse::conj(o);
        for (i, j, x) in oc.triplet_iter() {
            for (k, l, y) in o.triplet_iter() {
                jumps.push((i * n + k, j * n + l, r * x * y));
            }
        }
        odo = &odo + &sparse::scale(&(&sparse::adjoint(o) * o), r);
    }
    let id = sparse::identity(n);
    let half = Complex64::new(-0.5, 0.0);
    let jump = sparse::from_triplets(n * n, n * n, jumps);
    let left = sparse::scale(&sparse::kron(&id, &odo), half);
    let right = sparse::scale(&sparse::kron(&odo.transpose(), &id), half);
    sparse::prune(&(&(&jump + &left) + &right), 0.0)
}

pub fn hamiltonian_super(h: &QOperator) -> Superoperator {
    Superoperator {
        space: h.space(),
        matrix: hamiltonian_matrix(h.matrix()),
        kind: GeneratorKind::Hamiltonian,
    }
}

/// `D[O]ρ = OρO† − ½{O†O, ρ}`.
pub fn dissipator_super(space: SpaceSpec, o: &QOperator) -> Result<Superoperator> {
    if o.space() != space {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: o.space().dim(),
        });
    }
    Ok(Superoperator {
        space,
        matrix: dissipator_matrix(o.matrix()),
        kind: GeneratorKind::Other,
    })
}

/// `L_i = g_i² (n_i D[σ_i⁺] + (n_i + 1) D[σ_i⁻])` for both qubits.
pub fn local_qubit_dissipators(
    p: &Params,
    space: SpaceSpec,
) -> Result<(Superoperator, Superoperator)> {
    let one = |q: Qubit, g: f64, n: f64, kind: GeneratorKind| -> Result<Superoperator> {
        let up = dissipator_super(space, &qubit_op(q, PauliKind::Plus, space))?;
        let down = dissipator_super(space, &qubit_op(q, PauliKind::Minus, space))?;
        let g2 = g * g;
        Ok(Superoperator::sum(space, [&up.scale(g2 * n), &down.scale(g2 * (n + 1.0))], kind)?)
    };
    Ok((
        one(Qubit::One, p.g1(), p.n1()?, GeneratorKind::Bath1)?,
        one(Qubit::Two, p.g2(), p.n2()?, GeneratorKind::Bath2)?,
    ))
}

/// Load jump operators `cos φ − i a sin φ L_z` and `sin φ + i a cos φ L_z`
/// with `a = β_r / 4I`, and their common rate `2Iγ/β_r`.
pub fn rotor_load_jumps(p: &Params, space: SpaceSpec) -> (f64, [QOperator; 2]) {
    let a = p.beta_r / (4.0 * p.inertia);
    let lz = angular_momentum(space);
    let (c, s) = (cos_phi(space), sin_phi(space));
    let j1 = &c - &(&s * &lz).scale(Complex64::new(0.0, a));
    let j2 = &s + &(&c * &lz).scale(Complex64::new(0.0, a));
    (2.0 * p.inertia * p.gamma / p.beta_r, [j1, j2])
}

/// Dissipative load on the rotor.
pub fn rotor_load_dissipator(p: &Params, space: SpaceSpec) -> Result<Superoperator> {
    if p.gamma == 0.0 {
        return Ok(Superoperator::zero(space, GeneratorKind::Rotor));
    }
    let (rate, [j1, j2]) = rotor_load_jumps(p, space);
    let d1 = dissipator_super(space, &j1)?;
    let d2 = dissipator_super(space, &j2)?;
    Superoperator::sum(space, [&d1, &d2], GeneratorKind::Rotor).map(|s| s.scale(rate))
}

/// The load acting on the rotor factor alone (`n_rotor² × n_rotor²`).
pub fn rotor_load_factor(p: &Params, space: SpaceSpec) -> Csr {
    let m = space.n_rotor();
    if p.gamma == 0.0 {
        return Csr::zeros(m * m, m * m);
    }
    let a = p.beta_r / (4.0 * p.inertia);
    let e = crate::operators::rotor_e(space);
    let ed = sparse::adjoint(&e);
    let lz = crate::operators::rotor_lz(space);
    let half = Complex64::new(0.5, 0.0);
    let c = sparse::scale(&(&e + &ed), half);
    let s = sparse::scale(&(&e - &ed), Complex64::new(0.0, -0.5));
    let j1 = &c - &sparse::scale(&(&s * &lz), Complex64::new(0.0, a));
    let j2 = &s + &sparse::scale(&(&c * &lz), Complex64::new(0.0, a));
    let rate = Complex64::new(2.0 * p.inertia * p.gamma / p.beta_r, 0.0);
    sparse::prune(
        &sparse::scale(&(&dissipator_matrix(&j1) + &dissipator_matrix(&j2)), rate),
        0.0,
    )
}

/// Which master equation a [`Generator`] was assembled from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Local,
    Global,
}

/// A master-equation generator with its parts kept separately so heat flows
/// can be attributed per bath.
#[derive(Clone, Debug)]
pub struct Generator {
    pub model: ModelKind,
    pub hamiltonian: Superoperator,
    pub bath1: Superoperator,
    pub bath2: Superoperator,
    pub rotor: Superoperator,
    pub total: Superoperator,
}

impl Generator {
    pub fn from_parts(
        model: ModelKind,
        hamiltonian: Superoperator,
        bath1: Superoperator,
        bath2: Superoperator,
        rotor: Superoperator,
    ) -> Result<Self> {
        let space = hamiltonian.space();
        let total = Superoperator::sum(
            space,
            [&hamiltonian, &bath1, &bath2, &rotor],
            GeneratorKind::Total,
        )?;
        Ok(Self {
            model,
            hamiltonian: hamiltonian.tagged(GeneratorKind::Hamiltonian),
            bath1: bath1.tagged(GeneratorKind::Bath1),
            bath2: bath2.tagged(GeneratorKind::Bath2),
            rotor: rotor.tagged(GeneratorKind::Rotor),
            total,
        })
    }

    pub fn space(&self) -> SpaceSpec {
        self.total.space()
    }

    pub fn part(&self, kind: GeneratorKind) -> Option<&Superoperator> {
        match kind {
            GeneratorKind::Hamiltonian => Some(&self.hamiltonian),
            GeneratorKind::Bath1 => Some(&self.bath1),
            GeneratorKind::Bath2 => Some(&self.bath2),
            GeneratorKind::Rotor => Some(&self.rotor),
            GeneratorKind::Total => Some(&self.total),
            GeneratorKind::Other => None,
        }
    }
}

/// `−i[H_S, ·] + L₁ + L₂ + L_r`.
pub fn assemble_local_liouvillian(p: &Params, space: SpaceSpec) -> Result<Generator> {
    let h = build_hamiltonians(p, space);
    let (l1, l2) = local_qubit_dissipators(p, space)?;
    let lr = rotor_load_dissipator(p, space)?;
    Generator::from_parts(ModelKind::Local, hamiltonian_super(&h.hs), l1, l2, lr)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::{hermiticity_defect, max_abs, trace};
    use crate::operators::make_space;
    use rand::{Rng, SeedableRng};

    pub(crate) fn random_hermitian(n: usize, seed: u64) -> CMat {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let a = CMat::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
    }

    fn basis_projector(space: SpaceSpec, idx: usize) -> CMat {
        let mut m = CMat::zeros(space.dim(), space.dim());
        m[(idx, idx)] = Complex64::new(1.0, 0.0);
        m
    }

    #[test]
    fn vectorization_round_trip_and_sandwich_rule() {
        let s = make_space(0, 1).unwrap();
        let a = random_hermitian(s.dim(), 1) + CMat::identity(8, 8) * I;
        let rho = random_hermitian(s.dim(), 2);
        assert_eq!(unvectorize(&vectorize(&rho), 8), rho);
        let o = QOperator::from_dense(s, &a).unwrap();
        let expect = &a * &rho * a.adjoint()
            - (a.adjoint() * &a * &rho + &rho * a.adjoint() * &a) * Complex64::new(0.5, 0.0);
        let got = dissipator_super(s, &o).unwrap().apply(&rho);
        assert!(max_abs(&(got - expect)) < 1e-12);
        let h = QOperator::from_dense(s, &rho).unwrap();
        let comm = (&rho * &a - &a * &rho) * (-I);
        assert!(max_abs(&(hamiltonian_super(&h).apply(&a) - comm)) < 1e-12);
    }

    #[test]
    fn batched_lindblad_sum_matches_individual_terms() {
        let s = make_space(-1, 1).unwrap();
        let a = qubit_op(Qubit::One, PauliKind::Minus, s);
        let b = &angular_momentum(s) * &qubit_op(Qubit::Two, PauliKind::Plus, s);
        let batched = lindblad_sum(&[(0.3, a.matrix().clone()), (1.7, b.matrix().clone())], s.dim());
        let da = dissipator_super(s, &a).unwrap().scale(0.3);
        let db = dissipator_super(s, &b).unwrap().scale(1.7);
        let single = Superoperator::sum(s, [&da, &db], GeneratorKind::Other).unwrap();
        let diff = &batched - single.matrix();
        assert!(sparse::max_abs(&diff) < 1e-14);
    }

    #[test]
    fn identity_jump_is_zero() {
        let s = make_space(-1, 1).unwrap();
        let d = dissipator_super(s, &QOperator::identity(s)).unwrap();
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn decay_of_excited_qubit() {
        let s = make_space(0, 1).unwrap();
        let excited = s.index(1, 0, 0);
        let ground = s.index(0, 0, 0);
        let d = dissipator_super(s, &qubit_op(Qubit::One, PauliKind::Minus, s)).unwrap();
        let out = d.apply(&basis_projector(s, excited));
        let expect = basis_projector(s, ground) - basis_projector(s, excited);
        assert!(max_abs(&(out - expect)) < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let s = make_space(0, 1).unwrap();
        let t = make_space(0, 2).unwrap();
        assert!(dissipator_super(s, &QOperator::identity(t)).is_err());
    }

    #[test]
    fn local_generator_preserves_trace_and_hermiticity() {
        let p = Params::fig2(0.5);
        let s = make_space(-2, 3).unwrap();
        let g = assemble_local_liouvillian(&p, s).unwrap();
        let rho = random_hermitian(s.dim(), 7);
        for part in [&g.hamiltonian, &g.bath1, &g.bath2, &g.rotor, &g.total] {
            assert!(part.trace_defect() < 1e-10, "{:?}", part.kind());
            let out = part.apply(&rho);
            assert!(trace(&out).norm() < 1e-10);
            assert!(hermiticity_defect(&out) < 1e-10);
        }
        let mixed = CMat::identity(s.dim(), s.dim()) * Complex64::new(1.0 / s.dim() as f64, 0.0);
        assert!(trace(&g.total.apply(&mixed)).norm() < 1e-14);
    }

    #[test]
    fn qubit_rates_match_occupations() {
        let p = Params::fig2(0.5);
        let s = make_space(0, 1).unwrap();
        let (l1, _) = local_qubit_dissipators(&p, s).unwrap();
        let g = s.index(0, 0, 0);
        let e = s.index(1, 0, 0);
        let up = l1.apply(&basis_projector(s, g))[(e, e)].re;
        let down = l1.apply(&basis_projector(s, e))[(g, g)].re;
        assert!((up - 0.815_97).abs() < 1e-5);
        assert!((down - 1.815_97).abs() < 1e-5);
        assert!((up / down - (-2.0 * p.beta1 * p.b1).exp()).abs() < 1e-13);
    }

    #[test]
    fn chi_one_decouples_first_qubit() {
        let mut p = Params::fig2(0.5);
        p.chi = 1.0;
        let s = make_space(0, 2).unwrap();
        let (l1, l2) = local_qubit_dissipators(&p, s).unwrap();
        assert_eq!(l1.max_abs(), 0.0);
        assert!(l2.max_abs() > 0.0);
    }

    #[test]
    fn qubit_dissipators_leave_rotor_observables_alone() {
        let p = Params::fig2(0.5);
        let s = make_space(-2, 2).unwrap();
        let (l1, l2) = local_qubit_dissipators(&p, s).unwrap();
        let lz = angular_momentum(s);
        let f = &(&lz * &lz) + &lz.scale_re(3.0);
        let rho = random_hermitian(s.dim(), 11);
        assert!(f.expect_dense(&l1.apply(&rho)).norm() < 1e-12);
        assert!(f.expect_dense(&l2.apply(&rho)).norm() < 1e-12);
    }

    #[test]
    fn load_is_zero_without_gamma() {
        let mut p = Params::fig2(0.5);
        p.gamma = 0.0;
        let s = make_space(-2, 2).unwrap();
        assert_eq!(rotor_load_dissipator(&p, s).unwrap().max_abs(), 0.0);
        assert_eq!(sparse::max_abs(&rotor_load_factor(&p, s)), 0.0);
    }

    #[test]
    fn load_factor_embeds_into_full_load() {
        let p = Params::fig2(0.5);
        let s = make_space(-2, 2).unwrap();
        let full = rotor_load_dissipator(&p, s).unwrap();
        let factor = rotor_load_factor(&p, s);
        let m = s.n_rotor();
        let rr = random_hermitian(m, 3);
        let q = random_hermitian(4, 4);
        let out = full.apply(&q.kronecker(&rr));
        let r_out = unvectorize(&sparse::matvec(&factor, &vectorize(&rr)), m);
        assert!(max_abs(&(out - q.kronecker(&r_out))) < 1e-12);
    }

    #[test]
    fn load_has_birth_death_fixed_point() {
        // The two load jumps combine into D[E(1 − aL_z)] + D[E†(1 + aL_z)],
        // whose detailed balance fixes p(l+1)/p(l) = (1 − al)²/(1 + a(l+1))².
        let mut p = Params::fig2(0.5);
        p.beta_r = 0.3;
        p.gamma = 0.1;
        let s = make_space(-6, 8).unwrap();
        let a = p.beta_r / (4.0 * p.inertia);
        let mut w = vec![1.0];
        for l in s.l_min()..s.l_max() {
            let r = ((1.0 - a * l as f64) / (1.0 + a * (l + 1) as f64)).powi(2);
            w.push(w.last().unwrap() * r);
        }
        let z: f64 = w.iter().sum();
        let rho = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            w.len(),
            w.iter().map(|x| Complex64::new(x / z, 0.0)),
        ));
        let out = unvectorize(
            &sparse::matvec(&rotor_load_factor(&p, s), &vectorize(&rho)),
            s.n_rotor(),
        );
        assert!(max_abs(&out) < 1e-14);
    }
}
