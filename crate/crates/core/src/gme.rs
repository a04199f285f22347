//! Semiglobal master equation: qubit dissipators built from eigenoperators of
//! the full system Hamiltonian, rotor load kept local.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::liouvillian::{
    hamiltonian_super, lindblad_sum, rotor_load_dissipator, Generator, GeneratorKind, ModelKind,
    Superoperator,
};
use crate::model::{build_hamiltonians, cluster_sorted, OmegaCutoff, Params, Spectrum};
use crate::operators::{qubit_op, PauliKind, QOperator, Qubit, SpaceSpec};
use crate::sparse;

/// Relative size below which an eigenbasis matrix element counts as zero.
const ELEMENT_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bath {
    One,
    Two,
}

impl Bath {
    fn qubit(self) -> Qubit {
        match self {
            Bath::One => Qubit::One,
            Bath::Two => Qubit::Two,
        }
    }
}

/// Decomposition `A = Σ_ω A(ω)` with `[H_S, A(ω)] = −ω A(ω)`.
#[derive(Clone, Debug)]
pub struct EigenoperatorSet {
    /// Sorted by frequency.
    pub ops: Vec<(f64, QOperator)>,
    pub tol: f64,
}

impl EigenoperatorSet {
    pub fn frequencies(&self) -> Vec<f64> {
        self.ops.iter().map(|(w, _)| *w).collect()
    }

    pub fn max_abs_frequency(&self) -> f64 {
        self.ops.iter().map(|(w, _)| w.abs()).fold(0.0, f64::max)
    }
}

/// Nonzero entries of each eigenvector column.
fn sparse_columns(v: &CMat) -> Vec<Vec<(usize, Complex64)>> {
    (0..v.ncols())
        .map(|k| {
            v.column(k)
                .iter()
                .enumerate()
                .filter(|(_, x)| x.norm() > 0.0)
                .map(|(i, x)| (i, *x))
                .collect()
        })
        .collect()
}

/// Coupled eigenbasis transitions `(ε_{k'} − ε_k, k, k', ⟨k|A|k'⟩)`.
fn transitions(a: &QOperator, spec: &Spectrum) -> Vec<(f64, usize, usize, Complex64)> {
    let v = &spec.vectors;
    let at = v.adjoint() * (sparse::to_dense(a.matrix()) * v);
    let scale = at.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let cluster = spec.cluster_of();
    let ce = spec.cluster_energies();
    let mut out = Vec::new();
    for k in 0..at.nrows() {
        for kp in 0..at.ncols() {
            let x = at[(k, kp)];
            if x.norm() > ELEMENT_TOL * scale {
                out.push((ce[cluster[kp]] - ce[cluster[k]], k, kp, x));
            }
        }
    }
    out
}

/// Splits `A` into eigenoperators of the Hamiltonian behind `spec`, merging
/// frequencies closer than `tol` (absolute). The energy clusters of `spec`
/// define the projectors `Π(ε)`.
pub fn eigenoperators(a: &QOperator, spec: &Spectrum, tol: f64) -> Result<EigenoperatorSet> {
    if a.space().dim() != spec.energies.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.energies.len(),
            found: a.space().dim(),
        });
    }
    let space = a.space();
    let mut trans = transitions(a, spec);
    trans.sort_by(|x, y| x.0.total_cmp(&y.0));
    let freqs: Vec<f64> = trans.iter().map(|t| t.0).collect();
    let cols = sparse_columns(&spec.vectors);
    let mut ops = Vec::new();
    for group in cluster_sorted(&freqs, tol) {
        let members = &trans[group];
        let omega = members.iter().map(|t| t.0).sum::<f64>() / members.len() as f64;
        let mut trips = Vec::new();
        for &(_, k, kp, x) in members {
            for &(i, vi) in &cols[k] {
                for &(j, vj) in &cols[kp] {
                    trips.push((i, j, x * vi * vj.conj()));
                }
            }
        }
        let m = sparse::from_triplets(space.dim(), space.dim(), trips);
        let m = sparse::prune(&m, ELEMENT_TOL * sparse::max_abs(&m));
        ops.push((omega, QOperator::new(space, m)?));
    }
    Ok(EigenoperatorSet { ops, tol })
}

/// Ohmic bath rates `(J(ω)n(ω), J(ω)(n(ω)+1))` with
/// `J(ω) = g² ω Ω² / (ω² + Ω²)` and `n(ω) = 1/(e^{βω} − 1)`, evaluated in a
/// form that is finite at ω = 0 and for either sign of ω.
pub fn ohmic_rates(omega: f64, g: f64, beta: f64, cutoff: f64) -> (f64, f64) {
    let pref = g * g * cutoff * cutoff / (omega * omega + cutoff * cutoff) / beta;
    let x = beta * omega;
    if x == 0.0 {
        return (pref, pref);
    }
    (pref * x / x.exp_m1(), pref * (-x) / (-x).exp_m1())
}

/// Heating and cooling rates for bath `bath` at frequency `omega`.
pub fn bath_rates(omega: f64, bath: Bath, p: &Params, cutoff: f64) -> (f64, f64) {
    match bath {
        Bath::One => ohmic_rates(omega, p.g1(), p.beta1, cutoff),
        Bath::Two => ohmic_rates(omega, p.g2(), p.beta2, cutoff),
    }
}

/// Eigen-decomposition data behind a global generator.
#[derive(Clone, Debug)]
pub struct GlobalModel {
    pub generator: Generator,
    pub spectrum: Spectrum,
    pub eigenoperators: [EigenoperatorSet; 2],
    /// Cutoff Ω actually used.
    pub cutoff: f64,
    /// Absolute frequency clustering tolerance.
    pub cluster_tol: f64,
}

/// Builds `−i[H_S, ·] + L₁^glob + L₂^glob + L_r`.
pub fn assemble_global_model(p: &Params, space: SpaceSpec) -> Result<GlobalModel> {
    let h = build_hamiltonians(p, space);
    let mut spectrum = Spectrum::of(&h.hs, 0.0)?;
    let a1 = qubit_op(Qubit::One, PauliKind::Minus, space);
    let a2 = qubit_op(Qubit::Two, PauliKind::Minus, space);

    let coupled_max = [&a1, &a2]
        .iter()
        .flat_map(|a| transitions(a, &spectrum))
        .map(|t| t.0.abs())
        .fold(0.0, f64::max);
    let cluster_tol = p.eigencluster_tol * coupled_max.max(f64::MIN_POSITIVE);
    spectrum.recluster(cluster_tol);
    let sets = [
        eigenoperators(&a1, &spectrum, cluster_tol)?,
        eigenoperators(&a2, &spectrum, cluster_tol)?,
    ];
    let cutoff = match p.omega_cutoff {
        OmegaCutoff::Fixed(w) => w,
        OmegaCutoff::AutoMax => sets[0].max_abs_frequency().max(sets[1].max_abs_frequency()),
    };
    if !(cutoff > 0.0) {
        return Err(Error::Numerical(
            "no coupled transitions: the automatic cutoff is zero".into(),
        ));
    }

    let mut parts = Vec::with_capacity(2);
    for (bath, set) in [Bath::One, Bath::Two].into_iter().zip(&sets) {
        let mut terms = Vec::with_capacity(2 * set.ops.len());
        for (omega, a) in &set.ops {
            if !p.keep_zero_frequency && omega.abs() <= cluster_tol {
                continue;
            }
            let (heat, cool) = bath_rates(*omega, bath, p, cutoff);
            terms.push((heat, sparse::adjoint(a.matrix())));
            terms.push((cool, a.matrix().clone()));
        }
        let kind = match bath {
            Bath::One => GeneratorKind::Bath1,
            Bath::Two => GeneratorKind::Bath2,
        };
        parts.push(Superoperator::from_parts_unchecked(
            space,
            lindblad_sum(&terms, space.dim()),
            kind,
        ));
    }
    let l2 = parts.pop().expect("two baths");
    let l1 = parts.pop().expect("two baths");
    let generator = Generator::from_parts(
        ModelKind::Global,
        hamiltonian_super(&h.hs),
        l1,
        l2,
        rotor_load_dissipator(p, space)?,
    )?;
    Ok(GlobalModel {
        generator,
        spectrum,
        eigenoperators: sets,
        cutoff,
        cluster_tol,
    })
}

pub fn assemble_global_liouvillian(p: &Params, space: SpaceSpec) -> Result<Generator> {
    assemble_global_model(p, space).map(|m| m.generator)
}

/// Eigenoperator decomposition of `σᵢ⁻` for one bath, with the cluster
/// tolerance used by [`assemble_global_model`].
pub fn bath_eigenoperators(p: &Params, space: SpaceSpec, bath: Bath) -> Result<EigenoperatorSet> {
    let m = assemble_global_model(p, space)?;
    let [a, b] = m.eigenoperators;
    Ok(match bath {
        Bath::One => a,
        Bath::Two => b,
    })
}

/// `σᵢ⁻` for the given bath.
pub fn coupling_operator(space: SpaceSpec, bath: Bath) -> QOperator {
    qubit_op(bath.qubit(), PauliKind::Minus, space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{steady_state, SteadyOptions};
    use crate::linalg::{hermiticity_defect, max_abs, trace};
    use crate::liouvillian::tests::random_hermitian;
    use crate::model::gibbs_state;
    use crate::operators::make_space;

    #[test]
    fn isolated_qubit_has_one_frequency() {
        let mut p = Params::fig2(0.5);
        p.lambda = 0.0;
        // Two-level ladder with L_z² equal on both levels.
        let s = make_space(-1, 0).unwrap();
        let h = build_hamiltonians(&p, s);
        let spec = Spectrum::of(&h.hs, 1e-9).unwrap();
        let set = eigenoperators(&coupling_operator(s, Bath::One), &spec, 1e-9).unwrap();
        assert_eq!(set.ops.len(), 1);
        assert!((set.ops[0].0 - 2.0 * p.b1).abs() < 1e-12);
    }

    #[test]
    fn decomposition_is_complete_and_ladder_like() {
        let p = Params::fig2(0.5);
        let s = make_space(-3, 5).unwrap();
        let m = assemble_global_model(&p, s).unwrap();
        let h = build_hamiltonians(&p, s).hs;
        for (bath, set) in [Bath::One, Bath::Two].into_iter().zip(&m.eigenoperators) {
            let mut sum = QOperator::zero(s);
            for (omega, a) in &set.ops {
                sum = &sum + a;
                let lhs = &h.commutator(a) + &a.scale_re(*omega);
                assert!(lhs.max_abs() < 1e-8, "ω = {omega}");
            }
            let a = coupling_operator(s, bath);
            assert!((&sum - &a).max_abs() < 1e-10);
        }
        assert!(m.cutoff > 2.0 * p.b2);
    }

    #[test]
    fn negative_frequencies_pair_with_adjoints() {
        // A(−ω) = A†(ω) holds for the Hermitian coupling σˣ = σ⁺ + σ⁻.
        let p = Params::fig2(0.5);
        let s = make_space(-2, 3).unwrap();
        let h = build_hamiltonians(&p, s);
        let spec = Spectrum::of(&h.hs, 1e-9).unwrap();
        let sx = &coupling_operator(s, Bath::One) + &coupling_operator(s, Bath::One).adjoint();
        let set = eigenoperators(&sx, &spec, 1e-9).unwrap();
        for (w, a) in &set.ops {
            let partner = set
                .ops
                .iter()
                .find(|(v, _)| (v + w).abs() < 1e-8)
                .expect("partner frequency");
            assert!((&partner.1 - &a.adjoint()).max_abs() < 1e-10);
        }
        let wider = make_space(-3, 5).unwrap();
        let h2 = build_hamiltonians(&p, wider);
        let spec2 = Spectrum::of(&h2.hs, 1e-9).unwrap();
        let sx2 = &coupling_operator(wider, Bath::One) + &coupling_operator(wider, Bath::One).adjoint();
        assert!(eigenoperators(&sx2, &spec2, 1e-9).unwrap().ops.len() > set.ops.len());
    }

    #[test]
    fn rates_obey_kms_and_reflection() {
        let (h, c) = ohmic_rates(1.0, 1.0, 0.1, 5.0);
        assert!((h / c - (-0.1f64).exp()).abs() < 1e-14);
        let (hn, cn) = ohmic_rates(-1.0, 1.0, 0.1, 5.0);
        assert!((hn - c).abs() < 1e-14 && (cn - h).abs() < 1e-14);
        assert!(h > 0.0 && c > 0.0);
        let (h0, c0) = ohmic_rates(0.0, 0.7, 0.2, 3.0);
        assert!((h0 - 0.49 / 0.2).abs() < 1e-12 && (c0 - h0).abs() < 1e-15);
        for w in [1e-6, 1e-4, 1e-2] {
            let (hw, _) = ohmic_rates(w, 0.7, 0.2, 3.0);
            assert!((hw - h0).abs() < 0.2 * w * h0 + 1e-12);
        }
    }

    #[test]
    fn global_generator_is_trace_and_hermiticity_preserving() {
        let p = Params::fig4(0.5);
        let s = make_space(-2, 4).unwrap();
        let g = assemble_global_liouvillian(&p, s).unwrap();
        let rho = random_hermitian(s.dim(), 5);
        for part in [&g.bath1, &g.bath2, &g.total] {
            assert!(part.trace_defect() < 1e-10);
            let out = part.apply(&rho);
            assert!(trace(&out).norm() < 1e-10);
            assert!(hermiticity_defect(&out) < 1e-10);
        }
    }

    #[test]
    fn gibbs_state_is_stationary_at_equal_temperatures() {
        let mut p = Params::fig2(1.0);
        p.gamma = 0.0;
        let s = make_space(-2, 4).unwrap();
        let g = assemble_global_liouvillian(&p, s).unwrap();
        let h = build_hamiltonians(&p, s);
        let rho = gibbs_state(&h.hs, p.beta1).unwrap().to_dense();
        let qubits = Superoperator::sum(s, [&g.hamiltonian, &g.bath1, &g.bath2], GeneratorKind::Other)
            .unwrap();
        assert!(max_abs(&qubits.apply(&rho)) < 1e-8);
    }

    #[test]
    fn global_steady_state_is_unique_and_physical() {
        let p = Params::fig4(0.4);
        let s = make_space(-3, 8).unwrap();
        let g = assemble_global_liouvillian(&p, s).unwrap();
        let ss = steady_state(&g.total, &SteadyOptions::default()).unwrap();
        assert!(!ss.degenerate);
        assert!(crate::linalg::eigvalsh(&ss.rho)[0] > -1e-8);
    }
}
