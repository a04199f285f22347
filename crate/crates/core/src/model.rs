//! Physical parameters, Hamiltonians, thermal occupations and Gibbs states.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::operators::{
    angular_momentum, qubit_op, rotor_shift, PauliKind, QOperator, Qubit, SpaceSpec,
};
use crate::sparse;

/// Cutoff frequency of the Ohmic spectral density used by the global model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OmegaCutoff {
    /// Largest |transition frequency| among transitions driven by σ₁⁻ or σ₂⁻.
    #[default]
    AutoMax,
    Fixed(f64),
}

/// Hamiltonian paired with the reduced two-qubit state when computing its
/// ergotropy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QubitErgotropyHamiltonian {
    /// `B₁σ₁ᶻ + B₂σ₂ᶻ`
    #[default]
    Free,
    /// Free part plus the rotor-averaged mill coupling `Tr_r[H_I ρ_r]`-weighted
    /// term, i.e. the two-qubit block of `H_S` traced against the rotor state.
    Interacting,
}

/// All model parameters, in units with ħ = 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub b1: f64,
    pub b2: f64,
    /// Mill coupling λ.
    pub lambda: f64,
    /// Rotor moment of inertia I.
    pub inertia: f64,
    /// Base bath coupling; g₁ = g(1 − χ), g₂ = g(1 + χ).
    pub g: f64,
    pub chi: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta_r: f64,
    /// Dissipative-load rate γ.
    pub gamma: f64,
    pub l_min: i64,
    pub l_max: i64,
    #[serde(default)]
    pub omega_cutoff: OmegaCutoff,
    /// Relative clustering tolerance for energies and Bohr frequencies; the
    /// absolute tolerance is this times the largest coupled frequency.
    #[serde(default = "default_eigencluster_tol")]
    pub eigencluster_tol: f64,
    #[serde(default = "default_steady_tol")]
    pub steady_tol: f64,
    #[serde(default = "default_ode_tol")]
    pub ode_tol: f64,
    /// Keep secular terms at ω = 0 in the global model.
    #[serde(default = "default_true")]
    pub keep_zero_frequency: bool,
    #[serde(default)]
    pub qubit_ergotropy_hamiltonian: QubitErgotropyHamiltonian,
}

fn default_eigencluster_tol() -> f64 {
    1e-9
}
fn default_steady_tol() -> f64 {
    1e-10
}
fn default_ode_tol() -> f64 {
    1e-9
}
fn default_true() -> bool {
    true
}

impl Params {
    /// Engine/refrigerator parameter set at a given β₂/β₁.
    pub fn fig2(beta2_over_beta1: f64) -> Self {
        Self {
            b1: 4.0,
            b2: 10.0,
            lambda: 0.1,
            inertia: 1.0,
            g: 1.0,
            chi: 0.0,
            beta1: 0.1,
            beta2: 0.1 * beta2_over_beta1,
            beta_r: 0.09,
            gamma: 5e-5,
            l_min: -10,
            l_max: 30,
            omega_cutoff: OmegaCutoff::AutoMax,
            eigencluster_tol: default_eigencluster_tol(),
            steady_tol: default_steady_tol(),
            ode_tol: default_ode_tol(),
            keep_zero_frequency: true,
            qubit_ergotropy_hamiltonian: QubitErgotropyHamiltonian::Free,
        }
    }

    /// Rectification parameter set (g = 0.5) at a given β₂/β₁.
    pub fn fig4(beta2_over_beta1: f64) -> Self {
        Self {
            g: 0.5,
            ..Self::fig2(beta2_over_beta1)
        }
    }

    /// Truncation study set: equal fields, β₁ = 0.1, β₂ = 0.02, γ = 5e-4.
    pub fn appendix_b() -> Self {
        Self {
            b1: 10.0,
            b2: 10.0,
            beta2: 0.02,
            gamma: 5e-4,
            l_min: -5,
            l_max: 10,
            ..Self::fig2(0.2)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("b1", self.b1),
            ("b2", self.b2),
            ("g", self.g),
            ("inertia", self.inertia),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta_r", self.beta_r),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain {
                    name,
                    reason: format!("must be non-negative, got {v}"),
                });
            }
        }
        if !(self.chi.abs() < 1.0) {
            return Err(Error::Domain {
                name: "chi",
                reason: format!("must satisfy |chi| < 1, got {}", self.chi),
            });
        }
        for (name, v) in [
            ("eigencluster_tol", self.eigencluster_tol),
            ("steady_tol", self.steady_tol),
            ("ode_tol", self.ode_tol),
        ] {
            if !(v > 0.0) {
                return Err(Error::Domain {
                    name,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if let OmegaCutoff::Fixed(w) = self.omega_cutoff {
            if !(w > 0.0) {
                return Err(Error::Domain {
                    name: "omega_cutoff",
                    reason: format!("fixed cutoff must be positive, got {w}"),
                });
            }
        }
        self.space().map(|_| ())
    }

    pub fn space(&self) -> Result<SpaceSpec> {
        SpaceSpec::new(self.l_min, self.l_max)
    }

    pub fn g1(&self) -> f64 {
        self.g * (1.0 - self.chi)
    }

    pub fn g2(&self) -> f64 {
        self.g * (1.0 + self.chi)
    }

    pub fn n1(&self) -> Result<f64> {
        thermal_occupation(self.beta1, self.b1)
    }

    pub fn n2(&self) -> Result<f64> {
        thermal_occupation(self.beta2, self.b2)
    }
}

/// Bose occupation of a mode at frequency 2B: `1 / (e^{2βB} − 1)`.
pub fn thermal_occupation(beta: f64, b: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain {
            name: "beta",
            reason: format!("must be positive, got {beta}"),
        });
    }
    if !(b > 0.0) {
        return Err(Error::Domain {
            name: "B",
            reason: format!("must be positive, got {b}"),
        });
    }
    Ok(1.0 / (2.0 * beta * b).exp_m1())
}

/// Free, interaction and total system Hamiltonians.
#[derive(Clone, Debug)]
pub struct Hamiltonians {
    /// `B₁σ₁ᶻ + B₂σ₂ᶻ + L_z²/2I`
    pub h0: QOperator,
    /// `λ(σ₁⁺σ₂⁻e^{iφ} + σ₁⁻σ₂⁺e^{−iφ})`
    pub hi: QOperator,
    pub hs: QOperator,
}

pub fn build_hamiltonians(p: &Params, space: SpaceSpec) -> Hamiltonians {
    let z1 = qubit_op(Qubit::One, PauliKind::Z, space);
    let z2 = qubit_op(Qubit::Two, PauliKind::Z, space);
    let lz = angular_momentum(space);
    let kinetic = (&lz * &lz).scale_re(0.5 / p.inertia);
    let h0 = &(&z1.scale_re(p.b1) + &z2.scale_re(p.b2)) + &kinetic;

    let p1 = qubit_op(Qubit::One, PauliKind::Plus, space);
    let m2 = qubit_op(Qubit::Two, PauliKind::Minus, space);
    let e = rotor_shift(space);
    let forward = &(&p1 * &m2) * &e;
    let hi = (&forward + &forward.adjoint()).scale_re(p.lambda).pruned(0.0);
    let hs = &h0 + &hi;
    Hamiltonians {
        h0: h0.with_hermitian_flag(true),
        hi: hi.with_hermitian_flag(true),
        hs: hs.with_hermitian_flag(true),
    }
}

/// Eigendecomposition of a Hermitian operator with degeneracy clusters.
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Ascending.
    pub energies: Vec<f64>,
    /// Column k is the eigenvector of `energies[k]`.
    pub vectors: CMat,
    /// Index ranges of (numerically) degenerate eigenvalues.
    pub clusters: Vec<std::ops::Range<usize>>,
    pub cluster_tol: f64,
}

impl Spectrum {
    /// Diagonalizes `h` block by block over the connected components of its
    /// sparsity graph, so eigenvectors never mix decoupled sectors.
    pub fn of(h: &QOperator, cluster_tol: f64) -> Result<Self> {
        let n = h.space().dim();
        let mut pairs: Vec<(f64, Vec<(usize, Complex64)>)> = Vec::with_capacity(n);
        for comp in sparse::components(h.matrix()) {
            let block = sparse::to_dense(&sparse::principal_submatrix(h.matrix(), &comp));
            let (w, v) = linalg::eigh(&block);
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical("eigensolver produced non-finite values".into()));
            }
            for (k, &wk) in w.iter().enumerate() {
                let col = comp
                    .iter()
                    .enumerate()
                    .map(|(r, &i)| (i, v[(r, k)]))
                    .filter(|(_, x)| x.norm() > 0.0)
                    .collect();
                pairs.push((wk, col));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut vectors = CMat::zeros(n, n);
        let mut energies = Vec::with_capacity(n);
        for (k, (w, col)) in pairs.into_iter().enumerate() {
            energies.push(w);
            for (i, x) in col {
                vectors[(i, k)] = x;
            }
        }
        let clusters = cluster_sorted(&energies, cluster_tol);
        Ok(Self {
            energies,
            vectors,
            clusters,
            cluster_tol,
        })
    }

    /// Regroups the eigenvalues with a new absolute tolerance.
    pub fn recluster(&mut self, cluster_tol: f64) {
        self.clusters = cluster_sorted(&self.energies, cluster_tol);
        self.cluster_tol = cluster_tol;
    }

    /// Mean energy of each cluster.
    pub fn cluster_energies(&self) -> Vec<f64> {
        self.clusters
            .iter()
            .map(|r| self.energies[r.clone()].iter().sum::<f64>() / r.len() as f64)
            .collect()
    }

    /// Cluster index of every eigenvector.
    pub fn cluster_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.energies.len()];
        for (c, r) in self.clusters.iter().enumerate() {
            for k in r.clone() {
                out[k] = c;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> CMat {
        let d = DVector::from_iterator(
            self.energies.len(),
            self.energies.iter().map(|&e| Complex64::new(e, 0.0)),
        );
        &self.vectors * CMat::from_diagonal(&d) * self.vectors.adjoint()
    }
}

/// Groups a sorted sequence into runs whose consecutive gaps are `<= tol`.
pub(crate) fn cluster_sorted(values: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] > tol {
            out.push(start..k);
            start = k;
        }
    }
    out
}

/// `e^{−βH} / Tr e^{−βH}`.
pub fn gibbs_state(h: &QOperator, beta: f64) -> Result<QOperator> {
    if !(beta >= 0.0) {
        return Err(Error::Domain {
            name: "beta",
            reason: format!("must be non-negative, got {beta}"),
        });
    }
    let spec = Spectrum::of(h, 0.0)?;
    let e0 = spec.energies.first().copied().unwrap_or(0.0);
    let weights: Vec<f64> = spec.energies.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let d = DVector::from_iterator(
        weights.len(),
        weights.iter().map(|&w| Complex64::new(w / z, 0.0)),
    );
    let rho = &spec.vectors * CMat::from_diagonal(&d) * spec.vectors.adjoint();
    Ok(QOperator::from_dense(h.space(), &linalg::hermitize(&rho))?.with_hermitian_flag(true))
}

/// Product of local Gibbs states: qubit i at βᵢ under Bᵢσᵢᶻ, rotor at β_r
/// under L_z²/2I.
pub fn product_gibbs(p: &Params, space: SpaceSpec) -> CMat {
    let q = |beta: f64, b: f64| {
        let pe = 1.0 / (1.0 + (2.0 * beta * b).exp());
        CMat::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(1.0 - pe, 0.0),
            Complex64::new(pe, 0.0),
        ]))
    };
    let lmin_sq = space
        .ladder()
        .map(|l| (l * l) as f64)
        .fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = space
        .ladder()
        .map(|l| (-p.beta_r * ((l * l) as f64 - lmin_sq) / (2.0 * p.inertia)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    let rot = CMat::from_diagonal(&DVector::from_iterator(
        w.len(),
        w.iter().map(|&x| Complex64::new(x / z, 0.0)),
    ));
    q(p.beta1, p.b1).kronecker(&q(p.beta2, p.b2)).kronecker(&rot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::operators::make_space;

    #[test]
    fn occupation_values() {
        // 1/(e^{0.8} − 1), 1/(e^{0.4} − 1)
        assert!((thermal_occupation(0.1, 4.0).unwrap() - 0.815_970_0).abs() < 1e-5);
        assert!((thermal_occupation(0.02, 10.0).unwrap() - 2.033_244_4).abs() < 1e-5);
        assert!(thermal_occupation(50.0, 10.0).unwrap() < 1e-300);
        assert!(thermal_occupation(0.0, 1.0).is_err());
        assert!(thermal_occupation(1.0, -1.0).is_err());
        let a = thermal_occupation(0.1, 2.0).unwrap();
        let b = thermal_occupation(0.1, 3.0).unwrap();
        assert!(a > b && b > 0.0);
    }

    #[test]
    fn hamiltonian_structure() {
        let mut p = Params::fig2(0.5);
        p.lambda = 0.0;
        let s = make_space(-2, 3).unwrap();
        let h = build_hamiltonians(&p, s);
        assert_eq!(h.hi.matrix().nnz(), 0);
        let hs = h.hs.to_dense();
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                if i != j {
                    assert_eq!(hs[(i, j)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn mill_matrix_element_on_smallest_ladder() {
        let p = Params::fig2(0.5);
        let s = make_space(0, 1).unwrap();
        let h = build_hamiltonians(&p, s);
        let hi = h.hi.to_dense();
        // ⟨↑↓, l+1| H_I |↓↑, l⟩ = λ
        let from = s.index(0, 1, 0);
        let to = s.index(1, 0, 1);
        assert!((hi[(to, from)] - Complex64::new(p.lambda, 0.0)).norm() < 1e-15);
        assert!((hi[(from, to)] - Complex64::new(p.lambda, 0.0)).norm() < 1e-15);
        assert!(h.hs.hermiticity_defect() < 1e-12);
        assert!(h.hi.trace().norm() < 1e-15);
    }

    #[test]
    fn mill_conserves_excitation_and_twist() {
        let p = Params::fig2(0.5);
        let s = make_space(-3, 3).unwrap();
        let h = build_hamiltonians(&p, s);
        let z1 = qubit_op(Qubit::One, PauliKind::Z, s);
        let z2 = qubit_op(Qubit::Two, PauliKind::Z, s);
        assert!(h.hi.commutator(&(&z1 + &z2)).max_abs() < 1e-15);
        // (σ₁ᶻ − σ₂ᶻ)/4 − L_z is conserved: one excitation moved 2 → 1 goes
        // with one rotor quantum.
        let lz = angular_momentum(s);
        let twist = &(&z1 - &z2).scale_re(0.25) - &lz;
        assert!(h.hs.commutator(&twist).max_abs() < 1e-14);
    }

    #[test]
    fn spectrum_invariants() {
        let p = Params::fig2(0.5);
        let s = make_space(-4, 6).unwrap();
        let h = build_hamiltonians(&p, s);
        let spec = Spectrum::of(&h.hs, 1e-9).unwrap();
        let n = s.dim();
        let u = &spec.vectors;
        assert!(max_abs(&(u.adjoint() * u - CMat::identity(n, n))) < 1e-10);
        assert!(max_abs(&(spec.reconstruct() - h.hs.to_dense())) < 1e-10 * h.hs.max_abs());
        assert!(spec.energies.windows(2).all(|w| w[0] <= w[1]));
        // ±l degeneracy of the |gg⟩ rotor ladder is picked up
        assert!(spec.clusters.iter().any(|r| r.len() > 1));
    }

    #[test]
    fn gibbs_limits() {
        let p = Params::fig2(0.5);
        let s = make_space(-2, 2).unwrap();
        let h = build_hamiltonians(&p, s);
        let hot = gibbs_state(&h.hs, 1e-14).unwrap().to_dense();
        let mixed = CMat::identity(s.dim(), s.dim()) * Complex64::new(1.0 / s.dim() as f64, 0.0);
        assert!(max_abs(&(hot - mixed)) < 1e-12);

        let rho = gibbs_state(&h.hs, 0.3).unwrap();
        assert!((rho.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(rho.commutator(&h.hs).max_abs() < 1e-10);
        assert!(linalg::eigvalsh(&rho.to_dense())[0] > -1e-14);
    }

    #[test]
    fn single_qubit_gibbs_population() {
        // λ = 0 and a single-level-dominated rotor: qubit 1 excited
        // population equals n/(2n+1).
        let mut p = Params::fig2(0.5);
        p.lambda = 0.0;
        let s = make_space(0, 1).unwrap();
        let z1 = qubit_op(Qubit::One, PauliKind::Z, s).scale_re(p.b1);
        let rho = gibbs_state(&z1, p.beta1).unwrap().to_dense();
        let red = crate::operators::partial_trace(&rho, s, &[crate::operators::Subsystem::Qubit1])
            .unwrap();
        let n = thermal_occupation(p.beta1, p.b1).unwrap();
        assert!((red.matrix[(1, 1)].re - n / (2.0 * n + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn params_validation() {
        assert!(Params::fig2(0.5).validate().is_ok());
        let mut p = Params::fig2(0.5);
        p.chi = 1.0;
        assert!(p.validate().is_err());
        let mut p = Params::fig2(0.5);
        p.gamma = -1.0;
        assert!(p.validate().is_err());
        let mut p = Params::fig2(0.5);
        p.l_min = 5;
        p.l_max = 5;
        assert!(p.validate().is_err());
        let p = Params::fig2(0.5);
        assert!((p.g1() - 1.0).abs() < 1e-15 && (p.g2() - 1.0).abs() < 1e-15);
    }
}
