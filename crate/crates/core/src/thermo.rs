//! Heat currents, work rates, rotor powers, ergotropy and the operating
//! regime of the machine.
//!
//! Sign convention: every flow is the rate of change of system energy
//! attributed to that channel, so a positive heat current enters the system.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::liouvillian::{Generator, ModelKind, Superoperator};
use crate::model::{build_hamiltonians, Hamiltonians, Params, QubitErgotropyHamiltonian};
use crate::operators::{
    angular_momentum, partial_trace, qubit_op, rotor_shift, PauliKind, Qubit, SpaceSpec, Subsystem,
};

/// Relative agreement required between the superoperator and closed-form
/// evaluations of the local heat and work currents.
const CROSS_CHECK_TOL: f64 = 1e-10;

/// Dead-band for sign tests, relative to the largest current.
pub const SIGN_DEADBAND: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Engine,
    Refrigerator,
    Accelerator,
    Other,
}

impl Operation {
    pub fn as_str(self) -> &'static str {
        match self {
            Operation::Engine => "engine",
            Operation::Refrigerator => "refrigerator",
            Operation::Accelerator => "accelerator",
            Operation::Other => "other",
        }
    }
}

impl std::fmt::Display for Operation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermoReport {
    pub model: ModelKind,
    pub q1: f64,
    pub q2: f64,
    pub qr: f64,
    /// Hidden collision work; identically zero for the global model.
    pub w_q: f64,
    /// Work done on the mill by the load, `Tr[H_I L_r ρ]`.
    pub w_r: f64,
    pub u_dot: f64,
    pub first_law_residual: f64,
    pub classification: Operation,
    pub efficiency: Option<f64>,
    pub cop: Option<f64>,
    pub carnot_efficiency: f64,
    pub carnot_cop: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub time: f64,
    pub w_kin: f64,
    pub w_int: f64,
    pub q_ba: f64,
    pub w_net: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatFlows {
    pub q1: f64,
    pub q2: f64,
    pub qr: f64,
}

/// `Tr[A · L(ρ)]` for a Hermitian `A`.
fn flow(a: &crate::operators::QOperator, l: &Superoperator, rho: &CMat) -> f64 {
    a.expect_dense(&l.apply(rho)).re
}

fn require_model(g: &Generator, model: ModelKind) -> Result<()> {
    if g.model != model {
        return Err(Error::GeneratorMismatch(format!(
            "expected a {model:?} generator, got {:?}",
            g.model
        )));
    }
    Ok(())
}

/// Local heat currents `Q_i = Tr[H₀ L_i ρ]`, `Q_r = Tr[H₀ L_r ρ]`. The qubit
/// currents are cross-checked against
/// `2Bᵢgᵢ²(nᵢ⟨σᵢ⁻σᵢ⁺⟩ − (nᵢ+1)⟨σᵢ⁺σᵢ⁻⟩)`.
pub fn heat_flows_local(rho: &CMat, g: &Generator, p: &Params) -> Result<HeatFlows> {
    require_model(g, ModelKind::Local)?;
    let space = g.space();
    let h = build_hamiltonians(p, space);
    let q1 = flow(&h.h0, &g.bath1, rho);
    let q2 = flow(&h.h0, &g.bath2, rho);
    let qr = flow(&h.h0, &g.rotor, rho);

    let explicit = |q: Qubit, b: f64, gi: f64, n: f64| {
        let plus = qubit_op(q, PauliKind::Plus, space);
        let minus = qubit_op(q, PauliKind::Minus, space);
        let ground = (&minus * &plus).expect_dense(rho).re;
        let excited = (&plus * &minus).expect_dense(rho).re;
        2.0 * b * gi * gi * (n * ground - (n + 1.0) * excited)
    };
    let e1 = explicit(Qubit::One, p.b1, p.g1(), p.n1()?);
    let e2 = explicit(Qubit::Two, p.b2, p.g2(), p.n2()?);
    let scale = q1.abs().max(q2.abs()).max(e1.abs()).max(e2.abs()).max(1e-300);
    let defect = (q1 - e1).abs().max((q2 - e2).abs());
    if defect > CROSS_CHECK_TOL * scale.max(1.0) {
        return Err(Error::Numerical(format!(
            "local heat-current cross-check failed: defect {defect:.3e}"
        )));
    }
    Ok(HeatFlows { q1, q2, qr })
}

/// `(W^(Q), W^(r)) = (Tr[H_I (L₁+L₂)ρ], Tr[H_I L_r ρ])`. `W^(Q)` is
/// cross-checked against
/// `−½λ[g₁²(2n₁+1) + g₂²(2n₂+1)] · 2 Re⟨σ₁⁺σ₂⁻e^{iφ}⟩`.
pub fn work_flows_local(rho: &CMat, g: &Generator, p: &Params) -> Result<(f64, f64)> {
    require_model(g, ModelKind::Local)?;
    let space = g.space();
    let h = build_hamiltonians(p, space);
    let w_q = flow(&h.hi, &g.bath1, rho) + flow(&h.hi, &g.bath2, rho);
    let w_r = flow(&h.hi, &g.rotor, rho);

    let (n1, n2) = (p.n1()?, p.n2()?);
    let mill = &(&qubit_op(Qubit::One, PauliKind::Plus, space)
        * &qubit_op(Qubit::Two, PauliKind::Minus, space))
        * &rotor_shift(space);
    let corr = mill.expect_dense(rho);
    let pref = -0.5
        * p.lambda
        * (p.g1().powi(2) * (2.0 * n1 + 1.0) + p.g2().powi(2) * (2.0 * n2 + 1.0));
    let explicit = pref * 2.0 * corr.re;
    let scale = w_q.abs().max(explicit.abs()).max(1.0);
    if (w_q - explicit).abs() > CROSS_CHECK_TOL * scale {
        return Err(Error::Numerical(format!(
            "hidden-work cross-check failed: {w_q:e} vs {explicit:e}"
        )));
    }
    Ok((w_q, w_r))
}

/// Global heat currents `Q_i = Tr[H_S L_i ρ]`. The rotor current uses `H₀`
/// so that `Tr[H_I L_r ρ]` stays separate as the load's work correction.
pub fn heat_flows_global(rho: &CMat, g: &Generator, p: &Params) -> Result<HeatFlows> {
    require_model(g, ModelKind::Global)?;
    let h = build_hamiltonians(p, g.space());
    Ok(HeatFlows {
        q1: flow(&h.hs, &g.bath1, rho),
        q2: flow(&h.hs, &g.bath2, rho),
        qr: flow(&h.h0, &g.rotor, rho),
    })
}

/// Full report for either model.
pub fn thermo_report(rho: &CMat, g: &Generator, p: &Params) -> Result<ThermoReport> {
    let h = build_hamiltonians(p, g.space());
    let (flows, w_q, w_r) = match g.model {
        ModelKind::Local => {
            let f = heat_flows_local(rho, g, p)?;
            let (wq, wr) = work_flows_local(rho, g, p)?;
            (f, wq, wr)
        }
        ModelKind::Global => {
            let f = heat_flows_global(rho, g, p)?;
            (f, 0.0, flow(&h.hi, &g.rotor, rho))
        }
    };
    Ok(assemble_report(g.model, flows, w_q, w_r, u_dot(rho, g, &h), p))
}

fn u_dot(rho: &CMat, g: &Generator, h: &Hamiltonians) -> f64 {
    flow(&h.hs, &g.total, rho)
}

fn assemble_report(
    model: ModelKind,
    f: HeatFlows,
    w_q: f64,
    w_r: f64,
    u_dot: f64,
    p: &Params,
) -> ThermoReport {
    let classification = classify_operation(f.q1, f.q2, w_q, SIGN_DEADBAND);
    let m = performance_metrics(classification, f.q1, f.q2, w_q, p);
    ThermoReport {
        model,
        q1: f.q1,
        q2: f.q2,
        qr: f.qr,
        w_q,
        w_r,
        u_dot,
        first_law_residual: u_dot - (f.q1 + f.q2 + f.qr + w_q + w_r),
        classification,
        efficiency: m.efficiency,
        cop: m.cop,
        carnot_efficiency: m.carnot_efficiency,
        carnot_cop: m.carnot_cop,
    }
}

/// Sign pattern of `(Q₁, Q₂, W^(Q))`. Any flow within
/// `deadband · max(|Q₁|, |Q₂|, |W^(Q)|)` of zero gives [`Operation::Other`].
pub fn classify_operation(q1: f64, q2: f64, w_q: f64, deadband: f64) -> Operation {
    let eps = deadband * q1.abs().max(q2.abs()).max(w_q.abs());
    if [q1, q2, w_q].iter().any(|x| x.abs() <= eps || !x.is_finite()) {
        return Operation::Other;
    }
    match (q1 > 0.0, q2 > 0.0, w_q > 0.0) {
        (false, true, false) => Operation::Engine,
        (true, false, true) => Operation::Refrigerator,
        (false, true, true) => Operation::Accelerator,
        _ => Operation::Other,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    /// `−W^(Q)/Q₂`, engines only.
    pub efficiency: Option<f64>,
    /// `Q₁/W^(Q)`, refrigerators only.
    pub cop: Option<f64>,
    /// `1 − β₂/β₁`
    pub carnot_efficiency: f64,
    /// `β₁/(β₁ − β₂)`
    pub carnot_cop: f64,
}

pub fn performance_metrics(op: Operation, q1: f64, q2: f64, w_q: f64, p: &Params) -> Metrics {
    let ratio = |num: f64, den: f64| (den != 0.0).then(|| num / den);
    Metrics {
        efficiency: (op == Operation::Engine).then(|| ratio(-w_q, q2)).flatten(),
        cop: (op == Operation::Refrigerator).then(|| ratio(q1, w_q)).flatten(),
        carnot_efficiency: 1.0 - p.beta2 / p.beta1,
        carnot_cop: p.beta1 / (p.beta1 - p.beta2),
    }
}

/// Kinetic, intrinsic, back-action and net rotor powers at `rho`.
pub fn rotor_powers(rho: &CMat, g: &Generator, p: &Params, time: f64) -> PowerReport {
    let lz = angular_momentum(g.space());
    let lz2 = &lz * &lz;
    let two_i = 2.0 * p.inertia;
    let l_rho = g.total.apply(rho);
    let w_kin = lz2.expect_dense(&l_rho).re / two_i;
    let w_int = lz2.expect_dense(&g.hamiltonian.apply(rho)).re / two_i;
    let diss = g.bath1.apply(rho) + g.bath2.apply(rho) + g.rotor.apply(rho);
    let q_ba = lz2.expect_dense(&diss).re / two_i;
    let w_net = lz.expect_dense(rho).re * lz.expect_dense(&l_rho).re / p.inertia;
    PowerReport {
        time,
        w_kin,
        w_int,
        q_ba,
        w_net,
    }
}

/// `Tr[ρH] − Σ_k r_k↓ ε_k↑`, the work extractable by unitaries.
pub fn ergotropy(rho: &CMat, h: &CMat) -> f64 {
    let mut r = linalg::eigvalsh(rho);
    r.reverse();
    let eps = linalg::eigvalsh(h);
    let passive: f64 = r.iter().zip(&eps).map(|(a, b)| a * b).sum();
    let energy = linalg::trace_product(rho, h).re;
    (energy - passive).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsystemErgotropies {
    pub total: f64,
    pub qubits: f64,
    pub rotor: f64,
    pub qubit1: f64,
    pub qubit2: f64,
}

fn diag(values: &[f64]) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| Complex64::new(v, 0.0)),
    ))
}

/// Ergotropies of the full state (under `H_S`), the two-qubit reduction, the
/// rotor reduction (`L_z²/2I`) and each single qubit (`Bᵢσᵢᶻ`).
pub fn subsystem_ergotropies(
    rho: &CMat,
    p: &Params,
    space: SpaceSpec,
) -> Result<SubsystemErgotropies> {
    let h = build_hamiltonians(p, space);
    let total = ergotropy(rho, &h.hs.to_dense());

    let qubits = partial_trace(rho, space, &[Subsystem::Qubit1, Subsystem::Qubit2])?.matrix;
    let z1 = diag(&[-p.b1, p.b1]);
    let z2 = diag(&[-p.b2, p.b2]);
    let id2 = CMat::identity(2, 2);
    let mut h_q = z1.kronecker(&id2) + id2.kronecker(&z2);
    if p.qubit_ergotropy_hamiltonian == QubitErgotropyHamiltonian::Interacting {
        let rotor = partial_trace(rho, space, &[Subsystem::Rotor])?.matrix;
        let e = crate::sparse::to_dense(&crate::operators::rotor_e(space));
        let mean_e = linalg::trace_product(&rotor, &e);
        // σ₁⁺σ₂⁻ maps |↓↑⟩ (index 1) to |↑↓⟩ (index 2).
        h_q[(2, 1)] += mean_e * p.lambda;
        h_q[(1, 2)] += mean_e.conj() * p.lambda;
    }
    let qubits_erg = ergotropy(&qubits, &h_q);

    let rotor = partial_trace(rho, space, &[Subsystem::Rotor])?.matrix;
    let kin: Vec<f64> = space
        .ladder()
        .map(|l| (l * l) as f64 / (2.0 * p.inertia))
        .collect();
    let rotor_erg = ergotropy(&rotor, &diag(&kin));

    let q1 = partial_trace(rho, space, &[Subsystem::Qubit1])?.matrix;
    let q2 = partial_trace(rho, space, &[Subsystem::Qubit2])?.matrix;
    Ok(SubsystemErgotropies {
        total,
        qubits: qubits_erg,
        rotor: rotor_erg,
        qubit1: ergotropy(&q1, &z1),
        qubit2: ergotropy(&q2, &z2),
    })
}
