//! Repeated-interaction model of the two heat baths.
//!
//! Each collision couples qubit `i` to a fresh thermal oscillator at
//! frequency `2Bᵢ` through `(gᵢ/√τ)(σᵢ⁻a† + σᵢ⁺a)` for a time `τ`, with the
//! system Hamiltonian switched on. The oscillators are then traced out. The
//! rotor load has no microscopic model, so a load step `e^{τ L_r}` follows
//! every collision.
//!
//! The joint unitary conserves `e₁ + e₂ + m₁ + m₂` and `e₁ + m₁ − l`, so it
//! is exponentiated block by block. Because the oscillators start diagonal,
//! the reduced map on `vec(ρ_S)` and every energy functional are linear in
//! `ρ_S` and are precomputed once per `τ`.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::liouvillian::{rotor_load_factor, unvectorize, vectorize};
use crate::model::{build_hamiltonians, Hamiltonians, Params};
use crate::operators::SpaceSpec;
use crate::sparse::{self, Csr};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default bound on the discarded thermal tail of each bath oscillator.
pub const TAIL_MASS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct CollisionConfig {
    pub tau: f64,
    /// Fock levels kept for the bath-1 and bath-2 oscillators.
    pub n_fock: [usize; 2],
    pub steps: usize,
    pub expm_tol: f64,
}

impl CollisionConfig {
    /// Chooses `n_fock` so that each bath's discarded tail is below
    /// [`TAIL_MASS`].
    pub fn adaptive(p: &Params, tau: f64, steps: usize) -> Self {
        Self {
            tau,
            n_fock: [
                fock_levels_for(p.beta1, p.b1, TAIL_MASS),
                fock_levels_for(p.beta2, p.b2, TAIL_MASS),
            ],
            steps,
            expm_tol: 1e-12,
        }
    }
}

/// Smallest number of Fock levels whose thermal tail mass `x^n`,
/// `x = e^{−2βB}`, is below `tail`.
pub fn fock_levels_for(beta: f64, b: f64, tail: f64) -> usize {
    let ratio = tail.ln() / (-2.0 * beta * b);
    (ratio.floor() as usize + 1).max(1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BathState {
    /// Renormalized populations of the kept levels.
    pub populations: Vec<f64>,
    /// Thermal weight of the discarded levels before renormalization.
    pub tail_mass: f64,
    pub truncation_warning: Option<String>,
}

impl BathState {
    pub fn mean_occupation(&self) -> f64 {
        self.populations
            .iter()
            .enumerate()
            .map(|(m, p)| m as f64 * p)
            .sum()
    }
}

/// Thermal state of one oscillator at frequency `2B`, truncated to `n_fock`
/// levels and renormalized.
pub fn bath_oscillator_state(beta: f64, b: f64, n_fock: usize) -> Result<BathState> {
    if n_fock == 0 {
        return Err(Error::Argument("n_fock must be at least 1".into()));
    }
    let x = (-2.0 * beta * b).exp();
    let raw: Vec<f64> = (0..n_fock).map(|m| (1.0 - x) * x.powi(m as i32)).collect();
    let kept: f64 = raw.iter().sum();
    let tail_mass = x.powi(n_fock as i32);
    let truncation_warning = (tail_mass > TAIL_MASS).then(|| {
        format!("bath oscillator tail mass {tail_mass:.3e} exceeds {TAIL_MASS:e} with {n_fock} levels")
    });
    Ok(BathState {
        populations: raw.iter().map(|p| p / kept).collect(),
        tail_mass,
        truncation_warning,
    })
}

/// Outcome of one collision followed by one load step.
#[derive(Clone, Debug)]
pub struct CollisionStep {
    pub rho: CMat,
    /// Heat from bath i, `−ΔTr[H_{B,i} ρ_SB]`.
    pub q1: f64,
    pub q2: f64,
    /// `Tr[(H_S + H_B) Δρ_SB]`.
    pub w: f64,
    /// Load step: `ΔTr[H₀ ρ]` and `ΔTr[H_I ρ]`.
    pub qr: f64,
    pub wr: f64,
    /// `|ΔE_S + ΔE_B + Δ⟨H_int⟩|` over the collision; zero for an exact
    /// unitary.
    pub energy_audit: f64,
}

/// Precomputed collision channel for fixed `(p, τ, n_fock)`.
#[derive(Clone, Debug)]
pub struct CollisionMap {
    space: SpaceSpec,
    tau: f64,
    phi: Csr,
    /// Linear functionals on `vec(ρ_S)` giving post-collision
    /// `Tr[X ρ_SB]` for X = H_B1, H_B2, H_int.
    post_b1: Vec<Complex64>,
    post_b2: Vec<Complex64>,
    post_int: Vec<Complex64>,
    pre_b: [f64; 2],
    load: Csr,
    hams: Hamiltonians,
    pub warnings: Vec<String>,
}

struct Block {
    states: Vec<usize>,
    u: CMat,
    /// `U† X U` for X = H_B1, H_B2, H_int.
    obs: [CMat; 3],
}

impl CollisionMap {
    pub fn new(p: &Params, space: SpaceSpec, cfg: &CollisionConfig) -> Result<Self> {
        if !(cfg.tau > 0.0) {
            return Err(Error::Domain {
                name: "tau",
                reason: format!("must be positive, got {}", cfg.tau),
            });
        }
        let [nf1, nf2] = cfg.n_fock;
        let bath1 = bath_oscillator_state(p.beta1, p.b1, nf1)?;
        let bath2 = bath_oscillator_state(p.beta2, p.b2, nf2)?;
        let warnings: Vec<String> = [&bath1, &bath2]
            .iter()
            .filter_map(|b| b.truncation_warning.clone())
            .collect();

        let d = space.dim();
        let hams = build_hamiltonians(p, space);
        let joint = |s: usize, m1: usize, m2: usize| (s * nf1 + m1) * nf2 + m2;
        let split = |j: usize| (j / (nf1 * nf2), (j / nf2) % nf1, j % nf2);
        let total = d * nf1 * nf2;

        // Block labels from the two conserved charges.
        let mut key_of = HashMap::new();
        let mut block_of = vec![0usize; total];
        let mut pos_of = vec![0usize; total];
        let mut blocks_states: Vec<Vec<usize>> = Vec::new();
        for j in 0..total {
            let (s, m1, m2) = split(j);
            let lab = space.label(s);
            let (e1, e2) = (lab.e1 as i64, lab.e2 as i64);
            let key = (e1 + e2 + m1 as i64 + m2 as i64, e1 + m1 as i64 - lab.l);
            let b = *key_of.entry(key).or_insert_with(|| {
                blocks_states.push(Vec::new());
                blocks_states.len() - 1
            });
            block_of[j] = b;
            pos_of[j] = blocks_states[b].len();
            blocks_states[b].push(j);
        }

        let inv_sqrt_tau = 1.0 / cfg.tau.sqrt();
        let (g1, g2) = (p.g1() * inv_sqrt_tau, p.g2() * inv_sqrt_tau);
        let hs = &hams.hs;
        let mut blocks = Vec::with_capacity(blocks_states.len());
        for states in blocks_states {
            let k = states.len();
            let mut h = CMat::zeros(k, k);
            let mut hb1 = CMat::zeros(k, k);
            let mut hb2 = CMat::zeros(k, k);
            let mut hint = CMat::zeros(k, k);
            for (c, &j) in states.iter().enumerate() {
                let (s, m1, m2) = split(j);
                let row = hs.matrix().row(s);
                for (&t, v) in row.col_indices().iter().zip(row.values()) {
                    // H_S[s, t]: column t maps to row s.
                    let jt = joint(t, m1, m2);
                    h[(c, pos_of[jt])] += *v;
                }
                hb1[(c, c)] = Complex64::new(2.0 * p.b1 * m1 as f64, 0.0);
                hb2[(c, c)] = Complex64::new(2.0 * p.b2 * m2 as f64, 0.0);
                let lab = space.label(s);
                // σᵢ⁻ a† and σᵢ⁺ a acting on column c.
                let mut couple = |target: usize, amp: f64| {
                    debug_assert_eq!(block_of[target], block_of[j]);
                    hint[(pos_of[target], c)] += Complex64::new(amp, 0.0);
                };
                let s_flip1 = space.index(1 - lab.e1, lab.e2, lab.l);
                let s_flip2 = space.index(lab.e1, 1 - lab.e2, lab.l);
                if lab.e1 == 1 && m1 + 1 < nf1 {
                    couple(joint(s_flip1, m1 + 1, m2), g1 * ((m1 + 1) as f64).sqrt());
                }
                if lab.e1 == 0 && m1 > 0 {
                    couple(joint(s_flip1, m1 - 1, m2), g1 * (m1 as f64).sqrt());
                }
                if lab.e2 == 1 && m2 + 1 < nf2 {
                    couple(joint(s_flip2, m1, m2 + 1), g2 * ((m2 + 1) as f64).sqrt());
                }
                if lab.e2 == 0 && m2 > 0 {
                    couple(joint(s_flip2, m1, m2 - 1), g2 * (m2 as f64).sqrt());
                }
            }
            let full = &h + &hb1 + &hb2 + &hint;
            let u = linalg::expm(&(full * Complex64::new(0.0, -cfg.tau)), cfg.expm_tol)?;
            let ud = u.adjoint();
            let obs = [&ud * &hb1 * &u, &ud * &hb2 * &u, &ud * &hint * &u];
            blocks.push(Block { states, u, obs });
        }

        // Reduced channel and post-collision functionals.
        let w_bath: Vec<f64> = (0..nf1 * nf2)
            .map(|m| bath1.populations[m / nf2] * bath2.populations[m % nf2])
            .collect();
        let mut post = [vec![ZERO; d * d], vec![ZERO; d * d], vec![ZERO; d * d]];
        // Column (s, m) of U grouped by outgoing bath state.
        let column = |s: usize, m: usize| -> Vec<(usize, usize, Complex64)> {
            let j = s * nf1 * nf2 + m;
            let blk = &blocks[block_of[j]];
            let c = pos_of[j];
            let mut out: Vec<(usize, usize, Complex64)> = blk
                .states
                .iter()
                .enumerate()
                .filter_map(|(r, &jr)| {
                    let a = blk.u[(r, c)];
                    (a.norm() > 0.0).then(|| (jr % (nf1 * nf2), jr / (nf1 * nf2), a))
                })
                .collect();
            out.sort_by_key(|e| (e.0, e.1));
            out
        };
        let mut trips: Vec<(usize, usize, Complex64)> = Vec::new();
        for m in 0..nf1 * nf2 {
            let wm = w_bath[m];
            if wm == 0.0 {
                continue;
            }
            let cols: Vec<_> = (0..d).map(|s| column(s, m)).collect();
            for s in 0..d {
                let js = s * nf1 * nf2 + m;
                for sp in 0..d {
                    let jsp = sp * nf1 * nf2 + m;
                    let input = sp * d + s;
                    if block_of[js] == block_of[jsp] {
                        let blk = &blocks[block_of[js]];
                        let (r, c) = (pos_of[jsp], pos_of[js]);
                        for (k, o) in blk.obs.iter().enumerate() {
                            post[k][input] += o[(r, c)] * wm;
                        }
                    }
                    let (a, b) = (&cols[s], &cols[sp]);
                    let (mut i, mut k) = (0, 0);
                    while i < a.len() && k < b.len() {
                        match a[i].0.cmp(&b[k].0) {
                            std::cmp::Ordering::Less => i += 1,
                            std::cmp::Ordering::Greater => k += 1,
                            std::cmp::Ordering::Equal => {
                                let mp = a[i].0;
                                let i_end = (i..a.len()).find(|&x| a[x].0 != mp).unwrap_or(a.len());
                                let k_end = (k..b.len()).find(|&x| b[x].0 != mp).unwrap_or(b.len());
                                for &(_, t, av) in &a[i..i_end] {
                                    for &(_, tp, bv) in &b[k..k_end] {
                                        trips.push((tp * d + t, input, av * bv.conj() * wm));
                                    }
                                }
                                i = i_end;
                                k = k_end;
                            }
                        }
                    }
                }
            }
        }
        let phi = sparse::prune(&sparse::from_triplets(d * d, d * d, trips), 1e-300);
        let [post_b1, post_b2, post_int] = post;
        Ok(Self {
            space,
            tau: cfg.tau,
            phi,
            post_b1,
            post_b2,
            post_int,
            pre_b: [
                2.0 * p.b1 * bath1.mean_occupation(),
                2.0 * p.b2 * bath2.mean_occupation(),
            ],
            load: rotor_load_factor(p, space),
            hams,
            warnings,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Reduced collision channel on column-stacked `ρ_S`.
    pub fn channel(&self) -> &Csr {
        &self.phi
    }

    /// `e^{τ L_r}` on every qubit block of `ρ`, by a Taylor series.
    fn load_step(&self, rho: &CMat) -> CMat {
        let n = self.space.n_rotor();
        let mut out = rho.clone();
        if self.load.nnz() == 0 {
            return out;
        }
        for qa in 0..4 {
            for qb in 0..4 {
                let block = rho.view((qa * n, qb * n), (n, n)).clone_owned();
                let v = vectorize(&block);
                let mut sum = v.clone();
                let mut term = v;
                for k in 1..60 {
                    term = sparse::matvec(&self.load, &term);
                    let f = Complex64::new(self.tau / k as f64, 0.0);
                    term.iter_mut().for_each(|x| *x *= f);
                    let size = term.iter().map(|x| x.norm()).fold(0.0, f64::max);
                    sum.iter_mut().zip(&term).for_each(|(s, t)| *s += t);
                    if size <= 1e-17 * sum.iter().map(|x| x.norm()).fold(1e-300, f64::max) {
                        break;
                    }
                }
                out.view_mut((qa * n, qb * n), (n, n))
                    .copy_from(&unvectorize(&sum, n));
            }
        }
        out
    }

    /// One collision followed by one load step.
    pub fn step(&self, rho: &CMat) -> Result<CollisionStep> {
        let d = self.space.dim();
        if rho.nrows() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rho.nrows(),
            });
        }
        let v = vectorize(rho);
        let dot = |f: &[Complex64]| f.iter().zip(&v).map(|(a, b)| a * b).sum::<Complex64>().re;
        let tr = linalg::trace(rho).re;
        let after = unvectorize(&sparse::matvec(&self.phi, &v), d);
        let de_s = self.hams.hs.expect_dense(&after).re - self.hams.hs.expect_dense(rho).re;
        let de_b1 = dot(&self.post_b1) - self.pre_b[0] * tr;
        let de_b2 = dot(&self.post_b2) - self.pre_b[1] * tr;
        // ⟨H_int⟩ vanishes before the collision: the oscillators are diagonal.
        let de_int = dot(&self.post_int);
        let w = de_s + de_b1 + de_b2;

        let loaded = self.load_step(&after);
        let diff = &loaded - &after;
        Ok(CollisionStep {
            q1: -de_b1,
            q2: -de_b2,
            w,
            qr: self.hams.h0.expect_dense(&diff).re,
            wr: self.hams.hi.expect_dense(&diff).re,
            energy_audit: (w + de_int).abs(),
            rho: linalg::hermitize(&loaded),
        })
    }
}

/// Single collision with a freshly built map.
pub fn collision_step(rho: &CMat, cfg: &CollisionConfig, p: &Params) -> Result<CollisionStep> {
    CollisionMap::new(p, p.space()?, cfg)?.step(rho)
}

#[derive(Clone, Debug, Default)]
pub struct CollisionTrajectory {
    /// `t_k = kτ`, starting at 0.
    pub times: Vec<f64>,
    pub states: Vec<CMat>,
    /// Per-collision quantities divided by τ; entry k belongs to the
    /// collision ending at `times[k + 1]`.
    pub q1_rate: Vec<f64>,
    pub q2_rate: Vec<f64>,
    pub w_rate: Vec<f64>,
    pub qr_rate: Vec<f64>,
    pub wr_rate: Vec<f64>,
    pub max_energy_audit: f64,
    pub max_trace_drift: f64,
}

/// Runs `cfg.steps` collisions from `rho0`.
pub fn run_collisions(rho0: &CMat, cfg: &CollisionConfig, p: &Params) -> Result<CollisionTrajectory> {
    let map = CollisionMap::new(p, p.space()?, cfg)?;
    run_with_map(&map, rho0, cfg.steps)
}

pub fn run_with_map(map: &CollisionMap, rho0: &CMat, steps: usize) -> Result<CollisionTrajectory> {
    let mut out = CollisionTrajectory {
        times: vec![0.0],
        states: vec![rho0.clone()],
        ..Default::default()
    };
    let tr0 = linalg::trace(rho0).re;
    let mut rho = rho0.clone();
    for k in 1..=steps {
        let s = map.step(&rho)?;
        let tau = map.tau;
        out.q1_rate.push(s.q1 / tau);
        out.q2_rate.push(s.q2 / tau);
        out.w_rate.push(s.w / tau);
        out.qr_rate.push(s.qr / tau);
        out.wr_rate.push(s.wr / tau);
        out.max_energy_audit = out.max_energy_audit.max(s.energy_audit);
        rho = s.rho;
        out.max_trace_drift = out.max_trace_drift.max((linalg::trace(&rho).re - tr0).abs());
        out.times.push(k as f64 * tau);
        out.states.push(rho.clone());
    }
    Ok(out)
}

/// Collision trajectories at several τ compared with the local master
/// equation, plus per-collision rates at the local steady state.
#[derive(Clone, Debug)]
pub struct OracleReport {
    pub taus: Vec<f64>,
    /// Sup-norm error of `(⟨σ₁ᶻ⟩, ⟨σ₂ᶻ⟩, ⟨L_z⟩)` on the grid shared by all τ.
    pub errors: Vec<f64>,
    /// `log₂`-slope between consecutive τ.
    pub orders: Vec<f64>,
    /// Least-squares slope of `log e` against `log τ`.
    pub fitted_order: f64,
    /// Collision rates `(Q₁/τ, Q₂/τ, W/τ)` at the smallest τ and the local
    /// `(q₁, q₂, W^(Q))`, both at the local steady state.
    pub collision_rates: [f64; 3],
    pub lme_rates: [f64; 3],
    /// `|collision − lme| / |lme|` per rate.
    pub rate_rel_errors: [f64; 3],
    pub max_energy_audit: f64,
    pub max_trace_drift: f64,
    pub warnings: Vec<String>,
}

fn observables(rho: &CMat, space: SpaceSpec) -> [f64; 3] {
    use crate::operators::{angular_momentum, qubit_op, PauliKind, Qubit};
    [
        qubit_op(Qubit::One, PauliKind::Z, space).expect_dense(rho).re,
        qubit_op(Qubit::Two, PauliKind::Z, space).expect_dense(rho).re,
        angular_momentum(space).expect_dense(rho).re,
    ]
}

/// Runs the collision model at each `τ` (each must divide `grid_step`) up
/// to `t_end` and compares it with the local master equation on the
/// ladder of `p`. Studies at different τ run in parallel.
pub fn lme_oracle(
    p: &Params,
    rho0: &CMat,
    taus: &[f64],
    grid_step: f64,
    t_end: f64,
) -> Result<OracleReport> {
    use crate::dynamics::{evolve, solve_model, EvolveOptions};
    use crate::liouvillian::ModelKind;
    use crate::thermo::{heat_flows_local, work_flows_local};
    use rayon::prelude::*;

    if taus.len() < 2 {
        return Err(Error::Argument("need at least two collision times".into()));
    }
    let space = p.space()?;
    let n_grid = (t_end / grid_step).round() as usize;
    let grid: Vec<f64> = (0..=n_grid).map(|k| k as f64 * grid_step).collect();
    let mut strides = Vec::with_capacity(taus.len());
    for &tau in taus {
        let stride = (grid_step / tau).round() as usize;
        if stride == 0 || ((stride as f64) * tau - grid_step).abs() > 1e-9 * grid_step {
            return Err(Error::Argument(format!(
                "collision time {tau} does not divide the grid step {grid_step}"
            )));
        }
        strides.push(stride);
    }

    let (gen, ss) = solve_model(p, ModelKind::Local)?;
    let reference = evolve(
        &gen.total,
        rho0,
        &grid,
        &EvolveOptions {
            tol: 1e-12,
            ..Default::default()
        },
    )?;
    let ref_obs: Vec<[f64; 3]> = reference.states.iter().map(|r| observables(r, space)).collect();

    let runs: Vec<Result<(f64, CollisionStep, CollisionTrajectory, Vec<String>)>> = taus
        .par_iter()
        .zip(&strides)
        .map(|(&tau, &stride)| {
            let cfg = CollisionConfig::adaptive(p, tau, n_grid * stride);
            let map = CollisionMap::new(p, space, &cfg)?;
            let traj = run_with_map(&map, rho0, cfg.steps)?;
            let err = grid
                .iter()
                .enumerate()
                .map(|(k, _)| {
                    let o = observables(&traj.states[k * stride], space);
                    (0..3)
                        .map(|c| (o[c] - ref_obs[k][c]).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            let at_ss = map.step(&ss.rho)?;
            Ok((err, at_ss, traj, map.warnings.clone()))
        })
        .collect();
    let mut errors = Vec::new();
    let mut last_step = None;
    let mut audit: f64 = 0.0;
    let mut drift: f64 = 0.0;
    let mut warnings = ss.warnings.clone();
    for r in runs {
        let (e, step, traj, w) = r?;
        errors.push(e);
        audit = audit.max(traj.max_energy_audit).max(step.energy_audit);
        drift = drift.max(traj.max_trace_drift);
        warnings.extend(w);
        last_step = Some(step);
    }
    warnings.sort();
    warnings.dedup();

    let orders = errors
        .windows(2)
        .zip(taus.windows(2))
        .map(|(e, t)| (e[0] / e[1]).ln() / (t[0] / t[1]).ln())
        .collect();
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();

    let step = last_step.expect("at least two runs");
    let tau_min = *taus.last().expect("non-empty");
    let collision_rates = [step.q1 / tau_min, step.q2 / tau_min, step.w / tau_min];
    let flows = heat_flows_local(&ss.rho, &gen, p)?;
    let (w_q, _) = work_flows_local(&ss.rho, &gen, p)?;
    let lme_rates = [flows.q1, flows.q2, w_q];
    let mut rate_rel_errors = [0.0; 3];
    for k in 0..3 {
        rate_rel_errors[k] = (collision_rates[k] - lme_rates[k]).abs() / lme_rates[k].abs().max(1e-300);
    }
    Ok(OracleReport {
        taus: taus.to_vec(),
        errors,
        orders,
        fitted_order: sxy / sxx,
        collision_rates,
        lme_rates,
        rate_rel_errors,
        max_energy_audit: audit,
        max_trace_drift: drift,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::model::{product_gibbs, thermal_occupation};
    use crate::operators::make_space;

    #[test]
    fn fock_cutoff_meets_tail_bound() {
        for (beta, b) in [(0.1, 4.0), (0.05, 10.0), (0.01, 10.0)] {
            let n = fock_levels_for(beta, b, TAIL_MASS);
            let st = bath_oscillator_state(beta, b, n).unwrap();
            assert!(st.tail_mass < TAIL_MASS);
            assert!(st.truncation_warning.is_none());
            assert!(bath_oscillator_state(beta, b, n - 1).unwrap().tail_mass >= TAIL_MASS);
        }
        assert_eq!(fock_levels_for(0.1, 4.0, TAIL_MASS), 24);
    }

    #[test]
    fn bath_state_limits() {
        let cold = bath_oscillator_state(100.0, 4.0, 5).unwrap();
        assert!((cold.populations[0] - 1.0).abs() < 1e-15);
        let st = bath_oscillator_state(0.1, 4.0, 30).unwrap();
        assert!((st.mean_occupation() - 0.815_97).abs() < 1e-5);
        let n = thermal_occupation(0.1, 4.0).unwrap();
        let wide = bath_oscillator_state(0.1, 4.0, 80).unwrap();
        assert!((wide.mean_occupation() - n).abs() < 1e-12);
        assert!(bath_oscillator_state(0.1, 4.0, 0).is_err());
        assert!(bath_oscillator_state(0.1, 4.0, 3).unwrap().truncation_warning.is_some());
    }

    #[test]
    fn uncoupled_collision_is_unitary_system_evolution() {
        let mut p = Params::fig2(0.5);
        p.g = 0.0;
        p.gamma = 0.0;
        let s = make_space(-1, 2).unwrap();
        let cfg = CollisionConfig {
            tau: 0.3,
            n_fock: [4, 4],
            steps: 1,
            expm_tol: 1e-14,
        };
        let map = CollisionMap::new(&p, s, &cfg).unwrap();
        let mut rho = product_gibbs(&p, s);
        let a = s.index(0, 1, 0);
        let b = s.index(1, 0, 1);
        rho[(a, b)] = Complex64::new(0.01, 0.02);
        rho[(b, a)] = Complex64::new(0.01, -0.02);
        let step = map.step(&rho).unwrap();
        let h = build_hamiltonians(&p, s).hs.to_dense();
        let u = linalg::expm(&(h * Complex64::new(0.0, -0.3)), 1e-14).unwrap();
        let expect = &u * &rho * u.adjoint();
        assert!(max_abs(&(step.rho - expect)) < 1e-12);
        assert!(step.q1.abs() < 1e-13 && step.q2.abs() < 1e-13 && step.w.abs() < 1e-13);
    }

    #[test]
    fn resonant_qubit_at_bath_temperature_exchanges_no_heat() {
        let mut p = Params::fig2(1.0);
        p.lambda = 0.0;
        p.gamma = 0.0;
        let s = make_space(0, 1).unwrap();
        let cfg = CollisionConfig::adaptive(&p, 0.05, 1);
        let map = CollisionMap::new(&p, s, &cfg).unwrap();
        let step = map.step(&product_gibbs(&p, s)).unwrap();
        assert!(step.q1.abs() < 1e-10 && step.q2.abs() < 1e-10, "{} {}", step.q1, step.q2);
    }

    #[test]
    fn collisions_conserve_trace_and_energy() {
        let p = Params::fig2(0.5);
        let s = make_space(-1, 2).unwrap();
        let cfg = CollisionConfig::adaptive(&p, 0.1, 5);
        let tr = run_collisions(&product_gibbs(&p, s), &cfg, &Params { l_min: -1, l_max: 2, ..p.clone() }).unwrap();
        assert_eq!(tr.times.len(), 6);
        assert!(tr.max_trace_drift < 1e-10);
        assert!(tr.max_energy_audit < 1e-9, "{}", tr.max_energy_audit);
        for rho in &tr.states {
            assert!(linalg::eigvalsh(rho)[0] > -1e-12);
        }
    }

    #[test]
    fn zero_steps_keep_only_initial_state() {
        let p = Params {
            l_min: 0,
            l_max: 1,
            ..Params::fig2(0.5)
        };
        let s = p.space().unwrap();
        let cfg = CollisionConfig::adaptive(&p, 0.1, 0);
        let tr = run_collisions(&product_gibbs(&p, s), &cfg, &p).unwrap();
        assert_eq!(tr.states.len(), 1);
        assert!(tr.q1_rate.is_empty());
    }
}
