//! Truncation check for the rotor ladder.

use qrotor::dynamics::{evolve, solve_model, uniform_times, EvolveOptions};
use qrotor::liouvillian::ModelKind;
use qrotor::operators::{angular_momentum, rotor_populations};
use qrotor::thermo::heat_flows_local;
use qrotor::{Params, Result};
use serde::Serialize;

use crate::config::InitialState;
use crate::initial_state;

pub const LEAK_TOL: f64 = 1e-6;
pub const DRIFT_TOL: f64 = 1e-4;

/// Relative change of the steady-state observables on the widened ladder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Drift {
    pub l_min: i64,
    pub l_max: i64,
    pub q1: f64,
    pub q2: f64,
    pub lz: f64,
}

impl Drift {
    pub fn max(&self) -> f64 {
        self.q1.max(self.q2).max(self.lz)
    }
}

/// Most populated rotor level along a transient.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeScan {
    pub times: Vec<f64>,
    pub modes: Vec<i64>,
    /// First emission time at which the mode sits in the boundary set.
    pub boundary_hit: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergeReport {
    pub l_min: i64,
    pub l_max: i64,
    /// `(l, ⟨l|ρ_r|l⟩)` of the steady state; empty if it failed.
    pub populations: Vec<(i64, f64)>,
    /// Steady-state population on `{l_min, l_min+1, l_max−1, l_max}`.
    pub leak: f64,
    pub mode: Option<i64>,
    pub mode_interior: bool,
    pub drift: Option<Drift>,
    pub steady_error: Option<String>,
    pub scan: Option<ModeScan>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

fn boundary_set(p: &Params) -> [i64; 4] {
    [p.l_min, p.l_min + 1, p.l_max - 1, p.l_max]
}

fn mode_of(pops: &[f64], l_min: i64) -> i64 {
    let (k, _) = pops
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    l_min + k as i64
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 { 0.0 } else { (a - b).abs() / scale }
}

/// Steady-state leak and mode on the ladder of `p`, drift against the
/// ladder widened by `widen_step` on both sides, and optionally the mode
/// along a local-model transient from the rotor at rest.
pub fn converge(p: &Params, widen_step: i64, scan: Option<(f64, usize)>) -> Result<ConvergeReport> {
    let space = p.space()?;
    let edges = boundary_set(p);
    let mut warnings = Vec::new();

    let steady = solve_model(p, ModelKind::Local);
    let (populations, leak, mode, drift, steady_error) = match steady {
        Ok((g, ss)) => {
            warnings.extend(ss.warnings.iter().cloned());
            let pops = rotor_populations(&ss.rho, space);
            let labelled: Vec<(i64, f64)> = space.ladder().zip(pops.iter().copied()).collect();
            let leak: f64 = labelled
                .iter()
                .filter(|(l, _)| edges.contains(l))
                .map(|(_, v)| v)
                .sum();
            let mode = mode_of(&pops, p.l_min);
            let drift = if widen_step > 0 {
                let wide = Params {
                    l_min: p.l_min - widen_step,
                    l_max: p.l_max + widen_step,
                    ..p.clone()
                };
                let (gw, sw) = solve_model(&wide, ModelKind::Local)?;
                let f = heat_flows_local(&ss.rho, &g, p)?;
                let fw = heat_flows_local(&sw.rho, &gw, &wide)?;
                let lz = angular_momentum(space).expect_dense(&ss.rho).re;
                let lzw = angular_momentum(wide.space()?).expect_dense(&sw.rho).re;
                Some(Drift {
                    l_min: wide.l_min,
                    l_max: wide.l_max,
                    q1: rel(f.q1, fw.q1),
                    q2: rel(f.q2, fw.q2),
                    lz: rel(lz, lzw),
                })
            } else {
                None
            };
            (labelled, leak, Some(mode), drift, None)
        }
        Err(e) => (Vec::new(), f64::NAN, None, None, Some(e.to_string())),
    };

    let scan = match scan {
        Some((t_end, points)) if t_end > 0.0 => {
            let g = qrotor::dynamics::build_generator(p, ModelKind::Local)?;
            let rho0 = initial_state(p, InitialState::RotorAtRest)?;
            let times = uniform_times(t_end, points);
            let opts = EvolveOptions {
                tol: p.ode_tol,
                ..Default::default()
            };
            let tr = evolve(&g.total, &rho0, &times, &opts)?;
            let modes: Vec<i64> = tr
                .states
                .iter()
                .map(|r| mode_of(&rotor_populations(r, space), p.l_min))
                .collect();
            let boundary_hit = times
                .iter()
                .zip(&modes)
                .find(|(_, m)| edges.contains(m))
                .map(|(t, _)| *t);
            Some(ModeScan {
                times,
                modes,
                boundary_hit,
            })
        }
        _ => None,
    };

    let mode_interior = mode.is_some_and(|m| !edges.contains(&m));
    let converged = steady_error.is_none()
        && leak < LEAK_TOL
        && mode_interior
        && drift.is_none_or(|d| d.max() < DRIFT_TOL)
        && scan.as_ref().is_none_or(|s| s.boundary_hit.is_none());
    Ok(ConvergeReport {
        l_min: p.l_min,
        l_max: p.l_max,
        populations,
        leak,
        mode,
        mode_interior,
        drift,
        steady_error,
        scan,
        converged,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_and_relative_change() {
        assert_eq!(mode_of(&[0.1, 0.5, 0.4], -1), 0);
        assert_eq!(rel(1.0, 1.0), 0.0);
        assert_eq!(rel(0.0, 0.0), 0.0);
        assert!((rel(1.0, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn narrow_ladder_is_not_converged() {
        let p = Params {
            l_min: -1,
            l_max: 2,
            ..Params::appendix_b()
        };
        let r = converge(&p, 1, None).unwrap();
        assert!(!r.converged);
        assert_eq!(r.populations.len(), 4);
        let total: f64 = r.populations.iter().map(|x| x.1).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!((r.leak - 1.0).abs() < 1e-10);
    }
}
