//! Heat and angular-momentum rectification under a swap of the two bath
//! temperatures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::solve_model;
use crate::error::{Error, Result};
use crate::liouvillian::ModelKind;
use crate::model::Params;
use crate::operators::angular_momentum;
use crate::thermo::heat_flows_global;

/// Status of a rectification ratio `|f − s| / |f + s|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioFlag {
    Finite,
    /// Denominator below the guard with a nonzero numerator.
    Infinite,
    /// Both numerator and denominator below the guard.
    Indeterminate,
}

/// `(|f − s| / |f + s|, flag)` with the guard
/// `ε = 10⁻¹² · max(|f|, |s|, 1)` on the denominator.
pub fn rectification_ratio(fwd: f64, swap: f64) -> (f64, RatioFlag) {
    let eps = 1e-12 * fwd.abs().max(swap.abs()).max(1.0);
    let num = (fwd - swap).abs();
    let den = (fwd + swap).abs();
    if den >= eps {
        (num / den, RatioFlag::Finite)
    } else if num >= eps {
        (f64::INFINITY, RatioFlag::Infinite)
    } else {
        (f64::NAN, RatioFlag::Indeterminate)
    }
}

/// `αR + (1 − α)J`.
pub fn gamma_alpha(r: f64, j: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Argument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(alpha * r + (1.0 - alpha) * j)
}

/// Exchanges `β₁` and `β₂`; couplings, fields and the load are untouched.
pub fn swap_temperatures(p: &Params) -> Params {
    Params {
        beta1: p.beta2,
        beta2: p.beta1,
        ..p.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectPoint {
    pub chi: f64,
    /// `Q₂` at the original temperatures.
    pub q_fwd: f64,
    /// `Q₁` at the swapped temperatures.
    pub q_swap: f64,
    pub r: f64,
    pub r_flag: RatioFlag,
    /// `q_fwd` and `q_swap` have opposite signs, so `R` may exceed one.
    pub sign_disagreement: bool,
    /// `max(|q_fwd|, |q_swap|) / (λ g²)`
    pub j: f64,
    /// `(α, Γ_α)` for each requested α.
    pub gammas: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularRectPoint {
    pub chi: f64,
    pub lz_fwd: f64,
    pub lz_swap: f64,
    pub r: f64,
    pub r_flag: RatioFlag,
    /// `max(|⟨L_z⟩_fwd|, |⟨L_z⟩_swap|)`, not normalized.
    pub j: f64,
    pub gammas: Vec<(f64, f64)>,
}

/// Steady-state observables of the forward and swapped devices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwapPair {
    pub q_fwd: f64,
    pub q_swap: f64,
    pub lz_fwd: f64,
    pub lz_swap: f64,
}

/// Solves the global model at `p` and at the swapped temperatures.
pub fn solve_swap_pair(p: &Params) -> Result<SwapPair> {
    let sp = swap_temperatures(p);
    let (gf, sf) = solve_model(p, ModelKind::Global)?;
    let (gs, ss) = solve_model(&sp, ModelKind::Global)?;
    let lz = angular_momentum(gf.space());
    Ok(SwapPair {
        q_fwd: heat_flows_global(&sf.rho, &gf, p)?.q2,
        q_swap: heat_flows_global(&ss.rho, &gs, &sp)?.q1,
        lz_fwd: lz.expect_dense(&sf.rho).re,
        lz_swap: lz.expect_dense(&ss.rho).re,
    })
}

fn gammas(r: f64, j: f64, alphas: &[f64]) -> Result<Vec<(f64, f64)>> {
    alphas
        .iter()
        .map(|&a| gamma_alpha(r, j, a).map(|g| (a, g)))
        .collect()
}

pub fn heat_rect_from_pair(p: &Params, pair: &SwapPair, alphas: &[f64]) -> Result<RectPoint> {
    let (r, r_flag) = rectification_ratio(pair.q_fwd, pair.q_swap);
    let j = pair.q_fwd.abs().max(pair.q_swap.abs()) / (p.lambda * p.g * p.g);
    Ok(RectPoint {
        chi: p.chi,
        q_fwd: pair.q_fwd,
        q_swap: pair.q_swap,
        r,
        r_flag,
        sign_disagreement: pair.q_fwd * pair.q_swap < 0.0,
        j,
        gammas: gammas(r, j, alphas)?,
    })
}

pub fn angular_rect_from_pair(p: &Params, pair: &SwapPair, alphas: &[f64]) -> Result<AngularRectPoint> {
    let (r, r_flag) = rectification_ratio(pair.lz_fwd, pair.lz_swap);
    let j = pair.lz_fwd.abs().max(pair.lz_swap.abs());
    Ok(AngularRectPoint {
        chi: p.chi,
        lz_fwd: pair.lz_fwd,
        lz_swap: pair.lz_swap,
        r,
        r_flag,
        j,
        gammas: gammas(r, j, alphas)?,
    })
}

pub fn heat_rect_point(p: &Params, alphas: &[f64]) -> Result<RectPoint> {
    heat_rect_from_pair(p, &solve_swap_pair(p)?, alphas)
}

pub fn angular_rect_point(p: &Params, alphas: &[f64]) -> Result<AngularRectPoint> {
    angular_rect_from_pair(p, &solve_swap_pair(p)?, alphas)
}

/// `n` uniform points on `[0, 0.99]`.
pub fn default_chi_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| 0.99 * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Best grid point for one α.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Argmax {
    pub alpha: f64,
    pub chi: f64,
    pub index: usize,
    pub r: f64,
    pub j: f64,
    pub gamma: f64,
}

#[derive(Debug)]
pub struct ChiSweep {
    /// One entry per grid point, in grid order. Failed points keep their
    /// error.
    pub pairs: Vec<(f64, Result<SwapPair>)>,
    pub heat: Vec<Option<RectPoint>>,
    pub angular: Vec<Option<AngularRectPoint>>,
    pub heat_argmax: Vec<Option<Argmax>>,
    pub angular_argmax: Vec<Option<Argmax>>,
}

/// Largest finite `Γ_α` over `(chi, r, j)` triples; ties go to the
/// smallest χ.
pub fn argmax_gamma(points: &[(f64, f64, f64)], alpha: f64) -> Result<Option<Argmax>> {
    let mut best: Option<Argmax> = None;
    for (index, &(chi, r, j)) in points.iter().enumerate() {
        let gamma = gamma_alpha(r, j, alpha)?;
        if !gamma.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => gamma > b.gamma || (gamma == b.gamma && chi < b.chi),
        };
        if better {
            best = Some(Argmax {
                alpha,
                chi,
                index,
                r,
                j,
                gamma,
            });
        }
    }
    Ok(best)
}

/// Solves every χ of `grid` in parallel and extracts the Γ_α maximizers for
/// both the heat and the angular-momentum measures.
pub fn sweep_chi(p: &Params, grid: &[f64], alphas: &[f64]) -> Result<ChiSweep> {
    if let Some(bad) = grid.iter().find(|c| !(0.0..1.0).contains(*c)) {
        return Err(Error::Argument(format!("chi grid must lie in [0, 1), got {bad}")));
    }
    for &a in alphas {
        gamma_alpha(0.0, 0.0, a)?;
    }
    let pairs: Vec<(f64, Result<SwapPair>)> = grid
        .par_iter()
        .map(|&chi| {
            let q = Params { chi, ..p.clone() };
            (chi, solve_swap_pair(&q))
        })
        .collect();
    let mut heat = Vec::with_capacity(grid.len());
    let mut angular = Vec::with_capacity(grid.len());
    for (chi, pair) in &pairs {
        let q = Params {
            chi: *chi,
            ..p.clone()
        };
        match pair {
            Ok(pair) => {
                heat.push(Some(heat_rect_from_pair(&q, pair, alphas)?));
                angular.push(Some(angular_rect_from_pair(&q, pair, alphas)?));
            }
            Err(_) => {
                heat.push(None);
                angular.push(None);
            }
        }
    }
    let heat_pts: Vec<(f64, f64, f64)> = heat.iter().flatten().map(|h| (h.chi, h.r, h.j)).collect();
    let ang_pts: Vec<(f64, f64, f64)> =
        angular.iter().flatten().map(|h| (h.chi, h.r, h.j)).collect();
    let heat_argmax = alphas
        .iter()
        .map(|&a| argmax_gamma(&heat_pts, a))
        .collect::<Result<Vec<_>>>()?;
    let angular_argmax = alphas
        .iter()
        .map(|&a| argmax_gamma(&ang_pts, a))
        .collect::<Result<Vec<_>>>()?;
    // Indices refer to the successful subset; map them back to grid order.
    let remap = |v: Vec<Option<Argmax>>, ok: &[usize]| -> Vec<Option<Argmax>> {
        v.into_iter()
            .map(|m| m.map(|a| Argmax { index: ok[a.index], ..a }))
            .collect()
    };
    let ok: Vec<usize> = pairs
        .iter()
        .enumerate()
        .filter_map(|(i, (_, r))| r.is_ok().then_some(i))
        .collect();
    Ok(ChiSweep {
        heat_argmax: remap(heat_argmax, &ok),
        angular_argmax: remap(angular_argmax, &ok),
        pairs,
        heat,
        angular,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_alpha_endpoints_and_midpoint() {
        assert_eq!(gamma_alpha(0.6, 0.2, 0.0).unwrap(), 0.2);
        assert_eq!(gamma_alpha(0.6, 0.2, 1.0).unwrap(), 0.6);
        assert!((gamma_alpha(0.6, 0.2, 0.5).unwrap() - 0.4).abs() < 1e-15);
        assert!(gamma_alpha(0.6, 0.2, 1.5).is_err());
        assert!(gamma_alpha(0.6, 0.2, -0.1).is_err());
    }

    #[test]
    fn ratio_guards() {
        assert_eq!(rectification_ratio(2.0, 0.0), (1.0, RatioFlag::Finite));
        assert_eq!(rectification_ratio(1.0, 1.0), (0.0, RatioFlag::Finite));
        assert_eq!(rectification_ratio(1.0, -1.0).1, RatioFlag::Infinite);
        assert_eq!(rectification_ratio(0.0, 0.0).1, RatioFlag::Indeterminate);
    }

    #[test]
    fn swap_is_an_involution() {
        let p = Params::fig4(0.3);
        let s = swap_temperatures(&p);
        assert_eq!(s.beta1, p.beta2);
        assert_eq!(s.g, p.g);
        assert_eq!(swap_temperatures(&s), p);
        assert_eq!(s.n1().unwrap(), crate::model::thermal_occupation(p.beta2, p.b1).unwrap());
    }

    #[test]
    fn ties_break_to_smallest_chi() {
        let pts = [(0.0, 0.5, 0.5), (0.1, 0.5, 0.5), (0.2, 0.5, 0.5)];
        for a in [0.0, 0.5, 1.0] {
            assert_eq!(argmax_gamma(&pts, a).unwrap().unwrap().index, 0);
        }
        let pts = [(0.0, 0.1, 0.3), (0.1, 0.9, 0.2), (0.2, 0.2, 0.8)];
        assert_eq!(argmax_gamma(&pts, 0.0).unwrap().unwrap().chi, 0.2);
        assert_eq!(argmax_gamma(&pts, 1.0).unwrap().unwrap().chi, 0.1);
    }

    #[test]
    fn default_grid_shape() {
        let g = default_chi_grid(101);
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.0);
        assert!((g[100] - 0.99).abs() < 1e-15);
    }

    #[test]
    fn mirror_symmetric_device_does_not_rectify() {
        let mut p = Params::fig4(0.4);
        p.b1 = 10.0;
        p.b2 = 10.0;
        p.l_min = -6;
        p.l_max = 6;
        let pair = solve_swap_pair(&p).unwrap();
        let h = heat_rect_from_pair(&p, &pair, &[0.5]).unwrap();
        assert!(h.r <= 1e-8, "R = {}", h.r);
        let a = angular_rect_from_pair(&p, &pair, &[]).unwrap();
        assert!((pair.lz_fwd + pair.lz_swap).abs() < 1e-8 * pair.lz_fwd.abs().max(1e-12));
        assert_ne!(a.r_flag, RatioFlag::Finite);
    }
}
