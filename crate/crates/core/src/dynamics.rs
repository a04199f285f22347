//! Steady states and time evolution of master-equation generators.
//!
//! Both solvers work on the smallest coordinate subspace of `vec(ρ)` that the
//! generator maps into itself and that contains the relevant support: the
//! diagonal for steady states, `supp vec(ρ₀)` for evolution. The generators
//! built here have weak U(1) symmetries (total excitation and the twist
//! `e₁ − L_z`), so that subspace is a few hundred coordinates instead of
//! `dim²`.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::gme::assemble_global_liouvillian;
use crate::liouvillian::{
    assemble_local_liouvillian, unvectorize, vectorize, Generator, ModelKind, Superoperator,
};
use crate::model::{product_gibbs, Params};
use crate::sparse::{self, Csr};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

const REFINEMENT_SWEEPS: usize = 2;

/// Largest reduced dimension for which the dense SVD gap check runs.
pub const DENSE_GAP_LIMIT: usize = 2500;

#[derive(Clone, Debug)]
pub struct SteadyOptions {
    /// Acceptance threshold on `‖Lρ‖_max / max(‖L‖_max, 1)`.
    pub tol: f64,
    /// Null-space threshold on singular values, relative to `max(‖L‖_max, 1)`.
    pub gap_tol: f64,
    /// Projected onto the null space when it is degenerate. Defaults to the
    /// maximally mixed state.
    pub initial_guess: Option<CMat>,
    /// Run the dense singular-value gap check when the reduced problem is
    /// at most this large.
    pub dense_gap_limit: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            gap_tol: 1e-11,
            initial_guess: None,
            dense_gap_limit: DENSE_GAP_LIMIT,
        }
    }
}

impl SteadyOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: CMat,
    /// `‖Lρ‖_max`.
    pub residual: f64,
    /// `‖L‖_max`.
    pub generator_norm: f64,
    /// Two smallest singular values of the reduced generator, when computed.
    pub singular_values: Option<(f64, f64)>,
    pub degenerate: bool,
    pub reduced_dim: usize,
    pub warnings: Vec<String>,
}

/// Restriction of a generator to an invariant coordinate subspace.
struct Reduced {
    idx: Vec<usize>,
    sub: Csr,
}

impl Reduced {
    fn new(l: &Superoperator, seeds: impl IntoIterator<Item = usize>) -> Self {
        let idx = sparse::forward_closure(l.matrix(), seeds);
        let sub = sparse::principal_submatrix(l.matrix(), &idx);
        Self { idx, sub }
    }

    fn gather(&self, full: &[Complex64]) -> Vec<Complex64> {
        self.idx.iter().map(|&i| full[i]).collect()
    }

    fn scatter(&self, x: &[Complex64], len: usize) -> Vec<Complex64> {
        let mut out = vec![ZERO; len];
        for (&i, &v) in self.idx.iter().zip(x) {
            out[i] = v;
        }
        out
    }
}

fn diagonal_indices(d: usize) -> impl Iterator<Item = usize> {
    (0..d).map(move |i| i * d + i)
}

fn to_faer_dense(a: &Csr) -> Mat<c64> {
    let mut m = Mat::<c64>::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplet_iter() {
        m[(i, j)] += *v;
    }
    m
}

/// Singular values in ascending order and the matching right singular
/// vectors.
fn dense_svd(a: &Csr) -> Result<(Vec<f64>, Mat<c64>)> {
    let svd = to_faer_dense(a)
        .svd()
        .map_err(|e| Error::Numerical(format!("dense SVD failed: {e:?}")))?;
    let n = a.ncols();
    let s: Vec<f64> = (0..n).rev().map(|k| svd.S()[k].re).collect();
    let v = Mat::from_fn(n, n, |i, k| svd.V()[(i, n - 1 - k)]);
    Ok((s, v))
}

/// Sparse LU factorization of a square triplet matrix.
struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, c64>,
    n: usize,
}

impl SparseLu {
    fn new(a: &[(usize, usize, Complex64)], n: usize) -> Option<Self> {
        let trips: Vec<Triplet<usize, usize, c64>> =
            a.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        let m = SparseColMat::<usize, c64>::try_new_from_triplets(n, n, &trips).ok()?;
        Some(Self {
            lu: m.sp_lu().ok()?,
            n,
        })
    }

    fn solve(&self, rhs: &[Complex64]) -> Option<Vec<Complex64>> {
        let b = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        let out: Vec<Complex64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        out.iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
            .then_some(out)
    }
}

fn finish(rho_vec: &[Complex64], d: usize) -> Result<CMat> {
    let rho = linalg::hermitize(&unvectorize(rho_vec, d));
    let tr = linalg::trace(&rho).re;
    if !(tr.abs() > 1e-300) || !tr.is_finite() {
        return Err(Error::Numerical("steady state has vanishing trace".into()));
    }
    Ok(rho * Complex64::new(1.0 / tr, 0.0))
}

/// Trace-one fixed point of `L`, `Lρ = 0`.
///
/// The diagonal-seeded invariant subspace is solved as a bordered linear
/// system: one population row of the generator is swapped for the trace
/// functional, factorized by sparse LU, and refined once. When the reduced
/// problem is small, its two smallest singular values decide uniqueness; a
/// degenerate null space yields the projection of the initial guess and a
/// warning.
pub fn steady_state(l: &Superoperator, opts: &SteadyOptions) -> Result<SteadyState> {
    let d = l.space().dim();
    let d2 = d * d;
    let red = Reduced::new(l, diagonal_indices(d));
    let m = red.idx.len();
    let norm = l.max_abs();
    let scale = norm.max(1.0);
    let mut warnings = Vec::new();

    let mut singular_values = None;
    let mut degenerate = false;
    let mut svd_cache = None;
    if m <= opts.dense_gap_limit {
        let (s, v) = dense_svd(&red.sub)?;
        let s2 = if m > 1 { s[1] } else { f64::INFINITY };
        singular_values = Some((s[0], s2));
        if s2 <= opts.gap_tol * scale {
            degenerate = true;
            warnings.push(format!(
                "steady state is not unique: second-smallest singular value {s2:.3e} is below the gap threshold {:.3e}",
                opts.gap_tol * scale
            ));
        }
        svd_cache = Some((s, v));
    }

    let x = if degenerate {
        let (s, v) = svd_cache.expect("degeneracy is only detected from an SVD");
        let guess = match &opts.initial_guess {
            Some(g) => vectorize(g),
            None => vectorize(&(CMat::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0))),
        };
        let g = red.gather(&guess);
        let mut x = vec![ZERO; m];
        for k in (0..m).take_while(|&k| s[k] <= opts.gap_tol * scale) {
            let coef: Complex64 = (0..m).map(|i| v[(i, k)].conj() * g[i]).sum();
            for i in 0..m {
                x[i] += coef * v[(i, k)];
            }
        }
        x
    } else {
        bordered_solve(&red, d).ok_or_else(|| {
            Error::Numerical(format!(
                "sparse LU of the bordered steady-state system failed (reduced dimension {m})"
            ))
        })?
    };

    let rho = finish(&red.scatter(&x, d2), d)?;
    let residual = l
        .apply_vec(&vectorize(&rho))
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    if !(residual <= opts.tol * scale) {
        return Err(Error::Numerical(format!(
            "steady-state residual {residual:.3e} exceeds {:.3e}",
            opts.tol * scale
        )));
    }
    let min_eig = linalg::eigvalsh(&rho)[0];
    if min_eig < -1e-8 {
        warnings.push(format!("steady state has a negative eigenvalue {min_eig:.3e}"));
    }
    Ok(SteadyState {
        rho,
        residual,
        generator_norm: norm,
        singular_values,
        degenerate,
        reduced_dim: m,
        warnings,
    })
}

fn bordered_solve(red: &Reduced, d: usize) -> Option<Vec<Complex64>> {
    let m = red.idx.len();
    let diag: Vec<usize> = red
        .idx
        .iter()
        .enumerate()
        .filter_map(|(k, &i)| (i % (d + 1) == 0).then_some(k))
        .collect();
    let pivot_row = *diag.first()?;
    let mut trips: Vec<(usize, usize, Complex64)> = red
        .sub
        .triplet_iter()
        .filter(|(i, _, _)| *i != pivot_row)
        .map(|(i, j, v)| (i, j, *v))
        .collect();
    trips.extend(diag.iter().map(|&k| (pivot_row, k, ONE)));
    let mut rhs = vec![ZERO; m];
    rhs[pivot_row] = ONE;

    let lu = SparseLu::new(&trips, m)?;
    let mut x = lu.solve(&rhs)?;
    // Iterative refinement against the same bordered operator.
    for _ in 0..REFINEMENT_SWEEPS {
        let mut r = rhs.clone();
        for &(i, j, v) in &trips {
            r[i] -= v * x[j];
        }
        let dx = lu.solve(&r)?;
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
    }
    Some(x)
}

/// Steady state from the full dense SVD null space. For small spaces only
/// (`dim² ≤ 4096`); used as an independent oracle.
pub fn steady_state_dense(l: &Superoperator) -> Result<SteadyState> {
    let d = l.space().dim();
    let d2 = d * d;
    if d2 > 4096 {
        return Err(Error::Argument(format!(
            "dense steady-state solve limited to dim² ≤ 4096, got {d2}"
        )));
    }
    let (s, v) = dense_svd(l.matrix())?;
    let x: Vec<Complex64> = (0..d2).map(|i| v[(i, 0)]).collect();
    let rho = finish(&x, d)?;
    let residual = l
        .apply_vec(&vectorize(&rho))
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let norm = l.max_abs();
    let degenerate = s[1] <= 1e-11 * norm.max(1.0);
    Ok(SteadyState {
        rho,
        residual,
        generator_norm: norm,
        singular_values: Some((s[0], s[1])),
        degenerate,
        reduced_dim: d2,
        warnings: Vec::new(),
    })
}

/// Generator of the requested master equation for `p` on its own ladder.
pub fn build_generator(p: &Params, model: ModelKind) -> Result<Generator> {
    let space = p.space()?;
    match model {
        ModelKind::Local => assemble_local_liouvillian(p, space),
        ModelKind::Global => assemble_global_liouvillian(p, space),
    }
}

/// Generator and steady state for `p`, seeded with the product Gibbs state
/// at `(β₁, β₂, β_r)`.
pub fn solve_model(p: &Params, model: ModelKind) -> Result<(Generator, SteadyState)> {
    let g = build_generator(p, model)?;
    let opts = SteadyOptions {
        tol: p.steady_tol,
        initial_guess: Some(product_gibbs(p, g.space())),
        ..SteadyOptions::default()
    };
    let ss = steady_state(&g.total, &opts)?;
    Ok((g, ss))
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    /// Local error tolerance, used both absolutely and relative to `|y|`.
    pub tol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    /// Steps below `h_min · max(1, t)` abort with [`Error::StepUnderflow`].
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            h0: None,
            h_min: 1e-13,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMat>,
    /// Largest `|Tr ρ(t) − Tr ρ(0)|` seen at emission times.
    pub max_trace_drift: f64,
    pub steps: usize,
    pub rejected: usize,
}

/// `n + 1` equally spaced emission times on `[0, t_end]`.
pub fn uniform_times(t_end: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
}

// Dormand–Prince 5(4) tableau. The generator is autonomous, so the nodes
// are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `dρ/dt = Lρ` and records the state at each of `times`
/// (non-decreasing, starting at or after 0). Emitted states are
/// Hermitized.
pub fn evolve(
    l: &Superoperator,
    rho0: &CMat,
    times: &[f64],
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let d = l.space().dim();
    if rho0.nrows() != d || rho0.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho0.nrows(),
        });
    }
    if times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Argument(
            "emission times must be non-negative and sorted".into(),
        ));
    }
    let full = vectorize(rho0);
    let red = Reduced::new(
        l,
        full.iter()
            .enumerate()
            .filter_map(|(i, v)| (v.norm() > 0.0).then_some(i)),
    );
    let m = red.idx.len();
    let mut y = red.gather(&full);
    let tr0 = linalg::trace(rho0).re;

    let f = |x: &[Complex64], out: &mut [Complex64]| sparse::matvec_into(&red.sub, x, out);
    let mut k: Vec<Vec<Complex64>> = vec![vec![ZERO; m]; 7];
    let mut tmp = vec![ZERO; m];
    let mut y_new = vec![ZERO; m];

    let mut out = Trajectory {
        times: Vec::with_capacity(times.len()),
        states: Vec::with_capacity(times.len()),
        max_trace_drift: 0.0,
        steps: 0,
        rejected: 0,
    };
    let emit = |y: &[Complex64], t: f64, out: &mut Trajectory| {
        let rho = linalg::hermitize(&unvectorize(&red.scatter(y, d * d), d));
        out.max_trace_drift = out.max_trace_drift.max((linalg::trace(&rho).re - tr0).abs());
        out.times.push(t);
        out.states.push(rho);
    };

    let mut t = 0.0;
    let mut h = opts.h0.unwrap_or_else(|| {
        let norm = sparse::max_abs(&red.sub).max(1e-12);
        (0.01 / norm).min(times.last().copied().unwrap_or(1.0).max(1e-12))
    });
    let mut err_prev: f64 = 1.0;
    f(&y, &mut k[0]);
    for &target in times {
        while t < target {
            if out.steps + out.rejected >= opts.max_steps {
                return Err(Error::Numerical(format!(
                    "evolve exceeded {} steps at t = {t:e}",
                    opts.max_steps
                )));
            }
            let remaining = target - t;
            let clipped = h >= remaining;
            let step = if clipped { remaining } else { h };
            if step < opts.h_min * t.max(1.0) && !clipped {
                return Err(Error::StepUnderflow { t, h: step });
            }
            for s in 1..7 {
                for i in 0..m {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += kj[i] * (step * A[s][j]);
                    }
                    tmp[i] = acc;
                }
                f(&tmp, &mut k[s]);
            }
            // Stage 6 input is the fifth-order solution (FSAL).
            y_new.copy_from_slice(&tmp);
            let mut err: f64 = 0.0;
            for i in 0..m {
                let mut e = ZERO;
                for (s, ks) in k.iter().enumerate() {
                    e += ks[i] * E[s];
                }
                let sc = opts.tol * (1.0 + y[i].norm().max(y_new[i].norm()));
                err = err.max((e * step).norm() / sc);
            }
            if err <= 1.0 {
                t = if clipped { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                out.steps += 1;
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0)).clamp(0.2, 5.0)
                };
                err_prev = err.max(1e-4);
                if !clipped {
                    h = step * fac;
                }
            } else {
                out.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h < opts.h_min * t.max(1.0) {
                    return Err(Error::StepUnderflow { t, h });
                }
            }
        }
        emit(&y, target, &mut out);
    }
    Ok(out)
}
