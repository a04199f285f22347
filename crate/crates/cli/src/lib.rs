//! Batch driver for the `qrotor` simulator: JSON config in, CSV tables with
//! JSON sidecars out.

pub mod config;
pub mod converge;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use qrotor::collision::lme_oracle;
use qrotor::dynamics::{build_generator, evolve, solve_model, uniform_times, EvolveOptions};
use qrotor::liouvillian::ModelKind;
use qrotor::linalg::CMat;
use qrotor::model::product_gibbs;
use qrotor::rectify::{default_chi_grid, sweep_chi, Argmax};
use qrotor::thermo::{rotor_powers, subsystem_ergotropies, thermo_report, SubsystemErgotropies, ThermoReport};
use qrotor::{Params, SpaceSpec};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Config, InitialState};
use crate::output::{fmt_f64, fmt_opt, write_outputs, Metadata, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }
}

impl From<qrotor::Error> for CliError {
    fn from(e: qrotor::Error) -> Self {
        use qrotor::Error as E;
        match e {
            E::InvalidTruncation { .. } | E::Domain { .. } | E::Argument(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Local,
    Global,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Local => ModelKind::Local,
            Model::Global => ModelKind::Global,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qrotor", version, about = "Two-qubit quantum-rotor thermal machine simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Io {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RangeArgs {
    /// Swept parameter: `beta2_over_beta1` or any numeric config field.
    #[arg(long)]
    pub param: Option<String>,
    #[arg(long)]
    pub from: Option<f64>,
    #[arg(long)]
    pub to: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_enum, default_value = "local")]
    pub model: Model,
}

#[derive(Debug, Args)]
pub struct RectArgs {
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady-state heat, work and operating regime.
    Steady {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum, default_value = "local")]
        model: Model,
    },
    /// Rotor powers along a transient.
    Evolve {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum, default_value = "local")]
        model: Model,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, value_enum)]
        initial: Option<Initial>,
    },
    /// Steady-state thermodynamics over a parameter range.
    Sweep {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        range: RangeArgs,
    },
    /// Heat rectification over the coupling asymmetry χ.
    Rectify {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        rect: RectArgs,
    },
    /// Angular-momentum rectification over χ.
    RectifyAngular {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        rect: RectArgs,
    },
    /// Steady-state ergotropies over a parameter range.
    Ergotropy {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        range: RangeArgs,
    },
    /// Collision model against the local master equation.
    CollisionVerify {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        #[arg(long)]
        grid_step: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        l_min: Option<i64>,
        #[arg(long, allow_hyphen_values = true)]
        l_max: Option<i64>,
    },
    /// Rotor-ladder truncation report.
    Converge {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        widen_step: Option<i64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Initial {
    RotorAtRest,
    ProductGibbs,
}

impl From<Initial> for InitialState {
    fn from(i: Initial) -> Self {
        match i {
            Initial::RotorAtRest => InitialState::RotorAtRest,
            Initial::ProductGibbs => InitialState::ProductGibbs,
        }
    }
}

pub const DEFAULT_SWEEP: (f64, f64, usize) = (0.05, 0.89, 85);
pub const DEFAULT_RECT_GRID: usize = 101;
pub const DEFAULT_ALPHAS: [f64; 3] = [0.0, 0.5, 1.0];
pub const DEFAULT_EVOLVE: (f64, usize) = (60000.0, 300);
pub const DEFAULT_TAUS: [f64; 3] = [0.1, 0.05, 0.025];
pub const DEFAULT_COLLISION_LADDER: (i64, i64) = (-3, 4);
pub const DEFAULT_WIDEN: i64 = 5;

/// Initial state for transients. `RotorAtRest` puts the rotor in the
/// ladder state closest to `l = 0`.
pub fn initial_state(p: &Params, kind: InitialState) -> qrotor::Result<CMat> {
    let space = p.space()?;
    match kind {
        InitialState::ProductGibbs => Ok(product_gibbs(p, space)),
        InitialState::RotorAtRest => {
            let l0 = 0.clamp(p.l_min, p.l_max);
            let mut rho = CMat::zeros(space.dim(), space.dim());
            let (n1, n2) = (p.n1()?, p.n2()?);
            let e1 = [(n1 + 1.0) / (2.0 * n1 + 1.0), n1 / (2.0 * n1 + 1.0)];
            let e2 = [(n2 + 1.0) / (2.0 * n2 + 1.0), n2 / (2.0 * n2 + 1.0)];
            for a in 0..2u8 {
                for b in 0..2u8 {
                    let i = space.index(a, b, l0);
                    rho[(i, i)] = Complex64::new(e1[a as usize] * e2[b as usize], 0.0);
                }
            }
            Ok(rho)
        }
    }
}

/// One steady-state point of a parameter sweep.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub value: f64,
    pub report: ThermoReport,
    pub ergotropies: SubsystemErgotropies,
    pub warnings: Vec<String>,
}

pub fn sweep_point(p: &Params, value: f64, model: ModelKind) -> qrotor::Result<SweepRow> {
    let (g, ss) = solve_model(p, model)?;
    let space: SpaceSpec = p.space()?;
    Ok(SweepRow {
        value,
        report: thermo_report(&ss.rho, &g, p)?,
        ergotropies: subsystem_ergotropies(&ss.rho, p, space)?,
        warnings: ss.warnings,
    })
}

pub fn linspace(from: f64, to: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![from],
        n => (0..n).map(|k| from + (to - from) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Solves every point in parallel; rows come back in input order.
pub fn sweep(p: &Params, param: &str, values: &[f64], model: ModelKind) -> Result<Vec<SweepRow>, CliError> {
    let points: Vec<Params> = values
        .iter()
        .map(|&v| config::with_param(p, param, v))
        .collect::<Result<_, _>>()?;
    for q in &points {
        q.validate()?;
    }
    points
        .par_iter()
        .zip(values)
        .map(|(q, &v)| sweep_point(q, v, model).map_err(CliError::from))
        .collect()
}

fn meta<'a>(command: &'a str, p: &'a Params, settings: Value, summary: Value, warnings: Vec<String>) -> Metadata<'a> {
    let mut warnings = warnings;
    warnings.sort();
    warnings.dedup();
    Metadata {
        command,
        version: env!("CARGO_PKG_VERSION"),
        params: p,
        settings,
        summary,
        warnings,
    }
}

fn model_name(m: ModelKind) -> &'static str {
    match m {
        ModelKind::Local => "local",
        ModelKind::Global => "global",
    }
}

const THERMO_COLUMNS: [&str; 11] = [
    "q1",
    "q2",
    "qr",
    "w_q",
    "w_r",
    "classification",
    "efficiency",
    "cop",
    "eta_carnot",
    "cop_carnot",
    "u_dot",
];

fn thermo_fields(r: &ThermoReport) -> Vec<String> {
    vec![
        fmt_f64(r.q1),
        fmt_f64(r.q2),
        fmt_f64(r.qr),
        fmt_f64(r.w_q),
        fmt_f64(r.w_r),
        r.classification.to_string(),
        fmt_opt(r.efficiency),
        fmt_opt(r.cop),
        fmt_f64(r.carnot_efficiency),
        fmt_f64(r.carnot_cop),
        fmt_f64(r.u_dot),
    ]
}

fn cmd_steady(cfg: &Config, io: &Io, model: ModelKind) -> Result<(), CliError> {
    let p = &cfg.params;
    let (g, ss) = solve_model(p, model)?;
    let r = thermo_report(&ss.rho, &g, p)?;
    let mut header = vec!["model"];
    header.extend(THERMO_COLUMNS);
    header.extend(["first_law_residual", "solver_residual"]);
    let mut t = Table::new(header);
    let mut row = vec![model_name(model).to_string()];
    row.extend(thermo_fields(&r));
    row.extend([fmt_f64(r.first_law_residual), fmt_f64(ss.residual)]);
    t.push(row);
    let summary = json!({
        "reduced_dim": ss.reduced_dim,
        "degenerate": ss.degenerate,
        "generator_norm": ss.generator_norm,
        "singular_values": ss.singular_values,
    });
    write_outputs(&io.out, &t, &meta("steady", p, json!({"model": model_name(model)}), summary, ss.warnings))
}

fn resolve_range(cfg: &Config, r: &RangeArgs) -> (String, Vec<f64>) {
    let b = &cfg.sweep;
    let param = r
        .param
        .clone()
        .or_else(|| b.param.clone())
        .unwrap_or_else(|| "beta2_over_beta1".into());
    let from = r.from.or(b.from).unwrap_or(DEFAULT_SWEEP.0);
    let to = r.to.or(b.to).unwrap_or(DEFAULT_SWEEP.1);
    let points = r.points.or(b.points).unwrap_or(DEFAULT_SWEEP.2);
    (param, linspace(from, to, points))
}

fn cmd_sweep(cfg: &Config, io: &Io, r: &RangeArgs, ergotropy_only: bool) -> Result<(), CliError> {
    let p = &cfg.params;
    let model = ModelKind::from(r.model);
    let (param, values) = resolve_range(cfg, r);
    let rows = sweep(p, &param, &values, model)?;
    let mut header = vec![param.as_str()];
    if ergotropy_only {
        header.extend(["erg_total", "erg_qubits", "erg_rotor", "erg_qubit1", "erg_qubit2"]);
    } else {
        header.extend(&THERMO_COLUMNS[..10]);
        header.extend(["erg_total", "erg_qubits", "erg_rotor"]);
    }
    let mut t = Table::new(header);
    let mut warnings = Vec::new();
    for row in &rows {
        let e = &row.ergotropies;
        let mut fields = vec![fmt_f64(row.value)];
        if ergotropy_only {
            fields.extend([e.total, e.qubits, e.rotor, e.qubit1, e.qubit2].map(fmt_f64));
        } else {
            fields.extend(thermo_fields(&row.report).into_iter().take(10));
            fields.extend([e.total, e.qubits, e.rotor].map(fmt_f64));
        }
        t.push(fields);
        warnings.extend(row.warnings.iter().cloned());
    }
    let max_residual = rows
        .iter()
        .map(|r| r.report.first_law_residual.abs())
        .fold(0.0, f64::max);
    let settings = json!({"param": param, "values": values, "model": model_name(model)});
    let command = if ergotropy_only { "ergotropy" } else { "sweep" };
    write_outputs(
        &io.out,
        &t,
        &meta(command, p, settings, json!({"max_first_law_residual": max_residual}), warnings),
    )
}

fn cmd_evolve(
    cfg: &Config,
    io: &Io,
    model: ModelKind,
    t_end: Option<f64>,
    points: Option<usize>,
    initial: Option<Initial>,
) -> Result<(), CliError> {
    let p = &cfg.params;
    let b = &cfg.evolve;
    let t_end = t_end.or(b.t_end).unwrap_or(DEFAULT_EVOLVE.0);
    let points = points.or(b.points).unwrap_or(DEFAULT_EVOLVE.1);
    let init = initial.map(InitialState::from).or(b.initial).unwrap_or_default();
    let g = build_generator(p, model)?;
    let rho0 = initial_state(p, init)?;
    let times = uniform_times(t_end, points);
    let opts = EvolveOptions {
        tol: p.ode_tol,
        ..Default::default()
    };
    let tr = evolve(&g.total, &rho0, &times, &opts)?;
    let mut t = Table::new(["time", "w_kin", "w_int", "q_ba", "w_net"]);
    for (time, rho) in tr.times.iter().zip(&tr.states) {
        let pw = rotor_powers(rho, &g, p, *time);
        t.push([pw.time, pw.w_kin, pw.w_int, pw.q_ba, pw.w_net].map(fmt_f64).to_vec());
    }
    let settings = json!({"model": model_name(model), "t_end": t_end, "points": points, "initial": init});
    let summary = json!({"steps": tr.steps, "rejected": tr.rejected, "max_trace_drift": tr.max_trace_drift});
    write_outputs(&io.out, &t, &meta("evolve", p, settings, summary, Vec::new()))
}

fn argmax_json(a: &[Option<Argmax>]) -> Value {
    serde_json::to_value(a).expect("argmax serializes")
}

fn cmd_rectify(cfg: &Config, io: &Io, r: &RectArgs, angular: bool) -> Result<(), CliError> {
    let p = &cfg.params;
    let grid_n = r.grid.or(cfg.rectify.grid).unwrap_or(DEFAULT_RECT_GRID);
    let alphas = r
        .alphas
        .clone()
        .or_else(|| cfg.rectify.alphas.clone())
        .unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
    let grid = default_chi_grid(grid_n);
    let sw = sweep_chi(p, &grid, &alphas)?;
    if let Some((chi, Err(e))) = sw.pairs.iter().find(|(_, r)| r.is_err()) {
        return Err(CliError::Numerical(format!("chi = {chi}: {e}")));
    }
    let (a, b) = if angular { ("lz_fwd", "lz_swap") } else { ("q_fwd", "q_swap") };
    let mut header: Vec<String> = ["chi", a, b, "R", "J"].map(String::from).to_vec();
    header.extend(alphas.iter().map(|a| format!("gamma_{a}")));
    header.push("r_flag".into());
    let mut t = Table::new(header);
    for k in 0..grid.len() {
        let (chi, fwd, swap, rr, j, gammas, flag) = if angular {
            let x = sw.angular[k].as_ref().expect("all points solved");
            (x.chi, x.lz_fwd, x.lz_swap, x.r, x.j, &x.gammas, x.r_flag)
        } else {
            let x = sw.heat[k].as_ref().expect("all points solved");
            (x.chi, x.q_fwd, x.q_swap, x.r, x.j, &x.gammas, x.r_flag)
        };
        let mut row = vec![fmt_f64(chi), fmt_f64(fwd), fmt_f64(swap), fmt_f64(rr), fmt_f64(j)];
        row.extend(gammas.iter().map(|g| fmt_f64(g.1)));
        row.push(format!("{flag:?}").to_lowercase());
        t.push(row);
    }
    let argmax = if angular { &sw.angular_argmax } else { &sw.heat_argmax };
    let settings = json!({"grid": grid_n, "alphas": alphas, "model": "global"});
    let command = if angular { "rectify-angular" } else { "rectify" };
    write_outputs(&io.out, &t, &meta(command, p, settings, json!({"argmax": argmax_json(argmax)}), Vec::new()))
}

fn cmd_collision(
    cfg: &Config,
    io: &Io,
    taus: Option<Vec<f64>>,
    grid_step: Option<f64>,
    t_end: Option<f64>,
    l_min: Option<i64>,
    l_max: Option<i64>,
) -> Result<(), CliError> {
    let b = &cfg.collision;
    let taus = taus.or_else(|| b.taus.clone()).unwrap_or_else(|| DEFAULT_TAUS.to_vec());
    let grid_step = grid_step.or(b.grid_step).unwrap_or(taus[0]);
    let t_end = t_end.or(b.t_end).unwrap_or(2.0);
    let p = Params {
        l_min: l_min.or(b.l_min).unwrap_or(DEFAULT_COLLISION_LADDER.0),
        l_max: l_max.or(b.l_max).unwrap_or(DEFAULT_COLLISION_LADDER.1),
        ..cfg.params.clone()
    };
    p.validate()?;
    let mut rho0 = CMat::zeros(p.space()?.dim(), p.space()?.dim());
    let i = p.space()?.index(0, 1, 0.clamp(p.l_min, p.l_max));
    rho0[(i, i)] = Complex64::new(1.0, 0.0);
    let rep = lme_oracle(&p, &rho0, &taus, grid_step, t_end)?;
    let mut t = Table::new(["tau", "sup_error", "order"]);
    for (k, (tau, e)) in rep.taus.iter().zip(&rep.errors).enumerate() {
        let order = k.checked_sub(1).map(|j| rep.orders[j]);
        t.push(vec![fmt_f64(*tau), fmt_f64(*e), fmt_opt(order)]);
    }
    let settings = json!({"taus": taus, "grid_step": grid_step, "t_end": t_end, "initial": "down_up_rotor_at_rest"});
    let summary = json!({
        "fitted_order": rep.fitted_order,
        "collision_rates": rep.collision_rates,
        "lme_rates": rep.lme_rates,
        "rate_rel_errors": rep.rate_rel_errors,
        "max_energy_audit": rep.max_energy_audit,
        "max_trace_drift": rep.max_trace_drift,
    });
    write_outputs(&io.out, &t, &meta("collision-verify", &p, settings, summary, rep.warnings))
}

fn cmd_converge(
    cfg: &Config,
    io: &Io,
    widen: Option<i64>,
    t_end: Option<f64>,
    points: Option<usize>,
) -> Result<(), CliError> {
    let p = &cfg.params;
    let b = &cfg.converge;
    let widen = widen.or(b.widen_step).unwrap_or(DEFAULT_WIDEN);
    let t_end = t_end.or(b.t_end).unwrap_or(0.0);
    let points = points.or(b.points).unwrap_or(100);
    let rep = converge::converge(p, widen, Some((t_end, points)))?;
    let mut t = Table::new(["l", "population"]);
    for (l, v) in &rep.populations {
        t.push(vec![l.to_string(), fmt_f64(*v)]);
    }
    let mut summary = serde_json::to_value(&rep).expect("report serializes");
    if let Value::Object(m) = &mut summary {
        m.remove("populations");
        m.remove("warnings");
    }
    let settings = json!({"widen_step": widen, "t_end": t_end, "points": points});
    write_outputs(&io.out, &t, &meta("converge", p, settings, summary, rep.warnings.clone()))
}

/// Caps the global worker pool from `QM_THREADS`.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("QM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("QM_THREADS must be a positive integer, got `{v}`")))?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Steady { io, model } => cmd_steady(&Config::load(&io.config)?, io, (*model).into()),
        Command::Evolve {
            io,
            model,
            t_end,
            points,
            initial,
        } => cmd_evolve(&Config::load(&io.config)?, io, (*model).into(), *t_end, *points, *initial),
        Command::Sweep { io, range } => cmd_sweep(&Config::load(&io.config)?, io, range, false),
        Command::Ergotropy { io, range } => cmd_sweep(&Config::load(&io.config)?, io, range, true),
        Command::Rectify { io, rect } => cmd_rectify(&Config::load(&io.config)?, io, rect, false),
        Command::RectifyAngular { io, rect } => cmd_rectify(&Config::load(&io.config)?, io, rect, true),
        Command::CollisionVerify {
            io,
            taus,
            grid_step,
            t_end,
            l_min,
            l_max,
        } => cmd_collision(&Config::load(&io.config)?, io, taus.clone(), *grid_step, *t_end, *l_min, *l_max),
        Command::Converge {
            io,
            widen_step,
            t_end,
            points,
        } => cmd_converge(&Config::load(&io.config)?, io, *widen_step, *t_end, *points),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
/// Failures are reported on stderr as one JSON object.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            e.exit_code()
        }
    }
}
