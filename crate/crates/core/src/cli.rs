//! Command-line interface.
//!
//! Values are resolved flag first, then config file, then built-in default.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::asymptotics::{asymptotic_qfi, markovian_optimum, markovian_qfi, AsymptoticQfi, MarkovianOptimum};
use crate::design::{design_with_table, fit_exponent, Branch, DesignOptions, DesignResult, ResidueTable, DEFAULT_A};
use crate::dynamics::{markovian_params, solve_amplitude, AmplitudeTrajectory, StroboscopicSample};
use crate::error::{Error, Result};
use crate::floquet::{fbs_derivatives, scan_spectrum, FbsSolver, FloquetBoundState, ScanAxis, DEFAULT_DERIVATIVE_STEP};
use crate::io::{ensure_dir, num, opt_num, write_csv, write_json, ConfigFile};
use crate::lattice::lattice_oracle;
use crate::model::{MarkovianModel, ModelParams};
use crate::qfi::qfi_series;

#[derive(Debug, Parser)]
#[command(name = "floquet-metrology", version, about = "Floquet-engineered noisy Ramsey metrology")]
pub struct Cli {
    /// Flat key-value config file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parameter scans.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long, global = true)]
    pub omega0: Option<f64>,
    #[arg(long, global = true)]
    pub g: Option<f64>,
    #[arg(long, global = true)]
    pub h: Option<f64>,
    #[arg(long = "omega_c", global = true, allow_hyphen_values = true)]
    pub omega_c: Option<f64>,
    #[arg(long = "A", global = true)]
    pub amplitude: Option<f64>,
    #[arg(long = "omega_T", global = true)]
    pub omega_t: Option<f64>,
    #[arg(long = "N", global = true)]
    pub n_atoms: Option<u32>,
}

#[derive(Debug, Args)]
pub struct TimeArgs {
    #[arg(long = "t_max")]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Drop the drive term.
    #[arg(long)]
    pub undriven: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Amplitude trajectory c(t) and its omega0-sensitivity.
    Evolve {
        #[command(flatten)]
        time: TimeArgs,
        /// Integrate the finite L x L lattice instead of the memory equation.
        #[arg(long = "lattice_size")]
        lattice_size: Option<usize>,
    },
    /// QFI series of the GHZ probe.
    Qfi {
        #[command(flatten)]
        time: TimeArgs,
        /// Keep only stroboscopic points t = nT.
        #[arg(long)]
        stroboscopic: bool,
    },
    /// Band edges and bound states over a sweep of A or omega_T.
    Spectrum {
        #[arg(long)]
        axis: Option<String>,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long = "n_max")]
        n_max: Option<usize>,
    },
    /// Bound states, derivatives and long-time QFI at one point.
    Fbs {
        #[arg(long = "n_max")]
        n_max: Option<usize>,
    },
    /// Markovian decay rate, shift and optimal precision.
    Markovian {
        /// Total measurement duration.
        #[arg(long = "t_r")]
        t_r: Option<f64>,
    },
    /// Drive amplitudes restoring N² scaling over a range of N.
    Optimize {
        #[arg(long = "n_from")]
        n_from: Option<u32>,
        #[arg(long = "n_to")]
        n_to: Option<u32>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        /// lower, upper, or a region index.
        #[arg(long)]
        branch: Option<String>,
    },
}

struct Context {
    cfg: ConfigFile,
    params: ModelParams,
    out: PathBuf,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let cfg = match &cli.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let base = cfg.params();
        let a = &cli.params;
        let params = ModelParams {
            omega0: a.omega0.unwrap_or(base.omega0),
            g: a.g.unwrap_or(base.g),
            h: a.h.unwrap_or(base.h),
            omega_c: a.omega_c.unwrap_or(base.omega_c),
            amplitude: a.amplitude.unwrap_or(base.amplitude),
            omega_t: a.omega_t.unwrap_or(base.omega_t),
            n_atoms: a.n_atoms.unwrap_or(base.n_atoms),
        };
        params.validate()?;
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
        ensure_dir(&out)?;
        Ok(Self { cfg, params, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn time_grid(&self, t: &TimeArgs) -> (f64, f64, bool) {
        let p = &self.params;
        let t_max = t.t_max.or(self.cfg.t_max).unwrap_or(40.0 / p.h);
        let dt = t.dt.or(self.cfg.dt).unwrap_or((p.period() / 80.0).min(0.05 / p.h));
        let driven = !t.undriven && self.cfg.driven.unwrap_or(true);
        (t_max, dt, driven)
    }
}

/// Parse arguments, run, and return the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Context::new(cli)?;
    let workers = cli.workers.or(ctx.cfg.workers);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Evolve { time, lattice_size } => cmd_evolve(&ctx, time, *lattice_size),
        Command::Qfi { time, stroboscopic } => cmd_qfi(&ctx, time, *stroboscopic),
        Command::Spectrum { axis, from, to, step, n_max } => {
            cmd_spectrum(&ctx, axis.as_deref(), *from, *to, *step, *n_max)
        }
        Command::Fbs { n_max } => cmd_fbs(&ctx, *n_max),
        Command::Markovian { t_r } => cmd_markovian(&ctx, *t_r),
        Command::Optimize { n_from, n_to, a, tol, branch } => {
            cmd_optimize(&ctx, *n_from, *n_to, *a, *tol, branch.as_deref())
        }
    })
}

#[derive(Serialize)]
struct EvolveSummary<'a> {
    solver: &'a str,
    driven: bool,
    t_max: f64,
    dt: f64,
    steps: usize,
    steps_per_period: usize,
    max_norm_drift: Option<f64>,
    stroboscopic: Vec<StroboscopicSample>,
}

fn trajectory_rows(traj: &AmplitudeTrajectory) -> Vec<Vec<String>> {
    (0..traj.len())
        .map(|i| {
            let (c, d) = (traj.c[i], traj.dc_domega0[i]);
            vec![num(traj.times[i]), num(c.re), num(c.im), num(c.norm_sqr()), num(d.re), num(d.im)]
        })
        .collect()
}

fn cmd_evolve(ctx: &Context, time: &TimeArgs, lattice_size: Option<usize>) -> Result<()> {
    let (t_max, dt, driven) = ctx.time_grid(time);
    let p = &ctx.params;
    let (traj, solver, drift) = match lattice_size.or(ctx.cfg.lattice_size) {
        Some(l) => {
            let run = lattice_oracle(p, l, t_max, dt, driven)?;
            (run.trajectory, "lattice", Some(run.max_norm_drift))
        }
        None => (solve_amplitude(p, t_max, dt, driven)?, "volterra", None),
    };
    let extra = [("solver", solver.to_string()), ("driven", driven.to_string()), ("dt", num(traj.dt))];
    write_csv(
        &ctx.path("trajectory.csv"),
        p,
        &extra,
        &["t", "re_c", "im_c", "abs_c_sq", "re_dc", "im_dc"],
        &trajectory_rows(&traj),
    )?;
    let summary = EvolveSummary {
        solver,
        driven,
        t_max,
        dt: traj.dt,
        steps: traj.len() - 1,
        steps_per_period: traj.steps_per_period,
        max_norm_drift: drift,
        stroboscopic: traj.stroboscopic(),
    };
    write_json(&ctx.path("evolve.json"), p, &summary)
}

fn cmd_qfi(ctx: &Context, time: &TimeArgs, stroboscopic: bool) -> Result<()> {
    let (t_max, dt, driven) = ctx.time_grid(time);
    let p = &ctx.params;
    let traj = solve_amplitude(p, t_max, dt, driven)?;
    let series = qfi_series(&traj, p.n_atoms)?;
    // the Markovian column is omitted where κ is undefined
    let kappa = markovian_params(p).ok().map(|m| m.kappa);
    let step = if stroboscopic { traj.steps_per_period } else { 1 };
    let rows: Vec<Vec<String>> = series
        .iter()
        .step_by(step)
        .map(|r| {
            let scaled = |k: i32| (r.t > 0.0).then(|| r.total / r.t.powi(k));
            vec![
                num(r.t),
                num(r.total),
                num(r.f1),
                num(r.f2),
                opt_num(scaled(2)),
                opt_num(scaled(1)),
                opt_num(kappa.map(|k| markovian_qfi(k, p.n_atoms, r.t))),
            ]
        })
        .collect();
    write_csv(
        &ctx.path("qfi.csv"),
        p,
        &[("driven", driven.to_string()), ("dt", num(traj.dt))],
        &["t", "F_total", "F1", "F2", "F_total/t^2", "F_total/t", "F_markovian"],
        &rows,
    )
}

fn scan_values(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(to >= from) {
        return Err(Error::Config(format!("invalid scan range {from}..{to} step {step}")));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| from + i as f64 * step).collect())
}

fn cmd_spectrum(
    ctx: &Context,
    axis: Option<&str>,
    from: Option<f64>,
    to: Option<f64>,
    step: Option<f64>,
    n_max: Option<usize>,
) -> Result<()> {
    let axis: ScanAxis = axis.or(ctx.cfg.axis.as_deref()).unwrap_or("A").parse()?;
    let (def_from, def_to, def_step) = match axis {
        ScanAxis::Amplitude => (0.0, 40.0, 0.1),
        ScanAxis::DriveFrequency => (4.0, 20.0, 0.1),
    };
    let values = scan_values(
        from.or(ctx.cfg.scan_from).unwrap_or(def_from),
        to.or(ctx.cfg.scan_to).unwrap_or(def_to),
        step.or(ctx.cfg.scan_step).unwrap_or(def_step),
    )?;
    let solver = FbsSolver { n_max: n_max.or(ctx.cfg.n_max), ..FbsSolver::default() };
    let scan = scan_spectrum(&ctx.params, axis, &values, &solver)?;

    let rows: Vec<Vec<String>> = scan
        .points
        .iter()
        .map(|pt| {
            let branch = |i: usize| pt.branches.get(i).copied();
            vec![
                num(pt.value),
                pt.branches.len().to_string(),
                opt_num(branch(0).map(|b| b.0)),
                opt_num(branch(0).map(|b| b.1)),
                opt_num(branch(1).map(|b| b.0)),
                opt_num(branch(1).map(|b| b.1)),
                pt.edge_unresolved.to_string(),
            ]
        })
        .collect();
    let extra = [("axis", axis.name().to_string())];
    write_csv(
        &ctx.path("spectrum.csv"),
        &ctx.params,
        &extra,
        &["axis_value", "n_branches", "epsilon_b_1", "Z_1", "epsilon_b_2", "Z_2", "edge_unresolved"],
        &rows,
    )?;
    let edges: Vec<Vec<String>> = scan
        .points
        .iter()
        .flat_map(|pt| {
            pt.band_edges
                .iter()
                .map(move |&(m, lo, hi)| vec![num(pt.value), m.to_string(), num(lo), num(hi)])
        })
        .collect();
    write_csv(&ctx.path("band_edges.csv"), &ctx.params, &extra, &["axis_value", "copy", "lower", "upper"], &edges)
}

#[derive(Serialize)]
struct FbsReport {
    edge_unresolved: usize,
    states: Vec<FbsEntry>,
}

#[derive(Serialize)]
struct FbsEntry {
    #[serde(flatten)]
    state: FloquetBoundState,
    long_time: Option<AsymptoticQfi>,
}

fn cmd_fbs(ctx: &Context, n_max: Option<usize>) -> Result<()> {
    let p = &ctx.params;
    let solver = FbsSolver { n_max: n_max.or(ctx.cfg.n_max), ..FbsSolver::default() };
    let search = solver.solve(p)?;
    let states = fbs_derivatives(p, &solver, DEFAULT_DERIVATIVE_STEP)?;
    let entries = states
        .into_iter()
        .map(|state| {
            let long_time = asymptotic_qfi(&state, p.n_atoms).ok();
            FbsEntry { state, long_time }
        })
        .collect();
    write_json(&ctx.path("fbs.json"), p, &FbsReport { edge_unresolved: search.edge_unresolved, states: entries })
}

#[derive(Serialize)]
struct MarkovianReport {
    model: MarkovianModel,
    optimum: Option<MarkovianOptimum>,
}

fn cmd_markovian(ctx: &Context, t_r: Option<f64>) -> Result<()> {
    let p = &ctx.params;
    let mut model = markovian_params(p)?;
    model.t_r = t_r.or(ctx.cfg.t_r).unwrap_or(model.t_r);
    let optimum = if model.kappa > 0.0 { Some(markovian_optimum(model.kappa, p.n_atoms, model.t_r)?) } else { None };
    write_json(&ctx.path("markovian.json"), p, &MarkovianReport { model, optimum })
}

#[derive(Serialize)]
struct DesignSummary {
    a: f64,
    branch: Branch,
    n_values: Vec<u32>,
    f_slope_exponent: Option<f64>,
}

fn cmd_optimize(
    ctx: &Context,
    n_from: Option<u32>,
    n_to: Option<u32>,
    a: Option<f64>,
    tol: Option<f64>,
    branch: Option<&str>,
) -> Result<()> {
    let p = &ctx.params;
    let n_from = n_from.or(ctx.cfg.n_from).unwrap_or(4);
    let n_to = n_to.or(ctx.cfg.n_to).unwrap_or(20);
    if n_from < 1 || n_to < n_from {
        return Err(Error::Config(format!("invalid N range {n_from}..{n_to}")));
    }
    let a = a.or(ctx.cfg.a).unwrap_or(DEFAULT_A);
    let branch: Branch = branch.or(ctx.cfg.branch.as_deref()).unwrap_or("lower").parse()?;
    let opts = DesignOptions {
        branch,
        tol: tol.or(ctx.cfg.tol).unwrap_or(1e-4),
        solver: FbsSolver { n_max: ctx.cfg.n_max, ..FbsSolver::default() },
        ..DesignOptions::default()
    };
    let table = ResidueTable::new(p, &opts)?;
    let results: Vec<DesignResult> =
        (n_from..=n_to).map(|n| design_with_table(p, n, a, &opts, &table)).collect::<Result<_>>()?;

    for r in &results {
        write_json(&ctx.path(&format!("design_N{}.json", r.n_atoms)), p, r)?;
    }
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| vec![r.n_atoms.to_string(), num(r.a_opt), num(r.z2_achieved), num(r.y_value), num(r.f_slope)])
        .collect();
    let extra = [("a", num(a)), ("branch", format!("{branch:?}"))];
    write_csv(&ctx.path("design.csv"), p, &extra, &["N", "A_opt", "Z2", "y", "F_slope"], &rows)?;

    let ns: Vec<f64> = results.iter().map(|r| r.n_atoms as f64).collect();
    let slopes: Vec<f64> = results.iter().map(|r| r.f_slope).collect();
    let summary = DesignSummary {
        a,
        branch,
        n_values: results.iter().map(|r| r.n_atoms).collect(),
        f_slope_exponent: (ns.len() >= 2).then(|| fit_exponent(&ns, &slopes)),
    };
    write_json(&ctx.path("design_summary.json"), p, &summary)
}

/// Read a CSV written by this tool, skipping the comment header.
pub fn read_csv_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    rdr.records()
        .map(|r| Ok(r?.iter().map(str::to_string).collect()))
        .collect()
}
