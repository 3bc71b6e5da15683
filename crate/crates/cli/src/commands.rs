use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cavsim_core::cz::{solve_cz, CzProblem, CzSolution, TerminalMode};
use cavsim_core::mz::{boundary_residual, mz_objective, solve_mz, MzProblem};
use cavsim_core::oracle::{brute_force_cz, brute_force_mz, GridSpec};
use cavsim_core::sim::{pareto_sweep_cz, pareto_sweep_mz, run, MzParetoRow, Outcome, SimLog};
use cavsim_core::trajectory::{Lead, VehicleTrajectory};
use cavsim_core::types::{CostWeights, IntersectionConfig, Turn};

use crate::config::{resolve_output_dir, RunConfig};
use crate::error::{CliError, CliResult};
use crate::export::{coefficients, samples, write_csv, write_json, write_samples, CoefficientFile, VehicleCoefficients};

#[derive(Debug, Parser)]
#[command(name = "cavsim", version, about = "Optimal coordination of automated vehicles at an unsignalized intersection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one control-zone instance.
    SolveCz(CzArgs),
    /// Solve one merging-zone instance.
    SolveMz(MzArgs),
    /// Run the event-driven simulation described by a config file.
    Simulate(SimArgs),
    /// Sweep the control-zone and merging-zone weights.
    Pareto(ParetoArgs),
    /// Solve an instance by direct discretization and compare.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    Cz {
        #[command(flatten)]
        args: CzArgs,
        /// Time step (s).
        #[arg(long, default_value_t = 0.05)]
        h: f64,
    },
    Mz {
        #[command(flatten)]
        args: MzArgs,
        #[arg(long, default_value_t = 0.01)]
        h: f64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Config file supplying intersection geometry and limits.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; the environment override still applies when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CzArgs {
    #[arg(long)]
    pub t0: f64,
    #[arg(long)]
    pub v0: f64,
    /// Control-zone length (m).
    #[arg(long = "L")]
    pub length: f64,
    #[arg(long)]
    pub gamma: f64,
    /// Fixed terminal time; free when absent.
    #[arg(long)]
    pub tm: Option<f64>,
    /// Vehicle ahead on the same lane, solved first with the same weights.
    #[arg(long, requires = "lead_v0")]
    pub lead_t0: Option<f64>,
    #[arg(long, requires = "lead_t0")]
    pub lead_v0: Option<f64>,
    #[arg(long, requires = "lead_t0")]
    pub lead_tm: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct MzArgs {
    #[arg(long)]
    pub tm: f64,
    /// Exit time; `tm` plus the configured crossing time of `--turn` when absent.
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long, value_parser = parse_turn, default_value = "straight")]
    pub turn: Turn,
    /// Path length; the configured length of `--turn` when absent.
    #[arg(long)]
    pub path_length: Option<f64>,
    #[arg(long)]
    pub v_entry: f64,
    #[arg(long, default_value_t = 0.0)]
    pub u_entry: f64,
    /// Exit speed; the configured one when absent.
    #[arg(long)]
    pub v_exit: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub w: f64,
    #[arg(long, default_value_t = 10.0)]
    pub jerk_scale: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    pub config: PathBuf,
    /// Replaces the arrival seed of the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ParetoArgs {
    pub config: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95])]
    pub betas: Vec<f64>,
    /// Merging-zone weights, swept over every vehicle of the base run.
    #[arg(long, value_delimiter = ',')]
    pub ws: Vec<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_turn(s: &str) -> Result<Turn, String> {
    match s {
        "left" => Ok(Turn::Left),
        "straight" => Ok(Turn::Straight),
        "right" => Ok(Turn::Right),
        _ => Err(format!("expected left, straight or right, got {s:?}")),
    }
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn out_dir(explicit: Option<&Path>, cfg: &RunConfig) -> CliResult<PathBuf> {
    let dir = match explicit {
        Some(d) => d.to_path_buf(),
        None => resolve_output_dir(&cfg.output.dir),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

#[derive(Serialize)]
struct CzReport<'a> {
    case: &'a str,
    method: &'a str,
    free_terminal: bool,
    t0: f64,
    tm: f64,
    vm: f64,
    cost: f64,
    residual: f64,
    switch_times: &'a [f64],
    coefficients: VehicleCoefficients,
}

fn cz_problem(a: &CzArgs, ic: &IntersectionConfig) -> CliResult<CzProblem> {
    let mut ic = ic.clone();
    ic.cz_length = a.length;
    ic.validate()?;
    let mut p = CzProblem::new(&ic, a.t0, a.v0, a.gamma);
    if let Some(tm) = a.tm {
        p = p.with_terminal(TerminalMode::Fixed(tm));
    }
    if let (Some(t0), Some(v0)) = (a.lead_t0, a.lead_v0) {
        let mut lp = CzProblem::new(&ic, t0, v0, a.gamma);
        if let Some(tm) = a.lead_tm {
            lp = lp.with_terminal(TerminalMode::Fixed(tm));
        }
        let lead = solve_cz(&lp)?;
        let trajectory = Arc::new(VehicleTrajectory { id: 0, cz: lead.trajectory, mz: None });
        p = p.with_lead(Lead { id: 0, trajectory });
    }
    p.validate()?;
    Ok(p)
}

fn method(s: &CzSolution) -> &'static str {
    if s.free_terminal {
        "free terminal time"
    } else {
        "fixed terminal time"
    }
}

pub fn cmd_solve_cz(a: &CzArgs, out: &mut impl Write) -> CliResult<()> {
    let cfg = load_config(a.common.config.as_deref())?;
    let p = cz_problem(a, &cfg.intersection)?;
    let s = solve_cz(&p)?;
    let dir = out_dir(a.common.out.as_deref(), &cfg)?;
    let tr = VehicleTrajectory { id: 1, cz: s.trajectory.clone(), mz: None };
    let report = CzReport {
        case: s.case.name(),
        method: method(&s),
        free_terminal: s.free_terminal,
        t0: p.t0,
        tm: s.tm(),
        vm: s.vm(),
        cost: s.cost,
        residual: s.residual,
        switch_times: &s.switch_times,
        coefficients: coefficients(&tr),
    };
    write_json(&dir.join("cz_report.json"), &report)?;
    let mut file = CoefficientFile::default();
    if let Some(l) = &p.lead {
        file.vehicles.push(coefficients(&l.trajectory));
    }
    file.vehicles.push(coefficients(&tr));
    write_json(&dir.join("coefficients.json"), &file)?;
    write_samples(&dir.join("samples.csv"), samples(&tr, cfg.output.sample_step))?;
    let w = |e: std::io::Error| CliError::io(&dir, e);
    writeln!(out, "case: {} ({})", s.case.name(), method(&s)).map_err(w)?;
    writeln!(out, "tm = {:.4} s, vm = {:.4} m/s, cost = {:.6}", s.tm(), s.vm(), s.cost).map_err(w)?;
    if !s.switch_times.is_empty() {
        let ts: Vec<String> = s.switch_times.iter().map(|t| format!("{t:.4}")).collect();
        writeln!(out, "junctions: {}", ts.join(", ")).map_err(w)?;
    }
    writeln!(out, "residual = {:.2e}", s.residual).map_err(w)?;
    writeln!(out, "wrote {}", dir.display()).map_err(w)?;
    Ok(())
}

fn mz_problem(a: &MzArgs, ic: &IntersectionConfig) -> CliResult<MzProblem> {
    let (rho1, rho2) = CostWeights { w: a.w, jerk_scale: a.jerk_scale, ..Default::default() }.rho(ic)?;
    let p = MzProblem {
        tm: a.tm,
        tf: a.tf.unwrap_or(a.tm + ic.turn_time(a.turn)),
        p_entry: ic.cz_length,
        path_length: a.path_length.unwrap_or(ic.path_length(a.turn)),
        v_entry: a.v_entry,
        u_entry: a.u_entry,
        v_exit: a.v_exit.unwrap_or(ic.exit_speed),
        rho1,
        rho2,
    };
    p.validate()?;
    Ok(p)
}

#[derive(Serialize)]
struct MzReport {
    tm: f64,
    tf: f64,
    rho1: f64,
    rho2: f64,
    objective: f64,
    accel_energy: f64,
    jerk_energy: f64,
    boundary_residual: f64,
    coeffs: [f64; 6],
}

pub fn cmd_solve_mz(a: &MzArgs, out: &mut impl Write) -> CliResult<()> {
    let cfg = load_config(a.common.config.as_deref())?;
    let p = mz_problem(a, &cfg.intersection)?;
    let m = solve_mz(&p)?;
    let o = mz_objective(&m);
    let res = boundary_residual(&p, &m);
    let dir = out_dir(a.common.out.as_deref(), &cfg)?;
    let report = MzReport {
        tm: m.tm,
        tf: m.tf,
        rho1: m.rho1,
        rho2: m.rho2,
        objective: o.weighted,
        accel_energy: o.accel_energy,
        jerk_energy: o.jerk_energy,
        boundary_residual: res,
        coeffs: m.coeffs,
    };
    write_json(&dir.join("mz_report.json"), &report)?;
    let rows: Vec<_> = crate::export::sample_times(m.tm, m.tf, cfg.output.sample_step)
        .into_iter()
        .map(|t| {
            let s = m.state_local(t - m.tm);
            crate::export::SampleRow {
                vehicle_id: 1,
                t,
                p: s.p,
                v: s.v,
                u: s.u,
                jerk: s.jerk,
                zone: "mz".into(),
                arc_kind: "merging_zone".into(),
            }
        })
        .collect();
    write_samples(&dir.join("mz_samples.csv"), rows)?;
    let w = |e: std::io::Error| CliError::io(&dir, e);
    writeln!(out, "objective = {:.6e} (accel {:.6e}, jerk {:.6e})", o.weighted, o.accel_energy, o.jerk_energy)
        .map_err(w)?;
    writeln!(out, "boundary residual = {res:.2e}").map_err(w)?;
    writeln!(out, "wrote {}", dir.display()).map_err(w)?;
    Ok(())
}

#[derive(Serialize)]
struct VehicleRow {
    vehicle_id: u32,
    t0: f64,
    v0: f64,
    origin: String,
    turn: String,
    status: String,
    case: String,
    tm: Option<f64>,
    tf: Option<f64>,
    cz_cost: Option<f64>,
    mz_cost: Option<f64>,
    note: String,
}

fn vehicle_rows(log: &SimLog) -> Vec<VehicleRow> {
    log.vehicles
        .iter()
        .map(|v| {
            let r = v.record;
            let base = VehicleRow {
                vehicle_id: r.id,
                t0: r.t0,
                v0: r.v0,
                origin: format!("{:?}", r.movement.origin).to_lowercase(),
                turn: format!("{:?}", r.movement.turn).to_lowercase(),
                status: String::new(),
                case: String::new(),
                tm: None,
                tf: None,
                cz_cost: None,
                mz_cost: None,
                note: String::new(),
            };
            match &v.outcome {
                Outcome::Scheduled(s) => VehicleRow {
                    status: "scheduled".into(),
                    case: s.case.name().into(),
                    tm: Some(s.trajectory.tm()),
                    tf: Some(s.tf),
                    cz_cost: Some(s.cz_cost),
                    mz_cost: Some(s.mz.weighted),
                    ..base
                },
                Outcome::Skipped(why) => VehicleRow { status: "skipped".into(), note: why.clone(), ..base },
            }
        })
        .collect()
}

pub fn write_log(log: &SimLog, dir: &Path, step: f64, with_samples: bool) -> CliResult<()> {
    let scheduled: Vec<&Arc<VehicleTrajectory>> =
        log.vehicles.iter().filter_map(|v| v.schedule().map(|s| &s.trajectory)).collect();
    let file = CoefficientFile { vehicles: scheduled.iter().map(|t| coefficients(t)).collect() };
    write_json(&dir.join("coefficients.json"), &file)?;
    if with_samples {
        write_samples(&dir.join("samples.csv"), scheduled.iter().flat_map(|t| samples(t, step)))?;
    }
    write_csv(&dir.join("vehicles.csv"), &vehicle_rows(log))?;
    write_json(&dir.join("metrics.json"), &log.metrics)?;
    write_json(&dir.join("monitor.json"), &log.monitor)
}

pub fn cmd_simulate(a: &SimArgs, out: &mut impl Write) -> CliResult<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.arrivals.seed = s;
    }
    let dir = out_dir(a.out.as_deref(), &cfg)?;
    let w = |e: std::io::Error| CliError::io(&dir, e);
    writeln!(out, "seed = {}", cfg.arrivals.seed).map_err(w)?;
    let log = run(&cfg.sim())?;
    write_log(&log, &dir, cfg.output.sample_step, cfg.output.samples)?;
    let m = &log.metrics;
    writeln!(out, "vehicles = {}, scheduled = {}, skipped = {}", m.vehicles, m.scheduled, m.skipped).map_err(w)?;
    writeln!(out, "mean travel time = {:.3} s, control-zone energy = {:.4}", m.mean_travel_time, m.cz_energy)
        .map_err(w)?;
    if let Some(f) = m.total_fuel {
        writeln!(out, "fuel = {f:.4}").map_err(w)?;
    }
    writeln!(
        out,
        "monitor: {} violations, {} advisories over {} pairs",
        log.monitor.violations.len(),
        log.monitor.advisories.len(),
        log.monitor.pairs_checked
    )
    .map_err(w)?;
    writeln!(out, "wrote {}", dir.display()).map_err(w)?;
    if !log.monitor.violations.is_empty() {
        return Err(CliError::Monitor(log.monitor.violations.len()));
    }
    Ok(())
}

/// Merging-zone problem each scheduled vehicle solved in the log.
fn mz_problems(log: &SimLog) -> Vec<MzProblem> {
    let c = &log.config;
    log.vehicles
        .iter()
        .filter_map(|v| {
            let s = v.schedule()?;
            let m = s.trajectory.mz?;
            let e = s.trajectory.cz.terminal();
            Some(MzProblem {
                tm: m.tm,
                tf: m.tf,
                p_entry: c.cz_length,
                path_length: c.path_length(v.record.movement.turn),
                v_entry: e.v,
                u_entry: e.u,
                v_exit: s.exit_speed,
                rho1: m.rho1,
                rho2: m.rho2,
            })
        })
        .collect()
}

pub fn cmd_pareto(a: &ParetoArgs, out: &mut impl Write) -> CliResult<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.arrivals.seed = s;
    }
    let dir = out_dir(a.out.as_deref(), &cfg)?;
    let w = |e: std::io::Error| CliError::io(&dir, e);
    writeln!(out, "seed = {}", cfg.arrivals.seed).map_err(w)?;
    let sim = cfg.sim();
    let rows = pareto_sweep_cz(&sim, &a.betas)?;
    write_csv(&dir.join("pareto_cz.csv"), &rows)?;
    for r in &rows {
        writeln!(
            out,
            "beta {:.3}: travel time {:.3} s, energy {:.4}, skipped {}, violations {}",
            r.beta, r.mean_travel_time, r.cz_energy, r.skipped, r.violations
        )
        .map_err(w)?;
    }
    if !a.ws.is_empty() {
        let log = run(&sim)?;
        let mut total: Vec<MzParetoRow> =
            a.ws.iter().map(|&w| MzParetoRow { w, accel_energy: 0.0, jerk_energy: 0.0 }).collect();
        for p in mz_problems(&log) {
            for (t, r) in total.iter_mut().zip(pareto_sweep_mz(&cfg.intersection, &cfg.weights, &p, &a.ws)?) {
                t.accel_energy += r.accel_energy;
                t.jerk_energy += r.jerk_energy;
            }
        }
        write_csv(&dir.join("pareto_mz.csv"), &total)?;
        for r in &total {
            writeln!(out, "w {:.3}: accel {:.6}, jerk {:.6}", r.w, r.accel_energy, r.jerk_energy).map_err(w)?;
        }
    }
    writeln!(out, "wrote {}", dir.display()).map_err(w)?;
    if rows.iter().any(|r| r.violations > 0) {
        return Err(CliError::Monitor(rows.iter().map(|r| r.violations).sum()));
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleReport {
    analytic_cost: f64,
    oracle_cost: f64,
    relative_gap: f64,
    h: f64,
    analytic_tm: Option<f64>,
    oracle_tm: Option<f64>,
    boundary_error: f64,
}

pub fn cmd_oracle(c: &OracleCommand, out: &mut impl Write) -> CliResult<()> {
    let (report, dir) = match c {
        OracleCommand::Cz { args, h } => {
            let cfg = load_config(args.common.config.as_deref())?;
            let p = cz_problem(args, &cfg.intersection)?;
            let s = solve_cz(&p)?;
            let o = brute_force_cz(&p, &GridSpec::new(*h))?;
            let r = OracleReport {
                analytic_cost: s.cost,
                oracle_cost: o.cost,
                relative_gap: (o.cost - s.cost) / s.cost,
                h: o.h,
                analytic_tm: Some(s.tm()),
                oracle_tm: Some(o.tm),
                boundary_error: o.terminal_error,
            };
            (r, out_dir(args.common.out.as_deref(), &cfg)?)
        }
        OracleCommand::Mz { args, h } => {
            let cfg = load_config(args.common.config.as_deref())?;
            let p = mz_problem(args, &cfg.intersection)?;
            let a = mz_objective(&solve_mz(&p)?).weighted;
            let o = brute_force_mz(&p, &GridSpec::new(*h))?;
            let r = OracleReport {
                analytic_cost: a,
                oracle_cost: o.cost,
                relative_gap: if a > 0.0 { (o.cost - a) / a } else { o.cost - a },
                h: o.h,
                analytic_tm: None,
                oracle_tm: None,
                boundary_error: o.boundary_error,
            };
            (r, out_dir(args.common.out.as_deref(), &cfg)?)
        }
    };
    write_json(&dir.join("oracle_report.json"), &report)?;
    let w = |e: std::io::Error| CliError::io(&dir, e);
    writeln!(
        out,
        "analytic cost = {:.8}, oracle cost = {:.8}, relative gap = {:.3e} (h = {})",
        report.analytic_cost, report.oracle_cost, report.relative_gap, report.h
    )
    .map_err(w)?;
    if let (Some(a), Some(o)) = (report.analytic_tm, report.oracle_tm) {
        writeln!(out, "tm: analytic {a:.4} s, oracle {o:.4} s").map_err(w)?;
    }
    Ok(())
}

pub fn dispatch(cli: &Cli, out: &mut impl Write) -> CliResult<()> {
    match &cli.command {
        Command::SolveCz(a) => cmd_solve_cz(a, out),
        Command::SolveMz(a) => cmd_solve_mz(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Pareto(a) => cmd_pareto(a, out),
        Command::Oracle(c) => cmd_oracle(c, out),
    }
}
