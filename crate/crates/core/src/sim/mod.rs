//! Event-driven simulation: arrivals are scheduled one at a time in queue
//! order, then the realized trajectories are audited by an independent
//! monitor.

mod arrivals;
mod fuel;
mod monitor;
mod pareto;

pub use arrivals::{generate_arrivals, ArrivalModel};
pub use fuel::{fuel_rate, FuelModel};
pub use monitor::{monitor, MonitorReport, Verdict, VerdictKind};
pub use pareto::{pareto_sweep_cz, pareto_sweep_mz, CzParetoRow, MzParetoRow};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coordinator::{ConflictEntry, ConflictTable, Coordinator, RelativeSets, ScheduledVehicle};
use crate::cz::{solve_cz, CzCase, CzProblem};
use crate::error::{Error, Result};
use crate::mz::{mz_objective, solve_mz, MzObjective, MzProblem};
use crate::trajectory::{Lead, VehicleTrajectory};
use crate::types::{CostWeights, IntersectionConfig, Turn, VehicleId, VehicleRecord};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasiblePolicy {
    Abort,
    #[default]
    SkipAndFlag,
}

/// Merging-zone entry speed per turn, replacing the control-zone terminal
/// speed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntrySpeeds {
    pub left: f64,
    pub straight: f64,
    pub right: f64,
}

impl EntrySpeeds {
    pub fn get(&self, turn: Turn) -> f64 {
        match turn {
            Turn::Left => self.left,
            Turn::Straight => self.straight,
            Turn::Right => self.right,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub infeasible: InfeasiblePolicy,
    /// `None` enters the merging zone at the control-zone terminal state.
    pub mz_entry_speeds: Option<EntrySpeeds>,
    /// Sampling step of the monitor and the fuel integral (s).
    pub monitor_step: f64,
    pub conflict_overrides: Vec<ConflictEntry>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            infeasible: InfeasiblePolicy::SkipAndFlag,
            mz_entry_speeds: None,
            monitor_step: 0.01,
            conflict_overrides: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub intersection: IntersectionConfig,
    pub weights: CostWeights,
    pub arrivals: ArrivalModel,
    pub fuel: Option<FuelModel>,
    pub run: RunOptions,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.intersection.validate()?;
        self.weights.validate()?;
        self.arrivals.validate(&self.intersection)?;
        if let Some(f) = &self.fuel {
            f.validate()?;
        }
        if !(self.run.monitor_step > 0.0 && self.run.monitor_step.is_finite()) {
            return Err(Error::config("monitor step must be positive"));
        }
        if let Some(s) = &self.run.mz_entry_speeds {
            for v in [s.left, s.straight, s.right] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(format!("merging-zone entry speed must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Schedule {
    pub case: CzCase,
    pub cz_residual: f64,
    /// `γ (tm - t0) + ½∫u²` over the control zone.
    pub cz_cost: f64,
    pub mz: MzObjective,
    pub trajectory: Arc<VehicleTrajectory>,
    pub tf: f64,
    pub exit_speed: f64,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Scheduled(Schedule),
    Skipped(String),
}

#[derive(Clone, Debug)]
pub struct VehicleLog {
    pub index: usize,
    pub record: VehicleRecord,
    pub sets: RelativeSets,
    pub window: Option<(f64, f64)>,
    /// Vehicle ahead on the same entry lane, if it constrained the solve.
    pub lead: Option<VehicleId>,
    pub outcome: Outcome,
}

impl VehicleLog {
    pub fn schedule(&self) -> Option<&Schedule> {
        match &self.outcome {
            Outcome::Scheduled(s) => Some(s),
            Outcome::Skipped(_) => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub vehicles: usize,
    pub scheduled: usize,
    pub skipped: usize,
    /// Mean of `tm - t0` over scheduled vehicles.
    pub mean_travel_time: f64,
    /// Sum of control-zone `∫u²`.
    pub cz_energy: f64,
    /// Sum of control-zone costs.
    pub cz_cost: f64,
    /// Sum of weighted merging-zone costs.
    pub mz_cost: f64,
    pub mz_accel_energy: f64,
    pub mz_jerk_energy: f64,
    /// Fuel over `[t0, tf]`, when a fuel model is configured.
    pub total_fuel: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SimLog {
    pub config: IntersectionConfig,
    pub table: ConflictTable,
    pub gamma: f64,
    pub vehicles: Vec<VehicleLog>,
    pub monitor: MonitorReport,
    pub metrics: Metrics,
}

impl SimLog {
    pub fn passed(&self) -> bool {
        self.monitor.violations.is_empty() && self.metrics.skipped == 0
    }
}

/// Generates the arrival stream and runs it.
pub fn run(cfg: &SimConfig) -> Result<SimLog> {
    cfg.validate()?;
    let records = generate_arrivals(&cfg.arrivals, &cfg.intersection)?;
    run_records(cfg, &records)
}

/// Schedules the given arrivals in order, then audits the result.
pub fn run_records(cfg: &SimConfig, records: &[VehicleRecord]) -> Result<SimLog> {
    cfg.validate()?;
    let ic = &cfg.intersection;
    let gamma = cfg.weights.gamma(ic)?;
    let (rho1, rho2) = cfg.weights.rho(ic)?;
    let table = ConflictTable::with_overrides(&cfg.run.conflict_overrides);
    let mut coord = Coordinator::new(ic.clone(), table.clone())?;
    let mut vehicles = Vec::with_capacity(records.len());

    for rec in records {
        let i = coord.register_arrival(*rec)?;
        let sets = coord.classify_relative_sets(i)?;
        let mut log = VehicleLog {
            index: i,
            record: *rec,
            sets,
            window: None,
            lead: None,
            outcome: Outcome::Skipped(String::new()),
        };
        match schedule_one(&coord, i, cfg, gamma, (rho1, rho2), &mut log) {
            Ok(s) => {
                let sched = ScheduledVehicle {
                    record: *rec,
                    trajectory: s.trajectory.clone(),
                    tm: s.trajectory.tm(),
                    tf: s.tf,
                    vm: s.trajectory.cz.terminal().v,
                    exit_speed: s.exit_speed,
                };
                coord.record_solution(i, sched)?;
                log.outcome = Outcome::Scheduled(s);
            }
            Err(e) => match cfg.run.infeasible {
                InfeasiblePolicy::Abort => return Err(e),
                InfeasiblePolicy::SkipAndFlag => {
                    coord.mark_skipped(i, e.to_string())?;
                    log.outcome = Outcome::Skipped(e.to_string());
                }
            },
        }
        vehicles.push(log);
    }

    let mut log = SimLog {
        config: ic.clone(),
        table,
        gamma,
        vehicles,
        monitor: MonitorReport::default(),
        metrics: Metrics::default(),
    };
    log.monitor = monitor(&log, cfg.run.monitor_step);
    log.metrics = metrics(&log, cfg.fuel.as_ref(), cfg.run.monitor_step);
    Ok(log)
}

fn schedule_one(
    coord: &Coordinator,
    i: usize,
    cfg: &SimConfig,
    gamma: f64,
    (rho1, rho2): (f64, f64),
    log: &mut VehicleLog,
) -> Result<Schedule> {
    let ic = &cfg.intersection;
    let rec = log.record;
    let (lo, hi) = coord.check_feasible_window(i)?;
    log.window = Some((lo, hi));
    let mut prob = CzProblem::new(ic, rec.t0, rec.v0, gamma).with_window(lo, hi);
    if let Some(ahead) = coord.physically_ahead(i)? {
        // A lead already δ past the entry can never bind.
        let clear = ahead.trajectory.time_at_position(ic.cz_length + ic.safe_distance);
        if clear.is_none_or(|t| t > rec.t0) {
            log.lead = Some(ahead.record.id);
            prob = prob.with_lead(Lead { id: ahead.record.id, trajectory: ahead.trajectory.clone() });
        }
    }
    let sol = solve_cz(&prob)?;
    let terminal = sol.terminal();
    let turn = rec.movement.turn;
    let tm = sol.tm();
    let tf = tm + ic.turn_time(turn);
    let v_entry = cfg.run.mz_entry_speeds.map_or(terminal.v, |s| s.get(turn));
    let mzp = MzProblem {
        tm,
        tf,
        p_entry: ic.cz_length,
        path_length: ic.path_length(turn),
        v_entry,
        u_entry: terminal.u,
        v_exit: ic.exit_speed,
        rho1,
        rho2,
    };
    let mz = solve_mz(&mzp)?;
    let trajectory = Arc::new(VehicleTrajectory { id: rec.id, cz: sol.trajectory.clone(), mz: Some(mz) });
    Ok(Schedule {
        case: sol.case,
        cz_residual: sol.residual,
        cz_cost: sol.cost,
        mz: mz_objective(&mz),
        trajectory,
        tf,
        exit_speed: ic.exit_speed,
    })
}

fn metrics(log: &SimLog, fuel: Option<&FuelModel>, step: f64) -> Metrics {
    let sched: Vec<&Schedule> = log.vehicles.iter().filter_map(|v| v.schedule()).collect();
    let n = sched.len();
    let mut m = Metrics { vehicles: log.vehicles.len(), scheduled: n, skipped: log.vehicles.len() - n, ..Default::default() };
    for s in &sched {
        let tr = &s.trajectory;
        m.mean_travel_time += tr.tm() - tr.t0();
        m.cz_energy += tr.cz.control_energy(tr.t0(), tr.tm());
        m.cz_cost += s.cz_cost;
        m.mz_cost += s.mz.weighted;
        m.mz_accel_energy += s.mz.accel_energy;
        m.mz_jerk_energy += s.mz.jerk_energy;
    }
    if n > 0 {
        m.mean_travel_time /= n as f64;
    }
    m.total_fuel = fuel.map(|f| sched.iter().map(|s| vehicle_fuel(&s.trajectory, f, step)).sum());
    m
}

/// Trapezoidal fuel integral over `[t0, tf]`.
fn vehicle_fuel(tr: &VehicleTrajectory, f: &FuelModel, step: f64) -> f64 {
    let (a, b) = (tr.t0(), tr.t_exit());
    let n = ((b - a) / step).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    let rate = |t: f64| tr.state(t).map(|s| fuel_rate(s.v, s.u, f)).unwrap_or(0.0);
    let inner: f64 = (1..n).map(|k| rate(a + k as f64 * h)).sum();
    h * (0.5 * (rate(a) + rate(b)) + inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Approach, Movement};

    fn rec(id: u32, t0: f64, v0: f64, origin: Approach, turn: Turn) -> VehicleRecord {
        VehicleRecord { id, t0, v0, movement: Movement::new(origin, turn) }
    }

    #[test]
    fn single_vehicle_is_unconstrained() {
        let cfg = SimConfig::default();
        let log = run_records(&cfg, &[rec(1, 0.0, 10.0, Approach::West, Turn::Straight)]).unwrap();
        let s = log.vehicles[0].schedule().unwrap();
        assert_eq!(s.case, CzCase::Unconstrained);
        assert!(log.passed(), "{:?}", log.monitor.violations);
        assert!((s.tf - s.trajectory.tm() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn same_lane_follower_respects_gap() {
        let cfg = SimConfig::default();
        let rs = [
            rec(1, 0.0, 10.0, Approach::West, Turn::Straight),
            rec(2, 1.0, 10.0, Approach::West, Turn::Straight),
        ];
        let log = run_records(&cfg, &rs).unwrap();
        assert!(log.passed(), "{:?} {:?} {:?}", log.monitor.violations, log.vehicles[1].window, log.vehicles[0].outcome);
        let (a, b) = (log.vehicles[0].schedule().unwrap(), log.vehicles[1].schedule().unwrap());
        assert!(b.tf >= a.tf + cfg.intersection.safe_distance / a.exit_speed - 1e-9);
        assert!(b.trajectory.tm() > a.trajectory.tm());
    }

    #[test]
    fn abort_policy_propagates() {
        let cfg = SimConfig { run: RunOptions { infeasible: InfeasiblePolicy::Abort, ..Default::default() }, ..Default::default() };
        // The follower starts inside the safe distance of its lead.
        let rs = [
            rec(1, 0.0, 10.0, Approach::West, Turn::Straight),
            rec(2, 0.2, 10.0, Approach::West, Turn::Straight),
        ];
        assert!(run_records(&cfg, &rs).is_err());
        let skip = run_records(&SimConfig::default(), &rs).unwrap();
        assert_eq!(skip.metrics.skipped, 1);
        assert!(!skip.passed() && skip.monitor.violations.is_empty());
    }

    #[test]
    fn fuel_is_integrated_when_configured() {
        let cfg = SimConfig {
            fuel: Some(FuelModel { cruise: [1.0, 0.0, 0.0, 0.0], accel: [0.0; 3] }),
            ..Default::default()
        };
        let log = run_records(&cfg, &[rec(1, 0.0, 10.0, Approach::North, Turn::Left)]).unwrap();
        let tr = &log.vehicles[0].schedule().unwrap().trajectory;
        assert!((log.metrics.total_fuel.unwrap() - (tr.t_exit() - tr.t0())).abs() < 1e-9);
    }
}
