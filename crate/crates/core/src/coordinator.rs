//! FIFO crossing queue, relative-set classification and terminal-time bounds.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::VehicleTrajectory;
use crate::types::{Approach, IntersectionConfig, Movement, Turn, VehicleRecord};

/// How a later vehicle's path relates to an earlier one's.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConflictRelation {
    /// Same exit lane, including identical movements.
    SameExitLane,
    /// Same entry lane, different exit.
    SameEntryLane,
    /// Paths cross inside the merging zone.
    LateralCross,
    NoConflict,
}

/// Symmetric 12×12 movement relation table.
#[derive(Clone, Debug, PartialEq)]
pub struct ConflictTable {
    cells: [[ConflictRelation; 12]; 12],
}

/// One table entry, used for overrides.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConflictEntry {
    pub a: Movement,
    pub b: Movement,
    pub relation: ConflictRelation,
}

impl Default for ConflictTable {
    fn default() -> Self {
        ConflictTable::geometric()
    }
}

impl ConflictTable {
    /// Table derived from single-lane right-hand-traffic geometry: straight
    /// paths run along lane centres, turns are quarter circles about the
    /// near corner (right) or the far corner (left).
    pub fn geometric() -> Self {
        let all = Movement::all();
        let paths: Vec<Vec<(f64, f64)>> = all.iter().map(|m| polyline(*m)).collect();
        let mut cells = [[ConflictRelation::NoConflict; 12]; 12];
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                cells[i][j] = if a.exit() == b.exit() {
                    ConflictRelation::SameExitLane
                } else if a.origin == b.origin {
                    ConflictRelation::SameEntryLane
                } else if polylines_cross(&paths[i], &paths[j]) {
                    ConflictRelation::LateralCross
                } else {
                    ConflictRelation::NoConflict
                };
            }
        }
        ConflictTable { cells }
    }

    /// Geometric table with the given symmetric overrides applied.
    pub fn with_overrides(entries: &[ConflictEntry]) -> Self {
        let mut t = ConflictTable::geometric();
        for e in entries {
            t.cells[e.a.index()][e.b.index()] = e.relation;
            t.cells[e.b.index()][e.a.index()] = e.relation;
        }
        t
    }

    pub fn relation(&self, earlier: Movement, later: Movement) -> ConflictRelation {
        self.cells[earlier.index()][later.index()]
    }
}

fn rotate_cw(p: (f64, f64), k: usize) -> (f64, f64) {
    let mut q = p;
    for _ in 0..k {
        q = (q.1, -q.0);
    }
    q
}

/// Path in unit coordinates (merging zone is `[-1, 1]²`, lanes at ±0.5).
fn polyline(m: Movement) -> Vec<(f64, f64)> {
    // Built for a westbound origin (heading east), then rotated.
    let n = 96;
    let base: Vec<(f64, f64)> = match m.turn {
        Turn::Straight => (0..=n).map(|k| (-1.0 + 2.0 * k as f64 / n as f64, -0.5)).collect(),
        Turn::Right => (0..=n)
            .map(|k| {
                let th = std::f64::consts::FRAC_PI_2 * (1.0 - k as f64 / n as f64);
                (-1.0 + 0.5 * th.cos(), -1.0 + 0.5 * th.sin())
            })
            .collect(),
        Turn::Left => (0..=n)
            .map(|k| {
                let th = -std::f64::consts::FRAC_PI_2 * (1.0 - k as f64 / n as f64);
                (-1.0 + 1.5 * th.cos(), 1.0 + 1.5 * th.sin())
            })
            .collect(),
    };
    let k = (m.origin.index() + 1) % 4;
    base.into_iter().map(|p| rotate_cw(p, k)).collect()
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn segments_cross(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    // Touching counts: paths may cross exactly at a shared vertex.
    let collinear = d1 == 0.0 && d2 == 0.0;
    !collinear && d1 * d2 <= 0.0 && d3 * d4 <= 0.0
}

fn polylines_cross(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    a.windows(2).any(|sa| b.windows(2).any(|sb| segments_cross(sa[0], sa[1], sb[0], sb[1])))
}

/// Queue indices (1-based) of earlier scheduled vehicles, partitioned.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelativeSets {
    pub same_exit: Vec<usize>,
    pub same_entry: Vec<usize>,
    pub lateral: Vec<usize>,
    pub no_conflict: Vec<usize>,
}

impl RelativeSets {
    pub fn len(&self) -> usize {
        self.same_exit.len() + self.same_entry.len() + self.lateral.len() + self.no_conflict.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Committed schedule of one vehicle.
#[derive(Clone, Debug)]
pub struct ScheduledVehicle {
    pub record: VehicleRecord,
    pub trajectory: Arc<VehicleTrajectory>,
    pub tm: f64,
    pub tf: f64,
    pub vm: f64,
    pub exit_speed: f64,
}

#[derive(Clone, Debug)]
pub enum EntryStatus {
    Pending,
    Scheduled(ScheduledVehicle),
    Skipped(String),
}

#[derive(Clone, Debug)]
pub struct QueueEntry {
    pub index: usize,
    pub record: VehicleRecord,
    pub status: EntryStatus,
}

impl QueueEntry {
    pub fn scheduled(&self) -> Option<&ScheduledVehicle> {
        match &self.status {
            EntryStatus::Scheduled(s) => Some(s),
            _ => None,
        }
    }
}

/// Crossing sequence ordered by control-zone entry.
#[derive(Clone, Debug)]
pub struct Coordinator {
    cfg: IntersectionConfig,
    table: ConflictTable,
    queue: Vec<QueueEntry>,
}

/// Earliest control-zone exit reachable by accelerating at `u_max`,
/// capped at `v_max`.
pub fn earliest_arrival(cfg: &IntersectionConfig, t0: f64, v0: f64) -> f64 {
    let (l, um, vx) = (cfg.cz_length, cfg.u_max, cfg.v_max);
    if (vx * vx - v0 * v0) / (2.0 * um) <= l {
        t0 + l / vx + (vx - v0).powi(2) / (2.0 * um * vx)
    } else {
        t0 + ((2.0 * l * um + v0 * v0).sqrt() - v0) / um
    }
}

/// Latest control-zone exit reachable by braking at `u_min`, floored at `v_min`.
pub fn latest_arrival(cfg: &IntersectionConfig, t0: f64, v0: f64) -> f64 {
    let (l, um, vn) = (cfg.cz_length, cfg.u_min, cfg.v_min);
    if (v0 * v0 - vn * vn) / (2.0 * um.abs()) < l {
        t0 + l / vn + (vn - v0).powi(2) / (2.0 * um * vn)
    } else {
        t0 + ((2.0 * l * um + v0 * v0).sqrt() - v0) / um
    }
}

impl Coordinator {
    pub fn new(cfg: IntersectionConfig, table: ConflictTable) -> Result<Self> {
        cfg.validate()?;
        Ok(Coordinator { cfg, table, queue: Vec::new() })
    }

    pub fn config(&self) -> &IntersectionConfig {
        &self.cfg
    }

    pub fn table(&self) -> &ConflictTable {
        &self.table
    }

    pub fn queue(&self) -> &[QueueEntry] {
        &self.queue
    }

    pub fn entry(&self, index: usize) -> Result<&QueueEntry> {
        index
            .checked_sub(1)
            .and_then(|k| self.queue.get(k))
            .ok_or_else(|| Error::input(format!("no queue entry {index}")))
    }

    /// Appends the arrival and returns its 1-based queue index.
    pub fn register_arrival(&mut self, record: VehicleRecord) -> Result<usize> {
        record.validate(&self.cfg)?;
        if let Some(last) = self.queue.last() {
            if record.t0 < last.record.t0 {
                return Err(Error::input(format!(
                    "vehicle {} arrives at {} before the previous arrival at {}",
                    record.id, record.t0, last.record.t0
                )));
            }
        }
        if self.queue.iter().any(|q| q.record.id == record.id) {
            return Err(Error::input(format!("duplicate vehicle id {}", record.id)));
        }
        let index = self.queue.len() + 1;
        self.queue.push(QueueEntry { index, record, status: EntryStatus::Pending });
        Ok(index)
    }

    /// Partition of the earlier scheduled vehicles relative to entry `i`.
    pub fn classify_relative_sets(&self, i: usize) -> Result<RelativeSets> {
        let me = self.entry(i)?.record.movement;
        let mut sets = RelativeSets::default();
        for q in &self.queue[..i - 1] {
            if q.scheduled().is_none() {
                continue;
            }
            let bucket = match self.table.relation(q.record.movement, me) {
                ConflictRelation::SameExitLane => &mut sets.same_exit,
                ConflictRelation::SameEntryLane => &mut sets.same_entry,
                ConflictRelation::LateralCross => &mut sets.lateral,
                ConflictRelation::NoConflict => &mut sets.no_conflict,
            };
            bucket.push(q.index);
        }
        Ok(sets)
    }

    fn sched(&self, index: usize) -> &ScheduledVehicle {
        self.queue[index - 1].scheduled().expect("relative sets hold scheduled entries only")
    }

    /// Lower bound on entry `i`'s control-zone exit time that keeps it
    /// clear of every earlier scheduled vehicle.
    pub fn terminal_time_lower_bound(&self, i: usize) -> Result<f64> {
        let rec = self.entry(i)?.record;
        let sets = self.classify_relative_sets(i)?;
        let cfg = &self.cfg;
        let delta_i = cfg.turn_time(rec.movement.turn);
        let mut lb = earliest_arrival(cfg, rec.t0, rec.v0);
        if let Some(&e) = sets.same_exit.last() {
            let s = self.sched(e);
            lb = lb.max(s.tf + cfg.safe_distance / s.exit_speed - delta_i);
        }
        if let Some(&k) = sets.same_entry.last() {
            let s = self.sched(k);
            let gap = cfg.gap_time(s.record.movement.turn, s.vm);
            lb = lb.max(s.tm + gap).max(s.tf - delta_i);
        }
        if let Some(&l) = sets.lateral.last() {
            lb = lb.max(self.sched(l).tf);
        }
        if let Some(&o) = sets.no_conflict.last() {
            lb = lb.max(self.sched(o).tf - delta_i);
        }
        Ok(lb)
    }

    pub fn terminal_time_upper_bound(&self, i: usize) -> Result<f64> {
        let rec = self.entry(i)?.record;
        Ok(latest_arrival(&self.cfg, rec.t0, rec.v0))
    }

    /// `[lower, upper]` or an infeasibility error.
    pub fn check_feasible_window(&self, i: usize) -> Result<(f64, f64)> {
        let lo = self.terminal_time_lower_bound(i)?;
        let hi = self.terminal_time_upper_bound(i)?;
        if lo > hi {
            return Err(Error::InfeasibleWindow { lower: lo, upper: hi });
        }
        Ok((lo, hi))
    }

    /// Most recent earlier scheduled vehicle on the same entry lane.
    pub fn physically_ahead(&self, i: usize) -> Result<Option<&ScheduledVehicle>> {
        let origin: Approach = self.entry(i)?.record.movement.origin;
        Ok(self.queue[..i - 1]
            .iter()
            .rev()
            .filter_map(|q| q.scheduled())
            .find(|s| s.record.movement.origin == origin))
    }

    pub fn record_solution(&mut self, i: usize, sched: ScheduledVehicle) -> Result<()> {
        self.entry(i)?;
        self.queue[i - 1].status = EntryStatus::Scheduled(sched);
        Ok(())
    }

    pub fn mark_skipped(&mut self, i: usize, reason: String) -> Result<()> {
        self.entry(i)?;
        self.queue[i - 1].status = EntryStatus::Skipped(reason);
        Ok(())
    }

    pub fn scheduled(&self) -> impl Iterator<Item = &ScheduledVehicle> {
        self.queue.iter().filter_map(|q| q.scheduled())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{ArcKind, Cubic, CzArc, CzTrajectory};
    use Approach::*;
    use ConflictRelation::*;
    use Turn::*;

    fn mv(o: Approach, t: Turn) -> Movement {
        Movement::new(o, t)
    }

    #[test]
    fn table_is_symmetric_and_reflexive() {
        let t = ConflictTable::geometric();
        for a in Movement::all() {
            assert_eq!(t.relation(a, a), SameExitLane);
            for b in Movement::all() {
                assert_eq!(t.relation(a, b), t.relation(b, a));
            }
        }
    }

    #[test]
    fn known_pairs() {
        let t = ConflictTable::geometric();
        assert_eq!(t.relation(mv(West, Straight), mv(West, Straight)), SameExitLane);
        assert_eq!(t.relation(mv(West, Left), mv(North, Straight)), LateralCross);
        assert_eq!(t.relation(mv(West, Left), mv(East, Left)), LateralCross);
        assert_eq!(t.relation(mv(West, Right), mv(East, Right)), NoConflict);
        assert_eq!(t.relation(mv(West, Left), mv(South, Straight)), SameExitLane);
        assert_eq!(t.relation(mv(West, Right), mv(West, Left)), SameEntryLane);
        assert_eq!(t.relation(mv(West, Straight), mv(South, Straight)), LateralCross);
    }

    #[test]
    fn right_turns_only_merge() {
        let t = ConflictTable::geometric();
        for o in Approach::ALL {
            for b in Movement::all() {
                if b.origin != o {
                    assert_ne!(t.relation(mv(o, Right), b), LateralCross, "{o:?} right vs {b:?}");
                }
            }
        }
    }

    #[test]
    fn arrival_bounds_branches() {
        let cfg = IntersectionConfig::default();
        let t = earliest_arrival(&cfg, 0.0, 10.0);
        assert!((t - (400.0 / 15.0 + 25.0 / 15.0)).abs() < 1e-12);
        let short = IntersectionConfig { cz_length: 50.0, ..cfg.clone() };
        let t2 = earliest_arrival(&short, 0.0, 10.0);
        assert!((t2 - ((2.0 * 50.0 * 0.5 + 100.0f64).sqrt() - 10.0) / 0.5).abs() < 1e-12);
        let tu = latest_arrival(&cfg, 0.0, 10.0);
        assert!((tu - (400.0 / 5.0 - 25.0 / 5.0)).abs() < 1e-12);
    }

    fn dummy_sched(rec: VehicleRecord, tm: f64, tf: f64) -> ScheduledVehicle {
        let cubic = Cubic { t_ref: rec.t0, a: 0.0, b: 0.0, c: rec.v0, d: 0.0 };
        let cz = CzTrajectory {
            t0: rec.t0,
            tm,
            arcs: vec![CzArc { t_start: rec.t0, t_end: tm, kind: ArcKind::UnconstrainedCubic(cubic) }],
        };
        ScheduledVehicle {
            record: rec,
            trajectory: Arc::new(VehicleTrajectory { id: rec.id, cz, mz: None }),
            tm,
            tf,
            vm: 10.0,
            exit_speed: 10.0,
        }
    }

    #[test]
    fn lateral_bound_dominates() {
        let mut c = Coordinator::new(IntersectionConfig::default(), ConflictTable::geometric()).unwrap();
        let r1 = VehicleRecord { id: 1, t0: 0.0, v0: 10.0, movement: mv(North, Straight) };
        let r2 = VehicleRecord { id: 2, t0: 1.0, v0: 10.0, movement: mv(West, Left) };
        let i1 = c.register_arrival(r1).unwrap();
        c.record_solution(i1, dummy_sched(r1, 35.0, 40.0)).unwrap();
        let i2 = c.register_arrival(r2).unwrap();
        let sets = c.classify_relative_sets(i2).unwrap();
        assert_eq!(sets.lateral, vec![1]);
        assert_eq!(c.terminal_time_lower_bound(i2).unwrap(), 40.0);
    }

    #[test]
    fn first_vehicle_has_empty_sets() {
        let mut c = Coordinator::new(IntersectionConfig::default(), ConflictTable::geometric()).unwrap();
        let r = VehicleRecord { id: 7, t0: 0.0, v0: 10.0, movement: mv(South, Right) };
        let i = c.register_arrival(r).unwrap();
        assert!(c.classify_relative_sets(i).unwrap().is_empty());
        let lb = c.terminal_time_lower_bound(i).unwrap();
        assert_eq!(lb, earliest_arrival(c.config(), 0.0, 10.0));
    }
}
