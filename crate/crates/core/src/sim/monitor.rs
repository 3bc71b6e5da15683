//! Grid audit of a simulation log. Only trajectory evaluation is used, never
//! solver internals.

use rayon::prelude::*;
use serde::Serialize;

use super::{Schedule, SimLog};
use crate::coordinator::ConflictRelation;
use crate::trajectory::VehicleTrajectory;
use crate::types::{VehicleId, VehicleRecord};

const GAP_TOL: f64 = 1e-6;
const BOX_TOL: f64 = 1e-6;
const TIME_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    /// Same-lane gap in the control zone.
    RearEnd,
    SpeedBox,
    ControlBox,
    /// Merging-zone exits out of queue order.
    Fifo,
    /// Same-lane vehicles entering the merging zone out of order.
    MzStartOrder,
    /// Occupancy overlap of crossing paths.
    Lateral,
    /// Spacing at the end of the merging zone on a shared exit lane.
    ExitSpacing,
    /// Gap on a shared merging-zone path; spacing is only imposed at its
    /// ends.
    MzRearEnd,
    /// Box excursion inside the merging zone, where no box is imposed.
    MzSpeedBox,
    MzControlBox,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub vehicle: VehicleId,
    pub other: Option<VehicleId>,
    pub t: f64,
    /// Signed slack; negative means violated.
    pub margin: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MonitorReport {
    pub violations: Vec<Verdict>,
    /// Merging-zone box excursions, reported but not enforced.
    pub advisories: Vec<Verdict>,
    pub pairs_checked: usize,
}

struct Scheduled<'a> {
    rec: VehicleRecord,
    s: &'a Schedule,
}

impl Scheduled<'_> {
    fn tr(&self) -> &VehicleTrajectory {
        &self.s.trajectory
    }
    fn tm(&self) -> f64 {
        self.s.trajectory.tm()
    }
}

fn grid(a: f64, b: f64, step: f64) -> impl Iterator<Item = f64> {
    let n = ((b - a) / step).ceil().max(0.0) as usize;
    (0..=n).map(move |k| if k == n { b } else { a + k as f64 * step })
}

/// Most negative `f` on the grid, paired with its time.
fn worst(a: f64, b: f64, step: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    grid(a, b, step).map(|t| (t, f(t))).fold((a, f64::INFINITY), |m, x| if x.1 < m.1 { x } else { m })
}

fn pos(tr: &VehicleTrajectory, t: f64) -> f64 {
    tr.state(t).map(|s| s.p).unwrap_or(f64::NAN)
}

/// Runs every check on a grid of `step` seconds.
pub fn monitor(log: &SimLog, step: f64) -> MonitorReport {
    let cfg = &log.config;
    let delta = cfg.safe_distance;
    let vs: Vec<Scheduled> =
        log.vehicles.iter().filter_map(|v| v.schedule().map(|s| Scheduled { rec: v.record, s })).collect();

    let own: Vec<Vec<Verdict>> = vs
        .par_iter()
        .map(|x| {
            let mut out = Vec::new();
            let tr = x.tr();
            let id = x.rec.id;
            let st = |t: f64| tr.state(t).ok();
            let (t_v, m_v) = worst(tr.t0(), x.tm(), step, |t| {
                st(t).map_or(f64::NEG_INFINITY, |s| (s.v - cfg.v_min).min(cfg.v_max - s.v))
            });
            if m_v < -BOX_TOL {
                out.push(Verdict { kind: VerdictKind::SpeedBox, vehicle: id, other: None, t: t_v, margin: m_v });
            }
            let (t_u, m_u) = worst(tr.t0(), x.tm(), step, |t| {
                st(t).map_or(f64::NEG_INFINITY, |s| (s.u - cfg.u_min).min(cfg.u_max - s.u))
            });
            if m_u < -BOX_TOL {
                out.push(Verdict { kind: VerdictKind::ControlBox, vehicle: id, other: None, t: t_u, margin: m_u });
            }
            out
        })
        .collect();

    let advisories: Vec<Verdict> = vs
        .par_iter()
        .flat_map_iter(|x| {
            let tr = x.tr();
            let id = x.rec.id;
            let st = |t: f64| tr.state(t).ok();
            let (a, b) = (x.tm(), x.s.tf);
            let (t_v, m_v) = worst(a, b, step, |t| st(t).map_or(0.0, |s| (s.v - cfg.v_min).min(cfg.v_max - s.v)));
            let (t_u, m_u) = worst(a, b, step, |t| st(t).map_or(0.0, |s| (s.u - cfg.u_min).min(cfg.u_max - s.u)));
            let mut out = Vec::new();
            if m_v < -BOX_TOL {
                out.push(Verdict { kind: VerdictKind::MzSpeedBox, vehicle: id, other: None, t: t_v, margin: m_v });
            }
            if m_u < -BOX_TOL {
                out.push(Verdict { kind: VerdictKind::MzControlBox, vehicle: id, other: None, t: t_u, margin: m_u });
            }
            out
        })
        .collect();

    let mz_gaps: Vec<Verdict> = (0..vs.len())
        .flat_map(|i| (0..i).map(move |j| (j, i)))
        .filter(|&(j, i)| vs[j].rec.movement == vs[i].rec.movement && vs[j].s.tf > vs[i].tm())
        .collect::<Vec<_>>()
        .par_iter()
        .filter_map(|&(j, i)| {
            let (a, b) = (&vs[j], &vs[i]);
            let (t, m) = worst(b.tm(), a.s.tf.min(b.s.tf), step, |t| pos(a.tr(), t) - pos(b.tr(), t) - delta);
            (m < -GAP_TOL).then_some(Verdict { kind: VerdictKind::MzRearEnd, vehicle: b.rec.id, other: Some(a.rec.id), t, margin: m })
        })
        .collect();

    let pairs: Vec<(usize, usize)> = (0..vs.len()).flat_map(|i| (0..i).map(move |j| (j, i))).collect();
    let pair_verdicts: Vec<Vec<Verdict>> = pairs
        .par_iter()
        .map(|&(j, i)| {
            let (a, b) = (&vs[j], &vs[i]);
            let mut out = Vec::new();
            let v = |kind, t, margin| Verdict { kind, vehicle: b.rec.id, other: Some(a.rec.id), t, margin };
            if b.s.tf < a.s.tf - TIME_TOL {
                out.push(v(VerdictKind::Fifo, b.s.tf, b.s.tf - a.s.tf));
            }
            let same_origin = a.rec.movement.origin == b.rec.movement.origin;
            if same_origin {
                if b.tm() <= a.tm() {
                    out.push(v(VerdictKind::MzStartOrder, b.tm(), b.tm() - a.tm()));
                }
                let (t, m) = worst(b.tr().t0(), b.tm(), step, |t| pos(a.tr(), t) - pos(b.tr(), t) - delta);
                if m < -GAP_TOL {
                    out.push(v(VerdictKind::RearEnd, t, m));
                }
            }
            match log.table.relation(a.rec.movement, b.rec.movement) {
                ConflictRelation::LateralCross => {
                    let overlap = a.s.tf.min(b.s.tf) - a.tm().max(b.tm());
                    if overlap > TIME_TOL {
                        out.push(v(VerdictKind::Lateral, a.tm().max(b.tm()), -overlap));
                    }
                }
                ConflictRelation::SameExitLane => {
                    // Both hold their exit speed beyond the merging zone.
                    let (ea, eb) = (cfg.cz_length + cfg.path_length(a.rec.movement.turn), cfg.cz_length + cfg.path_length(b.rec.movement.turn));
                    let horizon = b.s.tf + delta / b.s.exit_speed;
                    let (t, m) = worst(b.s.tf, horizon, step, |t| (pos(a.tr(), t) - ea) - (pos(b.tr(), t) - eb) - delta);
                    if m < -GAP_TOL {
                        out.push(v(VerdictKind::ExitSpacing, t, m));
                    }
                }
                _ => {}
            }
            out
        })
        .collect();

    MonitorReport {
        violations: own.into_iter().chain(pair_verdicts).flatten().collect(),
        advisories: advisories.into_iter().chain(mz_gaps).collect(),
        pairs_checked: pairs.len(),
    }
}
