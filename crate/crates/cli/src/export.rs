//! Trajectory files: a sampled table for plotting and a coefficient document
//! from which every sample can be recomputed exactly.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use cavsim_core::trajectory::{
    ArcKind, Cubic, CzArc, CzTrajectory, Lead, MzTrajectory, State, VehicleTrajectory,
};
use cavsim_core::types::VehicleId;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub vehicle_id: VehicleId,
    pub t: f64,
    pub p: f64,
    pub v: f64,
    pub u: f64,
    pub jerk: f64,
    pub zone: String,
    pub arc_kind: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArcBody {
    UnconstrainedCubic { t_ref: f64, a: f64, b: f64, c: f64, d: f64 },
    FollowPredecessor { lead: VehicleId, gap: f64 },
    CruiseVmax { p_start: f64, v: f64 },
    CruiseVmin { p_start: f64, v: f64 },
    SaturateUmax { p_start: f64, v_start: f64, u: f64 },
    SaturateUmin { p_start: f64, v_start: f64, u: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcRecord {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    #[serde(flatten)]
    pub body: ArcBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MzRecord {
    pub tm: f64,
    pub tf: f64,
    pub rho1: f64,
    pub rho2: f64,
    /// `[a, b, c, d, e, f]` in the local frame `s = t - tm`.
    pub coeffs: [f64; 6],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleCoefficients {
    pub vehicle_id: VehicleId,
    pub t0: f64,
    pub tm: f64,
    pub arcs: Vec<ArcRecord>,
    pub mz: Option<MzRecord>,
}

/// Vehicles in schedule order, so every lead precedes its followers.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFile {
    pub vehicles: Vec<VehicleCoefficients>,
}

pub fn coefficients(tr: &VehicleTrajectory) -> VehicleCoefficients {
    let arcs = tr
        .cz
        .arcs
        .iter()
        .enumerate()
        .map(|(index, a)| {
            let body = match &a.kind {
                ArcKind::UnconstrainedCubic(c) => ArcBody::UnconstrainedCubic { t_ref: c.t_ref, a: c.a, b: c.b, c: c.c, d: c.d },
                ArcKind::FollowPredecessor { lead, gap } => ArcBody::FollowPredecessor { lead: lead.id, gap: *gap },
                ArcKind::CruiseVmax { p_start, v } => ArcBody::CruiseVmax { p_start: *p_start, v: *v },
                ArcKind::CruiseVmin { p_start, v } => ArcBody::CruiseVmin { p_start: *p_start, v: *v },
                ArcKind::SaturateUmax { p_start, v_start, u } => {
                    ArcBody::SaturateUmax { p_start: *p_start, v_start: *v_start, u: *u }
                }
                ArcKind::SaturateUmin { p_start, v_start, u } => {
                    ArcBody::SaturateUmin { p_start: *p_start, v_start: *v_start, u: *u }
                }
            };
            ArcRecord { index, t_start: a.t_start, t_end: a.t_end, body }
        })
        .collect();
    let mz = tr.mz.map(|m| MzRecord { tm: m.tm, tf: m.tf, rho1: m.rho1, rho2: m.rho2, coeffs: m.coeffs });
    VehicleCoefficients { vehicle_id: tr.id, t0: tr.cz.t0, tm: tr.cz.tm, arcs, mz }
}

/// Rebuilds trajectories; a follow arc must name a lead listed earlier.
pub fn rebuild(file: &CoefficientFile) -> CliResult<Vec<Arc<VehicleTrajectory>>> {
    let mut by_id: HashMap<VehicleId, Arc<VehicleTrajectory>> = HashMap::new();
    let mut out = Vec::with_capacity(file.vehicles.len());
    for v in &file.vehicles {
        let mut arcs = Vec::with_capacity(v.arcs.len());
        for r in &v.arcs {
            let kind = match r.body {
                ArcBody::UnconstrainedCubic { t_ref, a, b, c, d } => ArcKind::UnconstrainedCubic(Cubic { t_ref, a, b, c, d }),
                ArcBody::FollowPredecessor { lead, gap } => {
                    let trajectory = by_id.get(&lead).cloned().ok_or_else(|| {
                        CliError::Config(format!("vehicle {} arc {} follows unknown vehicle {lead}", v.vehicle_id, r.index))
                    })?;
                    ArcKind::FollowPredecessor { lead: Lead { id: lead, trajectory }, gap }
                }
                ArcBody::CruiseVmax { p_start, v } => ArcKind::CruiseVmax { p_start, v },
                ArcBody::CruiseVmin { p_start, v } => ArcKind::CruiseVmin { p_start, v },
                ArcBody::SaturateUmax { p_start, v_start, u } => ArcKind::SaturateUmax { p_start, v_start, u },
                ArcBody::SaturateUmin { p_start, v_start, u } => ArcKind::SaturateUmin { p_start, v_start, u },
            };
            arcs.push(CzArc { t_start: r.t_start, t_end: r.t_end, kind });
        }
        let mz = v.mz.as_ref().map(|m| MzTrajectory { tm: m.tm, tf: m.tf, rho1: m.rho1, rho2: m.rho2, coeffs: m.coeffs });
        let tr = Arc::new(VehicleTrajectory { id: v.vehicle_id, cz: CzTrajectory { t0: v.t0, tm: v.tm, arcs }, mz });
        by_id.insert(v.vehicle_id, tr.clone());
        out.push(tr);
    }
    Ok(out)
}

fn zone_and_kind(tr: &VehicleTrajectory, t: f64) -> (&'static str, &'static str) {
    if t <= tr.cz.tm || tr.mz.is_none() {
        let i = tr.cz.arc_index(t).unwrap_or(tr.cz.arcs.len().saturating_sub(1));
        ("cz", tr.cz.arcs.get(i).map_or("none", |a| a.kind.name()))
    } else {
        ("mz", "merging_zone")
    }
}

/// Sample times `t0 + k step` on `[t0, end]`, with `end` itself appended.
pub fn sample_times(t0: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - t0) / step).floor() as usize;
    let mut ts: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * step).filter(|&t| t <= end).collect();
    if ts.last().is_none_or(|&t| end - t > 1e-12) {
        ts.push(end);
    }
    ts
}

/// Samples over the control zone and, when present, the merging zone.
pub fn samples(tr: &VehicleTrajectory, step: f64) -> Vec<SampleRow> {
    let end = tr.mz.map_or(tr.cz.tm, |m| m.tf);
    sample_times(tr.cz.t0, end, step)
        .into_iter()
        .map(|t| {
            let s: State = tr.state(t).unwrap_or_default();
            let (zone, kind) = zone_and_kind(tr, t);
            SampleRow { vehicle_id: tr.id, t, p: s.p, v: s.v, u: s.u, jerk: s.jerk, zone: zone.into(), arc_kind: kind.into() }
        })
        .collect()
}

pub fn write_samples(path: &Path, rows: impl IntoIterator<Item = SampleRow>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_samples(path: &Path) -> CliResult<Vec<SampleRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    r.deserialize().collect::<Result<_, _>>().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_grid_ends_on_the_boundary() {
        let ts = sample_times(1.0, 1.025, 0.01);
        assert_eq!(ts.len(), 4);
        assert_eq!(*ts.last().unwrap(), 1.025);
        assert_eq!(sample_times(0.0, 0.02, 0.01).len(), 3);
    }

    #[test]
    fn unknown_lead_is_rejected() {
        let file = CoefficientFile {
            vehicles: vec![VehicleCoefficients {
                vehicle_id: 2,
                t0: 0.0,
                tm: 1.0,
                arcs: vec![ArcRecord { index: 0, t_start: 0.0, t_end: 1.0, body: ArcBody::FollowPredecessor { lead: 1, gap: 10.0 } }],
                mz: None,
            }],
        };
        assert!(matches!(rebuild(&file), Err(CliError::Config(_))));
    }
}
