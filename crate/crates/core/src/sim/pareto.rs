use rayon::prelude::*;
use serde::Serialize;

use super::{generate_arrivals, run_records, SimConfig};
use crate::error::Result;
use crate::mz::{mz_objective, solve_mz, MzProblem};
use crate::types::{CostWeights, IntersectionConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CzParetoRow {
    pub beta: f64,
    pub mean_travel_time: f64,
    /// Sum of control-zone `∫u²`.
    pub cz_energy: f64,
    pub total_fuel: Option<f64>,
    /// Sum of control-zone costs under this row's own weighting.
    pub cz_cost: f64,
    pub scheduled: usize,
    pub skipped: usize,
    pub violations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MzParetoRow {
    pub w: f64,
    pub accel_energy: f64,
    pub jerk_energy: f64,
}

/// One full run per `β` on the same arrival stream.
pub fn pareto_sweep_cz(cfg: &SimConfig, betas: &[f64]) -> Result<Vec<CzParetoRow>> {
    cfg.validate()?;
    let records = generate_arrivals(&cfg.arrivals, &cfg.intersection)?;
    betas
        .par_iter()
        .map(|&beta| {
            let c = SimConfig { weights: CostWeights { beta, ..cfg.weights }, ..cfg.clone() };
            let log = run_records(&c, &records)?;
            let m = log.metrics;
            Ok(CzParetoRow {
                beta,
                mean_travel_time: m.mean_travel_time,
                cz_energy: m.cz_energy,
                total_fuel: m.total_fuel,
                cz_cost: m.cz_cost,
                scheduled: m.scheduled,
                skipped: m.skipped,
                violations: log.monitor.violations.len(),
            })
        })
        .collect()
}

/// Merging-zone energies of one instance across `w`. The weights in `prob`
/// are replaced row by row.
pub fn pareto_sweep_mz(
    cfg: &IntersectionConfig,
    weights: &CostWeights,
    prob: &MzProblem,
    ws: &[f64],
) -> Result<Vec<MzParetoRow>> {
    ws.par_iter()
        .map(|&w| {
            let (rho1, rho2) = CostWeights { w, ..*weights }.rho(cfg)?;
            let o = mz_objective(&solve_mz(&MzProblem { rho1, rho2, ..*prob })?);
            Ok(MzParetoRow { w, accel_energy: o.accel_energy, jerk_energy: o.jerk_energy })
        })
        .collect()
}
