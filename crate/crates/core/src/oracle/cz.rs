//! Control-zone oracle: piecewise-constant acceleration on a uniform grid,
//! one convex QP per horizon length, outer search over the integer number
//! of steps when the terminal time is free.

use std::collections::HashMap;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::{DiscreteTrajectory, GridSpec};
use crate::cz::{CzProblem, TerminalMode};
use crate::error::{Error, Result};
use crate::piecewise::{min_gap, Piece, PieceRepr};
use crate::trajectory::Cubic;

/// Coarse grid of step counts probed before the local refinement.
const COARSE_POINTS: usize = 24;

#[derive(Clone, Debug)]
pub struct CzOracle {
    pub cost: f64,
    pub tm: f64,
    /// Step actually used.
    pub h: f64,
    pub trajectory: DiscreteTrajectory,
    /// Exact minimum of `gap - δ` over the horizon, when a lead is present.
    pub min_gap: Option<f64>,
    /// `|p(tm) - L|` after exact re-integration.
    pub terminal_error: f64,
}

/// Shortest and longest times to cover `length` under the boxes.
fn reach_time(v0: f64, length: f64, u: f64, v_cap: f64) -> f64 {
    let d_sat = (v_cap * v_cap - v0 * v0) / (2.0 * u);
    if d_sat >= length {
        let disc = (v0 * v0 + 2.0 * u * length).max(0.0);
        (disc.sqrt() - v0) / u
    } else {
        (v_cap - v0) / u + (length - d_sat) / v_cap
    }
}

fn triplets_to_csc(rows: usize, cols: usize, mut trip: Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    trip.sort_by_key(|&(r, c, _)| (c, r));
    let mut colptr = vec![0usize; cols + 1];
    let mut rowval = Vec::with_capacity(trip.len());
    let mut nzval = Vec::with_capacity(trip.len());
    for &(r, c, v) in &trip {
        colptr[c + 1] += 1;
        rowval.push(r);
        nzval.push(v);
    }
    for c in 0..cols {
        colptr[c + 1] += colptr[c];
    }
    CscMatrix::new(rows, cols, colptr, rowval, nzval)
}

/// Exact integration of piecewise-constant controls from the entry state.
fn integrate(prob: &CzProblem, h: f64, u: &[f64]) -> DiscreteTrajectory {
    let n = u.len();
    let mut tr = DiscreteTrajectory {
        t: Vec::with_capacity(n + 1),
        p: Vec::with_capacity(n + 1),
        v: Vec::with_capacity(n + 1),
        u: u.to_vec(),
        jerk: Vec::new(),
    };
    let (mut p, mut v) = (0.0, prob.v0);
    for (k, &uk) in u.iter().enumerate() {
        tr.t.push(prob.t0 + k as f64 * h);
        tr.p.push(p);
        tr.v.push(v);
        p += v * h + 0.5 * uk * h * h;
        v += uk * h;
    }
    tr.t.push(prob.t0 + n as f64 * h);
    tr.p.push(p);
    tr.v.push(v);
    tr
}

fn pieces(tr: &DiscreteTrajectory) -> Vec<Piece> {
    (0..tr.u.len())
        .map(|k| Piece {
            t_start: tr.t[k],
            t_end: tr.t[k + 1],
            repr: PieceRepr::Poly(Cubic { t_ref: tr.t[k], a: 0.0, b: tr.u[k], c: tr.v[k], d: tr.p[k] }),
            offset: 0.0,
        })
        .collect()
}

/// Minimum control energy over `n` steps of length `h`; `None` if the QP is
/// infeasible.
fn solve_horizon(prob: &CzProblem, n: usize, h: f64) -> Option<Vec<f64>> {
    // x = [u_0..u_{n-1}, v_0..v_n, p_0..p_n]
    let (iu, iv, ip) = (0usize, n, 2 * n + 1);
    let nx = 3 * n + 2;
    let p_mat = triplets_to_csc(nx, nx, (0..n).map(|k| (k, k, h)).collect());
    let q = vec![0.0; nx];

    let mut trip = Vec::new();
    let mut b = Vec::new();
    let mut row = 0usize;
    let mut push = |entries: &[(usize, f64)], rhs: f64, trip: &mut Vec<(usize, usize, f64)>| {
        for &(c, v) in entries {
            trip.push((row, c, v));
        }
        b.push(rhs);
        row += 1;
    };
    push(&[(iv, 1.0)], prob.v0, &mut trip);
    push(&[(ip, 1.0)], 0.0, &mut trip);
    for k in 0..n {
        push(&[(iv + k + 1, 1.0), (iv + k, -1.0), (iu + k, -h)], 0.0, &mut trip);
        push(&[(ip + k + 1, 1.0), (ip + k, -1.0), (iv + k, -h), (iu + k, -0.5 * h * h)], 0.0, &mut trip);
    }
    push(&[(ip + n, 1.0)], prob.length, &mut trip);
    let n_eq = 2 * n + 3;

    for k in 0..n {
        push(&[(iu + k, 1.0)], prob.u_max, &mut trip);
        push(&[(iu + k, -1.0)], -prob.u_min, &mut trip);
    }
    for k in 1..=n {
        push(&[(iv + k, 1.0)], prob.v_max, &mut trip);
        push(&[(iv + k, -1.0)], -prob.v_min, &mut trip);
    }
    if let Some(lead) = &prob.lead {
        let states: Vec<_> = (0..=n).map(|k| lead.trajectory.state(prob.t0 + k as f64 * h)).collect();
        if states.iter().any(|s| s.is_err()) {
            return None;
        }
        let u_lead = states.iter().map(|s| s.as_ref().unwrap().u.abs()).fold(0.0f64, f64::max);
        // Bound on the dip of the gap between nodes.
        let margin = h * h / 8.0 * (prob.u_max - prob.u_min + u_lead) + 1e-9;
        for (k, s) in states.iter().enumerate().skip(1) {
            let s = s.as_ref().unwrap();
            push(&[(ip + k, 1.0)], s.p - prob.safe_distance - margin, &mut trip);
        }
    }
    let n_rows = row;
    let a_mat = triplets_to_csc(n_rows, nx, trip);
    let cones = [SupportedConeT::ZeroConeT(n_eq), SupportedConeT::NonnegativeConeT(n_rows - n_eq)];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(200)
        .tol_gap_abs(1e-10)
        .tol_gap_rel(1e-10)
        .tol_feas(1e-10)
        .build()
        .ok()?;
    let mut solver = DefaultSolver::new(&p_mat, &q, &a_mat, &b, &cones, settings).ok()?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Some(solver.solution.x[iu..iu + n].to_vec()),
        _ => None,
    }
}

/// Controls for `n` steps clipped into the boxes, re-integrated exactly.
fn evaluate(prob: &CzProblem, n: usize, h: f64) -> Option<(f64, DiscreteTrajectory)> {
    let u: Vec<f64> = solve_horizon(prob, n, h)?.into_iter().map(|u| u.clamp(prob.u_min, prob.u_max)).collect();
    let tr = integrate(prob, h, &u);
    let energy: f64 = u.iter().map(|u| 0.5 * u * u * h).sum();
    Some((prob.gamma * n as f64 * h + energy, tr))
}

fn finish(prob: &CzProblem, h: f64, cost: f64, tr: DiscreteTrajectory) -> CzOracle {
    let tm = *tr.t.last().unwrap();
    let terminal_error = (tr.p.last().unwrap() - prob.length).abs();
    let min_gap = prob.lead.as_ref().map(|lead| min_gap(&lead.trajectory, &pieces(&tr), prob.safe_distance, prob.t0, tm).1);
    CzOracle { cost, tm, h, trajectory: tr, min_gap, terminal_error }
}

/// Discrete optimum of `γ (tm - t0) + ½∫u²` over piecewise-constant
/// accelerations reaching `L` exactly.
pub fn brute_force_cz(prob: &CzProblem, grid: &GridSpec) -> Result<CzOracle> {
    prob.validate()?;
    grid.validate()?;
    let infeasible = || Error::Infeasible("no feasible discrete trajectory".into());
    if let TerminalMode::Fixed(tm) = prob.terminal {
        let dur = tm - prob.t0;
        let n = ((dur / grid.h).round() as usize).max(1);
        let h = dur / n as f64;
        let (cost, tr) = evaluate(prob, n, h).ok_or_else(infeasible)?;
        return Ok(finish(prob, h, cost, tr));
    }

    let fastest = reach_time(prob.v0, prob.length, prob.u_max, prob.v_max);
    let slowest = reach_time(prob.v0, prob.length, prob.u_min, prob.v_min);
    let (w_lo, w_hi) = grid.horizon.unwrap_or(prob.window);
    let t_lo = fastest.max(w_lo - prob.t0);
    let t_hi = slowest.min(w_hi - prob.t0);
    if !(t_lo <= t_hi) {
        return Err(Error::InfeasibleWindow { lower: t_lo + prob.t0, upper: t_hi + prob.t0 });
    }
    let n_lo = ((t_lo / grid.h).ceil() as usize).max(1);
    let n_hi = ((t_hi / grid.h).floor() as usize).max(n_lo);

    let mut memo: HashMap<usize, Option<(f64, DiscreteTrajectory)>> = HashMap::new();
    let mut cost_of = |n: usize| -> f64 {
        memo.entry(n).or_insert_with(|| evaluate(prob, n, grid.h)).as_ref().map_or(f64::INFINITY, |r| r.0)
    };

    let span = n_hi - n_lo;
    let coarse: Vec<usize> = if span < COARSE_POINTS {
        (n_lo..=n_hi).collect()
    } else {
        (0..COARSE_POINTS).map(|i| n_lo + (i * span) / (COARSE_POINTS - 1)).collect()
    };
    let costs: Vec<f64> = coarse.iter().map(|&n| cost_of(n)).collect();
    let best = (0..coarse.len()).min_by(|&a, &b| costs[a].total_cmp(&costs[b])).unwrap();
    if !costs[best].is_finite() {
        return Err(infeasible());
    }
    // Integer ternary search between the neighbours of the coarse optimum.
    let mut lo = coarse[best.saturating_sub(1)];
    let mut hi = coarse[(best + 1).min(coarse.len() - 1)];
    while hi - lo > 2 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        if cost_of(m1) <= cost_of(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let n_best = (lo..=hi).min_by(|&a, &b| cost_of(a).total_cmp(&cost_of(b))).unwrap();
    let n_best = if cost_of(n_best) <= costs[best] { n_best } else { coarse[best] };
    let (cost, tr) = memo.remove(&n_best).flatten().ok_or_else(infeasible)?;
    Ok(finish(prob, grid.h, cost, tr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cz::solve_cz;
    use crate::types::IntersectionConfig;

    fn p0() -> CzProblem {
        CzProblem::new(&IntersectionConfig::default(), 0.0, 10.0, 0.1)
    }

    #[test]
    fn matches_free_terminal_reference() {
        let prob = p0();
        let grid = GridSpec::new(0.05);
        let o = brute_force_cz(&prob, &grid).unwrap();
        let a = solve_cz(&prob).unwrap();
        assert!((o.tm - 32.03).abs() <= 2.0 * grid.h + 0.01, "tm {}", o.tm);
        assert!(o.cost >= a.cost * (1.0 - 1e-9));
        assert!((o.cost - a.cost) / a.cost < 0.01);
        assert!(o.terminal_error < 1e-6);
    }

    #[test]
    fn fixed_terminal_is_upper_bound() {
        let prob = p0().with_terminal(TerminalMode::Fixed(36.0));
        let o = brute_force_cz(&prob, &GridSpec::new(0.05)).unwrap();
        let a = solve_cz(&prob).unwrap();
        assert!(o.cost >= a.cost * (1.0 - 1e-9));
        assert!((o.cost - a.cost) / a.cost < 1e-3);
    }

    #[test]
    fn one_step_zone_costs_gamma_h() {
        let h = 0.05;
        let mut prob = p0();
        prob.length = h * prob.v0;
        let o = brute_force_cz(&prob, &GridSpec::new(h)).unwrap();
        assert!((o.cost - prob.gamma * h).abs() < 1e-9, "cost {}", o.cost);
    }

    #[test]
    fn reach_time_bounds() {
        assert!((reach_time(10.0, 400.0, 0.5, 15.0) - (10.0 + 275.0 / 15.0)).abs() < 1e-12);
        assert!((reach_time(10.0, 400.0, -0.5, 5.0) - (10.0 + 325.0 / 5.0)).abs() < 1e-12);
    }
}
