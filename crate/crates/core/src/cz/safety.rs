//! Rear-end constrained arcs: tangential entry onto `p_lead - δ` and an
//! optional exit back to an unconstrained cubic.
//!
//! Entry and exit subsystems are decoupled. Each is reduced to a scalar
//! equation in its junction time, the acceleration mismatch with the lead,
//! whose sign changes are bracketed and refined.

use super::arcs::{fixed_from_state, free_from_state};
use super::{gap_violated, polish, solve_unconstrained, CzCase, CzProblem, CzSolution, TerminalMode, GAP_TOL};
use crate::error::{Error, Result};
use crate::numerics::scan_roots;
use crate::piecewise::{min_gap, Piece, PieceRepr};
use crate::trajectory::{ArcKind, Cubic, CzArc, Lead, State};

const ROOT_EPS: f64 = 1e-15;
const SCAN_CELLS: usize = 800;

fn lead_of(prob: &CzProblem) -> Result<&Lead> {
    prob.lead.as_ref().ok_or_else(|| Error::CaseInapplicable("no vehicle ahead".into()))
}

fn lead_state(lead: &Lead, t: f64) -> State {
    lead.trajectory.state(t).unwrap_or(State { p: f64::NAN, v: f64::NAN, u: f64::NAN, jerk: f64::NAN })
}

fn cubic_x(prob: &CzProblem, x: &[f64]) -> Cubic {
    Cubic { t_ref: prob.t0, a: x[0], b: x[1], c: x[2], d: x[3] }
}

fn cubic_gap(prob: &CzProblem, lead: &Lead, c: Cubic, lo: f64, hi: f64) -> f64 {
    let piece = Piece { t_start: lo, t_end: hi, repr: PieceRepr::Poly(c), offset: 0.0 };
    min_gap(&lead.trajectory, &[piece], prob.safe_distance, lo, hi).1
}

/// Cubic from the entry state meeting `p_lead - δ` and `v_lead` at `tau`.
fn entry_cubic(prob: &CzProblem, lead: &Lead, tau: f64) -> Option<Cubic> {
    let s = prob.local(tau);
    if !(s > 0.0) {
        return None;
    }
    let ls = lead_state(lead, tau);
    let r1 = ls.p - prob.safe_distance - prob.v0 * s;
    let r2 = ls.v - prob.v0;
    let (m11, m12, m22) = (s.powi(3) / 6.0, s * s / 2.0, s);
    let det = m11 * m22 - m12 * m12;
    let a = (r1 * m22 - m12 * r2) / det;
    let b = (m11 * r2 - m12 * r1) / det;
    Some(Cubic { t_ref: prob.t0, a, b, c: prob.v0, d: 0.0 })
}

fn entry_resid(prob: &CzProblem, lead: &Lead, x: &[f64]) -> Vec<f64> {
    let c = cubic_x(prob, x);
    let st = c.state(x[4]);
    let ls = lead_state(lead, x[4]);
    vec![c.d, c.c - prob.v0, st.u - ls.u, st.p + prob.safe_distance - ls.p, st.v - ls.v]
}

struct Junction {
    tau: f64,
    cubic: Cubic,
    tm: f64,
    residual: f64,
}

/// Admissible tangential entries before `tau_hi`.
fn entries(prob: &CzProblem, lead: &Lead, tau_hi: f64) -> Vec<Junction> {
    let f = |tau: f64| match entry_cubic(prob, lead, tau) {
        Some(c) => c.state(tau).u - lead_state(lead, tau).u,
        None => f64::NAN,
    };
    let lo = prob.t0 + 1e-6 * (tau_hi - prob.t0);
    scan_roots(f, lo, tau_hi, SCAN_CELLS, ROOT_EPS)
        .into_iter()
        .filter_map(|tau| {
            let c = entry_cubic(prob, lead, tau)?;
            let (x, r) = polish(|x| entry_resid(prob, lead, x), vec![c.a, c.b, c.c, c.d, tau]);
            let (c, tau) = (cubic_x(prob, &x), x[4]);
            (tau > prob.t0 && cubic_gap(prob, lead, c, prob.t0, tau) >= -GAP_TOL)
                .then_some(Junction { tau, cubic: c, tm: f64::NAN, residual: r })
        })
        .collect()
}

fn exit_cubic(prob: &CzProblem, lead: &Lead, tau: f64, tm: Option<f64>) -> Option<(Cubic, f64)> {
    let ls = lead_state(lead, tau);
    let p = ls.p - prob.safe_distance;
    match tm {
        Some(t) => fixed_from_state(tau, p, ls.v, prob.length, t).map(|c| (c, t)),
        None => free_from_state(tau, p, ls.v, prob.length, prob.gamma),
    }
}

fn exit_resid(prob: &CzProblem, lead: &Lead, tm: Option<f64>, x: &[f64]) -> Vec<f64> {
    let c = cubic_x(prob, x);
    let st = c.state(x[4]);
    let ls = lead_state(lead, x[4]);
    let t_end = match tm {
        Some(t) => t,
        None => x[5],
    };
    let e = c.state(t_end);
    let mut r = vec![st.u - ls.u, st.p + prob.safe_distance - ls.p, st.v - ls.v, e.p - prob.length, e.u];
    if tm.is_none() {
        r.push(c.hamiltonian(prob.gamma));
    }
    r
}

/// Admissible exits from the constrained arc on `(tau_lo, tau_hi)`.
fn exits(prob: &CzProblem, lead: &Lead, tau_lo: f64, tau_hi: f64, tm: Option<f64>) -> Vec<Junction> {
    let f = |tau: f64| match exit_cubic(prob, lead, tau, tm) {
        Some((c, _)) => c.b - lead_state(lead, tau).u,
        None => f64::NAN,
    };
    scan_roots(f, tau_lo, tau_hi, SCAN_CELLS, ROOT_EPS)
        .into_iter()
        .filter_map(|tau| {
            let (c, t_end) = exit_cubic(prob, lead, tau, tm)?;
            let c = c.rebased(prob.t0);
            let mut x0 = vec![c.a, c.b, c.c, c.d, tau];
            if tm.is_none() {
                x0.push(t_end);
            }
            let (x, r) = polish(|x| exit_resid(prob, lead, tm, x), x0);
            let c = cubic_x(prob, &x);
            let t_end = tm.unwrap_or_else(|| x.get(5).copied().unwrap_or(t_end));
            let tau = x[4];
            (t_end > tau && cubic_gap(prob, lead, c, tau, t_end) >= -GAP_TOL)
                .then_some(Junction { tau, cubic: c, tm: t_end, residual: r })
        })
        .collect()
}

fn lead_clear_time(prob: &CzProblem, lead: &Lead) -> Result<f64> {
    lead.trajectory
        .time_at_position(prob.length + prob.safe_distance)
        .ok_or_else(|| Error::Infeasible("lead never clears the entry".into()))
}

fn follow(lead: &Lead, gap: f64, t_start: f64, t_end: f64) -> CzArc {
    CzArc { t_start, t_end, kind: ArcKind::FollowPredecessor { lead: lead.clone(), gap } }
}

fn min_cost(sols: Vec<CzSolution>) -> Option<CzSolution> {
    sols.into_iter().min_by(|a, b| a.cost.partial_cmp(&b.cost).unwrap())
}

/// Constrained arc entered tangentially and held until the terminal time,
/// which is when the lead is `δ` past the entry.
pub(super) fn no_exit(prob: &CzProblem) -> Result<CzSolution> {
    let lead = lead_of(prob)?;
    let tm = lead_clear_time(prob, lead)?;
    let sols: Vec<CzSolution> = entries(prob, lead, tm)
        .into_iter()
        .filter(|j| j.tau < tm)
        .map(|j| {
            let arcs = vec![
                CzArc { t_start: prob.t0, t_end: j.tau, kind: ArcKind::UnconstrainedCubic(j.cubic) },
                follow(lead, prob.safe_distance, j.tau, tm),
            ];
            CzSolution::new(prob, arcs, CzCase::SafetyNoExit, false, j.residual)
        })
        .collect();
    min_cost(sols).ok_or_else(|| Error::Infeasible("no tangential entry onto the constrained arc".into()))
}

/// Constrained arc entered at `τ1` and left at `τ2`. `tm = None` leaves the
/// terminal time free.
pub(super) fn with_exit(prob: &CzProblem, tm: Option<f64>) -> Result<CzSolution> {
    let lead = lead_of(prob)?;
    let t_clear = lead_clear_time(prob, lead)?;
    let limit = tm.map_or(t_clear, |t| t.min(t_clear));
    let ins = entries(prob, lead, limit);
    if ins.is_empty() {
        return Err(Error::Infeasible("no tangential entry onto the constrained arc".into()));
    }
    let tau_lo = ins[0].tau;
    let outs = exits(prob, lead, prob.t0 + 1e-6, limit * (1.0 - 1e-12), tm);
    if outs.is_empty() {
        return Err(Error::Infeasible("no exit from the constrained arc".into()));
    }
    let mut sols = Vec::new();
    for j1 in &ins {
        for j2 in outs.iter().filter(|j2| j2.tau > j1.tau) {
            let arcs = vec![
                CzArc { t_start: prob.t0, t_end: j1.tau, kind: ArcKind::UnconstrainedCubic(j1.cubic) },
                follow(lead, prob.safe_distance, j1.tau, j2.tau),
                CzArc { t_start: j2.tau, t_end: j2.tm, kind: ArcKind::UnconstrainedCubic(j2.cubic) },
            ];
            let res = j1.residual.max(j2.residual);
            sols.push(CzSolution::new(prob, arcs, CzCase::SafetyWithExit, tm.is_none(), res));
        }
    }
    min_cost(sols).ok_or_else(|| {
        Error::Infeasible(format!("exit from the constrained arc precedes the entry at {tau_lo}"))
    })
}

/// Constrained arc of zero length: the entry and exit cubics meet the lead's
/// shifted state at one instant with continuous acceleration. Needed when the
/// terminal time is later than any exit with `u = u_lead` allows.
pub(super) fn touch(prob: &CzProblem, tm: Option<f64>) -> Result<CzSolution> {
    let lead = lead_of(prob)?;
    let t_clear = lead_clear_time(prob, lead)?;
    let limit = tm.map_or(t_clear, |t| t.min(t_clear));
    let pair = |tau: f64| Some((entry_cubic(prob, lead, tau)?, exit_cubic(prob, lead, tau, tm)?));
    let f = |tau: f64| match pair(tau) {
        Some((c1, (c2, _))) => c1.state(tau).u - c2.b,
        None => f64::NAN,
    };
    let lo = prob.t0 + 1e-6 * (limit - prob.t0);
    let sols: Vec<CzSolution> = scan_roots(f, lo, limit * (1.0 - 1e-12), SCAN_CELLS, ROOT_EPS)
        .into_iter()
        .filter_map(|tau| {
            let (c1, (c2, t_end)) = pair(tau)?;
            let c2 = c2.rebased(prob.t0);
            if !(t_end > tau)
                || cubic_gap(prob, lead, c1, prob.t0, tau) < -GAP_TOL
                || cubic_gap(prob, lead, c2, tau, t_end) < -GAP_TOL
            {
                return None;
            }
            let (x, y, ls, e) = (c1.state(tau), c2.state(tau), lead_state(lead, tau), c2.state(t_end));
            let mut r = vec![x.u - y.u, x.p + prob.safe_distance - ls.p, x.v - ls.v, e.p - prob.length, e.u];
            if tm.is_none() {
                r.push(c2.hamiltonian(prob.gamma));
            }
            let res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let arcs = vec![
                CzArc { t_start: prob.t0, t_end: tau, kind: ArcKind::UnconstrainedCubic(c1) },
                CzArc { t_start: tau, t_end, kind: ArcKind::UnconstrainedCubic(c2) },
            ];
            Some(CzSolution::new(prob, arcs, CzCase::SafetyTouch, tm.is_none(), res))
        })
        .collect();
    min_cost(sols).ok_or_else(|| Error::Infeasible("no touch point on the rear-end constraint".into()))
}

fn require_violation(prob: &CzProblem) -> Result<()> {
    let reference = solve_unconstrained(prob)?;
    if gap_violated(prob, &reference) {
        Ok(())
    } else {
        Err(Error::CaseInapplicable("rear-end constraint never becomes active".into()))
    }
}

/// Rear-end constrained trajectory without an exit point.
pub fn solve_safety_no_exit(prob: &CzProblem) -> Result<CzSolution> {
    prob.validate()?;
    lead_of(prob)?;
    require_violation(prob)?;
    no_exit(prob)
}

/// Rear-end constrained trajectory with an exit point, respecting the
/// problem's terminal mode.
pub fn solve_safety_with_exit(prob: &CzProblem) -> Result<CzSolution> {
    prob.validate()?;
    lead_of(prob)?;
    require_violation(prob)?;
    match prob.terminal {
        TerminalMode::Free => with_exit(prob, None),
        TerminalMode::Fixed(t) => with_exit(prob, Some(t)),
    }
}
