//! Control-zone energy/time-optimal trajectories.
//!
//! Every case is reduced to a bracketed scalar root, then the full equation
//! system of the case is polished with damped Newton so the reported residual
//! refers to the original unknowns. Cubic arcs of one vehicle share the
//! reference time `t0`.

mod arcs;
mod safety;

use crate::error::{Error, Result};
use crate::numerics::newton;
use crate::piecewise::{kinematic_ranges, min_gap};
use crate::trajectory::{CzArc, CzTrajectory, Lead, State};
use crate::types::IntersectionConfig;

pub use arcs::{solve_fixed_terminal, solve_umax_arc, solve_umax_vmax, solve_unconstrained, solve_vmax_arc};
pub use safety::{solve_safety_no_exit, solve_safety_with_exit};

/// Box tolerance on speed and acceleration.
pub const BOX_TOL: f64 = 1e-7;
/// Tolerance on the rear-end gap (m).
pub const GAP_TOL: f64 = 1e-6;
/// Residual above which Newton polishing is attempted.
const POLISH_TOL: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TerminalMode {
    Free,
    Fixed(f64),
}

/// Single-vehicle control-zone problem.
#[derive(Clone, Debug)]
pub struct CzProblem {
    pub t0: f64,
    pub v0: f64,
    pub length: f64,
    pub gamma: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub safe_distance: f64,
    pub terminal: TerminalMode,
    /// Admissible `[lower, upper]` for the terminal time.
    pub window: (f64, f64),
    pub lead: Option<Lead>,
}

impl CzProblem {
    pub fn new(cfg: &IntersectionConfig, t0: f64, v0: f64, gamma: f64) -> Self {
        CzProblem {
            t0,
            v0,
            length: cfg.cz_length,
            gamma,
            v_min: cfg.v_min,
            v_max: cfg.v_max,
            u_min: cfg.u_min,
            u_max: cfg.u_max,
            safe_distance: cfg.safe_distance,
            terminal: TerminalMode::Free,
            window: (f64::NEG_INFINITY, f64::INFINITY),
            lead: None,
        }
    }

    pub fn with_terminal(mut self, mode: TerminalMode) -> Self {
        self.terminal = mode;
        self
    }

    pub fn with_window(mut self, lower: f64, upper: f64) -> Self {
        self.window = (lower, upper);
        self
    }

    pub fn with_lead(mut self, lead: Lead) -> Self {
        self.lead = Some(lead);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.t0, self.v0, self.length, self.gamma];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("problem data must be finite"));
        }
        if self.length <= 0.0 || self.gamma < 0.0 {
            return Err(Error::input("length must be positive and gamma non-negative"));
        }
        if !(self.v0 >= self.v_min && self.v0 <= self.v_max) {
            return Err(Error::input(format!("v0 = {} outside [{}, {}]", self.v0, self.v_min, self.v_max)));
        }
        if !(self.u_min < 0.0 && self.u_max > 0.0) {
            return Err(Error::input("acceleration box must straddle zero"));
        }
        if let TerminalMode::Fixed(tm) = self.terminal {
            if !(tm.is_finite() && tm > self.t0) {
                return Err(Error::Domain { t: tm, start: self.t0, end: f64::INFINITY });
            }
        }
        Ok(())
    }

    pub(crate) fn local(&self, t: f64) -> f64 {
        t - self.t0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CzCase {
    Unconstrained,
    UmaxArc,
    VmaxArc,
    UmaxVmax,
    SafetyNoExit,
    SafetyWithExit,
    /// Rear-end constraint active at a single instant.
    SafetyTouch,
}

impl CzCase {
    pub fn name(self) -> &'static str {
        match self {
            CzCase::Unconstrained => "unconstrained",
            CzCase::UmaxArc => "umax_arc",
            CzCase::VmaxArc => "vmax_arc",
            CzCase::UmaxVmax => "umax_vmax",
            CzCase::SafetyNoExit => "safety_no_exit",
            CzCase::SafetyWithExit => "safety_with_exit",
            CzCase::SafetyTouch => "safety_touch",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CzSolution {
    pub trajectory: CzTrajectory,
    pub case: CzCase,
    pub free_terminal: bool,
    /// Junction times between arcs, in order.
    pub switch_times: Vec<f64>,
    /// Max-norm residual of the case's equation system.
    pub residual: f64,
    pub cost: f64,
}

impl CzSolution {
    pub(crate) fn new(
        prob: &CzProblem,
        arcs: Vec<CzArc>,
        case: CzCase,
        free_terminal: bool,
        residual: f64,
    ) -> CzSolution {
        let tm = arcs.last().map(|a| a.t_end).unwrap_or(prob.t0);
        let switch_times = arcs.iter().take(arcs.len().saturating_sub(1)).map(|a| a.t_end).collect();
        let trajectory = CzTrajectory { t0: prob.t0, tm, arcs };
        let cost = trajectory.cost(prob.gamma);
        CzSolution { trajectory, case, free_terminal, switch_times, residual, cost }
    }

    pub fn tm(&self) -> f64 {
        self.trajectory.tm
    }

    pub fn terminal(&self) -> State {
        self.trajectory.terminal()
    }

    pub fn vm(&self) -> f64 {
        self.terminal().v
    }

    pub fn um(&self) -> f64 {
        self.terminal().u
    }
}

/// Newton polish of `x`; returns the improved point and its residual.
pub(crate) fn polish<F: Fn(&[f64]) -> Vec<f64>>(f: F, x: Vec<f64>) -> (Vec<f64>, f64) {
    let r0 = f(&x).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if r0 <= POLISH_TOL {
        return (x, r0);
    }
    let out = newton(&f, &x, 1e-13, 40);
    if out.residual < r0 {
        (out.x, out.residual)
    } else {
        (x, r0)
    }
}

/// Boxes, continuity and (when a lead exists) the rear-end gap.
pub fn check_solution(prob: &CzProblem, sol: &CzSolution) -> Result<()> {
    let tr = &sol.trajectory;
    let tol_p = 1e-6;
    let first = tr.state(tr.t0)?;
    if first.p.abs() > tol_p || (first.v - prob.v0).abs() > 1e-7 {
        return Err(Error::Infeasible(format!("initial state mismatch {first:?}")));
    }
    if (tr.terminal().p - prob.length).abs() > tol_p {
        return Err(Error::Infeasible(format!("terminal position {} != {}", tr.terminal().p, prob.length)));
    }
    for w in tr.arcs.windows(2) {
        let (x, y) = (w[0].state(w[0].t_end), w[1].state(w[1].t_start));
        if (x.p - y.p).abs() > tol_p || (x.v - y.v).abs() > 1e-7 {
            return Err(Error::Infeasible(format!("discontinuity at t = {}", w[0].t_end)));
        }
    }
    let ps = tr.pieces(tr.t0, tr.tm);
    let ((vlo, vhi), (ulo, uhi)) = kinematic_ranges(&ps, tr.t0, tr.tm);
    if vlo < prob.v_min - BOX_TOL || vhi > prob.v_max + BOX_TOL {
        return Err(Error::Unsupported(format!("speed range [{vlo}, {vhi}] leaves the box")));
    }
    if ulo < prob.u_min - BOX_TOL || uhi > prob.u_max + BOX_TOL {
        return Err(Error::Unsupported(format!("acceleration range [{ulo}, {uhi}] leaves the box")));
    }
    if let Some(lead) = &prob.lead {
        let (t, g) = min_gap(&lead.trajectory, &ps, prob.safe_distance, tr.t0, tr.tm);
        if g < -GAP_TOL {
            return Err(Error::Infeasible(format!("rear-end gap short by {} at t = {t}", -g)));
        }
    }
    Ok(())
}

fn gap_violated(prob: &CzProblem, sol: &CzSolution) -> bool {
    match &prob.lead {
        None => false,
        Some(lead) => {
            let tr = &sol.trajectory;
            let ps = tr.pieces(tr.t0, tr.tm);
            min_gap(&lead.trajectory, &ps, prob.safe_distance, tr.t0, tr.tm).1 < -GAP_TOL
        }
    }
}

fn solve_boxed(prob: &CzProblem, mode: TerminalMode) -> Result<CzSolution> {
    let p = prob.clone().with_terminal(mode);
    let base = solve_unconstrained(&p)?;
    let ps = base.trajectory.pieces(p.t0, base.tm());
    let ((vlo, vhi), (ulo, uhi)) = kinematic_ranges(&ps, p.t0, base.tm());
    if vlo < p.v_min - BOX_TOL || ulo < p.u_min - BOX_TOL {
        return Err(Error::Unsupported(format!(
            "deceleration bounds active (v_min {vlo:.4}, u_min {ulo:.4})"
        )));
    }
    let mut q = p.clone();
    q.lead = None;
    if uhi <= p.u_max + BOX_TOL && vhi <= p.v_max + BOX_TOL {
        check_solution(&q, &base)?;
        return Ok(base);
    }
    // Either violation can be cured by either single arc, so every box case
    // is tried and the cheapest admissible one kept.
    let mut last_err = Error::Unsupported("no box-constrained case is admissible".into());
    let mut best: Option<CzSolution> = None;
    for r in [solve_umax_arc(&p), solve_vmax_arc(&p), solve_umax_vmax(&p)] {
        match r.and_then(|s| check_solution(&q, &s).map(|_| s)) {
            Ok(s) if best.as_ref().is_none_or(|b| s.cost < b.cost) => best = Some(s),
            Ok(_) => {}
            Err(e) => last_err = e,
        }
    }
    best.ok_or(last_err)
}

/// Full case composition: terminal window, box constraints, then the
/// rear-end constraint against the lead.
pub fn solve_cz(prob: &CzProblem) -> Result<CzSolution> {
    prob.validate()?;
    let (mut lo, hi) = prob.window;
    let tm_star = match &prob.lead {
        Some(l) => Some(
            l.trajectory
                .time_at_position(prob.length + prob.safe_distance)
                .ok_or_else(|| Error::Infeasible("lead never clears the entry".into()))?,
        ),
        None => None,
    };
    if let Some(ts) = tm_star {
        lo = lo.max(ts);
    }
    // Scaled by the finite time magnitudes only; an open window has hi = ∞.
    let scale = [prob.t0, lo, hi].into_iter().filter(|x| x.is_finite()).fold(0.0f64, |m, x| m.max(x.abs()));
    let eps = 1e-9 * (1.0 + scale);
    if lo > hi + eps {
        return Err(Error::InfeasibleWindow { lower: lo, upper: hi });
    }
    let mode = match prob.terminal {
        TerminalMode::Fixed(t) => {
            if t < lo - eps || t > hi + eps {
                return Err(Error::InfeasibleWindow { lower: lo, upper: hi });
            }
            TerminalMode::Fixed(t)
        }
        TerminalMode::Free => TerminalMode::Free,
    };
    let boxed = match mode {
        TerminalMode::Fixed(_) => solve_boxed(prob, mode),
        TerminalMode::Free => solve_boxed(prob, mode).and_then(|s| {
            if s.tm() < lo {
                solve_boxed(prob, TerminalMode::Fixed(lo))
            } else if s.tm() > hi {
                solve_boxed(prob, TerminalMode::Fixed(hi))
            } else {
                Ok(s)
            }
        }),
    };
    let Some(ts) = tm_star else {
        return boxed;
    };
    if let Ok(s) = &boxed {
        if !gap_violated(prob, s) {
            return boxed;
        }
    }

    let mut candidates: Vec<CzSolution> = Vec::new();
    let push = |r: Result<CzSolution>, out: &mut Vec<CzSolution>| {
        if let Ok(s) = r {
            if s.tm() >= lo - eps && s.tm() <= hi + eps && check_solution(prob, &s).is_ok() {
                out.push(s);
            }
        }
    };
    match mode {
        TerminalMode::Fixed(t) => {
            if (t - ts).abs() <= eps {
                push(safety::no_exit(prob), &mut candidates);
            } else {
                push(safety::with_exit(prob, Some(t)), &mut candidates);
            }
            push(safety::touch(prob, Some(t)), &mut candidates);
        }
        TerminalMode::Free => {
            if lo <= ts + eps {
                push(safety::no_exit(prob), &mut candidates);
            }
            for f in [safety::with_exit, safety::touch] {
                match f(prob, None) {
                    Ok(s) if s.tm() < lo => push(f(prob, Some(lo)), &mut candidates),
                    Ok(s) if s.tm() > hi => push(f(prob, Some(hi)), &mut candidates),
                    r => push(r, &mut candidates),
                }
                // The optimum may sit on the lower bound even when the
                // unpinned root lies inside the window.
                push(f(prob, Some(lo)), &mut candidates);
            }
        }
    }
    if candidates.is_empty() && mode == TerminalMode::Free {
        // Deferral: later terminal times, each either unconstrained or with an
        // exit from the constrained arc. The earliest admissible one is kept.
        let n = 24;
        for k in 1..=n {
            let t = lo + (hi - lo) * k as f64 / n as f64;
            if t <= ts + eps {
                continue;
            }
            if let Ok(s) = solve_boxed(prob, TerminalMode::Fixed(t)) {
                if !gap_violated(prob, &s) {
                    push(Ok(s), &mut candidates);
                }
            }
            push(safety::with_exit(prob, Some(t)), &mut candidates);
            push(safety::touch(prob, Some(t)), &mut candidates);
            if !candidates.is_empty() {
                break;
            }
        }
    }
    candidates
        .into_iter()
        .min_by(|a, b| a.cost.partial_cmp(&b.cost).unwrap())
        .ok_or_else(|| match boxed {
            Err(e @ Error::Unsupported(_)) => e,
            _ => Error::Infeasible("no admissible rear-end constrained trajectory".into()),
        })
}
