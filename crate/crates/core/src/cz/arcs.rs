//! Unconstrained, fixed-terminal and box-saturated control-zone arcs.

use nalgebra::{Matrix4, Vector4};

use super::{polish, CzCase, CzProblem, CzSolution, TerminalMode};
use crate::error::{Error, Result};
use crate::numerics::{brent, scan_roots};
use crate::trajectory::{ArcKind, Cubic, CzArc};

const ROOT_EPS: f64 = 1e-15;
const SCAN_CELLS: usize = 400;

fn cubic_x(prob: &CzProblem, x: &[f64]) -> Cubic {
    Cubic { t_ref: prob.t0, a: x[0], b: x[1], c: x[2], d: x[3] }
}

/// Free-terminal cubic from state `(p_s, v_s)` at `t_s` that reaches
/// `length` with zero acceleration and zero Hamiltonian. Returns the cubic
/// (referenced at `t_s`) and its terminal time.
pub(crate) fn free_from_state(t_s: f64, p_s: f64, v_s: f64, length: f64, gamma: f64) -> Option<(Cubic, f64)> {
    let r = length - p_s;
    if !(r > 0.0) {
        return None;
    }
    if gamma == 0.0 {
        if v_s <= 0.0 {
            return None;
        }
        let t = r / v_s;
        return Some((Cubic { t_ref: t_s, a: 0.0, b: 0.0, c: v_s, d: p_s }, t_s + t));
    }
    // γT⁴ - 3 v D T - 4.5 D² = 0 with D = R - vT; increasing while D >= 0.
    let g = |t: f64| {
        let d = r - v_s * t;
        gamma * t.powi(4) - 3.0 * v_s * d * t - 4.5 * d * d
    };
    let mut hi = if v_s > 0.0 { r / v_s } else { (4.5 * r * r / gamma).powf(0.25) };
    while g(hi) < 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return None;
        }
    }
    let t = brent(g, 0.0, hi, ROOT_EPS)?;
    let d = r - v_s * t;
    let a = -3.0 * d / t.powi(3);
    Some((Cubic { t_ref: t_s, a, b: -a * t, c: v_s, d: p_s }, t_s + t))
}

/// Cubic from `(p_s, v_s)` at `t_s` reaching `length` at `tm` with zero
/// terminal acceleration.
pub(crate) fn fixed_from_state(t_s: f64, p_s: f64, v_s: f64, length: f64, tm: f64) -> Option<Cubic> {
    let t = tm - t_s;
    if !(t > 0.0) {
        return None;
    }
    let a = 3.0 * (v_s * t - (length - p_s)) / t.powi(3);
    Some(Cubic { t_ref: t_s, a, b: -a * t, c: v_s, d: p_s })
}

/// Optimal trajectory without active state or control constraints.
pub fn solve_unconstrained(prob: &CzProblem) -> Result<CzSolution> {
    prob.validate()?;
    match prob.terminal {
        TerminalMode::Fixed(tm) => solve_fixed_terminal(prob, tm),
        TerminalMode::Free => {
            let (c, tm) = free_from_state(prob.t0, 0.0, prob.v0, prob.length, prob.gamma)
                .ok_or_else(|| Error::NonConvergence { what: "terminal-time root".into(), residual: f64::NAN })?;
            let resid = |x: &[f64]| {
                let c = cubic_x(prob, x);
                let e = c.state(x[4]);
                vec![c.d, c.c - prob.v0, e.p - prob.length, e.u, c.hamiltonian(prob.gamma)]
            };
            let (x, r) = polish(resid, vec![c.a, c.b, c.c, c.d, tm]);
            let arc = CzArc { t_start: prob.t0, t_end: x[4], kind: ArcKind::UnconstrainedCubic(cubic_x(prob, &x)) };
            Ok(CzSolution::new(prob, vec![arc], CzCase::Unconstrained, true, r))
        }
    }
}

/// Fixed-terminal arc from the 4×4 boundary-condition system.
pub fn solve_fixed_terminal(prob: &CzProblem, tm: f64) -> Result<CzSolution> {
    let t = prob.local(tm);
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain { t: tm, start: prob.t0, end: f64::INFINITY });
    }
    #[rustfmt::skip]
    let m = Matrix4::new(
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, 1.0, 0.0,
        t.powi(3) / 6.0, t * t / 2.0, t, 1.0,
        t, 1.0, 0.0, 0.0,
    );
    let rhs = Vector4::new(0.0, prob.v0, prob.length, 0.0);
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or(Error::Domain { t: tm, start: prob.t0, end: f64::INFINITY })?;
    let resid = |x: &[f64]| {
        let c = cubic_x(prob, x);
        let e = c.state(tm);
        vec![c.d, c.c - prob.v0, e.p - prob.length, e.u]
    };
    let (x, r) = polish(resid, sol.iter().copied().collect());
    let arc = CzArc { t_start: prob.t0, t_end: tm, kind: ArcKind::UnconstrainedCubic(cubic_x(prob, &x)) };
    Ok(CzSolution::new(prob, vec![arc], CzCase::Unconstrained, false, r))
}

fn saturated(prob: &CzProblem, s: f64) -> (f64, f64) {
    let u = prob.u_max;
    (prob.v0 * s + 0.5 * u * s * s, prob.v0 + u * s)
}

/// Saturated `u_max` arc from `t0` followed by an unconstrained cubic.
pub fn solve_umax_arc(prob: &CzProblem) -> Result<CzSolution> {
    prob.validate()?;
    let (um, v0, l) = (prob.u_max, prob.v0, prob.length);
    let s_l = ((v0 * v0 + 2.0 * um * l).sqrt() - v0) / um;
    let inapplicable = || Error::CaseInapplicable("u_max is not active at entry".into());
    let (x, r, tm, free) = match prob.terminal {
        TerminalMode::Free => {
            let f = |s: f64| {
                let (p1, v1) = saturated(prob, s);
                free_from_state(prob.t0 + s, p1, v1, l, prob.gamma).map(|(c, _)| c.b - um).unwrap_or(f64::NAN)
            };
            let s = *scan_roots(f, 0.0, s_l * (1.0 - 1e-12), SCAN_CELLS, ROOT_EPS).first().ok_or_else(inapplicable)?;
            let tau = prob.t0 + s;
            let (p1, v1) = saturated(prob, s);
            let (c, tm) = free_from_state(tau, p1, v1, l, prob.gamma).ok_or_else(inapplicable)?;
            let c = c.rebased(prob.t0);
            let resid = |x: &[f64]| {
                let c = cubic_x(prob, x);
                let (ps, vs) = saturated(prob, prob.local(x[4]));
                let a = c.state(x[4]);
                let e = c.state(x[5]);
                vec![ps - a.p, vs - a.v, a.u - um, e.p - l, e.u, c.hamiltonian(prob.gamma)]
            };
            let (x, r) = polish(resid, vec![c.a, c.b, c.c, c.d, tau, tm]);
            let tm = x[5];
            (x, r, tm, true)
        }
        TerminalMode::Fixed(tm) => {
            let hi = s_l.min(prob.local(tm));
            let f = |s: f64| {
                let (p1, v1) = saturated(prob, s);
                fixed_from_state(prob.t0 + s, p1, v1, l, tm).map(|c| c.b - um).unwrap_or(f64::NAN)
            };
            let s = *scan_roots(f, 0.0, hi * (1.0 - 1e-12), SCAN_CELLS, ROOT_EPS).first().ok_or_else(inapplicable)?;
            let tau = prob.t0 + s;
            let (p1, v1) = saturated(prob, s);
            let c = fixed_from_state(tau, p1, v1, l, tm).ok_or_else(inapplicable)?.rebased(prob.t0);
            let resid = |x: &[f64]| {
                let c = cubic_x(prob, x);
                let (ps, vs) = saturated(prob, prob.local(x[4]));
                let a = c.state(x[4]);
                let e = c.state(tm);
                vec![ps - a.p, vs - a.v, a.u - um, e.p - l, e.u]
            };
            let (x, r) = polish(resid, vec![c.a, c.b, c.c, c.d, tau]);
            (x, r, tm, false)
        }
    };
    let tau = x[4];
    let arcs = vec![
        CzArc { t_start: prob.t0, t_end: tau, kind: ArcKind::SaturateUmax { p_start: 0.0, v_start: v0, u: um } },
        CzArc { t_start: tau, t_end: tm, kind: ArcKind::UnconstrainedCubic(cubic_x(prob, &x)) },
    ];
    Ok(CzSolution::new(prob, arcs, CzCase::UmaxArc, free, r))
}

/// Unconstrained cubic from `t0` followed by cruising at `v_max`.
pub fn solve_vmax_arc(prob: &CzProblem) -> Result<CzSolution> {
    prob.validate()?;
    let (vx, v0, l) = (prob.v_max, prob.v0, prob.length);
    if v0 >= vx - 1e-12 {
        let tm = prob.t0 + l / vx;
        let (tm, free) = match prob.terminal {
            TerminalMode::Free => (tm, true),
            TerminalMode::Fixed(t) if (t - tm).abs() < 1e-9 => (t, false),
            TerminalMode::Fixed(_) => {
                return Err(Error::Unsupported("fixed terminal time incompatible with entry at v_max".into()))
            }
        };
        let arcs = vec![CzArc { t_start: prob.t0, t_end: tm, kind: ArcKind::CruiseVmax { p_start: 0.0, v: vx } }];
        return Ok(CzSolution::new(prob, arcs, CzCase::VmaxArc, free, 0.0));
    }
    let inapplicable = || Error::CaseInapplicable("v_max is not reached".into());
    let (x, r, tm, free) = match prob.terminal {
        TerminalMode::Free => {
            if prob.gamma <= 0.0 {
                return Err(inapplicable());
            }
            let a = -prob.gamma / vx;
            let s = (2.0 * (vx - v0) / -a).sqrt();
            let c = Cubic { t_ref: prob.t0, a, b: -a * s, c: v0, d: 0.0 };
            let tau = prob.t0 + s;
            let pt = c.state(tau).p;
            if pt > l {
                return Err(inapplicable());
            }
            let tm = tau + (l - pt) / vx;
            let resid = |x: &[f64]| {
                let c = cubic_x(prob, x);
                let a = c.state(x[4]);
                vec![c.d, c.c - v0, a.p + vx * (x[5] - x[4]) - l, a.v - vx, a.u, prob.gamma + c.a * vx]
            };
            let (x, r) = polish(resid, vec![c.a, c.b, c.c, c.d, tau, tm]);
            let tm = x[5];
            (x, r, tm, true)
        }
        TerminalMode::Fixed(tm) => {
            let t = prob.local(tm);
            let s = 3.0 * (vx * t - l) / (vx - v0);
            if !(s > 0.0 && s <= t) {
                return Err(inapplicable());
            }
            let a = -2.0 * (vx - v0) / (s * s);
            let c = Cubic { t_ref: prob.t0, a, b: -a * s, c: v0, d: 0.0 };
            let resid = |x: &[f64]| {
                let c = cubic_x(prob, x);
                let a = c.state(x[4]);
                vec![c.d, c.c - v0, a.p + vx * (tm - x[4]) - l, a.v - vx, a.u]
            };
            let (x, r) = polish(resid, vec![c.a, c.b, c.c, c.d, prob.t0 + s]);
            (x, r, tm, false)
        }
    };
    let tau = x[4];
    let c = cubic_x(prob, &x);
    let arcs = vec![
        CzArc { t_start: prob.t0, t_end: tau, kind: ArcKind::UnconstrainedCubic(c) },
        CzArc { t_start: tau, t_end: tm, kind: ArcKind::CruiseVmax { p_start: c.state(tau).p, v: vx } },
    ];
    Ok(CzSolution::new(prob, arcs, CzCase::VmaxArc, free, r))
}

/// `u_max` arc, unconstrained cubic, then `v_max` cruise.
pub fn solve_umax_vmax(prob: &CzProblem) -> Result<CzSolution> {
    prob.validate()?;
    let (um, vx, v0, l) = (prob.u_max, prob.v_max, prob.v0, prob.length);
    let inapplicable = || Error::CaseInapplicable("composite u_max / v_max arcs do not apply".into());
    // Cubic from τ1 with u(τ1) = u_max decreasing linearly to zero over `dur`.
    let build = |s1: f64, dur: f64| {
        let (p1, v1) = saturated(prob, s1);
        Cubic { t_ref: prob.t0 + s1, a: -um / dur, b: um, c: v1, d: p1 }
    };
    let resid_core = |x: &[f64]| {
        let c = cubic_x(prob, x);
        let (ps, vs) = saturated(prob, prob.local(x[4]));
        let a = c.state(x[4]);
        let b = c.state(x[5]);
        vec![ps - a.p, vs - a.v, a.u - um, b.v - vx, b.u]
    };
    let (x, r, tm, free) = match prob.terminal {
        TerminalMode::Free => {
            if prob.gamma <= 0.0 {
                return Err(inapplicable());
            }
            let dur = um * vx / prob.gamma;
            let v1 = vx - 0.5 * um * dur;
            let s1 = (v1 - v0) / um;
            if !(s1 > 0.0) {
                return Err(inapplicable());
            }
            let c = build(s1, dur);
            let (tau1, tau2) = (prob.t0 + s1, prob.t0 + s1 + dur);
            let p2 = c.state(tau2).p;
            if p2 > l {
                return Err(inapplicable());
            }
            let tm = tau2 + (l - p2) / vx;
            let c = c.rebased(prob.t0);
            let resid = |x: &[f64]| {
                let mut r = resid_core(x);
                let c = cubic_x(prob, x);
                r.push(c.state(x[5]).p + vx * (x[6] - x[5]) - l);
                r.push(prob.gamma + c.a * vx);
                r
            };
            let (x, r) = polish(resid, vec![c.a, c.b, c.c, c.d, tau1, tau2, tm]);
            let tm = x[6];
            (x, r, tm, true)
        }
        TerminalMode::Fixed(tm) => {
            let t = prob.local(tm);
            let end_gap = |s1: f64| {
                let (p1, v1) = saturated(prob, s1);
                let dur = 2.0 * (vx - v1) / um;
                if s1 + dur > t {
                    return f64::NAN;
                }
                p1 + v1 * dur + um * dur * dur / 3.0 + vx * (t - s1 - dur) - l
            };
            let s_hi = ((vx - v0) / um).min(t);
            let s1 = *scan_roots(end_gap, 0.0, s_hi * (1.0 - 1e-12), SCAN_CELLS, ROOT_EPS)
                .first()
                .ok_or_else(inapplicable)?;
            let (_, v1) = saturated(prob, s1);
            let dur = 2.0 * (vx - v1) / um;
            let c = build(s1, dur).rebased(prob.t0);
            let resid = |x: &[f64]| {
                let mut r = resid_core(x);
                r.push(cubic_x(prob, x).state(x[5]).p + vx * (tm - x[5]) - l);
                r
            };
            let (x, r) = polish(resid, vec![c.a, c.b, c.c, c.d, prob.t0 + s1, prob.t0 + s1 + dur]);
            (x, r, tm, false)
        }
    };
    let (tau1, tau2) = (x[4], x[5]);
    let c = cubic_x(prob, &x);
    let arcs = vec![
        CzArc { t_start: prob.t0, t_end: tau1, kind: ArcKind::SaturateUmax { p_start: 0.0, v_start: v0, u: um } },
        CzArc { t_start: tau1, t_end: tau2, kind: ArcKind::UnconstrainedCubic(c) },
        CzArc { t_start: tau2, t_end: tm, kind: ArcKind::CruiseVmax { p_start: c.state(tau2).p, v: vx } },
    ];
    Ok(CzSolution::new(prob, arcs, CzCase::UmaxVmax, free, r))
}
