//! Exact extrema over piecewise trajectories.
//!
//! Polynomial pieces use closed-form stationary points. Pieces that involve
//! the merging-zone exponentials use a bracketed one-dimensional search.

use crate::numerics::scan_min;
use crate::trajectory::{ArcKind, Cubic, CzArc, CzTrajectory, MzTrajectory, State, VehicleTrajectory};

#[derive(Clone, Copy, Debug)]
pub enum PieceRepr {
    Poly(Cubic),
    Mz(MzTrajectory),
}

/// One smooth piece; position is `repr.p - offset`.
#[derive(Clone, Copy, Debug)]
pub struct Piece {
    pub t_start: f64,
    pub t_end: f64,
    pub repr: PieceRepr,
    pub offset: f64,
}

impl Piece {
    pub fn state(&self, t: f64) -> State {
        let mut s = match &self.repr {
            PieceRepr::Poly(c) => c.state(t),
            PieceRepr::Mz(m) => m.state_local(t - m.tm),
        };
        s.p -= self.offset;
        s
    }
}

fn clip(pieces: Vec<Piece>, lo: f64, hi: f64) -> Vec<Piece> {
    pieces
        .into_iter()
        .filter_map(|mut p| {
            p.t_start = p.t_start.max(lo);
            p.t_end = p.t_end.min(hi);
            (p.t_end > p.t_start).then_some(p)
        })
        .collect()
}

fn poly(t_ref: f64, p: f64, v: f64, u: f64) -> PieceRepr {
    PieceRepr::Poly(Cubic { t_ref, a: 0.0, b: u, c: v, d: p })
}

impl CzArc {
    pub fn pieces(&self, lo: f64, hi: f64) -> Vec<Piece> {
        let (a, b) = (lo.max(self.t_start), hi.min(self.t_end));
        if b <= a {
            return Vec::new();
        }
        let single = |repr| vec![Piece { t_start: a, t_end: b, repr, offset: 0.0 }];
        match &self.kind {
            ArcKind::UnconstrainedCubic(c) => single(PieceRepr::Poly(*c)),
            ArcKind::CruiseVmax { p_start, v } | ArcKind::CruiseVmin { p_start, v } => {
                single(poly(self.t_start, *p_start, *v, 0.0))
            }
            ArcKind::SaturateUmax { p_start, v_start, u } | ArcKind::SaturateUmin { p_start, v_start, u } => {
                single(poly(self.t_start, *p_start, *v_start, *u))
            }
            ArcKind::FollowPredecessor { lead, gap } => {
                let mut ps = lead.trajectory.pieces(a, b);
                for p in &mut ps {
                    p.offset += gap;
                }
                ps
            }
        }
    }
}

impl CzTrajectory {
    pub fn pieces(&self, lo: f64, hi: f64) -> Vec<Piece> {
        self.arcs.iter().flat_map(|a| a.pieces(lo, hi)).collect()
    }
}

impl VehicleTrajectory {
    /// Smooth pieces covering `[lo, hi] ∩ [t0, ∞)`.
    pub fn pieces(&self, lo: f64, hi: f64) -> Vec<Piece> {
        let mut out = self.cz.pieces(lo, hi);
        let mut te = self.cz.tm;
        if let Some(m) = &self.mz {
            out.extend(clip(
                vec![Piece { t_start: m.tm, t_end: m.tf, repr: PieceRepr::Mz(*m), offset: 0.0 }],
                lo,
                hi,
            ));
            te = m.tf;
        }
        if hi > te {
            let x = self.state(te).unwrap_or_default();
            out.extend(clip(
                vec![Piece { t_start: te, t_end: f64::INFINITY, repr: poly(te, x.p, x.v, 0.0), offset: 0.0 }],
                lo,
                hi,
            ));
        }
        out
    }
}

fn breakpoints(a: &[Piece], b: &[Piece], lo: f64, hi: f64) -> Vec<f64> {
    let mut ts: Vec<f64> = vec![lo, hi];
    for p in a.iter().chain(b) {
        ts.push(p.t_start);
        ts.push(p.t_end);
    }
    ts.retain(|t| *t >= lo && *t <= hi);
    ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    ts
}

fn piece_at(ps: &[Piece], t: f64) -> Option<&Piece> {
    ps.iter().find(|p| t >= p.t_start - 1e-12 && t <= p.t_end + 1e-12)
}

/// Real roots of `q2 x² + q1 x + q0` inside `(lo, hi)`.
fn quadratic_roots_in(q2: f64, q1: f64, q0: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut r = Vec::new();
    let scale = q2.abs().max(q1.abs()).max(q0.abs());
    if scale == 0.0 {
        return r;
    }
    if q2.abs() <= 1e-14 * scale {
        if q1 != 0.0 {
            r.push(-q0 / q1);
        }
    } else {
        let disc = q1 * q1 - 4.0 * q2 * q0;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let qq = -0.5 * (q1 + q1.signum() * sq);
            if qq != 0.0 {
                r.push(qq / q2);
                r.push(q0 / qq);
            } else {
                r.push(0.0);
            }
        }
    }
    r.retain(|x| *x > lo && *x < hi);
    r
}

/// `(argmin, min)` of `p_a(t) - p_b(t)` over `[lo, hi]`.
pub fn min_position_difference(a: &[Piece], b: &[Piece], lo: f64, hi: f64) -> (f64, f64) {
    let ts = breakpoints(a, b, lo, hi);
    let mut best = (lo, f64::INFINITY);
    let mut consider = |t: f64, v: f64| {
        if v < best.1 {
            best = (t, v);
        }
    };
    for w in ts.windows(2) {
        let (t1, t2) = (w[0], w[1]);
        let mid = 0.5 * (t1 + t2);
        let (Some(pa), Some(pb)) = (piece_at(a, mid), piece_at(b, mid)) else {
            continue;
        };
        let diff = |t: f64| pa.state(t).p - pb.state(t).p;
        consider(t1, diff(t1));
        consider(t2, diff(t2));
        match (&pa.repr, &pb.repr) {
            (PieceRepr::Poly(ca), PieceRepr::Poly(cb)) => {
                // Stationary points of the difference: v_a - v_b = 0, shifted to t1.
                let (za, zb) = (ca.rebased(t1), cb.rebased(t1));
                let q2 = 0.5 * (za.a - zb.a);
                let q1 = za.b - zb.b;
                let q0 = za.c - zb.c;
                for s in quadratic_roots_in(q2, q1, q0, 0.0, t2 - t1) {
                    consider(t1 + s, diff(t1 + s));
                }
            }
            _ => {
                let (t, v) = scan_min(diff, t1, t2, 64, 1e-11);
                consider(t, v);
            }
        }
    }
    best
}

pub fn min_gap(lead: &VehicleTrajectory, own: &[Piece], delta: f64, lo: f64, hi: f64) -> (f64, f64) {
    let lp = lead.pieces(lo, hi);
    let (t, d) = min_position_difference(&lp, own, lo, hi);
    (t, d - delta)
}

/// `(min, max)` of speed and of acceleration over `[lo, hi]`.
pub fn kinematic_ranges(ps: &[Piece], lo: f64, hi: f64) -> ((f64, f64), (f64, f64)) {
    let mut v = (f64::INFINITY, f64::NEG_INFINITY);
    let mut u = v;
    let mut add = |st: State| {
        v = (v.0.min(st.v), v.1.max(st.v));
        u = (u.0.min(st.u), u.1.max(st.u));
    };
    for p in ps {
        let (t1, t2) = (p.t_start.max(lo), p.t_end.min(hi));
        if t2 < t1 {
            continue;
        }
        add(p.state(t1));
        add(p.state(t2));
        match &p.repr {
            PieceRepr::Poly(c) => {
                if c.a != 0.0 {
                    let t = c.t_ref - c.b / c.a;
                    if t > t1 && t < t2 {
                        add(p.state(t));
                    }
                }
            }
            PieceRepr::Mz(_) => {
                for sign in [1.0, -1.0] {
                    let (t, _) = scan_min(|t| sign * p.state(t).v, t1, t2, 64, 1e-11);
                    add(p.state(t));
                    let (t, _) = scan_min(|t| sign * p.state(t).u, t1, t2, 64, 1e-11);
                    add(p.state(t));
                }
            }
        }
    }
    (v, u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_difference_minimum_is_exact() {
        let a = Piece {
            t_start: 0.0,
            t_end: 10.0,
            repr: PieceRepr::Poly(Cubic { t_ref: 0.0, a: 0.0, b: 0.0, c: 10.0, d: 30.0 }),
            offset: 0.0,
        };
        let b = Piece {
            t_start: 0.0,
            t_end: 10.0,
            repr: PieceRepr::Poly(Cubic { t_ref: 0.0, a: 0.0, b: 1.0, c: 5.0, d: 0.0 }),
            offset: 0.0,
        };
        // d(t) = 30 + 5t - t²/2 peaks inside; the minimum sits on the ends.
        let (_, m) = min_position_difference(&[a], &[b], 0.0, 10.0);
        assert!((m - 30.0).abs() < 1e-12);
        // Interior minimum: d(t) = 30 - 5t + t²/2 at t = 5.
        let b2 = Piece {
            repr: PieceRepr::Poly(Cubic { t_ref: 0.0, a: 0.0, b: -1.0, c: 15.0, d: 0.0 }),
            ..b
        };
        let (t, m) = min_position_difference(&[a], &[b2], 0.0, 10.0);
        assert!((t - 5.0).abs() < 1e-12 && (m - 17.5).abs() < 1e-12);
    }
}
