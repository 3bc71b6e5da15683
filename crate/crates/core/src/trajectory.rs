//! Piecewise trajectories and their evaluation.
//!
//! A vehicle's full path trajectory is its control-zone arcs, then the
//! merging-zone solution, then constant exit speed forever. Without a
//! merging-zone solution the control-zone terminal speed is held instead.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::types::VehicleId;

/// Position, speed, acceleration and jerk at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct State {
    pub p: f64,
    pub v: f64,
    pub u: f64,
    pub jerk: f64,
}

/// Cubic position profile stored relative to `t_ref`:
/// `p = a s³/6 + b s²/2 + c s + d` with `s = t - t_ref`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cubic {
    pub t_ref: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Cubic {
    pub fn state(&self, t: f64) -> State {
        let s = t - self.t_ref;
        State {
            p: ((self.a * s / 6.0 + self.b / 2.0) * s + self.c) * s + self.d,
            v: (self.a * s / 2.0 + self.b) * s + self.c,
            u: self.a * s + self.b,
            jerk: self.a,
        }
    }

    /// Coefficients `[a, b, c, d]` of the same profile in absolute time.
    pub fn absolute(&self) -> [f64; 4] {
        let t0 = self.t_ref;
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        [
            a,
            b - a * t0,
            c - b * t0 + a * t0 * t0 / 2.0,
            d - c * t0 + b * t0 * t0 / 2.0 - a * t0 * t0 * t0 / 6.0,
        ]
    }

    /// Same profile re-expressed around another reference time.
    pub fn rebased(&self, t_ref: f64) -> Cubic {
        let st = self.state(t_ref);
        Cubic { t_ref, a: self.a, b: st.u, c: st.v, d: st.p }
    }

    /// `γ - u²/2 + a v`, constant along the profile.
    pub fn hamiltonian(&self, gamma: f64) -> f64 {
        gamma - 0.5 * self.b * self.b + self.a * self.c
    }

    /// Exact `∫ u² dt` over `[t1, t2]`.
    pub fn control_energy(&self, t1: f64, t2: f64) -> f64 {
        let (s1, s2) = (t1 - self.t_ref, t2 - self.t_ref);
        let f = |s: f64| {
            let u = self.a * s + self.b;
            if self.a == 0.0 {
                self.b * self.b * s
            } else {
                u * u * u / (3.0 * self.a)
            }
        };
        f(s2) - f(s1)
    }
}

/// Reference to the vehicle physically ahead, evaluated lazily.
#[derive(Clone, Debug)]
pub struct Lead {
    pub id: VehicleId,
    pub trajectory: Arc<VehicleTrajectory>,
}

#[derive(Clone, Debug)]
pub enum ArcKind {
    UnconstrainedCubic(Cubic),
    /// `p = p_lead - gap`.
    FollowPredecessor { lead: Lead, gap: f64 },
    CruiseVmax { p_start: f64, v: f64 },
    CruiseVmin { p_start: f64, v: f64 },
    SaturateUmax { p_start: f64, v_start: f64, u: f64 },
    SaturateUmin { p_start: f64, v_start: f64, u: f64 },
}

impl ArcKind {
    pub fn name(&self) -> &'static str {
        match self {
            ArcKind::UnconstrainedCubic(_) => "unconstrained_cubic",
            ArcKind::FollowPredecessor { .. } => "follow_predecessor",
            ArcKind::CruiseVmax { .. } => "cruise_vmax",
            ArcKind::CruiseVmin { .. } => "cruise_vmin",
            ArcKind::SaturateUmax { .. } => "saturate_umax",
            ArcKind::SaturateUmin { .. } => "saturate_umin",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CzArc {
    pub t_start: f64,
    pub t_end: f64,
    pub kind: ArcKind,
}

impl CzArc {
    pub fn state(&self, t: f64) -> State {
        let s = t - self.t_start;
        match &self.kind {
            ArcKind::UnconstrainedCubic(c) => c.state(t),
            ArcKind::FollowPredecessor { lead, gap } => {
                // The lead is defined for all t past its own entry.
                let mut st = lead.trajectory.state(t).unwrap_or_default();
                st.p -= gap;
                st
            }
            ArcKind::CruiseVmax { p_start, v } | ArcKind::CruiseVmin { p_start, v } => {
                State { p: p_start + v * s, v: *v, u: 0.0, jerk: 0.0 }
            }
            ArcKind::SaturateUmax { p_start, v_start, u }
            | ArcKind::SaturateUmin { p_start, v_start, u } => State {
                p: p_start + v_start * s + 0.5 * u * s * s,
                v: v_start + u * s,
                u: *u,
                jerk: 0.0,
            },
        }
    }

    /// Exact `∫ u² dt` over `[t1, t2] ⊆ [t_start, t_end]`.
    pub fn control_energy(&self, t1: f64, t2: f64) -> f64 {
        match &self.kind {
            ArcKind::UnconstrainedCubic(c) => c.control_energy(t1, t2),
            ArcKind::FollowPredecessor { lead, .. } => lead.trajectory.control_energy(t1, t2),
            ArcKind::CruiseVmax { .. } | ArcKind::CruiseVmin { .. } => 0.0,
            ArcKind::SaturateUmax { u, .. } | ArcKind::SaturateUmin { u, .. } => u * u * (t2 - t1),
        }
    }
}

/// Control-zone trajectory on `[t0, tm]`.
#[derive(Clone, Debug)]
pub struct CzTrajectory {
    pub t0: f64,
    pub tm: f64,
    pub arcs: Vec<CzArc>,
}

impl CzTrajectory {
    pub fn arc_index(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * (1.0 + self.tm.abs());
        if !(t >= self.t0 - tol && t <= self.tm + tol) {
            return Err(Error::Domain { t, start: self.t0, end: self.tm });
        }
        let idx = self.arcs.iter().position(|a| t <= a.t_end).unwrap_or(self.arcs.len() - 1);
        Ok(idx)
    }

    pub fn state(&self, t: f64) -> Result<State> {
        let i = self.arc_index(t)?;
        Ok(self.arcs[i].state(t))
    }

    pub fn terminal(&self) -> State {
        self.arcs.last().map(|a| a.state(self.tm)).unwrap_or_default()
    }

    /// Exact `∫ u² dt` over `[t1, t2] ∩ [t0, tm]`.
    pub fn control_energy(&self, t1: f64, t2: f64) -> f64 {
        self.arcs
            .iter()
            .map(|a| {
                let lo = t1.max(a.t_start);
                let hi = t2.min(a.t_end);
                if hi > lo {
                    a.control_energy(lo, hi)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// `γ (tm - t0) + ½ ∫ u² dt`.
    pub fn cost(&self, gamma: f64) -> f64 {
        gamma * (self.tm - self.t0) + 0.5 * self.control_energy(self.t0, self.tm)
    }
}

/// Merging-zone solution on `[tm, tf]` in the local frame `s = t - tm`:
///
/// `u = a s + b + e A² exp(A (s - Δ)) + f A² exp(-A s)`, with `Δ = tf - tm`,
/// and `p, v, J` obtained by integrating or differentiating. The polynomial
/// coefficients are already divided by `ρ1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MzTrajectory {
    pub tm: f64,
    pub tf: f64,
    pub rho1: f64,
    pub rho2: f64,
    /// `[a, b, c, d, e, f]`.
    pub coeffs: [f64; 6],
}

impl MzTrajectory {
    pub fn exponent(&self) -> f64 {
        (self.rho1 / self.rho2).sqrt()
    }

    pub fn duration(&self) -> f64 {
        self.tf - self.tm
    }

    /// State at local time `s` without domain checks.
    pub fn state_local(&self, s: f64) -> State {
        let [a, b, c, d, e, f] = self.coeffs;
        let big_a = self.exponent();
        let k = self.rho2 / self.rho1;
        let e1 = (big_a * (s - self.duration())).exp();
        let e2 = (-big_a * s).exp();
        let a2 = big_a * big_a;
        State {
            p: ((a * s / 6.0 + b / 2.0) * s + c + a * k) * s + d + e * e1 + f * e2,
            v: (a * s / 2.0 + b) * s + c + a * k + big_a * (e * e1 - f * e2),
            u: a * s + b + a2 * (e * e1 + f * e2),
            jerk: a + a2 * big_a * (e * e1 - f * e2),
        }
    }

    pub fn state(&self, t: f64) -> Result<State> {
        let tol = 1e-9 * (1.0 + self.tf.abs());
        if !(t >= self.tm - tol && t <= self.tf + tol) {
            return Err(Error::Domain { t, start: self.tm, end: self.tf });
        }
        Ok(self.state_local(t - self.tm))
    }

    /// Exact `(∫ u² ds, ∫ J² ds)` over local `[s1, s2]`.
    pub fn energy_local(&self, s1: f64, s2: f64) -> (f64, f64) {
        let [a, b, _, _, e, f] = self.coeffs;
        let big_a = self.exponent();
        let a2 = big_a * big_a;
        let dur = self.duration();
        // u = a s + b + E g(s) + F h(s),  J = a + A (E g - F h),
        // g = exp(A (s - Δ)), h = exp(-A s), E = e A², F = f A².
        let (ce, cf) = (e * a2, f * a2);
        let g = |s: f64| (big_a * (s - dur)).exp();
        let h = |s: f64| (-big_a * s).exp();
        // Primitives on [s1, s2].
        let int_g = (g(s2) - g(s1)) / big_a;
        let int_h = (h(s1) - h(s2)) / big_a;
        let int_sg = {
            let pr = |s: f64| g(s) * (s / big_a - 1.0 / a2);
            pr(s2) - pr(s1)
        };
        let int_sh = {
            let pr = |s: f64| -h(s) * (s / big_a + 1.0 / a2);
            pr(s2) - pr(s1)
        };
        let int_gg = (g(s2).powi(2) - g(s1).powi(2)) / (2.0 * big_a);
        let int_hh = (h(s1).powi(2) - h(s2).powi(2)) / (2.0 * big_a);
        let int_gh = (-big_a * dur).exp() * (s2 - s1);
        let poly2 = {
            let pr = |s: f64| a * a * s * s * s / 3.0 + a * b * s * s + b * b * s;
            pr(s2) - pr(s1)
        };
        let int_u2 = poly2
            + 2.0 * ce * (a * int_sg + b * int_g)
            + 2.0 * cf * (a * int_sh + b * int_h)
            + ce * ce * int_gg
            + cf * cf * int_hh
            + 2.0 * ce * cf * int_gh;
        let int_j2 = a * a * (s2 - s1)
            + 2.0 * a * big_a * (ce * int_g - cf * int_h)
            + a2 * (ce * ce * int_gg + cf * cf * int_hh - 2.0 * ce * cf * int_gh);
        (int_u2, int_j2)
    }
}

/// Full path trajectory of one vehicle.
#[derive(Clone, Debug)]
pub struct VehicleTrajectory {
    pub id: VehicleId,
    pub cz: CzTrajectory,
    pub mz: Option<MzTrajectory>,
}

impl VehicleTrajectory {
    pub fn t0(&self) -> f64 {
        self.cz.t0
    }

    pub fn tm(&self) -> f64 {
        self.cz.tm
    }

    /// Time after which the trajectory is constant-speed.
    pub fn t_exit(&self) -> f64 {
        self.mz.map(|m| m.tf).unwrap_or(self.cz.tm)
    }

    fn exit_state(&self) -> State {
        match &self.mz {
            Some(m) => m.state_local(m.duration()),
            None => self.cz.terminal(),
        }
    }

    pub fn state(&self, t: f64) -> Result<State> {
        if t <= self.cz.tm {
            return self.cz.state(t);
        }
        if let Some(m) = &self.mz {
            if t <= m.tf {
                return Ok(m.state_local(t - m.tm));
            }
        }
        let te = self.t_exit();
        let x = self.exit_state();
        Ok(State { p: x.p + x.v * (t - te), v: x.v, u: 0.0, jerk: 0.0 })
    }

    /// Exact `∫ u² dt` over `[t1, t2]`, clipped to `t >= t0`.
    pub fn control_energy(&self, t1: f64, t2: f64) -> f64 {
        let mut total = self.cz.control_energy(t1, t2);
        if let Some(m) = &self.mz {
            let lo = t1.max(m.tm);
            let hi = t2.min(m.tf);
            if hi > lo {
                total += m.energy_local(lo - m.tm, hi - m.tm).0;
            }
        }
        total
    }

    /// First time at which the path position reaches `target`.
    pub fn time_at_position(&self, target: f64) -> Option<f64> {
        let p_at = |t: f64| self.state(t).map(|s| s.p).unwrap_or(f64::NAN);
        let p0 = p_at(self.t0());
        if target <= p0 {
            return Some(self.t0());
        }
        // Breakpoints of every piece; positions are monotone on control-zone
        // arcs and scanned finely through the merging zone.
        let mut knots: Vec<f64> = vec![self.t0()];
        for a in &self.cz.arcs {
            knots.push(a.t_end);
        }
        if let Some(m) = &self.mz {
            let n = 256;
            for k in 1..=n {
                knots.push(m.tm + m.duration() * k as f64 / n as f64);
            }
        }
        for w in knots.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                continue;
            }
            if p_at(hi) >= target {
                return crate::numerics::brent(|t| p_at(t) - target, lo, hi, 1e-13);
            }
        }
        let te = self.t_exit();
        let x = self.exit_state();
        if x.v > 0.0 {
            Some(te + (target - x.p) / x.v)
        } else {
            None
        }
    }
}

/// Evaluate a control-zone trajectory at `t`.
pub fn eval_cz(traj: &CzTrajectory, t: f64) -> Result<State> {
    traj.state(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> Cubic {
        Cubic { t_ref: 3.0, a: -0.01, b: 0.25, c: 10.0, d: 2.0 }
    }

    #[test]
    fn absolute_coefficients_match_local() {
        let c = cubic();
        let [a, b, cc, d] = c.absolute();
        for t in [3.0, 7.5, 20.0] {
            let p = a * t * t * t / 6.0 + b * t * t / 2.0 + cc * t + d;
            assert!((p - c.state(t).p).abs() < 1e-10);
        }
    }

    #[test]
    fn hamiltonian_frame_invariant() {
        let c = cubic();
        let r = c.rebased(11.0);
        assert!((c.hamiltonian(0.1) - r.hamiltonian(0.1)).abs() < 1e-12);
    }

    #[test]
    fn energy_matches_quadrature() {
        let c = cubic();
        let q = quadrature::integrate(|t| c.state(t).u.powi(2), 4.0, 19.0, 1e-12).integral;
        assert!((c.control_energy(4.0, 19.0) - q).abs() < 1e-10);
    }

    #[test]
    fn mz_energy_matches_quadrature() {
        let m = MzTrajectory {
            tm: 30.0,
            tf: 33.0,
            rho1: 2.0,
            rho2: 0.005,
            coeffs: [0.3, -0.2, 1.0, 400.0, 0.004, -0.002],
        };
        let (u2, j2) = m.energy_local(0.0, 3.0);
        let qu = quadrature::integrate(|s| m.state_local(s).u.powi(2), 0.0, 3.0, 1e-13).integral;
        let qj = quadrature::integrate(|s| m.state_local(s).jerk.powi(2), 0.0, 3.0, 1e-13).integral;
        assert!((u2 - qu).abs() < 1e-9 * (1.0 + qu), "{u2} vs {qu}");
        assert!((j2 - qj).abs() < 1e-9 * (1.0 + qj), "{j2} vs {qj}");
    }

    #[test]
    fn out_of_domain_is_error() {
        let tr = CzTrajectory {
            t0: 0.0,
            tm: 10.0,
            arcs: vec![CzArc { t_start: 0.0, t_end: 10.0, kind: ArcKind::UnconstrainedCubic(cubic()) }],
        };
        assert!(matches!(eval_cz(&tr, 10.5), Err(Error::Domain { .. })));
        assert!(eval_cz(&tr, 10.0).is_ok());
    }
}
