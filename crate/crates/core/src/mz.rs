//! Merging-zone trajectories minimizing weighted acceleration and jerk.
//!
//! The stationary solution is a cubic-plus-exponential profile; six linear
//! boundary conditions fix its coefficients. Exponentials are anchored at
//! opposite ends of the interval so both stay bounded by one.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::trajectory::{MzTrajectory, State};

/// Reciprocal condition number below which the system is rejected.
const RCOND_MIN: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MzProblem {
    pub tm: f64,
    pub tf: f64,
    /// Path position at merging-zone entry.
    pub p_entry: f64,
    pub path_length: f64,
    pub v_entry: f64,
    pub u_entry: f64,
    pub v_exit: f64,
    pub rho1: f64,
    pub rho2: f64,
}

impl MzProblem {
    pub fn validate(&self) -> Result<()> {
        let all = [self.tm, self.tf, self.p_entry, self.path_length, self.v_entry, self.u_entry, self.v_exit];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("merging-zone data must be finite"));
        }
        if !(self.tf > self.tm) {
            return Err(Error::Domain { t: self.tf, start: self.tm, end: f64::INFINITY });
        }
        if !(self.rho1 > 0.0 && self.rho2 > 0.0 && self.rho1.is_finite() && self.rho2.is_finite()) {
            return Err(Error::input("weights must be positive"));
        }
        if self.path_length <= 0.0 {
            return Err(Error::input("path length must be positive"));
        }
        Ok(())
    }
}

/// `(∫u², ∫J², ½∫(ρ1 u² + ρ2 J²))` over the merging zone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MzObjective {
    pub accel_energy: f64,
    pub jerk_energy: f64,
    pub weighted: f64,
}

pub fn solve_mz(prob: &MzProblem) -> Result<MzTrajectory> {
    prob.validate()?;
    let big_a = (prob.rho1 / prob.rho2).sqrt();
    let k = prob.rho2 / prob.rho1;
    let dur = prob.tf - prob.tm;
    if !(big_a * dur).is_finite() {
        return Err(Error::Conditioning("exponent overflows".into()));
    }
    // Unknowns [a, b, c, d, ẽ, f̃] with ẽ = e A², f̃ = f A².
    let rows = |s: f64| {
        let g = (big_a * (s - dur)).exp();
        let h = (-big_a * s).exp();
        let ia2 = 1.0 / (big_a * big_a);
        let p = [s.powi(3) / 6.0 + k * s, s * s / 2.0, s, 1.0, g * ia2, h * ia2];
        let v = [s * s / 2.0 + k, s, 1.0, 0.0, g / big_a, -h / big_a];
        let u = [s, 1.0, 0.0, 0.0, g, h];
        let j = [1.0, 0.0, 0.0, 0.0, big_a * g, -big_a * h];
        (p, v, u, j)
    };
    let (p0, v0, u0, _) = rows(0.0);
    let (p1, v1, _, j1) = rows(dur);
    let m = SMatrix::<f64, 6, 6>::from_row_slice(&[p0, v0, u0, p1, v1, j1].concat());
    let rhs = SVector::<f64, 6>::from_column_slice(&[
        prob.p_entry,
        prob.v_entry,
        prob.u_entry,
        prob.p_entry + prob.path_length,
        prob.v_exit,
        0.0,
    ]);
    // Row equilibration before the conditioning estimate.
    let mut ms = m;
    let mut rs = rhs;
    for i in 0..6 {
        let n = ms.row(i).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        ms.row_mut(i).scale_mut(1.0 / n);
        rs[i] /= n;
    }
    let sv = ms.singular_values();
    let rcond = sv.min() / sv.max();
    if !(rcond > RCOND_MIN) {
        return Err(Error::Conditioning(format!("reciprocal condition {rcond:e}")));
    }
    let x = ms.full_piv_lu().solve(&rs).ok_or_else(|| Error::Conditioning("singular system".into()))?;
    let ia2 = 1.0 / (big_a * big_a);
    Ok(MzTrajectory {
        tm: prob.tm,
        tf: prob.tf,
        rho1: prob.rho1,
        rho2: prob.rho2,
        coeffs: [x[0], x[1], x[2], x[3], x[4] * ia2, x[5] * ia2],
    })
}

pub fn eval_mz(traj: &MzTrajectory, t: f64) -> Result<State> {
    traj.state(t)
}

pub fn mz_objective(traj: &MzTrajectory) -> MzObjective {
    let (u2, j2) = traj.energy_local(0.0, traj.duration());
    MzObjective { accel_energy: u2, jerk_energy: j2, weighted: 0.5 * (traj.rho1 * u2 + traj.rho2 * j2) }
}

/// Max-norm mismatch of the six boundary conditions.
pub fn boundary_residual(prob: &MzProblem, traj: &MzTrajectory) -> f64 {
    let a = traj.state_local(0.0);
    let b = traj.state_local(traj.duration());
    [
        a.p - prob.p_entry,
        a.v - prob.v_entry,
        a.u - prob.u_entry,
        b.p - prob.p_entry - prob.path_length,
        b.v - prob.v_exit,
        b.jerk,
    ]
    .iter()
    .fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> MzProblem {
        MzProblem {
            tm: 30.0,
            tf: 33.0,
            p_entry: 400.0,
            path_length: 30.0,
            v_entry: 10.0,
            u_entry: 0.0,
            v_exit: 10.0,
            rho1: 2.0,
            rho2: 0.005,
        }
    }

    #[test]
    fn constant_speed_is_exact() {
        let p = base();
        let tr = solve_mz(&p).unwrap();
        let o = mz_objective(&tr);
        assert!(o.weighted.abs() < 1e-10);
        for k in 0..=30 {
            let st = tr.state_local(0.1 * k as f64);
            assert!(st.u.abs() < 1e-10 && st.jerk.abs() < 1e-10);
        }
    }

    #[test]
    fn boundary_conditions_hold() {
        let p = MzProblem { v_entry: 12.0, u_entry: 0.3, v_exit: 9.0, ..base() };
        let tr = solve_mz(&p).unwrap();
        assert!(boundary_residual(&p, &tr) < 1e-9);
    }

    #[test]
    fn rejects_empty_interval() {
        let p = MzProblem { tf: 30.0, ..base() };
        assert!(matches!(solve_mz(&p), Err(Error::Domain { .. })));
    }
}
