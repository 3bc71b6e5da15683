//! Merging-zone oracle: piecewise-constant jerk on a uniform grid. The cost
//! is an exact quadratic in the jerks and the two terminal conditions are
//! affine, so the discrete optimum is one KKT solve.

use nalgebra::{DMatrix, DVector};

use super::{DiscreteTrajectory, GridSpec};
use crate::error::{Error, Result};
use crate::mz::MzProblem;

#[derive(Clone, Debug)]
pub struct MzOracle {
    /// `½∫(ρ1 u² + ρ2 J²)` of the re-integrated trajectory.
    pub cost: f64,
    pub h: f64,
    /// `u` holds node values here; `jerk` one value per interval.
    pub trajectory: DiscreteTrajectory,
    /// Max mismatch of terminal position and speed.
    pub boundary_error: f64,
}

fn integrate(prob: &MzProblem, h: f64, jerk: &[f64]) -> DiscreteTrajectory {
    let n = jerk.len();
    let mut tr = DiscreteTrajectory { jerk: jerk.to_vec(), ..Default::default() };
    let (mut p, mut v, mut u) = (prob.p_entry, prob.v_entry, prob.u_entry);
    for k in 0..=n {
        tr.t.push(prob.tm + k as f64 * h);
        tr.p.push(p);
        tr.v.push(v);
        tr.u.push(u);
        if let Some(&j) = jerk.get(k) {
            p += v * h + u * h * h / 2.0 + j * h.powi(3) / 6.0;
            v += u * h + j * h * h / 2.0;
            u += j * h;
        }
    }
    tr
}

fn cost(prob: &MzProblem, h: f64, tr: &DiscreteTrajectory) -> f64 {
    tr.jerk
        .iter()
        .zip(&tr.u)
        .map(|(&j, &u)| {
            let u2 = u * u * h + u * j * h * h + j * j * h.powi(3) / 3.0;
            0.5 * (prob.rho1 * u2 + prob.rho2 * j * j * h)
        })
        .sum()
}

/// Discrete optimum of `½∫(ρ1 u² + ρ2 J²)` over piecewise-constant jerk
/// meeting entry position, speed, acceleration and exit position, speed.
pub fn brute_force_mz(prob: &MzProblem, grid: &GridSpec) -> Result<MzOracle> {
    prob.validate()?;
    grid.validate()?;
    let dur = prob.tf - prob.tm;
    let n = ((dur / grid.h).round() as usize).max(2);
    let h = dur / n as f64;

    // u_k = u0 + (U j)_k with U[k][m] = h for m < k.
    let nf = n as f64;
    let mut hess = DMatrix::<f64>::zeros(n + 2, n + 2);
    for m in 0..n {
        for l in 0..n {
            let utu = h * h * (nf - 1.0 - m.max(l) as f64);
            let sym = if m == l { 0.0 } else { 0.5 * h };
            hess[(m, l)] = prob.rho1 * (h * utu + h * h * sym);
        }
        hess[(m, m)] += prob.rho1 * h.powi(3) / 3.0 + prob.rho2 * h;
    }
    let mut rhs = DVector::<f64>::zeros(n + 2);
    for m in 0..n {
        rhs[m] = -prob.rho1 * prob.u_entry * (h * h * (nf - 1.0 - m as f64) + h * h / 2.0);
    }

    // Terminal position and speed are affine in the jerks.
    let end = |j: &[f64]| {
        let tr = integrate(prob, h, j);
        (tr.p[n], tr.v[n])
    };
    let zero = vec![0.0; n];
    let (p_free, v_free) = end(&zero);
    let mut unit = zero.clone();
    for m in 0..n {
        unit[m] = 1.0;
        let (p, v) = end(&unit);
        unit[m] = 0.0;
        for (row, val) in [(n, p - p_free), (n + 1, v - v_free)] {
            hess[(row, m)] = val;
            hess[(m, row)] = val;
        }
    }
    rhs[n] = prob.p_entry + prob.path_length - p_free;
    rhs[n + 1] = prob.v_exit - v_free;

    let sol = hess.full_piv_lu().solve(&rhs).ok_or_else(|| Error::Conditioning("singular KKT system".into()))?;
    let jerk: Vec<f64> = sol.iter().take(n).copied().collect();
    let tr = integrate(prob, h, &jerk);
    let boundary_error =
        (tr.p[n] - prob.p_entry - prob.path_length).abs().max((tr.v[n] - prob.v_exit).abs());
    let c = cost(prob, h, &tr);
    Ok(MzOracle { cost: c, h, trajectory: tr, boundary_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mz::{mz_objective, solve_mz};
    use crate::types::{CostWeights, IntersectionConfig, Turn};

    fn left_turn() -> MzProblem {
        let cfg = IntersectionConfig::default();
        let (rho1, rho2) = CostWeights::default().rho(&cfg).unwrap();
        MzProblem {
            tm: 32.0,
            tf: 32.0 + cfg.turn_time(Turn::Left),
            p_entry: cfg.cz_length,
            path_length: cfg.path_length(Turn::Left),
            v_entry: 10.2,
            u_entry: 0.0,
            v_exit: cfg.exit_speed,
            rho1,
            rho2,
        }
    }

    #[test]
    fn constant_speed_costs_nothing() {
        let p = MzProblem { path_length: 50.0, v_entry: 10.0, v_exit: 10.0, tf: 37.0, ..left_turn() };
        let o = brute_force_mz(&p, &GridSpec::new(0.01)).unwrap();
        assert!(o.cost < 1e-12 && o.boundary_error < 1e-9);
    }

    #[test]
    fn left_turn_within_two_percent() {
        let p = left_turn();
        let exact = mz_objective(&solve_mz(&p).unwrap()).weighted;
        let coarse = brute_force_mz(&p, &GridSpec::new(0.01)).unwrap();
        let fine = brute_force_mz(&p, &GridSpec::new(0.005)).unwrap();
        assert!(coarse.boundary_error < 1e-8);
        assert!(coarse.cost >= exact * (1.0 - 1e-9));
        assert!((coarse.cost - exact) / exact < 0.02, "{} vs {}", coarse.cost, exact);
        assert!(fine.cost - exact < coarse.cost - exact);
    }
}
