//! Scalar root bracketing and a damped Newton polish for small systems.

use nalgebra::{DMatrix, DVector};
use roots::{find_root_brent, Convergency};

/// Terminates on bracket width only, so tiny function scales do not stop early.
struct WidthConvergency {
    eps: f64,
    max_iter: usize,
}

impl Convergency<f64> for WidthConvergency {
    fn is_root_found(&mut self, y: f64) -> bool {
        y == 0.0
    }
    fn is_converged(&mut self, x1: f64, x2: f64) -> bool {
        (x1 - x2).abs() <= self.eps * (1.0 + x1.abs())
    }
    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter >= self.max_iter
    }
}

/// Brent root of `f` on `[lo, hi]` to relative width `eps`; `None` if the
/// bracket has no sign change.
pub fn brent<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, eps: f64) -> Option<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo.is_finite() && fhi.is_finite()) {
        return None;
    }
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    let mut conv = WidthConvergency { eps, max_iter: 300 };
    find_root_brent(lo, hi, &f, &mut conv).ok()
}

/// All sign-change roots of `f` over `[lo, hi]`, found by scanning `n`
/// uniform cells, in increasing order. Non-finite samples split the scan.
pub fn scan_roots<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, eps: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(hi > lo) {
        return out;
    }
    let h = (hi - lo) / n as f64;
    let mut x_prev = lo;
    let mut f_prev = f(lo);
    for k in 1..=n {
        let x = if k == n { hi } else { lo + h * k as f64 };
        let fx = f(x);
        if f_prev.is_finite() && fx.is_finite() {
            if f_prev == 0.0 {
                push_unique(&mut out, x_prev);
            } else if fx.signum() != f_prev.signum() {
                if let Some(r) = brent(&f, x_prev, x, eps) {
                    push_unique(&mut out, r);
                }
            }
        }
        x_prev = x;
        f_prev = fx;
    }
    if f_prev == 0.0 {
        push_unique(&mut out, hi);
    }
    out
}

fn push_unique(v: &mut Vec<f64>, x: f64) {
    if v.last().is_none_or(|&l| (x - l).abs() > 1e-12 * (1.0 + x.abs())) {
        v.push(x);
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Damped Newton on `F(x) = 0` with a central-difference Jacobian and
/// backtracking on `‖F‖∞`. Intended for polishing good initial guesses.
pub fn newton<F: Fn(&[f64]) -> Vec<f64>>(f: F, x0: &[f64], tol: f64, max_iter: usize) -> NewtonOutcome {
    let n = x0.len();
    let mut x = x0.to_vec();
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut r = f(&x);
    let mut rn = norm(&r);
    let mut it = 0;
    while it < max_iter && rn.is_finite() && rn > tol {
        it += 1;
        let m = r.len();
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for j in 0..n {
            let hstep = 1e-7 * (1.0 + x[j].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += hstep;
            xm[j] -= hstep;
            let (rp, rm) = (f(&xp), f(&xm));
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * hstep);
            }
        }
        // The SVD fallback does not terminate on non-finite input.
        if jac.iter().any(|v| !v.is_finite()) {
            break;
        }
        let rhs = -DVector::from_column_slice(&r);
        let step = match jac.clone().full_piv_lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => match jac.try_svd(true, true, f64::EPSILON, 500).map(|d| d.solve(&rhs, 1e-14)) {
                Some(Ok(s)) => s,
                _ => break,
            },
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let xt: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
            let rt = f(&xt);
            let rtn = norm(&rt);
            if rtn.is_finite() && rtn < rn {
                x = xt;
                r = rt;
                rn = rtn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    NewtonOutcome { x, residual: rn, iterations: it }
}

/// Golden-section minimum of a unimodal `f` on `[lo, hi]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimum of `f` on `[lo, hi]`: coarse scan then golden refinement around
/// the best cell. Handles multimodal smooth functions with modest curvature.
pub fn scan_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, tol: f64) -> (f64, f64) {
    if !(hi > lo) {
        return (lo, f(lo));
    }
    let h = (hi - lo) / n as f64;
    let mut best = (lo, f(lo));
    for k in 1..=n {
        let x = lo + h * k as f64;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    let a = (best.0 - h).max(lo);
    let b = (best.0 + h).min(hi);
    let refined = golden_min(&f, a, b, tol);
    if refined.1 < best.1 {
        refined
    } else {
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_finds_all_sign_changes() {
        let r = scan_roots(|x| (x - 1.0) * (x - 2.5) * (x - 4.0), 0.0, 5.0, 50, 1e-14);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([1.0, 2.5, 4.0]) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn newton_solves_coupled_quadratics() {
        let out = newton(|x| vec![x[0] * x[0] + x[1] - 3.0, x[0] - x[1] * x[1] + 3.0], &[1.2, 1.7], 1e-13, 50);
        assert!(out.residual < 1e-13);
        assert!((out.x[0] - 1.0).abs() < 1e-9 && (out.x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn scan_min_refines() {
        let (x, _) = scan_min(|x| (x - 0.3).powi(2) + 0.1 * (5.0 * x).sin(), -2.0, 2.0, 64, 1e-10);
        let d = 2.0 * (x - 0.3) + 0.5 * (5.0 * x).cos();
        assert!(d.abs() < 1e-6);
    }
}
