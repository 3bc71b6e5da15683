//! Frozen reference values for the control-zone solver.

use std::sync::Arc;

use cavsim_core::cz::{
    solve_cz, solve_safety_no_exit, solve_safety_with_exit, solve_unconstrained, CzCase, CzProblem, TerminalMode,
};
use cavsim_core::trajectory::{ArcKind, Cubic, CzArc, CzTrajectory, Lead, VehicleTrajectory};
use cavsim_core::types::IntersectionConfig;

fn cfg() -> IntersectionConfig {
    IntersectionConfig::default()
}

fn lead_from(arc: Cubic, t0: f64, tm: f64) -> Lead {
    let cz = CzTrajectory {
        t0,
        tm,
        arcs: vec![CzArc { t_start: t0, t_end: tm, kind: ArcKind::UnconstrainedCubic(arc) }],
    };
    Lead { id: 1, trajectory: Arc::new(VehicleTrajectory { id: 1, cz, mz: None }) }
}

fn free_lead() -> Lead {
    let p = CzProblem::new(&cfg(), 0.0, 10.0, 0.1);
    let s = solve_unconstrained(&p).unwrap();
    let ArcKind::UnconstrainedCubic(c) = s.trajectory.arcs[0].kind.clone() else { unreachable!() };
    lead_from(c, 0.0, s.tm())
}

#[test]
fn free_terminal_time_reference() {
    let p = CzProblem::new(&cfg(), 0.0, 10.0, 0.1);
    let s = solve_unconstrained(&p).unwrap();
    assert!((s.tm() - 32.026977).abs() < 1e-5, "tm = {}", s.tm());
    assert!(s.residual < 1e-10);
    let ArcKind::UnconstrainedCubic(c) = &s.trajectory.arcs[0].kind else { panic!() };
    let [a, b, _, _] = c.absolute();
    assert!((a + 0.00728109).abs() < 1e-7 && (b - 0.23319132).abs() < 1e-7);
}

#[test]
fn no_exit_reference() {
    let p = CzProblem::new(&cfg(), 2.0, 13.0, 0.1).with_lead(free_lead());
    let s = solve_safety_no_exit(&p).unwrap();
    assert_eq!(s.case, CzCase::SafetyNoExit);
    let tau = s.switch_times[0];
    assert!((tau - 14.3107587).abs() < 1e-5, "tau = {tau}");
    assert!((s.tm() - 32.755086).abs() < 1e-5, "tm = {}", s.tm());
    let ArcKind::UnconstrainedCubic(c) = &s.trajectory.arcs[0].kind else { panic!() };
    let [a, b, c2, d] = c.absolute();
    assert!((a - 0.0263460844).abs() < 1e-7 && (b + 0.248039069).abs() < 1e-7);
    assert!((c2 - 13.443386).abs() < 1e-5 && (d + 26.4258219).abs() < 1e-5);
    assert!(s.residual < 1e-8);
}

fn fixed_lead() -> Lead {
    // u(20.5) = 0 and p(41) = 400 from (0, 10).
    let a = 0.0017411238954745294;
    let b = -0.03569303985722785;
    lead_from(Cubic { t_ref: 0.0, a, b, c: 10.0, d: 0.0 }, 0.0, 41.0)
}

#[test]
fn with_exit_reference() {
    let p = CzProblem::new(&cfg(), 1.5, 12.0, 0.1)
        .with_lead(fixed_lead())
        .with_terminal(TerminalMode::Fixed(42.5));
    let s = solve_safety_with_exit(&p).unwrap();
    assert_eq!(s.case, CzCase::SafetyWithExit);
    let (t1, t2) = (s.switch_times[0], s.switch_times[1]);
    assert!((t1 - 8.75414966).abs() < 1e-5, "tau1 = {t1}");
    assert!((t2 - 14.3995309).abs() < 1e-5, "tau2 = {t2}");
    let ArcKind::UnconstrainedCubic(c) = &s.trajectory.arcs[2].kind else { panic!() };
    let [e, r, _, _] = c.absolute();
    assert!((e - 3.77989153e-4).abs() < 1e-9 && (r + 1.60645390e-2).abs() < 1e-8, "{e} {r}");
    assert!(s.residual < 1e-8);
}

#[test]
fn composite_respects_follower_box() {
    let p = CzProblem::new(&cfg(), 2.0, 13.0, 0.1).with_lead(free_lead());
    let s = solve_cz(&p).unwrap();
    assert!(s.tm() >= 32.755086 - 1e-6);
}
