//! Invariants of the solvers and the coordinator on random instances.

use std::sync::Arc;

use proptest::prelude::*;

use cavsim_core::coordinator::{earliest_arrival, latest_arrival, ConflictTable, Coordinator, ScheduledVehicle};
use cavsim_core::cz::{solve_cz, solve_fixed_terminal, solve_unconstrained, CzProblem};
use cavsim_core::mz::{boundary_residual, mz_objective, solve_mz, MzProblem};
use cavsim_core::sim::{run, SimConfig};
use cavsim_core::trajectory::{ArcKind, Lead, VehicleTrajectory};
use cavsim_core::types::{Approach, IntersectionConfig, Movement, Turn, VehicleRecord};

fn cfg() -> IntersectionConfig {
    IntersectionConfig::default()
}

fn grid(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |k| a + (b - a) * k as f64 / n as f64)
}

fn lead_traj(id: u32, t0: f64, v0: f64, gamma: f64) -> Arc<VehicleTrajectory> {
    let s = solve_unconstrained(&CzProblem::new(&cfg(), t0, v0, gamma)).unwrap();
    Arc::new(VehicleTrajectory { id, cz: s.trajectory, mz: None })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn free_terminal_unconstrained_shape(v0 in 5.5f64..14.5, gamma in 0.005f64..2.0, t0 in 0.0f64..100.0) {
        let p = CzProblem::new(&cfg(), t0, v0, gamma);
        let s = solve_unconstrained(&p).unwrap();
        let tr = &s.trajectory;
        let ArcKind::UnconstrainedCubic(c) = tr.arcs[0].kind.clone() else { panic!("single cubic expected") };
        prop_assert!(c.a <= 1e-9);
        prop_assert!(tr.terminal().u.abs() <= 1e-9);
        prop_assert!(c.hamiltonian(gamma).abs() <= 1e-8);
        for t in grid(t0, s.tm(), 200) {
            let st = tr.state(t).unwrap();
            prop_assert!(st.u >= -1e-9);
            prop_assert!(st.v >= v0 - 1e-9);
        }
    }

    #[test]
    fn fixed_terminal_control_keeps_one_sign(v0 in 5.5f64..14.5, dur in 20.0f64..70.0) {
        let p = CzProblem::new(&cfg(), 0.0, v0, 0.1);
        let s = solve_fixed_terminal(&p, dur).unwrap();
        let u0 = s.trajectory.state(0.0).unwrap().u;
        prop_assert!(s.um().abs() <= 1e-9);
        for t in grid(0.0, dur, 200) {
            prop_assert!(s.trajectory.state(t).unwrap().u * u0 >= -1e-12);
        }
    }

    #[test]
    fn junctions_are_smooth(
        vl in 8.0f64..12.0,
        v0 in 8.0f64..14.0,
        dt in 0.5f64..4.0,
        beta in 0.05f64..0.95,
    ) {
        let c = cfg();
        let gamma = cavsim_core::types::CostWeights { beta, ..Default::default() }.gamma(&c).unwrap();
        let lead = Lead { id: 1, trajectory: lead_traj(1, 0.0, vl, gamma) };
        let p = CzProblem::new(&c, dt, v0, gamma).with_lead(lead);
        if let Ok(s) = solve_cz(&p) {
            let tr = &s.trajectory;
            prop_assert!(s.residual <= 1e-8, "{:?} residual {}", s.case, s.residual);
            for w in tr.arcs.windows(2) {
                let (x, y) = (w[0].state(w[0].t_end), w[1].state(w[1].t_start));
                prop_assert!((x.p - y.p).abs() <= 1e-8);
                prop_assert!((x.v - y.v).abs() <= 1e-8);
                prop_assert!((x.u - y.u).abs() <= 1e-8, "{:?} u jump {} at {}", s.case, x.u - y.u, w[0].t_end);
            }
            prop_assert!((tr.terminal().p - c.cz_length).abs() <= 1e-8);
            if s.free_terminal {
                prop_assert!(tr.terminal().u.abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn cz_energy_matches_quadrature(v0 in 5.5f64..14.5, dur in 25.0f64..60.0) {
        let s = solve_fixed_terminal(&CzProblem::new(&cfg(), 0.0, v0, 0.1), dur).unwrap();
        let tr = &s.trajectory;
        let q = quadrature::integrate(|t| tr.state(t).unwrap().u.powi(2), 0.0, dur, 1e-13).integral;
        prop_assert!((tr.control_energy(0.0, dur) - q).abs() <= 1e-9 * (1.0 + q));
    }

    #[test]
    fn mz_boundary_and_derivative_chain(
        v_entry in 6.0f64..14.0,
        u_entry in -0.4f64..0.4,
        dur in 2.0f64..6.0,
        path in 10.0f64..50.0,
        w in 0.05f64..0.95,
    ) {
        let c = cfg();
        let (rho1, rho2) = cavsim_core::types::CostWeights { w, ..Default::default() }.rho(&c).unwrap();
        let p = MzProblem {
            tm: 10.0, tf: 10.0 + dur, p_entry: c.cz_length, path_length: path,
            v_entry, u_entry, v_exit: c.exit_speed, rho1, rho2,
        };
        let m = solve_mz(&p).unwrap();
        prop_assert!(boundary_residual(&p, &m) <= 1e-8);
        let h = 1e-5;
        for s in grid(0.1, dur - 0.1, 20) {
            let (a, b, x) = (m.state_local(s - h), m.state_local(s + h), m.state_local(s));
            let tol = |y: f64| 1e-5 * (1.0 + y.abs());
            prop_assert!(((b.p - a.p) / (2.0 * h) - x.v).abs() <= tol(x.v));
            prop_assert!(((b.v - a.v) / (2.0 * h) - x.u).abs() <= tol(x.u));
            prop_assert!(((b.u - a.u) / (2.0 * h) - x.jerk).abs() <= tol(x.jerk) * 10.0);
        }
        let o = mz_objective(&m);
        let qu = quadrature::integrate(|s| m.state_local(s).u.powi(2), 0.0, dur, 1e-13).integral;
        prop_assert!((o.accel_energy - qu).abs() <= 1e-8 * (1.0 + qu));
    }

    #[test]
    fn earliest_never_exceeds_latest(v0 in 5.0f64..15.0, t0 in 0.0f64..500.0) {
        let c = cfg();
        prop_assert!(latest_arrival(&c, t0, v0) >= earliest_arrival(&c, t0, v0));
    }

    #[test]
    fn lower_bound_is_monotone_in_predecessor_exit(
        shift in 0.0f64..20.0,
        extra in 0.0f64..5.0,
        turn in 0usize..3,
        origin in 0usize..4,
    ) {
        let c = cfg();
        let me = VehicleRecord { id: 2, t0: 2.0, v0: 10.0, movement: Movement::new(Approach::West, Turn::Straight) };
        let other = Movement::new(Approach::from_index(origin), [Turn::Left, Turn::Straight, Turn::Right][turn]);
        let lb = |tf_shift: f64| {
            let mut co = Coordinator::new(c.clone(), ConflictTable::geometric()).unwrap();
            let rec = VehicleRecord { id: 1, t0: 0.0, v0: 10.0, movement: other };
            co.register_arrival(rec).unwrap();
            let tr = lead_traj(1, 0.0, 10.0, 0.1);
            let tm = tr.tm();
            let sched = ScheduledVehicle {
                record: rec, trajectory: tr, tm, tf: tm + c.turn_time(other.turn) + tf_shift,
                vm: 10.0, exit_speed: c.exit_speed,
            };
            co.record_solution(1, sched).unwrap();
            co.register_arrival(me).unwrap();
            co.terminal_time_lower_bound(2).unwrap()
        };
        let (a, b) = (lb(shift), lb(shift + extra));
        prop_assert!(b >= a - 1e-12);
        prop_assert!(a >= earliest_arrival(&c, me.t0, me.v0) - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn relative_sets_partition_predecessors(seed in 0u64..1000) {
        let mut cfg = SimConfig::default();
        cfg.arrivals.seed = seed;
        cfg.arrivals.max_vehicles = Some(25);
        cfg.arrivals.rate = 0.3;
        cfg.arrivals.horizon = 1e6;
        let log = run(&cfg).unwrap();
        for (k, v) in log.vehicles.iter().enumerate() {
            let s = &v.sets;
            let mut all: Vec<usize> = [&s.same_exit, &s.same_entry, &s.lateral, &s.no_conflict]
                .iter().flat_map(|x| x.iter().copied()).collect();
            all.sort_unstable();
            let expect: Vec<usize> = log.vehicles[..k].iter()
                .filter(|w| w.schedule().is_some()).map(|w| w.index).collect();
            prop_assert_eq!(all, expect);
            if let Some((lo, hi)) = v.window {
                prop_assert!(lo >= earliest_arrival(&log.config, v.record.t0, v.record.v0) - 1e-12);
                prop_assert!(hi >= lo);
            }
        }
        prop_assert!(log.monitor.violations.is_empty(), "{:?}", log.monitor.violations);
    }
}
