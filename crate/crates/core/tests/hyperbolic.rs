use proptest::prelude::*;

use sigflow::domain::{BoundaryData, FlowState, ForceLaw, Forcing, Profile, RoadGrid};
use sigflow::hyperbolic::{solve_hyperbolic, HyperbolicBoundary, HyperbolicProblem};

fn problem(
    initial: FlowState,
    boundary: HyperbolicBoundary,
    forcing: Forcing,
    t_end: f64,
) -> HyperbolicProblem {
    HyperbolicProblem {
        initial,
        boundary,
        forcing,
        t_end,
        snapshot_interval: 1.0,
        cfl: 0.5,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn density_stays_positive_and_speed_within_data(
        rb in 0.01..0.2f64, ra in 0.0..0.9f64, w in 30.0..400.0f64,
        vb in 1.0..20.0f64, va in 0.0..0.9f64,
        rho_in in 0.0..0.2f64, v_in in 0.0..20.0f64,
    ) {
        let grid = RoadGrid::new(0.0, 1000.0, 100).unwrap();
        let rho0 = Profile::Sine { base: rb, amp: ra * rb, wavelength: w, phase: 0.0 };
        let v0 = Profile::Sine { base: vb, amp: va * vb, wavelength: 0.7 * w, phase: 1.0 };
        let initial = FlowState::from_profiles(grid, &rho0, &v0, 0.0).unwrap();
        let (lo, hi) = initial.v.iter().fold((v_in, v_in), |(a, b), v| (a.min(*v), b.max(*v)));
        let traj = solve_hyperbolic(&problem(
            initial,
            HyperbolicBoundary::inflow(BoundaryData::constant(rho_in, v_in)),
            Forcing::Off,
            10.0,
        )).unwrap();
        for snap in &traj.snapshots {
            prop_assert!(snap.state.rho.iter().all(|r| *r >= 0.0));
            for v in &snap.state.v {
                prop_assert!(*v >= lo - 1e-9 && *v <= hi + 1e-9, "{} outside [{}, {}]", v, lo, hi);
            }
        }
        prop_assert!(traj.max_closure_residual() <= 1e-10 * (1.0 + traj.initial_mass));
    }
}

#[test]
fn ledger_tracks_inflow_and_outflow() {
    let grid = RoadGrid::new(0.0, 200.0, 40).unwrap();
    let initial = FlowState::uniform(grid, 0.05, 10.0, 0.0).unwrap();
    let traj = solve_hyperbolic(&problem(
        initial,
        HyperbolicBoundary::inflow(BoundaryData::constant(0.08, 10.0)),
        Forcing::Off,
        5.0,
    ))
    .unwrap();
    let last = traj.last().unwrap();
    // Constant speed: inflow and outflow are exact fluxes times time.
    assert!((last.ledger.inflow - 0.08 * 10.0 * 5.0).abs() < 1e-12);
    assert!((last.ledger.outflow - 0.05 * 10.0 * 5.0).abs() < 1e-12);
    assert!(last.ledger.closure_residual(traj.initial_mass).abs() < 1e-12);
    assert_eq!(traj.times(), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
}

#[test]
fn uniform_flow_accelerates_towards_the_desired_speed() {
    let grid = RoadGrid::new(0.0, 500.0, 50).unwrap();
    let forcing = Forcing::On(ForceLaw::new(1.5, 16.0, 4.0).unwrap());
    let run = |v0: f64| {
        let initial = FlowState::uniform(grid, 0.04, v0, 0.0).unwrap();
        let traj = solve_hyperbolic(&problem(
            initial,
            HyperbolicBoundary::vacuum_left(),
            forcing,
            4.0,
        ))
        .unwrap();
        traj.final_state().unwrap().v.clone()
    };
    // Below the ramp the force is constant and the explicit source is exact.
    // Cells away from the vacuum edge keep the uniform solution.
    for u in &run(5.0)[10..] {
        assert!((u - 11.0).abs() < 1e-10, "{u}");
    }
    // Inside the ramp the speed relaxes towards v* without passing it.
    for u in &run(14.0)[10..] {
        assert!(*u > 15.0 && *u <= 16.0, "{u}");
    }
}
