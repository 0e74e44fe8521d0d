use proptest::prelude::*;

use sigflow::domain::{BoundaryData, FlowState, Forcing, Profile, RoadGrid};
use sigflow::lagrangian::{
    advance_characteristics, estimate_breakdown_time, invert_initial_map, lagrangian_reference,
    reconstruct_physical, to_mass_coordinates,
};
use sigflow::orchestrator::compare_with_oracle;

proptest! {
    #[test]
    fn mass_coordinates_round_trip(
        rb in 0.005..0.3f64, ra in 0.0..0.95f64, w in 10.0..800.0f64, p in 0.0..6.3f64,
        n in 4usize..300, x_min in -1000.0..1000.0f64, len in 10.0..5000.0f64,
    ) {
        let grid = RoadGrid::new(x_min, x_min + len, n).unwrap();
        let rho = Profile::Sine { base: rb, amp: ra * rb, wavelength: w, phase: p };
        let state = FlowState::from_profiles(grid, &rho, &Profile::constant(7.0), 0.0).unwrap();
        let field = to_mass_coordinates(&state).unwrap();
        prop_assert!((field.total_mass() - state.total_mass()).abs() <= 0.05 * state.total_mass());
        let map = invert_initial_map(&field).unwrap();
        prop_assert!((map.eval(0.0).unwrap() - x_min).abs() < 1e-9 * (1.0 + x_min.abs()));
        let back = reconstruct_physical(&field, grid).unwrap();
        for (a, b) in state.rho.iter().zip(&back.rho) {
            prop_assert!((a - b).abs() <= 1e-8 * a);
        }
        prop_assert_eq!(back.v, state.v);
    }
}

#[test]
fn free_motion_keeps_characteristic_speeds() {
    let grid = RoadGrid::new(0.0, 1000.0, 100).unwrap();
    let v0 = Profile::Affine {
        offset: 12.0,
        slope: -0.002,
    };
    let state = FlowState::from_profiles(grid, &Profile::constant(0.05), &v0, 0.0).unwrap();
    let field = to_mass_coordinates(&state).unwrap();
    let moved =
        advance_characteristics(&field, &BoundaryData::empty(), &Forcing::Off, 20.0, 200).unwrap();
    let seeded = moved.xi.len() - field.xi.len();
    assert_eq!(seeded, 0);
    assert_eq!(moved.v_hat, field.v_hat);
    // rho = rho0 / (1 + rho0 g t) with g = dv/dxi = slope / rho0.
    let g = -0.002 / 0.05;
    let expected = 0.05 / (1.0 + 0.05 * g * 20.0);
    for r in &moved.rho_hat[3..moved.rho_hat.len() - 3] {
        assert!((r - expected).abs() < 1e-12, "{r} vs {expected}");
    }
    assert!((estimate_breakdown_time(&state, &Forcing::Off) - 500.0).abs() < 1e-9);
}

#[test]
fn reference_refuses_horizons_near_breakdown() {
    let grid = RoadGrid::new(0.0, 1000.0, 100).unwrap();
    let v0 = Profile::Affine {
        offset: 12.0,
        slope: -0.002,
    };
    let state = FlowState::from_profiles(grid, &Profile::constant(0.05), &v0, 0.0).unwrap();
    assert!(
        lagrangian_reference(&state, &BoundaryData::empty(), &Forcing::Off, 240.0, 100).is_ok()
    );
    assert!(
        lagrangian_reference(&state, &BoundaryData::empty(), &Forcing::Off, 260.0, 100).is_err()
    );
}

#[test]
fn pressureless_solver_converges_to_the_reference() {
    let rho0 = Profile::Sine {
        base: 0.08,
        amp: 0.03,
        wavelength: 300.0,
        phase: 0.0,
    };
    let v0 = Profile::Sine {
        base: 12.0,
        amp: 1.0,
        wavelength: 400.0,
        phase: 0.0,
    };
    let inflow = BoundaryData::constant(0.08, 12.0);
    let mut errors = Vec::new();
    for n in [100, 200, 400] {
        let grid = RoadGrid::new(0.0, 1000.0, n).unwrap();
        let initial = FlowState::from_profiles(grid, &rho0, &v0, 0.0).unwrap();
        let t = 0.45 * estimate_breakdown_time(&initial, &Forcing::Off);
        errors
            .push(compare_with_oracle(&initial, &inflow, &Forcing::Off, t.min(15.0), 0.5).unwrap());
    }
    for w in errors.windows(2) {
        assert!(w[1].l1_rho < w[0].l1_rho, "{errors:?}");
        assert!(w[1].l1_v < w[0].l1_v, "{errors:?}");
    }
}
