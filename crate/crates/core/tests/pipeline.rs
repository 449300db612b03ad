use cpo_core::bloch::AtomParams;
use cpo_core::medium::{
    derive_coefficients, linearized_potential, probe_potential, soliton_potential_at, Couplings, MediumCoefficients,
    Wavenumbers,
};
use cpo_core::propagation::{
    beam_diagnostics, default_probe_dz, deflection_cell, make_gaussian, propagate_probe, soliton_field, BendDirection,
    DeflectionSetup, ProbePotential, PropagationOptions, TransverseGrid,
};
use cpo_core::wei_norman::{evolve_gaussian_analytic, probe_coefficients, trajectory_endpoint, GaussianPacket};
use proptest::prelude::*;

fn medium(delta_c: f64) -> (AtomParams, MediumCoefficients) {
    let atom = AtomParams::new(0.01, 1.0, delta_c, -1.0).unwrap();
    let m = derive_coefficients(
        &atom,
        &Couplings {
            coupling_c: 2.525,
            coupling_p: 10.1,
            atom_line_density: 1.0,
        },
        &Wavenumbers {
            k_c: 2.0,
            k_p: 270.0,
            c: 1.0,
        },
    )
    .unwrap();
    (atom, m)
}

#[test]
fn sampled_soliton_potential_matches_pointwise_formula() {
    let (_, m) = medium(-10.0);
    let grid = TransverseGrid::centered(512, 16.0 * m.l_c).unwrap();
    let field = soliton_field(grid, 3.7, &m);
    let v = probe_potential(&m, &field);
    for (x, got) in grid.positions().zip(&v) {
        let want = soliton_potential_at(x, &m);
        assert!((got - want).abs() < 1e-13 * want.abs().max(1.0), "x={x}");
    }
}

#[test]
fn linear_slope_matches_finite_difference_of_full_potential() {
    for delta_c in [-10.0, 10.0] {
        let (_, m) = medium(delta_c);
        for a_lc in [-0.5, -0.1, 0.0, 0.2, 1.0] {
            let a = a_lc * m.l_c;
            let lin = linearized_potential(a, &m);
            let h = 1e-4 * m.l_c;
            let fd = (soliton_potential_at(a + h, &m) - soliton_potential_at(a - h, &m)) / (2.0 * h);
            assert!((lin.eta0 - soliton_potential_at(a, &m)).abs() < 1e-14);
            assert!(
                (lin.eta1 - fd).abs() < 1e-7 * (1.0 + fd.abs()),
                "a={a_lc} {} {fd}",
                lin.eta1
            );
        }
    }
}

#[test]
fn linearized_centroid_follows_endpoint_law() {
    let (_, m) = medium(-10.0);
    let grid = TransverseGrid::centered(1024, 16.0 * m.l_c).unwrap();
    let a = 0.15 * m.l_c;
    let b = 0.2 * m.l_c;
    let length = 15.0;
    let eta = linearized_potential(a, &m);
    let out = propagate_probe(
        make_gaussian(grid, a, b).unwrap(),
        &ProbePotential::Linearized(eta),
        &m,
        length,
        default_probe_dz(&m),
        &PropagationOptions::default(),
    )
    .unwrap();
    let (x_end, _) = trajectory_endpoint(a, eta.eta1, m.k_p, m.c, length);
    let centroid = beam_diagnostics(&out).unwrap().centroid;
    assert!((centroid - x_end).abs() < 1e-9 * (x_end - a).abs().max(1e-12));
}

#[test]
fn deflection_is_antisymmetric_in_offset_and_detuning() {
    let cell = |a_lc: f64, delta_c: f64| {
        let (atom, m) = medium(delta_c);
        let a = a_lc * m.l_c;
        let setup = DeflectionSetup {
            medium: m,
            atom,
            grid_points: 1024,
            width_lc: 16.0,
            b_lc: 0.2,
            length: 20.0,
            dz: None,
            options: PropagationOptions::default(),
            straight_tolerance_lc: 1e-9,
        };
        deflection_cell(a, delta_c, &setup).unwrap()
    };
    let left = cell(0.2, -10.0);
    let right = cell(-0.2, -10.0);
    assert_eq!(left.direction, BendDirection::Left);
    assert_eq!(right.direction, BendDirection::Right);
    assert!((left.shift() + right.shift()).abs() < 1e-10 * left.shift().abs());
    // opposite control detuning flips the bend
    let flipped = cell(0.2, 10.0);
    assert_eq!(flipped.direction, BendDirection::Right);
    assert!(flipped.shift() * left.shift() < 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn split_step_matches_factorized_propagator(a_lc in -0.2f64..0.2, length in 2.0f64..20.0) {
        let (_, m) = medium(-10.0);
        let grid = TransverseGrid::centered(1024, 16.0 * m.l_c).unwrap();
        let a = a_lc * m.l_c;
        let b = 0.2 * m.l_c;
        let eta = linearized_potential(a, &m);
        let numeric = propagate_probe(
            make_gaussian(grid, a, b).unwrap(),
            &ProbePotential::Linearized(eta),
            &m,
            length,
            default_probe_dz(&m),
            &PropagationOptions::default(),
        )
        .unwrap();
        let coeffs = probe_coefficients(eta.eta0, eta.eta1, m.k_p, m.c, length).unwrap();
        let exact = evolve_gaussian_analytic(&GaussianPacket::normalized(a, b).unwrap(), &coeffs, a)
            .unwrap()
            .sample(grid, length);
        prop_assert!(numeric.l2_distance(&exact.values) < 1e-6);
    }
}
