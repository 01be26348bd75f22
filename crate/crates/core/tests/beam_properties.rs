mod common;

use std::f64::consts::PI;

use beamcoupling::beam::{BeamElement, CrossSection, NodeState};
use beamcoupling::so3::exp_so3;
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn rigidly_moved(states: &[NodeState], q: &Matrix3<f64>, c: &Vector3<f64>) -> Vec<NodeState> {
    states
        .iter()
        .map(|s| NodeState::new(q * s.position + c, q * s.triad))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn residual_and_tangent_are_consistent(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let el = common::random_element(&mut rng);
        let states = common::random_states(&mut rng, &el, 0.1);
        let (r, k) = common::element_errors(&el, &states);
        prop_assert!(r < 1e-6 && k < 1e-5, "residual {r:.2e}, tangent {k:.2e}");
    }

    #[test]
    fn kinematic_maps_are_consistent(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let el = common::random_element(&mut rng);
        let states = common::random_states(&mut rng, &el, 0.1);
        let (h, hd) = common::h_map_errors(&mut rng, &el, &states);
        prop_assert!(h < 1e-6 && hd < 1e-5, "H {h:.2e}, HΔ {hd:.2e}");
    }

    #[test]
    fn strains_and_energy_are_objective(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let el = common::random_element(&mut rng);
        let states = common::random_states(&mut rng, &el, 0.1);
        let q = common::rotation(&mut rng);
        let moved = rigidly_moved(&states, &q, &common::vector(&mut rng, 5.0));
        for ((g, k), (gm, km)) in el.strains(&states).unwrap().iter().zip(el.strains(&moved).unwrap()) {
            prop_assert!((g - gm).amax() < 1e-10 && (k - km).amax() < 1e-10);
        }
        let (w, wm) = (el.elastic_energy(&states).unwrap(), el.elastic_energy(&moved).unwrap());
        prop_assert!((w - wm).abs() <= 1e-10 * w.abs().max(1e-12));
    }

    #[test]
    fn reference_state_is_stress_free(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let el = common::random_element(&mut rng);
        let reference = el.reference_states();
        prop_assert!(el.elastic_energy(&reference).unwrap().abs() < 1e-20);
        prop_assert!(el.internal_force(&reference).unwrap().amax() < 1e-12);
    }

    #[test]
    fn uniform_stretch_has_truss_energy(stretch in -0.2..0.2f64, length in 0.3..3.0f64, angle in 0.0..PI) {
        let section = CrossSection::circular(210.0, 0.3, 0.05);
        let triad = exp_so3(&Vector3::new(0.0, 0.0, angle));
        let dir = triad.column(0).into_owned();
        let el = BeamElement::new(vec![0, 1], vec![Vector3::zeros(), dir * length], vec![triad; 2], section).unwrap();
        let states = vec![NodeState::new(Vector3::zeros(), triad), NodeState::new(dir * length * (1.0 + stretch), triad)];
        let u = stretch * length;
        let exact = 0.5 * section.youngs_modulus * section.area * u * u / length;
        prop_assert!((el.elastic_energy(&states).unwrap() - exact).abs() <= 1e-12 * exact.max(1e-12));
    }
}
