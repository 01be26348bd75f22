mod common;

use beamcoupling::assembly::{assemble, assemble_residual, external_forces, reaction_forces};
use beamcoupling::beam::CrossSection;
use beamcoupling::model::{Dirichlet, Load, Model, State};
use beamcoupling::scenarios::*;
use beamcoupling::solver::{newton_solve, SolveSettings};
use std::collections::HashSet;

use nalgebra::{DMatrix, Matrix3, Vector3};
use proptest::prelude::*;

const LENGTH: f64 = 2.0;

fn cantilever(elements: usize, order: usize, tip: Vector3<f64>) -> (Model, usize) {
    let mut model = Model::new();
    let n = elements * order;
    let nodes: Vec<usize> = (0..=n)
        .map(|k| {
            model.add_node(
                Vector3::x() * LENGTH * k as f64 / n as f64,
                Matrix3::identity(),
            )
        })
        .collect();
    let section = CrossSection::circular(210.0, 0.3, 0.05);
    for e in 0..elements {
        model
            .add_element(nodes[e * order..=(e + 1) * order].to_vec(), section, None)
            .unwrap();
    }
    model.dirichlet.push(Dirichlet::clamp(nodes[0]));
    model.loads.push(Load::new(nodes[n], tip, Vector3::zeros()));
    (model, nodes[n])
}

fn tip_displacement(model: &Model, tip: usize, settings: &SolveSettings) -> Vector3<f64> {
    let history = newton_solve(model, settings).unwrap();
    history.final_state().unwrap().nodes[tip].position - model.nodes[tip].position
}

/// Free rows: those without a Dirichlet condition.
fn free_mask(model: &Model) -> Vec<bool> {
    let map = model.dof_map();
    let mut free = vec![true; map.total()];
    for bc in &model.dirichlet {
        for (c, fixed) in bc.mask.iter().enumerate() {
            if *fixed {
                free[map.node_dof(bc.node, c)] = false;
            }
        }
    }
    free
}

fn free_norm(model: &Model, state: &State) -> f64 {
    let residual = assemble_residual(model, state).unwrap();
    residual
        .iter()
        .zip(free_mask(model))
        .filter(|(_, f)| *f)
        .map(|(r, _)| r * r)
        .sum::<f64>()
        .sqrt()
}

#[test]
fn axial_load_gives_truss_elongation() {
    let force = 1e-3;
    let (model, tip) = cantilever(4, 1, Vector3::x() * force);
    let u = tip_displacement(
        &model,
        tip,
        &SolveSettings {
            load_steps: 1,
            ..Default::default()
        },
    );
    let section = model.elements[0].section;
    let exact = force * LENGTH / (section.youngs_modulus * section.area);
    assert!((u.x - exact).abs() <= 1e-6 * exact, "{} vs {exact}", u.x);
    assert!(u.y.abs() + u.z.abs() < 1e-14);
}

#[test]
fn small_tip_load_matches_shear_deformable_cantilever() {
    let force = 1e-6;
    let (model, tip) = cantilever(8, 2, Vector3::z() * force);
    let u = tip_displacement(
        &model,
        tip,
        &SolveSettings {
            load_steps: 1,
            ..Default::default()
        },
    );
    let s = model.elements[0].section;
    let exact = force * LENGTH.powi(3) / (3.0 * s.youngs_modulus * s.inertia_2)
        + force * LENGTH / (s.shear_modulus * s.shear_area);
    assert!((u.z - exact).abs() <= 1e-4 * exact, "{} vs {exact}", u.z);
}

#[test]
fn zero_load_converges_immediately() {
    let (model, _) = cantilever(3, 2, Vector3::zeros());
    let history = newton_solve(
        &model,
        &SolveSettings {
            load_steps: 2,
            ..Default::default()
        },
    )
    .unwrap();
    for step in &history.steps {
        assert_eq!(step.iterations, 1);
        assert!(step.residual_norm < 1e-14);
    }
}

#[test]
fn reaction_balances_the_load() {
    let load = Vector3::new(1e-4, -3e-5, 2e-5);
    let (model, _) = cantilever(5, 1, load);
    let history = newton_solve(&model, &SolveSettings::default()).unwrap();
    let state = history.final_state().unwrap();
    let reaction = reaction_forces(&model, state, &[0]).unwrap();
    assert!((reaction + load).norm() < 1e-10 * load.norm().max(1.0));
    assert!(free_norm(&model, state) < 1e-10);
}

fn generated_models() -> Vec<(&'static str, ModelDocument)> {
    vec![
        (
            "l-shape lagrange",
            generate_l_shape_with(0.0, 4, Junction::lagrange()).unwrap(),
        ),
        (
            "l-shape offset penalty",
            generate_l_shape_with(2.0 * BEAM_RADIUS, 4, Junction::penalty(100.0)).unwrap(),
        ),
        (
            "l-shape nodal",
            generate_l_shape_with(0.0, 4, Junction::NodalConnection).unwrap(),
        ),
        (
            "l-shape connector",
            generate_l_shape_with(
                2.0 * BEAM_RADIUS,
                4,
                Junction::Connector {
                    stiffness_scale: 10.0,
                },
            )
            .unwrap(),
        ),
        ("crossed beams", generate_crossed_beams(5).unwrap()),
        (
            "cylinder",
            generate_wire_cylinder(&small_cylinder()).unwrap(),
        ),
    ]
}

fn small_cylinder() -> CylinderOptions {
    CylinderOptions {
        n_axi: 4,
        n_circ: 1,
        elems_per_ring: 16,
        elems_per_axial: 10,
        steps: 5,
        displacement: 0.02,
    }
}

#[test]
fn generated_models_are_stress_free_at_reference() {
    for (name, doc) in generated_models() {
        let model = doc.build().unwrap().model;
        let mut state = State::reference(&model);
        state.time = 0.0;
        let residual = assemble_residual(&model, &state).unwrap();
        assert!(residual.amax() < 1e-12, "{name}: {:.2e}", residual.amax());
    }
}

#[test]
fn lagrange_tangent_has_empty_multiplier_block() {
    let model = generate_l_shape_with(2.0 * BEAM_RADIUS, 3, Junction::lagrange())
        .unwrap()
        .build()
        .unwrap()
        .model;
    let state = common::random_model_state(&mut common::rng(3), &model, 0.05);
    let sys = assemble(&model, &state).unwrap();
    let k = sys.tangent.to_dense();
    let start = sys.map.nodal_dofs();
    assert!(sys.map.total() > start);
    assert_eq!(
        k.view(
            (start, start),
            (sys.map.total() - start, sys.map.total() - start)
        )
        .amax(),
        0.0
    );
}

#[test]
fn external_forces_follow_the_amplitude() {
    let (model, tip) = cantilever(2, 1, Vector3::new(1.0, 2.0, 3.0));
    let map = model.dof_map();
    let f = external_forces(&model, &map, 0.25);
    assert!((f[map.node_dof(tip, 2)] - 0.75).abs() < 1e-15);
}

fn free_block(model: &Model, k: &DMatrix<f64>) -> DMatrix<f64> {
    let free: Vec<usize> = free_mask(model)
        .iter()
        .enumerate()
        .filter(|(_, f)| **f)
        .map(|(i, _)| i)
        .collect();
    DMatrix::from_fn(free.len(), free.len(), |i, j| k[(free[i], free[j])])
}

#[test]
fn beam_tangent_is_symmetric_at_equilibrium() {
    let (model, _) = cantilever(6, 2, Vector3::new(-2e-6, 3e-6, 5e-6));
    let history = newton_solve(&model, &SolveSettings::default()).unwrap();
    let k = assemble(&model, history.final_state().unwrap())
        .unwrap()
        .tangent
        .to_dense();
    let kf = free_block(&model, &k);
    let asymmetry = (&kf - kf.transpose()).amax() / kf.amax();
    assert!(asymmetry < 1e-10, "{asymmetry:.2e}");
}

#[test]
fn lagrange_equilibrium_closes_gaps_with_structurally_symmetric_tangent() {
    for offset in [0.0, 2.0 * BEAM_RADIUS] {
        let doc = generate_l_shape_with(offset, 4, Junction::lagrange()).unwrap();
        let built = doc.build().unwrap();
        let history = newton_solve(&built.model, &built.settings).unwrap();
        let sys = assemble(&built.model, history.final_state().unwrap()).unwrap();
        let start = sys.map.nodal_dofs();
        let gaps = sys.residual.rows(start, sys.map.total() - start);
        assert!(gaps.amax() < 1e-10, "gap {:.2e}", gaps.amax());

        let pattern: HashSet<(usize, usize)> = sys
            .tangent
            .entries
            .iter()
            .map(|&(r, c, _)| (r, c))
            .collect();
        assert!(pattern.iter().all(|&(r, c)| pattern.contains(&(c, r))));
    }
}

#[test]
fn stiff_penalty_approaches_lagrange() {
    let lagrange =
        solve_document(&generate_l_shape_with(2.0 * BEAM_RADIUS, 4, Junction::lagrange()).unwrap())
            .unwrap()
            .tip();
    let penalty = solve_document(
        &generate_l_shape_with(2.0 * BEAM_RADIUS, 4, Junction::penalty(1e4)).unwrap(),
    )
    .unwrap()
    .tip();
    let err = (penalty - lagrange).norm() / lagrange.norm();
    assert!(err < 1e-5, "{err:.2e}");
}

#[test]
fn small_cylinder_reaches_equilibrium() {
    let options = small_cylinder();
    let doc = generate_wire_cylinder(&options).unwrap();
    let built = doc.build().unwrap();
    let model = &built.model;
    let history = newton_solve(model, &built.settings).unwrap();
    assert_eq!(history.steps.len(), options.steps);
    let state = history.final_state().unwrap();
    let scale = external_forces(model, &model.dof_map(), state.time).norm()
        + history
            .last()
            .unwrap()
            .reactions
            .iter()
            .map(|(_, r)| r.norm())
            .sum::<f64>();
    assert!(free_norm(model, state) <= 1e-8 * scale.max(1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn global_tangent_matches_finite_differences(seed in any::<u64>(), lagrange in any::<bool>()) {
        let junction = if lagrange { Junction::lagrange() } else { Junction::penalty(100.0) };
        let model = generate_l_shape_with(2.0 * BEAM_RADIUS, 2, junction).unwrap().build().unwrap().model;
        let state = common::random_model_state(&mut common::rng(seed), &model, 0.05);
        let err = common::global_tangent_error(&model, &state);
        prop_assert!(err < 1e-5, "{err:.2e}");
    }
}
