//! Random samples and finite-difference oracles shared by the test targets.
#![allow(dead_code)]

use std::f64::consts::PI;

use beamcoupling::assembly::{assemble, assemble_residual};
use beamcoupling::beam::{BeamElement, CrossSection, CrossSectionState, NodeState, NODE_DOFS};
use beamcoupling::coupling::{
    coupling_blocks_positional, coupling_blocks_rotational, gap_jacobian_fd, positional_gap,
    rotational_gap, CouplingReference,
};
use beamcoupling::model::{Model, State};
use beamcoupling::so3::{exp_so3, log_so3, skew, tangent_map};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vector(rng: &mut impl Rng, scale: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.random_range(-scale..scale))
}

pub fn unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = vector(rng, 1.0);
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Rotation vector with angle uniform in `(0, max_angle)`.
pub fn rotation_vector(rng: &mut impl Rng, max_angle: f64) -> Vector3<f64> {
    unit_vector(rng) * rng.random_range(1e-9..max_angle)
}

pub fn rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    exp_so3(&rotation_vector(rng, PI))
}

pub fn cross_section(rng: &mut impl Rng) -> CrossSectionState {
    CrossSectionState {
        position: vector(rng, 2.0),
        triad: rotation(rng),
    }
}

/// Section moved by a moderate deformation.
pub fn deformed(rng: &mut impl Rng, s: &CrossSectionState) -> CrossSectionState {
    CrossSectionState {
        position: s.position + vector(rng, 0.3),
        triad: exp_so3(&rotation_vector(rng, 1.0)) * s.triad,
    }
}

pub fn relative(a: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        a / scale
    } else {
        a
    }
}

pub fn relative_matrix_error(approx: &DMatrix<f64>, exact: &DMatrix<f64>) -> f64 {
    relative((approx - exact).norm(), exact.norm())
}

/// Transport and inversion identities of the rotation maps, as absolute errors.
pub fn identity_errors(rng: &mut impl Rng) -> [f64; 4] {
    let q = rotation(rng);
    let psi = rotation_vector(rng, PI);
    let v = vector(rng, 3.0);
    let t = (q * tangent_map(&psi) * q.transpose() - tangent_map(&(q * psi))).amax();
    let s = (q * skew(&v) * q.transpose() - skew(&(q * v))).amax();
    let lambda = exp_so3(&psi);
    let inverse = (log_so3(&lambda) + log_so3(&lambda.transpose())).amax();
    let transport = (log_so3(&(q * lambda * q.transpose())) - q * log_so3(&lambda)).amax();
    [t, s, inverse, transport]
}

pub fn round_trip_error(rng: &mut impl Rng) -> f64 {
    let psi = rotation_vector(rng, PI - 1e-6);
    (log_so3(&exp_so3(&psi)) - psi).amax()
}

/// Gap norms at a random reference and antisymmetry defects at a deformed
/// state (positional, rotational).
pub fn reference_and_symmetry_errors(rng: &mut impl Rng) -> (f64, f64) {
    let r1 = cross_section(rng);
    let r2 = cross_section(rng);
    let reference = CouplingReference::new(&r1, &r2);
    let at_reference = positional_gap(&r1, &r2, &reference).norm()
        + rotational_gap(&r1, &r2, &reference).map_or(f64::INFINITY, |g| g.norm());
    let (c1, c2) = (deformed(rng, &r1), deformed(rng, &r2));
    let swapped = reference.swapped();
    let pos = (positional_gap(&c1, &c2, &reference) + positional_gap(&c2, &c1, &swapped)).norm();
    let rot = match (
        rotational_gap(&c1, &c2, &reference),
        rotational_gap(&c2, &c1, &swapped),
    ) {
        (Ok(a), Ok(b)) => (a + b).norm(),
        _ => 0.0,
    };
    (at_reference, pos.max(rot))
}

pub fn section() -> CrossSection {
    CrossSection::circular(210.0, 0.3, 0.05)
}

/// Element of random order over a random, mildly curved stress-free shape.
pub fn random_element(rng: &mut impl Rng) -> BeamElement {
    let order = rng.random_range(1..=3usize);
    let n = order + 1;
    let start = vector(rng, 1.0);
    let dir = unit_vector(rng) * rng.random_range(0.5..2.0);
    let positions: Vec<Vector3<f64>> = (0..n)
        .map(|k| start + dir * (k as f64 / order as f64) + vector(rng, 0.05))
        .collect();
    let base = rotation(rng);
    let triads = (0..n)
        .map(|_| exp_so3(&rotation_vector(rng, 0.3)) * base)
        .collect();
    BeamElement::new((0..n).collect(), positions, triads, section()).expect("valid element")
}

pub fn random_states(rng: &mut impl Rng, el: &BeamElement, amplitude: f64) -> Vec<NodeState> {
    let mut states = el.reference_states();
    let q = exp_so3(&rotation_vector(rng, PI));
    for s in &mut states {
        s.position = q * s.position;
        s.triad = q * s.triad;
        s.apply_increment(&vector(rng, amplitude), &vector(rng, amplitude));
    }
    states
}

fn perturbed(states: &[NodeState], dof: usize, h: f64) -> Vec<NodeState> {
    let mut out = states.to_vec();
    let mut d = Vector6::zeros();
    d[dof % NODE_DOFS] = h;
    out[dof / NODE_DOFS]
        .apply_increment(&d.fixed_rows::<3>(0).into(), &d.fixed_rows::<3>(3).into());
    out
}

/// `(residual vs energy gradient, tangent vs residual derivative)`.
pub fn element_errors(el: &BeamElement, states: &[NodeState]) -> (f64, f64) {
    let (r, k) = el
        .internal_force_and_tangent(states)
        .expect("element evaluates");
    let n = el.dofs();
    let mut grad = DVector::zeros(n);
    let mut k_fd = DMatrix::zeros(n, n);
    for d in 0..n {
        let (p, m) = (
            perturbed(states, d, FD_STEP),
            perturbed(states, d, -FD_STEP),
        );
        grad[d] =
            (el.elastic_energy(&p).unwrap() - el.elastic_energy(&m).unwrap()) / (2.0 * FD_STEP);
        let col =
            (el.internal_force(&p).unwrap() - el.internal_force(&m).unwrap()) / (2.0 * FD_STEP);
        k_fd.set_column(d, &col);
    }
    (
        relative((grad - &r).norm(), r.norm()),
        relative_matrix_error(&k_fd, &k),
    )
}

/// `(H vs section derivative, HΔ vs derivative of Hᵀf)` at a random site.
pub fn h_map_errors(rng: &mut impl Rng, el: &BeamElement, states: &[NodeState]) -> (f64, f64) {
    let xi = rng.random_range(-1.0..1.0);
    let maps = el.kinematic_maps(states, xi).unwrap();
    let f = Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let n = el.dofs();
    let mut h_fd = DMatrix::zeros(6, n);
    let mut hd_fd = DMatrix::zeros(n, n);
    let fv = DVector::from_column_slice(f.as_slice());
    for d in 0..n {
        let (p, m) = (
            perturbed(states, d, FD_STEP),
            perturbed(states, d, -FD_STEP),
        );
        let (sp, sm) = (
            el.evaluate_cross_section(&p, xi).unwrap(),
            el.evaluate_cross_section(&m, xi).unwrap(),
        );
        let dr = (sp.position - sm.position) / (2.0 * FD_STEP);
        let spin = log_so3(&(sp.triad * sm.triad.transpose())) / (2.0 * FD_STEP);
        for r in 0..3 {
            h_fd[(r, d)] = dr[r];
            h_fd[(3 + r, d)] = spin[r];
        }
        let hp = el.kinematic_maps(&p, xi).unwrap().h.transpose() * &fv;
        let hm = el.kinematic_maps(&m, xi).unwrap().h.transpose() * &fv;
        hd_fd.set_column(d, &((hp - hm) / (2.0 * FD_STEP)));
    }
    let hd = maps.h_delta(&f);
    (
        relative_matrix_error(&h_fd, &maps.h),
        relative_matrix_error(&hd_fd, &hd),
    )
}

fn perturb_section(s: &CrossSectionState, dof: usize, h: f64) -> CrossSectionState {
    let mut out = *s;
    if dof < 3 {
        out.position[dof] += h;
    } else {
        let mut v = Vector3::zeros();
        v[dof - 3] = h;
        out.triad = exp_so3(&v) * out.triad;
    }
    out
}

/// Largest relative error over the gap linearization and the force
/// linearization blocks of both constraint types.
pub fn coupling_block_error(rng: &mut impl Rng) -> f64 {
    let (r1, r2) = (cross_section(rng), cross_section(rng));
    let reference = CouplingReference::new(&r1, &r2);
    let (c1, c2) = (deformed(rng, &r1), deformed(rng, &r2));
    let lr = vector(rng, 1.0);
    let lt = vector(rng, 1.0);
    let pos = coupling_blocks_positional(&c1, &c2, &reference, &lr);
    let rot = coupling_blocks_rotational(&c1, &c2, &reference, &lt).unwrap();
    let (j1, j2) = gap_jacobian_fd(&c1, &c2, &reference, FD_STEP).unwrap();
    let mut exact_gap = DMatrix::zeros(6, 12);
    let mut fd_gap = DMatrix::zeros(6, 12);
    exact_gap.view_mut((0, 0), (3, 6)).copy_from(&pos.lambda_q1);
    exact_gap.view_mut((0, 6), (3, 6)).copy_from(&pos.lambda_q2);
    exact_gap.view_mut((3, 0), (3, 6)).copy_from(&rot.lambda_q1);
    exact_gap.view_mut((3, 6), (3, 6)).copy_from(&rot.lambda_q2);
    fd_gap.view_mut((0, 0), (6, 6)).copy_from(&j1);
    fd_gap.view_mut((0, 6), (6, 6)).copy_from(&j2);

    // forces f = Cqλ λ at fixed multipliers, differentiated per side
    let forces = |a: &CrossSectionState, b: &CrossSectionState| {
        let p = coupling_blocks_positional(a, b, &reference, &lr);
        let r = coupling_blocks_rotational(a, b, &reference, &lt).unwrap();
        let mut f = DVector::zeros(12);
        f.rows_mut(0, 6)
            .copy_from(&(p.q1_lambda * lr + r.q1_lambda * lt));
        f.rows_mut(6, 6)
            .copy_from(&(p.q2_lambda * lr + r.q2_lambda * lt));
        f
    };
    let mut fd_force = DMatrix::zeros(12, 12);
    for d in 0..12 {
        let (a_p, b_p, a_m, b_m) = if d < 6 {
            (
                perturb_section(&c1, d, FD_STEP),
                c2,
                perturb_section(&c1, d, -FD_STEP),
                c2,
            )
        } else {
            (
                c1,
                perturb_section(&c2, d - 6, FD_STEP),
                c1,
                perturb_section(&c2, d - 6, -FD_STEP),
            )
        };
        fd_force.set_column(
            d,
            &((forces(&a_p, &b_p) - forces(&a_m, &b_m)) / (2.0 * FD_STEP)),
        );
    }
    let mut exact_force = DMatrix::zeros(12, 12);
    for (i, j, m) in [
        (0, 0, pos.q1q1 + rot.q1q1),
        (0, 6, pos.q1q2 + rot.q1q2),
        (6, 0, pos.q2q1 + rot.q2q1),
        (6, 6, pos.q2q2 + rot.q2q2),
    ] {
        exact_force.view_mut((i, j), (6, 6)).copy_from(&m);
    }
    relative_matrix_error(&fd_gap, &exact_gap).max(relative_matrix_error(&fd_force, &exact_force))
}

/// Admissible random state: perturbed nodes and random multipliers.
pub fn random_model_state(rng: &mut impl Rng, model: &Model, amplitude: f64) -> State {
    let mut state = State::reference(model);
    let map = model.dof_map();
    let mut delta = DVector::zeros(map.total());
    for d in 0..map.nodal_dofs() {
        delta[d] = rng.random_range(-amplitude..amplitude);
    }
    state.apply_increment(&map, &delta);
    for m in &mut state.multipliers {
        m.force = vector(rng, 1e-3);
        m.moment = vector(rng, 1e-4);
    }
    state.time = rng.random_range(0.0..1.0);
    state
}

/// Assembled tangent against central differences of the assembled residual.
pub fn global_tangent_error(model: &Model, state: &State) -> f64 {
    let sys = assemble(model, state).unwrap();
    let k = sys.tangent.to_dense();
    let map = &sys.map;
    let n = map.total();
    let mut k_fd = DMatrix::zeros(n, n);
    for d in 0..n {
        let eval = |h: f64| {
            let mut s = state.clone();
            let mut delta = DVector::zeros(n);
            delta[d] = h;
            s.apply_increment(map, &delta);
            assemble_residual(model, &s).unwrap()
        };
        k_fd.set_column(d, &((eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP)));
    }
    relative_matrix_error(&k_fd, &k)
}
