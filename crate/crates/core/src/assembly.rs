//! Assembly of the global residual and tangent.
//!
//! The residual is `f_int + Σ Hᵀ f_coupling − f_ext` on the nodal rows and the
//! gaps `(g_r; g_θ)` on the multiplier rows of Lagrange pairs.

use nalgebra::{DMatrix, DVector, SMatrix, Vector3, Vector6};
use rayon::prelude::*;

use crate::beam::NODE_DOFS;
use crate::coupling::{
    coupling_blocks_positional, coupling_blocks_rotational, generalized_deformation,
    penalty_energy, Enforcement,
};
use crate::linsolve::TripletMatrix;
use crate::model::{DofMap, Model, State};
use crate::{Error, Result};

type Matrix6 = SMatrix<f64, 6, 6>;

#[derive(Clone, Debug)]
pub struct GlobalSystem {
    pub residual: DVector<f64>,
    pub tangent: TripletMatrix,
    pub map: DofMap,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Energies {
    pub internal: f64,
    pub penalty: f64,
}

impl Energies {
    pub fn total(&self) -> f64 {
        self.internal + self.penalty
    }
}

/// Contributions of one element or coupling pair.
#[derive(Default)]
struct LocalContribution {
    residual: Vec<(usize, f64)>,
    tangent: Vec<(usize, usize, f64)>,
}

impl LocalContribution {
    fn add_vector(&mut self, dofs: &[usize], v: &DVector<f64>) {
        self.residual
            .extend(dofs.iter().zip(v.iter()).map(|(&d, &x)| (d, x)));
    }

    fn add_matrix(&mut self, rows: &[usize], cols: &[usize], m: &DMatrix<f64>) {
        for (j, &c) in cols.iter().enumerate() {
            for (i, &r) in rows.iter().enumerate() {
                self.tangent.push((r, c, m[(i, j)]));
            }
        }
    }
}

fn element_dofs(map: &DofMap, node_ids: &[usize]) -> Vec<usize> {
    node_ids
        .iter()
        .flat_map(|&n| (0..NODE_DOFS).map(move |c| map.node_dof(n, c)))
        .collect()
}

fn to_dynamic<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_fn(R, C, |i, j| m[(i, j)])
}

/// Nodal load vector at time `t` (length `map.total()`).
pub fn external_forces(model: &Model, map: &DofMap, t: f64) -> DVector<f64> {
    let mut f = DVector::zeros(map.total());
    for load in &model.loads {
        let (force, moment) = load.at(t);
        for c in 0..3 {
            f[map.node_dof(load.node, c)] += force[c];
            f[map.node_dof(load.node, 3 + c)] += moment[c];
        }
    }
    f
}

fn coupling_contribution(
    model: &Model,
    map: &DofMap,
    state: &State,
    pair_id: usize,
    with_tangent: bool,
) -> Result<LocalContribution> {
    let pair = &model.couplings[pair_id];
    let el_a = &model.elements[pair.side_a.element];
    let el_b = &model.elements[pair.side_b.element];
    let states_a = state.element_states(map, el_a);
    let states_b = state.element_states(map, el_b);
    let cs_a = el_a.evaluate_cross_section(&states_a, pair.side_a.xi)?;
    let cs_b = el_b.evaluate_cross_section(&states_b, pair.side_b.xi)?;
    let maps_a = el_a.kinematic_maps(&states_a, pair.side_a.xi)?;
    let maps_b = el_b.kinematic_maps(&states_b, pair.side_b.xi)?;
    let dofs_a = element_dofs(map, &el_a.node_ids);
    let dofs_b = element_dofs(map, &el_b.node_ids);

    let gap = generalized_deformation(&cs_a, &cs_b, &pair.reference)?;
    let (lambda_r, lambda_t) = match pair.enforcement {
        Enforcement::Lagrange => (
            state.multipliers[pair_id].force,
            state.multipliers[pair_id].moment,
        ),
        Enforcement::Penalty {
            positional,
            rotational,
        } => (gap.positional * positional, gap.rotational * rotational),
    };
    let pos = coupling_blocks_positional(&cs_a, &cs_b, &pair.reference, &lambda_r);
    let rot = coupling_blocks_rotational(&cs_a, &cs_b, &pair.reference, &lambda_t)?;
    let f_a: Vector6<f64> = pos.q1_lambda * lambda_r + rot.q1_lambda * lambda_t;
    let f_b: Vector6<f64> = pos.q2_lambda * lambda_r + rot.q2_lambda * lambda_t;

    let h_a = &maps_a.h;
    let h_b = &maps_b.h;
    let mut out = LocalContribution::default();
    out.add_vector(
        &dofs_a,
        &(h_a.transpose() * DVector::from_column_slice(f_a.as_slice())),
    );
    out.add_vector(
        &dofs_b,
        &(h_b.transpose() * DVector::from_column_slice(f_b.as_slice())),
    );
    let multiplier_dofs: Option<Vec<usize>> = map.multiplier(pair_id).map(|o| (o..o + 6).collect());
    if let Some(ld) = &multiplier_dofs {
        out.add_vector(ld, &DVector::from_column_slice(gap.as_vector().as_slice()));
    }
    if !with_tangent {
        return Ok(out);
    }

    let q_lambda = |p: &SMatrix<f64, 6, 3>, r: &SMatrix<f64, 6, 3>| {
        let mut m = Matrix6::zeros();
        m.fixed_view_mut::<6, 3>(0, 0).copy_from(p);
        m.fixed_view_mut::<6, 3>(0, 3).copy_from(r);
        m
    };
    let lambda_q = |p: &SMatrix<f64, 3, 6>, r: &SMatrix<f64, 3, 6>| {
        let mut m = Matrix6::zeros();
        m.fixed_view_mut::<3, 6>(0, 0).copy_from(p);
        m.fixed_view_mut::<3, 6>(3, 0).copy_from(r);
        m
    };
    let c_a_lambda = q_lambda(&pos.q1_lambda, &rot.q1_lambda);
    let c_b_lambda = q_lambda(&pos.q2_lambda, &rot.q2_lambda);
    let c_lambda_a = lambda_q(&pos.lambda_q1, &rot.lambda_q1);
    let c_lambda_b = lambda_q(&pos.lambda_q2, &rot.lambda_q2);

    let mut k_aa =
        h_a.transpose() * to_dynamic(&(pos.q1q1 + rot.q1q1)) * h_a + maps_a.h_delta(&f_a);
    let mut k_ab = h_a.transpose() * to_dynamic(&(pos.q1q2 + rot.q1q2)) * h_b;
    let mut k_ba = h_b.transpose() * to_dynamic(&(pos.q2q1 + rot.q2q1)) * h_a;
    let mut k_bb =
        h_b.transpose() * to_dynamic(&(pos.q2q2 + rot.q2q2)) * h_b + maps_b.h_delta(&f_b);
    match (pair.enforcement, &multiplier_dofs) {
        (
            Enforcement::Penalty {
                positional,
                rotational,
            },
            _,
        ) => {
            let eps = Matrix6::from_diagonal(&Vector6::new(
                positional, positional, positional, rotational, rotational, rotational,
            ));
            let ga = to_dynamic(&(eps * c_lambda_a)) * h_a;
            let gb = to_dynamic(&(eps * c_lambda_b)) * h_b;
            let fa = h_a.transpose() * to_dynamic(&c_a_lambda);
            let fb = h_b.transpose() * to_dynamic(&c_b_lambda);
            k_aa += &fa * &ga;
            k_ab += &fa * &gb;
            k_ba += &fb * &ga;
            k_bb += &fb * &gb;
        }
        (Enforcement::Lagrange, Some(ld)) => {
            out.add_matrix(&dofs_a, ld, &(h_a.transpose() * to_dynamic(&c_a_lambda)));
            out.add_matrix(&dofs_b, ld, &(h_b.transpose() * to_dynamic(&c_b_lambda)));
            out.add_matrix(ld, &dofs_a, &(to_dynamic(&c_lambda_a) * h_a));
            out.add_matrix(ld, &dofs_b, &(to_dynamic(&c_lambda_b) * h_b));
        }
        (Enforcement::Lagrange, None) => unreachable!("Lagrange pair without multipliers"),
    }
    out.add_matrix(&dofs_a, &dofs_a, &k_aa);
    out.add_matrix(&dofs_a, &dofs_b, &k_ab);
    out.add_matrix(&dofs_b, &dofs_a, &k_ba);
    out.add_matrix(&dofs_b, &dofs_b, &k_bb);
    Ok(out)
}

fn assemble_impl(model: &Model, state: &State, with_tangent: bool) -> Result<GlobalSystem> {
    let map = model.dof_map();
    if state.nodes.len() != map.slots() || state.multipliers.len() != model.couplings.len() {
        return Err(Error::StateCount {
            expected: map.slots(),
            got: state.nodes.len(),
        });
    }
    let element_parts: Vec<LocalContribution> = model
        .elements
        .par_iter()
        .map(|el| -> Result<LocalContribution> {
            let states = state.element_states(&map, el);
            let dofs = element_dofs(&map, &el.node_ids);
            let mut out = LocalContribution::default();
            if with_tangent {
                let (r, k) = el.internal_force_and_tangent(&states)?;
                out.add_vector(&dofs, &r);
                out.add_matrix(&dofs, &dofs, &k);
            } else {
                out.add_vector(&dofs, &el.internal_force(&states)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let coupling_parts: Vec<LocalContribution> = (0..model.couplings.len())
        .into_par_iter()
        .map(|p| coupling_contribution(model, &map, state, p, with_tangent))
        .collect::<Result<_>>()?;

    let mut residual = -external_forces(model, &map, state.time);
    let mut tangent = TripletMatrix::new(map.total());
    for part in element_parts.into_iter().chain(coupling_parts) {
        for (d, v) in part.residual {
            residual[d] += v;
        }
        tangent.entries.extend(part.tangent);
    }
    Ok(GlobalSystem {
        residual,
        tangent,
        map,
    })
}

/// Residual and tangent at `state` (loads evaluated at `state.time`).
pub fn assemble(model: &Model, state: &State) -> Result<GlobalSystem> {
    assemble_impl(model, state, true)
}

pub fn assemble_residual(model: &Model, state: &State) -> Result<DVector<f64>> {
    Ok(assemble_impl(model, state, false)?.residual)
}

pub fn energies(model: &Model, state: &State) -> Result<Energies> {
    let map = model.dof_map();
    let internal = model
        .elements
        .par_iter()
        .map(|el| el.elastic_energy(&state.element_states(&map, el)))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    let mut penalty = 0.0;
    for pair in &model.couplings {
        if let Enforcement::Penalty {
            positional,
            rotational,
        } = pair.enforcement
        {
            let a = state.cross_section(model, &map, &pair.side_a)?;
            let b = state.cross_section(model, &map, &pair.side_b)?;
            let gap = generalized_deformation(&a, &b, &pair.reference)?;
            penalty += penalty_energy(&gap, positional, rotational);
        }
    }
    Ok(Energies { internal, penalty })
}

/// Sum of reaction forces over constrained translations of `nodes`.
pub fn reaction_forces(model: &Model, state: &State, nodes: &[usize]) -> Result<Vector3<f64>> {
    let residual = assemble_residual(model, state)?;
    reaction_from_residual(model, &model.dof_map(), &residual, nodes)
}

pub(crate) fn reaction_from_residual(
    model: &Model,
    map: &DofMap,
    residual: &DVector<f64>,
    nodes: &[usize],
) -> Result<Vector3<f64>> {
    let mut total = Vector3::zeros();
    for &node in nodes {
        let bc = model
            .dirichlet
            .iter()
            .find(|d| d.node == node && d.mask[..3].iter().any(|m| *m))
            .ok_or(Error::NotConstrained(node))?;
        for c in (0..3).filter(|&c| bc.mask[c]) {
            total[c] += residual[map.node_dof(node, c)];
        }
    }
    Ok(total)
}
