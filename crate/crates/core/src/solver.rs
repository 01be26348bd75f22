//! Quasi-static Newton–Raphson solution with load stepping.

use nalgebra::{DVector, Vector3};

use crate::assembly::{assemble, energies, external_forces, reaction_from_residual, Energies};
use crate::linsolve::{solve, LinearSolver};
use crate::model::{DofMap, Model, State};
use crate::so3::exp_so3;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveSettings {
    pub load_steps: usize,
    /// Pseudo-time at the last step; step `n` is solved at `n·end_time/load_steps`.
    pub end_time: f64,
    /// Relative tolerance on the free mechanical residual, scaled by the
    /// larger of the external load and reaction norms, and absolute
    /// tolerance on the constraint rows. A nodal correction below
    /// `newton_tol` times the model size also counts as converged.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub step_cut_allowed: bool,
    pub max_step_cuts: usize,
    pub linear_solver: LinearSolver,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            load_steps: 10,
            end_time: 1.0,
            newton_tol: 1e-10,
            newton_max_iter: 30,
            step_cut_allowed: true,
            max_step_cuts: 4,
            linear_solver: LinearSolver::default(),
        }
    }
}

impl SolveSettings {
    pub fn validate(&self) -> Result<()> {
        if self.load_steps == 0
            || self.newton_max_iter == 0
            || !(self.newton_tol > 0.0 && self.newton_tol.is_finite())
            || !(self.end_time > 0.0 && self.end_time.is_finite())
        {
            return Err(Error::InvalidModel(format!(
                "invalid solve settings {self:?}"
            )));
        }
        Ok(())
    }
}

/// Converged state of one load step.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub state: State,
    pub energies: Energies,
    /// Reaction force per Dirichlet node, in the order of `model.dirichlet`.
    pub reactions: Vec<(usize, Vector3<f64>)>,
    pub iterations: usize,
    pub residual_norm: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SolutionHistory {
    pub steps: Vec<StepRecord>,
}

impl SolutionHistory {
    pub fn last(&self) -> Option<&StepRecord> {
        self.steps.last()
    }

    pub fn final_state(&self) -> Option<&State> {
        self.steps.last().map(|s| &s.state)
    }
}

/// Sets constrained positions and triads to their prescribed values at `t`.
pub fn apply_dirichlet(model: &Model, map: &DofMap, state: &mut State, t: f64) {
    for bc in &model.dirichlet {
        let node = &model.nodes[bc.node];
        let a = bc.amplitude.value(t);
        let s = &mut state.nodes[map.slot(bc.node)];
        for c in (0..3).filter(|&c| bc.mask[c]) {
            s.position[c] = node.position[c] + a * bc.displacement[c];
        }
        if bc.rotation_prescribed() {
            s.triad = exp_so3(&(bc.rotation * a)) * node.triad;
        }
    }
}

/// `Some(reduced index)` for free unknowns.
fn free_index(model: &Model, map: &DofMap) -> (Vec<Option<usize>>, usize) {
    let mut fixed = vec![false; map.total()];
    for bc in &model.dirichlet {
        for c in (0..6).filter(|&c| bc.mask[c]) {
            fixed[map.node_dof(bc.node, c)] = true;
        }
    }
    let mut n = 0;
    let index = fixed
        .iter()
        .map(|&f| {
            if f {
                None
            } else {
                n += 1;
                Some(n - 1)
            }
        })
        .collect();
    (index, n)
}

struct NewtonOutcome {
    iterations: usize,
    residual_norm: f64,
    residual: DVector<f64>,
}

fn newton(
    model: &Model,
    map: &DofMap,
    index: &[Option<usize>],
    n_free: usize,
    state: &mut State,
    t: f64,
    settings: &SolveSettings,
) -> Result<NewtonOutcome> {
    state.time = t;
    apply_dirichlet(model, map, state, t);
    let load_norm = external_forces(model, map, t).norm();
    let nodal = map.nodal_dofs();
    let mut last_norm = f64::NAN;
    let mut small_correction = false;
    for it in 0..=settings.newton_max_iter {
        let sys = assemble(model, state)?;
        let (mut free_sq, mut fixed_sq, mut gap_sq) = (0.0, 0.0, 0.0);
        for (d, r) in sys.residual.iter().enumerate() {
            if d >= nodal {
                gap_sq += r * r;
            } else if index[d].is_some() {
                free_sq += r * r;
            } else {
                fixed_sq += r * r;
            }
        }
        let scale = load_norm.max(fixed_sq.sqrt());
        let mech = free_sq.sqrt();
        last_norm = (free_sq + gap_sq).sqrt();
        if !last_norm.is_finite() {
            break;
        }
        let tol = if scale > 0.0 {
            settings.newton_tol * scale
        } else {
            settings.newton_tol
        };
        if it > 0 && (mech <= tol || small_correction) && gap_sq.sqrt() <= settings.newton_tol {
            return Ok(NewtonOutcome {
                iterations: it,
                residual_norm: last_norm,
                residual: sys.residual,
            });
        }
        if it == settings.newton_max_iter {
            break;
        }
        let k = sys.tangent.restrict(index, n_free);
        let mut rhs = DVector::zeros(n_free);
        for (d, i) in index.iter().enumerate() {
            if let Some(i) = i {
                rhs[*i] = -sys.residual[d];
            }
        }
        let dx = solve(&k, &rhs, settings.linear_solver)?;
        let mut delta = DVector::zeros(map.total());
        for (d, i) in index.iter().enumerate() {
            if let Some(i) = i {
                delta[d] = dx[*i];
            }
        }
        let length = state
            .nodes
            .iter()
            .map(|n| n.position.norm())
            .fold(1.0, f64::max);
        small_correction = (0..nodal).map(|d| delta[d] * delta[d]).sum::<f64>().sqrt()
            <= settings.newton_tol * length;
        state.apply_increment(map, &delta);
    }
    Err(Error::NotConverged {
        time: t,
        residual: last_norm,
        iterations: settings.newton_max_iter,
    })
}

#[allow(clippy::too_many_arguments)]
fn advance(
    model: &Model,
    map: &DofMap,
    index: &[Option<usize>],
    n_free: usize,
    state: &mut State,
    from: f64,
    to: f64,
    cuts: usize,
    settings: &SolveSettings,
) -> Result<NewtonOutcome> {
    let backup = state.clone();
    match newton(model, map, index, n_free, state, to, settings) {
        Ok(out) => Ok(out),
        Err(e)
            if settings.step_cut_allowed
                && cuts < settings.max_step_cuts
                && e.is_solver_failure() =>
        {
            *state = backup;
            let mid = 0.5 * (from + to);
            let first = advance(
                model,
                map,
                index,
                n_free,
                state,
                from,
                mid,
                cuts + 1,
                settings,
            )?;
            let second = advance(
                model,
                map,
                index,
                n_free,
                state,
                mid,
                to,
                cuts + 1,
                settings,
            )?;
            Ok(NewtonOutcome {
                iterations: first.iterations + second.iterations,
                ..second
            })
        }
        Err(e) => Err(e),
    }
}

/// Solves all load steps from the reference configuration.
pub fn newton_solve(model: &Model, settings: &SolveSettings) -> Result<SolutionHistory> {
    newton_solve_from(model, settings, State::reference(model))
}

/// Solves all load steps starting from `initial`.
pub fn newton_solve_from(
    model: &Model,
    settings: &SolveSettings,
    initial: State,
) -> Result<SolutionHistory> {
    settings.validate()?;
    model.validate()?;
    let map = model.dof_map();
    let (index, n_free) = free_index(model, &map);
    let mut state = initial;
    let mut history = SolutionHistory::default();
    let dt = settings.end_time / settings.load_steps as f64;
    for step in 1..=settings.load_steps {
        let (from, to) = ((step - 1) as f64 * dt, step as f64 * dt);
        let out = advance(
            model, &map, &index, n_free, &mut state, from, to, 0, settings,
        )?;
        let reactions = model
            .dirichlet
            .iter()
            .filter(|bc| bc.mask[..3].iter().any(|m| *m))
            .map(|bc| {
                Ok((
                    bc.node,
                    reaction_from_residual(model, &map, &out.residual, &[bc.node])?,
                ))
            })
            .collect::<Result<_>>()?;
        history.steps.push(StepRecord {
            step,
            time: to,
            energies: energies(model, &state)?,
            state: state.clone(),
            reactions,
            iterations: out.iterations,
            residual_norm: out.residual_norm,
        });
    }
    Ok(history)
}
