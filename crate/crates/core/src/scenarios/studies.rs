//! Study drivers and their CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;

use super::document::{EnforcementKind, ModelDocument};
use super::generators::{
    add_rigid_rotation, generate_crossed_beams_with, generate_l_shape_with, generate_wire_cylinder,
    CrossedBeamsOptions, CylinderOptions, Junction,
};
use crate::solver::{newton_solve, SolutionHistory};
use crate::{Error, Result};

/// Solved document with the positions of its monitored nodes.
#[derive(Clone, Debug)]
pub struct Solution {
    pub history: SolutionHistory,
    /// Final positions of `outputs.monitor`, in that order.
    pub monitor: Vec<Vector3<f64>>,
    /// Per step, the summed reaction over `outputs.reaction_nodes`.
    pub reactions: Vec<Vector3<f64>>,
}

impl Solution {
    pub fn tip(&self) -> Vector3<f64> {
        self.monitor[0]
    }
}

pub fn solve_document(doc: &ModelDocument) -> Result<Solution> {
    let built = doc.build()?;
    let history = newton_solve(&built.model, &built.settings)?;
    let map = built.model.dof_map();
    let state = history.final_state().expect("at least one load step");
    let monitor = built
        .monitor
        .iter()
        .map(|&n| state.node(&map, n).position)
        .collect();
    let reactions = history
        .steps
        .iter()
        .map(|s| {
            s.reactions
                .iter()
                .filter(|(n, _)| built.reaction_nodes.contains(n))
                .map(|(_, r)| *r)
                .sum()
        })
        .collect();
    Ok(Solution {
        history,
        monitor,
        reactions,
    })
}

fn relative_error(x: &Vector3<f64>, reference: &Vector3<f64>) -> f64 {
    (x - reference).norm() / reference.norm()
}

fn csv_number(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".to_string(), |v| format!("{v:e}"))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Table `step,time,node,x,y,z` of the monitored nodes of a solved document.
pub fn positions_csv(doc: &ModelDocument, solution: &Solution) -> String {
    let mut out = String::from("step,time,node,x,y,z\n");
    let Ok(built) = doc.build() else { return out };
    let map = built.model.dof_map();
    for rec in &solution.history.steps {
        for (&id, &n) in doc.outputs.monitor.iter().zip(&built.monitor) {
            let p = rec.state.node(&map, n).position;
            let _ = writeln!(
                out,
                "{},{:e},{},{:e},{:e},{:e}",
                rec.step, rec.time, id, p.x, p.y, p.z
            );
        }
    }
    out
}

/// One solve of a parameter study; `None` where the solver failed.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub parameter: f64,
    pub position: Option<Vector3<f64>>,
    pub error: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub reference: Vector3<f64>,
    pub rows: Vec<SweepRow>,
}

impl Sweep {
    pub fn errors(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.error).collect()
    }

    /// Table `lambda,rx,ry,rz,err`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,rx,ry,rz,err\n");
        for r in &self.rows {
            let p = r.position;
            let _ = writeln!(
                out,
                "{:e},{},{},{},{}",
                r.parameter,
                csv_number(p.map(|p| p.x)),
                csv_number(p.map(|p| p.y)),
                csv_number(p.map(|p| p.z)),
                csv_number(r.error)
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_csv())
    }
}

fn sweep_rows(
    reference: &Vector3<f64>,
    parameters: &[f64],
    doc_for: impl Fn(f64) -> Result<ModelDocument> + Sync,
) -> Result<Vec<SweepRow>> {
    parameters
        .par_iter()
        .map(|&parameter| {
            let outcome = doc_for(parameter)?;
            Ok(match solve_document(&outcome) {
                Ok(sol) => SweepRow {
                    parameter,
                    position: Some(sol.tip()),
                    error: Some(relative_error(&sol.tip(), reference)),
                    failure: None,
                },
                Err(e) if e.is_solver_failure() => SweepRow {
                    parameter,
                    position: None,
                    error: None,
                    failure: Some(e.to_string()),
                },
                Err(e) => return Err(e),
            })
        })
        .collect()
}

/// Solves `doc` with Lagrange couplings once, then with penalty couplings
/// of every scale, comparing the first monitored node.
pub fn run_penalty_sweep(doc: &ModelDocument, scales: &[f64]) -> Result<Sweep> {
    let mut lagrange = doc.clone();
    lagrange.set_enforcement(EnforcementKind::Lagrange, None);
    let reference = solve_document(&lagrange)?.tip();
    let rows = sweep_rows(&reference, scales, |scale| {
        let mut d = doc.clone();
        d.set_enforcement(EnforcementKind::Penalty, Some(scale));
        Ok(d)
    })?;
    Ok(Sweep { reference, rows })
}

/// L-shape joined by a connector element of every stiffness scale, compared
/// with the Lagrange-coupled L-shape.
pub fn run_connector_sweep(
    offset: f64,
    elements: usize,
    stiffness_scales: &[f64],
) -> Result<Sweep> {
    let lagrange = generate_l_shape_with(offset, elements, Junction::lagrange())?;
    let reference = solve_document(&lagrange)?.tip();
    let rows = sweep_rows(&reference, stiffness_scales, |stiffness_scale| {
        generate_l_shape_with(offset, elements, Junction::Connector { stiffness_scale })
    })?;
    Ok(Sweep { reference, rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: usize) -> Self {
        if n.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub elements: usize,
    pub parity: Parity,
    pub error: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub reference_elements: usize,
    pub reference: Vector3<f64>,
    pub rows: Vec<ConvergenceRow>,
    /// Log–log slope of error against element size, per parity.
    pub slope_even: Option<f64>,
    pub slope_odd: Option<f64>,
}

impl ConvergenceStudy {
    /// Table `n_e,parity,e_rel`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_e,parity,e_rel\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{}",
                r.elements,
                r.parity.as_str(),
                csv_number(r.error)
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_csv())
    }
}

/// Meshes `2^k` and `2^k + 1` for `k = 1..=max_k`, in increasing order.
pub fn convergence_meshes(max_k: u32) -> Vec<usize> {
    (1..=max_k)
        .flat_map(|k| [1usize << k, (1usize << k) + 1])
        .collect()
}

/// Least-squares slope of `log y` over `log x`; `None` below two points.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Crossed-beams tip error of every mesh against a reference mesh.
///
/// Rows at the reference mesh itself have zero error and are left out of
/// the slope fits.
pub fn run_convergence_study(
    elements: &[usize],
    reference_elements: usize,
    enforcement: EnforcementKind,
    penalty_scale: Option<f64>,
) -> Result<ConvergenceStudy> {
    if elements.iter().any(|&n| n == 0 || n > reference_elements) {
        return Err(Error::InvalidModel(
            "reference mesh must be at least as fine as every study mesh".into(),
        ));
    }
    let doc_for = |n| {
        generate_crossed_beams_with(&CrossedBeamsOptions {
            elements: n,
            enforcement,
            penalty_scale,
        })
    };
    let reference = solve_document(&doc_for(reference_elements)?)?.tip();
    let rows: Vec<ConvergenceRow> = elements
        .par_iter()
        .map(|&n| {
            let parity = Parity::of(n);
            Ok(match solve_document(&doc_for(n)?) {
                Ok(sol) => ConvergenceRow {
                    elements: n,
                    parity,
                    error: Some(relative_error(&sol.tip(), &reference)),
                    failure: None,
                },
                Err(e) if e.is_solver_failure() => ConvergenceRow {
                    elements: n,
                    parity,
                    error: None,
                    failure: Some(e.to_string()),
                },
                Err(e) => return Err(e),
            })
        })
        .collect::<Result<_>>()?;
    let slope = |parity| {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.parity == parity)
            .filter_map(|r| r.error.map(|e| (1.0 / r.elements as f64, e)))
            .collect();
        log_log_slope(&pts)
    };
    Ok(ConvergenceStudy {
        reference_elements,
        reference,
        slope_even: slope(Parity::Even),
        slope_odd: slope(Parity::Odd),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRow {
    pub step: usize,
    pub time: f64,
    pub internal: f64,
    pub penalty: f64,
}

impl EnergyRow {
    pub fn total(&self) -> f64 {
        self.internal + self.penalty
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectivityResult {
    pub rows: Vec<EnergyRow>,
    pub load_steps: usize,
    /// Largest `|E − E₀| / E₀` over the rotation phase, `E₀` at its start.
    pub energy_variation: f64,
    /// Largest nodal position change between rotation start and end.
    pub return_error: f64,
}

impl ObjectivityResult {
    /// Table `step,time,internal_energy,penalty_energy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,time,internal_energy,penalty_energy\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e}",
                r.step, r.time, r.internal, r.penalty
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_csv())
    }
}

/// Loads `doc`, then rotates its clamp by `2π` about e₁ in `rotation_steps`
/// increments with co-rotating loads.
pub fn run_objectivity_test(
    doc: &ModelDocument,
    rotation_steps: usize,
) -> Result<ObjectivityResult> {
    let load_steps = doc.solve.load_steps;
    let mut rotated = doc.clone();
    add_rigid_rotation(&mut rotated, rotation_steps)?;
    let solution = solve_document(&rotated)?;
    let steps = &solution.history.steps;
    let rows: Vec<EnergyRow> = steps
        .iter()
        .map(|s| EnergyRow {
            step: s.step,
            time: s.time,
            internal: s.energies.internal,
            penalty: s.energies.penalty,
        })
        .collect();
    let start = rows[load_steps - 1].total();
    let energy_variation = rows[load_steps..]
        .iter()
        .map(|r| (r.total() - start).abs() / start.abs())
        .fold(0.0, f64::max);
    let before = &steps[load_steps - 1].state;
    let after = &steps.last().expect("rotation steps").state;
    let return_error = before
        .nodes
        .iter()
        .zip(&after.nodes)
        .map(|(a, b)| (a.position - b.position).norm())
        .fold(0.0, f64::max);
    Ok(ObjectivityResult {
        rows,
        load_steps,
        energy_variation,
        return_error,
    })
}

/// Crossed beams of `elements` per beam for the objectivity test.
pub fn objectivity_model(
    elements: usize,
    enforcement: EnforcementKind,
    penalty_scale: Option<f64>,
) -> Result<ModelDocument> {
    generate_crossed_beams_with(&CrossedBeamsOptions {
        elements,
        enforcement,
        penalty_scale,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForceDisplacement {
    pub displacement: f64,
    pub force: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CylinderResult {
    pub rows: Vec<ForceDisplacement>,
}

impl CylinderResult {
    /// First step at which the force drops while the displacement grows.
    pub fn limit_point(&self) -> Option<usize> {
        self.rows
            .windows(2)
            .position(|w| w[1].displacement > w[0].displacement && w[1].force < w[0].force)
            .map(|i| i + 1)
    }

    /// Spread `(max − min) / max` of the force from the limit point on.
    pub fn plateau_spread(&self) -> Option<f64> {
        let tail = &self.rows[self.limit_point()?..];
        let max = tail
            .iter()
            .map(|r| r.force)
            .fold(f64::NEG_INFINITY, f64::max);
        let min = tail.iter().map(|r| r.force).fold(f64::INFINITY, f64::min);
        Some((max - min) / max)
    }

    pub fn peak_force(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.force)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Table `u_hat,F_R`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u_hat,F_R\n");
        for r in &self.rows {
            let _ = writeln!(out, "{:e},{:e}", r.displacement, r.force);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_csv())
    }
}

/// Compresses the cylinder; `F_R` is the compressive force carried by the
/// top supports, positive in compression.
pub fn run_cylinder(options: &CylinderOptions) -> Result<CylinderResult> {
    let doc = generate_wire_cylinder(options)?;
    let solution = solve_document(&doc)?;
    let end = doc.solve.end_time;
    let rows = std::iter::once(ForceDisplacement {
        displacement: 0.0,
        force: 0.0,
    })
    .chain(
        solution
            .history
            .steps
            .iter()
            .zip(&solution.reactions)
            .map(|(s, r)| ForceDisplacement {
                displacement: options.displacement * s.time / end,
                force: -r.z,
            }),
    )
    .collect();
    Ok(CylinderResult { rows })
}
