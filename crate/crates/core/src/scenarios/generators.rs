//! Generators for the example structures.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use super::document::*;
use crate::so3::{triad_from_tangent, triad_smallest_rotation};
use crate::{Error, Result};

/// Young's modulus, radius and load magnitude shared by the beam examples.
pub const BEAM_MODULUS: f64 = 1.0;
pub const BEAM_RADIUS: f64 = 0.05;
pub const TIP_LOAD: f64 = 5e-6;

/// How the two beams of the L-shape are joined.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Junction {
    Coupling {
        enforcement: EnforcementKind,
        penalty_scale: Option<f64>,
    },
    /// Shared nodal unknowns (zero offset only).
    NodalConnection,
    /// One element between B and C with modulus `stiffness_scale · E`.
    Connector { stiffness_scale: f64 },
}

impl Junction {
    pub fn lagrange() -> Self {
        Junction::Coupling {
            enforcement: EnforcementKind::Lagrange,
            penalty_scale: None,
        }
    }

    pub fn penalty(scale: f64) -> Self {
        Junction::Coupling {
            enforcement: EnforcementKind::Penalty,
            penalty_scale: Some(scale),
        }
    }
}

struct Builder {
    doc: ModelDocument,
}

impl Builder {
    fn new(load_steps: usize) -> Self {
        Self {
            doc: ModelDocument {
                connections: Vec::new(),
                solve: SolveDocument {
                    load_steps,
                    ..SolveDocument::default()
                },
                outputs: OutputDocument::default(),
                materials: Vec::new(),
                nodes: Vec::new(),
                elements: Vec::new(),
                couplings: Vec::new(),
                dirichlet: Vec::new(),
                loads: Vec::new(),
            },
        }
    }

    fn material(&mut self, youngs_modulus: f64, radius: f64) -> usize {
        let id = self.doc.materials.len();
        self.doc.materials.push(MaterialDocument {
            id,
            youngs_modulus,
            poisson_ratio: 0.0,
            radius,
            shear_factor: None,
        });
        id
    }

    fn node(&mut self, position: Vector3<f64>, triad: &Matrix3<f64>) -> usize {
        let id = self.doc.nodes.len();
        self.doc.nodes.push(NodeDocument {
            id,
            position: position.into(),
            rotation: Some(rotation_of(triad)),
        });
        id
    }

    fn element(
        &mut self,
        material: usize,
        nodes: Vec<usize>,
        section: Option<&Matrix3<f64>>,
    ) -> usize {
        let id = self.doc.elements.len();
        let section_rotations = section.map(|t| vec![rotation_of(t); nodes.len()]);
        self.doc.elements.push(ElementDocument {
            id,
            material,
            nodes,
            section_rotations,
        });
        id
    }

    /// Straight beam of `n` linear elements; returns node and element ids.
    fn straight_beam(
        &mut self,
        material: usize,
        start: Vector3<f64>,
        end: Vector3<f64>,
        n: usize,
        first_node: Option<usize>,
    ) -> Result<(Vec<usize>, Vec<usize>)> {
        let triad = triad_smallest_rotation(&(end - start))
            .ok_or_else(|| Error::InvalidModel("beam of zero length".into()))?;
        let mut nodes = Vec::with_capacity(n + 1);
        for k in 0..=n {
            match (k, first_node) {
                (0, Some(id)) => nodes.push(id),
                _ => {
                    let p = start + (end - start) * (k as f64 / n as f64);
                    nodes.push(self.node(p, &triad));
                }
            }
        }
        // sections follow the beam even where a shared node carries another triad
        let first_triad = first_node.map(|_| triad);
        let elements = (0..n)
            .map(|k| {
                let section = if k == 0 { first_triad.as_ref() } else { None };
                self.element(material, vec![nodes[k], nodes[k + 1]], section)
            })
            .collect();
        Ok((nodes, elements))
    }

    fn coupling(
        &mut self,
        a: usize,
        b: usize,
        xi: Option<[f64; 2]>,
        kind: EnforcementKind,
        scale: Option<f64>,
    ) {
        self.doc.couplings.push(CouplingDocument {
            element_a: a,
            element_b: b,
            xi,
            enforcement: kind,
            penalty_scale: scale,
            penalty: None,
        });
    }

    fn clamp(&mut self, node: usize) {
        self.doc.dirichlet.push(DirichletDocument {
            node,
            mask: [true; 6],
            displacement: [0.0; 3],
            rotation: [0.0; 3],
            amplitude: None,
        });
    }

    fn tip_load(&mut self, node: usize) {
        self.doc.loads.push(LoadDocument {
            node,
            force: [0.0, TIP_LOAD, 0.0],
            moment: [0.0, 0.0, TIP_LOAD],
            amplitude: None,
            rotation: None,
            rotation_amplitude: None,
        });
    }
}

fn check_elements(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidModel(
            "at least one element per beam required".into(),
        ));
    }
    Ok(())
}

/// L-shape joined by a Lagrange multiplier coupling.
pub fn generate_l_shape(offset: f64, elements: usize) -> Result<ModelDocument> {
    generate_l_shape_with(offset, elements, Junction::lagrange())
}

/// Beam A–B along e₁ and beam C–D along e₃ with `C = B + offset·e₂`,
/// clamped at A and loaded at D.
pub fn generate_l_shape_with(
    offset: f64,
    elements: usize,
    junction: Junction,
) -> Result<ModelDocument> {
    check_elements(elements)?;
    if !(offset >= 0.0 && offset.is_finite()) {
        return Err(Error::InvalidModel(format!(
            "offset must be non-negative, got {offset}"
        )));
    }
    let mut b = Builder::new(10);
    let mat = b.material(BEAM_MODULUS, BEAM_RADIUS);
    let p_b = Vector3::x();
    let p_c = p_b + Vector3::y() * offset;
    let p_d = p_c + Vector3::z();
    let (beam1, elems1) = b.straight_beam(mat, Vector3::zeros(), p_b, elements, None)?;
    let node_b = *beam1.last().unwrap();
    let shared_c = match junction {
        Junction::NodalConnection => {
            if offset != 0.0 {
                return Err(Error::InvalidModel(
                    "nodal connection needs zero offset".into(),
                ));
            }
            let triad_b = triad_smallest_rotation(&Vector3::x()).unwrap();
            Some(b.node(p_c, &triad_b))
        }
        _ => None,
    };
    let (beam2, elems2) = b.straight_beam(mat, p_c, p_d, elements, shared_c)?;
    let (node_c, node_d) = (beam2[0], *beam2.last().unwrap());
    match junction {
        Junction::Coupling {
            enforcement,
            penalty_scale,
        } => {
            b.coupling(
                *elems1.last().unwrap(),
                elems2[0],
                Some([1.0, -1.0]),
                enforcement,
                penalty_scale,
            );
        }
        Junction::NodalConnection => b.doc.connections.push([node_b, node_c]),
        Junction::Connector { stiffness_scale } => {
            if offset == 0.0 {
                return Err(Error::InvalidModel(
                    "connector needs a non-zero offset".into(),
                ));
            }
            if !(stiffness_scale > 0.0 && stiffness_scale.is_finite()) {
                return Err(Error::InvalidModel(
                    "connector stiffness must be positive".into(),
                ));
            }
            let cmat = b.material(stiffness_scale * BEAM_MODULUS, BEAM_RADIUS);
            let triad = triad_smallest_rotation(&(p_c - p_b)).unwrap();
            b.element(cmat, vec![node_b, node_c], Some(&triad));
        }
    }
    b.clamp(beam1[0]);
    b.tip_load(node_d);
    b.doc.outputs.monitor = vec![node_d];
    b.doc.outputs.reaction_nodes = vec![beam1[0]];
    Ok(b.doc)
}

/// Options of the crossed-beams example.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossedBeamsOptions {
    pub elements: usize,
    pub enforcement: EnforcementKind,
    pub penalty_scale: Option<f64>,
}

impl CrossedBeamsOptions {
    pub fn lagrange(elements: usize) -> Self {
        Self {
            elements,
            enforcement: EnforcementKind::Lagrange,
            penalty_scale: None,
        }
    }
}

/// Crossed beams with Lagrange coupling.
pub fn generate_crossed_beams(elements: usize) -> Result<ModelDocument> {
    generate_crossed_beams_with(&CrossedBeamsOptions::lagrange(elements))
}

/// Beam 1 from the origin to `2e₁`, beam 2 from `(1, a, −1)` to
/// `(1, a, 1)` with `a = 2R`; clamped at the origin, loaded at the top of
/// beam 2, coupled where the centerlines cross (located by projection).
pub fn generate_crossed_beams_with(options: &CrossedBeamsOptions) -> Result<ModelDocument> {
    let n = options.elements;
    check_elements(n)?;
    let mut b = Builder::new(10);
    let mat = b.material(BEAM_MODULUS, BEAM_RADIUS);
    let offset = 2.0 * BEAM_RADIUS;
    let (beam1, elems1) = b.straight_beam(mat, Vector3::zeros(), 2.0 * Vector3::x(), n, None)?;
    let (beam2, elems2) = b.straight_beam(
        mat,
        Vector3::new(1.0, offset, -1.0),
        Vector3::new(1.0, offset, 1.0),
        n,
        None,
    )?;
    // central element; for even counts the crossing is its end node
    let k = if n % 2 == 1 { (n - 1) / 2 } else { n / 2 - 1 };
    b.coupling(
        elems1[k],
        elems2[k],
        None,
        options.enforcement,
        options.penalty_scale,
    );
    b.clamp(beam1[0]);
    let tip = *beam2.last().unwrap();
    b.tip_load(tip);
    b.doc.outputs.monitor = vec![tip];
    b.doc.outputs.reaction_nodes = vec![beam1[0]];
    Ok(b.doc)
}

/// Appends a rigid rotation of `2π` about e₁ at the clamp, applied in
/// `rotation_steps` steps after the load steps, with co-rotated loads.
pub fn add_rigid_rotation(doc: &mut ModelDocument, rotation_steps: usize) -> Result<()> {
    if rotation_steps == 0 {
        return Err(Error::InvalidModel(
            "rotation_steps must be positive".into(),
        ));
    }
    let load_steps = doc.solve.load_steps;
    let dt = doc.solve.end_time / load_steps as f64;
    let start = doc.solve.end_time;
    let end = start + dt * rotation_steps as f64;
    let ramp = Some(vec![[0.0, 0.0], [start, 0.0], [end, 1.0]]);
    let phi = [2.0 * PI, 0.0, 0.0];
    let clamp = doc
        .dirichlet
        .first_mut()
        .ok_or_else(|| Error::InvalidModel("rigid rotation needs a clamped node".into()))?;
    clamp.rotation = phi;
    clamp.amplitude = ramp.clone();
    for load in &mut doc.loads {
        load.rotation = Some(phi);
        load.rotation_amplitude = ramp.clone();
        load.amplitude = Some(vec![[0.0, 0.0], [start, 1.0]]);
    }
    doc.solve.load_steps = load_steps + rotation_steps;
    doc.solve.end_time = end;
    Ok(())
}

/// Geometry and discretization of the wire-wound cylinder.
///
/// The defaults place nodes at every crossing and every inflection of the
/// fiber undulation; coarser meshes alias it away and the fibers respond
/// as straight columns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CylinderOptions {
    pub n_axi: usize,
    pub n_circ: usize,
    pub elems_per_ring: usize,
    pub elems_per_axial: usize,
    pub steps: usize,
    /// Prescribed shortening at the top `[m]`.
    pub displacement: f64,
}

impl Default for CylinderOptions {
    fn default() -> Self {
        Self {
            n_axi: 16,
            n_circ: 10,
            elems_per_ring: 32,
            elems_per_axial: 20,
            steps: 100,
            displacement: 0.2,
        }
    }
}

pub const CYLINDER_DIAMETER: f64 = 2.0;
pub const FIBER_RADIUS: f64 = 0.04;
pub const IMPERFECTION_LOAD: f64 = 1e-6;

fn sign(i: usize) -> f64 {
    if i.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Fiber spacing `a = πd/n_axi` and height `b = a·n_circ`.
pub fn cylinder_dimensions(n_axi: usize, n_circ: usize) -> (f64, f64) {
    let a = PI * CYLINDER_DIAMETER / n_axi as f64;
    (a, a * n_circ as f64)
}

/// Axial fiber `i` at height `z`: position and tangent.
pub fn axial_fiber(i: usize, z: f64, n_axi: usize, spacing: f64) -> (Vector3<f64>, Vector3<f64>) {
    let theta = i as f64 * 2.0 * PI / n_axi as f64;
    let radial = Vector3::new(theta.cos(), theta.sin(), 0.0);
    let rho = CYLINDER_DIAMETER / 2.0 - sign(i) * FIBER_RADIUS * (PI * z / spacing).sin();
    let drho = -sign(i) * FIBER_RADIUS * PI / spacing * (PI * z / spacing).cos();
    (
        radial * rho + Vector3::z() * z,
        radial * drho + Vector3::z(),
    )
}

/// Circumferential fiber `i` at angle `phi`: position and tangent.
pub fn ring_fiber(i: usize, phi: f64, n_axi: usize, spacing: f64) -> (Vector3<f64>, Vector3<f64>) {
    let m = n_axi as f64 / 2.0;
    let radial = Vector3::new(phi.cos(), phi.sin(), 0.0);
    let hoop = Vector3::new(-phi.sin(), phi.cos(), 0.0);
    let rho = CYLINDER_DIAMETER / 2.0 - sign(i) * FIBER_RADIUS * (phi * m).cos();
    let drho = sign(i) * FIBER_RADIUS * m * (phi * m).sin();
    let height = spacing * (i as f64 - 0.5);
    (
        radial * rho + Vector3::z() * height,
        radial * drho + hoop * rho,
    )
}

/// Element index and local coordinate of parameter `s` on a uniform mesh of
/// `n` elements over `[0, length)`.
fn locate(s: f64, length: f64, n: usize) -> (usize, f64) {
    let h = length / n as f64;
    let k = ((s / h).floor() as usize).min(n - 1);
    let xi = (2.0 * (s - k as f64 * h) / h - 1.0).clamp(-1.0, 1.0);
    (k, xi)
}

/// Interwoven axial and circumferential fibers coupled at every crossing;
/// axial fibers clamped at both ends, the top ends moved down by
/// `displacement`, and a small lateral imperfection load held from the
/// first step on.
pub fn generate_wire_cylinder(options: &CylinderOptions) -> Result<ModelDocument> {
    let CylinderOptions {
        n_axi,
        n_circ,
        elems_per_ring,
        elems_per_axial,
        steps,
        displacement,
    } = *options;
    if n_axi < 4
        || n_axi % 2 != 0
        || n_circ == 0
        || elems_per_ring < 3
        || elems_per_axial == 0
        || steps == 0
    {
        return Err(Error::InvalidModel(format!(
            "invalid cylinder options {options:?}"
        )));
    }
    let (a, height) = cylinder_dimensions(n_axi, n_circ);
    let mut b = Builder::new(steps);
    b.doc.solve.newton_max_iter = 40;
    let mat = b.material(BEAM_MODULUS, FIBER_RADIUS);
    let triad_at = |pos: Vector3<f64>, tangent: Vector3<f64>| {
        let radial = Vector3::new(pos.x, pos.y, 0.0);
        triad_from_tangent(&tangent, &radial)
            .ok_or_else(|| Error::InvalidModel("degenerate fiber tangent".into()))
    };

    let mut axial_elements = Vec::new();
    let mut bottom = Vec::new();
    let mut top = Vec::new();
    let mut imperfection = None;
    let target = Vector3::new(-CYLINDER_DIAMETER / 2.0, 0.0, height / 2.0);
    let mut best = f64::INFINITY;
    for i in 1..=n_axi {
        let mut nodes = Vec::new();
        for k in 0..=elems_per_axial {
            let z = height * k as f64 / elems_per_axial as f64;
            let (p, t) = axial_fiber(i, z, n_axi, a);
            let id = b.node(p, &triad_at(p, t)?);
            if (p - target).norm() < best - 1e-12 {
                best = (p - target).norm();
                imperfection = Some(id);
            }
            nodes.push(id);
        }
        let elems: Vec<usize> = (0..elems_per_axial)
            .map(|k| b.element(mat, vec![nodes[k], nodes[k + 1]], None))
            .collect();
        bottom.push(nodes[0]);
        top.push(*nodes.last().unwrap());
        axial_elements.push(elems);
    }
    let mut ring_elements = Vec::new();
    for j in 1..=n_circ {
        let mut nodes = Vec::new();
        for k in 0..elems_per_ring {
            let phi = 2.0 * PI * k as f64 / elems_per_ring as f64;
            let (p, t) = ring_fiber(j, phi, n_axi, a);
            nodes.push(b.node(p, &triad_at(p, t)?));
        }
        let elems: Vec<usize> = (0..elems_per_ring)
            .map(|k| b.element(mat, vec![nodes[k], nodes[(k + 1) % elems_per_ring]], None))
            .collect();
        ring_elements.push(elems);
    }
    for i in 1..=n_axi {
        for j in 1..=n_circ {
            let z = a * (j as f64 - 0.5);
            let phi = (2.0 * PI * i as f64 / n_axi as f64) % (2.0 * PI);
            let (ka, xa) = locate(z, height, elems_per_axial);
            let (kr, xr) = locate(phi, 2.0 * PI, elems_per_ring);
            b.coupling(
                axial_elements[i - 1][ka],
                ring_elements[j - 1][kr],
                Some([xa, xr]),
                EnforcementKind::Lagrange,
                None,
            );
        }
    }
    for &n in &bottom {
        b.clamp(n);
    }
    for &n in &top {
        b.doc.dirichlet.push(DirichletDocument {
            node: n,
            mask: [true; 6],
            displacement: [0.0, 0.0, -displacement],
            rotation: [0.0; 3],
            amplitude: None,
        });
    }
    let imperfection = imperfection.expect("cylinder has nodes");
    b.doc.loads.push(LoadDocument {
        node: imperfection,
        force: [0.0, IMPERFECTION_LOAD, 0.0],
        moment: [0.0; 3],
        amplitude: Some(vec![[0.0, 0.0], [1.0 / steps as f64, 1.0]]),
        rotation: None,
        rotation_amplitude: None,
    });
    b.doc.outputs.monitor = vec![imperfection];
    b.doc.outputs.reaction_nodes = top;
    Ok(b.doc)
}
