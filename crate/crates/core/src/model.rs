//! Global problem description: nodes, elements, couplings, boundary
//! conditions, loads, and the degree-of-freedom map.

use nalgebra::{Matrix3, Vector3};

use crate::beam::{BeamElement, CrossSection, CrossSectionState, NodeState, NODE_DOFS};
use crate::coupling::{CouplingPair, CouplingSite, Enforcement, LagrangeMultipliers};
use crate::so3::{exp_so3, is_rotation};
use crate::{Error, Result};

/// Tolerance for coincident reference states in nodal connections.
pub const COINCIDENCE_TOL: f64 = 1e-10;

/// Piecewise-linear amplitude over time; constant beyond the first and last
/// sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Amplitude {
    points: Vec<(f64, f64)>,
}

impl Amplitude {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidModel(
                "amplitude needs at least one point".into(),
            ));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidModel(
                "amplitude times must increase strictly".into(),
            ));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidModel(
                "amplitude values must be finite".into(),
            ));
        }
        Ok(Self { points })
    }

    /// Ramp from 0 at `t = 0` to 1 at `t = 1`.
    pub fn linear() -> Self {
        Self {
            points: vec![(0.0, 0.0), (1.0, 1.0)],
        }
    }

    /// Zero until `start`, then linear to 1 at `end`.
    pub fn ramp(start: f64, end: f64) -> Result<Self> {
        if start <= 0.0 {
            Self::new(vec![(start, 0.0), (end, 1.0)])
        } else {
            Self::new(vec![(0.0, 0.0), (start, 0.0), (end, 1.0)])
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn value(&self, t: f64) -> f64 {
        let p = &self.points;
        if t <= p[0].0 {
            return p[0].1;
        }
        for w in p.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t <= t1 {
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        p[p.len() - 1].1
    }
}

impl Default for Amplitude {
    fn default() -> Self {
        Self::linear()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub position: Vector3<f64>,
    pub triad: Matrix3<f64>,
}

/// Dirichlet condition on one node.
///
/// Constrained translations follow `r⁰ + a(t)·u`. When all three rotations
/// are constrained the triad follows `exp(a(t)·φ) Λ⁰`; a partial rotation
/// mask only holds the masked spin components fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct Dirichlet {
    pub node: usize,
    pub mask: [bool; 6],
    pub displacement: Vector3<f64>,
    pub rotation: Vector3<f64>,
    pub amplitude: Amplitude,
}

impl Dirichlet {
    pub fn clamp(node: usize) -> Self {
        Self {
            node,
            mask: [true; 6],
            displacement: Vector3::zeros(),
            rotation: Vector3::zeros(),
            amplitude: Amplitude::linear(),
        }
    }

    pub fn rotation_prescribed(&self) -> bool {
        self.mask[3..].iter().all(|m| *m)
    }
}

/// Nodal force and moment `a(t)·(F, M)`, optionally co-rotated with
/// `exp(b(t)·φ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Load {
    pub node: usize,
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
    pub amplitude: Amplitude,
    pub rotation: Option<(Vector3<f64>, Amplitude)>,
}

impl Load {
    pub fn new(node: usize, force: Vector3<f64>, moment: Vector3<f64>) -> Self {
        Self {
            node,
            force,
            moment,
            amplitude: Amplitude::linear(),
            rotation: None,
        }
    }

    pub fn at(&self, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        let a = self.amplitude.value(t);
        let q = match &self.rotation {
            Some((phi, amp)) => exp_so3(&(phi * amp.value(t))),
            None => Matrix3::identity(),
        };
        (q * self.force * a, q * self.moment * a)
    }
}

/// Index map from nodes and Lagrange pairs to global unknowns.
///
/// Nodes sharing degrees of freedom map to one slot; slots are numbered by
/// the first node id that uses them. Multiplier blocks of Lagrange pairs
/// follow all nodal unknowns, ordered by pair id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofMap {
    node_slot: Vec<usize>,
    slots: usize,
    multiplier_offset: Vec<Option<usize>>,
    total: usize,
}

impl DofMap {
    pub fn slot(&self, node: usize) -> usize {
        self.node_slot[node]
    }

    pub fn node_dof(&self, node: usize, component: usize) -> usize {
        NODE_DOFS * self.node_slot[node] + component
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn nodal_dofs(&self) -> usize {
        NODE_DOFS * self.slots
    }

    /// First of the six multiplier unknowns of a Lagrange pair.
    pub fn multiplier(&self, pair: usize) -> Option<usize> {
        self.multiplier_offset[pair]
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

#[derive(Clone, Debug, Default)]
pub struct Model {
    pub nodes: Vec<Node>,
    pub elements: Vec<BeamElement>,
    pub couplings: Vec<CouplingPair>,
    pub dirichlet: Vec<Dirichlet>,
    pub loads: Vec<Load>,
    /// Node whose unknowns another node shares (itself when not merged).
    alias: Vec<usize>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, position: Vector3<f64>, triad: Matrix3<f64>) -> usize {
        self.nodes.push(Node { position, triad });
        self.alias.push(self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    /// Adds an element on existing nodes. Section triads default to the
    /// nodal triads.
    pub fn add_element(
        &mut self,
        node_ids: Vec<usize>,
        section: CrossSection,
        section_triads: Option<Vec<Matrix3<f64>>>,
    ) -> Result<usize> {
        for &id in &node_ids {
            if id >= self.nodes.len() {
                return Err(Error::InvalidModel(format!(
                    "element refers to missing node {id}"
                )));
            }
        }
        let positions = node_ids.iter().map(|&i| self.nodes[i].position).collect();
        let node_triads: Vec<_> = node_ids.iter().map(|&i| self.nodes[i].triad).collect();
        let triads = section_triads.unwrap_or_else(|| node_triads.clone());
        let element =
            BeamElement::with_node_triads(node_ids, positions, triads, &node_triads, section)?;
        self.elements.push(element);
        Ok(self.elements.len() - 1)
    }

    pub fn add_coupling(
        &mut self,
        side_a: CouplingSite,
        side_b: CouplingSite,
        enforcement: Enforcement,
    ) -> Result<usize> {
        let pair = CouplingPair::from_elements(&self.elements, side_a, side_b, enforcement)?;
        self.couplings.push(pair);
        Ok(self.couplings.len() - 1)
    }

    fn representative(&self, mut node: usize) -> usize {
        while self.alias[node] != node {
            node = self.alias[node];
        }
        node
    }

    /// Lets `node_b` share the unknowns of `node_a`.
    pub fn nodal_connection(&mut self, node_a: usize, node_b: usize) -> Result<()> {
        let n = self.nodes.len();
        if node_a >= n || node_b >= n {
            return Err(Error::InvalidModel(format!(
                "cannot connect nodes {node_a} and {node_b}"
            )));
        }
        let (a, b) = (&self.nodes[node_a], &self.nodes[node_b]);
        if (a.position - b.position).norm() > COINCIDENCE_TOL
            || (a.triad - b.triad).norm() > COINCIDENCE_TOL
        {
            return Err(Error::NonCoincidentNodes {
                a: node_a,
                b: node_b,
            });
        }
        let (ra, rb) = (self.representative(node_a), self.representative(node_b));
        if ra != rb {
            let (keep, drop) = (ra.min(rb), ra.max(rb));
            self.alias[drop] = keep;
        }
        Ok(())
    }

    pub fn dof_map(&self) -> DofMap {
        let mut node_slot = vec![usize::MAX; self.nodes.len()];
        let mut slots = 0;
        for i in 0..self.nodes.len() {
            let r = self.representative(i);
            if node_slot[r] == usize::MAX {
                node_slot[r] = slots;
                slots += 1;
            }
            node_slot[i] = node_slot[r];
        }
        let mut total = NODE_DOFS * slots;
        let multiplier_offset = self
            .couplings
            .iter()
            .map(|c| match c.enforcement {
                Enforcement::Lagrange => {
                    total += 6;
                    Some(total - 6)
                }
                Enforcement::Penalty { .. } => None,
            })
            .collect();
        DofMap {
            node_slot,
            slots,
            multiplier_offset,
            total,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            if !node.position.iter().all(|x| x.is_finite()) || !is_rotation(&node.triad, 1e-10) {
                return Err(Error::InvalidModel(format!(
                    "node {i} has an invalid reference state"
                )));
            }
        }
        for (e, el) in self.elements.iter().enumerate() {
            for (k, &id) in el.node_ids.iter().enumerate() {
                if id >= n
                    || (self.nodes[id].position - el.ref_positions[k]).norm() > COINCIDENCE_TOL
                {
                    return Err(Error::InvalidModel(format!(
                        "element {e} does not match node {id}"
                    )));
                }
            }
        }
        for (p, pair) in self.couplings.iter().enumerate() {
            if pair.side_a.element >= self.elements.len()
                || pair.side_b.element >= self.elements.len()
            {
                return Err(Error::InvalidModel(format!(
                    "coupling {p} refers to a missing element"
                )));
            }
            pair.validate()?;
        }
        let mut constrained = vec![false; n];
        for d in &self.dirichlet {
            if d.node >= n {
                return Err(Error::InvalidModel(format!(
                    "Dirichlet condition on missing node {}",
                    d.node
                )));
            }
            if constrained[d.node] {
                return Err(Error::InvalidModel(format!(
                    "node {} constrained twice",
                    d.node
                )));
            }
            constrained[d.node] = true;
            if !d.rotation_prescribed() && d.rotation.norm() > 0.0 {
                return Err(Error::InvalidModel(format!(
                    "node {}: a prescribed rotation needs all three rotations constrained",
                    d.node
                )));
            }
        }
        for l in &self.loads {
            if l.node >= n {
                return Err(Error::InvalidModel(format!(
                    "load on missing node {}",
                    l.node
                )));
            }
        }
        Ok(())
    }
}

/// Current configuration: one nodal state per slot, multipliers per pair.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub time: f64,
    pub nodes: Vec<NodeState>,
    pub multipliers: Vec<LagrangeMultipliers>,
}

impl State {
    pub fn reference(model: &Model) -> Self {
        let map = model.dof_map();
        let mut nodes = vec![NodeState::new(Vector3::zeros(), Matrix3::identity()); map.slots()];
        for (i, node) in model.nodes.iter().enumerate().rev() {
            nodes[map.slot(i)] = NodeState::new(node.position, node.triad);
        }
        Self {
            time: 0.0,
            nodes,
            multipliers: vec![LagrangeMultipliers::default(); model.couplings.len()],
        }
    }

    pub fn node(&self, map: &DofMap, node: usize) -> &NodeState {
        &self.nodes[map.slot(node)]
    }

    pub fn element_states(&self, map: &DofMap, element: &BeamElement) -> Vec<NodeState> {
        element
            .node_ids
            .iter()
            .map(|&i| *self.node(map, i))
            .collect()
    }

    pub fn cross_section(
        &self,
        model: &Model,
        map: &DofMap,
        site: &CouplingSite,
    ) -> Result<CrossSectionState> {
        let el = &model.elements[site.element];
        el.evaluate_cross_section(&self.element_states(map, el), site.xi)
    }

    /// Applies a global increment (positions and multipliers additive,
    /// triads left-multiplicative).
    pub fn apply_increment(&mut self, map: &DofMap, delta: &nalgebra::DVector<f64>) {
        for (s, node) in self.nodes.iter_mut().enumerate() {
            let du = Vector3::new(delta[6 * s], delta[6 * s + 1], delta[6 * s + 2]);
            let dt = Vector3::new(delta[6 * s + 3], delta[6 * s + 4], delta[6 * s + 5]);
            node.apply_increment(&du, &dt);
        }
        for (p, m) in self.multipliers.iter_mut().enumerate() {
            if let Some(o) = map.multiplier(p) {
                m.force += Vector3::new(delta[o], delta[o + 1], delta[o + 2]);
                m.moment += Vector3::new(delta[o + 3], delta[o + 4], delta[o + 5]);
            }
        }
    }
}
