//! Human-writable TOML model documents.
//!
//! ```toml
//! [solve]
//! load_steps = 10
//!
//! [outputs]
//! monitor = [2]
//!
//! [[materials]]
//! id = 0
//! youngs_modulus = 1.0
//! poisson_ratio = 0.0
//! radius = 0.05
//!
//! [[nodes]]
//! id = 0
//! position = [0.0, 0.0, 0.0]
//! rotation = [0.0, 0.0, 0.0]   # rotation vector of the nodal triad, optional
//!
//! [[elements]]
//! id = 0
//! material = 0
//! nodes = [0, 1]
//!
//! [[couplings]]
//! element_a = 0
//! element_b = 1
//! xi = [1.0, -1.0]             # omitted: closest-point projection
//! enforcement = "penalty"
//! penalty_scale = 100.0
//!
//! [[dirichlet]]
//! node = 0
//! mask = [true, true, true, true, true, true]
//!
//! [[loads]]
//! node = 2
//! force = [0.0, 5e-6, 0.0]
//! amplitude = [[0.0, 0.0], [1.0, 1.0]]
//! ```
//!
//! Ids are arbitrary but unique per section; all quantities are SI.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::beam::CrossSection;
use crate::coupling::{closest_point_projection, default_penalties, CouplingSite, Enforcement};
use crate::linsolve::LinearSolver;
use crate::model::{Amplitude, Dirichlet, Load, Model};
use crate::so3::{exp_so3, log_so3};
use crate::solver::SolveSettings;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    /// Pairs of node ids sharing all unknowns.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub connections: Vec<[usize; 2]>,
    #[serde(default)]
    pub solve: SolveDocument,
    #[serde(default)]
    pub outputs: OutputDocument,
    pub materials: Vec<MaterialDocument>,
    pub nodes: Vec<NodeDocument>,
    pub elements: Vec<ElementDocument>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub couplings: Vec<CouplingDocument>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dirichlet: Vec<DirichletDocument>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loads: Vec<LoadDocument>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveDocument {
    pub load_steps: usize,
    pub end_time: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub step_cut_allowed: bool,
}

impl Default for SolveDocument {
    fn default() -> Self {
        let s = SolveSettings::default();
        Self {
            load_steps: s.load_steps,
            end_time: s.end_time,
            newton_tol: s.newton_tol,
            newton_max_iter: s.newton_max_iter,
            step_cut_allowed: s.step_cut_allowed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputDocument {
    /// Node ids whose positions are reported.
    pub monitor: Vec<usize>,
    /// Node ids whose reactions are summed.
    pub reaction_nodes: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialDocument {
    pub id: usize,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shear_factor: Option<f64>,
}

impl MaterialDocument {
    pub fn section(&self) -> CrossSection {
        CrossSection::circular_with_shear_factor(
            self.youngs_modulus,
            self.poisson_ratio,
            self.radius,
            self.shear_factor.unwrap_or(1.0),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDocument {
    pub id: usize,
    pub position: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementDocument {
    pub id: usize,
    pub material: usize,
    pub nodes: Vec<usize>,
    /// Section triads (rotation vectors) where they differ from the nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section_rotations: Option<Vec<[f64; 3]>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnforcementKind {
    Lagrange,
    Penalty,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingDocument {
    pub element_a: usize,
    pub element_b: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<[f64; 2]>,
    pub enforcement: EnforcementKind,
    /// Scale of the default penalty rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_scale: Option<f64>,
    /// Explicit `[positional, rotational]` penalties.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<[f64; 2]>,
}

fn all_true() -> [bool; 6] {
    [true; 6]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletDocument {
    pub node: usize,
    #[serde(default = "all_true")]
    pub mask: [bool; 6],
    #[serde(default)]
    pub displacement: [f64; 3],
    #[serde(default)]
    pub rotation: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadDocument {
    pub node: usize,
    #[serde(default)]
    pub force: [f64; 3],
    #[serde(default)]
    pub moment: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<Vec<[f64; 2]>>,
    /// Co-rotation of the load: rotation vector and its amplitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_amplitude: Option<Vec<[f64; 2]>>,
}

/// Model ready to solve, with document ids translated to indices.
#[derive(Clone, Debug)]
pub struct BuiltModel {
    pub model: Model,
    pub settings: SolveSettings,
    pub monitor: Vec<usize>,
    pub reaction_nodes: Vec<usize>,
}

pub(crate) fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::from(a)
}

pub(crate) fn rotation_of(triad: &Matrix3<f64>) -> [f64; 3] {
    log_so3(triad).into()
}

fn amplitude(points: &Option<Vec<[f64; 2]>>) -> Result<Amplitude> {
    match points {
        None => Ok(Amplitude::linear()),
        Some(p) => Amplitude::new(p.iter().map(|q| (q[0], q[1])).collect()),
    }
}

fn index_of(map: &BTreeMap<usize, usize>, id: usize, what: &str) -> Result<usize> {
    map.get(&id)
        .copied()
        .ok_or_else(|| Error::InvalidModel(format!("unknown {what} id {id}")))
}

fn id_map(ids: impl Iterator<Item = usize>, what: &str) -> Result<BTreeMap<usize, usize>> {
    let mut map = BTreeMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id, i).is_some() {
            return Err(Error::InvalidModel(format!("duplicate {what} id {id}")));
        }
    }
    Ok(map)
}

impl ModelDocument {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// Switches every coupling to the given enforcement.
    pub fn set_enforcement(&mut self, kind: EnforcementKind, penalty_scale: Option<f64>) {
        for c in &mut self.couplings {
            c.enforcement = kind;
            c.penalty = None;
            c.penalty_scale = match kind {
                EnforcementKind::Lagrange => None,
                EnforcementKind::Penalty => penalty_scale.or(c.penalty_scale),
            };
        }
    }

    /// Exchanges the two sides of every coupling.
    pub fn swap_coupling_sides(&mut self) {
        for c in &mut self.couplings {
            std::mem::swap(&mut c.element_a, &mut c.element_b);
            if let Some([a, b]) = c.xi {
                c.xi = Some([b, a]);
            }
        }
    }

    pub fn node_index(&self, id: usize) -> Result<usize> {
        index_of(
            &id_map(self.nodes.iter().map(|n| n.id), "node")?,
            id,
            "node",
        )
    }

    pub fn build(&self) -> Result<BuiltModel> {
        let node_ids = id_map(self.nodes.iter().map(|n| n.id), "node")?;
        let material_ids = id_map(self.materials.iter().map(|m| m.id), "material")?;
        let element_ids = id_map(self.elements.iter().map(|e| e.id), "element")?;
        let mut model = Model::new();
        for n in &self.nodes {
            let triad = exp_so3(&vec3(n.rotation.unwrap_or([0.0; 3])));
            model.add_node(vec3(n.position), triad);
        }
        let sections: Vec<CrossSection> = self
            .materials
            .iter()
            .map(MaterialDocument::section)
            .collect();
        for e in &self.elements {
            let nodes = e
                .nodes
                .iter()
                .map(|&id| index_of(&node_ids, id, "node"))
                .collect::<Result<Vec<_>>>()?;
            let section = sections[index_of(&material_ids, e.material, "material")?];
            let triads = match &e.section_rotations {
                None => None,
                Some(r) if r.len() == nodes.len() => {
                    Some(r.iter().map(|v| exp_so3(&vec3(*v))).collect())
                }
                Some(_) => {
                    return Err(Error::InvalidModel(format!(
                        "element {}: one section rotation per node required",
                        e.id
                    )))
                }
            };
            model.add_element(nodes, section, triads)?;
        }
        for [a, b] in &self.connections {
            model.nodal_connection(
                index_of(&node_ids, *a, "node")?,
                index_of(&node_ids, *b, "node")?,
            )?;
        }
        for c in &self.couplings {
            let ea = index_of(&element_ids, c.element_a, "element")?;
            let eb = index_of(&element_ids, c.element_b, "element")?;
            let [xa, xb] = match c.xi {
                Some(xi) => xi,
                None => {
                    let p = closest_point_projection(&model.elements[ea], &model.elements[eb])?;
                    [p.xi_a, p.xi_b]
                }
            };
            let enforcement = match c.enforcement {
                EnforcementKind::Lagrange => Enforcement::Lagrange,
                EnforcementKind::Penalty => {
                    let [positional, rotational] = match (c.penalty, c.penalty_scale) {
                        (Some(p), _) => p,
                        (None, Some(scale)) => {
                            let (p, r) = default_penalties(
                                &model.elements[ea].section,
                                &model.elements[eb].section,
                                scale,
                            )?;
                            [p, r]
                        }
                        (None, None) => {
                            return Err(Error::InvalidModel(
                                "penalty coupling needs `penalty` or `penalty_scale`".into(),
                            ))
                        }
                    };
                    Enforcement::Penalty {
                        positional,
                        rotational,
                    }
                }
            };
            model.add_coupling(
                CouplingSite {
                    element: ea,
                    xi: xa,
                },
                CouplingSite {
                    element: eb,
                    xi: xb,
                },
                enforcement,
            )?;
        }
        for d in &self.dirichlet {
            model.dirichlet.push(Dirichlet {
                node: index_of(&node_ids, d.node, "node")?,
                mask: d.mask,
                displacement: vec3(d.displacement),
                rotation: vec3(d.rotation),
                amplitude: amplitude(&d.amplitude)?,
            });
        }
        for l in &self.loads {
            let rotation = match l.rotation {
                None => None,
                Some(r) => Some((vec3(r), amplitude(&l.rotation_amplitude)?)),
            };
            model.loads.push(Load {
                node: index_of(&node_ids, l.node, "node")?,
                force: vec3(l.force),
                moment: vec3(l.moment),
                amplitude: amplitude(&l.amplitude)?,
                rotation,
            });
        }
        model.validate()?;
        let s = &self.solve;
        let settings = SolveSettings {
            load_steps: s.load_steps,
            end_time: s.end_time,
            newton_tol: s.newton_tol,
            newton_max_iter: s.newton_max_iter,
            step_cut_allowed: s.step_cut_allowed,
            max_step_cuts: 4,
            linear_solver: LinearSolver::default(),
        };
        settings.validate()?;
        let ids = |v: &[usize]| {
            v.iter()
                .map(|&id| index_of(&node_ids, id, "node"))
                .collect::<Result<Vec<_>>>()
        };
        Ok(BuiltModel {
            model,
            settings,
            monitor: ids(&self.outputs.monitor)?,
            reaction_nodes: ids(&self.outputs.reaction_nodes)?,
        })
    }
}
