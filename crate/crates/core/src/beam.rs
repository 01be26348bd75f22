//! Geometrically exact Simo–Reissner beam elements.
//!
//! Centerline and rotations are interpolated with Lagrange polynomials of
//! order 1–3. Triads are interpolated objectively through relative rotation
//! vectors with respect to the triad of the first element node:
//!
//! ```text
//! Λ(ξ) = Λ_r exp(Σ L_k(ξ) ψ_k),   ψ_k = log(Λ_rᵀ Λ_k),   Λ_r = Λ_1
//! ```
//!
//! Nodal degrees of freedom are the additive position increments and the
//! spatial (left-multiplicative) spin increments, six per node in the order
//! `(u₁, u₂, u₃, θ₁, θ₂, θ₃)`. Residuals and tangents are derivatives of the
//! element strain energy with respect to these increments, computed with
//! nested dual numbers.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector6};

use crate::ad::{Dual, Real, D1, D2};
use crate::so3::{axial, exp_so3, is_rotation, lift3, lift33, log_so3, tangent_map_inverse};
use crate::{Error, Result};

/// Degrees of freedom per node.
pub const NODE_DOFS: usize = 6;

/// Elastic properties of a cross-section.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossSection {
    /// Young's modulus [N/m²]
    pub youngs_modulus: f64,
    /// Shear modulus [N/m²]
    pub shear_modulus: f64,
    /// Area [m²]
    pub area: f64,
    /// Effective shear area [m²]
    pub shear_area: f64,
    /// Second moments of area about the second and third base vector [m⁴]
    pub inertia_2: f64,
    pub inertia_3: f64,
    /// Polar moment [m⁴]
    pub polar_moment: f64,
    /// Radius of the (circular) section [m]
    pub radius: f64,
}

impl CrossSection {
    /// Circular section, `G = E / (2(1 + ν))`, shear area equal to the area.
    pub fn circular(youngs_modulus: f64, poisson_ratio: f64, radius: f64) -> Self {
        Self::circular_with_shear_factor(youngs_modulus, poisson_ratio, radius, 1.0)
    }

    pub fn circular_with_shear_factor(
        youngs_modulus: f64,
        poisson_ratio: f64,
        radius: f64,
        shear_factor: f64,
    ) -> Self {
        let pi = std::f64::consts::PI;
        let area = pi * radius * radius;
        let inertia = pi * radius.powi(4) / 4.0;
        Self {
            youngs_modulus,
            shear_modulus: youngs_modulus / (2.0 * (1.0 + poisson_ratio)),
            area,
            shear_area: shear_factor * area,
            inertia_2: inertia,
            inertia_3: inertia,
            polar_moment: 2.0 * inertia,
            radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.youngs_modulus,
            self.shear_modulus,
            self.area,
            self.shear_area,
            self.inertia_2,
            self.inertia_3,
            self.polar_moment,
            self.radius,
        ];
        if vals.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!(
                "cross-section constants must be positive: {self:?}"
            )))
        }
    }

    /// diag(EA, GA_s, GA_s)
    pub fn force_stiffness(&self) -> Vector3<f64> {
        Vector3::new(
            self.youngs_modulus * self.area,
            self.shear_modulus * self.shear_area,
            self.shear_modulus * self.shear_area,
        )
    }

    /// diag(GJ, EI₂, EI₃)
    pub fn moment_stiffness(&self) -> Vector3<f64> {
        Vector3::new(
            self.shear_modulus * self.polar_moment,
            self.youngs_modulus * self.inertia_2,
            self.youngs_modulus * self.inertia_3,
        )
    }
}

/// Current position and absolute triad of a node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeState {
    pub position: Vector3<f64>,
    pub triad: Matrix3<f64>,
}

impl NodeState {
    pub fn new(position: Vector3<f64>, triad: Matrix3<f64>) -> Self {
        Self { position, triad }
    }

    /// Applies `Δu` additively and `Δθ` as a left-multiplicative spin.
    pub fn apply_increment(&mut self, du: &Vector3<f64>, dtheta: &Vector3<f64>) {
        self.position += du;
        self.triad = exp_so3(dtheta) * self.triad;
    }
}

/// Centroid position and triad of one cross-section.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossSectionState {
    pub position: Vector3<f64>,
    pub triad: Matrix3<f64>,
}

/// Lagrange shape function values on equally spaced nodes in `[-1, 1]`.
pub fn lagrange_values<T: Real>(order: usize, xi: T) -> Vec<T> {
    let nodes: Vec<f64> = (0..=order)
        .map(|k| -1.0 + 2.0 * k as f64 / order as f64)
        .collect();
    (0..nodes.len())
        .map(|k| {
            let mut v = T::one();
            for m in (0..nodes.len()).filter(|&m| m != k) {
                v *= (xi - T::from_f64(nodes[m])).scale(1.0 / (nodes[k] - nodes[m]));
            }
            v
        })
        .collect()
}

/// Lagrange shape function values and derivatives with respect to `ξ`.
pub fn lagrange_shape(order: usize, xi: f64) -> (Vec<f64>, Vec<f64>) {
    lagrange_values(order, D1::variable(xi))
        .into_iter()
        .map(|v| (v.re, v.eps))
        .unzip()
}

/// Gauss–Legendre points and weights on `[-1, 1]`.
pub fn gauss_legendre(points: usize) -> Vec<(f64, f64)> {
    match points {
        1 => vec![(0.0, 2.0)],
        2 => {
            let a = 1.0 / 3f64.sqrt();
            vec![(-a, 1.0), (a, 1.0)]
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            vec![(-a, 5.0 / 9.0), (0.0, 8.0 / 9.0), (a, 5.0 / 9.0)]
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            vec![(-b, wb), (-a, wa), (a, wa), (b, wb)]
        }
        _ => panic!("Gauss rule with {points} points not tabulated"),
    }
}

#[derive(Clone, Debug)]
struct QuadraturePoint {
    weight: f64,
    jacobian: f64,
    shape: Vec<f64>,
    /// Shape function derivatives with respect to arc length.
    shape_ds: Vec<f64>,
    ref_force_strain: Vector3<f64>,
    ref_curvature: Vector3<f64>,
}

/// Lagrange-interpolated Simo–Reissner element.
#[derive(Clone, Debug)]
pub struct BeamElement {
    pub node_ids: Vec<usize>,
    pub ref_positions: Vec<Vector3<f64>>,
    /// Cross-section triads at the element nodes in the reference configuration.
    pub ref_triads: Vec<Matrix3<f64>>,
    pub section: CrossSection,
    /// `(Λ⁰_node)ᵀ Λ⁰_k`, maps the nodal triad to the element's section triad.
    node_offsets: Vec<Matrix3<f64>>,
    quadrature: Vec<QuadraturePoint>,
}

impl BeamElement {
    /// Element whose section triads coincide with the nodal triads.
    pub fn new(
        node_ids: Vec<usize>,
        ref_positions: Vec<Vector3<f64>>,
        ref_triads: Vec<Matrix3<f64>>,
        section: CrossSection,
    ) -> Result<Self> {
        let node_triads = ref_triads.clone();
        Self::with_node_triads(node_ids, ref_positions, ref_triads, &node_triads, section)
    }

    /// Element whose section triads differ from the triads of the nodes it
    /// is attached to (e.g. a kink where two beams share a node).
    pub fn with_node_triads(
        node_ids: Vec<usize>,
        ref_positions: Vec<Vector3<f64>>,
        ref_triads: Vec<Matrix3<f64>>,
        node_triads: &[Matrix3<f64>],
        section: CrossSection,
    ) -> Result<Self> {
        let n = node_ids.len();
        if !(2..=4).contains(&n) || ref_positions.len() != n || ref_triads.len() != n {
            return Err(Error::InvalidModel(format!(
                "element needs 2-4 nodes with positions and triads, got {n}"
            )));
        }
        if node_triads.len() != n {
            return Err(Error::StateCount {
                expected: n,
                got: node_triads.len(),
            });
        }
        section.validate()?;
        for t in ref_triads.iter().chain(node_triads) {
            if !is_rotation(t, 1e-10) {
                return Err(Error::InvalidModel(
                    "reference triad is not a rotation".into(),
                ));
            }
        }
        let node_offsets = node_triads
            .iter()
            .zip(&ref_triads)
            .map(|(node, elem)| node.transpose() * elem)
            .collect();
        let mut element = Self {
            node_ids,
            ref_positions,
            ref_triads,
            section,
            node_offsets,
            quadrature: Vec::new(),
        };
        element.set_quadrature(n - 1)?;
        Ok(element)
    }

    pub fn order(&self) -> usize {
        self.node_ids.len() - 1
    }

    pub fn dofs(&self) -> usize {
        NODE_DOFS * self.node_ids.len()
    }

    /// Replaces the integration rule (default: `order` Gauss points).
    pub fn set_quadrature(&mut self, points: usize) -> Result<()> {
        let order = self.order();
        let mut quadrature = Vec::with_capacity(points);
        for (xi, weight) in gauss_legendre(points) {
            let (shape, dshape) = lagrange_shape(order, xi);
            let dr0: Vector3<f64> = self
                .ref_positions
                .iter()
                .zip(&dshape)
                .map(|(r, d)| r * *d)
                .sum();
            let jacobian = dr0.norm();
            if jacobian < 1e-14 {
                return Err(Error::DegenerateElement(self.node_ids[0]));
            }
            let shape_ds: Vec<f64> = dshape.iter().map(|d| d / jacobian).collect();
            let (r_s, triad, curvature) =
                section_strain_kinematics(&shape, &shape_ds, &self.ref_positions, &self.ref_triads);
            quadrature.push(QuadraturePoint {
                weight,
                jacobian,
                shape,
                shape_ds,
                ref_force_strain: triad.transpose() * r_s,
                ref_curvature: curvature,
            });
        }
        self.quadrature = quadrature;
        Ok(())
    }

    /// Reference length by the element quadrature.
    pub fn reference_length(&self) -> f64 {
        self.quadrature.iter().map(|q| q.weight * q.jacobian).sum()
    }

    /// Reference centerline point at `xi` (not range checked).
    pub fn reference_centerline<T: Real>(&self, xi: T) -> Vector3<T> {
        let mut r = Vector3::zeros();
        for (p, l) in self
            .ref_positions
            .iter()
            .zip(lagrange_values(self.order(), xi))
        {
            r += lift3::<T>(p) * l;
        }
        r
    }

    pub fn reference_states(&self) -> Vec<NodeState> {
        self.ref_positions
            .iter()
            .zip(&self.ref_triads)
            .zip(&self.node_offsets)
            .map(|((r, t), o)| NodeState::new(*r, t * o.transpose()))
            .collect()
    }

    fn check_states(&self, states: &[NodeState]) -> Result<()> {
        if states.len() != self.node_ids.len() {
            return Err(Error::StateCount {
                expected: self.node_ids.len(),
                got: states.len(),
            });
        }
        Ok(())
    }

    /// Nodal positions and section triads with dual seeds applied.
    ///
    /// Seeds are applied in order; a later rotational seed on the same node
    /// multiplies from the left, `Λ ← exp(s e_c) Λ`.
    fn seeded<T: Real>(
        &self,
        states: &[NodeState],
        seeds: &[(usize, T)],
    ) -> (Vec<Vector3<T>>, Vec<Matrix3<T>>) {
        let mut pos: Vec<Vector3<T>> = states.iter().map(|s| lift3(&s.position)).collect();
        let mut rot: Vec<Matrix3<T>> = states.iter().map(|s| lift33(&s.triad)).collect();
        for &(dof, s) in seeds {
            let (node, c) = (dof / NODE_DOFS, dof % NODE_DOFS);
            if c < 3 {
                pos[node][c] += s;
            } else {
                let mut psi = Vector3::<T>::zeros();
                psi[c - 3] = s;
                rot[node] = exp_so3(&psi) * rot[node];
            }
        }
        for (r, o) in rot.iter_mut().zip(&self.node_offsets) {
            *r *= lift33::<T>(o);
        }
        (pos, rot)
    }

    /// Strain energy for given nodal positions and section triads.
    fn energy_generic<T: Real>(&self, pos: &[Vector3<T>], rot: &[Matrix3<T>]) -> T {
        let cf = self.section.force_stiffness();
        let cm = self.section.moment_stiffness();
        let mut energy = T::zero();
        for q in &self.quadrature {
            let (r_s, triad, curvature) =
                section_strain_kinematics(&q.shape, &q.shape_ds, pos, rot);
            let gamma = triad.transpose() * r_s - lift3::<T>(&q.ref_force_strain);
            let kappa = curvature - lift3::<T>(&q.ref_curvature);
            let mut density = T::zero();
            for i in 0..3 {
                density += gamma[i] * gamma[i] * T::from_f64(cf[i]);
                density += kappa[i] * kappa[i] * T::from_f64(cm[i]);
            }
            energy += density.scale(0.5 * q.weight * q.jacobian);
        }
        energy
    }

    /// Material force strains Γ and curvatures κ at the quadrature points.
    pub fn strains(&self, states: &[NodeState]) -> Result<Vec<(Vector3<f64>, Vector3<f64>)>> {
        self.check_states(states)?;
        let (pos, rot) = self.seeded::<f64>(states, &[]);
        Ok(self
            .quadrature
            .iter()
            .map(|q| {
                let (r_s, triad, curvature) =
                    section_strain_kinematics(&q.shape, &q.shape_ds, &pos, &rot);
                (
                    triad.transpose() * r_s - q.ref_force_strain,
                    curvature - q.ref_curvature,
                )
            })
            .collect())
    }

    pub fn elastic_energy(&self, states: &[NodeState]) -> Result<f64> {
        self.check_states(states)?;
        let (pos, rot) = self.seeded::<f64>(states, &[]);
        Ok(self.energy_generic(&pos, &rot))
    }

    /// Energy gradient with respect to the nodal increments.
    pub fn internal_force(&self, states: &[NodeState]) -> Result<DVector<f64>> {
        self.check_states(states)?;
        let n = self.dofs();
        let mut residual = DVector::zeros(n);
        for i in 0..n {
            let (pos, rot) = self.seeded(states, &[(i, D1::variable(0.0))]);
            residual[i] = self.energy_generic(&pos, &rot).eps;
        }
        Ok(residual)
    }

    /// Residual and consistent tangent `∂R_i/∂Δq_j`.
    ///
    /// The tangent is the derivative of the residual under multiplicative
    /// rotation updates; it is symmetric only at equilibrium.
    pub fn internal_force_and_tangent(
        &self,
        states: &[NodeState],
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let residual = self.internal_force(states)?;
        let n = self.dofs();
        let mut tangent = self.translational_tangent(states);
        let inner = D2::constant(D1::new(0.0, 1.0));
        let outer = D2::new(D1::constant(0.0), D1::constant(1.0));
        let rotational = |d: usize| d % NODE_DOFS >= 3;
        for j in 0..n {
            for i in 0..n {
                if !rotational(i) && !rotational(j) {
                    continue;
                }
                // seeds commute unless both rotate the same node
                let ordered = rotational(i) && rotational(j) && i / NODE_DOFS == j / NODE_DOFS;
                if i > j && !ordered {
                    continue;
                }
                let (pos, rot) = self.seeded(states, &[(j, outer), (i, inner)]);
                let k = self.energy_generic(&pos, &rot).eps.eps;
                tangent[(i, j)] = k;
                if !ordered {
                    tangent[(j, i)] = k;
                }
            }
        }
        Ok((residual, tangent))
    }

    /// Position–position blocks, `Σ w J N'_a N'_b Λ C_f Λᵀ`.
    fn translational_tangent(&self, states: &[NodeState]) -> DMatrix<f64> {
        let n = self.dofs();
        let mut tangent = DMatrix::zeros(n, n);
        let (pos, rot) = self.seeded::<f64>(states, &[]);
        let cf = Matrix3::from_diagonal(&self.section.force_stiffness());
        for q in &self.quadrature {
            let (_, triad, _) = section_strain_kinematics(&q.shape, &q.shape_ds, &pos, &rot);
            let c = triad * cf * triad.transpose() * (q.weight * q.jacobian);
            for (a, da) in q.shape_ds.iter().enumerate() {
                for (b, db) in q.shape_ds.iter().enumerate() {
                    let mut block = tangent.fixed_view_mut::<3, 3>(a * NODE_DOFS, b * NODE_DOFS);
                    block += c * (da * db);
                }
            }
        }
        tangent
    }

    /// Cross-section position and triad at `xi`.
    pub fn evaluate_cross_section(
        &self,
        states: &[NodeState],
        xi: f64,
    ) -> Result<CrossSectionState> {
        self.check_states(states)?;
        check_xi(xi)?;
        let (shape, _) = lagrange_shape(self.order(), xi);
        let (pos, rot) = self.seeded::<f64>(states, &[]);
        let (position, triad) = section_at(&shape, &pos, &rot);
        Ok(CrossSectionState { position, triad })
    }

    pub fn reference_cross_section(&self, xi: f64) -> Result<CrossSectionState> {
        self.evaluate_cross_section(&self.reference_states(), xi)
    }

    /// Variation and increment maps `H = N` at `xi`.
    pub fn kinematic_maps<'a>(
        &'a self,
        states: &'a [NodeState],
        xi: f64,
    ) -> Result<KinematicMaps<'a>> {
        self.check_states(states)?;
        check_xi(xi)?;
        let (shape, _) = lagrange_shape(self.order(), xi);
        let n = self.dofs();
        let mut h = DMatrix::zeros(6, n);
        for (k, l) in shape.iter().enumerate() {
            for c in 0..3 {
                h[(c, NODE_DOFS * k + c)] = *l;
            }
        }
        for k in 0..self.node_ids.len() {
            for c in 3..6 {
                let j = NODE_DOFS * k + c;
                let (pos, rot) = self.seeded(states, &[(j, D1::variable(0.0))]);
                let (_, triad) = section_at(&shape, &pos, &rot);
                let spin = spin_of(&triad);
                for r in 0..3 {
                    h[(3 + r, j)] = spin[r];
                }
            }
        }
        Ok(KinematicMaps {
            n: h.clone(),
            h,
            element: self,
            states,
            shape,
        })
    }
}

/// Shape function matrices of one cross-section.
pub struct KinematicMaps<'a> {
    /// 6×n variation map, rows `(δr; δθ)`.
    pub h: DMatrix<f64>,
    /// 6×n increment map (identical to `h` for multiplicative increments).
    pub n: DMatrix<f64>,
    element: &'a BeamElement,
    states: &'a [NodeState],
    shape: Vec<f64>,
}

impl KinematicMaps<'_> {
    /// `∂(Hᵀ f)/∂q` at fixed generalized section force `f`.
    pub fn h_delta(&self, f: &Vector6<f64>) -> DMatrix<f64> {
        let el = self.element;
        let n = el.dofs();
        let mut out = DMatrix::zeros(n, n);
        let inner = D2::constant(D1::new(0.0, 1.0));
        let outer = D2::new(D1::constant(0.0), D1::constant(1.0));
        // position rows of H are constant; only spin columns contribute
        for j in (0..n).filter(|j| j % NODE_DOFS >= 3) {
            for i in (0..n).filter(|i| i % NODE_DOFS >= 3) {
                let (pos, rot) = el.seeded(self.states, &[(j, outer), (i, inner)]);
                let (_, triad) = section_at(&self.shape, &pos, &rot);
                // triad entries: (a + ε b) + η (c + ε d)
                let de: Matrix3<D1> = triad.map(|x| Dual::new(x.re.eps, x.eps.eps));
                let val: Matrix3<D1> = triad.map(|x| Dual::new(x.re.re, x.eps.re));
                let spin = axial(&(de * val.transpose()));
                out[(i, j)] = (0..3).map(|r| spin[r].eps * f[3 + r]).sum();
            }
        }
        out
    }
}

fn check_xi(xi: f64) -> Result<()> {
    if (-1.0 - 1e-12..=1.0 + 1e-12).contains(&xi) && xi.is_finite() {
        Ok(())
    } else {
        Err(Error::XiOutOfRange(xi))
    }
}

/// Spin of a dual-valued triad: `axial(Λ̇ Λᵀ)`.
fn spin_of(triad: &Matrix3<D1>) -> Vector3<f64> {
    let dot = triad.map(|x| x.eps);
    let val = triad.map(|x| x.re);
    axial(&(dot * val.transpose()))
}

/// Relative rotation vectors with respect to the first node's triad.
fn relative_rotation_vectors<T: Real>(rot: &[Matrix3<T>]) -> Vec<Vector3<T>> {
    let reference_t = rot[0].transpose();
    rot.iter()
        .enumerate()
        .map(|(k, r)| {
            if k == 0 {
                Vector3::zeros()
            } else {
                log_so3(&(reference_t * r))
            }
        })
        .collect()
}

fn section_at<T: Real>(
    shape: &[f64],
    pos: &[Vector3<T>],
    rot: &[Matrix3<T>],
) -> (Vector3<T>, Matrix3<T>) {
    let mut r = Vector3::zeros();
    for (p, l) in pos.iter().zip(shape) {
        r += p.map(|x| x.scale(*l));
    }
    let rel = relative_rotation_vectors(rot);
    let mut psi = Vector3::zeros();
    for (v, l) in rel.iter().zip(shape) {
        psi += v.map(|x| x.scale(*l));
    }
    (r, rot[0] * exp_so3(&psi))
}

/// `(r', Λ, κ)` at a point with shape values and arc-length derivatives.
fn section_strain_kinematics<T: Real>(
    shape: &[f64],
    shape_ds: &[f64],
    pos: &[Vector3<T>],
    rot: &[Matrix3<T>],
) -> (Vector3<T>, Matrix3<T>, Vector3<T>) {
    let mut r_s = Vector3::zeros();
    for (p, d) in pos.iter().zip(shape_ds) {
        r_s += p.map(|x| x.scale(*d));
    }
    let rel = relative_rotation_vectors(rot);
    let mut psi = Vector3::zeros();
    let mut psi_s = Vector3::zeros();
    for ((v, l), d) in rel.iter().zip(shape).zip(shape_ds) {
        psi += v.map(|x| x.scale(*l));
        psi_s += v.map(|x| x.scale(*d));
    }
    let triad = rot[0] * exp_so3(&psi);
    // material curvature of Λ_r exp(Ψ): T⁻ᵀ(Ψ) Ψ'
    let curvature = tangent_map_inverse(&psi).transpose() * psi_s;
    (r_s, triad, curvature)
}
