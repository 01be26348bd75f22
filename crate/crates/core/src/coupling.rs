//! Point coupling between two beam cross-sections.
//!
//! A coupling pair constrains the relative position and the relative
//! orientation of two cross-sections to stay at their reference values.
//! Both gaps are spatial vectors: the positional gap is the mean of the
//! push-forwards of the two material distance changes, and the rotational gap
//! is the rotation vector of the relative effective rotation.
//!
//! Block naming follows the saddle-point structure: `q1_lambda` maps the
//! multiplier to the generalized force on side 1, `lambda_q1` is the gap
//! linearization with respect to side 1, and `q1q2` is the derivative of the
//! side 1 generalized force with respect to side 2 at fixed multiplier. Rows
//! and columns are ordered `(position; spin)`.

use nalgebra::{Matrix2, Matrix3, SMatrix, Vector2, Vector3, Vector6};

use crate::ad::{Real, D1, D2};
use crate::beam::{BeamElement, CrossSection, CrossSectionState};
use crate::so3::{exp_so3, lift3, lift33, log_so3, skew, tangent_map};
use crate::{Error, Result};

pub type Matrix6x3 = SMatrix<f64, 6, 3>;
pub type Matrix3x6 = SMatrix<f64, 3, 6>;
pub type Matrix6 = SMatrix<f64, 6, 6>;

/// Relative rotations at or beyond this angle are rejected.
pub const SINGULAR_ANGLE: f64 = std::f64::consts::PI - 1e-6;

/// Reference data frozen when a pair is created.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingReference {
    /// `(Λ⁰₁)ᵀ (r⁰₂ − r⁰₁)`
    pub material_distance_1: Vector3<f64>,
    /// `(Λ⁰₂)ᵀ (r⁰₂ − r⁰₁)`
    pub material_distance_2: Vector3<f64>,
    pub ref_triad_1: Matrix3<f64>,
    pub ref_triad_2: Matrix3<f64>,
}

impl CouplingReference {
    pub fn new(ref1: &CrossSectionState, ref2: &CrossSectionState) -> Self {
        let d = ref2.position - ref1.position;
        Self {
            material_distance_1: ref1.triad.transpose() * d,
            material_distance_2: ref2.triad.transpose() * d,
            ref_triad_1: ref1.triad,
            ref_triad_2: ref2.triad,
        }
    }

    /// Reference of the same pair with the two sides exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            material_distance_1: -self.material_distance_2,
            material_distance_2: -self.material_distance_1,
            ref_triad_1: self.ref_triad_2,
            ref_triad_2: self.ref_triad_1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Enforcement {
    Lagrange,
    /// Penalty parameters `[N/m]` and `[Nm/rad]`.
    Penalty {
        positional: f64,
        rotational: f64,
    },
}

/// Attachment site: element index and parameter coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingSite {
    pub element: usize,
    pub xi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingPair {
    pub side_a: CouplingSite,
    pub side_b: CouplingSite,
    pub reference: CouplingReference,
    pub enforcement: Enforcement,
}

impl CouplingPair {
    /// Pair whose reference is taken from the reference cross-sections of
    /// the two sites.
    pub fn from_elements(
        elements: &[BeamElement],
        side_a: CouplingSite,
        side_b: CouplingSite,
        enforcement: Enforcement,
    ) -> Result<Self> {
        let element = |site: &CouplingSite| {
            elements.get(site.element).ok_or_else(|| {
                Error::InvalidModel(format!(
                    "coupling refers to missing element {}",
                    site.element
                ))
            })
        };
        let ref_a = element(&side_a)?.reference_cross_section(side_a.xi)?;
        let ref_b = element(&side_b)?.reference_cross_section(side_b.xi)?;
        let pair = Self {
            side_a,
            side_b,
            reference: CouplingReference::new(&ref_a, &ref_b),
            enforcement,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        for xi in [self.side_a.xi, self.side_b.xi] {
            if !(-1.0..=1.0).contains(&xi) {
                return Err(Error::XiOutOfRange(xi));
            }
        }
        if let Enforcement::Penalty {
            positional,
            rotational,
        } = self.enforcement
        {
            if !(positional > 0.0
                && rotational > 0.0
                && positional.is_finite()
                && rotational.is_finite())
            {
                return Err(Error::InvalidModel(format!(
                    "penalty parameters must be positive, got {positional}, {rotational}"
                )));
            }
        }
        Ok(())
    }

    /// The same pair with sides exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            side_a: self.side_b,
            side_b: self.side_a,
            reference: self.reference.swapped(),
            enforcement: self.enforcement,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LagrangeMultipliers {
    /// Coupling force `[N]`.
    pub force: Vector3<f64>,
    /// Coupling moment multiplier `[Nm]`.
    pub moment: Vector3<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GeneralizedDeformation {
    /// Positional gap `[m]`.
    pub positional: Vector3<f64>,
    /// Relative rotation vector `[rad]`.
    pub rotational: Vector3<f64>,
}

impl GeneralizedDeformation {
    pub fn as_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.positional);
        v.fixed_rows_mut::<3>(3).copy_from(&self.rotational);
        v
    }
}

/// Coupling and linearization blocks of one constraint type.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingBlocks {
    pub q1_lambda: Matrix6x3,
    pub q2_lambda: Matrix6x3,
    pub q1q1: Matrix6,
    pub q1q2: Matrix6,
    pub q2q1: Matrix6,
    pub q2q2: Matrix6,
    pub lambda_q1: Matrix3x6,
    pub lambda_q2: Matrix3x6,
}

impl CouplingBlocks {
    /// Generalized forces `(f₁, f₂)` for a multiplier.
    pub fn forces(&self, lambda: &Vector3<f64>) -> (Vector6<f64>, Vector6<f64>) {
        (self.q1_lambda * lambda, self.q2_lambda * lambda)
    }
}

fn positional_gap_generic<T: Real>(
    r1: &Vector3<T>,
    triad1: &Matrix3<T>,
    r2: &Vector3<T>,
    triad2: &Matrix3<T>,
    reference: &CouplingReference,
) -> Vector3<T> {
    let offset = triad1 * lift3::<T>(&reference.material_distance_1)
        + triad2 * lift3::<T>(&reference.material_distance_2);
    r2 - r1 - offset.map(|x| x.scale(0.5))
}

fn rotational_gap_generic<T: Real>(
    triad1: &Matrix3<T>,
    triad2: &Matrix3<T>,
    reference: &CouplingReference,
) -> Vector3<T> {
    let reference_rotation =
        lift33::<T>(&(reference.ref_triad_2.transpose() * reference.ref_triad_1));
    log_so3(&(triad2 * reference_rotation * triad1.transpose()))
}

/// `r₂ − r₁ − ½(Λ₁ ¹R⁰₂₁ + Λ₂ ²R⁰₂₁)`.
pub fn positional_gap(
    state1: &CrossSectionState,
    state2: &CrossSectionState,
    reference: &CouplingReference,
) -> Vector3<f64> {
    positional_gap_generic(
        &state1.position,
        &state1.triad,
        &state2.position,
        &state2.triad,
        reference,
    )
}

/// `log(Λ₂ (Λ⁰₂)ᵀ Λ⁰₁ Λ₁ᵀ)`, rejected when its angle reaches [`SINGULAR_ANGLE`].
pub fn rotational_gap(
    state1: &CrossSectionState,
    state2: &CrossSectionState,
    reference: &CouplingReference,
) -> Result<Vector3<f64>> {
    let psi = rotational_gap_generic(&state1.triad, &state2.triad, reference);
    if psi.norm() >= SINGULAR_ANGLE {
        return Err(Error::SingularCoupling(psi.norm()));
    }
    Ok(psi)
}

pub fn generalized_deformation(
    state1: &CrossSectionState,
    state2: &CrossSectionState,
    reference: &CouplingReference,
) -> Result<GeneralizedDeformation> {
    Ok(GeneralizedDeformation {
        positional: positional_gap(state1, state2, reference),
        rotational: rotational_gap(state1, state2, reference)?,
    })
}

/// Blocks of the positional constraint.
pub fn coupling_blocks_positional(
    state1: &CrossSectionState,
    state2: &CrossSectionState,
    reference: &CouplingReference,
    lambda: &Vector3<f64>,
) -> CouplingBlocks {
    let eye = Matrix3::identity();
    let moment_arm = skew(&(state2.position - state1.position)) * -0.5;
    let mut q1_lambda = Matrix6x3::zeros();
    q1_lambda.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-eye));
    q1_lambda
        .fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&moment_arm);
    let mut q2_lambda = Matrix6x3::zeros();
    q2_lambda.fixed_view_mut::<3, 3>(0, 0).copy_from(&eye);
    q2_lambda
        .fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&moment_arm);

    let half_spin = skew(lambda) * 0.5;
    let mut from_side_1 = Matrix6::zeros();
    from_side_1
        .fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(-half_spin));
    let mut from_side_2 = Matrix6::zeros();
    from_side_2
        .fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&half_spin);

    let mut lambda_q1 = Matrix3x6::zeros();
    lambda_q1.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-eye));
    lambda_q1
        .fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(skew(&(state1.triad * reference.material_distance_1)) * 0.5));
    let mut lambda_q2 = Matrix3x6::zeros();
    lambda_q2.fixed_view_mut::<3, 3>(0, 0).copy_from(&eye);
    lambda_q2
        .fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(skew(&(state2.triad * reference.material_distance_2)) * 0.5));

    CouplingBlocks {
        q1_lambda,
        q2_lambda,
        q1q1: from_side_1,
        q2q1: from_side_1,
        q1q2: from_side_2,
        q2q2: from_side_2,
        lambda_q1,
        lambda_q2,
    }
}

/// Relative rotation vector with dual spins seeded on the triads.
fn seeded_rotational_gap<T: Real>(
    state1: &CrossSectionState,
    state2: &CrossSectionState,
    reference: &CouplingReference,
    spin1: Vector3<T>,
    spin2: Vector3<T>,
) -> Vector3<T> {
    let triad1 = exp_so3(&spin1) * lift33::<T>(&state1.triad);
    let triad2 = exp_so3(&spin2) * lift33::<T>(&state2.triad);
    rotational_gap_generic(&triad1, &triad2, reference)
}

fn unit_seed(c: usize) -> Vector3<D1> {
    let mut v = Vector3::zeros();
    v[c] = D1::variable(0.0);
    v
}

/// Blocks of the rotational constraint.
pub fn coupling_blocks_rotational(
    state1: &CrossSectionState,
    state2: &CrossSectionState,
    reference: &CouplingReference,
    lambda: &Vector3<f64>,
) -> Result<CouplingBlocks> {
    let psi = rotational_gap(state1, state2, reference)?;
    let moment = tangent_map(&psi).transpose();
    let mut q1_lambda = Matrix6x3::zeros();
    q1_lambda.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-moment));
    let mut q2_lambda = Matrix6x3::zeros();
    q2_lambda.fixed_view_mut::<3, 3>(3, 0).copy_from(&moment);

    let mut lambda_q1 = Matrix3x6::zeros();
    let mut lambda_q2 = Matrix3x6::zeros();
    // derivative of Tᵀ(ψ̂) λ with respect to the spin of each side
    let mut dmoment_1 = Matrix3::zeros();
    let mut dmoment_2 = Matrix3::zeros();
    let lambda_dual = lift3::<D1>(lambda);
    for c in 0..3 {
        for (side, gap_jac, moment_jac) in [
            (0, &mut lambda_q1, &mut dmoment_1),
            (1, &mut lambda_q2, &mut dmoment_2),
        ] {
            let (s1, s2) = if side == 0 {
                (unit_seed(c), Vector3::zeros())
            } else {
                (Vector3::zeros(), unit_seed(c))
            };
            let gap = seeded_rotational_gap(state1, state2, reference, s1, s2);
            let m = tangent_map(&gap).transpose() * lambda_dual;
            for r in 0..3 {
                gap_jac[(r, 3 + c)] = gap[r].eps;
                moment_jac[(r, c)] = m[r].eps;
            }
        }
    }
    let block = |m: Matrix3<f64>| {
        let mut out = Matrix6::zeros();
        out.fixed_view_mut::<3, 3>(3, 3).copy_from(&m);
        out
    };
    Ok(CouplingBlocks {
        q1_lambda,
        q2_lambda,
        q1q1: block(-dmoment_1),
        q1q2: block(-dmoment_2),
        q2q1: block(dmoment_1),
        q2q2: block(dmoment_2),
        lambda_q1,
        lambda_q2,
    })
}

/// Gap Jacobians `(∂g/∂q₁, ∂g/∂q₂)` (6×6 each, rows `(g_r; g_θ)`) by central
/// differences under multiplicative spin perturbations.
pub fn gap_jacobian_fd(
    state1: &CrossSectionState,
    state2: &CrossSectionState,
    reference: &CouplingReference,
    step: f64,
) -> Result<(Matrix6, Matrix6)> {
    let perturb = |s: &CrossSectionState, dof: usize, h: f64| {
        let mut out = *s;
        if dof < 3 {
            out.position[dof] += h;
        } else {
            let mut v = Vector3::zeros();
            v[dof - 3] = h;
            out.triad = exp_so3(&v) * out.triad;
        }
        out
    };
    let mut jac = [Matrix6::zeros(), Matrix6::zeros()];
    for (side, j) in jac.iter_mut().enumerate() {
        for dof in 0..6 {
            let eval = |h: f64| {
                let (a, b) = if side == 0 {
                    (perturb(state1, dof, h), *state2)
                } else {
                    (*state1, perturb(state2, dof, h))
                };
                generalized_deformation(&a, &b, reference).map(|g| g.as_vector())
            };
            let col = (eval(step)? - eval(-step)?) / (2.0 * step);
            j.set_column(dof, &col);
        }
    }
    let [a, b] = jac;
    Ok((a, b))
}

/// `λ = ε g` for both constraint types.
pub fn penalty_multiplier(
    gap: &GeneralizedDeformation,
    positional: f64,
    rotational: f64,
) -> LagrangeMultipliers {
    LagrangeMultipliers {
        force: gap.positional * positional,
        moment: gap.rotational * rotational,
    }
}

/// Penalty potential `½(ε_r‖g_r‖² + ε_θ‖g_θ‖²)`.
pub fn penalty_energy(gap: &GeneralizedDeformation, positional: f64, rotational: f64) -> f64 {
    0.5 * (positional * gap.positional.norm_squared() + rotational * gap.rotational.norm_squared())
}

/// Rule-of-thumb penalties `scale·Ē·R̄` and `scale·Ē·R̄³` from averaged
/// moduli and radii.
pub fn default_penalties(
    mat1: &CrossSection,
    mat2: &CrossSection,
    scale: f64,
) -> Result<(f64, f64)> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidModel(format!(
            "penalty scale must be positive, got {scale}"
        )));
    }
    let e = 0.5 * (mat1.youngs_modulus + mat2.youngs_modulus);
    let r = 0.5 * (mat1.radius + mat2.radius);
    Ok((scale * e * r, scale * e * r.powi(3)))
}

/// Result of a closest-point projection between two reference centerlines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub xi_a: f64,
    pub xi_b: f64,
    pub distance: f64,
    /// Angle between the centerline tangents, in `[0, π/2]`.
    pub angle: f64,
}

pub const MIN_INTERACTION_ANGLE: f64 = 0.1;
const PROJECTION_MAX_ITER: usize = 50;
const PROJECTION_TOL: f64 = 1e-13;

/// Centerline point and its first two derivatives in `ξ`.
fn centerline_jet(element: &BeamElement, xi: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let x = D2::new(D1::variable(xi), D1::constant(1.0));
    let r = element.reference_centerline(x);
    (
        r.map(|v| v.re.re),
        r.map(|v| v.re.eps),
        r.map(|v| v.eps.eps),
    )
}

/// Minimizes `½‖r_a(ξ_a) − r_b(ξ_b)‖²` over `[-1, 1]²`.
///
/// The Newton iteration starts from the best point of an 11×11 sample grid.
/// If the unconstrained stationary point lies outside the parameter box the
/// result is clamped and refined by alternating one-dimensional projections.
pub fn closest_point_projection(a: &BeamElement, b: &BeamElement) -> Result<Projection> {
    let dist2 = |s: f64, t: f64| (centerline_jet(a, s).0 - centerline_jet(b, t).0).norm_squared();
    let grid = |k: usize| -1.0 + 0.2 * k as f64;
    let mut seed = (0.0, 0.0);
    let mut best = f64::INFINITY;
    for i in 0..11 {
        for j in 0..11 {
            let d = dist2(grid(i), grid(j));
            if d < best {
                best = d;
                seed = (grid(i), grid(j));
            }
        }
    }

    let (mut s, mut t) = seed;
    let mut converged = false;
    for _ in 0..PROJECTION_MAX_ITER {
        let (ra, da, dda) = centerline_jet(a, s);
        let (rb, db, ddb) = centerline_jet(b, t);
        let d = ra - rb;
        let grad = Vector2::new(da.dot(&d), -db.dot(&d));
        let hess = Matrix2::new(
            da.dot(&da) + dda.dot(&d),
            -da.dot(&db),
            -da.dot(&db),
            db.dot(&db) - ddb.dot(&d),
        );
        let step = hess
            .lu()
            .solve(&(-grad))
            .ok_or_else(|| Error::IllPosedProjection(tangent_angle(&da, &db)))?;
        s += step[0];
        t += step[1];
        if step.norm() < PROJECTION_TOL || (step.norm() < 1e-9 && grad.norm() < 1e-15) {
            converged = true;
            break;
        }
        if s.abs() > 10.0 || t.abs() > 10.0 {
            break;
        }
    }
    if !converged || s.abs() > 1.0 + 1e-10 || t.abs() > 1.0 + 1e-10 {
        (s, t) = clamped_projection(a, b, (seed.0.clamp(-1.0, 1.0), seed.1.clamp(-1.0, 1.0)))?;
    }
    let (s, t) = (s.clamp(-1.0, 1.0), t.clamp(-1.0, 1.0));
    let (ra, da, _) = centerline_jet(a, s);
    let (rb, db, _) = centerline_jet(b, t);
    let angle = tangent_angle(&da, &db);
    if angle < MIN_INTERACTION_ANGLE {
        return Err(Error::IllPosedProjection(angle));
    }
    Ok(Projection {
        xi_a: s,
        xi_b: t,
        distance: (ra - rb).norm(),
        angle,
    })
}

fn tangent_angle(da: &Vector3<f64>, db: &Vector3<f64>) -> f64 {
    let c = (da.dot(db) / (da.norm() * db.norm())).abs().min(1.0);
    c.acos()
}

/// Minimizes over one parameter of a curve against a fixed point, in `[-1, 1]`.
fn project_point(element: &BeamElement, point: &Vector3<f64>, start: f64) -> f64 {
    let mut xi = start;
    for _ in 0..PROJECTION_MAX_ITER {
        let (r, d, dd) = centerline_jet(element, xi);
        let diff = r - point;
        let g = d.dot(&diff);
        let h = d.dot(&d) + dd.dot(&diff);
        let step = if h > 0.0 { -g / h } else { -g.signum() };
        let next = (xi + step).clamp(-1.0, 1.0);
        let moved = (next - xi).abs();
        xi = next;
        if moved < PROJECTION_TOL {
            break;
        }
    }
    xi
}

fn clamped_projection(a: &BeamElement, b: &BeamElement, seed: (f64, f64)) -> Result<(f64, f64)> {
    let (mut s, mut t) = seed;
    for _ in 0..PROJECTION_MAX_ITER {
        let s_new = project_point(a, &centerline_jet(b, t).0, s);
        let t_new = project_point(b, &centerline_jet(a, s_new).0, t);
        let moved = (s_new - s).abs() + (t_new - t).abs();
        s = s_new;
        t = t_new;
        if moved < PROJECTION_TOL {
            return Ok((s, t));
        }
    }
    Err(Error::ProjectionNotConverged(PROJECTION_MAX_ITER))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::CrossSection;

    fn section(position: Vector3<f64>, rv: Vector3<f64>) -> CrossSectionState {
        CrossSectionState {
            position,
            triad: exp_so3(&rv),
        }
    }

    fn sample_pair() -> (CouplingReference, CrossSectionState, CrossSectionState) {
        let ref1 = section(Vector3::new(0.1, 0.2, 0.3), Vector3::new(0.3, -0.2, 0.5));
        let ref2 = section(Vector3::new(0.4, -0.1, 0.2), Vector3::new(-1.0, 0.4, 0.2));
        let reference = CouplingReference::new(&ref1, &ref2);
        let cur1 = section(Vector3::new(0.15, 0.1, 0.35), Vector3::new(0.5, -0.1, 0.3));
        let cur2 = section(Vector3::new(0.5, -0.2, 0.1), Vector3::new(-0.8, 0.9, 0.1));
        (reference, cur1, cur2)
    }

    #[test]
    fn gaps_vanish_at_reference() {
        let ref1 = section(Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.2, 0.1, 0.0));
        let ref2 = section(Vector3::new(0.3, 0.0, 2.0), Vector3::new(0.0, 1.2, -0.4));
        let r = CouplingReference::new(&ref1, &ref2);
        assert!(positional_gap(&ref1, &ref2, &r).norm() < 1e-15);
        assert!(rotational_gap(&ref1, &ref2, &r).unwrap().norm() < 1e-15);
    }

    #[test]
    fn translation_gap_reduces_to_displacement() {
        let ref1 = section(Vector3::new(1.0, 0.0, 0.0), Vector3::zeros());
        let r = CouplingReference::new(&ref1, &ref1);
        let u = Vector3::new(0.1, -0.2, 0.3);
        let moved = section(ref1.position + u, Vector3::zeros());
        assert!((positional_gap(&ref1, &moved, &r) - u).norm() < 1e-15);
    }

    #[test]
    fn rotational_gap_recovers_applied_rotation() {
        let ref1 = section(Vector3::zeros(), Vector3::new(0.4, 0.0, 0.1));
        let ref2 = section(Vector3::x(), Vector3::new(0.0, -0.7, 0.3));
        let r = CouplingReference::new(&ref1, &ref2);
        let phi = Vector3::new(0.3, -0.5, 0.8);
        let cur2 = CrossSectionState {
            position: ref2.position,
            triad: exp_so3(&phi) * ref2.triad,
        };
        assert!((rotational_gap(&ref1, &cur2, &r).unwrap() - phi).norm() < 1e-13);
    }

    #[test]
    fn swapping_sides_negates_gaps() {
        let (r, s1, s2) = sample_pair();
        let sw = r.swapped();
        assert!((positional_gap(&s1, &s2, &r) + positional_gap(&s2, &s1, &sw)).norm() < 1e-15);
        let a = rotational_gap(&s1, &s2, &r).unwrap();
        let b = rotational_gap(&s2, &s1, &sw).unwrap();
        assert!((a + b).norm() < 1e-14);
    }

    #[test]
    fn near_half_turn_is_singular() {
        let ref1 = section(Vector3::zeros(), Vector3::zeros());
        let r = CouplingReference::new(&ref1, &ref1);
        let cur = section(
            Vector3::zeros(),
            Vector3::new(0.0, 0.0, std::f64::consts::PI - 1e-8),
        );
        assert!(matches!(
            rotational_gap(&ref1, &cur, &r),
            Err(Error::SingularCoupling(_))
        ));
    }

    #[test]
    fn positional_blocks_trivial_cases() {
        let (r, s1, s2) = sample_pair();
        let b = coupling_blocks_positional(&s1, &s2, &r, &Vector3::zeros());
        assert_eq!(b.q1q1, Matrix6::zeros());
        assert_eq!(b.q2q2, Matrix6::zeros());
        let s2c = CrossSectionState {
            position: s1.position,
            triad: s2.triad,
        };
        let b = coupling_blocks_positional(&s1, &s2c, &r, &Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(b.q1_lambda.fixed_view::<3, 3>(3, 0).norm(), 0.0);
        assert_eq!(b.q2_lambda.fixed_view::<3, 3>(3, 0).norm(), 0.0);
    }

    #[test]
    fn rotational_blocks_at_reference() {
        let ref1 = section(Vector3::zeros(), Vector3::new(0.1, 0.2, 0.3));
        let ref2 = section(Vector3::x(), Vector3::new(0.5, 0.2, -0.3));
        let r = CouplingReference::new(&ref1, &ref2);
        let b = coupling_blocks_rotational(&ref1, &ref2, &r, &Vector3::zeros()).unwrap();
        let eye = Matrix3::<f64>::identity();
        assert!((b.q1_lambda.fixed_view::<3, 3>(3, 0) + eye).norm() < 1e-15);
        assert!((b.q2_lambda.fixed_view::<3, 3>(3, 0) - eye).norm() < 1e-15);
        assert_eq!(b.q1q1, Matrix6::zeros());
    }

    #[test]
    fn gap_linearization_matches_finite_differences() {
        let (r, s1, s2) = sample_pair();
        let pos = coupling_blocks_positional(&s1, &s2, &r, &Vector3::zeros());
        let rot = coupling_blocks_rotational(&s1, &s2, &r, &Vector3::zeros()).unwrap();
        let (j1, j2) = gap_jacobian_fd(&s1, &s2, &r, 1e-6).unwrap();
        assert!((j1.fixed_view::<3, 6>(0, 0) - pos.lambda_q1).amax() < 1e-9);
        assert!((j2.fixed_view::<3, 6>(0, 0) - pos.lambda_q2).amax() < 1e-9);
        assert!((j1.fixed_view::<3, 6>(3, 0) - rot.lambda_q1).amax() < 1e-9);
        assert!((j2.fixed_view::<3, 6>(3, 0) - rot.lambda_q2).amax() < 1e-9);
    }

    #[test]
    fn default_penalty_rule() {
        let m = CrossSection::circular(1.0, 0.0, 0.05);
        let (er, et) = default_penalties(&m, &m, 1.0).unwrap();
        assert!((er - 0.05).abs() < 1e-16);
        assert!((et - 1.25e-4).abs() < 1e-18);
        let (er10, et10) = default_penalties(&m, &m, 10.0).unwrap();
        assert!((er10 - 10.0 * er).abs() < 1e-15 && (et10 - 10.0 * et).abs() < 1e-17);
        let a = CrossSection::circular(1.0, 0.0, 0.1);
        let b = CrossSection::circular(3.0, 0.0, 0.1);
        assert!((default_penalties(&a, &b, 1.0).unwrap().0 - 0.2).abs() < 1e-15);
        assert!(default_penalties(&a, &b, 0.0).is_err());
    }

    #[test]
    fn penalty_multiplier_scales_gap() {
        let g = GeneralizedDeformation {
            positional: Vector3::new(1.0, 2.0, 3.0),
            rotational: Vector3::new(0.1, 0.0, 0.0),
        };
        let m = penalty_multiplier(&g, 1.0, 2.0);
        assert_eq!(m.force, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(m.moment, Vector3::new(0.2, 0.0, 0.0));
        let z = penalty_multiplier(&GeneralizedDeformation::default(), 5.0, 5.0);
        assert_eq!(z, LagrangeMultipliers::default());
    }

    fn segment(p: Vector3<f64>, q: Vector3<f64>) -> BeamElement {
        let t = crate::so3::triad_smallest_rotation(&(q - p)).unwrap();
        BeamElement::new(
            vec![0, 1],
            vec![p, q],
            vec![t; 2],
            CrossSection::circular(1.0, 0.0, 0.1),
        )
        .unwrap()
    }

    #[test]
    fn projection_of_crossing_segments() {
        let a = segment(Vector3::new(-1.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0));
        let b = segment(Vector3::new(0.0, 0.1, -1.0), Vector3::new(0.0, 0.1, 1.0));
        let p = closest_point_projection(&a, &b).unwrap();
        assert!(p.xi_a.abs() < 1e-14 && p.xi_b.abs() < 1e-14);
        assert!((p.distance - 0.1).abs() < 1e-14);
        assert!((p.angle - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }

    #[test]
    fn projection_at_shared_node() {
        let a = segment(Vector3::zeros(), Vector3::x());
        let b = segment(Vector3::x(), Vector3::new(1.0, 1.0, 0.0));
        let p = closest_point_projection(&a, &b).unwrap();
        assert!((p.xi_a - 1.0).abs() < 1e-12 && (p.xi_b + 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_of_skew_segments_matches_closed_form() {
        let (p0, u) = (Vector3::new(0.2, -0.3, 0.1), Vector3::new(1.0, 0.5, -0.2));
        let (q0, v) = (Vector3::new(-0.1, 0.4, 0.6), Vector3::new(-0.3, 1.0, 0.7));
        let a = segment(p0 - u, p0 + u);
        let b = segment(q0 - v, q0 + v);
        // foot points of the infinite lines p0 + s u, q0 + t v
        let w = p0 - q0;
        let (aa, bb, cc, dd, ee) = (u.dot(&u), u.dot(&v), v.dot(&v), u.dot(&w), v.dot(&w));
        let den = aa * cc - bb * bb;
        let s = (bb * ee - cc * dd) / den;
        let t = (aa * ee - bb * dd) / den;
        let p = closest_point_projection(&a, &b).unwrap();
        assert!((p.xi_a - s).abs() < 1e-12 && (p.xi_b - t).abs() < 1e-12);
    }

    #[test]
    fn parallel_segments_are_ill_posed() {
        let a = segment(Vector3::zeros(), Vector3::x());
        let b = segment(Vector3::new(0.0, 0.1, 0.0), Vector3::new(1.0, 0.11, 0.0));
        assert!(matches!(
            closest_point_projection(&a, &b),
            Err(Error::IllPosedProjection(_))
        ));
    }
}
