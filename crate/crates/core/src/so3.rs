//! Rotation-group algebra for large rotations.
//!
//! Rotations are stored as plain 3×3 matrices (triads whose columns are the
//! cross-section base vectors) and parametrized by rotation vectors. Spin
//! vectors `δθ` are spatial, left-multiplicative increments:
//! `δΛ = S(δθ) Λ`.
//!
//! All routines are generic over [`Real`] so they can be differentiated with
//! dual numbers.

use nalgebra::{Matrix3, Vector3};

use crate::ad::Real;

/// Axis times angle, radians.
pub type RotationVector<T = f64> = Vector3<T>;
/// Orthonormal triad, columns are the base vectors.
pub type RotationTriad<T = f64> = Matrix3<T>;
/// Multiplicative (spatial) rotation increment, radians.
pub type SpinVector<T = f64> = Vector3<T>;

/// Below this squared angle the trigonometric coefficients switch to series
/// expansions (angle below 1e-4 rad, truncation error below 1e-24).
const SERIES_THRESHOLD_SQ: f64 = 1e-8;

/// Skew-symmetric matrix with `skew(a) b = a × b`.
#[inline]
pub fn skew<T: Real>(a: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -a[2], a[1], a[2], z, -a[0], -a[1], a[0], z)
}

/// Axial vector of the skew-symmetric part of `m`.
#[inline]
pub fn axial<T: Real>(m: &Matrix3<T>) -> Vector3<T> {
    Vector3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    )
    .map(|x| x.scale(0.5))
}

#[inline]
pub(crate) fn dot<T: Real>(a: &Vector3<T>, b: &Vector3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn lift3<T: Real>(v: &Vector3<f64>) -> Vector3<T> {
    v.map(T::from_f64)
}

#[inline]
pub(crate) fn lift33<T: Real>(m: &Matrix3<f64>) -> Matrix3<T> {
    m.map(T::from_f64)
}

/// `sin ψ / ψ` and `(1 − cos ψ) / ψ²` as functions of `ψ²`.
fn rodrigues_coefficients<T: Real>(angle_sq: T) -> (T, T) {
    if angle_sq.value() < SERIES_THRESHOLD_SQ {
        let t2 = angle_sq;
        let t4 = t2 * t2;
        (
            T::one() - t2.scale(1.0 / 6.0) + t4.scale(1.0 / 120.0),
            T::from_f64(0.5) - t2.scale(1.0 / 24.0) + t4.scale(1.0 / 720.0),
        )
    } else {
        let angle = angle_sq.sqrt();
        let half_sin = angle.scale(0.5).sin();
        (
            angle.sin() / angle,
            (half_sin * half_sin).scale(2.0) / angle_sq,
        )
    }
}

/// Exponential map (Rodrigues' formula).
pub fn exp_so3<T: Real>(psi: &RotationVector<T>) -> RotationTriad<T> {
    let angle_sq = dot(psi, psi);
    let (a, b) = rodrigues_coefficients(angle_sq);
    let s = skew(psi);
    Matrix3::identity() + s * a + (s * s) * b
}

/// Logarithm map, `‖ψ‖ ≤ π`.
///
/// The rotation is first converted to a unit quaternion with Shepperd's
/// largest-pivot rule, which stays accurate up to and including half turns.
/// Within `1e-12` of `π` the sign is fixed so that the first non-negligible
/// component of the axis is positive.
pub fn log_so3<T: Real>(m: &RotationTriad<T>) -> RotationVector<T> {
    let (mut w, mut v) = quaternion_from_triad(m);
    if w.value() < 0.0 {
        w = -w;
        v = -v;
    }
    if w.value() < 1e-12 {
        if let Some(first) = v.iter().find(|c| c.value().abs() > 1e-12) {
            if first.value() < 0.0 {
                v = -v;
            }
        }
    }
    let s_sq = dot(&v, &v);
    let w_sq = w * w;
    if w.value() > 0.0 && s_sq.value() < SERIES_THRESHOLD_SQ * w_sq.value() {
        // 2 atan(u)/u with u = s/w, expanded in u².
        let u2 = s_sq / w_sq;
        let factor = (T::one() - u2.scale(1.0 / 3.0) + (u2 * u2).scale(0.2)).scale(2.0) / w;
        v * factor
    } else {
        let s = s_sq.sqrt();
        let angle = s.atan2(w).scale(2.0);
        v * (angle / s)
    }
}

/// Unit quaternion `(w, v)` of a rotation matrix (Shepperd's method).
fn quaternion_from_triad<T: Real>(m: &RotationTriad<T>) -> (T, Vector3<T>) {
    let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let diag = [m[(0, 0)].value(), m[(1, 1)].value(), m[(2, 2)].value()];
    let mut best = 3;
    let mut best_val = trace.value();
    for (i, &d) in diag.iter().enumerate() {
        if d > best_val {
            best = i;
            best_val = d;
        }
    }
    let quarter = |x: T| x.scale(0.25);
    let one = T::one();
    match best {
        3 => {
            let w = (one + trace).sqrt().scale(0.5);
            let inv = quarter(one) / w;
            let v = Vector3::new(
                (m[(2, 1)] - m[(1, 2)]) * inv,
                (m[(0, 2)] - m[(2, 0)]) * inv,
                (m[(1, 0)] - m[(0, 1)]) * inv,
            );
            (w, v)
        }
        0 => {
            let x = (one + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt().scale(0.5);
            let inv = quarter(one) / x;
            (
                (m[(2, 1)] - m[(1, 2)]) * inv,
                Vector3::new(
                    x,
                    (m[(0, 1)] + m[(1, 0)]) * inv,
                    (m[(0, 2)] + m[(2, 0)]) * inv,
                ),
            )
        }
        1 => {
            let y = (one - m[(0, 0)] + m[(1, 1)] - m[(2, 2)]).sqrt().scale(0.5);
            let inv = quarter(one) / y;
            (
                (m[(0, 2)] - m[(2, 0)]) * inv,
                Vector3::new(
                    (m[(0, 1)] + m[(1, 0)]) * inv,
                    y,
                    (m[(1, 2)] + m[(2, 1)]) * inv,
                ),
            )
        }
        _ => {
            let z = (one - m[(0, 0)] - m[(1, 1)] + m[(2, 2)]).sqrt().scale(0.5);
            let inv = quarter(one) / z;
            (
                (m[(1, 0)] - m[(0, 1)]) * inv,
                Vector3::new(
                    (m[(0, 2)] + m[(2, 0)]) * inv,
                    (m[(1, 2)] + m[(2, 1)]) * inv,
                    z,
                ),
            )
        }
    }
}

/// Tangent map `T(ψ)` with `δψ = T(ψ) δθ`.
pub fn tangent_map<T: Real>(psi: &RotationVector<T>) -> Matrix3<T> {
    let angle_sq = dot(psi, psi);
    // c = (ψ/2) cot(ψ/2) and (1 − c)/ψ²
    let (c, d) = if angle_sq.value() < SERIES_THRESHOLD_SQ {
        let t2 = angle_sq;
        let t4 = t2 * t2;
        (
            T::one() - t2.scale(1.0 / 12.0) - t4.scale(1.0 / 720.0),
            T::from_f64(1.0 / 12.0) + t2.scale(1.0 / 720.0) + t4.scale(1.0 / 30240.0),
        )
    } else {
        let half = angle_sq.sqrt().scale(0.5);
        let c = half * half.cos() / half.sin();
        (c, (T::one() - c) / angle_sq)
    };
    Matrix3::identity() * c + (psi * psi.transpose()) * d - skew(psi).map(|x| x.scale(0.5))
}

/// Inverse tangent map, `δθ = T⁻¹(ψ) δψ`.
pub fn tangent_map_inverse<T: Real>(psi: &RotationVector<T>) -> Matrix3<T> {
    let angle_sq = dot(psi, psi);
    let (a, b) = rodrigues_coefficients(angle_sq);
    // (1 − sin ψ/ψ)/ψ²
    let e = if angle_sq.value() < SERIES_THRESHOLD_SQ {
        let t2 = angle_sq;
        T::from_f64(1.0 / 6.0) - t2.scale(1.0 / 120.0) + (t2 * t2).scale(1.0 / 5040.0)
    } else {
        (T::one() - a) / angle_sq
    };
    let s = skew(psi);
    Matrix3::identity() + s * b + (s * s) * e
}

/// `Λ₂ Λ₁ᵀ`.
#[inline]
pub fn relative_rotation<T: Real>(
    lambda1: &RotationTriad<T>,
    lambda2: &RotationTriad<T>,
) -> RotationTriad<T> {
    lambda2 * lambda1.transpose()
}

/// Frobenius deviation from orthonormality and `|det − 1|`.
pub fn orthonormality_defect(m: &RotationTriad) -> (f64, f64) {
    let gram = m.transpose() * m - Matrix3::identity();
    (gram.norm(), (m.determinant() - 1.0).abs())
}

/// True when `m` is a proper rotation to within `tol`.
pub fn is_rotation(m: &RotationTriad, tol: f64) -> bool {
    let (orth, det) = orthonormality_defect(m);
    m.iter().all(|x| x.is_finite()) && orth <= tol && det <= tol
}

/// Triad whose first base vector is `tangent`; the second is the projection
/// of `seed` onto the plane normal to the tangent.
///
/// Returns `None` when `tangent` vanishes or is parallel to `seed`.
pub fn triad_from_tangent(tangent: &Vector3<f64>, seed: &Vector3<f64>) -> Option<RotationTriad> {
    let n = tangent.norm();
    if n < 1e-14 {
        return None;
    }
    let g1 = tangent / n;
    let g2 = seed - g1 * g1.dot(seed);
    let m = g2.norm();
    if m < 1e-8 {
        return None;
    }
    let g2 = g2 / m;
    let g3 = g1.cross(&g2);
    Some(Matrix3::from_columns(&[g1, g2, g3]))
}

/// Triad with first base vector along `tangent`, obtained from the global
/// frame by the smallest rotation that maps `e₁` onto the tangent.
pub fn triad_smallest_rotation(tangent: &Vector3<f64>) -> Option<RotationTriad> {
    let n = tangent.norm();
    if n < 1e-14 {
        return None;
    }
    let t = tangent / n;
    let e1 = Vector3::x();
    let axis = e1.cross(&t);
    let s = axis.norm();
    let c = e1.dot(&t);
    if s < 1e-14 {
        return Some(if c > 0.0 {
            Matrix3::identity()
        } else {
            // half turn about e3 keeps e3 fixed
            Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0))
        });
    }
    let angle = s.atan2(c);
    Some(exp_so3(&(axis * (angle / s))))
}
