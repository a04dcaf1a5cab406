//! The Study compactification of SE(3), half-turns about lines, and the
//! pointwise sphere condition.
//!
//! Points are written in the coordinates (h, M, x, y, r): a homogeneous
//! scalar, a 3x3 matrix block, two translation-like vectors, and one extra
//! coordinate tied to the squared translation length. Real points with
//! h != 0 are direct isometries acting by p -> (M p + y) / h.

use nalgebra::{Matrix3, Vector3, Vector4};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StudyError {
    #[error("rotation input is not special orthogonal (residual {0:.2e})")]
    NonOrthogonalInput(f64),
    #[error("boundary point (h = 0) has no affine action")]
    BoundaryPoint,
}

/// A point of the compactified motion variety, defined up to common scale.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyPoint {
    pub h: f64,
    pub m: Matrix3<f64>,
    pub x: Vector3<f64>,
    pub y: Vector3<f64>,
    pub r: f64,
}

impl StudyPoint {
    pub const IDENTITY: StudyPoint = StudyPoint {
        h: 1.0,
        m: Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0),
        x: Vector3::new(0.0, 0.0, 0.0),
        y: Vector3::new(0.0, 0.0, 0.0),
        r: 0.0,
    };

    /// All 17 homogeneous coordinates, in the order (h, m11..m33 row-major, x, y, r).
    pub fn coords(&self) -> [f64; 17] {
        let m = &self.m;
        [
            self.h,
            m[(0, 0)], m[(0, 1)], m[(0, 2)],
            m[(1, 0)], m[(1, 1)], m[(1, 2)],
            m[(2, 0)], m[(2, 1)], m[(2, 2)],
            self.x[0], self.x[1], self.x[2],
            self.y[0], self.y[1], self.y[2],
            self.r,
        ]
    }

    pub fn scaled(&self, k: f64) -> StudyPoint {
        StudyPoint { h: k * self.h, m: k * self.m, x: k * self.x, y: k * self.y, r: k * self.r }
    }

    fn max_coord(&self) -> f64 {
        self.coords().iter().fold(0.0, |acc, c| acc.max(c.abs()))
    }

    /// Scale to h = 1 when h dominates roundoff, otherwise to unit max-norm
    /// (boundary points). Makes residual tolerances meaningful.
    pub fn normalized(&self) -> StudyPoint {
        let big = self.max_coord();
        if big == 0.0 {
            return self.clone();
        }
        if self.h.abs() > 1e-12 * big {
            self.scaled(1.0 / self.h)
        } else {
            self.scaled(1.0 / big)
        }
    }

    /// Largest residual of the defining equations of the motion variety:
    /// M Mt = Mt M = h^2 I, det M = h^3, Mt y + h x = 0, M x + h y = 0,
    /// <x,x> = <y,y> = r h. Evaluated after normalization.
    pub fn max_defining_residual(&self) -> f64 {
        let s = self.normalized();
        let h2 = s.h * s.h;
        let id2 = Matrix3::identity() * h2;
        let mut worst: f64 = 0.0;
        let mut upd = |v: f64| worst = worst.max(v.abs());
        upd((s.m * s.m.transpose() - id2).norm());
        upd((s.m.transpose() * s.m - id2).norm());
        upd(s.m.determinant() - s.h * h2);
        upd((s.m.transpose() * s.y + s.h * s.x).norm());
        upd((s.m * s.x + s.h * s.y).norm());
        upd(s.x.dot(&s.x) - s.r * s.h);
        upd(s.y.dot(&s.y) - s.r * s.h);
        worst
    }

    /// Affine action p -> (M p + y) / h.
    pub fn apply(&self, p: &Vector3<f64>) -> Result<Vector3<f64>, StudyError> {
        if self.h.abs() <= 1e-12 * self.max_coord() {
            return Err(StudyError::BoundaryPoint);
        }
        Ok((self.m * p + self.y) / self.h)
    }
}

/// A line in R^3 held as a canonical foot point and unit direction:
/// |u| = 1, <c,u> = 0, first nonzero coordinate of u positive.
#[derive(Debug, Clone, PartialEq)]
pub struct LineR3 {
    c: Vector3<f64>,
    u: Vector3<f64>,
}

impl LineR3 {
    /// Canonicalizes; `None` when the direction is (numerically) zero.
    pub fn new(c: Vector3<f64>, u: Vector3<f64>) -> Option<LineR3> {
        let n = u.norm();
        if n < 1e-300 {
            return None;
        }
        let mut u = u / n;
        for k in 0..3 {
            if u[k] != 0.0 {
                if u[k] < 0.0 {
                    u = -u;
                }
                break;
            }
        }
        let c = c - c.dot(&u) * u;
        Some(LineR3 { c, u })
    }

    pub fn c(&self) -> &Vector3<f64> {
        &self.c
    }

    pub fn u(&self) -> &Vector3<f64> {
        &self.u
    }

    /// Pluecker pair (u, c x u); its two halves are orthogonal by construction.
    pub fn plucker(&self) -> (Vector3<f64>, Vector3<f64>) {
        (self.u, self.c.cross(&self.u))
    }

    /// Distance between lines as point sets: direction compared up to sign.
    pub fn distance(&self, other: &LineR3) -> f64 {
        let d_plus = (self.u - other.u).norm();
        let d_minus = (self.u + other.u).norm();
        d_plus.min(d_minus) + (self.c - other.c).norm()
    }
}

/// Euler-parameter quadruple (e0, e1, e2, e3) of a rotation; for a half-turn
/// e0 = 0 and (e1 : e2 : e3) is the axis direction.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerPoint {
    pub e: Vector4<f64>,
}

impl EulerPoint {
    pub fn from_line(line: &LineR3) -> EulerPoint {
        let u = line.u();
        EulerPoint { e: Vector4::new(0.0, u[0], u[1], u[2]) }
    }

    pub fn from_rotation(m: &Matrix3<f64>) -> EulerPoint {
        let rot = nalgebra::Rotation3::from_matrix(m);
        let q = nalgebra::UnitQuaternion::from_rotation_matrix(&rot);
        let mut e = Vector4::new(q.w, q.i, q.j, q.k);
        for k in 0..4 {
            if e[k] != 0.0 {
                if e[k] < 0.0 {
                    e = -e;
                }
                break;
            }
        }
        EulerPoint { e }
    }
}

/// Embed a direct isometry (R, t): h = 1, M = R, y = t, x = -Rt t, r = <t,t>.
pub fn embed_isometry(
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
) -> Result<StudyPoint, StudyError> {
    let ortho = (rotation * rotation.transpose() - Matrix3::identity()).norm();
    let det = (rotation.determinant() - 1.0).abs();
    let residual = ortho.max(det);
    if residual > 1e-10 {
        return Err(StudyError::NonOrthogonalInput(residual));
    }
    let y = *translation;
    Ok(StudyPoint {
        h: 1.0,
        m: *rotation,
        x: -(rotation.transpose() * y),
        y,
        r: y.dot(&y),
    })
}

/// The half-turn about a line: M = 2uut - I, x = y = 2c, r = 4|c|^2.
/// Always lands on the involution slice (M symmetric, x = y, tr M + h = 0).
pub fn line_to_halfturn(line: &LineR3) -> StudyPoint {
    let u = line.u();
    let c = line.c();
    let m = 2.0 * u * u.transpose() - Matrix3::identity();
    let y = 2.0 * c;
    StudyPoint { h: 1.0, m, x: y, y, r: y.dot(&y) }
}

/// The sphere condition l*h + r - 2<a,x> - 2<y,b> - 2<Ma,b> with the
/// corrected leg length l = <a,a> + <b,b> - d2. Zero iff the platform point
/// `a` is at squared distance `d2` from the base point `b` in this pose.
pub fn sphere_residual(point: &StudyPoint, a: &Vector3<f64>, b: &Vector3<f64>, d2: f64) -> f64 {
    let s = point.normalized();
    let l = a.dot(a) + b.dot(b) - d2;
    l * s.h + s.r - 2.0 * a.dot(&s.x) - 2.0 * s.y.dot(b) - 2.0 * (s.m * a).dot(b)
}

/// True when the point lies on the involution slice: M = Mt, x = y, and
/// m11 + m22 + m33 + h = 0, all within `tol` after normalization.
pub fn is_involution_point(point: &StudyPoint, tol: f64) -> bool {
    let s = point.normalized();
    (s.m - s.m.transpose()).norm() < tol
        && (s.x - s.y).norm() < tol
        && (s.m.trace() + s.h).abs() < tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line(c: [f64; 3], u: [f64; 3]) -> LineR3 {
        LineR3::new(Vector3::from(c), Vector3::from(u)).unwrap()
    }

    #[test]
    fn identity_embedding() {
        let s = embed_isometry(&Matrix3::identity(), &Vector3::zeros()).unwrap();
        assert_eq!(s.h, 1.0);
        assert_eq!(s.r, 0.0);
        assert_eq!(s.x, Vector3::zeros());
        assert!(s.max_defining_residual() < 1e-15);
    }

    #[test]
    fn translation_embedding() {
        let t = Vector3::new(1.0, 2.0, 3.0);
        let s = embed_isometry(&Matrix3::identity(), &t).unwrap();
        assert_eq!(s.y, t);
        assert_eq!(s.x, -t);
        assert_eq!(s.r, 14.0);
        assert!(s.max_defining_residual() < 1e-12);
    }

    #[test]
    fn z_halfturn_embedding() {
        let m = Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0));
        let s = embed_isometry(&m, &Vector3::zeros()).unwrap();
        assert_eq!(s.m.trace() + s.h, 0.0);
        assert!(is_involution_point(&s, 1e-12));
    }

    #[test]
    fn non_orthogonal_rejected() {
        let mut m = Matrix3::identity();
        m[(0, 1)] = 1e-3;
        assert!(matches!(
            embed_isometry(&m, &Vector3::zeros()),
            Err(StudyError::NonOrthogonalInput(_))
        ));
        // reflections fail on the determinant
        let refl = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(embed_isometry(&refl, &Vector3::zeros()).is_err());
    }

    #[test]
    fn halfturn_about_z_axis() {
        let s = line_to_halfturn(&line([0.0, 0.0, 0.0], [0.0, 0.0, 1.0]));
        assert_abs_diff_eq!(s.m, Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0)));
        assert_eq!(s.x, Vector3::zeros());
        assert_eq!(s.r, 0.0);
        let p = s.apply(&Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(p, Vector3::new(-1.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn halfturn_offset_axis() {
        let s = line_to_halfturn(&line([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]));
        assert_abs_diff_eq!(s.y, Vector3::new(2.0, 0.0, 0.0));
        assert_eq!(s.r, 4.0);
        assert!(s.max_defining_residual() < 1e-12);
        assert!(is_involution_point(&s, 1e-12));
    }

    #[test]
    fn halfturn_is_an_involution() {
        let s = line_to_halfturn(&line([0.3, -0.2, 0.9], [1.0, 2.0, -0.5]));
        let p = Vector3::new(0.4, -1.1, 2.0);
        let q = s.apply(&s.apply(&p).unwrap()).unwrap();
        assert_abs_diff_eq!(p, q, epsilon = 1e-12);
    }

    #[test]
    fn identity_is_not_an_involution_point() {
        assert!(!is_involution_point(&StudyPoint::IDENTITY, 1e-12));
        let t = embed_isometry(&Matrix3::identity(), &Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(!is_involution_point(&t, 1e-12));
    }

    #[test]
    fn sphere_residual_defining_property() {
        let s = line_to_halfturn(&line([0.1, 0.7, -0.3], [0.2, 1.0, 0.4]));
        let a = Vector3::new(0.3, -0.5, 0.8);
        let b = Vector3::new(-1.0, 0.2, 0.6);
        let d2 = (s.apply(&a).unwrap() - b).norm_squared();
        assert!(sphere_residual(&s, &a, &b, d2).abs() < 1e-12);
    }

    #[test]
    fn sphere_residual_identity_coincident() {
        let a = Vector3::new(0.5, 0.25, -1.0);
        assert_abs_diff_eq!(sphere_residual(&StudyPoint::IDENTITY, &a, &a, 0.0), 0.0);
    }

    #[test]
    fn boundary_point_has_no_action() {
        let mut s = StudyPoint::IDENTITY;
        s.h = 0.0;
        assert_eq!(s.apply(&Vector3::zeros()), Err(StudyError::BoundaryPoint));
    }

    #[test]
    fn line_canonicalization() {
        let l = line([1.0, 1.0, 0.0], [0.0, 0.0, -2.0]);
        // direction flipped positive and normalized, foot point orthogonal to it
        assert_abs_diff_eq!(*l.u(), Vector3::new(0.0, 0.0, 1.0));
        assert!(l.c().dot(l.u()).abs() < 1e-15);
        let (u, m) = l.plucker();
        assert!(u.dot(&m).abs() < 1e-15);
        assert!(LineR3::new(Vector3::zeros(), Vector3::zeros()).is_none());
    }

    #[test]
    fn euler_point_of_halfturn() {
        let l = line([0.0, 0.4, 0.0], [3.0, 0.0, 4.0]);
        let s = line_to_halfturn(&l);
        let e = EulerPoint::from_rotation(&s.m);
        assert!(e.e[0].abs() < 1e-12);
        let axis = Vector3::new(e.e[1], e.e[2], e.e[3]);
        assert!((axis - l.u()).norm() < 1e-12 || (axis + l.u()).norm() < 1e-12);
        assert_abs_diff_eq!(EulerPoint::from_line(&l).e[0], 0.0);
    }
}
