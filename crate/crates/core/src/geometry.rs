//! Small 3D math kernel used by every other module: vectors, unit
//! quaternions, orthonormal bases, ground projection and angles.

use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use libm::{acos, atan2, cos, sin, sqrt};

use crate::error::GeometryError;

/// Global up axis. The ground plane is `z = 0`.
pub const Z_UP: Vec3 = Vec3::new(0.0, 0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        sqrt(self.norm_squared())
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` when the norm is below
    /// `1e-12`.
    pub fn try_normalize(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 1e-12 && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn normalize(self) -> Result<Vec3, GeometryError> {
        self.try_normalize().ok_or(GeometryError::ZeroNorm)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn lerp(self, o: Vec3, t: f64) -> Vec3 {
        self + (o - self) * t
    }

    /// Component of `self` orthogonal to the unit vector `n`.
    pub fn reject(self, n: Vec3) -> Vec3 {
        self - n * self.dot(n)
    }

    pub fn max_abs_diff(self, o: Vec3) -> f64 {
        let d = self - o;
        d.x.abs().max(d.y.abs()).max(d.z.abs())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, k: f64) -> Vec3 {
        Vec3::new(self.x / k, self.y / k, self.z / k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Drops the vertical component. The result is not normalized.
pub fn project_ground(v: Vec3) -> Vec3 {
    Vec3::new(v.x, v.y, 0.0)
}

/// Angle in `[0, π]` between two non-zero vectors. The cosine is clamped so
/// rounding never produces NaN.
pub fn angle_between(u: Vec3, v: Vec3) -> Result<f64, GeometryError> {
    let nu = u.norm();
    let nv = v.norm();
    if !(nu > 1e-9 && nv > 1e-9) {
        return Err(GeometryError::ZeroNorm);
    }
    let c = (u.dot(v) / (nu * nv)).clamp(-1.0, 1.0);
    Ok(acos(c))
}

/// Rotates `v` about the unit `axis` by `angle` radians (Rodrigues).
pub fn rotate_about(v: Vec3, axis: Vec3, angle: f64) -> Vec3 {
    let (s, c) = (sin(angle), cos(angle));
    v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c))
}

/// Some unit vector orthogonal to the unit vector `v`, picked
/// deterministically from the world axis least aligned with it.
pub fn any_orthogonal(v: Vec3) -> Vec3 {
    let (ax, ay, az) = (v.x.abs(), v.y.abs(), v.z.abs());
    let helper = if ax <= ay && ax <= az {
        Vec3::X
    } else if ay <= az {
        Vec3::Y
    } else {
        Vec3::Z
    };
    // helper is never parallel to v here
    v.cross(helper).try_normalize().unwrap_or(Vec3::X)
}

/// Rotation quaternion, kept at unit norm with `w ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for UnitQuat {
    fn default() -> Self {
        UnitQuat::IDENTITY
    }
}

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes and canonicalizes arbitrary components.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let n = sqrt(w * w + x * x + y * y + z * z);
        if !(n > 1e-12) || !n.is_finite() {
            return Err(GeometryError::ZeroNorm);
        }
        Ok(UnitQuat {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        }
        .canonical())
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self, GeometryError> {
        UnitQuat::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, GeometryError> {
        let a = axis.normalize()?;
        let (s, c) = (sin(angle / 2.0), cos(angle / 2.0));
        Ok(UnitQuat {
            w: c,
            x: a.x * s,
            y: a.y * s,
            z: a.z * s,
        }
        .canonical())
    }

    /// Quaternion of the rotation whose matrix has columns `basis`.
    pub fn from_basis(b: &Basis) -> Self {
        let (m00, m10, m20) = (b.c1.x, b.c1.y, b.c1.z);
        let (m01, m11, m21) = (b.c2.x, b.c2.y, b.c2.z);
        let (m02, m12, m22) = (b.c3.x, b.c3.y, b.c3.z);
        let trace = m00 + m11 + m22;
        let (w, x, y, z) = if trace > 0.0 {
            let s = sqrt(trace + 1.0) * 2.0;
            (0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s)
        } else if m00 > m11 && m00 > m22 {
            let s = sqrt(1.0 + m00 - m11 - m22) * 2.0;
            ((m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s)
        } else if m11 > m22 {
            let s = sqrt(1.0 + m11 - m00 - m22) * 2.0;
            ((m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s)
        } else {
            let s = sqrt(1.0 + m22 - m00 - m11) * 2.0;
            ((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s)
        };
        UnitQuat::new(w, x, y, z).unwrap_or(UnitQuat::IDENTITY)
    }

    /// Flips sign so that `w ≥ 0`; for `w == 0` the first non-zero vector
    /// component is made positive.
    pub fn canonical(self) -> Self {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else if self.x != 0.0 {
            self.x < 0.0
        } else if self.y != 0.0 {
            self.y < 0.0
        } else {
            self.z < 0.0
        };
        if flip {
            UnitQuat {
                w: -self.w,
                x: -self.x,
                y: -self.y,
                z: -self.z,
            }
        } else {
            self
        }
    }

    pub fn dot(self, o: UnitQuat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn conjugate(self) -> Self {
        UnitQuat {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Hamilton product `self * o` (apply `o` first).
    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, o: UnitQuat) -> Self {
        let (a, b) = (self, o);
        UnitQuat {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    /// Rotation angle in `[0, π]` taking `self` to `o`.
    pub fn angle_to(self, o: UnitQuat) -> f64 {
        let d = self.dot(o).abs().min(1.0);
        2.0 * acos(d)
    }

    pub fn max_abs_diff(self, o: UnitQuat) -> f64 {
        let a = self.canonical();
        let b = o.canonical();
        (a.w - b.w)
            .abs()
            .max((a.x - b.x).abs())
            .max((a.y - b.y).abs())
            .max((a.z - b.z).abs())
    }
}

/// Spherical linear interpolation along the shorter arc.
///
/// When the two rotations are a half-turn apart (`|a·b| < 1e-6`) both arcs
/// have the same length; the path toward `b` exactly as given is used,
/// which is deterministic because stored quaternions are canonical.
pub fn slerp_unit(a: UnitQuat, b: UnitQuat, t: f64) -> UnitQuat {
    let mut d = a.dot(b);
    let mut b = b;
    if d < 0.0 && d.abs() >= 1e-6 {
        b = UnitQuat {
            w: -b.w,
            x: -b.x,
            y: -b.y,
            z: -b.z,
        };
        d = -d;
    }
    let d = d.min(1.0);
    let (ka, kb) = if d > 1.0 - 1e-12 {
        (1.0 - t, t)
    } else {
        let omega = acos(d);
        let so = sin(omega);
        (sin((1.0 - t) * omega) / so, sin(t * omega) / so)
    };
    UnitQuat::new(
        a.w * ka + b.w * kb,
        a.x * ka + b.x * kb,
        a.y * ka + b.y * kb,
        a.z * ka + b.z * kb,
    )
    .unwrap_or(a)
}

/// Right-handed orthonormal frame stored by columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis {
    pub c1: Vec3,
    pub c2: Vec3,
    pub c3: Vec3,
}

impl Basis {
    /// Builds `[a, b, a × b]`, checking that `a` and `b` are orthonormal
    /// within `1e-6`.
    pub fn from_two(a: Vec3, b: Vec3) -> Result<Self, GeometryError> {
        let basis = Basis {
            c1: a,
            c2: b,
            c3: a.cross(b),
        };
        if basis.is_orthonormal(1e-6) {
            Ok(basis)
        } else {
            Err(GeometryError::NotOrthonormal)
        }
    }

    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let unit = |v: Vec3| (v.norm() - 1.0).abs() <= tol;
        unit(self.c1)
            && unit(self.c2)
            && unit(self.c3)
            && self.c1.dot(self.c2).abs() <= tol
            && self.c1.dot(self.c3).abs() <= tol
            && self.c2.dot(self.c3).abs() <= tol
            && self.c1.cross(self.c2).dot(self.c3) > 0.0
    }

    /// `Rᵀ·v`, the coordinates of `v` in this frame.
    pub fn transpose_mul(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.c1.dot(v), self.c2.dot(v), self.c3.dot(v))
    }

    pub fn mul(&self, v: Vec3) -> Vec3 {
        self.c1 * v.x + self.c2 * v.y + self.c3 * v.z
    }
}

/// `atan2` re-exported for modules that convert in-disk offsets to angles.
pub fn angle_in_plane(y: f64, x: f64) -> f64 {
    atan2(y, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn slerp_identity_case() {
        let q = UnitQuat::from_axis_angle(Vec3::new(0.3, -1.0, 2.0), 0.7).unwrap();
        assert!(slerp_unit(q, q, 0.5).max_abs_diff(q) < 1e-12);
    }

    #[test]
    fn slerp_half_of_quarter_turn() {
        let b = UnitQuat::from_axis_angle(Vec3::Z, FRAC_PI_2).unwrap();
        let want = UnitQuat::from_axis_angle(Vec3::Z, FRAC_PI_4).unwrap();
        assert!(slerp_unit(UnitQuat::IDENTITY, b, 0.5).max_abs_diff(want) < 1e-12);
    }

    #[test]
    fn slerp_third_composes_to_endpoint() {
        let axis = Vec3::new(1.0, 1.0, 1.0);
        let end = UnitQuat::from_axis_angle(axis, 2.0 * PI / 3.0).unwrap();
        let third = slerp_unit(UnitQuat::IDENTITY, end, 1.0 / 3.0);
        let want = UnitQuat::from_axis_angle(axis, 2.0 * PI / 9.0).unwrap();
        assert!(third.max_abs_diff(want) < 1e-12);
        let composed = third.mul(third).mul(third);
        assert!(composed.max_abs_diff(end) < 1e-12);
    }

    #[test]
    fn slerp_endpoints() {
        let a = UnitQuat::from_axis_angle(Vec3::X, 0.4).unwrap();
        let b = UnitQuat::from_axis_angle(Vec3::Y, 2.5).unwrap();
        assert!(slerp_unit(a, b, 0.0).max_abs_diff(a) < 1e-12);
        assert!(slerp_unit(a, b, 1.0).max_abs_diff(b) < 1e-12);
    }

    #[test]
    fn slerp_half_turn_apart_is_deterministic() {
        let b = UnitQuat::from_axis_angle(Vec3::X, PI).unwrap();
        let m1 = slerp_unit(UnitQuat::IDENTITY, b, 0.5);
        let m2 = slerp_unit(UnitQuat::IDENTITY, b, 0.5);
        assert_eq!(m1, m2);
        assert!((UnitQuat::IDENTITY.angle_to(m1) - FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn ground_projection_examples() {
        assert_eq!(project_ground(Vec3::new(0.0, 0.0, 1.0)), Vec3::ZERO);
        assert_eq!(project_ground(Vec3::new(1.0, 0.0, 0.5)), Vec3::X);
        let v = Vec3::new(0.6, 0.8, 0.0);
        assert_eq!(project_ground(v), v);
    }

    #[test]
    fn angle_examples() {
        assert_eq!(angle_between(Vec3::X, Vec3::X).unwrap(), 0.0);
        assert!((angle_between(Vec3::X, Vec3::Y).unwrap() - FRAC_PI_2).abs() < 1e-15);
        let a = angle_between(Vec3::X, Vec3::new(-1.0, 1e-12, 0.0)).unwrap();
        assert!((a - PI).abs() < 1e-6);
        assert!(!a.is_nan());
        assert_eq!(angle_between(Vec3::ZERO, Vec3::X), Err(GeometryError::ZeroNorm));
    }

    #[test]
    fn basis_from_user_axes() {
        let b = Basis::from_two(Vec3::new(0.0, -1.0, 0.0), Vec3::X).unwrap();
        assert!(b.c3.max_abs_diff(Vec3::Z) < 1e-15);
        assert!(Basis::from_two(Vec3::X, Vec3::X).is_err());
    }

    #[test]
    fn quat_basis_round_trip() {
        let q = UnitQuat::from_axis_angle(Vec3::new(0.2, 0.5, -0.3), 2.9).unwrap();
        let b = Basis {
            c1: q.rotate(Vec3::X),
            c2: q.rotate(Vec3::Y),
            c3: q.rotate(Vec3::Z),
        };
        assert!(UnitQuat::from_basis(&b).max_abs_diff(q) < 1e-12);
    }

    #[test]
    fn rodrigues_matches_quaternion() {
        let axis = Vec3::new(1.0, 2.0, -0.5).normalize().unwrap();
        let v = Vec3::new(0.3, -0.1, 0.9);
        let q = UnitQuat::from_axis_angle(axis, 1.1).unwrap();
        assert!(rotate_about(v, axis, 1.1).max_abs_diff(q.rotate(v)) < 1e-12);
    }
}
