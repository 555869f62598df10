//! Dynamic input mapping: assigns the two joystick axes to the two
//! correction axes of the current disk, with signs, depending on how the
//! disk is oriented and where it sits relative to the user.
//!
//! Disks are classified by the inclination `θ` of their tangent from
//! `Z_UP`:
//!
//! * near-horizontal disks have their correction axes projected onto the
//!   ground and matched against `j_x`/`j_y` by dot product;
//! * near-vertical disks send "forward" to the more vertical axis (so
//!   pushing forward moves up) and "right" to the other one, whose sign
//!   depends on whether the disk faces the user or sits sideways to their
//!   left or right.
//!
//! Two band rules are available through [`Classification`]. `Prose` treats
//! a disk as near-horizontal when its tangent is near vertical
//! (`θ ≤ π/3` or `θ ≥ 2π/3`). `Literal` uses the opposite band
//! (`π/3 < θ < 2π/3`) and otherwise follows the reference pseudocode to
//! the letter, including cases where both joystick axes select the same
//! correction axis.

use core::f64::consts::{FRAC_PI_3, FRAC_PI_6};

use crate::canal_model::Canal;
use crate::error::MappingError;
use crate::geometry::{angle_between, project_ground, Basis, Vec3, Z_UP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Classification {
    #[default]
    Prose,
    Literal,
}

/// The viewer's ground-plane right (`j_x`) and forward (`j_y`) directions
/// and position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserFrame {
    pub j_x: Vec3,
    pub j_y: Vec3,
    pub origin: Vec3,
}

impl UserFrame {
    /// Frame for a user at `origin` looking along `facing` (projected to
    /// the ground). Right is `facing × up`.
    pub fn facing(origin: Vec3, facing: Vec3) -> Result<Self, MappingError> {
        let j_y = project_ground(facing)
            .try_normalize()
            .ok_or(MappingError::InvalidUserFrame)?;
        let j_x = j_y.cross(Z_UP);
        Ok(UserFrame { j_x, j_y, origin })
    }

    pub fn new(j_x: Vec3, j_y: Vec3, origin: Vec3) -> Result<Self, MappingError> {
        let ok = (j_x.norm() - 1.0).abs() < 1e-9
            && (j_y.norm() - 1.0).abs() < 1e-9
            && j_x.dot(j_y).abs() < 1e-9
            && j_x.z.abs() < 1e-9
            && j_y.z.abs() < 1e-9
            && j_x.cross(j_y).z > 0.0;
        if ok {
            Ok(UserFrame { j_x, j_y, origin })
        } else {
            Err(MappingError::InvalidUserFrame)
        }
    }

    /// `R = [j_x j_y (j_x × j_y)]`.
    pub fn basis(&self) -> Basis {
        Basis {
            c1: self.j_x,
            c2: self.j_y,
            c3: self.j_x.cross(self.j_y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiskClass {
    NearHorizontal,
    NearVerticalFacingUser,
    NearVerticalSideways(Side),
}

impl DiskClass {
    pub fn label(self) -> &'static str {
        match self {
            DiskClass::NearHorizontal => "near-horizontal",
            DiskClass::NearVerticalFacingUser => "facing-user",
            DiskClass::NearVerticalSideways(Side::Left) => "sideways-left",
            DiskClass::NearVerticalSideways(Side::Right) => "sideways-right",
        }
    }
}

/// Joystick→correction assignment for one disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedCorrection {
    pub a_x: Vec3,
    pub a_y: Vec3,
    pub d_x: f64,
    pub d_y: f64,
    pub class: DiskClass,
}

fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn is_near_horizontal(theta: f64, mode: Classification) -> bool {
    let band = FRAC_PI_3 < theta && theta < 2.0 * FRAC_PI_3;
    match mode {
        Classification::Literal => band,
        Classification::Prose => !band,
    }
}

/// Of `x` and `y`, returns `(more vertical, other)`; ties pick `x` as the
/// vertical one.
fn split_vertical(x: Vec3, y: Vec3) -> (Vec3, Vec3) {
    if y.dot(Z_UP).abs() > x.dot(Z_UP).abs() {
        (y, x)
    } else {
        (x, y)
    }
}

fn vertical_facing(
    e_t: Vec3,
    x: Vec3,
    y: Vec3,
    user: &UserFrame,
    d: Vec3,
    mode: Classification,
) -> Result<(DiskClass, Vec3), MappingError> {
    let theta = angle_between(e_t, Z_UP).map_err(|_| MappingError::DegenerateProjection)?;
    if is_near_horizontal(theta, mode) {
        return Ok((DiskClass::NearHorizontal, Vec3::ZERO));
    }
    let (_, a_x) = split_vertical(x, y);
    let p_x = project_ground(a_x);
    if p_x.norm() < 1e-9 {
        return Err(MappingError::DegenerateProjection);
    }
    let theta_ax = angle_between(p_x, user.j_y).map_err(|_| MappingError::DegenerateProjection)?;
    if FRAC_PI_6 < theta_ax && theta_ax < 5.0 * FRAC_PI_6 {
        return Ok((DiskClass::NearVerticalFacingUser, p_x));
    }
    let local = user.basis().transpose_mul(d - user.origin);
    let side = if local.x < 0.0 { Side::Left } else { Side::Right };
    Ok((DiskClass::NearVerticalSideways(side), p_x))
}

/// Classifies the disk with tangent `e_t`, axes `x`/`y` and center `d`.
pub fn classify_disk(
    e_t: Vec3,
    x: Vec3,
    y: Vec3,
    user: &UserFrame,
    d: Vec3,
    mode: Classification,
) -> Result<DiskClass, MappingError> {
    vertical_facing(e_t, x, y, user, d, mode).map(|(c, _)| c)
}

/// Maps joystick axes onto an arbitrary disk.
pub fn map_disk(
    e_t: Vec3,
    x: Vec3,
    y: Vec3,
    d: Vec3,
    user: &UserFrame,
    mode: Classification,
) -> Result<MappedCorrection, MappingError> {
    let (class, p_x) = vertical_facing(e_t, x, y, user, d, mode)?;
    match class {
        DiskClass::NearHorizontal => {
            let (px, py) = (project_ground(x), project_ground(y));
            // Ties on |j·p| resolve to x.
            let pick = |j: Vec3| {
                let (dx, dy) = (j.dot(px), j.dot(py));
                if dx.abs() >= dy.abs() {
                    (x, sign(dx))
                } else {
                    (y, sign(dy))
                }
            };
            // Both joystick axes may pick the same disk axis; that is kept
            // as specified.
            let (a_x, d_x) = pick(user.j_x);
            let (a_y, d_y) = pick(user.j_y);
            Ok(MappedCorrection {
                a_x,
                a_y,
                d_x,
                d_y,
                class,
            })
        }
        DiskClass::NearVerticalFacingUser | DiskClass::NearVerticalSideways(_) => {
            let (a_y, a_x) = split_vertical(x, y);
            let d_y = sign(a_y.dot(Z_UP));
            let d_x = match class {
                DiskClass::NearVerticalFacingUser => sign(user.j_x.dot(p_x)),
                DiskClass::NearVerticalSideways(Side::Left) => sign(user.j_y.dot(p_x)),
                _ => -sign(user.j_y.dot(p_x)),
            };
            Ok(MappedCorrection {
                a_x,
                a_y,
                d_x,
                d_y,
                class,
            })
        }
    }
}

/// Maps joystick axes onto disk `s` of `canal`.
pub fn map_input(
    canal: &Canal,
    s: usize,
    user: &UserFrame,
    mode: Classification,
) -> Result<MappedCorrection, MappingError> {
    if s >= canal.n_states() {
        return Err(MappingError::StateOutOfRange(s));
    }
    map_disk(
        canal.e_t[s],
        canal.x_axis[s],
        canal.y_axis[s],
        canal.d[s],
        user,
        mode,
    )
}

/// World-space correction velocity `gain·(u·D_x·A_x + v·D_y·A_y)`.
pub fn correction_velocity(m: &MappedCorrection, stick: (f64, f64), gain: f64) -> Vec3 {
    let (u, v) = stick;
    (m.a_x * (u * m.d_x) + m.a_y * (v * m.d_y)) * gain
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user_facing_x() -> UserFrame {
        UserFrame::new(Vec3::new(0.0, -1.0, 0.0), Vec3::X, Vec3::ZERO).unwrap()
    }

    #[test]
    fn facing_constructor_matches_explicit_frame() {
        let u = UserFrame::facing(Vec3::ZERO, Vec3::new(2.0, 0.0, 1.0)).unwrap();
        assert!(u.j_x.max_abs_diff(Vec3::new(0.0, -1.0, 0.0)) < 1e-15);
        assert_eq!(UserFrame::facing(Vec3::ZERO, Vec3::Z), Err(MappingError::InvalidUserFrame));
    }

    #[test]
    fn vertical_tangent_is_near_horizontal() {
        let c = classify_disk(Vec3::Z, Vec3::X, Vec3::Y, &user_facing_x(), Vec3::ZERO, Classification::Prose);
        assert_eq!(c, Ok(DiskClass::NearHorizontal));
    }

    #[test]
    fn wall_disk_facing_user() {
        let c = classify_disk(Vec3::X, Vec3::Z, Vec3::Y, &user_facing_x(), Vec3::ZERO, Classification::Prose);
        assert_eq!(c, Ok(DiskClass::NearVerticalFacingUser));
    }

    #[test]
    fn sideways_left_disk() {
        let d = Vec3::new(0.0, 2.0, 0.5);
        let c = classify_disk(Vec3::Y, Vec3::Z, Vec3::X, &user_facing_x(), d, Classification::Prose);
        assert_eq!(c, Ok(DiskClass::NearVerticalSideways(Side::Left)));
    }

    #[test]
    fn horizontal_mapping_example() {
        let m = map_disk(-Vec3::Z, Vec3::X, Vec3::Y, Vec3::ZERO, &user_facing_x(), Classification::Prose).unwrap();
        assert_eq!((m.a_x, m.d_x), (Vec3::Y, -1.0));
        assert_eq!((m.a_y, m.d_y), (Vec3::X, 1.0));
    }

    #[test]
    fn facing_user_mapping_example() {
        let m = map_disk(Vec3::X, Vec3::Z, Vec3::Y, Vec3::ZERO, &user_facing_x(), Classification::Prose).unwrap();
        assert_eq!((m.a_y, m.d_y), (Vec3::Z, 1.0));
        assert_eq!((m.a_x, m.d_x), (Vec3::Y, -1.0));
    }

    #[test]
    fn sideways_mapping_flips_across_user() {
        let left = map_disk(Vec3::Y, Vec3::Z, Vec3::X, Vec3::new(0.0, 2.0, 0.5), &user_facing_x(), Classification::Prose).unwrap();
        assert_eq!((left.a_y, left.d_y, left.d_x), (Vec3::Z, 1.0, 1.0));
        let right = map_disk(Vec3::Y, Vec3::Z, Vec3::X, Vec3::new(0.0, -2.0, 0.5), &user_facing_x(), Classification::Prose).unwrap();
        assert_eq!(right.class, DiskClass::NearVerticalSideways(Side::Right));
        assert_eq!((right.a_x, right.a_y, right.d_y, right.d_x), (left.a_x, left.a_y, 1.0, -1.0));
    }

    #[test]
    fn aligned_horizontal_disk_is_identity() {
        let u = user_facing_x();
        let m = map_disk(Vec3::Z, u.j_x, u.j_y, Vec3::ZERO, &u, Classification::Prose).unwrap();
        assert_eq!((m.a_x, m.d_x, m.a_y, m.d_y), (u.j_x, 1.0, u.j_y, 1.0));
    }

    #[test]
    fn tie_resolves_to_x() {
        // Only the projections matter for the tie rule, so exact dyadic
        // (non-orthonormal) axes make the tie exact.
        let u = user_facing_x();
        let x = Vec3::new(0.0, 0.5, 0.0);
        let y = Vec3::new(0.5, 0.5, 0.0);
        let m = map_disk(Vec3::Z, x, y, Vec3::ZERO, &u, Classification::Prose).unwrap();
        assert_eq!((m.a_x, m.d_x), (x, -1.0));
        assert_eq!((m.a_y, m.d_y), (y, 1.0));
    }

    #[test]
    fn both_joystick_axes_may_share_a_disk_axis() {
        // Tilted disk whose x axis dominates both joystick projections.
        let e = Vec3::new(0.5, -0.5, core::f64::consts::FRAC_1_SQRT_2).normalize().unwrap();
        let x = Vec3::new(1.0, 1.0, 0.0).normalize().unwrap();
        let y = e.cross(x);
        let u = user_facing_x();
        let m = map_disk(e, x, y, Vec3::ZERO, &u, Classification::Prose).unwrap();
        assert_eq!(m.a_x, x);
        assert_eq!(m.a_y, x);
    }

    #[test]
    fn velocity_examples() {
        let m = MappedCorrection {
            a_x: Vec3::Y,
            a_y: Vec3::Z,
            d_x: -1.0,
            d_y: 1.0,
            class: DiskClass::NearVerticalFacingUser,
        };
        assert_eq!(correction_velocity(&m, (0.0, 0.0), 0.05), Vec3::ZERO);
        assert!(correction_velocity(&m, (1.0, 0.0), 0.05).max_abs_diff(Vec3::new(0.0, -0.05, 0.0)) < 1e-15);
        let v = correction_velocity(&m, (0.5, 0.5), 0.05);
        assert!((v.norm() - 0.05 * libm::sqrt(0.5)).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_state() {
        let canal = Canal {
            d: alloc::vec![Vec3::ZERO, Vec3::X],
            e_t: alloc::vec![Vec3::X; 2],
            r: alloc::vec![0.05; 2],
            x_axis: alloc::vec![Vec3::Y; 2],
            y_axis: alloc::vec![Vec3::Z; 2],
            q: alloc::vec![crate::geometry::UnitQuat::IDENTITY; 2],
        };
        assert_eq!(
            map_input(&canal, 2, &user_facing_x(), Classification::Prose),
            Err(MappingError::StateOutOfRange(2))
        );
    }
}
