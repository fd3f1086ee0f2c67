//! Gravity-View coordinates.
//!
//! A GV frame is attached to each image: its y-axis is the gravity
//! direction and its z-axis is the horizontal part of the camera view
//! direction. Consecutive GV frames therefore differ by a yaw only.
//!
//! Camera convention: x right, y down, z forward (the view direction).
//! A relative camera rotation `r_delta` at frame t maps coordinates
//! expressed in camera t−1 into camera t, `R_w2c[t] · R_w2c[t−1]ᵀ`.

use thiserror::Error;

use crate::rotmath::{yaw_between_horizontal, Matrix3, RotError, Rotation3, Vector3};
use crate::scalar::Real;

const UNIT_TOL: f64 = 1e-6;
const PARALLEL_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GvError {
    #[error("gravity direction must be unit length (got norm {norm})")]
    NonUnitGravity { norm: f64 },
    #[error("gravity is parallel to the view direction and the fallback axis is degenerate")]
    GravityParallelToView,
    #[error(transparent)]
    Rot(#[from] RotError),
}

/// GV axes expressed in camera coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GvBasis<T> {
    pub x_axis: Vector3<T>,
    pub y_axis: Vector3<T>,
    pub z_axis: Vector3<T>,
    /// Camera → GV rotation; its rows are the three axes.
    pub r_c2gv: Rotation3<T>,
}

/// Per-frame GV orientations with the yaw-only rotations linking them.
#[derive(Debug, Clone, PartialEq)]
pub struct GvOrientationTrack<T> {
    pub gamma_gv: Vec<Rotation3<T>>,
    /// Entry t maps GV_t coordinates into GV_{t−1}; entry 0 is the identity.
    pub r_delta_gv: Vec<Rotation3<T>>,
}

/// The camera view direction, `[0, 0, 1]`.
pub fn default_view<T: Real>() -> Vector3<T> {
    Vector3::unit_z()
}

pub fn build_gv_basis<T: Real>(gravity_c: Vector3<T>, view: Vector3<T>) -> Result<GvBasis<T>, GvError> {
    let norm = gravity_c.norm();
    if (norm - T::one()).abs() > T::lit(UNIT_TOL) {
        return Err(GvError::NonUnitGravity { norm: norm.as_f64() });
    }
    let y = gravity_c / norm;
    let view = view.normalized();
    let mut x = y.cross(view);
    if x.norm() <= T::lit(PARALLEL_EPS) {
        // Looking straight along gravity: use the camera x-axis with its
        // gravity component removed.
        let ex = Vector3::unit_x();
        x = ex - y * ex.dot(y);
        if x.norm() <= T::lit(PARALLEL_EPS) {
            return Err(GvError::GravityParallelToView);
        }
    }
    let x = x.normalized();
    let z = x.cross(y).normalized();
    let r_c2gv = Rotation3::from_matrix_unchecked(Matrix3::from_row_vectors(x, y, z));
    Ok(GvBasis { x_axis: x, y_axis: y, z_axis: z, r_c2gv })
}

/// `Γ_GV = R_c2gv · Γ_c`.
pub fn orientation_to_gv<T: Real>(gamma_c: &Rotation3<T>, basis: &GvBasis<T>) -> Rotation3<T> {
    basis.r_c2gv.compose(gamma_c)
}

/// World → GV rotation for a camera with world-to-camera rotation `r_w2c`,
/// where `gravity_w` is the unit gravity direction in world coordinates.
pub fn world_to_gv<T: Real>(r_w2c: &Rotation3<T>, gravity_w: Vector3<T>) -> Result<Rotation3<T>, GvError> {
    let basis = build_gv_basis(r_w2c.apply(gravity_w), default_view())?;
    Ok(basis.r_c2gv.compose(r_w2c))
}

/// Yaw-only rotation from GV_t into GV_{t−1}.
///
/// The camera→GV rotation of frame t is recovered as `Γ_GV·Γ_c⁻¹`. The
/// previous camera's view direction, `r_delta·[0,0,1]` in camera t, is
/// taken into GV_t; the yaw carrying it onto the current view direction
/// (both projected onto the xz-plane) is the answer. The result is built
/// with [`Rotation3::about_y`], so it fixes the gravity axis exactly.
pub fn relative_gv_rotation<T: Real>(
    gamma_c_t: &Rotation3<T>,
    gamma_gv_t: &Rotation3<T>,
    r_delta_t: &Rotation3<T>,
) -> Result<Rotation3<T>, GvError> {
    let r_c2gv = gamma_gv_t.compose(&gamma_c_t.inverse());
    let view = default_view::<T>();
    let view_t = r_c2gv.apply(view);
    let view_prev = r_c2gv.apply(r_delta_t.apply(view));
    let yaw = yaw_between_horizontal(view_prev, view_t)?;
    Ok(Rotation3::about_y(yaw))
}

/// Builds the per-frame relative GV rotations for a whole sequence.
/// Errors carry the offending frame index.
pub fn gv_orientation_track<T: Real>(
    gamma_c: &[Rotation3<T>],
    gamma_gv: &[Rotation3<T>],
    r_delta: &[Rotation3<T>],
) -> Result<GvOrientationTrack<T>, (usize, GvError)> {
    let mut r_delta_gv = Vec::with_capacity(gamma_gv.len());
    for t in 0..gamma_gv.len() {
        if t == 0 {
            r_delta_gv.push(Rotation3::identity());
            continue;
        }
        let r = relative_gv_rotation(&gamma_c[t], &gamma_gv[t], &r_delta[t]).map_err(|e| (t, e))?;
        r_delta_gv.push(r);
    }
    Ok(GvOrientationTrack { gamma_gv: gamma_gv.to_vec(), r_delta_gv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    type V = Vector3<f64>;
    type R = Rotation3<f64>;

    const GRAVITY_W: V = V::new(0.0, -1.0, 0.0);

    fn max_diff(a: &R, b: &R) -> f64 {
        (*a.matrix() - *b.matrix()).max_abs()
    }

    fn random_unit(rng: &mut ChaCha8Rng) -> V {
        loop {
            let v = V::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let n = v.norm();
            if n > 0.1 && n <= 1.0 {
                return v / n;
            }
        }
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> R {
        R::from_axis_angle(random_unit(rng) * rng.random_range(0.0..PI))
    }

    /// Level camera looking horizontally along world heading `yaw`, then
    /// pitched and rolled about its own axes.
    fn camera(yaw: f64, pitch: f64, roll: f64) -> R {
        // A level camera facing world +z has rows x=(-1,0,0), y=(0,-1,0), z=(0,0,1).
        let level = R::from_matrix_unchecked(Matrix3::from_rows([
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
        ]));
        // Camera-local roll (about view z) and pitch (about camera x) act on the left.
        R::about_z(roll) * R::about_x(pitch) * level * R::about_y(-yaw)
    }

    fn gamma_gv_for(r_w2c: &R, gamma_w: &R) -> R {
        let basis = build_gv_basis(r_w2c.apply(GRAVITY_W), default_view()).unwrap();
        orientation_to_gv(&(*r_w2c * *gamma_w), &basis)
    }

    #[test]
    fn gravity_along_camera_y_gives_identity() {
        let b = build_gv_basis(V::unit_y(), default_view()).unwrap();
        assert_eq!(b.r_c2gv, R::identity());
    }

    #[test]
    fn rolled_camera_basis_matches_hand_computation() {
        let s = 0.8660254037844386;
        let b = build_gv_basis(V::new(0.5, s, 0.0), default_view()).unwrap();
        assert!((b.x_axis - V::new(s, -0.5, 0.0)).max_abs() < 1e-12);
        assert!((b.y_axis - V::new(0.5, s, 0.0)).max_abs() < 1e-12);
        assert!((b.z_axis - V::unit_z()).max_abs() < 1e-12);
        // Rows [x; y; z]: the camera rolled by 30°, undone by this matrix.
        let expected = R::from_matrix_unchecked(Matrix3::from_rows([[s, -0.5, 0.0], [0.5, s, 0.0], [0.0, 0.0, 1.0]]));
        assert!(max_diff(&b.r_c2gv, &expected) < 1e-15);
        assert!((b.r_c2gv * V::new(0.5, s, 0.0) - V::unit_y()).max_abs() < 1e-15);
    }

    #[test]
    fn roll_is_removed_from_orientation() {
        let s = 0.8660254037844386;
        let b = build_gv_basis(V::new(0.5, s, 0.0), default_view()).unwrap();
        let gamma0 = R::from_axis_angle(V::new(0.2, -0.7, 0.4));
        let gamma_c = b.r_c2gv.inverse() * gamma0;
        assert!(max_diff(&orientation_to_gv(&gamma_c, &b), &gamma0) < 1e-12);
        assert_eq!(orientation_to_gv(&gamma0, &build_gv_basis(V::unit_y(), default_view()).unwrap()), gamma0);
    }

    #[test]
    fn looking_straight_down_uses_camera_x_fallback() {
        let b = build_gv_basis(V::unit_z(), default_view()).unwrap();
        assert_eq!(b.x_axis, V::unit_x());
        assert!(b.r_c2gv.orthonormality_error() < 1e-15);
        assert!((b.x_axis.cross(b.y_axis) - b.z_axis).max_abs() < 1e-15);
    }

    #[test]
    fn non_unit_gravity_is_rejected() {
        let err = build_gv_basis(V::new(0.0, 1.1, 0.0), default_view()).unwrap_err();
        assert!(matches!(err, GvError::NonUnitGravity { .. }));
    }

    #[test]
    fn basis_invariants_hold_for_random_gravity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let g = random_unit(&mut rng);
            let b = build_gv_basis(g, default_view()).unwrap();
            assert!(b.x_axis.dot(b.y_axis).abs() < 1e-9);
            assert!(b.y_axis.dot(b.z_axis).abs() < 1e-9);
            assert!(b.x_axis.dot(b.z_axis).abs() < 1e-9);
            assert!((b.x_axis.cross(b.y_axis) - b.z_axis).max_abs() < 1e-9);
            assert!((b.y_axis - g).max_abs() < 1e-9);
            assert!((b.r_c2gv * g - V::unit_y()).max_abs() < 1e-9);
        }
    }

    #[test]
    fn static_camera_gives_identity() {
        let gc = R::from_axis_angle(V::new(0.1, 0.2, 0.3));
        let ggv = R::from_axis_angle(V::new(-0.4, 0.2, 0.1));
        let r = relative_gv_rotation(&gc, &ggv, &R::identity()).unwrap();
        assert_eq!(r, R::identity());
    }

    /// Ground-truth GV_t → GV_{t−1} rotation from exact camera poses.
    fn true_relative(c_prev: &R, c_t: &R) -> R {
        let a = world_to_gv(c_t, GRAVITY_W).unwrap();
        let b = world_to_gv(c_prev, GRAVITY_W).unwrap();
        b * a.inverse()
    }

    fn recipe(c_prev: &R, c_t: &R, gamma_w: &R) -> R {
        let gamma_c = *c_t * *gamma_w;
        let gamma_gv = gamma_gv_for(c_t, gamma_w);
        relative_gv_rotation(&gamma_c, &gamma_gv, &(*c_t * c_prev.inverse())).unwrap()
    }

    #[test]
    fn camera_yaw_of_thirty_degrees() {
        let phi = PI / 6.0;
        let c_prev = camera(0.0, 0.0, 0.0);
        let c_t = camera(phi, 0.0, 0.0);
        let gamma_w = R::from_axis_angle(V::new(0.0, 0.8, 0.0));
        let r = recipe(&c_prev, &c_t, &gamma_w);
        assert!(max_diff(&r, &true_relative(&c_prev, &c_t)) < 1e-12);
        // Camera heading turned by +φ about world up. GV_t's y points down,
        // so mapping GV_t into GV_{t−1} is a yaw of −φ about GV +y.
        assert!(max_diff(&r, &R::about_y(-phi)) < 1e-12);
    }

    #[test]
    fn camera_pitch_alone_gives_identity() {
        let c_prev = camera(0.3, 0.0, 0.0);
        let c_t = camera(0.3, 20f64.to_radians(), 0.0);
        let r = recipe(&c_prev, &c_t, &R::from_axis_angle(V::new(0.3, 1.0, -0.2)));
        assert!(max_diff(&r, &R::identity()) < 1e-9);
    }

    #[test]
    fn relative_rotation_exact_for_tilted_cameras() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let c_prev = camera(rng.random_range(-PI..PI), rng.random_range(-0.6..0.6), rng.random_range(-0.5..0.5));
            let c_t = camera(rng.random_range(-PI..PI), rng.random_range(-0.6..0.6), rng.random_range(-0.5..0.5));
            let gamma_w = random_rotation(&mut rng);
            let r = recipe(&c_prev, &c_t, &gamma_w);
            assert!(max_diff(&r, &true_relative(&c_prev, &c_t)) < 1e-12);
        }
    }

    #[test]
    fn roll_and_pitch_do_not_change_gamma_gv() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let yaw = rng.random_range(-PI..PI);
            let gamma_w = random_rotation(&mut rng);
            let base = gamma_gv_for(&camera(yaw, 0.0, 0.0), &gamma_w);
            let tilted = gamma_gv_for(
                &camera(yaw, rng.random_range(-1.4..1.4), rng.random_range(-PI..PI)),
                &gamma_w,
            );
            assert!(max_diff(&base, &tilted) < 1e-9);
        }
    }

    #[test]
    fn camera_yaw_rotates_gamma_gv_by_opposite_gv_yaw_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let (yaw, pitch, roll) = (rng.random_range(-PI..PI), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let phi = rng.random_range(-PI..PI);
            let gamma_w = random_rotation(&mut rng);
            let before = gamma_gv_for(&camera(yaw, pitch, roll), &gamma_w);
            let after = gamma_gv_for(&camera(yaw + phi, pitch, roll), &gamma_w);
            // Camera turning by +φ about world up ⇒ Γ_GV gains a yaw of +φ
            // about GV +y (which points down).
            assert!(max_diff(&after, &(R::about_y(phi) * before)) < 1e-9);
        }
    }

    #[test]
    fn output_is_pure_yaw_even_with_tilt_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let gamma_c = random_rotation(&mut rng);
            let gamma_gv = random_rotation(&mut rng);
            let noise = R::from_axis_angle(random_unit(&mut rng) * rng.random_range(0.0..0.3));
            if let Ok(r) = relative_gv_rotation(&gamma_c, &gamma_gv, &noise) {
                assert_eq!(r * V::unit_y(), V::unit_y());
            }
        }
    }

    #[test]
    fn sequence_track_reports_failing_frame() {
        let gamma_c = vec![R::identity(); 3];
        // r_c2gv = Γ_GV, and Γ_GV = R_x(π/2) sends the view onto ±y.
        let gamma_gv = vec![R::identity(), R::identity(), R::about_x(PI / 2.0)];
        let r_delta = vec![R::identity(); 3];
        let (frame, err) = gv_orientation_track(&gamma_c, &gamma_gv, &r_delta).unwrap_err();
        assert_eq!(frame, 2);
        assert!(matches!(err, GvError::Rot(RotError::DegenerateHorizontalProjection { .. })));
    }
}
