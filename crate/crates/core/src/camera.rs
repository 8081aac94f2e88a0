//! Pinhole cameras and two-view epipolar geometry.
//!
//! Pixel coordinates are continuous, with `(0, 0)` at the center of the
//! top-left pixel. Poses map world points into the camera frame
//! (`X_cam = R X_world + t`); the camera looks along its `+z` axis.

use nalgebra::{Matrix3, Matrix3x4, Vector3};

use crate::error::{Error, Result};
use crate::{Point2, Point3};

/// Smallest camera-frame depth accepted by [`Camera::project`].
pub const MIN_DEPTH: f64 = 1e-12;

const ROTATION_TOLERANCE: f64 = 1e-9;

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || !fx.is_finite() || !fy.is_finite() {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if !cx.is_finite() || !cy.is_finite() {
            return Err(Error::InvalidInput("principal point is not finite".into()));
        }
        Ok(Intrinsics { fx, fy, cx, cy })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }
}

/// World-to-camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let orth = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if orth > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "not a rotation matrix (|R^T R - I| = {orth:e}, det = {det})"
            )));
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("translation is not finite".into()));
        }
        Ok(Pose {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from 12 numbers laid out row-major as `[R | t]`.
    pub fn from_row_major(v: &[f64; 12]) -> Result<Self> {
        let r = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        let t = Vector3::new(v[3], v[7], v[11]);
        Pose::new(r, t)
    }

    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ]
    }

    /// Camera placed at `center` looking at `target`, with image-up roughly
    /// along `up` (image `y` grows downwards).
    pub fn look_at(center: &Point3, target: &Point3, up: &Vector3<f64>) -> Result<Self> {
        let forward = target - center;
        if forward.norm() < 1e-12 {
            return Err(Error::Degenerate("look_at target equals center".into()));
        }
        let z = forward.normalize();
        let x = z.cross(up);
        if x.norm() < 1e-9 {
            return Err(Error::Degenerate("look_at up vector parallel to view".into()));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let translation = -(rotation * center.coords);
        Pose::new(rotation, translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn center(&self) -> Point3 {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    pub fn transform(&self, x: &Point3) -> Vector3<f64> {
        self.rotation * x.coords + self.translation
    }
}

/// Intrinsics plus pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub pose: Pose,
    center: Point3,
}

impl Camera {
    pub fn new(intrinsics: Intrinsics, pose: Pose) -> Self {
        let center = pose.center();
        Camera {
            intrinsics,
            pose,
            center,
        }
    }

    pub fn center(&self) -> &Point3 {
        &self.center
    }

    /// `P = K [R | t]`.
    pub fn projection_matrix(&self) -> Matrix3x4<f64> {
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(self.pose.rotation());
        rt.fixed_view_mut::<3, 1>(0, 3)
            .copy_from(self.pose.translation());
        self.intrinsics.matrix() * rt
    }

    pub fn to_camera_frame(&self, x: &Point3) -> Vector3<f64> {
        self.pose.transform(x)
    }

    /// Pixel coordinates of a world point.
    pub fn project(&self, x: &Point3) -> Result<Point2> {
        let xc = self.pose.transform(x);
        if xc.z <= MIN_DEPTH {
            return Err(Error::BehindCamera(xc.z));
        }
        Ok(self.project_camera_frame(&xc))
    }

    pub(crate) fn project_camera_frame(&self, xc: &Vector3<f64>) -> Point2 {
        let k = &self.intrinsics;
        Point2::new(k.fx * xc.x / xc.z + k.cx, k.fy * xc.y / xc.z + k.cy)
    }

    /// World point at camera-frame depth `depth` along the ray through `pixel`.
    pub fn backproject(&self, pixel: &Point2, depth: f64) -> Point3 {
        let dir = self.intrinsics.inverse_matrix() * Vector3::new(pixel.x, pixel.y, 1.0);
        let xc = dir * depth;
        Point3::from(self.pose.rotation().transpose() * (xc - self.pose.translation()))
    }

    /// Unit world-frame direction of the viewing ray through `pixel`.
    pub fn ray_direction(&self, pixel: &Point2) -> Vector3<f64> {
        let dir = self.intrinsics.inverse_matrix() * Vector3::new(pixel.x, pixel.y, 1.0);
        (self.pose.rotation().transpose() * dir).normalize()
    }
}

/// Cross-product matrix: `skew(v) * w == v.cross(w)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Relative motion `(R, t)` taking points from the `prev` camera frame to the
/// `cur` camera frame.
pub fn relative_pose(prev: &Camera, cur: &Camera) -> (Matrix3<f64>, Vector3<f64>) {
    let r = cur.pose.rotation() * prev.pose.rotation().transpose();
    let t = cur.pose.translation() - r * prev.pose.translation();
    (r, t)
}

/// Fundamental matrix between consecutive cameras, normalized to unit
/// Frobenius norm.
///
/// With the world frame fixed in `prev` and `(R, t)` the pose of `cur`,
/// `F = K_cur^{-T} R K_prev^T [K_prev R^T t]_x`. `F` maps a point of the
/// previous image to its epipolar line in the current image, so
/// `x_curᵀ F x_prev = 0`; the transposed form `x_prevᵀ Fᵀ x_cur = 0` is the
/// same constraint read from the other side.
pub fn fundamental_matrix(prev: &Camera, cur: &Camera) -> Result<Matrix3<f64>> {
    let (r, t) = relative_pose(prev, cur);
    if t.norm() <= 1e-9 {
        return Err(Error::Degenerate(format!(
            "zero baseline between cameras ({:e})",
            t.norm()
        )));
    }
    let k_prev = prev.intrinsics.matrix();
    let k_cur_inv_t = cur.intrinsics.inverse_matrix().transpose();
    let f = k_cur_inv_t * r * k_prev.transpose() * skew(&(k_prev * r.transpose() * t));
    let norm = f.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Degenerate("fundamental matrix vanished".into()));
    }
    Ok(f / norm)
}

/// Distance in pixels from `x_cur` to the epipolar line `F x_prev`.
pub fn epipolar_distance(f: &Matrix3<f64>, x_prev: &Point2, x_cur: &Point2) -> Result<f64> {
    let line = f * Vector3::new(x_prev.x, x_prev.y, 1.0);
    let n = line.x.hypot(line.y);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Degenerate("epipolar line is undefined".into()));
    }
    Ok((line.x * x_cur.x + line.y * x_cur.y + line.z).abs() / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Vector4};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k100() -> Intrinsics {
        Intrinsics::new(100.0, 100.0, 320.0, 240.0).unwrap()
    }

    fn random_camera(rng: &mut ChaCha8Rng) -> Camera {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let rot = Rotation3::new(axis * 0.3);
        let t = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let k = Intrinsics::new(
            rng.random_range(300.0..600.0),
            rng.random_range(300.0..600.0),
            rng.random_range(200.0..400.0),
            rng.random_range(150.0..300.0),
        )
        .unwrap();
        Camera::new(k, Pose::new(*rot.matrix(), t).unwrap())
    }

    #[test]
    fn optical_axis_projects_to_principal_point() {
        let cam = Camera::new(k100(), Pose::identity());
        let p = cam.project(&Point3::new(0.0, 0.0, 5.0)).unwrap();
        assert_eq!((p.x, p.y), (320.0, 240.0));
        let p = cam.project(&Point3::new(1.0, 0.0, 5.0)).unwrap();
        assert_eq!((p.x, p.y), (340.0, 240.0));
    }

    #[test]
    fn behind_camera_is_an_error() {
        let cam = Camera::new(k100(), Pose::identity());
        assert!(matches!(
            cam.project(&Point3::new(0.0, 0.0, -1.0)),
            Err(Error::BehindCamera(_))
        ));
        assert!(cam.project(&Point3::new(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn projection_matches_homogeneous_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let cam = random_camera(&mut rng);
            let x = cam.backproject(
                &Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)),
                rng.random_range(1.0..20.0),
            );
            let h = cam.projection_matrix() * Vector4::new(x.x, x.y, x.z, 1.0);
            let oracle = Point2::new(h.x / h.z, h.y / h.z);
            let p = cam.project(&x).unwrap();
            assert!((p - oracle).norm() < 1e-10);
        }
    }

    #[test]
    fn backprojection_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let cam = random_camera(&mut rng);
            let px = Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
            let x = cam.backproject(&px, rng.random_range(0.5..50.0));
            assert!((cam.project(&x).unwrap() - px).norm() < 1e-9);
        }
    }

    #[test]
    fn look_at_faces_target() {
        let c = Point3::new(1.0, 2.0, 3.0);
        let target = Point3::new(1.0, 2.0, 10.0);
        let pose = Pose::look_at(&c, &target, &Vector3::new(0.0, 1.0, 0.0)).unwrap();
        assert!((pose.center() - c).norm() < 1e-12);
        let xc = pose.transform(&target);
        assert!(xc.x.abs() < 1e-12 && xc.y.abs() < 1e-12 && xc.z > 0.0);
        // world up is image up, i.e. negative image y
        let above = pose.transform(&Point3::new(1.0, 3.0, 10.0));
        assert!(above.y < 0.0);
    }

    #[test]
    fn pose_rejects_non_rotation() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(Pose::new(m, Vector3::zeros()).is_err());
        assert!(Pose::new(m * 1.01, Vector3::zeros()).is_err());
    }

    #[test]
    fn skew_matches_cross_product() {
        let s = skew(&Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(
            s,
            Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0)
        );
        assert_eq!(skew(&Vector3::zeros()), Matrix3::zeros());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let v = Vector3::new(rng.random(), rng.random(), rng.random());
            let w = Vector3::new(rng.random(), rng.random(), rng.random());
            assert!((skew(&v) * w - v.cross(&w)).amax() < 1e-14);
            assert_eq!(skew(&v).transpose(), -skew(&v));
        }
    }

    #[test]
    fn pure_translation_gives_skew_of_baseline() {
        let k = Intrinsics::new(1.0, 1.0, 0.0, 0.0).unwrap();
        let prev = Camera::new(k, Pose::identity());
        let cur = Camera::new(
            k,
            Pose::new(Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0)).unwrap(),
        );
        let f = fundamental_matrix(&prev, &cur).unwrap();
        let s = skew(&Vector3::new(1.0, 0.0, 0.0));
        let s = s / s.norm();
        assert!((f - s).amax() < 1e-12 || (f + s).amax() < 1e-12);
    }

    #[test]
    fn zero_baseline_is_degenerate() {
        let prev = Camera::new(k100(), Pose::identity());
        let rot = Rotation3::new(Vector3::new(0.0, 0.1, 0.0));
        let cur = Camera::new(k100(), Pose::new(*rot.matrix(), Vector3::zeros()).unwrap());
        assert!(matches!(
            fundamental_matrix(&prev, &cur),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn epipolar_identity_and_rank_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let prev = random_camera(&mut rng);
            let cur = random_camera(&mut rng);
            let f = fundamental_matrix(&prev, &cur).unwrap();
            assert!((f.norm() - 1.0).abs() < 1e-12);
            let sv = f.singular_values();
            assert!(sv.min() < 1e-8 * sv.max());
            let mut checked = 0;
            while checked < 50 {
                let x = prev.backproject(
                    &Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)),
                    rng.random_range(2.0..30.0),
                );
                let Ok(xc) = cur.project(&x) else { continue };
                let xp = prev.project(&x).unwrap();
                let hp = Vector3::new(xp.x, xp.y, 1.0);
                let hc = Vector3::new(xc.x, xc.y, 1.0);
                assert!((hc.transpose() * f * hp)[0].abs() < 1e-8);
                // the same constraint written with the previous point on the left
                assert!((hp.transpose() * f.transpose() * hc)[0].abs() < 1e-8);
                assert!(epipolar_distance(&f, &xp, &xc).unwrap() < 1e-6);
                checked += 1;
            }
        }
    }

    #[test]
    fn swapping_cameras_transposes_f() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let a = random_camera(&mut rng);
            let b = random_camera(&mut rng);
            let fab = fundamental_matrix(&a, &b).unwrap();
            let fba = fundamental_matrix(&b, &a).unwrap();
            let d = (fba - fab.transpose())
                .amax()
                .min((fba + fab.transpose()).amax());
            assert!(d < 1e-9, "{d}");
        }
    }

    #[test]
    fn epipolar_distance_axis_aligned() {
        // line x = 0
        let f = Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let d = epipolar_distance(&f, &Point2::new(0.0, 0.0), &Point2::new(5.0, 7.0)).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
        assert!(epipolar_distance(&Matrix3::zeros(), &Point2::origin(), &Point2::origin()).is_err());
    }

    #[test]
    fn perpendicular_displacement_equals_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let prev = random_camera(&mut rng);
        let cur = random_camera(&mut rng);
        let f = fundamental_matrix(&prev, &cur).unwrap();
        let mut n = 0;
        while n < 100 {
            let x = prev.backproject(
                &Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)),
                rng.random_range(2.0..30.0),
            );
            let Ok(xc) = cur.project(&x) else { continue };
            let xp = prev.project(&x).unwrap();
            let line = f * Vector3::new(xp.x, xp.y, 1.0);
            let normal = nalgebra::Vector2::new(line.x, line.y).normalize();
            let delta = rng.random_range(-30.0..30.0);
            let moved = xc + normal * delta;
            let d = epipolar_distance(&f, &xp, &moved).unwrap();
            assert!((d - f64::abs(delta)).abs() < 1e-6);
            n += 1;
        }
    }

    #[test]
    fn literal_transposed_convention_differs_for_general_motion() {
        // Reading the line as F x_prev only works for one orientation of F;
        // with its transpose the distance of a true match is generally not 0.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let prev = random_camera(&mut rng);
        let cur = random_camera(&mut rng);
        let f = fundamental_matrix(&prev, &cur).unwrap();
        let x = prev.backproject(&Point2::new(100.0, 80.0), 8.0);
        let xp = prev.project(&x).unwrap();
        let xc = cur.project(&x).unwrap();
        assert!(epipolar_distance(&f, &xp, &xc).unwrap() < 1e-6);
        assert!(epipolar_distance(&f.transpose(), &xp, &xc).unwrap() > 1e-3);
    }
}
