//! Per-track 3D point estimation.
//!
//! Each track is seeded by optimal two-view triangulation of its first and
//! last measurements, refined by damped Gauss-Newton on the pixel
//! reprojection residuals of all its measurements, and accepted when the
//! mean reprojection error is small enough. Tracks are independent.

use nalgebra::{Matrix2x3, Matrix3, Matrix4, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::camera::{fundamental_matrix, Camera, MIN_DEPTH};
use crate::error::{Error, Result};
use crate::frontend::tracks::Track;
use crate::{Point2, Point3};

/// Rays closer to parallel than this (radians) cannot be intersected.
pub const MIN_RAY_ANGLE: f64 = 1e-6;
/// Normal equations with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Gauss-Newton stops once the update is shorter than this.
pub const MIN_STEP: f64 = 1e-10;
/// Iteration cap of the companion-matrix eigenvalue solver.
const SCHUR_MAX_ITERS: usize = 1000;
const MAX_HALVINGS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorParams {
    pub n_gn: usize,
    /// Acceptance threshold on the mean reprojection error, px.
    pub eps_gn: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            n_gn: 50,
            eps_gn: 2.0,
        }
    }
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<()> {
        if self.eps_gn > 0.0 && self.eps_gn.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("eps_gn must be positive, got {}", self.eps_gn)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedPoint {
    pub id: u64,
    pub position: Point3,
    pub mean_reproj_error: f64,
    pub supporting_frames: Vec<usize>,
}

impl EstimatedPoint {
    pub fn first_frame(&self) -> usize {
        self.supporting_frames[0]
    }

    pub fn last_frame(&self) -> usize {
        *self.supporting_frames.last().unwrap()
    }
}

pub fn accept_point(est: &EstimatedPoint, p: &EstimatorParams) -> bool {
    est.mean_reproj_error <= p.eps_gn
}

fn ray_angle(a: &Camera, xa: &Point2, b: &Camera, xb: &Point2) -> f64 {
    let da = a.ray_direction(xa);
    let db = b.ray_direction(xb);
    da.cross(&db).norm().atan2(da.dot(&db))
}

/// Linear triangulation from two or more views (homogeneous SVD).
pub fn triangulate_dlt(views: &[(&Camera, Point2)]) -> Result<Point3> {
    let mut a = nalgebra::DMatrix::<f64>::zeros(2 * views.len(), 4);
    for (i, (cam, x)) in views.iter().enumerate() {
        let p = cam.projection_matrix();
        for (k, coord) in [x.x, x.y].into_iter().enumerate() {
            let row = p.row(2) * coord - p.row(k);
            let n = row.norm();
            if n > 0.0 {
                a.row_mut(2 * i + k).copy_from(&(row / n));
            }
        }
    }
    let m: Matrix4<f64> = Matrix4::from_iterator((a.transpose() * &a).iter().copied());
    let eig = SymmetricEigen::new(m);
    let k = eig.eigenvalues.imin();
    let h = eig.eigenvectors.column(k);
    if h[3].abs() < 1e-300 || !(h[0] / h[3]).is_finite() {
        return Err(Error::Degenerate("triangulated point is at infinity".into()));
    }
    Ok(Point3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]))
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0))
        .collect()
}

/// Real parts of the roots of `c[0] + c[1] t + ...`; None when the
/// eigenvalue iteration does not converge.
fn poly_roots(c: &[f64]) -> Option<Vec<f64>> {
    let scale = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Some(Vec::new());
    }
    let mut n = c.len() - 1;
    while n > 0 && c[n].abs() <= 1e-14 * scale {
        n -= 1;
    }
    let mut lo = 0;
    while lo < n && c[lo] == 0.0 {
        lo += 1;
    }
    let mut roots = vec![0.0; lo.min(1)];
    let c = &c[lo..=n];
    let n = c.len() - 1;
    if n == 0 {
        return Some(roots);
    }
    let mut comp = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -c[i] / c[n];
    }
    let schur = nalgebra::linalg::Schur::try_new(comp, f64::EPSILON, SCHUR_MAX_ITERS)?;
    roots.extend(schur.complex_eigenvalues().iter().map(|z| z.re).filter(|x| x.is_finite()));
    Some(roots)
}

/// Optimal correction of a correspondence so that it satisfies the epipolar
/// constraint exactly while moving the two points as little as possible
/// (sum of squared pixel distances), via the degree-6 polynomial.
pub fn correct_correspondence(f: &Matrix3<f64>, x: &Point2, xp: &Point2) -> Result<(Point2, Point2)> {
    // f satisfies xpᵀ f x = 0
    let t = Matrix3::new(1.0, 0.0, -x.x, 0.0, 1.0, -x.y, 0.0, 0.0, 1.0);
    let tp = Matrix3::new(1.0, 0.0, -xp.x, 0.0, 1.0, -xp.y, 0.0, 0.0, 1.0);
    let t_inv = t.try_inverse().unwrap();
    let tp_inv = tp.try_inverse().unwrap();
    let f1 = tp_inv.transpose() * f * t_inv;
    let epipole = |m: Matrix3<f64>| -> Result<Vector3<f64>> {
        let svd = m.svd(false, true);
        let vt = svd.v_t.unwrap();
        let k = svd.singular_values.imin();
        let e: Vector3<f64> = vt.row(k).transpose();
        let n = e.x.hypot(e.y);
        if n < 1e-12 * e.z.abs() || n == 0.0 {
            return Err(Error::LowParallax("measurement lies on the epipole".into()));
        }
        Ok(e / n)
    };
    let e = epipole(f1)?;
    let ep = epipole(f1.transpose())?;
    let r = Matrix3::new(e.x, e.y, 0.0, -e.y, e.x, 0.0, 0.0, 0.0, 1.0);
    let rp = Matrix3::new(ep.x, ep.y, 0.0, -ep.y, ep.x, 0.0, 0.0, 0.0, 1.0);
    let f2 = rp * f1 * r.transpose();
    let (ff, ffp) = (e.z, ep.z);
    let (a, b, c, d) = (f2[(1, 1)], f2[(1, 2)], f2[(2, 1)], f2[(2, 2)]);
    // g(t) = t ((at+b)^2 + f'^2 (ct+d)^2)^2 - (ad-bc)(1+f^2 t^2)^2 (at+b)(ct+d)
    let atb = [b, a];
    let ctd = [d, c];
    let p = {
        let s1 = poly_mul(&atb, &atb);
        let s2 = poly_mul(&ctd, &ctd);
        let s2: Vec<f64> = s2.iter().map(|x| x * ffp * ffp).collect();
        poly_sub(&s1, &s2.iter().map(|x| -x).collect::<Vec<_>>())
    };
    let q = [1.0, 0.0, ff * ff];
    let lhs = poly_mul(&[0.0, 1.0], &poly_mul(&p, &p));
    let rhs: Vec<f64> = poly_mul(&poly_mul(&q, &q), &poly_mul(&atb, &ctd))
        .iter()
        .map(|x| x * (a * d - b * c))
        .collect();
    let g = poly_sub(&lhs, &rhs);
    let cost = |t: f64| {
        let u = a * t + b;
        let v = c * t + d;
        t * t / (1.0 + ff * ff * t * t) + v * v / (u * u + ffp * ffp * v * v)
    };
    let mut best_t = None;
    let mut best = if ff != 0.0 {
        1.0 / (ff * ff) + c * c / (a * a + ffp * ffp * c * c)
    } else {
        f64::INFINITY
    };
    let roots = poly_roots(&g).ok_or_else(|| Error::Degenerate("polynomial root finding did not converge".into()))?;
    for t in roots {
        let s = cost(t);
        if s < best {
            best = s;
            best_t = Some(t);
        }
    }
    let (l, lp) = match best_t {
        Some(t) => (
            Vector3::new(t * ff, 1.0, -t),
            Vector3::new(-ffp * (c * t + d), a * t + b, c * t + d),
        ),
        // t at infinity
        None => (Vector3::new(ff, 0.0, -1.0), Vector3::new(-ffp * c, a, c)),
    };
    let closest = |l: Vector3<f64>| Vector3::new(-l.x * l.z, -l.y * l.z, l.x * l.x + l.y * l.y);
    let h = t_inv * r.transpose() * closest(l);
    let hp = tp_inv * rp.transpose() * closest(lp);
    if h.z == 0.0 || hp.z == 0.0 {
        return Err(Error::Degenerate("corrected point at infinity".into()));
    }
    Ok((
        Point2::new(h.x / h.z, h.y / h.z),
        Point2::new(hp.x / hp.z, hp.y / hp.z),
    ))
}

/// Optimal two-view triangulation: correct the measurements onto the
/// epipolar geometry, then intersect the corrected rays linearly.
pub fn triangulate_two_view(cam_a: &Camera, x_a: &Point2, cam_b: &Camera, x_b: &Point2) -> Result<Point3> {
    if (cam_a.center() - cam_b.center()).norm() < 1e-9 {
        return Err(Error::Degenerate("zero baseline".into()));
    }
    if ray_angle(cam_a, x_a, cam_b, x_b) < MIN_RAY_ANGLE {
        return Err(Error::LowParallax("measurement rays are parallel".into()));
    }
    let f = fundamental_matrix(cam_a, cam_b)?;
    let (ca, cb) = correct_correspondence(&f, x_a, x_b)?;
    if ray_angle(cam_a, &ca, cam_b, &cb) < MIN_RAY_ANGLE {
        return Err(Error::LowParallax("corrected rays are parallel".into()));
    }
    triangulate_dlt(&[(cam_a, ca), (cam_b, cb)])
}

/// Pixel projection and its Jacobian with respect to the world point.
pub fn projection_jacobian(cam: &Camera, x: &Point3) -> Result<(Point2, Matrix2x3<f64>)> {
    let xc = cam.to_camera_frame(x);
    if xc.z <= MIN_DEPTH {
        return Err(Error::BehindCamera(xc.z));
    }
    let k = &cam.intrinsics;
    let iz = 1.0 / xc.z;
    let d = Matrix2x3::new(
        k.fx * iz,
        0.0,
        -k.fx * xc.x * iz * iz,
        0.0,
        k.fy * iz,
        -k.fy * xc.y * iz * iz,
    );
    Ok((cam.project_camera_frame(&xc), d * cam.pose.rotation()))
}

fn squared_error(obs: &[(&Camera, Point2)], x: &Point3) -> f64 {
    let mut s = 0.0;
    for (cam, m) in obs {
        let xc = cam.to_camera_frame(x);
        if xc.z <= MIN_DEPTH {
            return f64::INFINITY;
        }
        s += (cam.project_camera_frame(&xc) - m).norm_squared();
    }
    s
}

pub fn mean_reprojection_error(obs: &[(&Camera, Point2)], x: &Point3) -> Result<f64> {
    let mut s = 0.0;
    for (cam, m) in obs {
        s += (cam.project(x)? - m).norm();
    }
    Ok(s / obs.len() as f64)
}

/// Damped Gauss-Newton on the stacked pixel residuals. Returns the refined
/// point and its mean reprojection error.
pub fn refine_gauss_newton(obs: &[(&Camera, Point2)], x0: &Point3, p: &EstimatorParams) -> Result<(Point3, f64)> {
    if obs.len() < 2 {
        return Err(Error::InvalidInput("at least two measurements are required".into()));
    }
    let mut x = *x0;
    let mut cost = squared_error(obs, &x);
    if !cost.is_finite() {
        return Err(Error::BehindCamera(0.0));
    }
    for _ in 0..p.n_gn {
        let mut h = Matrix3::<f64>::zeros();
        let mut g = Vector3::<f64>::zeros();
        for (cam, m) in obs {
            let (proj, j) = projection_jacobian(cam, &x)?;
            let r = proj - m;
            h += j.transpose() * j;
            g += j.transpose() * r;
        }
        let eig = SymmetricEigen::new(h);
        let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
        if lo.is_nan() || lo <= 0.0 || hi / lo > MAX_CONDITION {
            return Err(Error::NonEstimable(format!(
                "normal equations are ill-conditioned ({:e})",
                hi / lo.max(f64::MIN_POSITIVE)
            )));
        }
        let delta = -(eig.eigenvectors
            * Matrix3::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l))
            * eig.eigenvectors.transpose()
            * g);
        let mut step = delta;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = x + step;
            let c = squared_error(obs, &cand);
            if c <= cost {
                accepted = Some((cand, c));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, c)) = accepted else {
            break;
        };
        debug_assert!(c <= cost);
        let moved = (cand - x).norm();
        x = cand;
        cost = c;
        if moved < MIN_STEP {
            break;
        }
    }
    Ok((x, mean_reprojection_error(obs, &x)?))
}

/// Seeds from the first and last measurement, refines over the whole track.
pub fn estimate_track(track: &Track, cameras: &[Camera], p: &EstimatorParams) -> Result<EstimatedPoint> {
    if track.len() < 2 {
        return Err(Error::InvalidInput(format!("track {} has fewer than two measurements", track.id)));
    }
    let mut obs = Vec::with_capacity(track.len());
    for &(frame, m) in &track.measurements {
        let cam = cameras.get(frame).ok_or_else(|| {
            Error::InvalidInput(format!("track {} refers to missing frame {frame}", track.id))
        })?;
        obs.push((cam, m));
    }
    let (ca, xa) = obs[0];
    let (cb, xb) = obs[obs.len() - 1];
    let seed = match triangulate_two_view(ca, &xa, cb, &xb) {
        Err(Error::Degenerate(_)) if (ca.center() - cb.center()).norm() >= 1e-9 => {
            triangulate_dlt(&[(ca, xa), (cb, xb)])?
        }
        r => r?,
    };
    let (position, err) = refine_gauss_newton(&obs, &seed, p)?;
    Ok(EstimatedPoint {
        id: track.id,
        position,
        mean_reproj_error: err,
        supporting_frames: track.measurements.iter().map(|m| m.0).collect(),
    })
}

/// Estimates all tracks in parallel; results come back in track-id order.
pub fn estimate_tracks(
    tracks: &[Track],
    cameras: &[Camera],
    p: &EstimatorParams,
) -> Vec<(u64, Result<EstimatedPoint>)> {
    let mut out: Vec<(u64, Result<EstimatedPoint>)> = tracks
        .par_iter()
        .map(|t| (t.id, estimate_track(t, cameras, p)))
        .collect();
    out.sort_by_key(|(id, _)| *id);
    out
}
