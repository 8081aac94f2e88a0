//! Two-view optimal triangulation followed by Gauss-Newton refinement over
//! every view of a noisy synthetic track.
//!
//! `cargo run --release --example triangulate_track`

use edgecarve::camera::{Camera, Intrinsics, Pose};
use edgecarve::estimator::{estimate_track, triangulate_dlt, triangulate_two_view, EstimatorParams};
use edgecarve::frontend::Track;
use edgecarve::{Point2, Point3};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> edgecarve::Result<()> {
    let k = Intrinsics::new(200.0, 200.0, 160.0, 120.0)?;
    let up = Vector3::new(0.0, 0.0, 1.0);
    let truth = Point3::new(6.0, 1.0, 1.8);
    let cameras: Vec<Camera> = (0..6)
        .map(|i| {
            let c = Point3::new(0.4 * i as f64, -0.8 * i as f64, 1.5);
            Pose::look_at(&c, &truth, &up).map(|p| Camera::new(k, p))
        })
        .collect::<edgecarve::Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let obs: Vec<Point2> = cameras
        .iter()
        .map(|c| c.project(&truth).map(|u| Point2::new(u.x + noise.sample(&mut rng), u.y + noise.sample(&mut rng))))
        .collect::<edgecarve::Result<_>>()?;

    let mut track = Track::new(0, 0, obs[0]);
    for (f, x) in obs.iter().enumerate().skip(1) {
        track.push(f, *x)?;
    }
    let n = cameras.len() - 1;
    let dlt = triangulate_dlt(&[(&cameras[0], obs[0]), (&cameras[n], obs[n])])?;
    let two = triangulate_two_view(&cameras[0], &obs[0], &cameras[n], &obs[n])?;
    let est = estimate_track(&track, &cameras, &EstimatorParams::default())?;
    println!("two-view DLT       error {:.4}", (dlt - truth).norm());
    println!("two-view optimal   error {:.4}", (two - truth).norm());
    println!(
        "Gauss-Newton ({} views) error {:.4}, mean reprojection {:.3} px",
        est.supporting_frames.len(),
        (est.position - truth).norm(),
        est.mean_reproj_error
    );
    Ok(())
}
