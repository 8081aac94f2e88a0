//! Fundamental matrix between two posed cameras and the two correspondence
//! gates applied to a true match, a slow match and a mismatch.
//!
//! `cargo run --release --example epipolar_gate`

use edgecarve::camera::{epipolar_distance, fundamental_matrix, Camera, Intrinsics, Pose};
use edgecarve::frontend::{filter_match, FrontendParams};
use edgecarve::{Point2, Point3};
use nalgebra::Vector3;

fn main() -> edgecarve::Result<()> {
    let k = Intrinsics::new(200.0, 200.0, 160.0, 120.0)?;
    let up = Vector3::new(0.0, 0.0, 1.0);
    let prev = Camera::new(k, Pose::look_at(&Point3::new(0.0, 0.0, 1.5), &Point3::new(10.0, 0.0, 1.5), &up)?);
    let cur = Camera::new(k, Pose::look_at(&Point3::new(0.5, 0.3, 1.5), &Point3::new(10.0, 0.0, 1.5), &up)?);
    let f = fundamental_matrix(&prev, &cur)?;
    let params = FrontendParams::default();

    let x = Point3::new(4.0, 1.5, 2.2);
    let (a, b) = (prev.project(&x)?, cur.project(&x)?);
    let mismatch = Point2::new(b.x, b.y + 35.0);
    let slow = Point2::new(a.x + 1.0, a.y + 1.0);
    for (label, m) in [("true match", b), ("mismatch", mismatch), ("slow match", slow)] {
        println!(
            "{label:>10}: displacement {:6.2} px, epipolar distance {:6.2} px -> {:?}",
            (m - a).norm(),
            epipolar_distance(&f, &a, &m)?,
            filter_match(&a, &m, &f, &params)
        );
    }
    Ok(())
}
