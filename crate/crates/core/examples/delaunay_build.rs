//! Incremental 3D Delaunay triangulation of random points, validated
//! against the brute-force empty-sphere test and written as a text dump.
//!
//! `cargo run --release --example delaunay_build -- [points] [dump]`

use edgecarve::delaunay::{InsertOutcome, Triangulation};
use edgecarve::Point3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> edgecarve::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut tri = Triangulation::new();
    let (mut inserted, mut duplicates) = (0, 0);
    for i in 0..n {
        // every tenth point lands on a coarse grid to exercise cospherical cases
        let p = if i % 10 == 0 {
            Point3::new(rng.random_range(0..4) as f64, rng.random_range(0..4) as f64, rng.random_range(0..4) as f64)
        } else {
            Point3::new(rng.random_range(0.0..3.0), rng.random_range(0.0..3.0), rng.random_range(0.0..3.0))
        };
        match tri.insert_point(p)? {
            InsertOutcome::Duplicate(_) => duplicates += 1,
            _ => inserted += 1,
        }
    }
    tri.check_structure().map_err(edgecarve::Error::Degenerate)?;
    tri.check_delaunay_brute_force().map_err(edgecarve::Error::Degenerate)?;
    println!(
        "{inserted} vertices ({duplicates} duplicates dropped), {} finite tetrahedra; structure and empty-sphere checks pass",
        tri.num_finite_tetras()
    );
    if let Some(path) = args.get(2) {
        tri.save_dump(std::path::Path::new(path))?;
        println!("dump written to {path}");
    }
    Ok(())
}
