//! Viewing rays walked through a triangulation, with the cone-shaped
//! weights spread around each ray compared to plain traversal counts.
//!
//! `cargo run --release --example ray_carving`

use edgecarve::carver::{mark_free_space, Carver, IchWeights};
use edgecarve::delaunay::{InsertOutcome, Triangulation};
use edgecarve::Point3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> edgecarve::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let wall: Vec<Point3> = (0..300)
        .map(|_| Point3::new(rng.random_range(-4.0..4.0), 8.0 + rng.random_range(-0.3..0.3), rng.random_range(0.0..3.0)))
        .collect();
    let cameras = [Point3::new(-1.0, 0.0, 1.5), Point3::new(0.0, 0.5, 1.5), Point3::new(1.0, 0.0, 1.5)];
    for (label, w) in [("cone weights", IchWeights::default()), ("plain counts", IchWeights::plain())] {
        let mut tri = Triangulation::new();
        let mut targets = Vec::new();
        for p in wall.iter().chain(cameras.iter()) {
            if let InsertOutcome::Inserted(ins) = tri.insert_point(*p)? {
                targets.push(ins.vertex);
            }
        }
        targets.truncate(wall.len());
        let mut carver = Carver::new(w);
        let rays: Vec<_> = cameras.iter().flat_map(|c| targets.iter().map(move |&v| (*c, v))).collect();
        carver.add_rays(&mut tri, &rays)?;
        let free = mark_free_space(&tri);
        let weighted = tri.finite_tetras().filter(|&t| tri.tetra(t).weight > 0.0).count();
        let heaviest = tri.finite_tetras().map(|t| tri.tetra(t).weight).fold(0.0, f64::max);
        println!(
            "{label}: {} rays, {} traversed cells, {weighted} weighted cells, max weight {heaviest:.1}, drift vs recomputation {:.1e}",
            carver.num_rays(),
            free.len(),
            carver.weight_drift(&tri)?
        );
    }
    Ok(())
}
