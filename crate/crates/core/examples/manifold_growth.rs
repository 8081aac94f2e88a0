//! Manifold reconstruction of a synthetic room from oracle points: every
//! point is inserted at once, carved by its viewing rays and the outside
//! set is grown, then the surface is checked and written as PLY.
//!
//! `cargo run --release --example manifold_growth -- [out.ply]`

use edgecarve::carver::IchWeights;
use edgecarve::manifold::{ObservedPoint, Reconstructor};
use edgecarve::scene::{generate_scene, SceneSpec};

fn main() -> edgecarve::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let scene = generate_scene(&SceneSpec::room(), 1, 5)?;
    let mut points = Vec::new();
    for k in (0..scene.cameras.len()).step_by(10) {
        let center = *scene.cameras[k].center();
        for x in scene.edge_points(k, 120, 8.0) {
            points.push(ObservedPoint { position: x, cameras: vec![center] });
        }
    }
    let mut rec = Reconstructor::new(IchWeights::default());
    let st = rec.bootstrap(&points)?;
    rec.check_invariants().map_err(edgecarve::Error::Degenerate)?;
    let mesh = rec.extract_surface();
    mesh.check_closed_manifold().map_err(edgecarve::Error::Degenerate)?;
    println!(
        "{} points inserted, {} rays, {} outside cells; surface: {} vertices, {} triangles, Euler characteristic {}",
        st.inserted,
        st.rays_added,
        rec.outside_count(),
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.euler_characteristic()
    );
    if let Some(path) = args.get(1) {
        mesh.save_ply(std::path::Path::new(path))?;
        println!("mesh written to {path}");
    }
    Ok(())
}
