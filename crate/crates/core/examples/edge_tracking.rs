//! Canny Edge-Points tracked with pyramidal KLT through rendered frames of
//! a synthetic corridor, with the per-stage counts and the 3 x 5 image
//! distribution of the points sampled on the first keyframe.
//!
//! `cargo run --release --example edge_tracking`

use edgecarve::frontend::{canny_edges, downsample_edges, feature_distribution, EdgePointFrontend, FrontendParams};
use edgecarve::scene::{generate_scene, SceneSpec};

fn main() -> edgecarve::Result<()> {
    let mut spec = SceneSpec::corridor();
    spec.frames = 21;
    let params = FrontendParams::default();
    let scene = generate_scene(&spec, 1, params.t_k)?;

    let first = scene.render(0);
    let chains = canny_edges(&first, params.canny_low, params.canny_high);
    let points = downsample_edges(&chains, params.t_edges);
    let dist = feature_distribution(&points, first.width() as f64, first.height() as f64)?;
    println!("{} edge chains, {} Edge-Points on frame 0; share per cell (%):", chains.len(), points.len());
    for row in dist.cells {
        println!("  {}", row.map(|v| format!("{v:5.1}")).join(" "));
    }

    let mut fe = EdgePointFrontend::new(params)?;
    let mut closed = 0;
    for (f, cam) in scene.cameras.iter().enumerate() {
        if let Some(batch) = fe.process_frame(&scene.render(f), cam)? {
            println!("keyframe {:3}: {} tracks pass the gates", batch.frame, batch.accepted.len());
            closed += batch.accepted.len();
        }
    }
    closed += fe.finish().accepted.len();
    println!("{closed} tracks in total; {:?}", fe.stats());
    Ok(())
}
