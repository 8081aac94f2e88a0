//! Oracle-track reconstruction of a preset scene with ICH and plain
//! weighting side by side.
//!
//! `cargo run --release --example synthetic_run -- corridor 10`

use edgecarve::carver::IchWeights;
use edgecarve::frontend::FrontendParams;
use edgecarve::pipeline::{run_tracks, RunConfig};
use edgecarve::scene::{generate_scene, oracle_tracks, OracleParams, SceneSpec};

fn main() -> edgecarve::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let name = args.get(1).map_or("corridor", |s| s.as_str());
    let t_edges: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let spec = SceneSpec::load(name)?;
    let mut config = RunConfig {
        frontend: FrontendParams {
            t_edges,
            ..FrontendParams::default()
        },
        intrinsics: spec.intrinsics,
        check_invariants: false,
        ..RunConfig::default()
    };
    let scene = generate_scene(&spec, 7, config.frontend.t_k)?;
    let oracle = oracle_tracks(&scene, &config.frontend, &OracleParams::default(), 7)?;
    println!(
        "{}: {} frames, diameter {:.2}, {} tracks",
        spec.name,
        scene.cameras.len(),
        scene.diameter(),
        oracle.filtered.len()
    );
    for (label, weights) in [("ich", IchWeights::default()), ("plain", IchWeights::plain())] {
        config.weights = weights;
        let t = std::time::Instant::now();
        let out = run_tracks(&config, &scene.cameras, &oracle.filtered, Some(&scene.gt_cloud))?;
        let r = &out.report;
        let max_rays = r.keyframes.iter().map(|k| k.rays_secs).fold(0.0, f64::max);
        println!(
            "{label:>5}: accepted {} of {}, keyframes {}, mean p2m {:.4} ({:.2}% of diameter), median {:.4}, artifacts {}, triangles {}, max ray+ICH {:.1} ms, total {:.2} s",
            r.counts.accepted,
            r.counts.filtered,
            r.keyframes.len(),
            r.mean_p2m_error(),
            100.0 * r.mean_p2m_error() / scene.diameter(),
            r.median_p2m_error(),
            r.artifact_count,
            r.mesh_triangles,
            1e3 * max_rays,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
