use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use edgecarve::delaunay::Triangulation;
use edgecarve::eval::point_to_mesh_error;
use edgecarve::frontend::FrontendParams;
use edgecarve::io;
use edgecarve::manifold::extract_surface;
use edgecarve::mesh::SurfaceMesh;
use edgecarve::pipeline::{run, InputMode, RunConfig};
use edgecarve::scene::{generate_scene, oracle_tracks, OracleParams, SceneSpec};
use edgecarve::{Error, Result};

#[derive(Parser)]
#[command(name = "edgecarve", version, about = "Edge-Point space carving with manifold surface extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sequence: poses, oracle tracks, ground-truth
    /// cloud, a ready-to-run config and optionally rendered frames.
    Simulate(SimulateArgs),
    /// Run the incremental reconstruction described by a config file.
    Reconstruct(ReconstructArgs),
    /// Point-to-mesh error of a ground-truth cloud against a PLY mesh.
    Evaluate {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        cloud: PathBuf,
    },
    /// Extract the surface of a saved state dump as PLY.
    Export {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        ply: PathBuf,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Preset name (corridor, room, plaza) or scene description file.
    #[arg(long)]
    scene: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Keyframe period.
    #[arg(long, default_value_t = 5)]
    t_k: usize,
    /// Edge-Point subsampling step.
    #[arg(long, default_value_t = 10)]
    t_edges: usize,
    /// Pixel noise of the oracle tracks.
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    /// Share of tracks with one injected mismatch.
    #[arg(long, default_value_t = 0.0)]
    outliers: f64,
    /// Also render every frame as PGM into `<out>/frames`.
    #[arg(long)]
    images: bool,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the tracks file of the config and selects track input.
    #[arg(long, conflicts_with = "images")]
    tracks: Option<PathBuf>,
    /// Overrides the image directory of the config and selects image input.
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    poses: Option<PathBuf>,
    #[arg(long)]
    cloud: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let spec = SceneSpec::load(&a.scene)?;
    let fp = FrontendParams {
        t_k: a.t_k,
        t_edges: a.t_edges,
        l_min: a.t_k.max(2),
        ..FrontendParams::default()
    };
    let op = OracleParams {
        noise_sigma: a.noise,
        outlier_rate: a.outliers,
        ..OracleParams::default()
    };
    if !(a.noise >= 0.0 && a.noise.is_finite()) || !(0.0..=1.0).contains(&a.outliers) {
        return Err(Error::Config("noise must be non-negative and outliers in [0, 1]".into()));
    }
    let scene = generate_scene(&spec, a.seed, a.t_k)?;
    let tracks = oracle_tracks(&scene, &fp, &op, a.seed)?;
    std::fs::create_dir_all(&a.out)?;
    let poses: Vec<_> = scene.cameras.iter().map(|c| c.pose).collect();
    io::save_poses(&a.out.join("poses.txt"), &poses)?;
    io::save_tracks(&a.out.join("tracks.txt"), &tracks.filtered)?;
    io::save_xyz(&a.out.join("cloud.xyz"), &scene.gt_cloud)?;
    let mut config = RunConfig {
        frontend: fp,
        intrinsics: spec.intrinsics,
        tracks: Some("tracks.txt".into()),
        poses: Some("poses.txt".into()),
        cloud: Some("cloud.xyz".into()),
        ..RunConfig::default()
    };
    if a.images {
        let dir = a.out.join("frames");
        std::fs::create_dir_all(&dir)?;
        for f in 0..scene.cameras.len() {
            scene.render(f).save_pgm(&dir.join(format!("frame_{f:05}.pgm")))?;
        }
        config.images = Some("frames".into());
    }
    std::fs::write(a.out.join("config.txt"), config.to_text())?;
    println!(
        "{}: {} frames, {} tracks, {} ground-truth points, diameter {:.3}",
        spec.name,
        scene.cameras.len(),
        tracks.filtered.len(),
        scene.gt_cloud.len(),
        scene.diameter()
    );
    Ok(())
}

fn reconstruct(a: &ReconstructArgs) -> Result<()> {
    let mut config = RunConfig::load(&a.config)?;
    if let Some(t) = &a.tracks {
        config.tracks = Some(t.clone());
        config.mode = InputMode::Tracks;
    }
    if let Some(d) = &a.images {
        config.images = Some(d.clone());
        config.mode = InputMode::Images;
    }
    if let Some(p) = &a.poses {
        config.poses = Some(p.clone());
    }
    if let Some(c) = &a.cloud {
        config.cloud = Some(c.clone());
    }
    let out = run(&config)?;
    out.write(&a.out)?;
    for w in &out.report.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", out.report.to_text());
    Ok(())
}

fn evaluate(mesh: &Path, cloud: &Path) -> Result<()> {
    let mesh = SurfaceMesh::load_ply(mesh)?;
    let cloud = io::load_xyz(cloud)?;
    let (mean, median) = point_to_mesh_error(&cloud, &mesh)?;
    println!("mean_p2m_error={mean:?}\nmedian_p2m_error={median:?}");
    Ok(())
}

fn export(state: &Path, ply: &Path) -> Result<()> {
    let tri = Triangulation::load_dump(state)?;
    let mesh = extract_surface(&tri);
    mesh.save_ply(ply)?;
    println!("{} vertices, {} triangles", mesh.vertices.len(), mesh.triangles.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Evaluate { mesh, cloud } => evaluate(mesh, cloud),
        Command::Export { state, ply } => export(state, ply),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
