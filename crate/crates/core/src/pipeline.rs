//! End-to-end orchestration: tracks or images in, meshes and a report out.
//!
//! Keyframe batches of closed tracks are triangulated, the accepted points
//! are inserted with their viewing rays, and the outside set is grown. The
//! first `t_init` batches are accumulated and inserted together.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::camera::{Camera, Intrinsics, Pose};
use crate::carver::IchWeights;
use crate::error::{Error, Result};
use crate::estimator::{accept_point, estimate_tracks, EstimatedPoint, EstimatorParams};
use crate::eval::{count_critical_artifacts, point_to_mesh_error};
use crate::frontend::{close_tracks, filter_track, EdgePointFrontend, FrontendParams, GrayImage, Track};
use crate::manifold::{ObservedPoint, Reconstructor};
use crate::mesh::SurfaceMesh;
use crate::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    /// Precomputed tracks file.
    Tracks,
    /// Directory of PGM frames run through the frontend.
    Images,
}

/// Camera centers that shoot a viewing ray to each accepted point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayCameras {
    /// First and last supporting frame.
    Endpoints,
    /// Every supporting frame.
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub frontend: FrontendParams,
    pub estimator: EstimatorParams,
    pub weights: IchWeights,
    pub intrinsics: Intrinsics,
    pub mode: InputMode,
    pub tracks: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub poses: Option<PathBuf>,
    /// Ground-truth cloud for the point-to-mesh error.
    pub cloud: Option<PathBuf>,
    /// Number of keyframe batches merged into the initial reconstruction.
    pub t_init: usize,
    pub ray_cameras: RayCameras,
    /// Artifact threshold angle, degrees.
    pub alpha_deg: f64,
    pub check_invariants: bool,
    pub keyframe_meshes: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            frontend: FrontendParams::default(),
            estimator: EstimatorParams::default(),
            weights: IchWeights::default(),
            intrinsics: Intrinsics {
                fx: 200.0,
                fy: 200.0,
                cx: 160.0,
                cy: 120.0,
            },
            mode: InputMode::Tracks,
            tracks: None,
            images: None,
            poses: None,
            cloud: None,
            t_init: 1,
            ray_cameras: RayCameras::Endpoints,
            alpha_deg: 10.0,
            check_invariants: cfg!(debug_assertions),
            keyframe_meshes: false,
        }
    }
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment. Relative paths are
    /// resolved against the directory of `path`. When `l_min` is absent it
    /// follows `t_k`.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut c = RunConfig::default();
        let mut l_min_set = false;
        for (i, raw) in text.lines().enumerate() {
            let no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, no, format!("expected key = value, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(path, no, format!("{key}: `{v}` is not a number")))
            };
            let int = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::parse(path, no, format!("{key}: `{v}` is not a non-negative integer")))
            };
            let flag = |v: &str| match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(Error::parse(path, no, format!("{key}: `{v}` is not a boolean"))),
            };
            let file = |v: &str| Some(base.join(v));
            match key {
                "t_k" => c.frontend.t_k = int(value)?,
                "t_edges" => c.frontend.t_edges = int(value)?,
                "canny_low" => c.frontend.canny_low = num(value)?,
                "canny_high" => c.frontend.canny_high = num(value)?,
                "d_min" => c.frontend.d_min = num(value)?,
                "eps_e" => c.frontend.eps_e = num(value)?,
                "l_min" => {
                    c.frontend.l_min = int(value)?;
                    l_min_set = true;
                }
                "n_gn" => c.estimator.n_gn = int(value)?,
                "eps_gn" => c.estimator.eps_gn = num(value)?,
                "w1" => c.weights.w1 = num(value)?,
                "w2" => c.weights.w2 = num(value)?,
                "w3" => c.weights.w3 = num(value)?,
                "intrinsics" => {
                    let v: Vec<f64> = value.split_whitespace().map(num).collect::<Result<_>>()?;
                    let [fx, fy, cx, cy] = v[..] else {
                        return Err(Error::parse(path, no, "intrinsics needs fx fy cx cy"));
                    };
                    c.intrinsics = Intrinsics::new(fx, fy, cx, cy).map_err(|e| Error::parse(path, no, e.to_string()))?;
                }
                "mode" => {
                    c.mode = match value {
                        "tracks" => InputMode::Tracks,
                        "images" => InputMode::Images,
                        _ => return Err(Error::parse(path, no, format!("mode must be tracks or images, got `{value}`"))),
                    }
                }
                "tracks" => c.tracks = file(value),
                "images" => c.images = file(value),
                "poses" => c.poses = file(value),
                "cloud" => c.cloud = file(value),
                "t_init" => c.t_init = int(value)?,
                "ray_cameras" => {
                    c.ray_cameras = match value {
                        "endpoints" => RayCameras::Endpoints,
                        "all" => RayCameras::All,
                        _ => {
                            return Err(Error::parse(
                                path,
                                no,
                                format!("ray_cameras must be endpoints or all, got `{value}`"),
                            ))
                        }
                    }
                }
                "alpha_deg" => c.alpha_deg = num(value)?,
                "check_invariants" => c.check_invariants = flag(value)?,
                "keyframe_meshes" => c.keyframe_meshes = flag(value)?,
                _ => return Err(Error::parse(path, no, format!("unknown key `{key}`"))),
            }
        }
        if !l_min_set {
            c.frontend.l_min = c.frontend.t_k.max(2);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.frontend.validate()?;
        self.estimator.validate()?;
        IchWeights::new(self.weights.w1, self.weights.w2, self.weights.w3)?;
        Intrinsics::new(self.intrinsics.fx, self.intrinsics.fy, self.intrinsics.cx, self.intrinsics.cy)
            .map_err(|e| Error::Config(e.to_string()))?;
        if !(self.alpha_deg > 0.0 && self.alpha_deg < 180.0) {
            return Err(Error::Config(format!("alpha_deg must lie in (0, 180), got {}", self.alpha_deg)));
        }
        Ok(())
    }

    /// Serializes every key; paths are written as given.
    pub fn to_text(&self) -> String {
        let f = &self.frontend;
        let i = &self.intrinsics;
        let mut s = String::new();
        let _ = writeln!(s, "mode = {}", if self.mode == InputMode::Tracks { "tracks" } else { "images" });
        for (k, p) in [("tracks", &self.tracks), ("images", &self.images), ("poses", &self.poses), ("cloud", &self.cloud)] {
            if let Some(p) = p {
                let _ = writeln!(s, "{k} = {}", p.display());
            }
        }
        let _ = writeln!(s, "intrinsics = {} {} {} {}", i.fx, i.fy, i.cx, i.cy);
        let _ = writeln!(s, "t_k = {}\nt_edges = {}\ncanny_low = {}\ncanny_high = {}", f.t_k, f.t_edges, f.canny_low, f.canny_high);
        let _ = writeln!(s, "d_min = {}\neps_e = {}\nl_min = {}", f.d_min, f.eps_e, f.l_min);
        let _ = writeln!(s, "n_gn = {}\neps_gn = {}", self.estimator.n_gn, self.estimator.eps_gn);
        let _ = writeln!(s, "w1 = {}\nw2 = {}\nw3 = {}", self.weights.w1, self.weights.w2, self.weights.w3);
        let rays = if self.ray_cameras == RayCameras::All { "all" } else { "endpoints" };
        let _ = writeln!(s, "t_init = {}\nray_cameras = {rays}\nalpha_deg = {}", self.t_init, self.alpha_deg);
        let _ = writeln!(s, "check_invariants = {}\nkeyframe_meshes = {}", self.check_invariants, self.keyframe_meshes);
        s
    }
}

/// Per-keyframe counts and timings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyframeRecord {
    pub frame: usize,
    pub tracks: usize,
    pub estimated: usize,
    pub accepted: usize,
    pub inserted: usize,
    pub dropped_duplicate: usize,
    pub dropped_manifold: usize,
    pub rays: usize,
    pub cells_added: usize,
    pub cells_removed: usize,
    pub outside_cells: usize,
    pub insertion_secs: f64,
    pub rays_secs: f64,
    pub grow_secs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageCounts {
    pub extracted: usize,
    pub tracked: usize,
    pub filtered: usize,
    pub estimated: usize,
    pub accepted: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    /// Point-to-mesh error against the ground-truth cloud, when evaluated.
    pub p2m: Option<(f64, f64)>,
    pub artifact_count: usize,
    pub counts: StageCounts,
    pub keyframes: Vec<KeyframeRecord>,
    pub vertices: usize,
    pub tetrahedra: usize,
    pub rays: usize,
    pub mesh_vertices: usize,
    pub mesh_triangles: usize,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn mean_p2m_error(&self) -> f64 {
        self.p2m.map_or(0.0, |p| p.0)
    }

    pub fn median_p2m_error(&self) -> f64 {
        self.p2m.map_or(0.0, |p| p.1)
    }

    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let c = &self.counts;
        let mut s = String::new();
        let _ = writeln!(s, "mean_p2m_error={:?}", self.mean_p2m_error());
        let _ = writeln!(s, "median_p2m_error={:?}", self.median_p2m_error());
        let _ = writeln!(s, "p2m_evaluated={}", self.p2m.is_some());
        let _ = writeln!(s, "artifact_count={}", self.artifact_count);
        let _ = writeln!(s, "extracted={}\ntracked={}\nfiltered={}", c.extracted, c.tracked, c.filtered);
        let _ = writeln!(s, "estimated={}\naccepted={}", c.estimated, c.accepted);
        let _ = writeln!(s, "keyframes={}", self.keyframes.len());
        let _ = writeln!(s, "vertices={}\ntetrahedra={}\nrays={}", self.vertices, self.tetrahedra, self.rays);
        let _ = writeln!(s, "mesh_vertices={}\nmesh_triangles={}", self.mesh_vertices, self.mesh_triangles);
        let total = |f: fn(&KeyframeRecord) -> f64| self.keyframes.iter().map(f).sum::<f64>();
        let _ = writeln!(s, "insertion_secs={:.6}", total(|k| k.insertion_secs));
        let _ = writeln!(s, "rays_secs={:.6}", total(|k| k.rays_secs));
        let _ = writeln!(s, "grow_secs={:.6}", total(|k| k.grow_secs));
        s
    }

    /// One CSV row per keyframe.
    pub fn timings_csv(&self) -> String {
        let mut s = String::from(
            "frame,tracks,estimated,accepted,inserted,dropped_duplicate,dropped_manifold,rays,\
             cells_added,cells_removed,outside_cells,insertion_secs,rays_secs,grow_secs\n",
        );
        for k in &self.keyframes {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6}",
                k.frame,
                k.tracks,
                k.estimated,
                k.accepted,
                k.inserted,
                k.dropped_duplicate,
                k.dropped_manifold,
                k.rays,
                k.cells_added,
                k.cells_removed,
                k.outside_cells,
                k.insertion_secs,
                k.rays_secs,
                k.grow_secs
            );
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub mesh: SurfaceMesh,
    /// Surface after each keyframe, when requested.
    pub keyframe_meshes: Vec<(usize, SurfaceMesh)>,
    pub points: Vec<EstimatedPoint>,
    pub report: EvalReport,
    pub reconstructor: Reconstructor,
}

impl RunOutput {
    /// Writes `mesh.ply`, `points.txt`, `report.txt`, `timings.csv`,
    /// `state.dump` and any per-keyframe meshes into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.mesh.save_ply(&dir.join("mesh.ply"))?;
        for (frame, m) in &self.keyframe_meshes {
            m.save_ply(&dir.join(format!("mesh_{frame:05}.ply")))?;
        }
        crate::io::save_points(&dir.join("points.txt"), &self.points)?;
        std::fs::write(dir.join("report.txt"), self.report.to_text())?;
        std::fs::write(dir.join("timings.csv"), self.report.timings_csv())?;
        self.reconstructor.tri.save_dump(&dir.join("state.dump"))?;
        Ok(())
    }
}

pub fn cameras_from_poses(intrinsics: Intrinsics, poses: &[Pose]) -> Vec<Camera> {
    poses.iter().map(|p| Camera::new(intrinsics, *p)).collect()
}

/// Incremental state fed one keyframe batch at a time.
pub struct Pipeline<'a> {
    config: &'a RunConfig,
    cameras: &'a [Camera],
    rec: Reconstructor,
    pending: Vec<ObservedPoint>,
    batches: usize,
    points: Vec<EstimatedPoint>,
    keyframe_meshes: Vec<(usize, SurfaceMesh)>,
    report: EvalReport,
}

impl<'a> Pipeline<'a> {
    pub fn new(config: &'a RunConfig, cameras: &'a [Camera]) -> Result<Self> {
        config.validate()?;
        Ok(Pipeline {
            config,
            cameras,
            rec: Reconstructor::new(config.weights),
            pending: Vec::new(),
            batches: 0,
            points: Vec::new(),
            keyframe_meshes: Vec::new(),
            report: EvalReport::default(),
        })
    }

    pub fn reconstructor(&self) -> &Reconstructor {
        &self.rec
    }

    fn observed(&self, p: &EstimatedPoint) -> ObservedPoint {
        let frames: Vec<usize> = match self.config.ray_cameras {
            RayCameras::Endpoints if p.first_frame() == p.last_frame() => vec![p.first_frame()],
            RayCameras::Endpoints => vec![p.first_frame(), p.last_frame()],
            RayCameras::All => p.supporting_frames.clone(),
        };
        ObservedPoint {
            position: p.position,
            cameras: frames.iter().map(|&f| *self.cameras[f].center()).collect(),
        }
    }

    /// Triangulates the closed, gated tracks of one keyframe and updates
    /// the model.
    pub fn process_batch(&mut self, frame: usize, tracks: &[Track]) -> Result<()> {
        let est = estimate_tracks(tracks, self.cameras, &self.config.estimator);
        let mut record = KeyframeRecord {
            frame,
            tracks: tracks.len(),
            ..Default::default()
        };
        for (_, r) in est {
            match r {
                Ok(p) => {
                    record.estimated += 1;
                    if accept_point(&p, &self.config.estimator) {
                        record.accepted += 1;
                        self.pending.push(self.observed(&p));
                        self.points.push(p);
                    }
                }
                Err(Error::InvalidInput(m)) => return Err(Error::InvalidInput(m).in_stage("estimator")),
                Err(_) => {}
            }
        }
        self.report.counts.estimated += record.estimated;
        self.report.counts.accepted += record.accepted;
        self.batches += 1;
        if self.batches >= self.config.t_init.max(1) && !self.pending.is_empty() {
            let batch = std::mem::take(&mut self.pending);
            let st = self.rec.keyframe_update(&batch).map_err(|e| e.in_stage("manifold"))?;
            record.inserted = st.inserted;
            record.dropped_duplicate = st.dropped_duplicate;
            record.dropped_manifold = st.dropped_manifold;
            record.rays = st.rays_added;
            record.cells_added = st.cells_added;
            record.cells_removed = st.cells_removed;
            record.insertion_secs = st.insertion_secs;
            record.rays_secs = st.rays_secs;
            record.grow_secs = st.grow_secs;
            if self.config.check_invariants {
                self.rec
                    .check_invariants()
                    .map_err(|m| Error::Degenerate(format!("after keyframe {frame}: {m}")).in_stage("manifold"))?;
            }
        }
        record.outside_cells = self.rec.outside_count();
        if self.config.keyframe_meshes {
            self.keyframe_meshes.push((frame, self.rec.extract_surface()));
        }
        self.report.keyframes.push(record);
        Ok(())
    }

    /// Inserts points still waiting for the initial batch, extracts the
    /// surface and evaluates it.
    pub fn finish(mut self, cloud: Option<&[Point3]>) -> Result<RunOutput> {
        if !self.pending.is_empty() {
            let batch = std::mem::take(&mut self.pending);
            let st = self.rec.keyframe_update(&batch).map_err(|e| e.in_stage("manifold"))?;
            if let Some(last) = self.report.keyframes.last_mut() {
                last.inserted += st.inserted;
                last.dropped_duplicate += st.dropped_duplicate;
                last.dropped_manifold += st.dropped_manifold;
                last.rays += st.rays_added;
                last.cells_added += st.cells_added;
                last.cells_removed += st.cells_removed;
                last.insertion_secs += st.insertion_secs;
                last.rays_secs += st.rays_secs;
                last.grow_secs += st.grow_secs;
                last.outside_cells = self.rec.outside_count();
            }
        }
        let mesh = self.rec.extract_surface();
        let mut report = self.report;
        if report.counts.accepted == 0 {
            report.warnings.push("no points were reconstructed; the mesh is empty".into());
        }
        if let Some(cloud) = cloud {
            if mesh.is_empty() {
                report.warnings.push("empty mesh: point-to-mesh error not evaluated".into());
            } else if cloud.is_empty() {
                report.warnings.push("empty ground-truth cloud: point-to-mesh error not evaluated".into());
            } else {
                report.p2m = Some(point_to_mesh_error(cloud, &mesh).map_err(|e| e.in_stage("eval"))?);
            }
        }
        let centers: Vec<Point3> = self.cameras.iter().map(|c| *c.center()).collect();
        report.artifact_count = count_critical_artifacts(&self.rec.tri, &centers, self.config.alpha_deg.to_radians())
            .map_err(|e| e.in_stage("eval"))?;
        report.vertices = self.rec.tri.num_vertices();
        report.tetrahedra = self.rec.tri.num_finite_tetras();
        report.rays = self.rec.carver.num_rays();
        report.mesh_vertices = mesh.vertices.len();
        report.mesh_triangles = mesh.triangles.len();
        Ok(RunOutput {
            mesh,
            keyframe_meshes: self.keyframe_meshes,
            points: self.points,
            report,
            reconstructor: self.rec,
        })
    }
}

/// Keyframe at which a track closed: the first keyframe at or after its
/// last frame, or the final frame at the end of the sequence.
fn batch_frame(t: &Track, t_k: usize, n_frames: usize) -> usize {
    let last = t.last().0;
    (last.div_ceil(t_k) * t_k).min(n_frames.saturating_sub(1))
}

/// Runs on precomputed tracks. The correspondence and length gates are
/// re-applied, so gated and raw track files give the same result.
pub fn run_tracks(config: &RunConfig, cameras: &[Camera], tracks: &[Track], cloud: Option<&[Point3]>) -> Result<RunOutput> {
    let mut pipe = Pipeline::new(config, cameras)?;
    let fp = &config.frontend;
    let mut batches: BTreeMap<usize, Vec<Track>> = BTreeMap::new();
    let mut counts = StageCounts {
        extracted: tracks.len(),
        ..Default::default()
    };
    for t in tracks {
        let (kept, _) = filter_track(t, cameras, fp).map_err(|e| e.in_stage("frontend"))?;
        if kept.len() >= 2 {
            counts.tracked += 1;
        }
        let (ok, _) = close_tracks(vec![kept], fp);
        for k in ok {
            counts.filtered += 1;
            batches.entry(batch_frame(&k, fp.t_k, cameras.len())).or_default().push(k);
        }
    }
    pipe.report.counts = counts;
    for (frame, ts) in &batches {
        pipe.process_batch(*frame, ts)?;
    }
    pipe.finish(cloud)
}

/// Runs the frontend over `images`, one per camera.
pub fn run_images<I>(config: &RunConfig, cameras: &[Camera], images: I, cloud: Option<&[Point3]>) -> Result<RunOutput>
where
    I: IntoIterator<Item = Result<GrayImage>>,
{
    let mut pipe = Pipeline::new(config, cameras)?;
    let mut fe = EdgePointFrontend::new(config.frontend).map_err(|e| e.in_stage("frontend"))?;
    let mut n = 0;
    for img in images {
        let img = img.map_err(|e| e.in_stage("input"))?;
        let cam = cameras.get(n).ok_or_else(|| {
            Error::Config(format!("more images than poses ({} poses)", cameras.len())).in_stage("input")
        })?;
        n += 1;
        if let Some(b) = fe.process_frame(&img, cam).map_err(|e| e.in_stage("frontend"))? {
            if !b.accepted.is_empty() {
                pipe.process_batch(b.frame, &b.accepted)?;
            }
        }
    }
    if n > 0 {
        let b = fe.finish();
        if !b.accepted.is_empty() {
            pipe.process_batch(b.frame, &b.accepted)?;
        }
    }
    let s = fe.stats();
    pipe.report.counts.extracted = s.extracted;
    pipe.report.counts.tracked = s.tracked;
    pipe.report.counts.filtered = s.filtered;
    if n < cameras.len() {
        pipe.report
            .warnings
            .push(format!("{n} images for {} poses; trailing poses unused", cameras.len()));
    }
    pipe.finish(cloud)
}

/// PGM files of `dir` in lexicographic order.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir)
        .map_err(|e| Error::Config(format!("cannot read image directory {}: {e}", dir.display())))?;
    let mut v: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    v.sort();
    Ok(v)
}

/// Loads every input named by the configuration and runs the pipeline.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let poses_path = config
        .poses
        .as_ref()
        .ok_or_else(|| Error::Config("no poses file given".into()))?;
    let poses = crate::io::load_poses(poses_path).map_err(|e| e.in_stage("input"))?;
    let cameras = cameras_from_poses(config.intrinsics, &poses);
    let cloud = match &config.cloud {
        Some(p) => Some(crate::io::load_xyz(p).map_err(|e| e.in_stage("input"))?),
        None => None,
    };
    match config.mode {
        InputMode::Tracks => {
            let p = config
                .tracks
                .as_ref()
                .ok_or_else(|| Error::Config("mode = tracks needs a tracks file".into()))?;
            let tracks = crate::io::load_tracks(p).map_err(|e| e.in_stage("input"))?;
            run_tracks(config, &cameras, &tracks, cloud.as_deref())
        }
        InputMode::Images => {
            let dir = config
                .images
                .as_ref()
                .ok_or_else(|| Error::Config("mode = images needs an image directory".into()))?;
            let files = list_images(dir)?;
            run_images(config, &cameras, files.iter().map(|f| GrayImage::load_pgm(f)), cloud.as_deref())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys_and_resolves_paths() {
        let p = Path::new("/data/run/config.txt");
        let c = RunConfig::parse("t_k = 4\ntracks = tr.txt # comment\nposes=/abs/p.txt\n", p).unwrap();
        assert_eq!(c.frontend.t_k, 4);
        assert_eq!(c.frontend.l_min, 4);
        assert_eq!(c.tracks.as_deref(), Some(Path::new("/data/run/tr.txt")));
        assert_eq!(c.poses.as_deref(), Some(Path::new("/abs/p.txt")));
        let e = RunConfig::parse("t_k = 4\nfoo = 1\n", p).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(RunConfig::parse("w2 = 0.1\nw3 = 0.5\n", p).unwrap_err().is_config());
        assert!(RunConfig::parse("alpha_deg = 200\n", p).unwrap_err().is_config());
        assert!(RunConfig::parse("t_k\n", p).unwrap_err().is_config());
    }

    #[test]
    fn config_text_parses_back() {
        let mut c = RunConfig::default();
        c.frontend.t_edges = 40;
        c.ray_cameras = RayCameras::All;
        c.keyframe_meshes = true;
        c.tracks = Some(PathBuf::from("/x/tracks.txt"));
        let back = RunConfig::parse(&c.to_text(), Path::new("/x/c.txt")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn empty_input_gives_an_empty_mesh_and_a_warning() {
        let cams = cameras_from_poses(RunConfig::default().intrinsics, &[Pose::identity(), Pose::identity()]);
        let out = run_tracks(&RunConfig::default(), &cams, &[], Some(&[Point3::origin()])).unwrap();
        assert!(out.mesh.is_empty());
        assert_eq!(out.report.counts, StageCounts::default());
        assert_eq!(out.report.mean_p2m_error(), 0.0);
        assert!(!out.report.warnings.is_empty());
        let out = run_images(&RunConfig::default(), &cams, std::iter::empty(), None).unwrap();
        assert!(out.mesh.is_empty());
    }

    #[test]
    fn batch_frames_round_up_to_keyframes() {
        let mut t = Track::new(0, 0, crate::Point2::new(1.0, 1.0));
        t.push(3, crate::Point2::new(2.0, 1.0)).unwrap();
        assert_eq!(batch_frame(&t, 5, 100), 5);
        t.push(5, crate::Point2::new(3.0, 1.0)).unwrap();
        assert_eq!(batch_frame(&t, 5, 100), 5);
        assert_eq!(batch_frame(&t, 4, 7), 6);
    }
}
