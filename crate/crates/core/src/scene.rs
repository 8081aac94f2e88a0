//! Synthetic scenes standing in for real sequences: axis-aligned boxes and
//! rectangles with a checker albedo, a camera path, a dense ground-truth
//! cloud, flat-shaded rendering and oracle Edge-Point tracks.
//!
//! The world is z-up. Every surface is represented by axis-aligned faces;
//! boxes are solid and contribute six faces, rectangles are two-sided.

use std::path::Path;

use nalgebra::Vector3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::camera::{Camera, Intrinsics, Pose};
use crate::error::{Error, Result};
use crate::frontend::{filter_track, FrontendParams, GrayImage, MatchVerdict, Track, TrackState};
use crate::{Point2, Point3};

/// Relative tolerance on the ray parameter when testing occlusion.
const OCCLUSION_EPS: f64 = 1e-7;
/// Points closer than this to the camera plane are not sampled.
const NEAR: f64 = 0.2;
const SKY: f32 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    /// Solid axis-aligned box.
    Box { min: Point3, max: Point3, albedo: f64 },
    /// Axis-aligned rectangle in the plane `coord[axis] = offset`; `min`
    /// and `max` bound the other two coordinates in cyclic order
    /// (`axis + 1`, `axis + 2`).
    Rect {
        axis: usize,
        offset: f64,
        min: [f64; 2],
        max: [f64; 2],
        albedo: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CameraPath {
    /// Straight line looking along the direction of travel.
    Line { from: Point3, to: Point3 },
    /// Circle around a vertical axis, looking halfway between the direction
    /// of travel and outwards.
    Orbit { center: Point3, radius: f64, start: f64, sweep: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub name: String,
    pub primitives: Vec<Primitive>,
    pub path: CameraPath,
    pub frames: usize,
    pub intrinsics: Intrinsics,
    pub width: usize,
    pub height: usize,
    /// Side of the albedo checker squares.
    pub texture_cell: f64,
    /// Mean spacing of the ground-truth samples.
    pub gt_spacing: f64,
    /// Points farther than this from a camera are not observed by it.
    pub max_range: f64,
}

fn default_intrinsics() -> Intrinsics {
    Intrinsics::new(200.0, 200.0, 160.0, 120.0).unwrap()
}

fn rect(axis: usize, offset: f64, min: [f64; 2], max: [f64; 2], albedo: f64) -> Primitive {
    Primitive::Rect {
        axis,
        offset,
        min,
        max,
        albedo,
    }
}

fn cube(min: [f64; 3], max: [f64; 3], albedo: f64) -> Primitive {
    Primitive::Box {
        min: Point3::from(min),
        max: Point3::from(max),
        albedo,
    }
}

impl SceneSpec {
    /// Two parallel walls and a floor with a few boxes, straight path.
    pub fn corridor() -> Self {
        SceneSpec {
            name: "corridor".into(),
            primitives: vec![
                rect(1, 0.0, [0.0, 0.0], [3.0, 40.0], 0.5),
                rect(1, 4.0, [0.0, 0.0], [3.0, 40.0], 0.45),
                rect(2, 0.0, [0.0, 0.0], [40.0, 4.0], 0.55),
                cube([8.0, 0.0, 0.0], [9.0, 0.6, 2.0], 0.4),
                cube([19.0, 3.3, 0.0], [20.5, 4.0, 1.2], 0.6),
                cube([29.0, 0.0, 0.0], [30.0, 0.8, 2.5], 0.35),
            ],
            path: CameraPath::Line {
                from: Point3::new(1.0, 2.0, 1.5),
                to: Point3::new(31.0, 2.0, 1.5),
            },
            frames: 101,
            intrinsics: default_intrinsics(),
            width: 320,
            height: 240,
            texture_cell: 1.0,
            gt_spacing: 0.15,
            max_range: 15.0,
        }
    }

    /// Closed box room with furniture, camera orbiting inside.
    pub fn room() -> Self {
        SceneSpec {
            name: "room".into(),
            primitives: vec![
                rect(0, -6.0, [-5.0, 0.0], [5.0, 3.0], 0.5),
                rect(0, 6.0, [-5.0, 0.0], [5.0, 3.0], 0.45),
                rect(1, -5.0, [0.0, -6.0], [3.0, 6.0], 0.55),
                rect(1, 5.0, [0.0, -6.0], [3.0, 6.0], 0.4),
                rect(2, 0.0, [-6.0, -5.0], [6.0, 5.0], 0.6),
                rect(2, 3.0, [-6.0, -5.0], [6.0, 5.0], 0.5),
                cube([-5.5, -4.5, 0.0], [-3.5, -3.5, 0.9], 0.35),
                cube([4.0, 3.0, 0.0], [6.0, 5.0, 2.0], 0.65),
                cube([-1.0, 4.0, 0.0], [1.5, 5.0, 1.2], 0.4),
            ],
            path: CameraPath::Orbit {
                center: Point3::new(0.0, 0.0, 1.5),
                radius: 2.5,
                start: 0.0,
                sweep: std::f64::consts::TAU,
            },
            frames: 151,
            intrinsics: default_intrinsics(),
            width: 320,
            height: 240,
            texture_cell: 1.0,
            gt_spacing: 0.1,
            max_range: 15.0,
        }
    }

    /// Open ground with free-standing buildings, camera orbiting among them.
    pub fn plaza() -> Self {
        SceneSpec {
            name: "plaza".into(),
            primitives: vec![
                rect(2, 0.0, [-25.0, -25.0], [25.0, 25.0], 0.55),
                cube([12.0, -4.0, 0.0], [16.0, 4.0, 6.0], 0.4),
                cube([-5.0, 12.0, 0.0], [5.0, 15.0, 4.0], 0.6),
                cube([-17.0, -6.0, 0.0], [-13.0, 2.0, 8.0], 0.35),
                cube([-4.0, -16.0, 0.0], [6.0, -12.0, 5.0], 0.5),
                cube([9.0, 9.0, 0.0], [12.0, 12.0, 3.0], 0.65),
            ],
            path: CameraPath::Orbit {
                center: Point3::new(0.0, 0.0, 1.7),
                radius: 7.0,
                start: 0.0,
                sweep: std::f64::consts::TAU,
            },
            frames: 121,
            intrinsics: default_intrinsics(),
            width: 320,
            height: 240,
            texture_cell: 1.5,
            gt_spacing: 0.25,
            max_range: 20.0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "corridor" => Some(Self::corridor()),
            "room" => Some(Self::room()),
            "plaza" => Some(Self::plaza()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.primitives.is_empty() {
            return bad("scene needs at least one primitive".into());
        }
        if self.frames < 2 {
            return bad("scene needs at least two frames".into());
        }
        if self.width < 16 || self.height < 16 {
            return bad(format!("image {} x {} is too small", self.width, self.height));
        }
        if !(self.texture_cell > 0.0 && self.gt_spacing > 0.0 && self.max_range > 0.0) {
            return bad("texture_cell, gt_spacing and max_range must be positive".into());
        }
        for p in &self.primitives {
            let ok = match p {
                Primitive::Box { min, max, albedo } => {
                    (0..3).all(|k| min[k] < max[k]) && (0.0..=1.0).contains(albedo)
                }
                Primitive::Rect { axis, min, max, albedo, .. } => {
                    *axis < 3 && min[0] < max[0] && min[1] < max[1] && (0.0..=1.0).contains(albedo)
                }
            };
            if !ok {
                return bad(format!("invalid primitive {p:?}"));
            }
        }
        Ok(())
    }

    /// Reads a scene description: either a preset name or a text file of
    /// `key values...` lines (`#` starts a comment):
    ///
    /// ```text
    /// name N | frames N | image W H | intrinsics fx fy cx cy
    /// texture_cell S | gt_spacing S | max_range R
    /// box x0 y0 z0 x1 y1 z1 [albedo]
    /// rect x|y|z offset a0 b0 a1 b1 [albedo]
    /// line x0 y0 z0 x1 y1 z1
    /// orbit cx cy cz radius [start sweep]
    /// ```
    pub fn load(arg: &str) -> Result<Self> {
        if let Some(s) = Self::preset(arg) {
            return Ok(s);
        }
        let path = Path::new(arg);
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("scene '{arg}' is neither a preset nor a readable file: {e}")))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut spec = SceneSpec {
            name: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            primitives: Vec::new(),
            path: CameraPath::Line {
                from: Point3::origin(),
                to: Point3::origin(),
            },
            frames: 0,
            intrinsics: default_intrinsics(),
            width: 320,
            height: 240,
            texture_cell: 1.0,
            gt_spacing: 0.15,
            max_range: 15.0,
        };
        let mut has_path = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::parse(path, i + 1, m);
            let mut tok = line.split_whitespace();
            let key = tok.next().unwrap();
            let rest: Vec<&str> = tok.collect();
            let nums = |n: usize, opt: usize| -> Result<Vec<f64>> {
                if rest.len() < n || rest.len() > n + opt {
                    return Err(err(format!("'{key}' takes {n} values")));
                }
                rest.iter()
                    .map(|s| s.parse::<f64>().map_err(|e| err(format!("{s}: {e}"))))
                    .collect()
            };
            match key {
                "name" => spec.name = rest.join(" "),
                "frames" => spec.frames = nums(1, 0)?[0] as usize,
                "image" => {
                    let v = nums(2, 0)?;
                    (spec.width, spec.height) = (v[0] as usize, v[1] as usize);
                }
                "intrinsics" => {
                    let v = nums(4, 0)?;
                    spec.intrinsics = Intrinsics::new(v[0], v[1], v[2], v[3]).map_err(|e| err(e.to_string()))?;
                }
                "texture_cell" => spec.texture_cell = nums(1, 0)?[0],
                "gt_spacing" => spec.gt_spacing = nums(1, 0)?[0],
                "max_range" => spec.max_range = nums(1, 0)?[0],
                "box" => {
                    let v = nums(6, 1)?;
                    spec.primitives.push(cube(
                        [v[0], v[1], v[2]],
                        [v[3], v[4], v[5]],
                        v.get(6).copied().unwrap_or(0.5),
                    ));
                }
                "rect" => {
                    let axis = match rest.first() {
                        Some(&"x") => 0,
                        Some(&"y") => 1,
                        Some(&"z") => 2,
                        _ => return Err(err("rect axis must be x, y or z".into())),
                    };
                    let v: Vec<f64> = rest[1..]
                        .iter()
                        .map(|s| s.parse::<f64>().map_err(|e| err(format!("{s}: {e}"))))
                        .collect::<Result<_>>()?;
                    if v.len() != 5 && v.len() != 6 {
                        return Err(err("'rect' takes an axis and 5 values".into()));
                    }
                    spec.primitives.push(rect(
                        axis,
                        v[0],
                        [v[1], v[2]],
                        [v[3], v[4]],
                        v.get(5).copied().unwrap_or(0.5),
                    ));
                }
                "line" => {
                    let v = nums(6, 0)?;
                    spec.path = CameraPath::Line {
                        from: Point3::new(v[0], v[1], v[2]),
                        to: Point3::new(v[3], v[4], v[5]),
                    };
                    has_path = true;
                }
                "orbit" => {
                    let v = nums(4, 2)?;
                    if v.len() == 5 {
                        return Err(err("'orbit' takes 4 or 6 values".into()));
                    }
                    spec.path = CameraPath::Orbit {
                        center: Point3::new(v[0], v[1], v[2]),
                        radius: v[3],
                        start: v.get(4).copied().unwrap_or(0.0),
                        sweep: v.get(5).copied().unwrap_or(std::f64::consts::TAU),
                    };
                    has_path = true;
                }
                _ => return Err(err(format!("unknown key '{key}'"))),
            }
        }
        if !has_path {
            return Err(Error::parse(path, 0, "scene has no camera path"));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn cameras(&self) -> Result<Vec<Camera>> {
        let up = Vector3::z();
        let n = self.frames;
        (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                let (c, look) = match self.path {
                    CameraPath::Line { from, to } => {
                        let d = to - from;
                        if d.norm() == 0.0 {
                            return Err(Error::Config("line path has zero length".into()));
                        }
                        (from + d * s, d.normalize())
                    }
                    CameraPath::Orbit {
                        center,
                        radius,
                        start,
                        sweep,
                    } => {
                        let a = start + sweep * s;
                        let radial = Vector3::new(a.cos(), a.sin(), 0.0);
                        let tangent = Vector3::new(-a.sin(), a.cos(), 0.0) * sweep.signum();
                        (center + radial * radius, (tangent + radial).normalize())
                    }
                };
                Ok(Camera::new(self.intrinsics, Pose::look_at(&c, &(c + look), &up)?))
            })
            .collect()
    }
}

/// One axis-aligned rectangular face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub axis: usize,
    pub offset: f64,
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub albedo: f64,
}

impl Face {
    fn axes(&self) -> (usize, usize) {
        ((self.axis + 1) % 3, (self.axis + 2) % 3)
    }

    pub fn point(&self, a: f64, b: f64) -> Point3 {
        let (ia, ib) = self.axes();
        let mut p = Point3::origin();
        p[self.axis] = self.offset;
        p[ia] = a;
        p[ib] = b;
        p
    }

    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]) * (self.max[1] - self.min[1])
    }

    /// Distance from `x` to the face.
    pub fn distance(&self, x: &Point3) -> f64 {
        let (ia, ib) = self.axes();
        let da = (self.min[0] - x[ia]).max(x[ia] - self.max[0]).max(0.0);
        let db = (self.min[1] - x[ib]).max(x[ib] - self.max[1]).max(0.0);
        let dn = x[self.axis] - self.offset;
        (da * da + db * db + dn * dn).sqrt()
    }

    /// Ray parameter of the hit of `o + t d` with the face.
    pub fn intersect(&self, o: &Point3, d: &Vector3<f64>) -> Option<f64> {
        let dn = d[self.axis];
        if dn == 0.0 {
            return None;
        }
        let t = (self.offset - o[self.axis]) / dn;
        let (ia, ib) = self.axes();
        let a = o[ia] + t * d[ia];
        let b = o[ib] + t * d[ib];
        let tol = 1e-9;
        (a >= self.min[0] - tol && a <= self.max[0] + tol && b >= self.min[1] - tol && b <= self.max[1] + tol)
            .then_some(t)
    }

    pub fn albedo_at(&self, x: &Point3, cell: f64) -> f64 {
        let (ia, ib) = self.axes();
        let k = (x[ia] / cell).floor() as i64 + (x[ib] / cell).floor() as i64;
        let delta = if k.rem_euclid(2) == 0 { 0.3 } else { -0.3 };
        (self.albedo + delta).clamp(0.0, 1.0)
    }
}

fn faces_of(p: &Primitive) -> Vec<Face> {
    match *p {
        Primitive::Rect {
            axis,
            offset,
            min,
            max,
            albedo,
        } => vec![Face {
            axis,
            offset,
            min,
            max,
            albedo,
        }],
        Primitive::Box { min, max, albedo } => {
            let mut out = Vec::with_capacity(6);
            for axis in 0..3 {
                let (ia, ib) = ((axis + 1) % 3, (axis + 2) % 3);
                for offset in [min[axis], max[axis]] {
                    out.push(Face {
                        axis,
                        offset,
                        min: [min[ia], min[ib]],
                        max: [max[ia], max[ib]],
                        albedo,
                    });
                }
            }
            out
        }
    }
}

/// A 3D edge: a face border or a checker line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point3,
    pub b: Point3,
}

fn face_segments(f: &Face, cell: f64, out: &mut Vec<Segment>) {
    let (a0, b0, a1, b1) = (f.min[0], f.min[1], f.max[0], f.max[1]);
    let mut push = |p: Point3, q: Point3| out.push(Segment { a: p, b: q });
    push(f.point(a0, b0), f.point(a1, b0));
    push(f.point(a1, b0), f.point(a1, b1));
    push(f.point(a1, b1), f.point(a0, b1));
    push(f.point(a0, b1), f.point(a0, b0));
    let mut k = (a0 / cell).floor() + 1.0;
    while k * cell < a1 - 1e-9 {
        push(f.point(k * cell, b0), f.point(k * cell, b1));
        k += 1.0;
    }
    let mut k = (b0 / cell).floor() + 1.0;
    while k * cell < b1 - 1e-9 {
        push(f.point(a0, k * cell), f.point(a1, k * cell));
        k += 1.0;
    }
}

fn segment_key(s: &Segment) -> [i64; 6] {
    let q = |p: &Point3| [0, 1, 2].map(|k| (p[k] * 1e6).round() as i64);
    let (a, b) = (q(&s.a), q(&s.b));
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    [lo[0], lo[1], lo[2], hi[0], hi[1], hi[2]]
}

/// Ground truth of a synthetic sequence.
#[derive(Debug, Clone)]
pub struct SceneOracle {
    pub spec: SceneSpec,
    pub cameras: Vec<Camera>,
    pub faces: Vec<Face>,
    pub edges: Vec<Segment>,
    /// Surface samples observed by at least one keyframe camera.
    pub gt_cloud: Vec<Point3>,
}

pub fn generate_scene(spec: &SceneSpec, seed: u64, keyframe_period: usize) -> Result<SceneOracle> {
    spec.validate()?;
    let cameras = spec.cameras()?;
    for (i, c) in cameras.iter().enumerate() {
        for p in &spec.primitives {
            if let Primitive::Box { min, max, .. } = p {
                let x = c.center();
                if (0..3).all(|k| x[k] > min[k] && x[k] < max[k]) {
                    return Err(Error::Config(format!("camera {i} at {x} is inside a box")));
                }
            }
        }
    }
    let faces: Vec<Face> = spec.primitives.iter().flat_map(faces_of).collect();
    let mut edges = Vec::new();
    for f in &faces {
        face_segments(f, spec.texture_cell, &mut edges);
    }
    let mut seen = std::collections::HashSet::new();
    edges.retain(|s| seen.insert(segment_key(s)));
    let mut oracle = SceneOracle {
        spec: spec.clone(),
        cameras,
        faces,
        edges,
        gt_cloud: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for f in &oracle.faces {
        let n = (f.area() / (spec.gt_spacing * spec.gt_spacing)).ceil() as usize;
        for _ in 0..n {
            let a = rng.random_range(f.min[0]..=f.max[0]);
            let b = rng.random_range(f.min[1]..=f.max[1]);
            samples.push(f.point(a, b));
        }
    }
    let keyframes: Vec<usize> = (0..spec.frames).step_by(keyframe_period.max(1)).collect();
    let observed: Vec<bool> = samples
        .par_iter()
        .map(|x| keyframes.iter().any(|&k| oracle.observes(k, x, 0.0)))
        .collect();
    oracle.gt_cloud = samples.into_iter().zip(observed).filter_map(|(x, o)| o.then_some(x)).collect();
    Ok(oracle)
}

impl SceneOracle {
    /// Nearest face hit by `o + t d` with `t > t_min`.
    pub fn first_hit(&self, o: &Point3, d: &Vector3<f64>, t_min: f64) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (i, f) in self.faces.iter().enumerate() {
            if let Some(t) = f.intersect(o, d) {
                if t > t_min && best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, i));
                }
            }
        }
        best
    }

    /// True when no face blocks the segment from `from` to `x`.
    pub fn unoccluded(&self, from: &Point3, x: &Point3) -> bool {
        let d = x - from;
        !self
            .faces
            .iter()
            .any(|f| f.intersect(from, &d).is_some_and(|t| t > OCCLUSION_EPS && t < 1.0 - OCCLUSION_EPS))
    }

    /// True when camera `frame` sees `x` in front of it, within range and
    /// at least `margin` pixels inside the image, without occlusion.
    pub fn observes(&self, frame: usize, x: &Point3, margin: f64) -> bool {
        let cam = &self.cameras[frame];
        let xc = cam.to_camera_frame(x);
        if xc.z < NEAR || (x - cam.center()).norm() > self.spec.max_range {
            return false;
        }
        let Ok(u) = cam.project(x) else {
            return false;
        };
        let (w, h) = (self.spec.width as f64, self.spec.height as f64);
        if u.x < margin || u.y < margin || u.x > w - 1.0 - margin || u.y > h - 1.0 - margin {
            return false;
        }
        self.unoccluded(cam.center(), x)
    }

    /// Bounding-box diagonal of the ground-truth cloud.
    pub fn diameter(&self) -> f64 {
        let Some(first) = self.gt_cloud.first() else {
            return 0.0;
        };
        let (mut lo, mut hi) = (*first, *first);
        for p in &self.gt_cloud {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (hi - lo).norm()
    }

    /// Distance from `x` to the nearest face.
    pub fn distance_to_surface(&self, x: &Point3) -> f64 {
        self.faces.iter().map(|f| f.distance(x)).fold(f64::INFINITY, f64::min)
    }

    /// Flat-shaded frame: checker albedo times a per-orientation shade.
    pub fn render(&self, frame: usize) -> GrayImage {
        let cam = &self.cameras[frame];
        let (w, h) = (self.spec.width, self.spec.height);
        let rows: Vec<Vec<f32>> = (0..h)
            .into_par_iter()
            .map(|y| {
                (0..w)
                    .map(|x| {
                        let d = cam.ray_direction(&Point2::new(x as f64, y as f64));
                        match self.first_hit(cam.center(), &d, 1e-9) {
                            Some((t, i)) => {
                                let f = &self.faces[i];
                                let shade = [0.9, 0.8, 1.0][f.axis];
                                let p = cam.center() + d * t;
                                (f.albedo_at(&p, self.spec.texture_cell) * shade) as f32
                            }
                            None => SKY,
                        }
                    })
                    .collect()
            })
            .collect();
        GrayImage::new(w, h, rows.concat()).expect("rendered intensities lie in [0, 1]")
    }

    /// Edge-Points of keyframe `frame`: samples along the 3D edges spaced
    /// about `step` pixels apart in that view, kept when observed.
    pub fn edge_points(&self, frame: usize, step: usize, margin: f64) -> Vec<Point3> {
        let cam = &self.cameras[frame];
        let step = step.max(1) as f64;
        let mut out = Vec::new();
        for s in &self.edges {
            let (za, zb) = (cam.to_camera_frame(&s.a).z, cam.to_camera_frame(&s.b).z);
            if za < NEAR && zb < NEAR {
                continue;
            }
            // clip to the near plane
            let clip = |z0: f64, z1: f64| if z0 >= NEAR { 0.0 } else { (NEAR - z0) / (z1 - z0) };
            let (ta, tb) = (clip(za, zb), 1.0 - clip(zb, za));
            let pa = s.a + (s.b - s.a) * ta;
            let pb = s.a + (s.b - s.a) * tb;
            let (Ok(ua), Ok(ub)) = (cam.project(&pa), cam.project(&pb)) else {
                continue;
            };
            let n = ((ua - ub).norm() / step).floor() as usize;
            for i in 0..=n {
                let t = if n == 0 { 0.0 } else { i as f64 / n as f64 };
                let x = pa + (pb - pa) * t;
                if self.observes(frame, &x, margin) {
                    out.push(x);
                }
            }
        }
        out
    }
}

/// Oracle track synthesis settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleParams {
    /// Gaussian pixel noise per measurement.
    pub noise_sigma: f64,
    /// Share of tracks receiving one mismatched measurement.
    pub outlier_rate: f64,
    /// Minimum and maximum distance of a mismatch from the epipolar line, px.
    pub outlier_px: (f64, f64),
    /// Points closer than this to the image border are not observed.
    pub margin: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            noise_sigma: 0.3,
            outlier_rate: 0.0,
            outlier_px: (10.0, 40.0),
            margin: 8.0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct OracleTracks {
    /// Tracks before the correspondence gates, ended by occlusion, leaving
    /// the view or the keyframe boundary.
    pub raw: Vec<Track>,
    /// Raw tracks after the correspondence gates.
    pub filtered: Vec<Track>,
    /// Ground-truth point per track, indexed by track id.
    pub truth: Vec<Point3>,
    /// Injected mismatches as (track id, frame).
    pub outliers: Vec<(u64, usize)>,
    pub dropped_low_parallax: usize,
    pub dropped_epipolar: usize,
}

/// Synthesizes frontend output from the scene: Edge-Points are sampled on
/// keyframes, projected through the following frames up to the next
/// keyframe with noise, ended by visibility, and gated like real tracks.
pub fn oracle_tracks(scene: &SceneOracle, fp: &FrontendParams, op: &OracleParams, seed: u64) -> Result<OracleTracks> {
    fp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, op.noise_sigma.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = OracleTracks::default();
    let n = scene.cameras.len();
    for k in (0..n).step_by(fp.t_k) {
        for x in scene.edge_points(k, fp.t_edges, op.margin) {
            let id = out.truth.len() as u64;
            out.truth.push(x);
            let measure = |f: usize, rng: &mut ChaCha8Rng| {
                let u = scene.cameras[f].project(&x).expect("observed points are in front");
                if op.noise_sigma > 0.0 {
                    Point2::new(u.x + noise.sample(rng), u.y + noise.sample(rng))
                } else {
                    u
                }
            };
            let mut t = Track::new(id, k, measure(k, &mut rng));
            for f in k + 1..=(k + fp.t_k).min(n - 1) {
                if !scene.observes(f, &x, op.margin) {
                    break;
                }
                let m = measure(f, &mut rng);
                t.push(f, m)?;
            }
            t.state = TrackState::Closed;
            if t.len() >= 2 && op.outlier_rate > 0.0 && rng.random_bool(op.outlier_rate.min(1.0)) {
                let j = rng.random_range(1..t.len());
                let (f_prev, u_prev) = t.measurements[j - 1];
                let (f_cur, u_cur) = t.measurements[j];
                let fm = crate::camera::fundamental_matrix(&scene.cameras[f_prev], &scene.cameras[f_cur])?;
                let l = fm * Vector3::new(u_prev.x, u_prev.y, 1.0);
                let normal = nalgebra::Vector2::new(l.x, l.y).normalize();
                let dist = rng.random_range(op.outlier_px.0..=op.outlier_px.1);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                // distance of the displaced point to the line, not of the shift
                let cur = (l.x * u_cur.x + l.y * u_cur.y + l.z) / l.x.hypot(l.y);
                let shift = sign * dist - cur;
                t.measurements[j].1 = u_cur + normal * shift;
                out.outliers.push((id, f_cur));
            }
            let (kept, verdict) = filter_track(&t, &scene.cameras, fp)?;
            match verdict {
                Some(MatchVerdict::DropLowParallax) => out.dropped_low_parallax += 1,
                Some(MatchVerdict::DropEpipolar) => out.dropped_epipolar += 1,
                _ => {}
            }
            out.raw.push(t);
            out.filtered.push(kept);
        }
    }
    Ok(out)
}
