//! Reconstruction metrics: cloud-to-mesh distance and critical artifacts.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::delaunay::{TetraId, Triangulation};
use crate::error::{Error, Result};
use crate::hash::IdSet;
use crate::mesh::SurfaceMesh;
use crate::Point3;

/// Closest point to `p` on triangle `(a, b, c)`, covering the interior,
/// edge and vertex regions.
pub fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

pub fn point_triangle_distance(p: &Point3, tri: &[Point3; 3]) -> f64 {
    (p - closest_point_on_triangle(p, &tri[0], &tri[1], &tri[2])).norm()
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Point3,
    hi: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            lo: Point3::from([f64::INFINITY; 3]),
            hi: Point3::from([f64::NEG_INFINITY; 3]),
        }
    }

    fn grow(&mut self, p: &Point3) {
        for k in 0..3 {
            self.lo[k] = self.lo[k].min(p[k]);
            self.hi[k] = self.hi[k].max(p[k]);
        }
    }

    fn distance_sq(&self, p: &Point3) -> f64 {
        let mut s = 0.0;
        for k in 0..3 {
            let d = (self.lo[k] - p[k]).max(p[k] - self.hi[k]).max(0.0);
            s += d * d;
        }
        s
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

const LEAF_SIZE: usize = 4;

/// Bounding-volume hierarchy over the triangles of a mesh for exact
/// nearest-triangle queries.
#[derive(Debug, Clone)]
pub struct TriangleBvh {
    tris: Vec<[Point3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl TriangleBvh {
    pub fn new(mesh: &SurfaceMesh) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::InvalidInput("mesh has no triangles".into()));
        }
        let tris: Vec<[Point3; 3]> = (0..mesh.triangles.len()).map(|i| mesh.triangle(i)).collect();
        let centroids: Vec<Point3> = tris
            .iter()
            .map(|t| Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0))
            .collect();
        let mut bvh = TriangleBvh {
            order: (0..tris.len()).collect(),
            tris,
            nodes: Vec::new(),
        };
        let n = bvh.order.len();
        bvh.build(&centroids, 0, n);
        Ok(bvh)
    }

    fn build(&mut self, centroids: &[Point3], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut cb = Aabb::empty();
        for &i in &self.order[start..end] {
            for p in &self.tris[i] {
                bounds.grow(p);
            }
            cb.grow(&centroids[i]);
        }
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        let ext = cb.hi - cb.lo;
        let axis = ext.imax();
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        self.nodes.push(Node::Leaf { bounds, start, end });
        let left = self.build(centroids, start, mid);
        let right = self.build(centroids, mid, end);
        self.nodes[id] = Node::Inner { bounds, left, right };
        id
    }

    /// Distance from `p` to the nearest triangle.
    pub fn distance(&self, p: &Point3) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.bounds().distance_sq(p) >= best * best {
                continue;
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for &i in &self.order[start..end] {
                        best = best.min(point_triangle_distance(p, &self.tris[i]));
                    }
                }
                Node::Inner { left, right, .. } => {
                    let (dl, dr) = (
                        self.nodes[left].bounds().distance_sq(p),
                        self.nodes[right].bounds().distance_sq(p),
                    );
                    // nearer child is popped first
                    if dl < dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }
}

/// Mean and median distance from cloud points to the nearest mesh triangle.
pub fn point_to_mesh_error(cloud: &[Point3], mesh: &SurfaceMesh) -> Result<(f64, f64)> {
    if cloud.is_empty() {
        return Err(Error::InvalidInput("ground-truth cloud is empty".into()));
    }
    let bvh = TriangleBvh::new(mesh)?;
    let mut d: Vec<f64> = cloud.par_iter().map(|p| bvh.distance(p)).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let n = d.len();
    d.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { d[n / 2] } else { 0.5 * (d[n / 2 - 1] + d[n / 2]) };
    Ok((mean, median))
}

/// Angle at `c` subtended by segment `ab`.
pub fn subtended_angle(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    let (u, v): (Vector3<f64>, Vector3<f64>) = (a - c, b - c);
    u.cross(&v).norm().atan2(u.dot(&v))
}

/// Facet-connected group of free-space cells left out of the outside set.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactComponent {
    pub cells: Vec<TetraId>,
    /// Largest angle under which any edge of the group is seen from a
    /// camera center.
    pub max_angle: f64,
}

/// Connected components of the ray-traversed finite cells outside `O`, in
/// order of their lowest cell id.
pub fn artifact_components(tri: &Triangulation, cameras: &[Point3]) -> Vec<ArtifactComponent> {
    let pocket = |t: TetraId| {
        let c = tri.tetra(t);
        !c.is_infinite() && !c.ray_refs.is_empty() && !c.is_outside()
    };
    let mut seen: IdSet<TetraId> = IdSet::default();
    let mut out = Vec::new();
    for start in tri.finite_tetras() {
        if !pocket(start) || seen.contains(&start) {
            continue;
        }
        seen.insert(start);
        let mut stack = vec![start];
        let mut comp = ArtifactComponent {
            cells: Vec::new(),
            max_angle: 0.0,
        };
        while let Some(t) = stack.pop() {
            let cell = tri.tetra(t);
            comp.cells.push(t);
            for i in 0..4 {
                for j in i + 1..4 {
                    let (a, b) = (tri.vertex(cell.vertices[i]), tri.vertex(cell.vertices[j]));
                    for c in cameras {
                        comp.max_angle = comp.max_angle.max(subtended_angle(a, b, c));
                    }
                }
            }
            for &n in &cell.neighbors {
                if pocket(n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        comp.cells.sort();
        out.push(comp);
    }
    out
}

/// Counts the artifact components containing an edge seen under an angle
/// larger than `alpha` from at least one camera center.
pub fn count_critical_artifacts(tri: &Triangulation, cameras: &[Point3], alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < std::f64::consts::PI) {
        return Err(Error::Config(format!("alpha must lie in (0, pi), got {alpha}")));
    }
    Ok(artifact_components(tri, cameras)
        .iter()
        .filter(|c| c.max_angle > alpha)
        .count())
}
