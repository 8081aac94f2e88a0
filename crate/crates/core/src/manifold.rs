//! Manifold outside set over the carved triangulation.
//!
//! The outside set `O` is stored as cell labels. Its boundary is every
//! facet between an outside cell and a cell that is not outside (infinite
//! cells are never outside). A surface vertex is regular when the edges
//! opposite to it across its incident boundary triangles form exactly one
//! closed cycle. Only the four vertices of a cell can change regularity
//! when the cell changes label, so every label flip is validated locally.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::carver::{is_carvable, Carver, IchWeights};
use crate::delaunay::{Conflict, InsertOutcome, Label, TetraId, Triangulation, VertexId};
use crate::error::Result;
use crate::hash::{IdMap, IdSet};
use crate::mesh::SurfaceMesh;
use crate::Point3;

/// Additional rings tried when shrinking around a conflict region stalls.
pub const MAX_SHRINK_EXPANSIONS: usize = 2;

/// A new point with the camera centers it was observed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedPoint {
    pub position: Point3,
    pub cameras: Vec<Point3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointOutcome {
    Inserted(VertexId),
    DroppedDuplicate(VertexId),
    /// Its conflict region could not be freed from the outside set.
    DroppedManifold,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyframeStats {
    pub inserted: usize,
    pub dropped_duplicate: usize,
    pub dropped_manifold: usize,
    pub rays_added: usize,
    pub cells_added: usize,
    pub cells_removed: usize,
    pub insertion_secs: f64,
    pub rays_secs: f64,
    pub grow_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Triangulation, rays and outside set, mutated together.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    pub tri: Triangulation,
    pub carver: Carver,
    pending_rays: Vec<(Point3, VertexId)>,
    outside_count: usize,
    /// Cells removed by successful shrinking so far.
    shrunk: usize,
    star: Vec<TetraId>,
    link: Vec<(VertexId, VertexId)>,
}

impl Reconstructor {
    pub fn new(weights: IchWeights) -> Self {
        Reconstructor {
            tri: Triangulation::new(),
            carver: Carver::new(weights),
            pending_rays: Vec::new(),
            outside_count: 0,
            shrunk: 0,
            star: Vec::new(),
            link: Vec::new(),
        }
    }

    pub fn outside_count(&self) -> usize {
        self.outside_count
    }

    pub fn is_outside(&self, t: TetraId) -> bool {
        self.tri.tetra(t).is_outside()
    }

    /// Outside cells in increasing id order.
    pub fn outside_cells(&self) -> Vec<TetraId> {
        self.tri
            .finite_tetras()
            .filter(|&t| self.is_outside(t))
            .collect()
    }

    /// Whether `v` is regular on the current boundary (vertices off the
    /// boundary count as regular).
    pub fn is_regular_vertex(&mut self, v: VertexId) -> bool {
        let mut star = std::mem::take(&mut self.star);
        let mut link = std::mem::take(&mut self.link);
        self.tri.incident_cells_into(v, &mut star);
        link.clear();
        for &t in &star {
            let cell = self.tri.tetra(t);
            if !cell.is_outside() {
                continue;
            }
            let iv = cell.index_of(v).unwrap();
            for j in 0..4 {
                if j == iv || self.tri.tetra(cell.neighbors[j]).is_outside() {
                    continue;
                }
                let mut e = [VertexId::INFINITE; 2];
                let mut k = 0;
                for (s, &w) in cell.vertices.iter().enumerate() {
                    if s != iv && s != j {
                        e[k] = w;
                        k += 1;
                    }
                }
                link.push((e[0], e[1]));
            }
        }
        let ok = single_cycle(&link);
        self.star = star;
        self.link = link;
        ok
    }

    fn cell_vertices_regular(&mut self, t: TetraId) -> bool {
        let vs = self.tri.tetra(t).vertices;
        vs.iter().all(|&v| self.is_regular_vertex(v))
    }

    /// Adds `t` to the outside set if the boundary stays manifold.
    pub fn try_add(&mut self, t: TetraId) -> bool {
        debug_assert!(!self.tri.is_infinite(t) && !self.is_outside(t));
        self.tri.tetra_mut(t).label = Label::Outside;
        if self.cell_vertices_regular(t) {
            self.outside_count += 1;
            true
        } else {
            self.tri.tetra_mut(t).label = Label::Inside;
            false
        }
    }

    /// Removes `t` from the outside set if the boundary stays manifold.
    pub fn try_remove(&mut self, t: TetraId) -> bool {
        debug_assert!(self.is_outside(t));
        self.tri.tetra_mut(t).label = Label::Inside;
        if self.cell_vertices_regular(t) {
            self.outside_count -= 1;
            true
        } else {
            self.tri.tetra_mut(t).label = Label::Outside;
            false
        }
    }

    fn growable(&self, t: TetraId) -> bool {
        is_carvable(&self.tri, t) && !self.is_outside(t)
    }

    /// Weight-ordered region growing from `seeds`. Returns the number of
    /// cells added.
    pub fn grow(&mut self, seeds: &[TetraId]) -> usize {
        let mut heap: BinaryHeap<(Key, Reverse<TetraId>)> = BinaryHeap::new();
        for &s in seeds {
            if self.growable(s) {
                heap.push((Key(self.tri.tetra(s).weight), Reverse(s)));
            }
        }
        let mut added = 0;
        while let Some((Key(w), Reverse(t))) = heap.pop() {
            if !self.growable(t) {
                continue;
            }
            let current = self.tri.tetra(t).weight;
            if current != w {
                heap.push((Key(current), Reverse(t)));
                continue;
            }
            if self.try_add(t) {
                added += 1;
                for n in self.tri.tetra(t).neighbors {
                    if self.growable(n) {
                        heap.push((Key(self.tri.tetra(n).weight), Reverse(n)));
                    }
                }
            }
        }
        added
    }

    /// Carvable inside cells touching the boundary through a facet, edge or
    /// vertex; the heaviest carvable cell when the outside set is empty.
    pub fn grow_seeds(&self) -> Vec<TetraId> {
        if self.outside_count == 0 {
            let best = self
                .tri
                .finite_tetras()
                .filter(|&t| is_carvable(&self.tri, t))
                .max_by(|&a, &b| {
                    let (wa, wb) = (self.tri.tetra(a).weight, self.tri.tetra(b).weight);
                    wa.total_cmp(&wb).then(b.cmp(&a))
                });
            return best.into_iter().collect();
        }
        let mut verts: Vec<VertexId> = Vec::new();
        for t in self.tri.finite_tetras() {
            let cell = self.tri.tetra(t);
            if !cell.is_outside() {
                continue;
            }
            for j in 0..4 {
                if !self.tri.tetra(cell.neighbors[j]).is_outside() {
                    verts.extend(cell.facet(j));
                }
            }
        }
        verts.sort_unstable();
        verts.dedup();
        let mut seen: IdSet<TetraId> = IdSet::default();
        let mut out = Vec::new();
        let mut star = Vec::new();
        for v in verts {
            self.tri.incident_cells_into(v, &mut star);
            for &t in &star {
                if self.growable(t) && seen.insert(t) {
                    out.push(t);
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn region_touches_outside(&self, region: &[TetraId]) -> bool {
        region.iter().any(|&t| self.is_outside(t))
    }

    /// Removes outside cells of `zone`, lightest first, until `region` is
    /// free or nothing more can be removed.
    fn shrink(&mut self, zone: &[TetraId], region: &[TetraId], removed: &mut Vec<TetraId>) {
        loop {
            let mut cand: Vec<TetraId> = zone
                .iter()
                .copied()
                .filter(|&t| self.is_outside(t))
                .collect();
            cand.sort_by(|&a, &b| {
                let (wa, wb) = (self.tri.tetra(a).weight, self.tri.tetra(b).weight);
                wa.total_cmp(&wb).then(a.cmp(&b))
            });
            let mut progress = false;
            for t in cand {
                if self.is_outside(t) && self.try_remove(t) {
                    removed.push(t);
                    progress = true;
                }
            }
            if !progress || !self.region_touches_outside(region) {
                return;
            }
        }
    }

    /// Inserts `p` unless its conflict region cannot be cleared of outside
    /// cells by manifold-preserving shrinking, in which case every label
    /// is restored and the point is dropped.
    pub fn insert_with_shrink(&mut self, p: Point3) -> Result<PointOutcome> {
        let region = match self.tri.conflict_region(&p) {
            Conflict::NoCells => {
                return Ok(match self.tri.insert_point(p)? {
                    InsertOutcome::Inserted(ins) => PointOutcome::Inserted(ins.vertex),
                    InsertOutcome::Deferred(v) => PointOutcome::Inserted(v),
                    InsertOutcome::Duplicate(v) => PointOutcome::DroppedDuplicate(v),
                })
            }
            Conflict::Duplicate(v) => return Ok(PointOutcome::DroppedDuplicate(v)),
            Conflict::Region(r) => r,
        };
        if self.region_touches_outside(&region) {
            let mut removed = Vec::new();
            let mut zone = self.tri.dilate(&region, 1);
            for expansion in 0..=MAX_SHRINK_EXPANSIONS {
                self.shrink(&zone, &region, &mut removed);
                if !self.region_touches_outside(&region) {
                    break;
                }
                if expansion < MAX_SHRINK_EXPANSIONS {
                    zone = self.tri.dilate(&zone, 1);
                }
            }
            if self.region_touches_outside(&region) {
                for &t in removed.iter().rev() {
                    self.tri.tetra_mut(t).label = Label::Outside;
                }
                self.outside_count += removed.len();
                return Ok(PointOutcome::DroppedManifold);
            }
            self.shrunk += removed.len();
        }
        let ins = self.carver.insert_with_region(&mut self.tri, p, &region)?;
        Ok(PointOutcome::Inserted(ins.vertex))
    }

    /// Inserts a batch of points, shoots their rays and grows the outside
    /// set from its boundary.
    pub fn keyframe_update(&mut self, points: &[ObservedPoint]) -> Result<KeyframeStats> {
        let mut stats = KeyframeStats::default();
        let shrunk_before = self.shrunk;
        let t0 = Instant::now();
        for pt in points {
            match self.insert_with_shrink(pt.position)? {
                PointOutcome::Inserted(v) => {
                    stats.inserted += 1;
                    self.pending_rays.extend(pt.cameras.iter().map(|&c| (c, v)));
                }
                PointOutcome::DroppedDuplicate(_) => stats.dropped_duplicate += 1,
                PointOutcome::DroppedManifold => stats.dropped_manifold += 1,
            }
        }
        stats.cells_removed = self.shrunk - shrunk_before;
        let t1 = Instant::now();
        let (ready, waiting): (Vec<_>, Vec<_>) = std::mem::take(&mut self.pending_rays)
            .into_iter()
            .partition(|(_, v)| self.tri.incident_cell(*v).is_some());
        self.pending_rays = waiting;
        self.carver.add_rays(&mut self.tri, &ready)?;
        stats.rays_added = ready.len();
        let t2 = Instant::now();
        let seeds = self.grow_seeds();
        stats.cells_added = self.grow(&seeds);
        let t3 = Instant::now();
        stats.insertion_secs = (t1 - t0).as_secs_f64();
        stats.rays_secs = (t2 - t1).as_secs_f64();
        stats.grow_secs = (t3 - t2).as_secs_f64();
        Ok(stats)
    }

    /// Initial reconstruction: insertion, ray tracing and growing from the
    /// heaviest free-space cell.
    pub fn bootstrap(&mut self, points: &[ObservedPoint]) -> Result<KeyframeStats> {
        debug_assert_eq!(self.outside_count, 0);
        self.keyframe_update(points)
    }

    /// Boundary of the outside set, oriented away from it.
    pub fn extract_surface(&self) -> SurfaceMesh {
        extract_surface(&self.tri)
    }

    /// Checks every outside-set invariant, returning the first violation.
    pub fn check_invariants(&mut self) -> std::result::Result<(), String> {
        let mut count = 0;
        let mut surface_vertices = Vec::new();
        for t in self.tri.alive_tetras().collect::<Vec<_>>() {
            let cell = self.tri.tetra(t);
            if !cell.is_outside() {
                continue;
            }
            if cell.is_infinite() {
                return Err(format!("infinite cell {} is outside", t.0));
            }
            if cell.ray_refs.is_empty() {
                return Err(format!("outside cell {} is not crossed by any ray", t.0));
            }
            count += 1;
            for j in 0..4 {
                if !self.tri.tetra(cell.neighbors[j]).is_outside() {
                    surface_vertices.extend(cell.facet(j));
                }
            }
        }
        if count != self.outside_count {
            return Err(format!("outside count {} != {}", self.outside_count, count));
        }
        surface_vertices.sort_unstable();
        surface_vertices.dedup();
        for v in surface_vertices {
            if !self.is_regular_vertex(v) {
                return Err(format!("surface vertex {} is not regular", v.0));
            }
        }
        self.extract_surface().check_closed_manifold()
    }
}

/// True for an empty edge list or one forming exactly one closed cycle.
fn single_cycle(edges: &[(VertexId, VertexId)]) -> bool {
    if edges.is_empty() {
        return true;
    }
    if edges.len() < 3 {
        return false;
    }
    let mut deg: Vec<(VertexId, u32)> = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        for x in [a, b] {
            match deg.iter_mut().find(|(v, _)| *v == x) {
                Some(d) => d.1 += 1,
                None => deg.push((x, 1)),
            }
        }
    }
    if deg.len() != edges.len() || deg.iter().any(|&(_, d)| d != 2) {
        return false;
    }
    // walk the cycle from the first edge
    let (start, mut cur) = edges[0];
    let mut prev_edge = 0;
    let mut steps = 1;
    while cur != start {
        let next = edges
            .iter()
            .enumerate()
            .find(|&(i, &(a, b))| i != prev_edge && (a == cur || b == cur));
        let Some((i, &(a, b))) = next else {
            return false;
        };
        cur = if a == cur { b } else { a };
        prev_edge = i;
        steps += 1;
        if steps > edges.len() {
            return false;
        }
    }
    steps == edges.len()
}

/// Boundary of the outside set, oriented away from it. Vertices are
/// welded by id in order of first appearance.
pub fn extract_surface(tri: &Triangulation) -> SurfaceMesh {
    let mut mesh = SurfaceMesh::default();
    let mut index: IdMap<VertexId, u32> = IdMap::default();
    for t in tri.finite_tetras() {
        let cell = tri.tetra(t);
        if !cell.is_outside() {
            continue;
        }
        for i in 0..4 {
            if tri.tetra(cell.neighbors[i]).is_outside() {
                continue;
            }
            let f = cell.facet(i);
            let face = if i % 2 == 0 { f } else { [f[0], f[2], f[1]] };
            let ids = face.map(|v| {
                *index.entry(v).or_insert_with(|| {
                    mesh.vertices.push(*tri.vertex(v));
                    (mesh.vertices.len() - 1) as u32
                })
            });
            mesh.triangles.push(ids);
        }
    }
    mesh
}
