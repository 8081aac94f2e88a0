//! Viewing-ray traversal and Inverse Cone Heuristic weighting.
//!
//! A ray is the segment from a camera center `c` to a triangulated vertex
//! `v`. Degenerate crossings (the segment grazing an edge or a vertex) are
//! resolved by displacing `c` by the infinitesimal `(e, e^2, e^3)`: every
//! predicate of the walk is an orientation with `c` as one argument, so
//! [`orient3d_perturbed`] decides all ties consistently.
//!
//! The traversal is ordered from the camera towards the target. If the
//! segment leaves the convex hull, the infinite cell it exits into closes
//! the list. Weights and ray references live on the triangulation cells.
//!
//! Invariant maintained across insertions: the weight of every live cell
//! equals the sum of the per-ray increments of all rays, recomputed on the
//! current triangulation.

use rayon::prelude::*;

use crate::delaunay::{Conflict, InsertOutcome, Insertion, RayId, TetraId, Triangulation, VertexId};
use crate::error::{Error, Result};
use crate::hash::{IdMap, IdSet};
use crate::predicates::{orient3d_perturbed, Sign};
use crate::Point3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IchWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for IchWeights {
    fn default() -> Self {
        IchWeights {
            w1: 1.0,
            w2: 0.8,
            w3: 0.2,
        }
    }
}

impl IchWeights {
    /// Plain traversal counting: only crossed cells gain weight.
    pub fn plain() -> Self {
        IchWeights {
            w1: 1.0,
            w2: 0.0,
            w3: 0.0,
        }
    }

    pub fn new(w1: f64, w2: f64, w3: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !(ok(w1) && ok(w2) && ok(w3)) || w3 > w2 {
            return Err(Error::Config(format!(
                "ICH weights must be non-negative with w3 <= w2 (got {w1}, {w2}, {w3})"
            )));
        }
        Ok(IchWeights { w1, w2, w3 })
    }
}

#[derive(Debug, Clone)]
pub struct ViewingRay {
    pub center: Point3,
    pub target: VertexId,
    traversed: Vec<TetraId>,
}

impl ViewingRay {
    /// Cached traversal, camera side first.
    pub fn traversed(&self) -> &[TetraId] {
        &self.traversed
    }
}

/// Orientation of cell `t` with slot `j` replaced by the perturbed center.
fn orient_center(tri: &Triangulation, t: TetraId, j: usize, c: &Point3) -> Sign {
    let cell = tri.tetra(t);
    let mut pts = [c; 4];
    for (i, v) in cell.vertices.iter().enumerate() {
        if i != j {
            pts[i] = tri.vertex(*v);
        }
    }
    orient3d_perturbed(pts, j)
}

/// Sign of `orient3d(v, c, x, y)` with `c` perturbed.
fn line_side(v: &Point3, c: &Point3, x: &Point3, y: &Point3) -> Sign {
    orient3d_perturbed([v, c, x, y], 1)
}

/// Whether the line through `v` and the perturbed `c` pierces triangle `xyz`.
fn line_pierces(v: &Point3, c: &Point3, x: &Point3, y: &Point3, z: &Point3) -> bool {
    // a zero sign means `v` is collinear with an edge, so the line meets the
    // facet plane only at `v`, outside the triangle
    let s = [line_side(v, c, x, y), line_side(v, c, y, z), line_side(v, c, z, x)];
    s[0] != Sign::Zero && s[0] == s[1] && s[1] == s[2]
}

enum Start {
    Done(Vec<TetraId>),
    Cell(TetraId),
}

/// Steps allowed for the walk around the target before scanning its star.
const STAR_WALK_STEPS: usize = 64;

/// Cell of the star of `target` whose facets through `target` all face the
/// camera, found by crossing the first facet that does not; None when the
/// walk meets an infinite cell or does not settle.
fn star_walk(tri: &Triangulation, center: &Point3, target: VertexId) -> Option<TetraId> {
    let mut cur = tri.incident_cell(target)?;
    for _ in 0..STAR_WALK_STEPS {
        let cell = tri.tetra(cur);
        if cell.is_infinite() {
            return None;
        }
        let iv = cell.index_of(target)?;
        match (0..4).find(|&j| j != iv && orient_center(tri, cur, j, center) != Sign::Positive) {
            None => return Some(cur),
            Some(j) => cur = cell.neighbors[j],
        }
    }
    None
}

/// Cell of the star of `target` that the segment enters first, or the whole
/// traversal when it is trivial.
fn walk_start(tri: &Triangulation, center: &Point3, target: VertexId) -> Result<Start> {
    if target.is_infinite() || target.index() >= tri.num_vertices() {
        return Err(Error::InvalidInput(format!("ray target {} is not a vertex", target.0)));
    }
    if *tri.vertex(target) == *center {
        return Ok(Start::Done(Vec::new()));
    }
    if let Some(t) = star_walk(tri, center, target) {
        return Ok(Start::Cell(t));
    }
    let star = tri.incident_cells(target);
    if star.is_empty() {
        return Err(Error::InvalidInput(format!(
            "ray target {} is not triangulated yet",
            target.0
        )));
    }
    let start = star.iter().copied().find(|&t| {
        let cell = tri.tetra(t);
        if cell.is_infinite() {
            return false;
        }
        let iv = cell.index_of(target).unwrap();
        (0..4)
            .filter(|&j| j != iv)
            .all(|j| orient_center(tri, t, j, center) == Sign::Positive)
    });
    if let Some(t) = start {
        return Ok(Start::Cell(t));
    }
    // the segment leaves the hull right at the target
    let exit = star
        .iter()
        .copied()
        .filter(|&t| match tri.tetra(t).infinite_index() {
            Some(k) => orient_center(tri, t, k, center) == Sign::Positive,
            None => false,
        })
        .min();
    match exit {
        Some(t) => Ok(Start::Done(vec![t])),
        None => Err(Error::Degenerate(format!(
            "no cell around vertex {} faces the camera",
            target.0
        ))),
    }
}

/// Next cell towards the camera after entering `cur` from `prev`, or None
/// when `cur` ends the walk (infinite, or holding the camera). The start
/// cell (`prev` = None) is left through the facet opposite the target.
fn advance(
    tri: &Triangulation,
    prev: Option<TetraId>,
    cur: TetraId,
    center: &Point3,
    target: VertexId,
) -> Result<Option<TetraId>> {
    let cell = tri.tetra(cur);
    if cell.is_infinite() {
        return Ok(None);
    }
    let Some(prev) = prev else {
        // the three facets through the target already face the camera
        let iv = cell.index_of(target).expect("start cell is incident to the target");
        return Ok(match orient_center(tri, cur, iv, center) {
            Sign::Positive => None,
            _ => Some(cell.neighbors[iv]),
        });
    };
    // the camera lies on the inner side of the entry facet
    let e = cell.neighbor_index(prev).expect("neighbor reciprocity");
    let mut beyond = [0usize; 3];
    let mut n = 0;
    for j in 0..4 {
        if j != e && orient_center(tri, cur, j, center) == Sign::Negative {
            beyond[n] = j;
            n += 1;
        }
    }
    match n {
        0 => return Ok(None),
        1 => return Ok(Some(cell.neighbors[beyond[0]])),
        _ => {}
    }
    let pv = tri.vertex(target);
    for &j in &beyond[..n] {
        let f = cell.facet(j).map(|w| tri.vertex(w));
        if line_pierces(pv, center, f[0], f[1], f[2]) {
            return Ok(Some(cell.neighbors[j]));
        }
    }
    Err(Error::Degenerate(format!(
        "ray walk to vertex {} found no exit facet",
        target.0
    )))
}

/// Cells crossed by the segment from `center` to vertex `target`, ordered
/// from the camera side. Empty when the two coincide.
pub fn walk_ray(tri: &Triangulation, center: &Point3, target: VertexId) -> Result<Vec<TetraId>> {
    let start = match walk_start(tri, center, target)? {
        Start::Done(path) => return Ok(path),
        Start::Cell(t) => t,
    };
    let mut path = vec![start];
    let (mut prev, mut cur) = (None, start);
    let limit = tri.tetra_capacity() + 8;
    while let Some(next) = advance(tri, prev, cur, center, target)? {
        if path.len() > limit {
            return Err(Error::Degenerate(format!(
                "ray walk to vertex {} did not terminate",
                target.0
            )));
        }
        path.push(next);
        (prev, cur) = (Some(cur), next);
    }
    path.reverse();
    Ok(path)
}

/// Traversal after an insertion, given the traversal `old` (camera side
/// first) before it. Only the stretches through destroyed cells are walked
/// again; cells with ids below `first_new` predate the insertion.
fn rewalk(
    tri: &Triangulation,
    center: &Point3,
    target: VertexId,
    old: &[TetraId],
    destroyed: &IdSet<TetraId>,
    first_new: u32,
) -> Result<Vec<TetraId>> {
    // walk order: target side first
    let l: Vec<TetraId> = old.iter().rev().copied().collect();
    let Some(i) = l.iter().position(|t| destroyed.contains(t)) else {
        return Ok(old.to_vec());
    };
    let mut path: Vec<TetraId>;
    let (mut prev, mut cur);
    if i == 0 {
        match walk_start(tri, center, target)? {
            Start::Done(p) => return Ok(p),
            Start::Cell(t) => {
                path = vec![t];
                (prev, cur) = (None, t);
            }
        }
    } else {
        path = l[..i].to_vec();
        cur = l[i - 1];
        prev = if i >= 2 { Some(l[i - 2]) } else { None };
    }
    let limit = tri.tetra_capacity() + 8;
    while let Some(next) = advance(tri, prev, cur, center, target)? {
        if path.len() > limit {
            return walk_ray(tri, center, target);
        }
        if next.0 >= first_new {
            path.push(next);
            (prev, cur) = (Some(cur), next);
            continue;
        }
        // back on an unchanged stretch of the old traversal
        let Some(k) = l.iter().position(|&t| t == next) else {
            return walk_ray(tri, center, target);
        };
        let end = l[k..].iter().position(|t| destroyed.contains(t)).map_or(l.len(), |d| k + d);
        path.extend_from_slice(&l[k..end]);
        if end == l.len() {
            break;
        }
        cur = l[end - 1];
        prev = Some(if end - 1 > k { l[end - 2] } else { path[path.len() - 2] });
    }
    path.reverse();
    Ok(path)
}

/// Per-cell membership stamps reused across rays.
#[derive(Debug, Clone, Default)]
struct Scratch {
    marks: Vec<Mark>,
    epoch: u32,
    first: Vec<TetraId>,
    second: Vec<TetraId>,
}

/// Per-cell state of one increment computation, valid when `stamp` equals
/// the current epoch.
#[derive(Debug, Clone, Copy, Default)]
struct Mark {
    stamp: u32,
    ring: u8,
    count: u8,
}

const TRAVERSED: u8 = 0;
const FIRST: u8 = 1;
const SECOND: u8 = 2;

impl Scratch {
    fn begin(&mut self, capacity: usize) {
        if self.marks.len() < capacity {
            self.marks.resize(capacity, Mark::default());
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.marks.iter_mut().for_each(|m| m.stamp = 0);
            self.epoch = 1;
        }
        self.first.clear();
        self.second.clear();
    }

    /// Marks `t` unless already seen this epoch.
    fn claim(&mut self, t: TetraId, ring: u8) -> bool {
        let m = &mut self.marks[t.index()];
        if m.stamp == self.epoch {
            return false;
        }
        *m = Mark {
            stamp: self.epoch,
            ring,
            count: 0,
        };
        true
    }
}

/// Weight increments of one ray: `w1` on each traversed cell, `w2` once on
/// each facet neighbor of the traversal, and `w3` per distinct first-ring
/// neighbor on the next ring, capped at `w2`.
fn increments_into(
    tri: &Triangulation,
    traversed: &[TetraId],
    w: &IchWeights,
    s: &mut Scratch,
    out: &mut Vec<(TetraId, f64)>,
) {
    out.clear();
    s.begin(tri.tetra_capacity());
    for &t in traversed {
        if s.claim(t, TRAVERSED) {
            out.push((t, w.w1));
        }
    }
    for &t in traversed {
        for &n in &tri.tetra(t).neighbors {
            if s.claim(n, FIRST) {
                s.first.push(n);
                out.push((n, w.w2));
            }
        }
    }
    for k in 0..s.first.len() {
        let r = s.first[k];
        for &n in &tri.tetra(r).neighbors {
            if s.claim(n, SECOND) {
                s.second.push(n);
            }
            let m = &mut s.marks[n.index()];
            if m.ring == SECOND {
                m.count += 1;
            }
        }
    }
    for &n in &s.second {
        let inc = (w.w3 * s.marks[n.index()].count as f64).min(w.w2);
        out.push((n, inc));
    }
}

/// Owns the viewing rays and keeps cell weights consistent with them.
#[derive(Debug, Clone)]
pub struct Carver {
    weights: IchWeights,
    rays: Vec<ViewingRay>,
    by_target: Vec<Vec<RayId>>,
    scratch: Scratch,
    buf: Vec<(TetraId, f64)>,
}

impl Carver {
    pub fn new(weights: IchWeights) -> Self {
        Carver {
            weights,
            rays: Vec::new(),
            by_target: Vec::new(),
            scratch: Scratch::default(),
            buf: Vec::new(),
        }
    }

    pub fn weights(&self) -> &IchWeights {
        &self.weights
    }

    pub fn num_rays(&self) -> usize {
        self.rays.len()
    }

    pub fn ray(&self, r: RayId) -> &ViewingRay {
        &self.rays[r.0 as usize]
    }

    pub fn rays(&self) -> &[ViewingRay] {
        &self.rays
    }

    /// Increments a ray would apply on the current triangulation.
    pub fn increments(&mut self, tri: &Triangulation, traversed: &[TetraId]) -> Vec<(TetraId, f64)> {
        let mut out = Vec::new();
        increments_into(tri, traversed, &self.weights, &mut self.scratch, &mut out);
        out
    }

    fn apply(&mut self, tri: &mut Triangulation, r: RayId, sign: f64) {
        let mut buf = std::mem::take(&mut self.buf);
        let ray = &self.rays[r.0 as usize];
        increments_into(tri, &ray.traversed, &self.weights, &mut self.scratch, &mut buf);
        for &(t, inc) in &buf {
            let cell = tri.tetra_mut(t);
            cell.weight += sign * inc;
            if cell.weight < 0.0 && cell.weight > -1e-9 {
                cell.weight = 0.0;
            }
        }
        for &t in &ray.traversed {
            let refs = &mut tri.tetra_mut(t).ray_refs;
            if sign > 0.0 {
                refs.insert(r);
            } else {
                refs.remove(&r);
            }
        }
        self.buf = buf;
    }

    /// Walks and weights a batch of new rays; walks run in parallel.
    pub fn add_rays(
        &mut self,
        tri: &mut Triangulation,
        rays: &[(Point3, VertexId)],
    ) -> Result<Vec<RayId>> {
        let walks: Vec<Result<Vec<TetraId>>> = {
            let tri = &*tri;
            rays.par_iter().map(|(c, v)| walk_ray(tri, c, *v)).collect()
        };
        let mut ids = Vec::with_capacity(rays.len());
        for ((c, v), walk) in rays.iter().zip(walks) {
            let traversed = walk?;
            let id = RayId(self.rays.len() as u32);
            self.rays.push(ViewingRay {
                center: *c,
                target: *v,
                traversed,
            });
            if self.by_target.len() <= v.index() {
                self.by_target.resize(v.index() + 1, Vec::new());
            }
            self.by_target[v.index()].push(id);
            self.apply(tri, id, 1.0);
            ids.push(id);
        }
        Ok(ids)
    }

    pub fn add_ray(&mut self, tri: &mut Triangulation, center: Point3, target: VertexId) -> Result<RayId> {
        Ok(self.add_rays(tri, &[(center, target)])?[0])
    }

    /// Rays whose increments touch any cell of `region`: those referenced
    /// within two facet rings of it, plus those aimed at its vertices.
    pub fn affected_rays(&self, tri: &Triangulation, region: &[TetraId]) -> Vec<RayId> {
        let mut out: Vec<RayId> = Vec::new();
        for t in tri.dilate(region, 2) {
            out.extend(tri.tetra(t).ray_refs.iter().copied());
        }
        for &t in region {
            for v in tri.tetra(t).vertices {
                if let Some(rs) = self.by_target.get(v.index()) {
                    out.extend(rs.iter().copied());
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Removes the contributions of `rays` using the current adjacency.
    pub fn detach(&mut self, tri: &mut Triangulation, rays: &[RayId]) {
        for &r in rays {
            self.apply(tri, r, -1.0);
        }
    }

    /// Re-walks `rays` and applies their contributions again.
    pub fn attach(&mut self, tri: &mut Triangulation, rays: &[RayId]) -> Result<()> {
        let walks: Vec<Result<Vec<TetraId>>> = {
            let tri = &*tri;
            let me = &*self;
            rays.par_iter()
                .map(|&r| {
                    let ray = me.ray(r);
                    walk_ray(tri, &ray.center, ray.target)
                })
                .collect()
        };
        for (&r, walk) in rays.iter().zip(walks) {
            self.rays[r.0 as usize].traversed = walk?;
            self.apply(tri, r, 1.0);
        }
        Ok(())
    }

    /// Performs a previously computed insertion and retraces every affected
    /// ray, keeping weights equal to a from-scratch recomputation. Rays
    /// crossing the conflict region are walked again through the new cells;
    /// the others only have their ring increments reapplied.
    pub fn insert_with_region(
        &mut self,
        tri: &mut Triangulation,
        p: Point3,
        region: &[TetraId],
    ) -> Result<Insertion> {
        let affected = self.affected_rays(tri, region);
        self.detach(tri, &affected);
        let first_new = tri.tetra_capacity() as u32;
        let ins = tri.insert_with_region(p, region);
        let destroyed: IdSet<TetraId> = region.iter().copied().collect();
        let walks: Vec<Result<Vec<TetraId>>> = {
            let tri = &*tri;
            let me = &*self;
            affected
                .par_iter()
                .with_min_len(16)
                .map(|&r| {
                    let ray = me.ray(r);
                    rewalk(tri, &ray.center, ray.target, &ray.traversed, &destroyed, first_new)
                })
                .collect()
        };
        for (&r, walk) in affected.iter().zip(walks) {
            self.rays[r.0 as usize].traversed = walk?;
            self.apply(tri, r, 1.0);
        }
        Ok(ins)
    }

    /// Inserts `p` into the triangulation with retracing.
    pub fn insert_point(&mut self, tri: &mut Triangulation, p: Point3) -> Result<InsertOutcome> {
        match tri.conflict_region(&p) {
            Conflict::NoCells => {
                debug_assert!(self.rays.is_empty());
                tri.insert_point(p)
            }
            Conflict::Duplicate(v) => Ok(InsertOutcome::Duplicate(v)),
            Conflict::Region(region) => {
                if region.is_empty() {
                    return Err(Error::Degenerate(format!("empty conflict region for {p:?}")));
                }
                Ok(InsertOutcome::Inserted(self.insert_with_region(tri, p, &region)?))
            }
        }
    }

    /// Weights obtained by walking every ray afresh on the current
    /// triangulation, keyed by cell.
    pub fn recompute_weights(&self, tri: &Triangulation) -> Result<IdMap<TetraId, f64>> {
        let mut scratch = Scratch::default();
        let mut buf = Vec::new();
        let mut out: IdMap<TetraId, f64> = IdMap::default();
        for ray in &self.rays {
            let walk = walk_ray(tri, &ray.center, ray.target)?;
            increments_into(tri, &walk, &self.weights, &mut scratch, &mut buf);
            for &(t, inc) in &buf {
                *out.entry(t).or_insert(0.0) += inc;
            }
        }
        Ok(out)
    }

    /// Largest absolute difference between stored and recomputed weights.
    pub fn weight_drift(&self, tri: &Triangulation) -> Result<f64> {
        let fresh = self.recompute_weights(tri)?;
        let mut worst: f64 = 0.0;
        for t in tri.alive_tetras() {
            let expected = fresh.get(&t).copied().unwrap_or(0.0);
            worst = worst.max((tri.tetra(t).weight - expected).abs());
        }
        Ok(worst)
    }
}

/// Free space: live finite cells crossed by at least one ray.
pub fn is_carvable(tri: &Triangulation, t: TetraId) -> bool {
    let c = tri.tetra(t);
    c.alive && !c.is_infinite() && !c.ray_refs.is_empty()
}

pub fn mark_free_space(tri: &Triangulation) -> Vec<TetraId> {
    tri.finite_tetras().filter(|&t| is_carvable(tri, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicates::orient3d;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashMap, HashSet};

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    fn random_tri(n: usize, seed: u64) -> Triangulation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tri = Triangulation::new();
        for _ in 0..n {
            tri.insert_point(p(rng.random(), rng.random(), rng.random())).unwrap();
        }
        tri
    }

    fn contains_center(tri: &Triangulation, t: TetraId, c: &Point3) -> bool {
        (0..4).all(|j| orient_center(tri, t, j, c) == Sign::Positive)
    }

    /// Per-cell segment test, independent of the walk.
    fn segment_hits(tri: &Triangulation, t: TetraId, c: &Point3, v: VertexId) -> bool {
        let cell = tri.tetra(t);
        let pv = tri.vertex(v);
        if let Some(iv) = cell.index_of(v) {
            return (0..4)
                .filter(|&j| j != iv)
                .all(|j| orient_center(tri, t, j, c) == Sign::Positive);
        }
        if contains_center(tri, t, c) {
            return true;
        }
        for j in 0..4 {
            let f = cell.facet(j).map(|w| tri.vertex(w));
            let sv = orient3d(f[0], f[1], f[2], pv);
            let sc = orient3d_perturbed([f[0], f[1], f[2], c], 3);
            if sv == Sign::Zero || sv == sc {
                continue;
            }
            let s = [
                orient3d_perturbed([pv, c, f[0], f[1]], 1),
                orient3d_perturbed([pv, c, f[1], f[2]], 1),
                orient3d_perturbed([pv, c, f[2], f[0]], 1),
            ];
            if s.iter().all(|&x| x == s[0]) {
                return true;
            }
        }
        false
    }

    fn brute_force_walk(tri: &Triangulation, c: &Point3, v: VertexId) -> HashSet<TetraId> {
        if tri.vertex(v) == c {
            return HashSet::new();
        }
        tri.finite_tetras().filter(|&t| segment_hits(tri, t, c, v)).collect()
    }

    /// Straightforward two-ring weighting with hash sets.
    fn oracle_increments(tri: &Triangulation, walk: &[TetraId], w: &IchWeights) -> HashMap<TetraId, f64> {
        let trav: HashSet<TetraId> = walk.iter().copied().collect();
        let mut first = HashSet::new();
        for &t in walk {
            for &n in &tri.tetra(t).neighbors {
                if !trav.contains(&n) {
                    first.insert(n);
                }
            }
        }
        let mut second: HashMap<TetraId, usize> = HashMap::new();
        for &r in &first {
            for &n in &tri.tetra(r).neighbors {
                if !trav.contains(&n) && !first.contains(&n) {
                    *second.entry(n).or_default() += 1;
                }
            }
        }
        let mut out = HashMap::new();
        for t in trav {
            out.insert(t, w.w1);
        }
        for t in first {
            out.insert(t, w.w2);
        }
        for (t, k) in second {
            out.insert(t, (w.w3 * k as f64).min(w.w2));
        }
        out
    }

    fn is_facet_connected(tri: &Triangulation, walk: &[TetraId]) -> bool {
        walk.windows(2).all(|w| tri.tetra(w[0]).neighbor_index(w[1]).is_some())
    }

    #[test]
    fn ray_inside_single_cell() {
        let mut tri = Triangulation::new();
        for q in [p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(0., 0., 1.)] {
            tri.insert_point(q).unwrap();
        }
        let walk = walk_ray(&tri, &p(0.1, 0.1, 0.1), VertexId(1)).unwrap();
        assert_eq!(walk.len(), 1);
        assert!(!tri.is_infinite(walk[0]));
    }

    #[test]
    fn ray_crosses_shared_facet() {
        let mut tri = Triangulation::new();
        for q in [p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.), p(0.3, 0.3, 1.), p(0.3, 0.3, -1.)] {
            tri.insert_point(q).unwrap();
        }
        assert_eq!(tri.num_finite_tetras(), 2);
        let walk = walk_ray(&tri, &p(0.3, 0.3, 0.9), VertexId(4)).unwrap();
        assert_eq!(walk.len(), 2);
        assert!(is_facet_connected(&tri, &walk));
        assert!(tri.tetra(walk[0]).index_of(VertexId(3)).is_some());
        assert!(tri.tetra(walk[1]).index_of(VertexId(4)).is_some());
    }

    #[test]
    fn coincident_center_gives_empty_walk_and_bad_target_errors() {
        let tri = random_tri(10, 1);
        let v = VertexId(3);
        assert!(walk_ray(&tri, tri.vertex(v), v).unwrap().is_empty());
        assert!(walk_ray(&tri, &p(0.5, 0.5, 0.5), VertexId(99)).is_err());
    }

    #[test]
    fn walks_match_brute_force_intersection() {
        let tri = random_tri(200, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..500 {
            let c = if i % 5 == 0 {
                // some cameras outside the hull
                p(rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0))
            } else {
                p(rng.random(), rng.random(), rng.random())
            };
            let v = VertexId(rng.random_range(0..200));
            let walk = walk_ray(&tri, &c, v).unwrap();
            assert!(is_facet_connected(&tri, &walk));
            let finite: HashSet<TetraId> = walk.iter().copied().filter(|&t| !tri.is_infinite(t)).collect();
            assert_eq!(finite.len(), walk.iter().filter(|&&t| !tri.is_infinite(t)).count());
            assert_eq!(finite, brute_force_walk(&tri, &c, v), "ray {i}");
        }
    }

    #[test]
    fn walks_on_lattice_match_brute_force() {
        // grid vertices and grid-aligned cameras force every tie-break path
        let mut tri = Triangulation::new();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    tri.insert_point(p(i as f64, j as f64, k as f64)).unwrap();
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let c = p(
                rng.random_range(0..7) as f64 * 0.5,
                rng.random_range(0..7) as f64 * 0.5,
                rng.random_range(0..7) as f64 * 0.5,
            );
            let v = VertexId(rng.random_range(0..64));
            let walk = walk_ray(&tri, &c, v).unwrap();
            assert!(is_facet_connected(&tri, &walk));
            let finite: HashSet<TetraId> = walk.iter().copied().filter(|&t| !tri.is_infinite(t)).collect();
            let bf = brute_force_walk(&tri, &c, v);
            if finite != bf {
                let dbg = |t: &TetraId| (t.0, tri.tetra(*t).vertices.map(|w| *tri.vertex(w)));
                panic!("c={c:?} v={:?}\nwalk={:?}\nonly_walk={:?}\nonly_bf={:?}", tri.vertex(v),
                    walk.iter().map(dbg).collect::<Vec<_>>(),
                    finite.difference(&bf).map(dbg).collect::<Vec<_>>(),
                    bf.difference(&finite).map(dbg).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn isolated_cell_gets_w1_and_neighbors_w2() {
        let tri = random_tri(60, 5);
        let t = tri
            .finite_tetras()
            .find(|&t| {
                let ns = tri.tetra(t).neighbors;
                ns.iter().collect::<HashSet<_>>().len() == 4
            })
            .unwrap();
        let mut carver = Carver::new(IchWeights::default());
        let inc: HashMap<TetraId, f64> = carver.increments(&tri, &[t]).into_iter().collect();
        assert_eq!(inc[&t], 1.0);
        for n in tri.tetra(t).neighbors {
            assert_eq!(inc[&n], 0.8);
        }
    }

    #[test]
    fn second_ring_counts_and_cap() {
        let w = IchWeights::default();
        // a traversal of several cells around one vertex produces second-ring
        // cells touching 1, 2, 3 or more first-ring cells
        let tri = random_tri(120, 6);
        let mut carver = Carver::new(w);
        let mut seen_counts = HashSet::new();
        for t in tri.finite_tetras().take(40).collect::<Vec<_>>() {
            let walk = vec![t, tri.tetra(t).neighbors[0]];
            let got: HashMap<TetraId, f64> = carver.increments(&tri, &walk).into_iter().collect();
            let want = oracle_increments(&tri, &walk, &w);
            assert_eq!(got.len(), want.len());
            for (k, v) in want {
                assert!((got[&k] - v).abs() < 1e-15);
                if v > 0.0 && v < 0.8 {
                    seen_counts.insert((v / 0.2).round() as usize);
                }
            }
        }
        assert!(seen_counts.contains(&1) && seen_counts.contains(&2));
    }

    #[test]
    fn cap_applies_when_four_first_ring_neighbors() {
        // the per-ray second-ring total saturates at w2
        let w = IchWeights::default();
        assert_eq!((w.w3 * 2.0_f64).min(w.w2), 0.4);
        assert_eq!((w.w3 * 4.0_f64).min(w.w2), 0.8);
        assert_eq!((w.w3 * 5.0_f64).min(w.w2), 0.8);
    }

    #[test]
    fn crossing_rays_share_cells() {
        let mut tri = random_tri(80, 7);
        let mut carver = Carver::new(IchWeights::default());
        assert!(mark_free_space(&tri).is_empty());
        let a = carver.add_ray(&mut tri, p(0.5, 0.5, 0.5), VertexId(0)).unwrap();
        let one: HashSet<TetraId> = carver
            .ray(a)
            .traversed()
            .iter()
            .copied()
            .filter(|&t| !tri.is_infinite(t))
            .collect();
        assert_eq!(mark_free_space(&tri).into_iter().collect::<HashSet<_>>(), one);
        let b = carver.add_ray(&mut tri, p(0.5, 0.5, 0.5), VertexId(1)).unwrap();
        let shared = carver.ray(a).traversed()[0];
        assert_eq!(carver.ray(b).traversed()[0], shared);
        assert_eq!(tri.tetra(shared).ray_refs.len(), 2);
    }

    #[test]
    fn insertion_away_from_rays_changes_nothing() {
        let mut tri = random_tri(100, 8);
        let mut carver = Carver::new(IchWeights::default());
        carver.add_ray(&mut tri, p(0.1, 0.1, 0.1), VertexId(0)).unwrap();
        let far = p(5.0, 5.0, 5.0);
        let Conflict::Region(region) = tri.conflict_region(&far) else { panic!() };
        if carver.affected_rays(&tri, &region).is_empty() {
            let before: Vec<f64> = tri.alive_tetras().map(|t| tri.tetra(t).weight).collect();
            let alive: Vec<TetraId> = tri.alive_tetras().collect();
            carver.insert_point(&mut tri, far).unwrap();
            for (t, w) in alive.iter().zip(before) {
                if tri.tetra(*t).alive {
                    assert_eq!(tri.tetra(*t).weight, w);
                }
            }
        }
    }

    #[test]
    fn retrace_preserves_segment_coverage_and_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for schedule in 0..5 {
            let mut tri = random_tri(30, 100 + schedule);
            let mut carver = Carver::new(IchWeights::default());
            for _ in 0..20 {
                let c = p(rng.random(), rng.random(), rng.random());
                let v = VertexId(rng.random_range(0..tri.num_vertices() as u32));
                carver.add_ray(&mut tri, c, v).unwrap();
            }
            for _ in 0..60 {
                let q = p(rng.random_range(-0.2..1.2), rng.random_range(-0.2..1.2), rng.random_range(-0.2..1.2));
                carver.insert_point(&mut tri, q).unwrap();
                for ray in carver.rays() {
                    assert!(is_facet_connected(&tri, ray.traversed()));
                    assert!(ray.traversed().iter().all(|&t| tri.tetra(t).alive));
                    assert_eq!(ray.traversed(), &walk_ray(&tri, &ray.center, ray.target).unwrap()[..]);
                }
            }
            assert!(carver.weight_drift(&tri).unwrap() < 1e-9);
            for (i, ray) in carver.rays().iter().enumerate() {
                let finite: HashSet<TetraId> =
                    ray.traversed().iter().copied().filter(|&t| !tri.is_infinite(t)).collect();
                assert_eq!(finite, brute_force_walk(&tri, &ray.center, ray.target));
                for &t in ray.traversed() {
                    assert!(tri.tetra(t).ray_refs.contains(&RayId(i as u32)));
                }
            }
            let refs: IdSet<RayId> = tri
                .alive_tetras()
                .flat_map(|t| tri.tetra(t).ray_refs.iter().copied().collect::<Vec<_>>())
                .collect();
            assert!(refs.len() <= carver.num_rays());
        }
    }

    #[test]
    fn weights_validation() {
        assert!(IchWeights::new(1.0, 0.8, 0.2).is_ok());
        assert!(IchWeights::new(1.0, 0.1, 0.2).is_err());
        assert!(IchWeights::new(-1.0, 0.8, 0.2).is_err());
    }
}
