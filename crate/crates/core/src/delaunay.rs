//! Incremental 3D Delaunay triangulation (Bowyer-Watson) with an infinite
//! vertex.
//!
//! The convex hull is closed off by "infinite" cells that share the
//! distinguished [`VertexId::INFINITE`]. A finite cell lists its vertices in
//! positive orientation; an infinite cell lists them so that replacing the
//! infinite vertex with any point strictly beyond its hull facet gives a
//! positive orientation. Neighbor `i` of a cell is the cell across the facet
//! opposite vertex `i`.
//!
//! Cells are never reused: destroyed cells stay in the arena with
//! `alive == false`, so ids are stable for the lifetime of the structure.

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hash::{IdMap, IdSet};
use crate::predicates::{insphere_perturbed, orient3d, Sign};
use crate::Point3;

/// Points closer than this to an existing vertex are rejected as duplicates.
pub const DUPLICATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u32);

impl VertexId {
    pub const INFINITE: VertexId = VertexId(u32::MAX);

    pub fn is_infinite(self) -> bool {
        self == VertexId::INFINITE
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TetraId(pub u32);

impl TetraId {
    pub const NONE: TetraId = TetraId(u32::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Identifier of a camera-to-point viewing ray.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RayId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Inside,
    Outside,
}

#[derive(Debug, Clone)]
pub struct Tetra {
    pub vertices: [VertexId; 4],
    pub neighbors: [TetraId; 4],
    /// Visibility weight accumulated by the carving heuristic.
    pub weight: f64,
    /// Rays whose traversal crosses this cell.
    pub ray_refs: IdSet<RayId>,
    pub label: Label,
    pub alive: bool,
}

impl Tetra {
    fn new(vertices: [VertexId; 4]) -> Self {
        Tetra {
            vertices,
            neighbors: [TetraId::NONE; 4],
            weight: 0.0,
            ray_refs: IdSet::default(),
            label: Label::Inside,
            alive: true,
        }
    }

    pub fn infinite_index(&self) -> Option<usize> {
        self.vertices.iter().position(|v| v.is_infinite())
    }

    pub fn is_infinite(&self) -> bool {
        self.infinite_index().is_some()
    }

    pub fn index_of(&self, v: VertexId) -> Option<usize> {
        self.vertices.iter().position(|&x| x == v)
    }

    pub fn neighbor_index(&self, n: TetraId) -> Option<usize> {
        self.neighbors.iter().position(|&x| x == n)
    }

    /// Vertices of the facet opposite `i`, in increasing slot order.
    pub fn facet(&self, i: usize) -> [VertexId; 3] {
        let mut out = [VertexId::INFINITE; 3];
        let mut k = 0;
        for (j, &v) in self.vertices.iter().enumerate() {
            if j != i {
                out[k] = v;
                k += 1;
            }
        }
        out
    }

    pub fn is_outside(&self) -> bool {
        self.label == Label::Outside
    }
}

/// Result of [`Triangulation::insert_point`].
#[derive(Debug, Clone, PartialEq)]
pub enum InsertOutcome {
    Inserted(Insertion),
    /// Within [`DUPLICATE_TOLERANCE`] of this existing vertex; nothing changed.
    Duplicate(VertexId),
    /// Stored, but fewer than four affinely independent points exist yet.
    Deferred(VertexId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Insertion {
    pub vertex: VertexId,
    pub destroyed: Vec<TetraId>,
    pub created: Vec<TetraId>,
}

/// Dry-run result of [`Triangulation::conflict_region`].
#[derive(Debug, Clone, PartialEq)]
pub enum Conflict {
    Region(Vec<TetraId>),
    Duplicate(VertexId),
    /// No cells exist yet.
    NoCells,
}

#[derive(Debug, Clone, Default)]
pub struct Triangulation {
    vertices: Vec<Point3>,
    vertex_cell: Vec<TetraId>,
    tetras: Vec<Tetra>,
    pending: Vec<VertexId>,
    hint: Option<TetraId>,
}

impl Triangulation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, v: VertexId) -> &Point3 {
        &self.vertices[v.index()]
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    /// True once the first tetrahedron exists.
    pub fn has_cells(&self) -> bool {
        !self.tetras.is_empty()
    }

    /// Size of the cell arena, dead cells included.
    pub fn tetra_capacity(&self) -> usize {
        self.tetras.len()
    }

    pub fn tetra(&self, t: TetraId) -> &Tetra {
        &self.tetras[t.index()]
    }

    pub fn tetra_mut(&mut self, t: TetraId) -> &mut Tetra {
        &mut self.tetras[t.index()]
    }

    pub fn is_infinite(&self, t: TetraId) -> bool {
        self.tetras[t.index()].is_infinite()
    }

    pub fn alive_tetras(&self) -> impl Iterator<Item = TetraId> + '_ {
        self.tetras
            .iter()
            .enumerate()
            .filter(|(_, t)| t.alive)
            .map(|(i, _)| TetraId(i as u32))
    }

    pub fn finite_tetras(&self) -> impl Iterator<Item = TetraId> + '_ {
        self.tetras
            .iter()
            .enumerate()
            .filter(|(_, t)| t.alive && !t.is_infinite())
            .map(|(i, _)| TetraId(i as u32))
    }

    pub fn num_finite_tetras(&self) -> usize {
        self.finite_tetras().count()
    }

    /// Corner positions of a finite cell.
    pub fn points(&self, t: TetraId) -> Option<[&Point3; 4]> {
        let c = &self.tetras[t.index()];
        if c.is_infinite() {
            return None;
        }
        Some(c.vertices.map(|v| &self.vertices[v.index()]))
    }

    /// Orientation of cell `t` with vertex slot `slot` replaced by `p`. For an
    /// infinite cell `slot` must be the infinite slot.
    pub fn orient_with(&self, t: TetraId, slot: usize, p: &Point3) -> Sign {
        let c = &self.tetras[t.index()];
        let mut pts = [p; 4];
        for (i, v) in c.vertices.iter().enumerate() {
            if i != slot {
                debug_assert!(!v.is_infinite());
                pts[i] = &self.vertices[v.index()];
            }
        }
        orient3d(pts[0], pts[1], pts[2], pts[3])
    }

    /// Some live cell incident to `v`, if `v` has been triangulated.
    pub fn incident_cell(&self, v: VertexId) -> Option<TetraId> {
        let t = *self.vertex_cell.get(v.index())?;
        (t != TetraId::NONE).then_some(t)
    }

    /// All live cells incident to `v`, infinite ones included.
    pub fn incident_cells(&self, v: VertexId) -> Vec<TetraId> {
        let mut out = Vec::new();
        self.incident_cells_into(v, &mut out);
        out
    }

    pub fn incident_cells_into(&self, v: VertexId, out: &mut Vec<TetraId>) {
        out.clear();
        let Some(start) = self.incident_cell(v) else {
            return;
        };
        out.push(start);
        let mut head = 0;
        while head < out.len() {
            let c = &self.tetras[out[head].index()];
            head += 1;
            for i in 0..4 {
                if c.vertices[i] == v {
                    continue;
                }
                let n = c.neighbors[i];
                if !out.contains(&n) {
                    out.push(n);
                }
            }
        }
    }

    fn any_alive(&self) -> Option<TetraId> {
        if let Some(h) = self.hint {
            if self.tetras[h.index()].alive {
                return Some(h);
            }
        }
        self.alive_tetras().next()
    }

    /// Cell containing `p` (closed), or an infinite cell whose hull facet has
    /// `p` strictly beyond it. `None` before the first cell exists.
    pub fn locate(&self, p: &Point3) -> Option<TetraId> {
        let start = self.any_alive()?;
        Some(self.locate_from(p, start))
    }

    pub fn locate_from(&self, p: &Point3, start: TetraId) -> TetraId {
        let mut cur = start;
        if let Some(k) = self.tetras[cur.index()].infinite_index() {
            cur = self.tetras[cur.index()].neighbors[k];
        }
        let mut prev = TetraId::NONE;
        let limit = 4 * self.tetras.len() + 64;
        for step in 0..limit {
            let c = &self.tetras[cur.index()];
            if c.is_infinite() {
                return cur;
            }
            // deterministic pseudo-random facet order (stochastic walk)
            let r = (cur.0 as usize).wrapping_mul(2654435761).wrapping_add(step) >> 3;
            let mut next = None;
            for k in 0..4 {
                let i = (r + k) % 4;
                let n = c.neighbors[i];
                if n == prev {
                    continue;
                }
                if self.orient_with(cur, i, p) == Sign::Negative {
                    next = Some(n);
                    break;
                }
            }
            match next {
                Some(n) => {
                    prev = cur;
                    cur = n;
                }
                None => return cur,
            }
        }
        self.locate_brute_force(p)
    }

    fn locate_brute_force(&self, p: &Point3) -> TetraId {
        for t in self.finite_tetras() {
            if (0..4).all(|i| self.orient_with(t, i, p) != Sign::Negative) {
                return t;
            }
        }
        for t in self.alive_tetras() {
            let c = &self.tetras[t.index()];
            if let Some(k) = c.infinite_index() {
                if self.orient_with(t, k, p) == Sign::Positive {
                    return t;
                }
            }
        }
        self.any_alive().expect("triangulation has cells")
    }

    fn finite_conflict(&self, t: TetraId, p: &Point3, rank: u64) -> bool {
        let c = &self.tetras[t.index()];
        let cell = c
            .vertices
            .map(|v| (&self.vertices[v.index()], v.0 as u64));
        insphere_perturbed(cell, (p, rank)) == Sign::Positive
    }

    /// Whether `p` (with perturbation rank `rank`) invalidates cell `t`.
    pub fn in_conflict(&self, t: TetraId, p: &Point3, rank: u64) -> bool {
        let c = &self.tetras[t.index()];
        match c.infinite_index() {
            None => self.finite_conflict(t, p, rank),
            Some(k) => match self.orient_with(t, k, p) {
                Sign::Positive => true,
                Sign::Negative => false,
                // on the hull plane: the half-space degenerates to the facet's
                // circumcircle, shared with the finite neighbor's sphere
                Sign::Zero => self.finite_conflict(c.neighbors[k], p, rank),
            },
        }
    }

    /// Cells that inserting `p` would destroy, without modifying anything.
    pub fn conflict_region(&self, p: &Point3) -> Conflict {
        let rank = self.vertices.len() as u64;
        self.conflict_region_ranked(p, rank)
    }

    fn conflict_region_ranked(&self, p: &Point3, rank: u64) -> Conflict {
        let Some(start) = self.locate(p) else {
            return Conflict::NoCells;
        };
        let dup = self.tetras[start.index()].vertices.into_iter().find(|v| {
            !v.is_infinite() && (self.vertices[v.index()] - p).norm() < DUPLICATE_TOLERANCE
        });
        if let Some(v) = dup {
            return Conflict::Duplicate(v);
        }
        let start = if self.in_conflict(start, p, rank) {
            start
        } else {
            // only reachable through inconsistent input; fall back to a scan
            match self
                .alive_tetras()
                .find(|&t| self.in_conflict(t, p, rank))
            {
                Some(t) => t,
                None => return Conflict::Region(Vec::new()),
            }
        };
        let mut region = vec![start];
        let mut seen: IdSet<TetraId> = IdSet::default();
        seen.insert(start);
        let mut head = 0;
        while head < region.len() {
            let c = &self.tetras[region[head].index()];
            head += 1;
            for &n in &c.neighbors {
                if seen.insert(n) && self.in_conflict(n, p, rank) {
                    region.push(n);
                }
            }
        }
        for &t in &region {
            for &v in &self.tetras[t.index()].vertices {
                if !v.is_infinite()
                    && (self.vertices[v.index()] - p).norm() < DUPLICATE_TOLERANCE
                {
                    return Conflict::Duplicate(v);
                }
            }
        }
        Conflict::Region(region)
    }

    /// Inserts `p`, returning destroyed and created cells. Destroyed cells
    /// keep their data (weights, ray references) for the caller to inspect.
    pub fn insert_point(&mut self, p: Point3) -> Result<InsertOutcome> {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite point {p:?}")));
        }
        match self.conflict_region(&p) {
            Conflict::NoCells => self.insert_pending(p),
            Conflict::Duplicate(v) => Ok(InsertOutcome::Duplicate(v)),
            Conflict::Region(region) => {
                if region.is_empty() {
                    return Err(Error::Degenerate(format!(
                        "empty conflict region for {p:?}"
                    )));
                }
                Ok(InsertOutcome::Inserted(self.insert_with_region(p, &region)))
            }
        }
    }

    /// Performs the insertion for a region previously returned by
    /// [`Triangulation::conflict_region`] on the unchanged triangulation.
    pub fn insert_with_region(&mut self, p: Point3, region: &[TetraId]) -> Insertion {
        let v = self.push_vertex(p);
        let created = self.star_region(v, region);
        Insertion {
            vertex: v,
            destroyed: region.to_vec(),
            created,
        }
    }

    fn push_vertex(&mut self, p: Point3) -> VertexId {
        let v = VertexId(self.vertices.len() as u32);
        self.vertices.push(p);
        self.vertex_cell.push(TetraId::NONE);
        v
    }

    fn push_tetra(&mut self, t: Tetra) -> TetraId {
        let id = TetraId(self.tetras.len() as u32);
        self.tetras.push(t);
        id
    }

    fn star_region(&mut self, v: VertexId, region: &[TetraId]) -> Vec<TetraId> {
        let in_region: IdSet<TetraId> = region.iter().copied().collect();
        let mut created = Vec::new();
        let mut open: IdMap<(VertexId, VertexId), (TetraId, usize)> = IdMap::default();
        for &c in region {
            for i in 0..4 {
                let n = self.tetras[c.index()].neighbors[i];
                if in_region.contains(&n) {
                    continue;
                }
                let mut verts = self.tetras[c.index()].vertices;
                verts[i] = v;
                let mut cell = Tetra::new(verts);
                cell.neighbors[i] = n;
                let nc = self.push_tetra(cell);
                let back = self.tetras[n.index()]
                    .neighbor_index(c)
                    .expect("neighbor reciprocity");
                self.tetras[n.index()].neighbors[back] = nc;
                for j in 0..4 {
                    if j == i {
                        continue;
                    }
                    let mut edge = [VertexId::INFINITE; 2];
                    let mut k = 0;
                    for (s, &w) in verts.iter().enumerate() {
                        if s != i && s != j {
                            edge[k] = w;
                            k += 1;
                        }
                    }
                    let key = (edge[0].min(edge[1]), edge[0].max(edge[1]));
                    if let Some((other, oj)) = open.remove(&key) {
                        self.tetras[nc.index()].neighbors[j] = other;
                        self.tetras[other.index()].neighbors[oj] = nc;
                    } else {
                        open.insert(key, (nc, j));
                    }
                }
                created.push(nc);
            }
        }
        debug_assert!(open.is_empty(), "unmatched facets in star");
        for &c in region {
            self.tetras[c.index()].alive = false;
        }
        for &nc in &created {
            for w in self.tetras[nc.index()].vertices {
                if !w.is_infinite() {
                    self.vertex_cell[w.index()] = nc;
                }
            }
        }
        self.hint = created.first().copied();
        created
    }

    fn insert_pending(&mut self, p: Point3) -> Result<InsertOutcome> {
        for &v in &self.pending {
            if (self.vertices[v.index()] - p).norm() < DUPLICATE_TOLERANCE {
                return Ok(InsertOutcome::Duplicate(v));
            }
        }
        let v = self.push_vertex(p);
        self.pending.push(v);
        let Some(simplex) = self.find_simplex() else {
            return Ok(InsertOutcome::Deferred(v));
        };
        self.build_first_cell(simplex);
        let rest: Vec<VertexId> = self
            .pending
            .iter()
            .copied()
            .filter(|w| !simplex.contains(w))
            .collect();
        self.pending.clear();
        for w in rest {
            let q = self.vertices[w.index()];
            match self.conflict_region_ranked(&q, w.0 as u64) {
                Conflict::Region(region) if !region.is_empty() => {
                    self.star_region(w, &region);
                }
                _ => {
                    return Err(Error::Degenerate(format!(
                        "could not triangulate deferred vertex {}",
                        w.0
                    )))
                }
            }
        }
        let created = self.alive_tetras().collect();
        Ok(InsertOutcome::Inserted(Insertion {
            vertex: v,
            destroyed: Vec::new(),
            created,
        }))
    }

    fn find_simplex(&self) -> Option<[VertexId; 4]> {
        let pts = &self.pending;
        if pts.len() < 4 {
            return None;
        }
        let a = pts[0];
        let pa = self.vertices[a.index()];
        let b = *pts.iter().find(|&&w| self.vertices[w.index()] != pa)?;
        let pb = self.vertices[b.index()];
        let c = *pts.iter().find(|&&w| {
            let pc = self.vertices[w.index()];
            !crate::predicates::collinear(&pa, &pb, &pc)
        })?;
        let pc = self.vertices[c.index()];
        let d = *pts
            .iter()
            .find(|&&w| orient3d(&pa, &pb, &pc, &self.vertices[w.index()]) != Sign::Zero)?;
        Some([a, b, c, d])
    }

    fn build_first_cell(&mut self, s: [VertexId; 4]) {
        let p = s.map(|v| self.vertices[v.index()]);
        let finite = if orient3d(&p[0], &p[1], &p[2], &p[3]) == Sign::Positive {
            s
        } else {
            [s[0], s[1], s[3], s[2]]
        };
        let mut cells = vec![self.push_tetra(Tetra::new(finite))];
        for i in 0..4 {
            let mut verts = finite;
            verts[i] = VertexId::INFINITE;
            // beyond facet i the finite orientation is negative; one swap fixes it
            let (j, k) = match i {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            verts.swap(j, k);
            cells.push(self.push_tetra(Tetra::new(verts)));
        }
        let mut open: IdMap<[VertexId; 3], (TetraId, usize)> = IdMap::default();
        for &c in &cells {
            for i in 0..4 {
                let mut key = self.tetras[c.index()].facet(i);
                key.sort();
                if let Some((o, oi)) = open.remove(&key) {
                    self.tetras[c.index()].neighbors[i] = o;
                    self.tetras[o.index()].neighbors[oi] = c;
                } else {
                    open.insert(key, (c, i));
                }
            }
        }
        for v in finite {
            self.vertex_cell[v.index()] = cells[0];
        }
        self.hint = Some(cells[0]);
    }

    /// Checks adjacency reciprocity, facet sharing and orientation of every
    /// live cell.
    pub fn check_structure(&self) -> std::result::Result<(), String> {
        for t in self.alive_tetras() {
            let c = &self.tetras[t.index()];
            for i in 0..4 {
                let n = c.neighbors[i];
                if n == TetraId::NONE || !self.tetras[n.index()].alive {
                    return Err(format!("cell {} has dead neighbor {}", t.0, n.0));
                }
                let nc = &self.tetras[n.index()];
                let Some(j) = nc.neighbor_index(t) else {
                    return Err(format!("cell {} -> {} not reciprocal", t.0, n.0));
                };
                let mut f1 = c.facet(i);
                let mut f2 = nc.facet(j);
                f1.sort();
                f2.sort();
                if f1 != f2 {
                    return Err(format!("cells {} and {} disagree on facet", t.0, n.0));
                }
            }
            match c.infinite_index() {
                None => {
                    let p = self.points(t).unwrap();
                    if orient3d(p[0], p[1], p[2], p[3]) != Sign::Positive {
                        return Err(format!("cell {} is not positively oriented", t.0));
                    }
                }
                Some(k) => {
                    let f = c.neighbors[k];
                    let fc = &self.tetras[f.index()];
                    if fc.is_infinite() {
                        return Err(format!("infinite cell {} faces infinite cell", t.0));
                    }
                    let apex = fc.vertices[fc.neighbor_index(t).unwrap()];
                    if self.orient_with(t, k, &self.vertices[apex.index()]) != Sign::Negative {
                        return Err(format!("infinite cell {} has wrong orientation", t.0));
                    }
                }
            }
        }
        for (i, &t) in self.vertex_cell.iter().enumerate() {
            if t == TetraId::NONE {
                continue;
            }
            let c = &self.tetras[t.index()];
            if !c.alive || c.index_of(VertexId(i as u32)).is_none() {
                return Err(format!("vertex {i} has a stale incident cell"));
            }
        }
        Ok(())
    }

    /// Exhaustive empty-circumsphere check (quadratic; for tests and
    /// debugging).
    pub fn check_delaunay_brute_force(&self) -> std::result::Result<(), String> {
        let triangulated: Vec<VertexId> = (0..self.vertices.len())
            .map(|i| VertexId(i as u32))
            .filter(|&v| self.incident_cell(v).is_some())
            .collect();
        for t in self.finite_tetras() {
            let c = &self.tetras[t.index()];
            for &v in &triangulated {
                if c.index_of(v).is_some() {
                    continue;
                }
                if self.finite_conflict(t, &self.vertices[v.index()], v.0 as u64) {
                    return Err(format!("vertex {} inside circumsphere of cell {}", v.0, t.0));
                }
            }
        }
        Ok(())
    }

    /// Writes the `VERTICES` / `TETRAS` text dump of live cells.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "VERTICES {}", self.vertices.len())?;
        for (i, p) in self.vertices.iter().enumerate() {
            writeln!(w, "{} {} {} {}", i, p.x, p.y, p.z)?;
        }
        let alive: Vec<TetraId> = self.alive_tetras().collect();
        writeln!(w, "TETRAS {}", alive.len())?;
        let vid = |v: VertexId| -> i64 {
            if v.is_infinite() {
                -1
            } else {
                v.0 as i64
            }
        };
        for t in alive {
            let c = &self.tetras[t.index()];
            writeln!(
                w,
                "{} {} {} {} {} {} {} {} {} {} {}",
                t.0,
                vid(c.vertices[0]),
                vid(c.vertices[1]),
                vid(c.vertices[2]),
                vid(c.vertices[3]),
                c.neighbors[0].0,
                c.neighbors[1].0,
                c.neighbors[2].0,
                c.neighbors[3].0,
                c.weight,
                match c.label {
                    Label::Inside => "inside",
                    Label::Outside => "outside",
                }
            )?;
        }
        Ok(())
    }

    pub fn save_dump(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_dump(std::io::BufWriter::new(f))?;
        Ok(())
    }

    /// Rebuilds a triangulation from a dump. Ray references are not part of
    /// the format and come back empty.
    pub fn read_dump<R: BufRead>(r: R, path: &Path) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            loop {
                match lines.next() {
                    Some((i, l)) => {
                        let l = l?;
                        let t = l.trim();
                        if t.is_empty() || t.starts_with('#') {
                            continue;
                        }
                        return Ok((i + 1, t.to_string()));
                    }
                    None => return Err(Error::parse(path, 0, format!("missing {what}"))),
                }
            }
        };
        let header = |line: usize, s: &str, tag: &str| -> Result<usize> {
            let mut it = s.split_whitespace();
            if it.next() != Some(tag) {
                return Err(Error::parse(path, line, format!("expected {tag} header")));
            }
            it.next()
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| Error::parse(path, line, "bad count"))
        };
        let (ln, h) = next("VERTICES header")?;
        let nv = header(ln, &h, "VERTICES")?;
        let mut tri = Triangulation::new();
        for i in 0..nv {
            let (ln, l) = next("vertex")?;
            let f: Vec<f64> = l
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(path, ln, e.to_string()))?;
            if f.len() != 4 || f[0] as usize != i {
                return Err(Error::parse(path, ln, "expected `id x y z` in id order"));
            }
            tri.push_vertex(Point3::new(f[1], f[2], f[3]));
        }
        let (ln, h) = next("TETRAS header")?;
        let nt = header(ln, &h, "TETRAS")?;
        let mut rows = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = next("tetra")?;
            let tok: Vec<&str> = l.split_whitespace().collect();
            if tok.len() != 11 {
                return Err(Error::parse(path, ln, "expected 11 fields per tetra"));
            }
            let bad = |e: String| Error::parse(path, ln, e);
            let id: u32 = tok[0].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
            let mut verts = [VertexId::INFINITE; 4];
            for k in 0..4 {
                let v: i64 = tok[1 + k].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
                verts[k] = if v < 0 {
                    VertexId::INFINITE
                } else if (v as usize) < nv {
                    VertexId(v as u32)
                } else {
                    return Err(bad(format!("vertex {v} out of range")));
                };
            }
            let mut nbrs = [TetraId::NONE; 4];
            for k in 0..4 {
                nbrs[k] = TetraId(tok[5 + k].parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?);
            }
            let weight: f64 = tok[9].parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
            let label = match tok[10] {
                "inside" => Label::Inside,
                "outside" => Label::Outside,
                other => return Err(bad(format!("unknown label {other}"))),
            };
            rows.push((id, verts, nbrs, weight, label));
        }
        let cap = rows.iter().map(|r| r.0 as usize + 1).max().unwrap_or(0);
        let mut dead = Tetra::new([VertexId::INFINITE; 4]);
        dead.alive = false;
        tri.tetras = vec![dead; cap];
        for (id, verts, nbrs, weight, label) in rows {
            let mut c = Tetra::new(verts);
            c.neighbors = nbrs;
            c.weight = weight;
            c.label = label;
            for v in verts {
                if !v.is_infinite() {
                    tri.vertex_cell[v.index()] = TetraId(id);
                }
            }
            tri.tetras[id as usize] = c;
        }
        for c in &tri.tetras {
            if c.alive && c.neighbors.iter().any(|n| n.index() >= cap) {
                return Err(Error::parse(path, 0, "neighbor id out of range"));
            }
        }
        let first = tri.alive_tetras().next();
        tri.hint = first;
        tri.pending = (0..nv)
            .map(|i| VertexId(i as u32))
            .filter(|&v| tri.vertex_cell[v.index()] == TetraId::NONE)
            .collect();
        tri.check_structure()
            .map_err(|e| Error::parse(path, 0, format!("inconsistent dump: {e}")))?;
        Ok(tri)
    }

    pub fn load_dump(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_dump(std::io::BufReader::new(f), path)
    }

    /// Facet-neighbors of a set of cells, excluding the set itself.
    pub fn ring(&self, cells: &[TetraId], exclude: &IdSet<TetraId>) -> Vec<TetraId> {
        let mut out = Vec::new();
        let mut seen = IdSet::default();
        for &c in cells {
            for &n in &self.tetras[c.index()].neighbors {
                if !exclude.contains(&n) && seen.insert(n) {
                    out.push(n);
                }
            }
        }
        out
    }

    /// Breadth-first expansion of `cells` by `depth` facet-adjacency rings.
    pub fn dilate(&self, cells: &[TetraId], depth: usize) -> Vec<TetraId> {
        let mut seen: IdSet<TetraId> = cells.iter().copied().collect();
        let mut out: Vec<TetraId> = cells.to_vec();
        let mut frontier: VecDeque<(TetraId, usize)> = cells.iter().map(|&c| (c, 0)).collect();
        while let Some((c, d)) = frontier.pop_front() {
            if d == depth {
                continue;
            }
            for &n in &self.tetras[c.index()].neighbors {
                if seen.insert(n) {
                    out.push(n);
                    frontier.push_back((n, d + 1));
                }
            }
        }
        out
    }
}
