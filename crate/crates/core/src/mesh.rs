//! Triangle surface meshes and ASCII PLY I/O.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Point3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SurfaceMesh {
    pub vertices: Vec<Point3>,
    /// Counter-clockwise seen from the side the normal points to.
    pub triangles: Vec<[u32; 3]>,
}

impl SurfaceMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [Point3; 3] {
        self.triangles[i].map(|k| self.vertices[k as usize])
    }

    pub fn normal(&self, i: usize) -> nalgebra::Vector3<f64> {
        let [a, b, c] = self.triangle(i);
        (b - a).cross(&(c - a))
    }

    /// Undirected edges with the number of incident triangles.
    pub fn edge_valence(&self) -> HashMap<(u32, u32), usize> {
        let mut m = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    /// V - E + F over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &k in t {
                used[k as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_valence().len() as i64 + self.triangles.len() as i64
    }

    /// Closed 2-manifold check: every edge has two triangles with opposite
    /// directions, and the triangles around each vertex form one fan.
    pub fn check_closed_manifold(&self) -> std::result::Result<(), String> {
        let mut directed: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        for (&(a, b), &n) in &directed {
            if n != 1 || directed.get(&(b, a)) != Some(&1) {
                return Err(format!("edge ({a}, {b}) is not shared by exactly two consistently oriented triangles"));
            }
        }
        // vertex fans: the opposite edges around a vertex form a single cycle
        let mut next: HashMap<u32, HashMap<u32, u32>> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (v, a, b) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
                next.entry(v).or_default().insert(a, b);
            }
        }
        for (v, ring) in &next {
            let start = *ring.keys().next().unwrap();
            let mut cur = start;
            let mut steps = 0;
            loop {
                cur = match ring.get(&cur) {
                    Some(&n) => n,
                    None => return Err(format!("vertex {v} has an open fan")),
                };
                steps += 1;
                if cur == start {
                    break;
                }
                if steps > ring.len() {
                    return Err(format!("vertex {v} has a broken fan"));
                }
            }
            if steps != ring.len() {
                return Err(format!("vertex {v} is not regular ({} fans)", ring.len() - steps + 1));
            }
        }
        Ok(())
    }

    pub fn write_ply<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        writeln!(w, "element vertex {}", self.vertices.len())?;
        writeln!(w, "property double x")?;
        writeln!(w, "property double y")?;
        writeln!(w, "property double z")?;
        writeln!(w, "element face {}", self.triangles.len())?;
        writeln!(w, "property list uchar int vertex_indices")?;
        writeln!(w, "end_header")?;
        for p in &self.vertices {
            writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
        }
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn save_ply(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_ply(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads ASCII PLY with x/y/z vertex properties (extra vertex
    /// properties are ignored) and polygon faces, fan-triangulated.
    pub fn read_ply<R: BufRead>(r: R, path: &Path) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut nv = None;
        let mut nf = None;
        let mut props: Vec<String> = Vec::new();
        let mut in_vertex = false;
        let mut first = true;
        loop {
            let Some((i, line)) = lines.next() else {
                return Err(Error::parse(path, 0, "missing end_header"));
            };
            let line = line?;
            let tok: Vec<&str> = line.split_whitespace().collect();
            if first {
                if tok != ["ply"] {
                    return Err(Error::parse(path, i + 1, "not a PLY file"));
                }
                first = false;
                continue;
            }
            match tok.as_slice() {
                ["format", fmt, _] if *fmt != "ascii" => {
                    return Err(Error::parse(path, i + 1, "only ASCII PLY is supported"));
                }
                ["element", "vertex", n] => {
                    nv = Some(n.parse::<usize>().map_err(|e| Error::parse(path, i + 1, e.to_string()))?);
                    in_vertex = true;
                }
                ["element", "face", n] => {
                    nf = Some(n.parse::<usize>().map_err(|e| Error::parse(path, i + 1, e.to_string()))?);
                    in_vertex = false;
                }
                ["element", ..] => in_vertex = false,
                ["property", _, name] if in_vertex => props.push(name.to_string()),
                ["end_header"] => break,
                _ => {}
            }
        }
        let nv = nv.ok_or_else(|| Error::parse(path, 0, "no vertex element"))?;
        let nf = nf.unwrap_or(0);
        let pos = |n: &str| props.iter().position(|p| p == n);
        let (ix, iy, iz) = match (pos("x"), pos("y"), pos("z")) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(Error::parse(path, 0, "vertex element lacks x/y/z")),
        };
        let mut mesh = SurfaceMesh::default();
        for _ in 0..nv {
            let (i, line) = lines.next().ok_or_else(|| Error::parse(path, 0, "truncated vertices"))?;
            let line = line?;
            let f: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e: std::num::ParseFloatError| Error::parse(path, i + 1, e.to_string()))?;
            if f.len() < props.len() {
                return Err(Error::parse(path, i + 1, "too few vertex fields"));
            }
            mesh.vertices.push(Point3::new(f[ix], f[iy], f[iz]));
        }
        for _ in 0..nf {
            let (i, line) = lines.next().ok_or_else(|| Error::parse(path, 0, "truncated faces"))?;
            let line = line?;
            let f: Vec<u32> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e: std::num::ParseIntError| Error::parse(path, i + 1, e.to_string()))?;
            let n = *f.first().ok_or_else(|| Error::parse(path, i + 1, "empty face"))? as usize;
            if n < 3 || f.len() < n + 1 || f[1..=n].iter().any(|&k| k as usize >= nv) {
                return Err(Error::parse(path, i + 1, "bad face"));
            }
            for k in 2..n {
                mesh.triangles.push([f[1], f[k], f[k + 1]]);
            }
        }
        Ok(mesh)
    }

    pub fn load_ply(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_ply(std::io::BufReader::new(f), path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra_mesh() -> SurfaceMesh {
        SurfaceMesh {
            vertices: vec![
                Point3::new(0., 0., 0.),
                Point3::new(1., 0., 0.),
                Point3::new(0., 1., 0.),
                Point3::new(0., 0., 1.),
            ],
            triangles: vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        }
    }

    #[test]
    fn tetra_is_closed_sphere() {
        let m = tetra_mesh();
        m.check_closed_manifold().unwrap();
        assert_eq!(m.euler_characteristic(), 2);
        // outward normals
        let c = Point3::new(0.25, 0.25, 0.25);
        for i in 0..4 {
            let a = m.triangle(i)[0];
            assert!(m.normal(i).dot(&(a - c)) > 0.0);
        }
    }

    #[test]
    fn open_and_pinched_meshes_are_rejected() {
        let mut m = tetra_mesh();
        m.triangles.pop();
        assert!(m.check_closed_manifold().is_err());
        // two tetra sharing one vertex
        let mut h = tetra_mesh();
        let off = h.vertices.len() as u32;
        for p in [Point3::new(-1., 0., 0.), Point3::new(0., -1., 0.), Point3::new(0., 0., -1.)] {
            h.vertices.push(p);
        }
        h.triangles.extend([[0, off, off + 1], [0, off + 2, off], [0, off + 1, off + 2], [off, off + 2, off + 1]]);
        assert!(h.check_closed_manifold().is_err());
    }

    #[test]
    fn ply_roundtrip() {
        let m = tetra_mesh();
        let mut buf = Vec::new();
        m.write_ply(&mut buf).unwrap();
        let back = SurfaceMesh::read_ply(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn ply_quads_are_fanned_and_bad_headers_fail() {
        let src = "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nproperty float s\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0 9\n1 0 0 9\n1 1 0 9\n0 1 0 9\n4 0 1 2 3\n";
        let m = SurfaceMesh::read_ply(src.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(SurfaceMesh::read_ply("off\n".as_bytes(), Path::new("mem")).is_err());
        let bin = "ply\nformat binary_little_endian 1.0\nend_header\n";
        assert!(SurfaceMesh::read_ply(bin.as_bytes(), Path::new("mem")).is_err());
    }
}
