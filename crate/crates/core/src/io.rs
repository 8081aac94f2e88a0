//! Text interchange formats: poses, tracks, points and XYZ clouds.
//!
//! Every format is whitespace separated with one record per line; blank
//! lines and lines starting with `#` are skipped on input.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::camera::Pose;
use crate::error::{Error, Result};
use crate::estimator::EstimatedPoint;
use crate::frontend::{Track, TrackState};
use crate::{Point2, Point3};

fn records<R: BufRead>(r: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    r.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| {
        l.as_ref()
            .map(|s| {
                let t = s.trim();
                !t.is_empty() && !t.starts_with('#')
            })
            .unwrap_or(true)
    })
}

fn fields<T: std::str::FromStr>(line: &str, n: usize, path: &Path, no: usize) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let v: Vec<&str> = line.split_whitespace().collect();
    if v.len() != n {
        return Err(Error::parse(path, no, format!("expected {n} fields, found {}", v.len())));
    }
    v.iter()
        .map(|s| s.parse::<T>().map_err(|e| Error::parse(path, no, format!("{s}: {e}"))))
        .collect()
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    Ok(std::io::BufReader::new(std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?))
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?))
}

/// One pose per line: row-major `[R | t]`, world to camera.
pub fn read_poses<R: BufRead>(r: R, path: &Path) -> Result<Vec<Pose>> {
    let mut out = Vec::new();
    for (no, line) in records(r) {
        let v: Vec<f64> = fields(&line?, 12, path, no)?;
        let arr: [f64; 12] = v.try_into().unwrap();
        out.push(Pose::from_row_major(&arr).map_err(|e| Error::parse(path, no, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_poses<W: Write>(mut w: W, poses: &[Pose]) -> std::io::Result<()> {
    for p in poses {
        let v = p.to_row_major();
        let s: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
        writeln!(w, "{}", s.join(" "))?;
    }
    Ok(())
}

pub fn load_poses(path: &Path) -> Result<Vec<Pose>> {
    read_poses(open(path)?, path)
}

pub fn save_poses(path: &Path, poses: &[Pose]) -> Result<()> {
    let mut w = create(path)?;
    write_poses(&mut w, poses)?;
    w.flush()?;
    Ok(())
}

/// One measurement per line, `track_id frame_index u v`, sorted by track
/// and frame. Tracks read back are Closed.
pub fn read_tracks<R: BufRead>(r: R, path: &Path) -> Result<Vec<Track>> {
    let mut out: Vec<Track> = Vec::new();
    for (no, line) in records(r) {
        let line = line?;
        let v: Vec<&str> = line.split_whitespace().collect();
        if v.len() != 4 {
            return Err(Error::parse(path, no, format!("expected 4 fields, found {}", v.len())));
        }
        let id: u64 = v[0].parse().map_err(|e| Error::parse(path, no, format!("{}: {e}", v[0])))?;
        let frame: usize = v[1].parse().map_err(|e| Error::parse(path, no, format!("{}: {e}", v[1])))?;
        let uv: Vec<f64> = fields(&v[2..].join(" "), 2, path, no)?;
        if !uv.iter().all(|x| x.is_finite()) {
            return Err(Error::parse(path, no, "non-finite measurement"));
        }
        let x = Point2::new(uv[0], uv[1]);
        match out.last_mut() {
            Some(t) if t.id == id => {
                if frame <= t.last().0 {
                    return Err(Error::parse(path, no, "frames of a track must increase"));
                }
                t.measurements.push((frame, x));
            }
            Some(t) if t.id > id => return Err(Error::parse(path, no, "tracks must be sorted by id")),
            _ => {
                let mut t = Track::new(id, frame, x);
                t.state = TrackState::Closed;
                out.push(t);
            }
        }
    }
    Ok(out)
}

pub fn write_tracks<W: Write>(mut w: W, tracks: &[Track]) -> std::io::Result<()> {
    let mut sorted: Vec<&Track> = tracks.iter().collect();
    sorted.sort_by_key(|t| t.id);
    for t in sorted {
        for (f, x) in &t.measurements {
            writeln!(w, "{} {} {:?} {:?}", t.id, f, x.x, x.y)?;
        }
    }
    Ok(())
}

pub fn load_tracks(path: &Path) -> Result<Vec<Track>> {
    read_tracks(open(path)?, path)
}

pub fn save_tracks(path: &Path, tracks: &[Track]) -> Result<()> {
    let mut w = create(path)?;
    write_tracks(&mut w, tracks)?;
    w.flush()?;
    Ok(())
}

/// One accepted point per line,
/// `point_id x y z first_frame last_frame mean_error`.
pub fn write_points<W: Write>(mut w: W, points: &[EstimatedPoint]) -> std::io::Result<()> {
    for p in points {
        writeln!(
            w,
            "{} {:?} {:?} {:?} {} {} {:?}",
            p.id,
            p.position.x,
            p.position.y,
            p.position.z,
            p.first_frame(),
            p.last_frame(),
            p.mean_reproj_error
        )?;
    }
    Ok(())
}

/// Reads a points file; supporting frames are restored as the first and
/// last frame only.
pub fn read_points<R: BufRead>(r: R, path: &Path) -> Result<Vec<EstimatedPoint>> {
    let mut out = Vec::new();
    for (no, line) in records(r) {
        let line = line?;
        let v: Vec<&str> = line.split_whitespace().collect();
        if v.len() != 7 {
            return Err(Error::parse(path, no, format!("expected 7 fields, found {}", v.len())));
        }
        let bad = |s: &str, e: &dyn std::fmt::Display| Error::parse(path, no, format!("{s}: {e}"));
        let id: u64 = v[0].parse().map_err(|e| bad(v[0], &e))?;
        let xyz: Vec<f64> = fields(&v[1..4].join(" "), 3, path, no)?;
        let first: usize = v[4].parse().map_err(|e| bad(v[4], &e))?;
        let last: usize = v[5].parse().map_err(|e| bad(v[5], &e))?;
        let err: f64 = v[6].parse().map_err(|e| bad(v[6], &e))?;
        out.push(EstimatedPoint {
            id,
            position: Point3::new(xyz[0], xyz[1], xyz[2]),
            mean_reproj_error: err,
            supporting_frames: if first == last { vec![first] } else { vec![first, last] },
        });
    }
    Ok(out)
}

pub fn save_points(path: &Path, points: &[EstimatedPoint]) -> Result<()> {
    let mut w = create(path)?;
    write_points(&mut w, points)?;
    w.flush()?;
    Ok(())
}

pub fn load_points(path: &Path) -> Result<Vec<EstimatedPoint>> {
    read_points(open(path)?, path)
}

/// ASCII XYZ: one `x y z` per line.
pub fn read_xyz<R: BufRead>(r: R, path: &Path) -> Result<Vec<Point3>> {
    let mut out = Vec::new();
    for (no, line) in records(r) {
        let v: Vec<f64> = fields(&line?, 3, path, no)?;
        out.push(Point3::new(v[0], v[1], v[2]));
    }
    Ok(out)
}

pub fn write_xyz<W: Write>(mut w: W, cloud: &[Point3]) -> std::io::Result<()> {
    for p in cloud {
        writeln!(w, "{:?} {:?} {:?}", p.x, p.y, p.z)?;
    }
    Ok(())
}

pub fn load_xyz(path: &Path) -> Result<Vec<Point3>> {
    read_xyz(open(path)?, path)
}

pub fn save_xyz(path: &Path, cloud: &[Point3]) -> Result<()> {
    let mut w = create(path)?;
    write_xyz(&mut w, cloud)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracks_keep_order_and_precision() {
        let mut a = Track::new(3, 0, Point2::new(0.1, 1.0 / 3.0));
        a.push(2, Point2::new(5.5, -2.25)).unwrap();
        let b = Track::new(7, 4, Point2::new(1e-17, 640.0));
        let mut buf = Vec::new();
        write_tracks(&mut buf, &[b.clone(), a.clone()]).unwrap();
        let back = read_tracks(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].measurements, a.measurements);
        assert_eq!(back[1].measurements, b.measurements);
        assert!(back.iter().all(|t| t.state == TrackState::Closed));
    }

    #[test]
    fn malformed_tracks_report_the_line() {
        let e = read_tracks("1 0 1 2\n1 0 3 4\n".as_bytes(), Path::new("t.txt")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = read_tracks("# header\n2 0 1 2\n1 1 3 4\n".as_bytes(), Path::new("t.txt")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        assert!(read_tracks("1 0 nan 2\n".as_bytes(), Path::new("t")).is_err());
        assert!(read_tracks("1 0 2\n".as_bytes(), Path::new("t")).is_err());
    }

    #[test]
    fn poses_reject_non_rotations() {
        let good = "1 0 0 0.5 0 1 0 0 0 0 1 2\n";
        let p = read_poses(good.as_bytes(), Path::new("p")).unwrap();
        assert_eq!(p[0].translation().z, 2.0);
        let bad = "2 0 0 0 0 1 0 0 0 0 1 0\n";
        assert!(read_poses(bad.as_bytes(), Path::new("p")).unwrap_err().is_config());
    }

    #[test]
    fn points_and_clouds_parse() {
        let pts = vec![EstimatedPoint {
            id: 4,
            position: Point3::new(1.0, 2.0, 3.5),
            mean_reproj_error: 0.25,
            supporting_frames: vec![5, 6, 10],
        }];
        let mut buf = Vec::new();
        write_points(&mut buf, &pts).unwrap();
        let back = read_points(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back[0].position, pts[0].position);
        assert_eq!((back[0].first_frame(), back[0].last_frame()), (5, 10));
        let cloud = read_xyz("0 0 0\n\n1.5 2 -3\n".as_bytes(), Path::new("c")).unwrap();
        assert_eq!(cloud.len(), 2);
        assert!(read_xyz("1 2\n".as_bytes(), Path::new("c")).is_err());
    }
}
