//! Edge-Point tracks and the per-correspondence filters.

use nalgebra::Matrix3;

use crate::camera::{epipolar_distance, fundamental_matrix, Camera};
use crate::error::{Error, Result};
use crate::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Active,
    /// Ended by a failed filter; never extended again.
    Filtered,
    /// Ended by tracking loss or the keyframe boundary.
    Closed,
}

/// One Edge-Point's measurements, by strictly increasing frame index.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub measurements: Vec<(usize, Point2)>,
    pub state: TrackState,
}

impl Track {
    pub fn new(id: u64, frame: usize, x: Point2) -> Self {
        Track {
            id,
            measurements: vec![(frame, x)],
            state: TrackState::Active,
        }
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn first(&self) -> (usize, Point2) {
        self.measurements[0]
    }

    pub fn last(&self) -> (usize, Point2) {
        *self.measurements.last().unwrap()
    }

    pub fn push(&mut self, frame: usize, x: Point2) -> Result<()> {
        if self.state != TrackState::Active {
            return Err(Error::InvalidInput(format!("track {} is no longer active", self.id)));
        }
        if let Some(&(last, _)) = self.measurements.last() {
            if frame <= last {
                return Err(Error::InvalidInput(format!(
                    "track {}: frame {frame} does not follow {last}",
                    self.id
                )));
            }
        }
        self.measurements.push((frame, x));
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontendParams {
    /// Keyframe period in frames.
    pub t_k: usize,
    /// Edge downsampling step in pixels.
    pub t_edges: usize,
    pub canny_low: f64,
    pub canny_high: f64,
    /// Minimum displacement between consecutive measurements, px.
    pub d_min: f64,
    /// Epipolar tolerance, px.
    pub eps_e: f64,
    /// Minimum number of measurements of an accepted track.
    pub l_min: usize,
}

impl Default for FrontendParams {
    fn default() -> Self {
        FrontendParams {
            t_k: 5,
            t_edges: 10,
            canny_low: 0.04,
            canny_high: 0.10,
            d_min: 5.0,
            eps_e: 20.0,
            l_min: 5,
        }
    }
}

impl FrontendParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.t_k < 1 {
            return bad("t_k must be at least 1".into());
        }
        if self.t_edges < 1 {
            return bad("t_edges must be at least 1".into());
        }
        if !(self.canny_low > 0.0 && self.canny_low < self.canny_high) {
            return bad(format!(
                "canny thresholds need 0 < low < high (got {} and {})",
                self.canny_low, self.canny_high
            ));
        }
        if !(self.d_min >= 0.0 && self.eps_e > 0.0) {
            return bad("d_min must be >= 0 and eps_e > 0".into());
        }
        if self.l_min < 2 {
            return bad("l_min must be at least 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchVerdict {
    Keep,
    DropLowParallax,
    DropEpipolar,
}

/// Displacement gate, then epipolar gate: a correspondence farther than
/// `eps_e` from the epipolar line of `x_prev` is dropped.
pub fn filter_match(x_prev: &Point2, x_cur: &Point2, f: &Matrix3<f64>, p: &FrontendParams) -> MatchVerdict {
    if (x_cur - x_prev).norm() < p.d_min {
        return MatchVerdict::DropLowParallax;
    }
    match epipolar_distance(f, x_prev, x_cur) {
        Ok(d) if d <= p.eps_e => MatchVerdict::Keep,
        _ => MatchVerdict::DropEpipolar,
    }
}

/// Replays the per-correspondence gates along a raw track. The result keeps
/// the measurements before the first failing correspondence; a failure
/// marks it Filtered and reports the verdict, otherwise the state is kept.
pub fn filter_track(raw: &Track, cameras: &[Camera], p: &FrontendParams) -> Result<(Track, Option<MatchVerdict>)> {
    let mut out = Track {
        id: raw.id,
        measurements: Vec::with_capacity(raw.len()),
        state: raw.state,
    };
    let camera = |i: usize| {
        cameras
            .get(i)
            .ok_or_else(|| Error::InvalidInput(format!("track {} refers to missing frame {i}", raw.id)))
    };
    for (k, &(frame, x)) in raw.measurements.iter().enumerate() {
        if k > 0 {
            let (pf, px) = raw.measurements[k - 1];
            let verdict = match fundamental_matrix(camera(pf)?, camera(frame)?) {
                Ok(f) => filter_match(&px, &x, &f, p),
                Err(_) => MatchVerdict::DropEpipolar,
            };
            if verdict != MatchVerdict::Keep {
                out.state = TrackState::Filtered;
                return Ok((out, Some(verdict)));
            }
        }
        out.measurements.push((frame, x));
    }
    Ok((out, None))
}

/// Splits finished tracks by the minimum-length gate.
pub fn close_tracks(tracks: Vec<Track>, p: &FrontendParams) -> (Vec<Track>, Vec<Track>) {
    tracks.into_iter().partition(|t| t.len() >= p.l_min)
}

/// Share of points per cell of a 3 x 5 image grid, in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub cells: [[f64; 5]; 3],
    pub empty: bool,
}

pub fn feature_distribution(points: &[Point2], w: f64, h: f64) -> Result<Distribution> {
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::InvalidInput(format!("image size must be positive ({w} x {h})")));
    }
    let mut counts = [[0usize; 5]; 3];
    for q in points {
        let col = ((q.x / w * 5.0).floor().max(0.0) as usize).min(4);
        let row = ((q.y / h * 3.0).floor().max(0.0) as usize).min(2);
        counts[row][col] += 1;
    }
    let n = points.len();
    let mut cells = [[0.0; 5]; 3];
    if n > 0 {
        for r in 0..3 {
            for c in 0..5 {
                cells[r][c] = 100.0 * counts[r][c] as f64 / n as f64;
            }
        }
    }
    Ok(Distribution { cells, empty: n == 0 })
}
