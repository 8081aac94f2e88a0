//! Edge-Point extraction, tracking and track filtering.
//!
//! Edge-Points are sampled along Canny chains on keyframes, tracked on every
//! frame with pyramidal Lucas-Kanade, and gated per correspondence. Tracks
//! end on tracking loss, on a failed gate, or at the next keyframe, and are
//! handed out in keyframe batches.

pub mod canny;
pub mod image;
pub mod klt;
pub mod tracks;

pub use canny::{canny_edges, downsample_edges, EdgeChain};
pub use image::GrayImage;
pub use klt::{klt_step, Pyramid, TrackStatus, KLT_LEVELS};
pub use tracks::{
    close_tracks, feature_distribution, filter_match, filter_track, Distribution, FrontendParams, MatchVerdict, Track,
    TrackState,
};

use crate::camera::{fundamental_matrix, Camera};
use crate::error::{Error, Result};

/// Per-stage counters; every track is counted once per stage it reaches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrontendStats {
    /// Edge-Points sampled on keyframes.
    pub extracted: usize,
    /// Tracks with at least two measurements.
    pub tracked: usize,
    /// Tracks passing the length gate.
    pub filtered: usize,
    pub lost: usize,
    pub dropped_low_parallax: usize,
    pub dropped_epipolar: usize,
}

/// Tracks finished at one keyframe.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeBatch {
    pub frame: usize,
    pub accepted: Vec<Track>,
    pub rejected: Vec<Track>,
}

pub fn is_keyframe(frame: usize, p: &FrontendParams) -> bool {
    frame.is_multiple_of(p.t_k)
}

/// Stateful per-frame driver.
pub struct EdgePointFrontend {
    params: FrontendParams,
    frame: usize,
    prev: Option<(Pyramid, Camera)>,
    active: Vec<Track>,
    finished: Vec<Track>,
    next_id: u64,
    stats: FrontendStats,
    size: Option<(usize, usize)>,
}

impl EdgePointFrontend {
    pub fn new(params: FrontendParams) -> Result<Self> {
        params.validate()?;
        Ok(EdgePointFrontend {
            params,
            frame: 0,
            prev: None,
            active: Vec::new(),
            finished: Vec::new(),
            next_id: 0,
            stats: FrontendStats::default(),
            size: None,
        })
    }

    pub fn stats(&self) -> &FrontendStats {
        &self.stats
    }

    pub fn frames_processed(&self) -> usize {
        self.frame
    }

    pub fn active_tracks(&self) -> &[Track] {
        &self.active
    }

    fn end(&mut self, mut t: Track, state: TrackState) {
        t.state = state;
        if t.len() >= 2 {
            self.stats.tracked += 1;
        }
        self.finished.push(t);
    }

    fn batch(&mut self, frame: usize) -> KeyframeBatch {
        let done = std::mem::take(&mut self.finished);
        let (accepted, rejected) = close_tracks(done, &self.params);
        self.stats.filtered += accepted.len();
        KeyframeBatch { frame, accepted, rejected }
    }

    /// Consumes the next frame. On keyframes, returns the tracks finished
    /// since the previous keyframe and starts new tracks.
    pub fn process_frame(&mut self, image: &GrayImage, camera: &Camera) -> Result<Option<KeyframeBatch>> {
        let dims = (image.width(), image.height());
        if *self.size.get_or_insert(dims) != dims {
            return Err(Error::InvalidInput(format!(
                "frame {} is {} x {}, expected {} x {}",
                self.frame,
                dims.0,
                dims.1,
                self.size.unwrap().0,
                self.size.unwrap().1
            )));
        }
        let frame = self.frame;
        let pyr = Pyramid::new(image, KLT_LEVELS);
        if let Some((prev_pyr, prev_cam)) = self.prev.take() {
            let f = fundamental_matrix(&prev_cam, camera).ok();
            let pts: Vec<_> = self.active.iter().map(|t| t.last().1).collect();
            let results = klt_step(&prev_pyr, &pyr, &pts);
            let active = std::mem::take(&mut self.active);
            for (mut t, (x_prev, x_cur, status)) in active.into_iter().zip(results) {
                if status == TrackStatus::Lost {
                    self.stats.lost += 1;
                    self.end(t, TrackState::Closed);
                    continue;
                }
                let verdict = match &f {
                    Some(f) => filter_match(&x_prev, &x_cur, f, &self.params),
                    None => MatchVerdict::DropEpipolar,
                };
                match verdict {
                    MatchVerdict::Keep => {
                        t.push(frame, x_cur)?;
                        self.active.push(t);
                    }
                    MatchVerdict::DropLowParallax => {
                        self.stats.dropped_low_parallax += 1;
                        self.end(t, TrackState::Filtered);
                    }
                    MatchVerdict::DropEpipolar => {
                        self.stats.dropped_epipolar += 1;
                        self.end(t, TrackState::Filtered);
                    }
                }
            }
        }
        let mut out = None;
        if is_keyframe(frame, &self.params) {
            for t in std::mem::take(&mut self.active) {
                self.end(t, TrackState::Closed);
            }
            out = Some(self.batch(frame));
            let chains = canny_edges(image, self.params.canny_low, self.params.canny_high);
            for x in downsample_edges(&chains, self.params.t_edges) {
                self.active.push(Track::new(self.next_id, frame, x));
                self.next_id += 1;
                self.stats.extracted += 1;
            }
        }
        self.prev = Some((pyr, *camera));
        self.frame += 1;
        Ok(out)
    }

    /// Closes every remaining track and returns the final batch.
    pub fn finish(&mut self) -> KeyframeBatch {
        for t in std::mem::take(&mut self.active) {
            self.end(t, TrackState::Closed);
        }
        let last = self.frame.saturating_sub(1);
        self.batch(last)
    }
}
