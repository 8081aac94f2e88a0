//! Pyramidal Lucas-Kanade point tracking.

use rayon::prelude::*;

use super::image::GrayImage;
use crate::Point2;

pub const KLT_LEVELS: usize = 3;
/// Window side in pixels (odd).
pub const KLT_WINDOW: usize = 15;
pub const KLT_MAX_ITERS: usize = 30;
/// Per-level convergence threshold on the update, px.
pub const KLT_EPS: f64 = 0.01;
/// Minimum smaller eigenvalue of the window-averaged gradient matrix.
pub const KLT_MIN_EIGEN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tracked,
    Lost,
}

/// Image pyramid; level 0 is full resolution.
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<GrayImage>,
    grads: Vec<(Vec<f32>, Vec<f32>)>,
}

fn central_gradients(img: &GrayImage) -> (Vec<f32>, Vec<f32>) {
    let (w, h) = (img.width(), img.height());
    let mut gx = vec![0f32; w * h];
    let mut gy = vec![0f32; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            gx[i] = (img.get_clamped(x + 1, y) - img.get_clamped(x - 1, y)) * 0.5;
            gy[i] = (img.get_clamped(x, y + 1) - img.get_clamped(x, y - 1)) * 0.5;
        }
    }
    (gx, gy)
}

fn sample_buf(buf: &[f32], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (ax, ay) = (x - x0 as f64, y - y0 as f64);
    let p = |xx: usize, yy: usize| buf[yy * w + xx] as f64;
    (1.0 - ay) * ((1.0 - ax) * p(x0, y0) + ax * p(x1, y0)) + ay * ((1.0 - ax) * p(x0, y1) + ax * p(x1, y1))
}

impl Pyramid {
    pub fn new(img: &GrayImage, levels: usize) -> Self {
        let mut lv = vec![img.clone()];
        for _ in 1..levels.max(1) {
            let next = lv.last().unwrap().pyr_down();
            lv.push(next);
        }
        let grads = lv.iter().map(central_gradients).collect();
        Pyramid { levels: lv, grads }
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &GrayImage {
        &self.levels[l]
    }
}

/// Tracks one point from `prev` to `cur`; `None` when lost.
pub fn track_point(prev: &Pyramid, cur: &Pyramid, p: &Point2) -> Option<Point2> {
    let base = prev.level(0);
    if !base.contains(p.x, p.y) {
        return None;
    }
    let half = (KLT_WINDOW / 2) as isize;
    let n_levels = prev.num_levels().min(cur.num_levels());
    let mut guess = nalgebra::Vector2::<f64>::zeros();
    let mut converged_at_base = false;
    for l in (0..n_levels).rev() {
        let scale = (1u32 << l) as f64;
        let img0 = prev.level(l);
        let img1 = cur.level(l);
        let (gx, gy) = &prev.grads[l];
        let (w, h) = (img0.width(), img0.height());
        let u = p.coords / scale;
        let mut tmpl = Vec::with_capacity(KLT_WINDOW * KLT_WINDOW);
        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        for dy in -half..=half {
            for dx in -half..=half {
                let (x, y) = (u.x + dx as f64, u.y + dy as f64);
                let ix = sample_buf(gx, w, h, x, y);
                let iy = sample_buf(gy, w, h, x, y);
                gxx += ix * ix;
                gxy += ix * iy;
                gyy += iy * iy;
                tmpl.push((img0.sample(x, y), ix, iy));
            }
        }
        let area = (KLT_WINDOW * KLT_WINDOW) as f64;
        let (a, b, c) = (gxx / area, gxy / area, gyy / area);
        let min_eig = 0.5 * (a + c - ((a - c) * (a - c) + 4.0 * b * b).sqrt());
        if min_eig < KLT_MIN_EIGEN {
            return None;
        }
        let det = gxx * gyy - gxy * gxy;
        let mut d = nalgebra::Vector2::<f64>::zeros();
        let mut converged = false;
        for _ in 0..KLT_MAX_ITERS {
            let v = u + guess + d;
            if !img1.contains(v.x, v.y) {
                return None;
            }
            let (mut bx, mut by) = (0.0, 0.0);
            let mut k = 0;
            for dy in -half..=half {
                for dx in -half..=half {
                    let (i0, ix, iy) = tmpl[k];
                    k += 1;
                    let e = i0 - img1.sample(v.x + dx as f64, v.y + dy as f64);
                    bx += e * ix;
                    by += e * iy;
                }
            }
            let step = nalgebra::Vector2::new((gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det);
            if !step.x.is_finite() || !step.y.is_finite() {
                return None;
            }
            d += step;
            if step.norm() < KLT_EPS {
                converged = true;
                break;
            }
        }
        if l == 0 {
            converged_at_base = converged;
        }
        guess = if l > 0 { (guess + d) * 2.0 } else { guess + d };
    }
    let out = Point2::from(p.coords + guess);
    if !converged_at_base || !base.contains(out.x, out.y) {
        return None;
    }
    Some(out)
}

/// Tracks all points in parallel; output order follows the input.
pub fn klt_step(prev: &Pyramid, cur: &Pyramid, pts: &[Point2]) -> Vec<(Point2, Point2, TrackStatus)> {
    pts.par_iter()
        .map(|p| match track_point(prev, cur, p) {
            Some(q) => (*p, q, TrackStatus::Tracked),
            None => (*p, *p, TrackStatus::Lost),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(x: f64, y: f64) -> f32 {
        let v = 0.5 + 0.2 * (x * 0.31).sin() * (y * 0.23).cos() + 0.15 * ((x + 2.0 * y) * 0.17).sin() + 0.1 * ((x - y) * 0.45).cos();
        v as f32
    }

    #[test]
    fn identity_frame_has_zero_motion() {
        let img = GrayImage::from_fn(96, 80, |x, y| texture(x as f64, y as f64));
        let p = Pyramid::new(&img, KLT_LEVELS);
        let pts: Vec<Point2> = (0..20).map(|i| Point2::new(20.0 + 2.7 * i as f64, 25.0 + 1.3 * i as f64)).collect();
        for (a, b, s) in klt_step(&p, &p, &pts) {
            assert_eq!(s, TrackStatus::Tracked);
            assert!((a - b).norm() < 1e-3);
        }
    }

    #[test]
    fn integer_shift_is_recovered() {
        let (w, h) = (128, 96);
        let prev = GrayImage::from_fn(w, h, |x, y| texture(x as f64, y as f64));
        let cur = GrayImage::from_fn(w, h, |x, y| prev.get((x + w - 3) % w, y));
        let (pp, pc) = (Pyramid::new(&prev, KLT_LEVELS), Pyramid::new(&cur, KLT_LEVELS));
        let pts: Vec<Point2> = (0..30).map(|i| Point2::new(30.0 + 2.1 * i as f64, 30.0 + (i % 7) as f64 * 5.0)).collect();
        for (a, b, s) in klt_step(&pp, &pc, &pts) {
            assert_eq!(s, TrackStatus::Tracked);
            assert!(((b - a) - nalgebra::Vector2::new(3.0, 0.0)).norm() < 0.1, "{a} -> {b}");
        }
    }

    #[test]
    fn subpixel_translation_is_recovered() {
        let (dx, dy) = (1.6, -2.3);
        let prev = GrayImage::from_fn(120, 100, |x, y| texture(x as f64, y as f64));
        let cur = GrayImage::from_fn(120, 100, |x, y| texture(x as f64 - dx, y as f64 - dy));
        let (pp, pc) = (Pyramid::new(&prev, KLT_LEVELS), Pyramid::new(&cur, KLT_LEVELS));
        let q = track_point(&pp, &pc, &Point2::new(60.0, 50.0)).unwrap();
        assert!((q - Point2::new(61.6, 47.7)).norm() < 0.05, "{q}");
    }

    #[test]
    fn flat_regions_and_exits_are_lost() {
        let flat = Pyramid::new(&GrayImage::filled(64, 64, 0.4), KLT_LEVELS);
        assert!(track_point(&flat, &flat, &Point2::new(32.0, 32.0)).is_none());
        let img = GrayImage::from_fn(64, 64, |x, y| texture(x as f64, y as f64));
        let p = Pyramid::new(&img, KLT_LEVELS);
        assert!(track_point(&p, &p, &Point2::new(-3.0, 10.0)).is_none());
    }
}
