//! Canny edge detection, chain linking and edge downsampling.

use super::image::GrayImage;
use crate::Point2;

/// Gaussian pre-smoothing scale in pixels.
pub const CANNY_SIGMA: f64 = 1.4;

/// An ordered, 8-connected run of edge pixels `(x, y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeChain {
    pub pixels: Vec<(u32, u32)>,
}

impl EdgeChain {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Sobel gradients divided by 8, so a unit ramp has unit gradient.
pub fn sobel(img: &GrayImage) -> (Vec<f32>, Vec<f32>) {
    let (w, h) = (img.width(), img.height());
    let mut gx = vec![0f32; w * h];
    let mut gy = vec![0f32; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| img.get_clamped(x + dx, y + dy);
            let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            let i = y as usize * w + x as usize;
            gx[i] = sx / 8.0;
            gy[i] = sy / 8.0;
        }
    }
    (gx, gy)
}

/// Edge pixel mask after smoothing, non-maximum suppression and hysteresis.
pub fn canny_mask(img: &GrayImage, low: f64, high: f64) -> Vec<bool> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return vec![false; w * h];
    }
    let smooth = img.gaussian_blur(CANNY_SIGMA);
    let (gx, gy) = sobel(&smooth);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| (*a as f64).hypot(*b as f64)).collect();
    // 0: horizontal gradient, 1: 45 deg, 2: vertical, 3: 135 deg (y down)
    const OFFSETS: [(isize, isize); 4] = [(1, 0), (1, 1), (0, 1), (-1, 1)];
    let mut nms = vec![0f64; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let m = mag[i];
            if m < low {
                continue;
            }
            let mut a = (gy[i] as f64).atan2(gx[i] as f64);
            if a < 0.0 {
                a += std::f64::consts::PI;
            }
            let bin = ((a / std::f64::consts::FRAC_PI_4).round() as usize) % 4;
            let (dx, dy) = OFFSETS[bin];
            let fwd = mag[(y as isize + dy) as usize * w + (x as isize + dx) as usize];
            let back = mag[(y as isize - dy) as usize * w + (x as isize - dx) as usize];
            // strict on one side so a two-pixel plateau keeps exactly one pixel
            if m > back && m >= fwd {
                nms[i] = m;
            }
        }
    }
    let mut edge = vec![false; w * h];
    let mut stack: Vec<usize> = Vec::new();
    for i in 0..w * h {
        if nms[i] >= high && !edge[i] {
            edge[i] = true;
            stack.push(i);
            while let Some(j) = stack.pop() {
                let (x, y) = ((j % w) as isize, (j / w) as isize);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let k = ny as usize * w + nx as usize;
                        if !edge[k] && nms[k] >= low {
                            edge[k] = true;
                            stack.push(k);
                        }
                    }
                }
            }
        }
    }
    edge
}

/// Links edge pixels into chains. Two pixels are linked when 4-adjacent,
/// or diagonally adjacent without a common 4-adjacent edge pixel. Pixels
/// with more than two links are junctions; chains stop before them.
pub fn link_chains(mask: &[bool], w: usize, h: usize) -> Vec<EdgeChain> {
    let at = |x: isize, y: isize| x >= 0 && y >= 0 && x < w as isize && y < h as isize && mask[y as usize * w + x as usize];
    let links = |i: usize| -> Vec<usize> {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        let mut out = Vec::with_capacity(8);
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                if (dx, dy) == (0, 0) || !at(x + dx, y + dy) {
                    continue;
                }
                if dx != 0 && dy != 0 && (at(x + dx, y) || at(x, y + dy)) {
                    continue;
                }
                out.push((y + dy) as usize * w + (x + dx) as usize);
            }
        }
        out
    };
    let n = w * h;
    let mut degree = vec![0u8; n];
    for i in 0..n {
        if mask[i] {
            degree[i] = links(i).len() as u8;
        }
    }
    let usable = |i: usize| mask[i] && degree[i] <= 2;
    let next_in_chain = |i: usize, visited: &[bool]| links(i).into_iter().find(|&j| usable(j) && !visited[j]);
    let mut visited = vec![false; n];
    let mut chains = Vec::new();
    let mut trace = |start: usize, visited: &mut Vec<bool>| {
        let mut pixels = Vec::new();
        let mut cur = Some(start);
        while let Some(i) = cur {
            visited[i] = true;
            pixels.push(((i % w) as u32, (i / w) as u32));
            cur = next_in_chain(i, visited);
        }
        if pixels.len() >= 2 {
            chains.push(EdgeChain { pixels });
        }
    };
    // open chains from their endpoints first, then closed loops
    for i in 0..n {
        if usable(i) && !visited[i] && links(i).into_iter().filter(|&j| usable(j)).count() <= 1 {
            trace(i, &mut visited);
        }
    }
    for i in 0..n {
        if usable(i) && !visited[i] {
            trace(i, &mut visited);
        }
    }
    chains
}

pub fn canny_edges(img: &GrayImage, low: f64, high: f64) -> Vec<EdgeChain> {
    let mask = canny_mask(img, low, high);
    link_chains(&mask, img.width(), img.height())
}

/// Every `step`-th pixel of each chain, starting with the first.
pub fn downsample_edges(chains: &[EdgeChain], step: usize) -> Vec<Point2> {
    let step = step.max(1);
    chains
        .iter()
        .flat_map(|c| c.pixels.iter().step_by(step))
        .map(|&(x, y)| Point2::new(x as f64, y as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_chain_connected(c: &EdgeChain) {
        assert!(c.len() >= 2);
        for p in c.pixels.windows(2) {
            let dx = (p[0].0 as i64 - p[1].0 as i64).abs();
            let dy = (p[0].1 as i64 - p[1].1 as i64).abs();
            assert!(dx <= 1 && dy <= 1 && dx + dy > 0, "{:?}", p);
        }
    }

    #[test]
    fn constant_image_has_no_edges() {
        assert!(canny_edges(&GrayImage::filled(32, 32, 0.5), 0.04, 0.10).is_empty());
    }

    #[test]
    fn vertical_step_gives_one_full_height_chain() {
        let (w, h, col) = (40, 30, 20);
        let img = GrayImage::from_fn(w, h, |x, _| if x < col { 0.1 } else { 0.9 });
        let chains = canny_edges(&img, 0.04, 0.10);
        assert_eq!(chains.len(), 1);
        let c = &chains[0];
        assert_chain_connected(c);
        assert!(c.len() >= h - 2, "chain of {} pixels", c.len());
        for &(x, _) in &c.pixels {
            assert!((x as f64 - (col as f64 - 0.5)).abs() <= 1.0);
        }
    }

    #[test]
    fn rectangle_outline_chains_stay_on_the_border() {
        let img = GrayImage::from_fn(60, 50, |x, y| if (15..45).contains(&x) && (10..40).contains(&y) { 0.8 } else { 0.2 });
        let chains = canny_edges(&img, 0.04, 0.10);
        assert!(!chains.is_empty());
        let total: usize = chains.iter().map(EdgeChain::len).sum();
        assert!(total >= 100, "{total} edge pixels");
        for c in &chains {
            assert_chain_connected(c);
            for &(x, y) in &c.pixels {
                let (x, y) = (x as f64, y as f64);
                let dx = (x - 14.5).abs().min((x - 44.5).abs());
                let dy = (y - 9.5).abs().min((y - 39.5).abs());
                let inside_x = (13.0..=46.0).contains(&x);
                let inside_y = (8.0..=41.0).contains(&y);
                assert!((dx <= 2.0 && inside_y) || (dy <= 2.0 && inside_x), "({x}, {y})");
            }
        }
    }

    #[test]
    fn junctions_split_chains() {
        // a plus sign: the center pixel has four links
        let (w, h) = (9, 9);
        let mut mask = vec![false; w * h];
        for k in 1..8 {
            mask[4 * w + k] = true;
            mask[k * w + 4] = true;
        }
        let chains = link_chains(&mask, w, h);
        assert_eq!(chains.len(), 4);
        assert!(chains.iter().all(|c| c.len() == 3 && !c.pixels.contains(&(4, 4))));
    }

    #[test]
    fn staircases_are_single_chains() {
        let (w, h) = (10, 10);
        let mut mask = vec![false; w * h];
        for k in 0..8 {
            mask[k * w + k] = true;
            mask[k * w + k + 1] = true;
        }
        let chains = link_chains(&mask, w, h);
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].len(), 16);
        assert_chain_connected(&chains[0]);
    }

    #[test]
    fn downsampling_counts() {
        let chain = EdgeChain { pixels: (0..40).map(|i| (i, 0)).collect() };
        assert_eq!(downsample_edges(std::slice::from_ref(&chain), 10).len(), 4);
        assert_eq!(downsample_edges(std::slice::from_ref(&chain), 1).len(), 40);
        let short = EdgeChain { pixels: vec![(5, 5), (6, 5)] };
        assert_eq!(downsample_edges(&[short], 10), vec![Point2::new(5.0, 5.0)]);
    }
}
