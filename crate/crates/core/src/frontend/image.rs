//! Grayscale images with intensities in [0, 1] and binary PGM I/O.
//!
//! Pixel (0, 0) is the center of the top-left pixel; coordinates are
//! continuous with x to the right and y down.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width * height != data.len() {
            return Err(Error::InvalidInput(format!(
                "{width} x {height} image needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("intensity {v} outside [0, 1]")));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value.clamp(0.0, 1.0); width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        GrayImage { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Pixel with coordinates clamped to the image border.
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    /// Bilinear interpolation, clamped at the border.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let (ax, ay) = (x - x0, y - y0);
        let (xi, yi) = (x0 as isize, y0 as isize);
        let p = |dx, dy| self.get_clamped(xi + dx, yi + dy) as f64;
        (1.0 - ay) * ((1.0 - ax) * p(0, 0) + ax * p(1, 0)) + ay * ((1.0 - ax) * p(0, 1) + ax * p(1, 1))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64
    }

    /// Separable Gaussian blur with a kernel radius of ceil(3 sigma).
    pub fn gaussian_blur(&self, sigma: f64) -> GrayImage {
        let r = (3.0 * sigma).ceil().max(1.0) as isize;
        let mut k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
        let s: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= s);
        let (w, h) = (self.width as isize, self.height as isize);
        let mut tmp = vec![0f32; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, kv) in k.iter().enumerate() {
                    acc += kv * self.get_clamped(x + j as isize - r, y) as f64;
                }
                tmp[(y * w + x) as usize] = acc as f32;
            }
        }
        let tmp = GrayImage {
            width: self.width,
            height: self.height,
            data: tmp,
        };
        let mut out = vec![0f32; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, kv) in k.iter().enumerate() {
                    acc += kv * tmp.get_clamped(x, y + j as isize - r) as f64;
                }
                out[(y * w + x) as usize] = (acc as f32).clamp(0.0, 1.0);
            }
        }
        GrayImage {
            width: self.width,
            height: self.height,
            data: out,
        }
    }

    /// Half-resolution image from a [1 4 6 4 1]/16 smoothed copy.
    pub fn pyr_down(&self) -> GrayImage {
        const K: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
        let w = self.width.div_ceil(2).max(1);
        let h = self.height.div_ceil(2).max(1);
        GrayImage::from_fn(w, h, |x, y| {
            let (cx, cy) = (2 * x as isize, 2 * y as isize);
            let mut acc = 0.0;
            for (j, ky) in K.iter().enumerate() {
                for (i, kx) in K.iter().enumerate() {
                    acc += kx * ky * self.get_clamped(cx + i as isize - 2, cy + j as isize - 2) as f64;
                }
            }
            (acc / 256.0) as f32
        })
    }

    /// Writes binary PGM (P5) with maxval 255.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.data.iter().map(|v| (v * 255.0).round() as u8).collect();
        w.write_all(&bytes)
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_pgm(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads binary PGM (P5) with maxval up to 65535; header comments are
    /// skipped.
    pub fn read_pgm<R: BufRead>(mut r: R, path: &Path) -> Result<Self> {
        let mut fields = Vec::with_capacity(4);
        let mut token = Vec::new();
        while fields.len() < 4 {
            let mut b = [0u8];
            if r.read(&mut b)? == 0 {
                return Err(Error::parse(path, 1, "truncated PGM header"));
            }
            match b[0] {
                b'#' if token.is_empty() => {
                    let mut skip = Vec::new();
                    r.read_until(b'\n', &mut skip)?;
                }
                c if c.is_ascii_whitespace() => {
                    if !token.is_empty() {
                        fields.push(String::from_utf8_lossy(&token).into_owned());
                        token.clear();
                    }
                }
                c => token.push(c),
            }
        }
        if fields[0] != "P5" {
            return Err(Error::parse(path, 1, format!("expected P5, found {}", fields[0])));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(path, 1, format!("{s}: {e}")));
        let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
            return Err(Error::parse(path, 1, "invalid PGM dimensions or maxval"));
        }
        let bpp = if maxval < 256 { 1 } else { 2 };
        let mut raw = vec![0u8; w * h * bpp];
        r.read_exact(&mut raw)
            .map_err(|_| Error::parse(path, 1, "truncated PGM pixel data"))?;
        let data = if bpp == 1 {
            raw.iter().map(|&v| (v as f32 / maxval as f32).min(1.0)).collect()
        } else {
            raw.chunks_exact(2)
                .map(|c| (u16::from_be_bytes([c[0], c[1]]) as f32 / maxval as f32).min(1.0))
                .collect()
        };
        Ok(GrayImage { width: w, height: h, data })
    }

    pub fn load_pgm(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_pgm(std::io::BufReader::new(f), path)
    }
}
