//! RGB float rasters and binary masks.

use crate::{Error, Result};

pub const CHANNELS: usize = 3;

/// Row-major RGB image with samples nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * CHANNELS {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} RGB raster needs {} samples, got {}",
                width,
                height,
                width * height * CHANNELS,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
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

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * CHANNELS;
        self.data[i..i + CHANNELS].copy_from_slice(&rgb);
    }

    pub fn same_size(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Bilinear sample at continuous pixel coordinates (centres at +0.5)
    /// with edge clamping on both axes.
    pub fn sample_clamped(&self, px: f64, py: f64) -> [f32; 3] {
        let (x0, x1, fx) = clamp_taps(px - 0.5, self.width);
        let (y0, y1, fy) = clamp_taps(py - 0.5, self.height);
        self.bilinear(x0, x1, fx, y0, y1, fy)
    }

    /// Bilinear sample that wraps horizontally and clamps vertically.
    pub fn sample_wrapped(&self, px: f64, py: f64) -> [f32; 3] {
        let x = px - 0.5;
        let xf = x.floor();
        let fx = (x - xf) as f32;
        let w = self.width as i64;
        let x0 = (xf as i64).rem_euclid(w) as usize;
        let x1 = (x0 + 1) % self.width;
        let (y0, y1, fy) = clamp_taps(py - 0.5, self.height);
        self.bilinear(x0, x1, fx, y0, y1, fy)
    }

    // Interpolation is written as `a + f * (b - a)` so constant regions are
    // reproduced exactly.
    #[inline]
    fn bilinear(&self, x0: usize, x1: usize, fx: f32, y0: usize, y1: usize, fy: f32) -> [f32; 3] {
        let p00 = self.get(x0, y0);
        let p10 = self.get(x1, y0);
        let p01 = self.get(x0, y1);
        let p11 = self.get(x1, y1);
        let mut out = [0.0; 3];
        for c in 0..CHANNELS {
            let top = p00[c] + fx * (p10[c] - p00[c]);
            let bottom = p01[c] + fx * (p11[c] - p01[c]);
            out[c] = top + fy * (bottom - top);
        }
        out
    }

    /// Box-filter downsample by an integer factor on both axes.
    pub fn downsample_area(&self, factor: usize) -> Result<Raster> {
        if factor == 0 || self.width % factor != 0 || self.height % factor != 0 {
            return Err(Error::DimensionMismatch(format!(
                "cannot area-downsample {}x{} by {}",
                self.width, self.height, factor
            )));
        }
        let (w, h) = (self.width / factor, self.height / factor);
        let norm = 1.0 / (factor * factor) as f64;
        let mut out = Raster::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0f64; 3];
                for sy in 0..factor {
                    for sx in 0..factor {
                        let p = self.get(x * factor + sx, y * factor + sy);
                        for c in 0..CHANNELS {
                            acc[c] += p[c] as f64;
                        }
                    }
                }
                out.set(x, y, acc.map(|a| (a * norm) as f32));
            }
        }
        Ok(out)
    }

    /// Copy of the `w`×`h` block with top-left corner `(x, y)`, flattened
    /// row-major with interleaved channels.
    pub fn block(&self, x: usize, y: usize, w: usize, h: usize, out: &mut Vec<f32>) {
        out.clear();
        for row in y..y + h {
            let start = (row * self.width + x) * CHANNELS;
            out.extend_from_slice(&self.data[start..start + w * CHANNELS]);
        }
    }

    pub fn put_block(&mut self, x: usize, y: usize, w: usize, h: usize, values: &[f32]) {
        for (r, row) in (y..y + h).enumerate() {
            let start = (row * self.width + x) * CHANNELS;
            let src = &values[r * w * CHANNELS..(r + 1) * w * CHANNELS];
            self.data[start..start + w * CHANNELS].copy_from_slice(src);
        }
    }

    /// Zeroes every pixel where `mask` is unknown.
    pub fn masked(&self, mask: &Mask) -> Result<Raster> {
        if mask.width() != self.width || mask.height() != self.height {
            return Err(Error::DimensionMismatch("mask and image differ in size".into()));
        }
        let mut out = self.clone();
        for (i, known) in mask.data().iter().enumerate() {
            if !known {
                out.data[i * CHANNELS..(i + 1) * CHANNELS].fill(0.0);
            }
        }
        Ok(out)
    }
}

#[inline]
fn clamp_taps(x: f64, len: usize) -> (usize, usize, f32) {
    let max = (len - 1) as f64;
    let x = x.clamp(0.0, max);
    let x0 = x.floor();
    let i0 = x0 as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, (x - x0) as f32)
}

/// Binary known/unknown mask; `true` marks known pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, known: bool) -> Self {
        Self {
            width,
            height,
            data: vec![known; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} mask needs {} entries, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, known: bool) {
        self.data[y * self.width + x] = known;
    }

    pub fn known_count(&self) -> usize {
        self.data.iter().filter(|k| **k).count()
    }

    pub fn known_fraction(&self) -> f64 {
        self.known_count() as f64 / self.data.len().max(1) as f64
    }

    /// True when every pixel in the block is known.
    pub fn block_known(&self, x: usize, y: usize, w: usize, h: usize) -> bool {
        (y..y + h).all(|row| self.data[row * self.width + x..row * self.width + x + w].iter().all(|k| *k))
    }

    /// Downsample by an integer factor; a coarse pixel is known only if all
    /// of its source pixels are.
    pub fn downsample_all(&self, factor: usize) -> Result<Mask> {
        if factor == 0 || self.width % factor != 0 || self.height % factor != 0 {
            return Err(Error::DimensionMismatch(format!(
                "cannot downsample {}x{} mask by {}",
                self.width, self.height, factor
            )));
        }
        Ok(Mask::from_fn(self.width / factor, self.height / factor, |x, y| {
            self.block_known(x * factor, y * factor, factor, factor)
        }))
    }

    /// Grey raster with 1.0 for known and 0.0 for unknown pixels.
    pub fn to_raster(&self) -> Raster {
        Raster::from_fn(self.width, self.height, |x, y| {
            if self.get(x, y) {
                [1.0; 3]
            } else {
                [0.0; 3]
            }
        })
    }

    /// Thresholds the channel mean at 0.5.
    pub fn from_raster(r: &Raster) -> Mask {
        Mask::from_fn(r.width(), r.height(), |x, y| {
            let p = r.get(x, y);
            (p[0] + p[1] + p[2]) / 3.0 >= 0.5
        })
    }

    pub fn agreement(&self, other: &Mask) -> Result<f64> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch("masks differ in size".into()));
        }
        let same = self.data.iter().zip(&other.data).filter(|(a, b)| a == b).count();
        Ok(same as f64 / self.data.len().max(1) as f64)
    }
}
