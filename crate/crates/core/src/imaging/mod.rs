//! Grayscale and binary rasters plus the preprocessing chain that turns a
//! face image into its absolute binary gradient map.
//!
//! The chain is `resize -> gradient -> enhance -> posterize -> binarize`.
//! Every formula that rounds uses round-half-away-from-zero; all intermediate
//! arithmetic is done on integers so results are exact.

mod io;

pub use io::{load_gray, read_pgm, read_png, write_pgm};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 8-bit grayscale raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "pixel buffer has {} values, expected {}x{} = {}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = value;
    }

    /// Copies the `w`x`h` rectangle whose top-left corner is `(x, y)`.
    pub fn region(&self, x: usize, y: usize, w: usize, h: usize) -> Result<GrayImage> {
        check_region(self.width, self.height, x, y, w, h)?;
        let mut data = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            data.extend_from_slice(&self.data[start..start + w]);
        }
        Ok(GrayImage {
            width: w,
            height: h,
            data,
        })
    }

    /// Crops the centered rectangle covering `fraction` of each dimension.
    pub fn center_crop(&self, fraction: f64) -> Result<GrayImage> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "center-crop fraction {fraction} must be in (0, 1]"
            )));
        }
        let w = ((self.width as f64 * fraction).round() as usize).clamp(1, self.width);
        let h = ((self.height as f64 * fraction).round() as usize).clamp(1, self.height);
        self.region((self.width - w) / 2, (self.height - h) / 2, w, h)
    }
}

/// Row-major raster of {0, 1} values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "binary buffer has {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        if let Some(bad) = data.iter().find(|&&v| v > 1) {
            return Err(Error::invalid(format!("binary image value {bad} is not 0 or 1")));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as u8);
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = value as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn region(&self, x: usize, y: usize, w: usize, h: usize) -> Result<BinaryImage> {
        check_region(self.width, self.height, x, y, w, h)?;
        let mut data = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            data.extend_from_slice(&self.data[start..start + w]);
        }
        Ok(BinaryImage {
            width: w,
            height: h,
            data,
        })
    }

    /// Debug view: foreground as 255, background as 0.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v * 255).collect(),
        }
    }
}

fn check_region(width: usize, height: usize, x: usize, y: usize, w: usize, h: usize) -> Result<()> {
    if w == 0 || h == 0 || x + w > width || y + h > height {
        return Err(Error::invalid(format!(
            "region ({x}, {y}, {w}, {h}) does not fit inside {width}x{height}"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub target_width: usize,
    pub target_height: usize,
    /// Number of posterization levels.
    pub poster_levels: u32,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            target_width: 92,
            target_height: 112,
            poster_levels: 8,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_width < 3 || self.target_height < 3 {
            return Err(Error::config(format!(
                "target size {}x{} is smaller than 3x3",
                self.target_width, self.target_height
            )));
        }
        if !(2..=256).contains(&self.poster_levels) {
            return Err(Error::config(format!(
                "posterization levels {} outside [2, 256]",
                self.poster_levels
            )));
        }
        Ok(())
    }
}

/// Intermediate rasters of the preprocessing chain.
#[derive(Clone, Debug)]
pub struct Preprocessed {
    /// The input scaled to the target size; texture features read from this.
    pub resized: GrayImage,
    /// Enhanced gradient magnitude.
    pub gradient: GrayImage,
    pub posterized: GrayImage,
    /// Absolute binary gradient image.
    pub binary: BinaryImage,
}

pub fn preprocess(img: &GrayImage, cfg: &PreprocessConfig) -> Result<Preprocessed> {
    cfg.validate()?;
    let resized = resize_bilinear(img, cfg.target_width, cfg.target_height)?;
    let gradient = gradient_magnitude(&resized)?;
    let posterized = posterize(&gradient, cfg.poster_levels)?;
    let binary = binarize_mean_median(&posterized)?;
    Ok(Preprocessed {
        resized,
        gradient,
        posterized,
        binary,
    })
}

/// Integer division of non-negative operands, rounding halves up.
#[inline]
fn div_round(num: u64, den: u64) -> u64 {
    (2 * num + den) / (2 * den)
}

/// Bilinear resampling with half-pixel-centered sample positions.
pub fn resize_bilinear(img: &GrayImage, w: usize, h: usize) -> Result<GrayImage> {
    if w == 0 || h == 0 {
        return Err(Error::invalid(format!("cannot resize to {w}x{h}")));
    }
    if img.width == 0 || img.height == 0 {
        return Err(Error::invalid("cannot resize an empty image"));
    }
    if img.width == w && img.height == h {
        return Ok(img.clone());
    }

    let axis = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        let scale = src_len as f64 / dst_len as f64;
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, pos - lo as f64)
    };
    let cols: Vec<_> = (0..w).map(|x| axis(x, img.width, w)).collect();

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1, fy) = axis(y, img.height, h);
        for &(x0, x1, fx) in &cols {
            let top = img.get(x0, y0) as f64 * (1.0 - fx) + img.get(x1, y0) as f64 * fx;
            let bottom = img.get(x0, y1) as f64 * (1.0 - fx) + img.get(x1, y1) as f64 * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            out.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::from_vec(w, h, out)
}

const NEIGHBORS: [(isize, isize); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

/// Per-pixel sum of absolute differences to every existing 8-neighbor.
/// Border pixels only see the neighbors that lie inside the image.
pub fn raw_gradient(img: &GrayImage) -> Result<Vec<i64>> {
    if img.width < 2 || img.height < 2 {
        return Err(Error::invalid(format!(
            "gradient needs at least 2x2 pixels, got {}x{}",
            img.width, img.height
        )));
    }
    let (w, h) = (img.width as isize, img.height as isize);
    let mut out = Vec::with_capacity(img.data.len());
    for y in 0..h {
        for x in 0..w {
            let center = img.get(x as usize, y as usize) as i64;
            let mut sum = 0i64;
            for &(dx, dy) in &NEIGHBORS {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < w && ny < h {
                    sum += (center - img.get(nx as usize, ny as usize) as i64).abs();
                }
            }
            out.push(sum);
        }
    }
    Ok(out)
}

/// Eight-direction absolute gradient, enhanced into `[0, 255]`.
pub fn gradient_magnitude(img: &GrayImage) -> Result<GrayImage> {
    let raw = raw_gradient(img)?;
    enhance(&raw, img.width, img.height)
}

/// Shifts the raster so its minimum is zero, then scales the maximum to 255.
/// A constant raster maps to all zeros.
pub fn enhance(raw: &[i64], width: usize, height: usize) -> Result<GrayImage> {
    if raw.is_empty() {
        return Err(Error::invalid("cannot enhance an empty raster"));
    }
    if raw.len() != width * height {
        return Err(Error::invalid(format!(
            "raster has {} values, expected {}",
            raw.len(),
            width * height
        )));
    }
    let min = *raw.iter().min().unwrap();
    let max = (*raw.iter().max().unwrap() - min) as u64;
    let data = if max == 0 {
        vec![0; raw.len()]
    } else {
        raw.iter()
            .map(|&v| div_round((v - min) as u64 * 255, max) as u8)
            .collect()
    };
    GrayImage::from_vec(width, height, data)
}

/// Posterizes one intensity: `round(v * n / 256) * 256 / n`, clamped to 255.
#[inline]
pub fn posterize_value(v: u8, levels: u32) -> u8 {
    let n = levels as u64;
    let bucket = div_round(v as u64 * n, 256);
    div_round(bucket * 256, n).min(255) as u8
}

pub fn posterize(img: &GrayImage, levels: u32) -> Result<GrayImage> {
    if !(2..=256).contains(&levels) {
        return Err(Error::invalid(format!(
            "posterization levels {levels} outside [2, 256]"
        )));
    }
    let mut table = [0u8; 256];
    for (v, slot) in table.iter_mut().enumerate() {
        *slot = posterize_value(v as u8, levels);
    }
    let data = img.data.iter().map(|&v| table[v as usize]).collect();
    GrayImage::from_vec(img.width, img.height, data)
}

/// Threshold statistics of a pixel multiset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanMedian {
    pub count: u64,
    pub sum: u64,
    /// Lower middle order statistic.
    pub median: u64,
}

impl MeanMedian {
    pub fn of(values: &[u8]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut hist = [0u64; 256];
        for &v in values {
            hist[v as usize] += 1;
        }
        let count = values.len() as u64;
        let sum = hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();
        let rank = (count - 1) / 2;
        let mut seen = 0;
        let mut median = 0;
        for (v, &c) in hist.iter().enumerate() {
            seen += c;
            if seen > rank {
                median = v as u64;
                break;
            }
        }
        Some(Self { count, sum, median })
    }

    /// `(mean + median) / 2` as a float, for reporting.
    pub fn threshold(&self) -> f64 {
        (self.sum as f64 / self.count as f64 + self.median as f64) / 2.0
    }

    /// Exact test of `value > (mean + median) / 2`.
    #[inline]
    pub fn exceeds(&self, value: u64) -> bool {
        2 * self.count * value > self.sum + self.count * self.median
    }
}

/// Marks pixels strictly above the average of the image mean and median.
pub fn binarize_mean_median(img: &GrayImage) -> Result<BinaryImage> {
    let stats = MeanMedian::of(&img.data).ok_or_else(|| Error::invalid("cannot binarize an empty image"))?;
    let data = img.data.iter().map(|&v| stats.exceeds(v as u64) as u8).collect();
    BinaryImage::from_vec(img.width, img.height, data)
}
