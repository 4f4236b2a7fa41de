//! Gray-level co-occurrence matrices and the four Haralick statistics used
//! per block: energy, contrast, correlation and homogeneity.
//!
//! Directional matrices are accumulated symmetrically (both `(p, p+d)` and
//! `(p+d, p)`), so row and column marginals coincide and a single mean and
//! variance describe the matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

pub const DEFAULT_LEVELS: usize = 16;
pub const DEFAULT_DISTANCES: [usize; 3] = [1, 2, 3];

/// `sigma^2` below this is treated as zero when computing correlation.
const VARIANCE_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedBlock {
    width: usize,
    height: usize,
    levels: usize,
    data: Vec<u8>,
}

impl QuantizedBlock {
    pub fn from_vec(width: usize, height: usize, levels: usize, data: Vec<u8>) -> Result<Self> {
        if !(2..=256).contains(&levels) {
            return Err(Error::invalid(format!("gray levels {levels} outside [2, 256]")));
        }
        if data.len() != width * height {
            return Err(Error::invalid("quantized block size mismatch"));
        }
        if let Some(&v) = data.iter().find(|&&v| v as usize >= levels) {
            return Err(Error::invalid(format!("level {v} not below {levels}")));
        }
        Ok(Self {
            width,
            height,
            levels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }
}

/// Maps each intensity `v` to `floor(v * levels / 256)`.
pub fn quantize(block: &GrayImage, levels: usize) -> Result<QuantizedBlock> {
    if !(2..=256).contains(&levels) {
        return Err(Error::invalid(format!("gray levels {levels} outside [2, 256]")));
    }
    let data = block
        .data()
        .iter()
        .map(|&v| (v as usize * levels / 256) as u8)
        .collect();
    Ok(QuantizedBlock {
        width: block.width(),
        height: block.height(),
        levels,
        data,
    })
}

/// Offsets `(dx, dy)` for 0°, 45°, 90° and 135° at distance `d`, with `y`
/// growing downward.
pub fn direction_offsets(d: usize) -> [(isize, isize); 4] {
    let d = d as isize;
    [(d, 0), (d, -d), (0, -d), (-d, -d)]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cooccurrence {
    levels: usize,
    cells: Vec<f64>,
    normalized: bool,
    /// Pixel pairs visited while accumulating.
    pairs: u64,
}

impl Cooccurrence {
    fn zeros(levels: usize) -> Self {
        Self {
            levels,
            cells: vec![0.0; levels * levels],
            normalized: false,
            pairs: 0,
        }
    }

    /// Builds a normalized matrix from explicit row-major cells.
    pub fn from_probabilities(levels: usize, cells: Vec<f64>) -> Result<Self> {
        if cells.len() != levels * levels {
            return Err(Error::invalid("co-occurrence cell count mismatch"));
        }
        let total: f64 = cells.iter().sum();
        if cells.iter().any(|&c| c < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("co-occurrence cells must be non-negative and sum to 1"));
        }
        Ok(Self {
            levels,
            cells,
            normalized: true,
            pairs: 0,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.levels + j]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn pairs(&self) -> u64 {
        self.pairs
    }

    /// No pixel pair fit inside the block.
    pub fn is_empty(&self) -> bool {
        self.pairs == 0
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().sum()
    }
}

/// Adds symmetric counts for every in-bounds pair `(p, p + offset)`.
fn accumulate(block: &QuantizedBlock, (dx, dy): (isize, isize), m: &mut Cooccurrence) {
    let (w, h) = (block.width as isize, block.height as isize);
    let (x0, x1) = (0.max(-dx), w.min(w - dx));
    let (y0, y1) = (0.max(-dy), h.min(h - dy));
    let n = m.levels;
    for y in y0..y1 {
        for x in x0..x1 {
            let a = block.get(x as usize, y as usize) as usize;
            let b = block.get((x + dx) as usize, (y + dy) as usize) as usize;
            m.cells[a * n + b] += 1.0;
            m.cells[b * n + a] += 1.0;
            m.pairs += 1;
        }
    }
}

/// Unnormalized symmetric co-occurrence counts for one offset.
pub fn cooccurrence(block: &QuantizedBlock, offset: (isize, isize)) -> Result<Cooccurrence> {
    let (dx, dy) = offset;
    if dx == 0 && dy == 0 {
        return Err(Error::invalid("co-occurrence offset must be nonzero"));
    }
    if dx.unsigned_abs() >= block.width || dy.unsigned_abs() >= block.height {
        return Err(Error::invalid(format!(
            "offset ({dx}, {dy}) does not fit a {}x{} block",
            block.width, block.height
        )));
    }
    let mut m = Cooccurrence::zeros(block.levels);
    accumulate(block, offset, &mut m);
    Ok(m)
}

/// Average of the four directional matrices at distance `d`, normalized to
/// unit mass. Directions that do not fit the block contribute nothing; if
/// none fits, the all-zero unnormalized matrix is returned.
pub fn averaged_glcm(block: &QuantizedBlock, d: usize) -> Result<Cooccurrence> {
    if d == 0 {
        return Err(Error::invalid("GLCM distance must be at least 1"));
    }
    let mut m = Cooccurrence::zeros(block.levels);
    for offset in direction_offsets(d) {
        accumulate(block, offset, &mut m);
    }
    if m.pairs == 0 {
        return Ok(m);
    }
    for c in &mut m.cells {
        *c /= 4.0;
    }
    let total = m.total();
    for c in &mut m.cells {
        *c /= total;
    }
    m.normalized = true;
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaralickFeatures {
    pub energy: f64,
    pub contrast: f64,
    pub correlation: f64,
    pub homogeneity: f64,
}

impl HaralickFeatures {
    pub fn to_array(&self) -> [f64; 4] {
        [self.energy, self.contrast, self.correlation, self.homogeneity]
    }
}

pub fn haralick(m: &Cooccurrence) -> Result<HaralickFeatures> {
    if !m.normalized {
        return Err(Error::invalid("Haralick features need a normalized matrix"));
    }
    let n = m.levels;
    let mut energy = 0.0;
    let mut contrast = 0.0;
    let mut homogeneity = 0.0;
    let mut mean = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = m.get(i, j);
            let diff = i.abs_diff(j) as f64;
            energy += p * p;
            contrast += diff * diff * p;
            homogeneity += p / (1.0 + diff);
            mean += i as f64 * p;
        }
    }
    let mut variance = 0.0;
    let mut covariance = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = m.get(i, j);
            let (di, dj) = (i as f64 - mean, j as f64 - mean);
            variance += di * di * p;
            covariance += di * dj * p;
        }
    }
    let correlation = if variance > VARIANCE_EPS {
        covariance / variance
    } else {
        0.0
    };
    Ok(HaralickFeatures {
        energy,
        contrast,
        correlation,
        homogeneity,
    })
}

/// Haralick features per distance, flattened as
/// `[energy, contrast, (correlation + 1) / 2, homogeneity]` for each `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlcmFeatures {
    pub values: Vec<f64>,
    /// Distances at which no pixel pair fit; their four slots are zero.
    pub empty_distances: Vec<usize>,
}

pub fn glcm_feature_vector(block: &GrayImage, levels: usize, distances: &[usize]) -> Result<GlcmFeatures> {
    let q = quantize(block, levels)?;
    let mut values = Vec::with_capacity(4 * distances.len());
    let mut empty_distances = Vec::new();
    for &d in distances {
        let m = averaged_glcm(&q, d)?;
        if m.is_empty() {
            log::warn!(
                "no pixel pairs at distance {d} in a {}x{} block",
                block.width(),
                block.height()
            );
            empty_distances.push(d);
            values.extend([0.0; 4]);
            continue;
        }
        let h = haralick(&m)?;
        values.extend([
            h.energy,
            h.contrast,
            ((h.correlation + 1.0) / 2.0).clamp(0.0, 1.0),
            h.homogeneity,
        ]);
    }
    Ok(GlcmFeatures {
        values,
        empty_distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent brute-force pair counter: visits every ordered pixel pair.
    fn brute_force(block: &QuantizedBlock, dx: isize, dy: isize) -> Vec<f64> {
        let n = block.levels();
        let mut cells = vec![0.0; n * n];
        let (w, h) = (block.width() as isize, block.height() as isize);
        for y in 0..h {
            for x in 0..w {
                for y2 in 0..h {
                    for x2 in 0..w {
                        if x2 - x == dx && y2 - y == dy {
                            let a = block.get(x as usize, y as usize) as usize;
                            let b = block.get(x2 as usize, y2 as usize) as usize;
                            cells[a * n + b] += 1.0;
                            cells[b * n + a] += 1.0;
                        }
                    }
                }
            }
        }
        cells
    }

    fn random_block(rng: &mut impl Rng, w: usize, h: usize, levels: usize) -> QuantizedBlock {
        let data = (0..w * h).map(|_| rng.random_range(0..levels) as u8).collect();
        QuantizedBlock::from_vec(w, h, levels, data).unwrap()
    }

    #[test]
    fn quantize_examples() {
        let img = GrayImage::from_vec(3, 1, vec![255, 0, 128]).unwrap();
        assert_eq!(quantize(&img, 16).unwrap().data(), &[15, 0, 8]);
        assert_eq!(quantize(&img, 2).unwrap().data(), &[1, 0, 1]);
        assert!(quantize(&img, 1).is_err());
    }

    #[test]
    fn constant_block_is_all_diagonal() {
        let q = QuantizedBlock::from_vec(4, 3, 5, vec![2; 12]).unwrap();
        let m = cooccurrence(&q, (1, 0)).unwrap();
        assert_eq!(m.get(2, 2), 2.0 * 9.0);
        assert_eq!(m.total(), 18.0);
        let avg = averaged_glcm(&q, 1).unwrap();
        assert_eq!(avg.get(2, 2), 1.0);
    }

    #[test]
    fn single_pair() {
        let q = QuantizedBlock::from_vec(2, 1, 4, vec![1, 3]).unwrap();
        let m = cooccurrence(&q, (1, 0)).unwrap();
        assert_eq!(m.get(1, 3), 1.0);
        assert_eq!(m.get(3, 1), 1.0);
        assert_eq!(m.total(), 2.0);
    }

    #[test]
    fn printed_four_by_four_block_against_oracle() {
        #[rustfmt::skip]
        let data = vec![
            0, 3, 4, 2,
            2, 1, 3, 4,
            0, 3, 2, 1,
            2, 1, 0, 3,
        ];
        let q = QuantizedBlock::from_vec(4, 4, 5, data).unwrap();
        for offset in direction_offsets(1) {
            let m = cooccurrence(&q, offset).unwrap();
            assert_eq!(m.cells(), &brute_force(&q, offset.0, offset.1)[..]);
        }
        // Horizontal pairs {0,3} occur three times in the block.
        let h = cooccurrence(&q, (1, 0)).unwrap();
        assert_eq!(h.get(0, 3), 3.0);
    }

    #[test]
    fn offset_errors() {
        let q = QuantizedBlock::from_vec(3, 3, 2, vec![0; 9]).unwrap();
        assert!(cooccurrence(&q, (0, 0)).is_err());
        assert!(cooccurrence(&q, (3, 0)).is_err());
        assert!(averaged_glcm(&q, 0).is_err());
        let empty = averaged_glcm(&q, 3).unwrap();
        assert!(empty.is_empty() && !empty.is_normalized());
        assert!(haralick(&empty).is_err());
    }

    #[test]
    fn averaged_matches_brute_force_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = random_block(&mut rng, 10, 11, 16);
        let d = 2;
        let mut sum = vec![0.0; 256];
        for (dx, dy) in direction_offsets(d) {
            for (s, c) in sum.iter_mut().zip(brute_force(&q, dx, dy)) {
                *s += c / 4.0;
            }
        }
        let total: f64 = sum.iter().sum();
        let avg = averaged_glcm(&q, d).unwrap();
        for (a, b) in avg.cells().iter().zip(&sum) {
            assert!((a - b / total).abs() < 1e-15);
        }
        assert!((avg.total() - 1.0).abs() < 1e-9);
    }

    /// Contrast evaluated with the `k^2 * sum_{|i-j|=k}` grouping.
    fn contrast_by_diagonals(m: &Cooccurrence) -> f64 {
        let n = m.levels();
        (0..n)
            .map(|k| {
                let band: f64 = (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| i.abs_diff(j) == k)
                    .map(|(i, j)| m.get(i, j))
                    .sum();
                (k * k) as f64 * band
            })
            .sum()
    }

    #[test]
    fn haralick_hand_values() {
        let mut diag = vec![0.0; 9];
        diag[4] = 1.0;
        let h = haralick(&Cooccurrence::from_probabilities(3, diag).unwrap()).unwrap();
        assert_eq!(h.to_array(), [1.0, 0.0, 0.0, 1.0]);

        let anti = Cooccurrence::from_probabilities(2, vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        let h = haralick(&anti).unwrap();
        for (got, want) in h.to_array().iter().zip([0.5, 1.0, -1.0, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }

        let uniform = Cooccurrence::from_probabilities(2, vec![0.25; 4]).unwrap();
        let h = haralick(&uniform).unwrap();
        for (got, want) in h.to_array().iter().zip([0.25, 0.5, 0.0, 0.75]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn feature_vector_shape_and_constant_block() {
        let flat = GrayImage::from_fn(10, 11, |_, _| 90);
        let f = glcm_feature_vector(&flat, 16, &DEFAULT_DISTANCES).unwrap();
        assert_eq!(f.values, [1.0, 0.0, 0.5, 1.0].repeat(3));
        assert!(f.empty_distances.is_empty());

        let tiny = GrayImage::from_fn(3, 3, |x, y| (x * 80 + y) as u8);
        let f = glcm_feature_vector(&tiny, 16, &DEFAULT_DISTANCES).unwrap();
        assert_eq!(f.values.len(), 12);
        assert_eq!(f.empty_distances, vec![3]);
        assert_eq!(&f.values[8..], &[0.0; 4]);
    }

    /// End-to-end reimplementation of the per-distance feature slots.
    #[allow(clippy::needless_range_loop)]
    fn feature_oracle(block: &GrayImage, levels: usize, d: usize) -> [f64; 4] {
        let q: Vec<usize> = block.data().iter().map(|&v| v as usize * levels / 256).collect();
        let (w, h) = (block.width() as isize, block.height() as isize);
        let mut p = vec![vec![0.0; levels]; levels];
        let mut total = 0.0;
        for (dx, dy) in direction_offsets(d) {
            for y in 0..h {
                for x in 0..w {
                    let (x2, y2) = (x + dx, y + dy);
                    if x2 < 0 || y2 < 0 || x2 >= w || y2 >= h {
                        continue;
                    }
                    let a = q[(y * w + x) as usize];
                    let b = q[(y2 * w + x2) as usize];
                    p[a][b] += 1.0;
                    p[b][a] += 1.0;
                    total += 2.0;
                }
            }
        }
        let mut out = [0.0; 4];
        let mu: f64 = (0..levels).map(|i| i as f64 * p[i].iter().sum::<f64>() / total).sum();
        let mut var = 0.0;
        let mut cov = 0.0;
        for i in 0..levels {
            for j in 0..levels {
                let pij = p[i][j] / total;
                out[0] += pij * pij;
                out[1] += ((i as f64 - j as f64).powi(2)) * pij;
                out[3] += pij / (1.0 + (i as f64 - j as f64).abs());
                var += (i as f64 - mu).powi(2) * pij;
                cov += (i as f64 - mu) * (j as f64 - mu) * pij;
            }
        }
        out[2] = if var > 1e-12 { (cov / var + 1.0) / 2.0 } else { 0.5 };
        out
    }

    #[test]
    fn feature_vector_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let block = GrayImage::from_fn(10, 11, |_, _| rng.random());
            let f = glcm_feature_vector(&block, 16, &DEFAULT_DISTANCES).unwrap();
            for (k, &d) in DEFAULT_DISTANCES.iter().enumerate() {
                let want = feature_oracle(&block, 16, d);
                for (got, want) in f.values[4 * k..4 * k + 4].iter().zip(want) {
                    assert!((got - want).abs() < 1e-12);
                }
            }
        }
    }

    fn rotate90(q: &QuantizedBlock) -> QuantizedBlock {
        let (w, h) = (q.width(), q.height());
        let mut data = Vec::with_capacity(w * h);
        // Output is h wide and w tall; output (x, y) reads input (y, h - 1 - x).
        for y in 0..w {
            for x in 0..h {
                data.push(q.get(y, h - 1 - x));
            }
        }
        QuantizedBlock::from_vec(h, w, q.levels(), data).unwrap()
    }

    proptest! {
        #[test]
        fn cooccurrence_matches_oracle(
            w in 1usize..=6, h in 1usize..=6, levels in 2usize..=4,
            seed in any::<u64>(), dir in 0usize..4, d in 1usize..=2
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_block(&mut rng, w, h, levels);
            let (dx, dy) = direction_offsets(d)[dir];
            match cooccurrence(&q, (dx, dy)) {
                Ok(m) => {
                    prop_assert_eq!(m.cells(), &brute_force(&q, dx, dy)[..]);
                    for i in 0..levels {
                        for j in 0..levels {
                            prop_assert_eq!(m.get(i, j), m.get(j, i));
                        }
                    }
                }
                Err(_) => prop_assert!(dx.unsigned_abs() >= w || dy.unsigned_abs() >= h),
            }
        }

        #[test]
        fn averaged_glcm_is_rotation_invariant(w in 3usize..9, h in 3usize..9, seed in any::<u64>(), d in 1usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_block(&mut rng, w, h, 6);
            let a = averaged_glcm(&q, d).unwrap();
            let b = averaged_glcm(&rotate90(&q), d).unwrap();
            for (x, y) in a.cells().iter().zip(b.cells()) {
                prop_assert!((x - y).abs() < 1e-15);
            }
        }

        #[test]
        fn feature_ranges(seed in any::<u64>(), levels in 2usize..=16) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let block = GrayImage::from_fn(10, 11, |_, _| rng.random());
            let f = glcm_feature_vector(&block, levels, &DEFAULT_DISTANCES).unwrap();
            let max_contrast = ((levels - 1) * (levels - 1)) as f64;
            for slot in f.values.chunks(4) {
                prop_assert!(slot[0] > 0.0 && slot[0] <= 1.0 + 1e-12);
                prop_assert!(slot[1] >= 0.0 && slot[1] <= max_contrast + 1e-9);
                prop_assert!((0.0..=1.0).contains(&slot[2]));
                prop_assert!(slot[3] > 0.0 && slot[3] <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_contrast_grouping_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_block(&mut rng, 8, 8, 8);
        let m = averaged_glcm(&q, 1).unwrap();
        let h = haralick(&m).unwrap();
        assert!((h.contrast - contrast_by_diagonals(&m)).abs() < 1e-12);
    }
}
