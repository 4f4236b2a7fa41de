//! Random sampling of significant blocks over the binary gradient image.
//!
//! Candidates are drawn uniformly over every valid top-left position. A
//! candidate is eligible when its white fraction strictly exceeds
//! `M = (mean + median) / 2` of the whole binary image. The selected set is
//! kept pairwise non-overlapping: a candidate that overlaps selections
//! replaces all of them only if its white count beats each one, otherwise
//! the incumbents stay.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BinaryImage, MeanMedian};

/// Generator used for block sampling, seeded with `seed_from_u64`.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64)";

/// A `u`x`v` rectangle with top-left corner `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockSpec {
    pub x: usize,
    pub y: usize,
    pub u: usize,
    pub v: usize,
}

impl BlockSpec {
    pub fn new(x: usize, y: usize, u: usize, v: usize) -> Self {
        Self { x, y, u, v }
    }

    pub fn area(&self) -> usize {
        self.u * self.v
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x + self.u <= width && self.y + self.v <= height
    }

    pub fn contains(&self, px: usize, py: usize) -> bool {
        px >= self.x && px < self.x + self.u && py >= self.y && py < self.y + self.v
    }
}

/// True iff the rectangles share at least one pixel.
pub fn overlaps(a: &BlockSpec, b: &BlockSpec) -> bool {
    a.x < b.x + b.u && b.x < a.x + a.u && a.y < b.y + b.v && b.y < a.y + a.v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSelectConfig {
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub retain_count: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for BlockSelectConfig {
    fn default() -> Self {
        Self {
            grid_cols: 9,
            grid_rows: 10,
            retain_count: 12,
            iterations: 100_000,
            seed: 0,
        }
    }
}

impl BlockSelectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_cols == 0 || self.grid_rows == 0 {
            return Err(Error::config("grid dimensions must be positive"));
        }
        if self.retain_count == 0 || self.retain_count > self.grid_cols * self.grid_rows {
            return Err(Error::config(format!(
                "retain count {} outside [1, {}]",
                self.retain_count,
                self.grid_cols * self.grid_rows
            )));
        }
        Ok(())
    }
}

/// Block dimensions from the grid: `(floor(width / cols), floor(height / rows))`.
pub fn block_size(width: usize, height: usize, cfg: &BlockSelectConfig) -> Result<(usize, usize)> {
    if cfg.grid_cols == 0 || cfg.grid_rows == 0 {
        return Err(Error::config("grid dimensions must be positive"));
    }
    if width < cfg.grid_cols * 3 || height < cfg.grid_rows * 3 {
        return Err(Error::invalid(format!(
            "a {}x{} grid is too fine for a {width}x{height} image (blocks must be at least 3x3)",
            cfg.grid_cols, cfg.grid_rows
        )));
    }
    Ok((width / cfg.grid_cols, height / cfg.grid_rows))
}

/// Number of foreground pixels inside `spec`.
pub fn white_count(bin: &BinaryImage, spec: &BlockSpec) -> Result<usize> {
    if !spec.fits(bin.width(), bin.height()) {
        return Err(Error::invalid(format!(
            "block {spec:?} lies outside the {}x{} image",
            bin.width(),
            bin.height()
        )));
    }
    let mut n = 0;
    for y in spec.y..spec.y + spec.v {
        for x in spec.x..spec.x + spec.u {
            n += bin.get(x, y) as usize;
        }
    }
    Ok(n)
}

/// Summed-area table for O(1) rectangle counts.
struct Integral {
    stride: usize,
    sums: Vec<u32>,
}

impl Integral {
    fn new(bin: &BinaryImage) -> Self {
        let (w, h) = (bin.width(), bin.height());
        let stride = w + 1;
        let mut sums = vec![0u32; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u32;
            for x in 0..w {
                row += bin.get(x, y) as u32;
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { stride, sums }
    }

    fn count(&self, s: &BlockSpec) -> usize {
        let at = |x: usize, y: usize| self.sums[y * self.stride + x] as i64;
        (at(s.x + s.u, s.y + s.v) - at(s.x, s.y + s.v) - at(s.x + s.u, s.y) + at(s.x, s.y)) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedBlock {
    #[serde(flatten)]
    pub spec: BlockSpec,
    pub white_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSelection {
    /// Retained blocks sorted by `(y, x)`.
    pub blocks: Vec<SelectedBlock>,
    pub block_size: (usize, usize),
    /// The eligibility threshold `M` on the white fraction.
    pub threshold: f64,
    /// Fewer than `retain_count` blocks survived.
    pub shortfall: bool,
}

/// Trace of the sampler's decisions, for auditing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionEvent {
    Accepted(SelectedBlock),
    Displaced {
        removed: SelectedBlock,
        by: SelectedBlock,
    },
    Rejected {
        candidate: SelectedBlock,
        kept: SelectedBlock,
    },
}

pub fn sample_significant_blocks(bin: &BinaryImage, cfg: &BlockSelectConfig) -> Result<BlockSelection> {
    sample_significant_blocks_observed(bin, cfg, |_| {})
}

/// Same as [`sample_significant_blocks`], reporting each accept, displace
/// and reject decision to `observe`.
pub fn sample_significant_blocks_observed(
    bin: &BinaryImage,
    cfg: &BlockSelectConfig,
    mut observe: impl FnMut(&SelectionEvent),
) -> Result<BlockSelection> {
    cfg.validate()?;
    let (u, v) = block_size(bin.width(), bin.height(), cfg)?;
    let stats = MeanMedian::of(bin.data()).ok_or_else(|| Error::invalid("empty binary image"))?;
    let area = (u * v) as u64;
    // white / area > (mean + median) / 2, cleared of denominators.
    let eligible = |white: usize| 2 * stats.count * white as u64 > (stats.sum + stats.count * stats.median) * area;

    let integral = Integral::new(bin);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (max_x, max_y) = (bin.width() - u, bin.height() - v);
    let mut selected: Vec<SelectedBlock> = Vec::new();
    let mut hits: Vec<usize> = Vec::new();

    for _ in 0..cfg.iterations {
        let spec = BlockSpec::new(rng.random_range(0..=max_x), rng.random_range(0..=max_y), u, v);
        let white = integral.count(&spec);
        if !eligible(white) {
            continue;
        }
        let candidate = SelectedBlock {
            spec,
            white_count: white,
        };

        hits.clear();
        hits.extend(
            selected
                .iter()
                .enumerate()
                .filter(|(_, s)| overlaps(&s.spec, &spec))
                .map(|(i, _)| i),
        );
        if let Some(&strongest) = hits.iter().find(|&&i| selected[i].white_count >= white) {
            observe(&SelectionEvent::Rejected {
                candidate,
                kept: selected[strongest],
            });
            continue;
        }
        for &i in hits.iter().rev() {
            let removed = selected.swap_remove(i);
            observe(&SelectionEvent::Displaced { removed, by: candidate });
        }
        selected.push(candidate);
        observe(&SelectionEvent::Accepted(candidate));
    }

    selected.sort_by(|a, b| {
        b.white_count
            .cmp(&a.white_count)
            .then((a.spec.y, a.spec.x).cmp(&(b.spec.y, b.spec.x)))
    });
    selected.truncate(cfg.retain_count);
    selected.sort_by_key(|s| (s.spec.y, s.spec.x));

    let shortfall = selected.len() < cfg.retain_count;
    if shortfall {
        log::warn!(
            "only {} of {} significant blocks found",
            selected.len(),
            cfg.retain_count
        );
    }
    Ok(BlockSelection {
        blocks: selected,
        block_size: (u, v),
        threshold: stats.threshold(),
        shortfall,
    })
}
