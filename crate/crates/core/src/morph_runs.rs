//! Directional run counts on a binary block via two-pixel erosion.
//!
//! Eroding with a two-pixel structuring element keeps a pixel only when it
//! and its neighbor in the element's direction are both foreground. Along
//! any line, a run of length `L` leaves `L - 1` survivors, so
//! `runs = foreground - survivors` for each direction.

use crate::error::{Error, Result};
use crate::imaging::BinaryImage;

/// Two-pixel structuring elements: the anchor and one neighbor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructuringElement {
    /// `(c 1)`: right neighbor.
    Deg0,
    /// `(c 0; 0 1)`: down-right neighbor.
    Deg45,
    /// `(c; 1)`: neighbor below.
    Deg90,
    /// `(0 1; c 0)`: up-right neighbor.
    Deg135,
}

impl StructuringElement {
    pub const ALL: [StructuringElement; 4] = [Self::Deg0, Self::Deg45, Self::Deg90, Self::Deg135];

    /// Offset `(dx, dy)` of the non-anchor pixel, `y` growing downward.
    pub fn offset(self) -> (isize, isize) {
        match self {
            Self::Deg0 => (1, 0),
            Self::Deg45 => (1, 1),
            Self::Deg90 => (0, 1),
            Self::Deg135 => (1, -1),
        }
    }
}

fn check_block(block: &BinaryImage) -> Result<()> {
    if block.width() < 2 || block.height() < 2 {
        return Err(Error::invalid(format!(
            "run counting needs at least 2x2 pixels, got {}x{}",
            block.width(),
            block.height()
        )));
    }
    Ok(())
}

/// Output is 1 where the anchor and the element's neighbor are both 1;
/// a neighbor outside the block counts as 0.
pub fn erode(block: &BinaryImage, se: StructuringElement) -> Result<BinaryImage> {
    check_block(block)?;
    let (w, h) = (block.width() as isize, block.height() as isize);
    let (dx, dy) = se.offset();
    Ok(BinaryImage::from_fn(block.width(), block.height(), |x, y| {
        let (nx, ny) = (x as isize + dx, y as isize + dy);
        block.get(x, y) && nx >= 0 && ny >= 0 && nx < w && ny < h && block.get(nx as usize, ny as usize)
    }))
}

/// Runs in the 0°, 45°, 90° and 135° directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunCounts(pub [usize; 4]);

pub fn directional_runs(block: &BinaryImage) -> Result<RunCounts> {
    check_block(block)?;
    let foreground = block.count_ones();
    let mut runs = [0; 4];
    for (slot, se) in runs.iter_mut().zip(StructuringElement::ALL) {
        *slot = foreground - erode(block, se)?.count_ones();
    }
    Ok(RunCounts(runs))
}

/// Run counts divided by the block area, in `[0, 1]`.
pub fn run_features(block: &BinaryImage) -> Result<[f64; 4]> {
    let RunCounts(runs) = directional_runs(block)?;
    let area = (block.width() * block.height()) as f64;
    Ok(runs.map(|r| r as f64 / area))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Counts maximal foreground segments by walking every line of the
    /// direction from its starting pixel.
    fn segment_oracle(block: &BinaryImage, se: StructuringElement) -> usize {
        let (w, h) = (block.width() as isize, block.height() as isize);
        let (dx, dy) = se.offset();
        let inside = |x: isize, y: isize| x >= 0 && y >= 0 && x < w && y < h;
        let mut runs = 0;
        for y in 0..h {
            for x in 0..w {
                // A line starts where the previous pixel along it is outside.
                if inside(x - dx, y - dy) {
                    continue;
                }
                let (mut cx, mut cy) = (x, y);
                let mut in_run = false;
                while inside(cx, cy) {
                    let on = block.get(cx as usize, cy as usize);
                    if on && !in_run {
                        runs += 1;
                    }
                    in_run = on;
                    cx += dx;
                    cy += dy;
                }
            }
        }
        runs
    }

    fn from_rows(rows: &[&str]) -> BinaryImage {
        let w = rows[0].len();
        BinaryImage::from_fn(w, rows.len(), |x, y| rows[y].as_bytes()[x] == b'1')
    }

    #[test]
    fn erosion_examples() {
        let ones = BinaryImage::from_fn(3, 3, |_, _| true);
        let e = erode(&ones, StructuringElement::Deg0).unwrap();
        assert_eq!(e.count_ones(), 6);
        assert!((0..3).all(|y| !e.get(2, y)));

        let zeros = BinaryImage::new(4, 4);
        let single = BinaryImage::from_fn(4, 4, |x, y| (x, y) == (1, 2));
        for se in StructuringElement::ALL {
            assert_eq!(erode(&zeros, se).unwrap().count_ones(), 0);
            assert_eq!(erode(&single, se).unwrap().count_ones(), 0);
        }
        assert!(erode(&BinaryImage::new(1, 5), StructuringElement::Deg0).is_err());
    }

    #[test]
    fn run_examples() {
        assert_eq!(directional_runs(&BinaryImage::new(10, 11)).unwrap(), RunCounts([0; 4]));

        let row = BinaryImage::from_fn(10, 11, |_, y| y == 5);
        assert_eq!(directional_runs(&row).unwrap(), RunCounts([1, 10, 10, 10]));

        let checker = from_rows(&["10", "01"]);
        assert_eq!(directional_runs(&checker).unwrap(), RunCounts([2, 1, 2, 2]));
    }

    #[test]
    fn feature_examples() {
        assert_eq!(run_features(&BinaryImage::new(10, 11)).unwrap(), [0.0; 4]);
        let solid = BinaryImage::from_fn(10, 11, |_, _| true);
        assert_eq!(directional_runs(&solid).unwrap(), RunCounts([11, 20, 10, 20]));
        assert_eq!(
            run_features(&solid).unwrap(),
            [11.0 / 110.0, 20.0 / 110.0, 10.0 / 110.0, 20.0 / 110.0]
        );
    }

    fn random_block(seed: u64, w: usize, h: usize) -> BinaryImage {
        let mut s = seed | 1;
        BinaryImage::from_fn(w, h, |_, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            s & 1 == 1
        })
    }

    proptest! {
        #[test]
        fn identity_matches_segment_oracle(seed in any::<u64>(), w in 2usize..14, h in 2usize..14) {
            let block = random_block(seed, w, h);
            let runs = directional_runs(&block).unwrap();
            for (i, se) in StructuringElement::ALL.into_iter().enumerate() {
                prop_assert_eq!(runs.0[i], segment_oracle(&block, se));
                prop_assert!(runs.0[i] <= block.count_ones());
            }
            for f in run_features(&block).unwrap() {
                prop_assert!((0.0..=1.0).contains(&f));
            }
        }

        #[test]
        fn transpose_and_mirror(seed in any::<u64>(), w in 2usize..12, h in 2usize..12) {
            let block = random_block(seed, w, h);
            let runs = directional_runs(&block).unwrap().0;
            let transposed = BinaryImage::from_fn(h, w, |x, y| block.get(y, x));
            prop_assert_eq!(directional_runs(&transposed).unwrap().0[0], runs[2]);
            let mirrored = BinaryImage::from_fn(w, h, |x, y| block.get(w - 1 - x, y));
            prop_assert_eq!(directional_runs(&mirrored).unwrap().0[1], runs[3]);
        }
    }
}
