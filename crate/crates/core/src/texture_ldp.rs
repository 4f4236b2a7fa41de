//! Local Directional Pattern: eight Kirsch edge responses per pixel, the
//! three strongest by magnitude set as code bits, and a 56-bin histogram of
//! codes over a block's interior.

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// Kirsch masks in direction order East, North-East, North, North-West,
/// West, South-West, South, South-East. Bit `j` of an LDP code refers to
/// mask `j`.
#[rustfmt::skip]
pub const KIRSCH_MASKS: [[i32; 9]; 8] = [
    [-3, -3,  5,  -3,  0,  5,  -3, -3,  5],
    [-3,  5,  5,  -3,  0,  5,  -3, -3, -3],
    [ 5,  5,  5,  -3,  0, -3,  -3, -3, -3],
    [ 5,  5, -3,   5,  0, -3,  -3, -3, -3],
    [ 5, -3, -3,   5,  0, -3,   5, -3, -3],
    [-3, -3, -3,   5,  0, -3,   5,  5, -3],
    [-3, -3, -3,  -3,  0, -3,   5,  5,  5],
    [-3, -3, -3,  -3,  0,  5,  -3,  5,  5],
];

/// The 56 legal codes (exactly three bits set), ascending. Histogram bin `i`
/// counts code `LDP_CODES[i]`.
pub const LDP_CODES: [u8; 56] = [
    7, 11, 13, 14, 19, 21, 22, 25, 26, 28, 35, 37, 38, 41, 42, 44, 49, 50, 52, 56, 67, 69, 70, 73, 74, 76, 81, 82, 84,
    88, 97, 98, 100, 104, 112, 131, 133, 134, 137, 138, 140, 145, 146, 148, 152, 161, 162, 164, 168, 176, 193, 194,
    196, 200, 208, 224,
];

pub const LDP_BINS: usize = LDP_CODES.len();

/// Only `k = 3` is supported.
pub const LDP_K: usize = 3;

const NO_BIN: u8 = u8::MAX;

const CODE_TO_BIN: [u8; 256] = {
    let mut table = [NO_BIN; 256];
    let mut i = 0;
    while i < LDP_CODES.len() {
        table[LDP_CODES[i] as usize] = i as u8;
        i += 1;
    }
    table
};

/// Histogram bin of a code, if the code is legal.
pub fn code_bin(code: u8) -> Option<usize> {
    match CODE_TO_BIN[code as usize] {
        NO_BIN => None,
        b => Some(b as usize),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KirschResponses(pub [i32; 8]);

/// Applies the eight masks to a row-major 3x3 neighborhood.
pub fn kirsch_responses(n: &[u8; 9]) -> KirschResponses {
    let mut m = [0i32; 8];
    for (out, mask) in m.iter_mut().zip(&KIRSCH_MASKS) {
        *out = mask.iter().zip(n).map(|(&w, &p)| w * p as i32).sum();
    }
    KirschResponses(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LdpCode(u8);

impl LdpCode {
    pub fn value(self) -> u8 {
        self.0
    }

    pub fn bin(self) -> usize {
        CODE_TO_BIN[self.0 as usize] as usize
    }
}

/// Sets the bits of the `k` largest `|m_j|`; equal magnitudes prefer the
/// smaller direction index.
pub fn ldp_code(r: &KirschResponses, k: usize) -> Result<LdpCode> {
    if k != LDP_K {
        return Err(Error::invalid(format!("LDP k = {k} is not supported (only k = 3)")));
    }
    Ok(top3_code(&r.0))
}

#[inline]
fn top3_code(m: &[i32; 8]) -> LdpCode {
    let mut order = [0usize, 1, 2, 3, 4, 5, 6, 7];
    // Stable sort keeps ties in index order.
    order.sort_by_key(|&j| std::cmp::Reverse(m[j].unsigned_abs()));
    LdpCode((1u8 << order[0]) | (1u8 << order[1]) | (1u8 << order[2]))
}

/// Normalized code histogram over a block's interior.
#[derive(Clone, Debug, PartialEq)]
pub struct LdpHistogram {
    pub bins: [f64; LDP_BINS],
    /// Pixels whose full 3x3 window lies inside the block.
    pub interior: usize,
}

/// Per-pixel LDP codes for the interior of `img`, row-major, of size
/// `(w - 2) x (h - 2)`.
pub fn ldp_codes(img: &GrayImage) -> Result<Vec<LdpCode>> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::invalid(format!("LDP needs at least 3x3 pixels, got {w}x{h}")));
    }
    let mut codes = Vec::with_capacity((w - 2) * (h - 2));
    let data = img.data();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let top = (y - 1) * w + x - 1;
            let mid = top + w;
            let bot = mid + w;
            let n = [
                data[top],
                data[top + 1],
                data[top + 2],
                data[mid],
                data[mid + 1],
                data[mid + 2],
                data[bot],
                data[bot + 1],
                data[bot + 2],
            ];
            codes.push(top3_code(&kirsch_responses(&n).0));
        }
    }
    Ok(codes)
}

pub fn ldp_histogram(block: &GrayImage) -> Result<LdpHistogram> {
    let codes = ldp_codes(block)?;
    let mut counts = [0u32; LDP_BINS];
    for c in &codes {
        counts[c.bin()] += 1;
    }
    let total = codes.len() as f64;
    let mut bins = [0.0; LDP_BINS];
    for (b, &c) in bins.iter_mut().zip(&counts) {
        *b = c as f64 / total;
    }
    Ok(LdpHistogram {
        bins,
        interior: codes.len(),
    })
}
