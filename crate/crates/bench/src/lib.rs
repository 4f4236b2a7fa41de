//! Inputs shared by the benchmarks.

use blockface::GrayImage;

/// A 92x112 face-like test card: light field, two dark disks and a bar,
/// with a deterministic speckle so textures are not flat.
pub fn test_face() -> GrayImage {
    GrayImage::from_fn(92, 112, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let disk = |cx: f64, cy: f64| (fx - cx).powi(2) + (fy - cy).powi(2) <= 81.0;
        let dark = disk(28.0, 38.0) || disk(64.0, 38.0) || ((30..62).contains(&x) && (80..88).contains(&y));
        let speckle = ((x * 7 + y * 13) % 11) as u8;
        if dark {
            40 + speckle
        } else {
            190 + speckle
        }
    })
}
