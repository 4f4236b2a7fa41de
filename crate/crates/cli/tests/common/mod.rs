//! Synthetic face-like datasets: every subject is a fixed layout of dark
//! shapes on a light background; its images differ by a jitter of at most
//! one pixel and additive Gaussian noise.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use blockface::imaging::write_pgm;
use blockface::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const WIDTH: usize = 92;
pub const HEIGHT: usize = 112;
pub const NOISE_SIGMA: f64 = 4.0;

#[derive(Clone, Copy, Debug)]
enum Kind {
    Disk,
    Ring,
    Rect,
    Bar,
}

#[derive(Clone, Copy, Debug)]
struct Shape {
    kind: Kind,
    cx: f64,
    cy: f64,
    size: f64,
    tone: f64,
}

impl Shape {
    fn covers(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        match self.kind {
            Kind::Disk => dx * dx + dy * dy <= self.size * self.size,
            Kind::Ring => {
                let r = (dx * dx + dy * dy).sqrt();
                r <= self.size && r >= self.size - 3.0
            }
            Kind::Rect => dx.abs() <= self.size && dy.abs() <= self.size * 0.6,
            Kind::Bar => (dx - dy).abs() <= 2.5 && dx.abs() <= self.size,
        }
    }
}

pub struct Layout {
    shapes: Vec<Shape>,
    background: f64,
}

pub fn layout(subject: usize) -> Layout {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + subject as u64);
    let kinds = [Kind::Disk, Kind::Ring, Kind::Rect, Kind::Bar];
    let shapes = (0..5)
        .map(|i| Shape {
            kind: kinds[(subject + i) % kinds.len()],
            cx: rng.random_range(14.0..78.0),
            cy: rng.random_range(14.0..98.0),
            size: rng.random_range(6.0..12.0),
            tone: rng.random_range(20.0..110.0),
        })
        .collect();
    Layout {
        shapes,
        background: rng.random_range(170.0..225.0),
    }
}

pub fn render(layout: &Layout, jitter: (i32, i32), noise_seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let noise = Normal::new(0.0, NOISE_SIGMA).unwrap();
    GrayImage::from_fn(WIDTH, HEIGHT, |x, y| {
        let (fx, fy) = ((x as i32 - jitter.0) as f64, (y as i32 - jitter.1) as f64);
        let base = layout
            .shapes
            .iter()
            .rev()
            .find(|s| s.covers(fx, fy))
            .map_or(layout.background, |s| s.tone);
        (base + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8
    })
}

/// Writes `root/sNN/NN.pgm` and returns `root`.
pub fn write_dataset(root: &Path, subjects: usize, per_subject: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..subjects {
        let l = layout(s);
        let dir = root.join(format!("s{:02}", s + 1));
        fs::create_dir_all(&dir).unwrap();
        for i in 0..per_subject {
            let jitter = (rng.random_range(-1..=1), rng.random_range(-1..=1));
            let img = render(&l, jitter, rng.random());
            write_pgm(dir.join(format!("{:02}.pgm", i + 1)), &img).unwrap();
        }
    }
    root.to_path_buf()
}

pub fn blockface() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_blockface"));
    cmd.env_remove("BLOCKFACE_SEED");
    cmd
}
