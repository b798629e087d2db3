//! Synthetic test images.
//!
//! `four_bumps`: Gaussian bumps that differ pairwise in height, width and
//! integrated mass, so ranking maxima by altitude and by volume picks
//! different pairs. `two_ridges`: a horizontal ridge interrupted by a gap,
//! a stand-in for a broken filament.
//!
//! Noise is additive, uniform in `[-noise/2, noise/2]`, drawn from a
//! ChaCha8 stream seeded by `seed`, so images are bit-reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Connectivity, Grid};
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub cx: f64,
    pub cy: f64,
    pub sigma: f64,
    pub amplitude: f64,
}

impl Bump {
    /// Integral of the bump over the plane.
    pub fn mass(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.amplitude * self.sigma * self.sigma
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let d2 = (x - self.cx).powi(2) + (y - self.cy).powi(2);
        self.amplitude * (-d2 / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Generator description, as found in run configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum SynthSpec {
    FourBumps {
        #[serde(default = "default_bumps_width")]
        width: usize,
        #[serde(default = "default_bumps_height")]
        height: usize,
        #[serde(default = "default_bumps")]
        bumps: Vec<Bump>,
        #[serde(default = "default_noise")]
        noise: f64,
        #[serde(default)]
        seed: u64,
    },
    TwoRidges {
        #[serde(default = "default_ridges_width")]
        width: usize,
        #[serde(default = "default_ridges_height")]
        height: usize,
        /// First column of the gap.
        #[serde(default = "default_gap_start")]
        gap_start: usize,
        #[serde(default = "default_gap_width")]
        gap_width: usize,
        /// Heights of the left and right ridge segments.
        #[serde(default = "default_ridge_heights")]
        heights: [f64; 2],
        /// Cross-section standard deviation.
        #[serde(default = "default_ridge_sigma")]
        sigma: f64,
        #[serde(default)]
        noise: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_bumps_width() -> usize {
    64
}
fn default_bumps_height() -> usize {
    64
}
fn default_noise() -> f64 {
    0.02
}
fn default_ridges_width() -> usize {
    48
}
fn default_ridges_height() -> usize {
    24
}
fn default_gap_start() -> usize {
    21
}
fn default_gap_width() -> usize {
    6
}
fn default_ridge_heights() -> [f64; 2] {
    [1.0, 0.8]
}
fn default_ridge_sigma() -> f64 {
    1.5
}

/// Default bumps for a 64x64 image. Sorted by height: 0, 1, 2, 3; sorted by
/// mass: 3, 2, 1, 0.
pub fn default_bumps() -> Vec<Bump> {
    vec![
        Bump {
            cx: 15.0,
            cy: 15.0,
            sigma: 3.0,
            amplitude: 0.9,
        },
        Bump {
            cx: 48.0,
            cy: 14.0,
            sigma: 3.5,
            amplitude: 0.75,
        },
        Bump {
            cx: 15.0,
            cy: 47.0,
            sigma: 6.0,
            amplitude: 0.5,
        },
        Bump {
            cx: 46.0,
            cy: 46.0,
            sigma: 7.5,
            amplitude: 0.4,
        },
    ]
}

impl SynthSpec {
    pub fn four_bumps_default(noise: f64, seed: u64) -> Self {
        SynthSpec::FourBumps {
            width: default_bumps_width(),
            height: default_bumps_height(),
            bumps: default_bumps(),
            noise,
            seed,
        }
    }

    pub fn two_ridges_default(noise: f64, seed: u64) -> Self {
        SynthSpec::TwoRidges {
            width: default_ridges_width(),
            height: default_ridges_height(),
            gap_start: default_gap_start(),
            gap_width: default_gap_width(),
            heights: default_ridge_heights(),
            sigma: default_ridge_sigma(),
            noise,
            seed,
        }
    }

    pub fn generate(&self) -> Result<Image<f64>> {
        match self {
            SynthSpec::FourBumps {
                width,
                height,
                bumps,
                noise,
                seed,
            } => four_bumps(*width, *height, bumps, *noise, *seed),
            SynthSpec::TwoRidges {
                width,
                height,
                gap_start,
                gap_width,
                heights,
                sigma,
                noise,
                seed,
            } => two_ridges(
                *width, *height, *gap_start, *gap_width, *heights, *sigma, *noise, *seed,
            ),
        }
    }
}

fn add_noise(values: &mut [f64], noise: f64, seed: u64) {
    if noise == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in values {
        *v += noise * (rng.gen::<f64>() - 0.5);
    }
}

pub fn four_bumps(
    width: usize,
    height: usize,
    bumps: &[Bump],
    noise: f64,
    seed: u64,
) -> Result<Image<f64>> {
    let grid = Grid::new(width, height, Connectivity::Conn8)?;
    let mut values: Vec<f64> = (0..grid.len())
        .map(|i| {
            let (x, y) = grid.coords(i);
            bumps.iter().map(|b| b.at(x as f64, y as f64)).sum()
        })
        .collect();
    add_noise(&mut values, noise, seed);
    Image::new(values, grid)
}

/// Pixel positions of the two ridge crests, one per segment, at the segment
/// midpoints.
pub fn ridge_tops(width: usize, height: usize, gap_start: usize, gap_width: usize) -> [usize; 2] {
    let row = height / 2;
    let left = gap_start.div_ceil(2);
    let right = (gap_start + gap_width + width - 1) / 2;
    [row * width + left, row * width + right]
}

#[allow(clippy::too_many_arguments)]
pub fn two_ridges(
    width: usize,
    height: usize,
    gap_start: usize,
    gap_width: usize,
    heights: [f64; 2],
    sigma: f64,
    noise: f64,
    seed: u64,
) -> Result<Image<f64>> {
    let grid = Grid::new(width, height, Connectivity::Conn8)?;
    let row = (height / 2) as f64;
    let gap_end = gap_start + gap_width;
    let mut values: Vec<f64> = (0..grid.len())
        .map(|i| {
            let (x, y) = grid.coords(i);
            // ridges stop one pixel short of the border
            let amp = if x == 0 || x + 1 == width || (gap_start..gap_end).contains(&x) {
                0.0
            } else if x < gap_start {
                heights[0]
            } else {
                heights[1]
            };
            amp * (-(y as f64 - row).powi(2) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    add_noise(&mut values, noise, seed);
    Image::new(values, grid)
}
