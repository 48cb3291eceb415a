//! Spatial-difference encoding of still grayscale frames into ternary
//! event tensors.
//!
//! Each output channel compares a pixel against the mean of a fixed set of
//! neighbor offsets: +1 where the pixel sits above the mean by more than
//! the positive threshold, -1 where it sits below by more than the negative
//! threshold, 0 otherwise. Out-of-frame neighbors replicate the nearest
//! edge pixel. The mean is never rounded; comparisons multiply through by
//! the neighbor count, so `diff > threshold` is evaluated exactly as
//! `center * n - sum > threshold * n`.

use crate::error::{Error, Result};
use crate::tensor::{Shape, TernaryTensor};

/// Grayscale frame with intensities in 0..=255, row-major.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GrayFrame {
    pub height: usize,
    pub width: usize,
    pixels: Vec<u8>,
}

impl GrayFrame {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::shape(format!(
                "frame {height}x{width} wants {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        Ok(GrayFrame { height, width, pixels })
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.pixels[r * self.width + c]
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Neighbor lookup with edge replication.
    fn get_clamped(&self, r: isize, c: isize) -> u8 {
        let r = r.clamp(0, self.height as isize - 1) as usize;
        let c = c.clamp(0, self.width as isize - 1) as usize;
        self.get(r, c)
    }
}

/// ITU-R BT.601 luminance, rounded to the nearest integer.
pub fn rgb_to_gray(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((weighted + 500) / 1000) as u8
}

/// One spatial-difference encoder configuration: the neighbor offsets of
/// every output channel plus the firing thresholds.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DvsConfig {
    /// Catalog number, 1-based.
    pub id: u8,
    /// Per-channel neighbor offsets as (row, col) deltas.
    pub channel_patterns: Vec<Vec<(i8, i8)>>,
    /// Fires +1 when the pixel exceeds the neighbor mean by more than this.
    pub pos_threshold: i32,
    /// Fires -1 when the pixel falls below the neighbor mean by more than
    /// this (the value itself is negative).
    pub neg_threshold: i32,
}

impl DvsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.neg_threshold < 0 && 0 < self.pos_threshold) {
            return Err(Error::config(format!(
                "thresholds must straddle zero, got ({}, {})",
                self.pos_threshold, self.neg_threshold
            )));
        }
        if self.channel_patterns.is_empty() {
            return Err(Error::config("encoder needs at least one channel".to_string()));
        }
        for (k, pattern) in self.channel_patterns.iter().enumerate() {
            if pattern.is_empty() {
                return Err(Error::config(format!("channel {k} has no neighbor offsets")));
            }
            if pattern.iter().any(|&(dr, dc)| dr == 0 && dc == 0) {
                return Err(Error::config(format!(
                    "channel {k} lists the center pixel as its own neighbor"
                )));
            }
        }
        Ok(())
    }

    pub fn with_thresholds(mut self, pos: i32, neg: i32) -> Self {
        self.pos_threshold = pos;
        self.neg_threshold = neg;
        self
    }
}

/// Placeholder thresholds for catalog entries; real runs calibrate them
/// against a target density instead.
const DEFAULT_THRESHOLD: i32 = 16;

/// The five built-in neighbor geometries. Entry #5 pairs the two image
/// diagonals, one per channel; #1 is the strongest single-channel layout.
pub fn config_catalog() -> Vec<DvsConfig> {
    let patterns: [Vec<Vec<(i8, i8)>>; 5] = [
        // #1: one channel watching all four diagonal neighbors.
        vec![vec![(-1, -1), (-1, 1), (1, -1), (1, 1)]],
        // #2: horizontal pair and vertical pair.
        vec![vec![(0, -1), (0, 1)], vec![(-1, 0), (1, 0)]],
        // #3: leading (up, left) pair and trailing (down, right) pair.
        vec![vec![(-1, 0), (0, -1)], vec![(1, 0), (0, 1)]],
        // #4: plus-shaped ring and diagonal ring.
        vec![
            vec![(0, -1), (0, 1), (-1, 0), (1, 0)],
            vec![(-1, -1), (-1, 1), (1, -1), (1, 1)],
        ],
        // #5: main diagonal and anti-diagonal, one channel each.
        vec![vec![(-1, -1), (1, 1)], vec![(-1, 1), (1, -1)]],
    ];
    patterns
        .into_iter()
        .enumerate()
        .map(|(i, channel_patterns)| DvsConfig {
            id: (i + 1) as u8,
            channel_patterns,
            pos_threshold: DEFAULT_THRESHOLD,
            neg_threshold: -DEFAULT_THRESHOLD,
        })
        .collect()
}

/// Looks up catalog entry `id` (1-based).
pub fn catalog_config(id: u8) -> Result<DvsConfig> {
    config_catalog()
        .into_iter()
        .find(|c| c.id == id)
        .ok_or_else(|| Error::config(format!("no encoder configuration #{id} in the catalog")))
}

/// Encodes one frame into a ternary tensor with one channel per pattern.
pub fn encode_frame(frame: &GrayFrame, cfg: &DvsConfig) -> Result<TernaryTensor> {
    cfg.validate()?;
    let shape = Shape::new(frame.height, frame.width, cfg.channel_patterns.len());
    let mut out = TernaryTensor::zeros(shape);
    for r in 0..frame.height {
        for c in 0..frame.width {
            let center = frame.get(r, c) as i64;
            for (k, pattern) in cfg.channel_patterns.iter().enumerate() {
                let n = pattern.len() as i64;
                let sum: i64 = pattern
                    .iter()
                    .map(|&(dr, dc)| frame.get_clamped(r as isize + dr as isize, c as isize + dc as isize) as i64)
                    .sum();
                let diff = center * n - sum;
                let v = if diff > cfg.pos_threshold as i64 * n {
                    1
                } else if diff < cfg.neg_threshold as i64 * n {
                    -1
                } else {
                    0
                };
                out.set(r, c, k, v);
            }
        }
    }
    Ok(out)
}

/// Per-frame histogram of the largest symmetric threshold each element
/// still fires at. `hist[t]` counts elements with that maximum equal to
/// `t`; elements with a zero difference never fire and are not counted.
fn firing_histogram(frame: &GrayFrame, patterns: &[Vec<(i8, i8)>]) -> (Vec<u64>, u64) {
    let mut hist = vec![0u64; 256];
    let mut elems = 0u64;
    for r in 0..frame.height {
        for c in 0..frame.width {
            let center = frame.get(r, c) as i64;
            for pattern in patterns {
                elems += 1;
                let n = pattern.len() as i64;
                let sum: i64 = pattern
                    .iter()
                    .map(|&(dr, dc)| frame.get_clamped(r as isize + dr as isize, c as isize + dc as isize) as i64)
                    .sum();
                let mag = (center * n - sum).abs();
                if mag == 0 {
                    continue;
                }
                // Fires at threshold t exactly when mag > t * n, so the
                // largest firing t is ceil(mag / n) - 1.
                let tmax = ((mag - 1) / n).min(255);
                hist[tmax as usize] += 1;
            }
        }
    }
    (hist, elems)
}

/// Picks symmetric thresholds (t, -t) whose mean non-zero density over the
/// frames comes closest to `target_density`, scanning every integer t.
/// Fails when even the best choice misses the target by more than 0.01.
pub fn calibrate_thresholds(
    frames: &[GrayFrame],
    patterns: &[Vec<(i8, i8)>],
    target_density: f64,
) -> Result<(i32, i32)> {
    if frames.is_empty() {
        return Err(Error::Calibration("no frames to calibrate against".to_string()));
    }
    if !(0.0..=1.0).contains(&target_density) {
        return Err(Error::Calibration(format!(
            "target density {target_density} outside [0, 1]"
        )));
    }
    // densities[t] = mean over frames of the firing fraction at threshold
    // t + 1 (thresholds start at 1 because they must be strictly positive).
    let mut densities = vec![0.0f64; 256];
    for frame in frames {
        let (hist, elems) = firing_histogram(frame, patterns);
        if elems == 0 {
            return Err(Error::Calibration("frame with no elements".to_string()));
        }
        let mut firing: u64 = hist.iter().skip(1).sum();
        for t in 1..=255usize {
            densities[t] += firing as f64 / elems as f64;
            firing -= hist.get(t + 1).copied().unwrap_or(0).min(firing);
        }
    }
    for d in &mut densities {
        *d /= frames.len() as f64;
    }
    let (mut best_t, mut best_err) = (1usize, f64::INFINITY);
    for t in 1..=255usize {
        let err = (densities[t] - target_density).abs();
        if err < best_err {
            best_t = t;
            best_err = err;
        }
    }
    if best_err > 0.01 {
        return Err(Error::Calibration(format!(
            "target density {target_density:.3} unreachable; best threshold {best_t} \
             gives {:.3}",
            densities[best_t]
        )));
    }
    Ok((best_t as i32, -(best_t as i32)))
}
