use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Image};

/// Per-view random transforms: shifted crop from an edge-padded canvas,
/// horizontal flip, and a small nearest-neighbour rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentPolicy {
    pub flip_prob: f32,
    pub crop_pad: usize,
    pub rotation_max: f32,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self::identity()
    }
}

impl AugmentPolicy {
    pub fn identity() -> Self {
        Self {
            flip_prob: 0.0,
            crop_pad: 0,
            rotation_max: 0.0,
        }
    }

    pub fn flip_only() -> Self {
        Self {
            flip_prob: 0.5,
            ..Self::identity()
        }
    }

    /// Crop, flip and rotation together.
    pub fn full() -> Self {
        Self {
            flip_prob: 0.5,
            crop_pad: 2,
            rotation_max: 10.0,
        }
    }

    pub fn validate(&self, height: usize, width: usize) -> Result<(), DataError> {
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(DataError::Config(format!("flip_prob {} not in [0, 1]", self.flip_prob)));
        }
        if 2 * self.crop_pad >= height.min(width) {
            return Err(DataError::Config(format!(
                "crop_pad {} must be below half the smaller image side",
                self.crop_pad
            )));
        }
        if !(self.rotation_max >= 0.0 && self.rotation_max.is_finite()) {
            return Err(DataError::Config("rotation_max must be finite and non-negative".into()));
        }
        Ok(())
    }
}

fn clamp_index(v: i64, n: usize) -> usize {
    v.clamp(0, n as i64 - 1) as usize
}

/// Applies `policy` to one image. Transforms with zero strength draw no
/// random numbers and leave pixels untouched.
pub fn augment<R: Rng + ?Sized>(image: &Image, policy: &AugmentPolicy, rng: &mut R) -> Image {
    let (h, w) = (image.height, image.width);
    let mut out = image.clone();

    if policy.crop_pad > 0 {
        let span = 2 * policy.crop_pad as i64;
        let dy = rng.random_range(0..=span) - policy.crop_pad as i64;
        let dx = rng.random_range(0..=span) - policy.crop_pad as i64;
        let src = out.clone();
        for r in 0..h {
            for c in 0..w {
                out.pixels[r * w + c] = src.at(clamp_index(r as i64 + dy, h), clamp_index(c as i64 + dx, w));
            }
        }
    }

    if policy.flip_prob > 0.0 && rng.random::<f32>() < policy.flip_prob {
        for row in out.pixels.chunks_mut(w) {
            row.reverse();
        }
    }

    if policy.rotation_max > 0.0 {
        let deg = rng.random_range(-policy.rotation_max..=policy.rotation_max);
        let (s, co) = deg.to_radians().sin_cos();
        let (cy, cx) = ((h as f32 - 1.0) / 2.0, (w as f32 - 1.0) / 2.0);
        let src = out.clone();
        for r in 0..h {
            for c in 0..w {
                let (y, x) = (r as f32 - cy, c as f32 - cx);
                let sy = co * y - s * x + cy;
                let sx = s * y + co * x + cx;
                out.pixels[r * w + c] = src.at(clamp_index(sy.round() as i64, h), clamp_index(sx.round() as i64, w));
            }
        }
    }

    out.pixels.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
    out
}
