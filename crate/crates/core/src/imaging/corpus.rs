//! Synthetic stand-in for an aerial object-detection corpus.
//!
//! Each frame is a grid of `tile_px` cells. A cell is redundant with
//! probability `redundant_fraction`; a redundant cell is cloud-covered with
//! probability `cloudy_share` and otherwise clear but empty. Non-redundant
//! cells are clear and hold a zero-truncated Poisson number of objects placed
//! entirely inside the cell.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{BBox, CloudField, GroundTruthObject, ImageFrame};
use crate::error::{check, FieldError, Result};
use crate::rng::{RngStreams, CORPUS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    pub num_frames: u32,
    pub frame_px: u32,
    pub tile_px: u32,
    pub bytes_per_px: u32,
    /// Target share of tiles that are cloud-covered or empty.
    pub redundant_fraction: f64,
    /// Share of redundant tiles that are redundant because of cloud.
    pub cloudy_share: f64,
    /// Mean of the (zero-truncated) Poisson object count.
    pub objects_per_nonredundant_tile: f64,
    pub num_classes: u32,
    /// Clear cells draw cover from U[0, clear_cloud_max).
    pub clear_cloud_max: f64,
    /// Cloudy cells draw cover from U[cloudy_cloud_min, 1).
    pub cloudy_cloud_min: f64,
    pub object_min_px: u32,
    pub object_max_px: u32,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self::dota_v1_like()
    }
}

impl CorpusSpec {
    /// Calibrated preset: nine in ten tiles redundant.
    pub fn dota_v1_like() -> Self {
        Self {
            num_frames: 640,
            frame_px: 4096,
            tile_px: 1024,
            bytes_per_px: 3,
            redundant_fraction: 0.9,
            cloudy_share: 0.7,
            objects_per_nonredundant_tile: 2.5,
            num_classes: 5,
            clear_cloud_max: 0.3,
            cloudy_cloud_min: 0.7,
            object_min_px: 16,
            object_max_px: 96,
        }
    }

    /// Calibrated preset: four in ten tiles redundant.
    pub fn dota_v2_like() -> Self {
        Self {
            redundant_fraction: 0.4,
            ..Self::dota_v1_like()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "dota_v1_like" => Some(Self::dota_v1_like()),
            "dota_v2_like" => Some(Self::dota_v2_like()),
            _ => None,
        }
    }

    pub fn tiles_per_frame(&self) -> u64 {
        let n = self.frame_px.div_ceil(self.tile_px.max(1)) as u64;
        n * n
    }

    pub fn violations(&self, prefix: &str) -> Vec<FieldError> {
        let mut v = Vec::new();
        let mut err = |field: &str, msg: String| v.push(FieldError::new(format!("{prefix}.{field}"), msg));
        if self.frame_px == 0 {
            err("frame_px", "must be > 0".into());
        }
        if self.tile_px == 0 || self.tile_px > self.frame_px {
            err("tile_px", format!("must be in [1, frame_px], got {}", self.tile_px));
        }
        if self.bytes_per_px == 0 {
            err("bytes_per_px", "must be > 0".into());
        }
        for (name, value) in [
            ("redundant_fraction", self.redundant_fraction),
            ("cloudy_share", self.cloudy_share),
        ] {
            if !(0.0..=1.0).contains(&value) {
                err(name, format!("must be in [0, 1], got {value}"));
            }
        }
        if !(self.objects_per_nonredundant_tile.is_finite() && self.objects_per_nonredundant_tile >= 0.0) {
            err("objects_per_nonredundant_tile", "must be >= 0".into());
        }
        if self.num_classes == 0 {
            err("num_classes", "must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.clear_cloud_max) {
            err("clear_cloud_max", "must be in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.cloudy_cloud_min) || self.cloudy_cloud_min < self.clear_cloud_max {
            err("cloudy_cloud_min", "must be in [clear_cloud_max, 1]".into());
        }
        if self.object_min_px == 0 || self.object_min_px > self.object_max_px {
            err("object_min_px", "must be in [1, object_max_px]".into());
        }
        if self.object_max_px > self.tile_px {
            err("object_max_px", "must not exceed tile_px".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        check(self.violations("corpus"))
    }
}

/// Generate frame `index` of the corpus; depends only on `(spec, seed, index)`.
pub fn generate_frame(spec: &CorpusSpec, streams: &RngStreams, index: u64, capture_s: f64) -> ImageFrame {
    let mut rng = streams.stream(CORPUS, &[index]);
    let size = spec.frame_px;
    let mut cloud = CloudField::uniform(size, size, spec.tile_px, 0.0);
    let mut objects = Vec::new();
    let poisson = (spec.objects_per_nonredundant_tile > 0.0)
        .then(|| Poisson::new(spec.objects_per_nonredundant_tile).expect("validated mean"));

    for row in 0..cloud.rows {
        for col in 0..cloud.cols {
            let x0 = col * spec.tile_px;
            let y0 = row * spec.tile_px;
            let cw = spec.tile_px.min(size - x0);
            let ch = spec.tile_px.min(size - y0);
            let idx = (row * cloud.cols + col) as usize;

            let redundant = rng.random::<f64>() < spec.redundant_fraction;
            let cloudy = rng.random::<f64>() < spec.cloudy_share;
            let cover = rng.random::<f64>();
            if redundant && cloudy {
                cloud.values[idx] = spec.cloudy_cloud_min + (1.0 - spec.cloudy_cloud_min) * cover;
                continue;
            }
            cloud.values[idx] = spec.clear_cloud_max * cover;
            if redundant {
                continue;
            }
            let count = match &poisson {
                Some(p) => loop {
                    let k = p.sample(&mut rng) as u32;
                    if k >= 1 {
                        break k;
                    }
                },
                None => 1,
            };
            let max_w = spec.object_max_px.min(cw);
            let max_h = spec.object_max_px.min(ch);
            let min_w = spec.object_min_px.min(max_w);
            let min_h = spec.object_min_px.min(max_h);
            for _ in 0..count {
                let w = rng.random_range(min_w..=max_w);
                let h = rng.random_range(min_h..=max_h);
                let x = x0 + rng.random_range(0..=cw - w);
                let y = y0 + rng.random_range(0..=ch - h);
                objects.push(GroundTruthObject {
                    bbox: BBox::new(x as f64, y as f64, (x + w) as f64, (y + h) as f64),
                    class_id: rng.random_range(0..spec.num_classes),
                });
            }
        }
    }

    let cloud_fraction = cloud.cover(
        &super::PixelRect {
            x: 0,
            y: 0,
            width: size,
            height: size,
        },
        size,
        size,
    );
    ImageFrame {
        id: index,
        width_px: size,
        height_px: size,
        bytes_per_px: spec.bytes_per_px,
        capture_s,
        cloud_fraction,
        cloud,
        objects,
    }
}

/// Generate `spec.num_frames` frames with capture times 0, 1, 2, ... s.
pub fn generate_corpus(spec: &CorpusSpec, seed: u64) -> Result<Vec<ImageFrame>> {
    spec.validate()?;
    let streams = RngStreams::new(seed);
    Ok((0..spec.num_frames as u64)
        .map(|i| generate_frame(spec, &streams, i, i as f64))
        .collect())
}
