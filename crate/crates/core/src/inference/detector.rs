//! Parametric detectors standing in for trained networks.
//!
//! Every ground-truth object gets its own substream `detect/[frame, row, col,
//! i]` and false positives use `detect-fp/[frame, row, col]` for the count
//! and `detect-fp/[frame, row, col, j + 1]` for the j-th box. Two profiles run
//! on the same tile therefore see the same uniforms: an object missed by a
//! strong profile is also missed by a weaker one, and identical profiles give
//! identical detections.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::FieldError;
use crate::imaging::{BBox, Tile};
use crate::rng::{RngStreams, DETECT, DETECT_FP};

/// False-positive boxes have sides drawn from this range, clamped to the tile.
pub const FP_BOX_PX: (f64, f64) = (16.0, 96.0);

/// Beta-distributed score on [0, 1]. `beta == 0` is a point mass at 1 and
/// `alpha == 0` a point mass at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreDist {
    pub alpha: f64,
    pub beta: f64,
}

impl ScoreDist {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    pub fn point_mass_at_one() -> Self {
        Self { alpha: 1.0, beta: 0.0 }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.beta == 0.0 {
            1.0
        } else if self.alpha == 0.0 {
            0.0
        } else {
            Beta::new(self.alpha, self.beta)
                .expect("validated shape parameters")
                .sample(rng)
        }
    }

    pub fn mean(&self) -> f64 {
        if self.beta == 0.0 {
            1.0
        } else {
            self.alpha / (self.alpha + self.beta)
        }
    }

    fn violations(&self, prefix: &str) -> Vec<FieldError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if ok(self.alpha) && ok(self.beta) && (self.alpha > 0.0 || self.beta > 0.0) {
            vec![]
        } else {
            vec![FieldError::new(prefix, "alpha and beta must be >= 0 and not both 0")]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorProfile {
    pub name: String,
    /// Detection probability per class; its length is the class count.
    pub recall: Vec<f64>,
    /// Mean false positives per tile.
    pub fp_rate: f64,
    /// Standard deviation of each box-corner jitter, px.
    pub loc_noise_px: f64,
    pub conf_tp: ScoreDist,
    pub conf_fp: ScoreDist,
    #[serde(default)]
    pub latency_s_per_tile: f64,
    #[serde(default)]
    pub energy_j_per_tile: f64,
}

impl DetectorProfile {
    pub fn recall_for(&self, class_id: u32) -> f64 {
        self.recall.get(class_id as usize).copied().unwrap_or(0.0)
    }

    pub fn num_classes(&self) -> u32 {
        self.recall.len() as u32
    }

    pub fn violations(&self, prefix: &str, num_classes: u32) -> Vec<FieldError> {
        let mut v = Vec::new();
        if self.recall.len() != num_classes as usize {
            v.push(FieldError::new(
                format!("{prefix}.recall"),
                format!("needs one entry per class ({num_classes}), got {}", self.recall.len()),
            ));
        }
        if self.recall.iter().any(|r| !(0.0..=1.0).contains(r)) {
            v.push(FieldError::new(format!("{prefix}.recall"), "entries must be in [0, 1]"));
        }
        for (name, x) in [
            ("fp_rate", self.fp_rate),
            ("loc_noise_px", self.loc_noise_px),
            ("latency_s_per_tile", self.latency_s_per_tile),
            ("energy_j_per_tile", self.energy_j_per_tile),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                v.push(FieldError::new(
                    format!("{prefix}.{name}"),
                    format!("must be >= 0, got {x}"),
                ));
            }
        }
        v.extend(self.conf_tp.violations(&format!("{prefix}.conf_tp")));
        v.extend(self.conf_fp.violations(&format!("{prefix}.conf_fp")));
        v
    }

    /// Reasonable stand-in for a full-size detector on the ground.
    pub fn ground_default(num_classes: u32) -> Self {
        Self {
            name: "ground-large".into(),
            recall: vec![0.92; num_classes as usize],
            fp_rate: 0.15,
            loc_noise_px: 1.5,
            conf_tp: ScoreDist::new(8.0, 2.0),
            conf_fp: ScoreDist::new(2.0, 5.0),
            latency_s_per_tile: 0.05,
            energy_j_per_tile: 0.0,
        }
    }

    /// Starting point for the lightweight onboard detector before calibration.
    pub fn onboard_default(num_classes: u32) -> Self {
        Self {
            name: "onboard-tiny".into(),
            recall: vec![0.6; num_classes as usize],
            fp_rate: 0.6,
            loc_noise_px: 3.0,
            conf_tp: ScoreDist::new(3.0, 2.0),
            conf_fp: ScoreDist::new(2.0, 3.0),
            latency_s_per_tile: 0.5,
            energy_j_per_tile: 4.39,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub class_id: u32,
    pub score: f64,
}

/// Run `profile` on `tile`, drawing from the tile's substreams of `streams`.
pub fn detect(profile: &DetectorProfile, tile: &Tile, streams: &RngStreams) -> Vec<Detection> {
    let [f, r, c] = tile.id.stream_index();
    let (w, h) = (tile.rect.width as f64, tile.rect.height as f64);
    let mut out = Vec::new();

    for (i, obj) in tile.objects.iter().enumerate() {
        let mut rng = streams.stream(DETECT, &[f, r, c, i as u64]);
        let u: f64 = rng.random();
        if u >= profile.recall_for(obj.class_id) {
            continue;
        }
        let mut jitter = [0.0f64; 4];
        for j in &mut jitter {
            let z: f64 = StandardNormal.sample(&mut rng);
            *j = z * profile.loc_noise_px;
        }
        let bbox = clamp_box(
            BBox::new(
                obj.bbox.x_min + jitter[0],
                obj.bbox.y_min + jitter[1],
                obj.bbox.x_max + jitter[2],
                obj.bbox.y_max + jitter[3],
            ),
            w,
            h,
        );
        out.push(Detection {
            bbox,
            class_id: obj.class_id,
            score: profile.conf_tp.sample(&mut rng),
        });
    }

    let num_classes = profile.num_classes();
    let mut count_rng = streams.stream(DETECT_FP, &[f, r, c]);
    let count = if num_classes == 0 {
        0
    } else {
        poisson_inverse(profile.fp_rate, count_rng.random())
    };
    for j in 0..count {
        let mut rng = streams.stream(DETECT_FP, &[f, r, c, j + 1]);
        let class_id = rng.random_range(0..num_classes);
        let bw = rng.random_range(FP_BOX_PX.0..=FP_BOX_PX.1).min(w);
        let bh = rng.random_range(FP_BOX_PX.0..=FP_BOX_PX.1).min(h);
        let x = rng.random::<f64>() * (w - bw);
        let y = rng.random::<f64>() * (h - bh);
        out.push(Detection {
            bbox: BBox::new(x, y, x + bw, y + bh),
            class_id,
            score: profile.conf_fp.sample(&mut rng),
        });
    }
    out
}

/// Clamp to the tile and keep at least a 1 px extent.
fn clamp_box(b: BBox, w: f64, h: f64) -> BBox {
    let (x0, x1) = clamp_span(b.x_min, b.x_max, w);
    let (y0, y1) = clamp_span(b.y_min, b.y_max, h);
    BBox::new(x0, y0, x1, y1)
}

fn clamp_span(lo: f64, hi: f64, limit: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (lo.min(hi).clamp(0.0, limit), lo.max(hi).clamp(0.0, limit));
    let min_extent = 1.0f64.min(limit);
    if hi - lo < min_extent {
        let mid = (0.5 * (lo + hi)).clamp(min_extent / 2.0, limit - min_extent / 2.0);
        lo = mid - min_extent / 2.0;
        hi = mid + min_extent / 2.0;
    }
    (lo, hi)
}

/// Poisson(mean) quantile at `u`, monotone in both arguments.
pub fn poisson_inverse(mean: f64, u: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u > cdf && k < 10_000 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        if p == 0.0 && cdf < u {
            break;
        }
    }
    k
}
