//! Confidence-gated routing: ship compact results when the onboard detector
//! is confident, otherwise ship the tile for ground re-detection.

use serde::{Deserialize, Serialize};

use super::Detection;
use crate::error::FieldError;
use crate::imaging::Tile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingPolicy {
    /// τ: results are sent when the tile confidence is at least this.
    pub confidence_threshold: f64,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default = "default_header")]
    pub result_header_bytes: u64,
    #[serde(default = "default_per_det")]
    pub result_bytes_per_det: u64,
    #[serde(default = "default_cap")]
    pub result_cap_bytes: u64,
}

fn default_header() -> u64 {
    256
}
fn default_per_det() -> u64 {
    64
}
fn default_cap() -> u64 {
    64 * 1024
}

impl RoutingPolicy {
    pub fn with_threshold(confidence_threshold: f64) -> Self {
        Self {
            confidence_threshold,
            aggregation: Aggregation::Max,
            result_header_bytes: default_header(),
            result_bytes_per_det: default_per_det(),
            result_cap_bytes: default_cap(),
        }
    }

    pub fn violations(&self, prefix: &str) -> Vec<FieldError> {
        let mut v = Vec::new();
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            v.push(FieldError::new(
                format!("{prefix}.confidence_threshold"),
                format!("must be in [0, 1], got {}", self.confidence_threshold),
            ));
        }
        if self.result_header_bytes == 0 {
            v.push(FieldError::new(format!("{prefix}.result_header_bytes"), "must be > 0"));
        }
        if self.result_cap_bytes < self.result_header_bytes + self.result_bytes_per_det {
            v.push(FieldError::new(
                format!("{prefix}.result_cap_bytes"),
                "must fit the header and at least one detection",
            ));
        }
        v
    }

    /// Most detections a single result message can carry.
    pub fn max_detections(&self) -> usize {
        match self.result_bytes_per_det {
            0 => usize::MAX,
            per => ((self.result_cap_bytes.saturating_sub(self.result_header_bytes)) / per) as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "route")]
pub enum RouteDecision {
    /// Serialized detections; `detections` counts those that fit the cap
    /// (highest scores first).
    SendResults {
        payload_bytes: u64,
        detections: usize,
    },
    SendImage {
        payload_bytes: u64,
    },
}

impl RouteDecision {
    pub fn payload_bytes(&self) -> u64 {
        match *self {
            RouteDecision::SendResults { payload_bytes, .. } | RouteDecision::SendImage { payload_bytes } => {
                payload_bytes
            }
        }
    }

    pub fn is_offload(&self) -> bool {
        matches!(self, RouteDecision::SendImage { .. })
    }
}

pub fn tile_confidence(dets: &[Detection], policy: &RoutingPolicy) -> f64 {
    if dets.is_empty() {
        return 0.0;
    }
    match policy.aggregation {
        Aggregation::Max => dets.iter().map(|d| d.score).fold(0.0, f64::max),
        Aggregation::Mean => dets.iter().map(|d| d.score).sum::<f64>() / dets.len() as f64,
    }
}

pub fn route(tile: &Tile, dets: &[Detection], policy: &RoutingPolicy) -> RouteDecision {
    if tile_confidence(dets, policy) >= policy.confidence_threshold {
        let n = dets.len().min(policy.max_detections());
        RouteDecision::SendResults {
            payload_bytes: policy.result_header_bytes + policy.result_bytes_per_det * n as u64,
            detections: n,
        }
    } else {
        RouteDecision::SendImage {
            payload_bytes: tile.payload_bytes,
        }
    }
}

/// Detections that travel in a result message: the `n` highest scores, ties
/// kept in input order.
pub fn truncate_to_message(dets: &[Detection], n: usize) -> Vec<Detection> {
    if n >= dets.len() {
        return dets.to_vec();
    }
    let mut idx: Vec<usize> = (0..dets.len()).collect();
    idx.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    idx.truncate(n);
    idx.sort_unstable();
    idx.into_iter().map(|i| dets[i]).collect()
}
