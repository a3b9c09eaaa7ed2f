//! Onboard-only versus collaborative accuracy over a fixed set of tiles.
//!
//! Both variants use the same per-tile detections. Onboard-only ships every
//! tile's onboard results; the collaborative variant ships results for
//! confident tiles and replaces the rest with ground re-detections.

use serde::{Deserialize, Serialize};

use super::routing::truncate_to_message;
use super::{detect, evaluate_map, route, Detection, DetectorProfile, GtRecord, PredRecord, RoutingPolicy};
use crate::error::{Error, Result};
use crate::imaging::{Tile, TileId};
use crate::rng::RngStreams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyResult {
    pub onboard_only_map: f64,
    pub collaborative_map: f64,
    /// `None` when the onboard-only mAP is zero.
    pub relative_gain: Option<f64>,
    pub offload_fraction: f64,
    pub tiles: usize,
}

/// Tiles with their ground-truth records and cached ground detections.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub tiles: Vec<Tile>,
    pub streams: RngStreams,
    gt: Vec<GtRecord<TileId>>,
    ground: Vec<Vec<Detection>>,
}

impl EvalSet {
    pub fn new(tiles: Vec<Tile>, streams: RngStreams, ground: &DetectorProfile) -> Self {
        let gt = tiles
            .iter()
            .flat_map(|t| {
                t.objects.iter().map(move |o| GtRecord {
                    tile: t.id,
                    class_id: o.class_id,
                    bbox: o.bbox,
                })
            })
            .collect();
        let ground = tiles.iter().map(|t| detect(ground, t, &streams)).collect();
        Self {
            tiles,
            streams,
            gt,
            ground,
        }
    }

    pub fn ground_truth_count(&self) -> usize {
        self.gt.len()
    }

    pub fn onboard_detections(&self, onboard: &DetectorProfile) -> Vec<Vec<Detection>> {
        self.tiles.iter().map(|t| detect(onboard, t, &self.streams)).collect()
    }

    pub fn evaluate(
        &self,
        onboard: &DetectorProfile,
        policy: &RoutingPolicy,
        iou_threshold: f64,
    ) -> Result<AccuracyResult> {
        self.evaluate_detections(&self.onboard_detections(onboard), policy, iou_threshold)
    }

    pub fn evaluate_detections(
        &self,
        onboard: &[Vec<Detection>],
        policy: &RoutingPolicy,
        iou_threshold: f64,
    ) -> Result<AccuracyResult> {
        if self.gt.is_empty() {
            return Err(Error::NoGroundTruth);
        }
        let cap = policy.max_detections();
        let mut onboard_preds = Vec::new();
        let mut collab_preds = Vec::new();
        let mut offloaded = 0usize;
        for ((tile, on), ground) in self.tiles.iter().zip(onboard).zip(&self.ground) {
            let shipped = truncate_to_message(on, cap);
            let push = |out: &mut Vec<PredRecord<TileId>>, dets: &[Detection]| {
                out.extend(dets.iter().map(|d| PredRecord {
                    tile: tile.id,
                    class_id: d.class_id,
                    bbox: d.bbox,
                    score: d.score,
                }))
            };
            push(&mut onboard_preds, &shipped);
            if route(tile, on, policy).is_offload() {
                offloaded += 1;
                push(&mut collab_preds, ground);
            } else {
                push(&mut collab_preds, &shipped);
            }
        }
        let onboard_only_map = evaluate_map(&self.gt, &onboard_preds, iou_threshold)?.map;
        let collaborative_map = evaluate_map(&self.gt, &collab_preds, iou_threshold)?.map;
        Ok(AccuracyResult {
            onboard_only_map,
            collaborative_map,
            relative_gain: relative_gain(onboard_only_map, collaborative_map),
            offload_fraction: if self.tiles.is_empty() {
                0.0
            } else {
                offloaded as f64 / self.tiles.len() as f64
            },
            tiles: self.tiles.len(),
        })
    }
}

pub fn relative_gain(onboard_map: f64, collaborative_map: f64) -> Option<f64> {
    (onboard_map > 0.0).then(|| (collaborative_map - onboard_map) / onboard_map)
}
