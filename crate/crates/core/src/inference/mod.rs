//! Stochastic detector profiles, confidence-gated routing and mAP evaluation.

pub mod calibrate;
pub mod collab;
pub mod detector;
pub mod interchange;
pub mod map;
pub mod routing;

pub use collab::{AccuracyResult, EvalSet};
pub use detector::{detect, Detection, DetectorProfile, ScoreDist};
pub use map::{evaluate_map, iou, GtRecord, MapResult, PredRecord};
pub use routing::{route, tile_confidence, Aggregation, RouteDecision, RoutingPolicy};
