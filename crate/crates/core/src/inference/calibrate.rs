//! Fit an onboard profile to a target onboard-only mAP and collaborative gain.
//!
//! The ground profile is held fixed. The search adjusts two onboard knobs,
//! a recall scale applied to every class and the false-positive rate, by
//! coordinate descent on a grid whose step halves whenever no neighbour
//! improves. The objective is the squared error of both targets, each
//! normalised by its tolerance. Metrics are averaged over the groups of the
//! calibration set, each group being one independently seeded corpus.

use serde::{Deserialize, Serialize};

use super::{AccuracyResult, DetectorProfile, EvalSet, RoutingPolicy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub onboard_map: f64,
    pub gain: f64,
    #[serde(default = "default_map_tol")]
    pub map_tolerance: f64,
    #[serde(default = "default_gain_tol")]
    pub gain_tolerance: f64,
}

fn default_map_tol() -> f64 {
    0.02
}
fn default_gain_tol() -> f64 {
    0.03
}

impl CalibrationTargets {
    pub fn new(onboard_map: f64, gain: f64) -> Self {
        Self {
            onboard_map,
            gain,
            map_tolerance: default_map_tol(),
            gain_tolerance: default_gain_tol(),
        }
    }

    fn loss(&self, m: &Metrics) -> f64 {
        let a = (m.onboard_map - self.onboard_map) / self.map_tolerance;
        let b = (m.gain - self.gain) / self.gain_tolerance;
        a * a + b * b
    }

    fn met(&self, m: &Metrics) -> bool {
        (m.onboard_map - self.onboard_map).abs() <= self.map_tolerance
            && (m.gain - self.gain).abs() <= self.gain_tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_evaluations: usize,
    /// Keep refining after the tolerances are met until the loss falls below
    /// this value.
    pub refine_loss: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_evaluations: 200,
            refine_loss: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Metrics {
    onboard_map: f64,
    collaborative_map: f64,
    gain: f64,
    offload_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub onboard: DetectorProfile,
    pub ground: DetectorProfile,
    pub onboard_map: f64,
    pub collaborative_map: f64,
    pub gain: f64,
    pub offload_fraction: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Search recall scale in this range.
pub const RECALL_RANGE: (f64, f64) = (0.05, 1.0);
/// Search false-positive rate in this range.
pub const FP_RANGE: (f64, f64) = (0.0, 4.0);
const INITIAL_STEP: (f64, f64) = (0.1, 0.4);
const MIN_STEP_FRACTION: f64 = 1.0 / 256.0;

fn mean_metrics(groups: &[EvalSet], onboard: &DetectorProfile, policy: &RoutingPolicy, iou: f64) -> Result<Metrics> {
    if groups.is_empty() {
        return Err(Error::invalid("calibration set is empty"));
    }
    let mut sum = Metrics {
        onboard_map: 0.0,
        collaborative_map: 0.0,
        gain: 0.0,
        offload_fraction: 0.0,
    };
    for g in groups {
        let AccuracyResult {
            onboard_only_map,
            collaborative_map,
            relative_gain,
            offload_fraction,
            ..
        } = g.evaluate(onboard, policy, iou)?;
        sum.onboard_map += onboard_only_map;
        sum.collaborative_map += collaborative_map;
        sum.gain += relative_gain.unwrap_or(f64::INFINITY);
        sum.offload_fraction += offload_fraction;
    }
    let n = groups.len() as f64;
    Ok(Metrics {
        onboard_map: sum.onboard_map / n,
        collaborative_map: sum.collaborative_map / n,
        gain: sum.gain / n,
        offload_fraction: sum.offload_fraction / n,
    })
}

/// Knob values are kept on a 1e-6 lattice so emitted profiles print cleanly.
fn snap(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn with_knobs(start: &DetectorProfile, recall: f64, fp_rate: f64) -> DetectorProfile {
    DetectorProfile {
        recall: vec![snap(recall); start.recall.len()],
        fp_rate: snap(fp_rate),
        ..start.clone()
    }
}

/// Calibrate `start` (an onboard profile) against `ground`. The groups of
/// `set` must have been built with `ground`.
pub fn calibrate_profiles(
    targets: &CalibrationTargets,
    start: &DetectorProfile,
    ground: &DetectorProfile,
    set: &[EvalSet],
    policy: &RoutingPolicy,
    iou_threshold: f64,
    budget: Budget,
) -> Result<Calibration> {
    if !(targets.onboard_map > 0.0 && targets.onboard_map < 1.0) {
        return Err(Error::invalid("target onboard mAP must be in (0, 1)"));
    }
    if !(targets.gain >= 0.0 && targets.gain.is_finite()) {
        return Err(Error::invalid("target gain must be >= 0"));
    }
    let mut evaluations = 0usize;
    let finish = |profile: DetectorProfile, m: Metrics, evaluations: usize, converged: bool| Calibration {
        onboard: profile,
        ground: ground.clone(),
        onboard_map: m.onboard_map,
        collaborative_map: m.collaborative_map,
        gain: m.gain,
        offload_fraction: m.offload_fraction,
        evaluations,
        converged,
    };

    // Zero-gain fixed point: the ground profile itself may already fit.
    let m = mean_metrics(set, ground, policy, iou_threshold)?;
    evaluations += 1;
    if targets.met(&m) {
        return Ok(finish(ground.clone(), m, evaluations, true));
    }

    let clamp = |r: f64, f: f64| (r.clamp(RECALL_RANGE.0, RECALL_RANGE.1), f.clamp(FP_RANGE.0, FP_RANGE.1));
    let mean_recall = start.recall.iter().sum::<f64>() / start.recall.len().max(1) as f64;
    let (mut r, mut f) = clamp(mean_recall, start.fp_rate);
    let mut best_m = mean_metrics(set, &with_knobs(start, r, f), policy, iou_threshold)?;
    evaluations += 1;
    let mut best_loss = targets.loss(&best_m);
    let mut step = INITIAL_STEP;

    while evaluations < budget.max_evaluations {
        if targets.met(&best_m) && best_loss <= budget.refine_loss {
            break;
        }
        let mut improved = false;
        for (dr, df) in [(step.0, 0.0), (-step.0, 0.0), (0.0, step.1), (0.0, -step.1)] {
            if evaluations >= budget.max_evaluations {
                break;
            }
            let (nr, nf) = clamp(r + dr, f + df);
            if (nr, nf) == (r, f) {
                continue;
            }
            let m = mean_metrics(set, &with_knobs(start, nr, nf), policy, iou_threshold)?;
            evaluations += 1;
            let loss = targets.loss(&m);
            if loss < best_loss {
                (r, f, best_m, best_loss) = (nr, nf, m, loss);
                improved = true;
                break;
            }
        }
        if !improved {
            step = (step.0 / 2.0, step.1 / 2.0);
            if step.0 < INITIAL_STEP.0 * MIN_STEP_FRACTION {
                break;
            }
        }
    }

    let result = finish(with_knobs(start, r, f), best_m, evaluations, targets.met(&best_m));
    if result.converged {
        Ok(result)
    } else {
        Err(Error::Calibration(Box::new(result)))
    }
}
