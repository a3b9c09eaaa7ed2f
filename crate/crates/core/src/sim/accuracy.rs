//! Onboard-only versus collaborative accuracy for a scenario.

use super::{AccuracyBlock, Scenario};
use crate::error::{Error, Result};
use crate::imaging::{corpus::generate_frame, filter_redundant, split_frame, Tile};
use crate::inference::calibrate::{calibrate_profiles, Budget, Calibration, CalibrationTargets};
use crate::inference::{AccuracyResult, EvalSet};
use crate::rng::RngStreams;

pub const INTERPOLATION: &str = "all-point";

/// Kept tiles of every frame captured within the horizon.
pub fn kept_tiles(scenario: &Scenario) -> Result<Vec<Tile>> {
    let streams = RngStreams::new(scenario.sim.seed);
    let mut kept = Vec::new();
    for k in 0..scenario.captured_frames() {
        let frame = generate_frame(&scenario.corpus, &streams, k, scenario.capture_time(k));
        let tiles = split_frame(&frame, scenario.corpus.tile_px)?;
        kept.extend(filter_redundant(tiles, &scenario.filter).kept);
    }
    Ok(kept)
}

/// Accuracy over `tiles` with the scenario's profiles and policy.
pub fn accuracy_for_tiles(scenario: &Scenario, tiles: Vec<Tile>) -> Result<AccuracyResult> {
    let set = EvalSet::new(tiles, RngStreams::new(scenario.sim.seed), &scenario.detectors.ground);
    set.evaluate(
        &scenario.detectors.onboard,
        &scenario.policy,
        scenario.sim.iou_threshold,
    )
}

/// Onboard-only (tau = 0) and collaborative (scenario tau) mAP over the kept
/// tiles of all captured frames, with identical detection substreams.
pub fn compare_accuracy(scenario: &Scenario) -> Result<AccuracyResult> {
    scenario.validate()?;
    accuracy_for_tiles(scenario, kept_tiles(scenario)?)
}

pub(crate) fn accuracy_block(scenario: &Scenario, tiles: Vec<Tile>) -> Result<AccuracyBlock> {
    let n = tiles.len();
    let gt: usize = tiles.iter().map(|t| t.objects.len()).sum();
    let mut block = AccuracyBlock {
        iou_threshold: scenario.sim.iou_threshold,
        interpolation: INTERPOLATION.to_string(),
        aggregation: scenario.policy.aggregation,
        confidence_threshold: scenario.policy.confidence_threshold,
        onboard_only_map: None,
        collaborative_map: None,
        relative_gain: None,
        offload_fraction: None,
        tiles_evaluated: n,
        ground_truth_objects: gt,
        note: None,
    };
    match accuracy_for_tiles(scenario, tiles) {
        Ok(r) => {
            block.onboard_only_map = Some(r.onboard_only_map);
            block.collaborative_map = Some(r.collaborative_map);
            block.relative_gain = r.relative_gain;
            block.offload_fraction = Some(r.offload_fraction);
            if r.relative_gain.is_none() {
                block.note = Some("relative gain undefined: onboard-only mAP is zero".into());
            }
        }
        Err(Error::NoGroundTruth) => {
            block.offload_fraction = None;
            block.note = Some("mAP undefined: no ground-truth objects in kept tiles".into());
        }
        Err(e) => return Err(e),
    }
    Ok(block)
}

/// One evaluation group per seed: the scenario's captured kept tiles with the
/// scenario seed replaced.
pub fn calibration_set(scenario: &Scenario, seeds: &[u64]) -> Result<Vec<EvalSet>> {
    seeds
        .iter()
        .map(|&seed| {
            let mut s = scenario.clone();
            s.sim.seed = seed;
            let tiles = kept_tiles(&s)?;
            Ok(EvalSet::new(tiles, RngStreams::new(seed), &s.detectors.ground))
        })
        .collect()
}

/// Calibrate the scenario's onboard profile, starting from its current
/// values, against its ground profile and routing policy.
pub fn calibrate_scenario(
    scenario: &Scenario,
    targets: &CalibrationTargets,
    seeds: &[u64],
    budget: Budget,
) -> Result<Calibration> {
    scenario.validate()?;
    let set = calibration_set(scenario, seeds)?;
    calibrate_profiles(
        targets,
        &scenario.detectors.onboard,
        &scenario.detectors.ground,
        &set,
        &scenario.policy,
        scenario.sim.iou_threshold,
        budget,
    )
}
