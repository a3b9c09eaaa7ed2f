//! IoU and mean average precision.
//!
//! Per class, predictions are ranked by descending score with ties broken by
//! `(tile, box)` ascending. Each prediction greedily claims the unmatched
//! ground truth of the same class in the same tile with the highest IoU
//! (lowest index on IoU ties), provided IoU >= threshold. AP is the area
//! under the precision envelope over recall (all-point interpolation), and
//! mAP the unweighted mean over classes with at least one ground-truth box.
//!
//! Precisions are ratios of small integers, so AP and mAP are accumulated as
//! exact fractions and rounded once; only when a numerator or denominator
//! would exceed 2^53 does the sum fall back to ordinary float arithmetic.

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::BBox;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = match a.intersect(b) {
        Some(i) => i.area(),
        None => return 0.0,
    };
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtRecord<K> {
    pub tile: K,
    pub class_id: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredRecord<K> {
    pub tile: K,
    pub class_id: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapResult {
    pub map: f64,
    /// AP for every class with ground truth.
    pub per_class: BTreeMap<u32, f64>,
}

pub fn evaluate_map<K: Ord>(gt: &[GtRecord<K>], preds: &[PredRecord<K>], iou_threshold: f64) -> Result<MapResult> {
    if gt.is_empty() {
        return Err(Error::NoGroundTruth);
    }
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::invalid(format!(
            "iou_threshold must be in [0, 1], got {iou_threshold}"
        )));
    }

    // class -> tile -> boxes
    let mut gt_index: BTreeMap<u32, BTreeMap<&K, Vec<BBox>>> = BTreeMap::new();
    for g in gt {
        gt_index
            .entry(g.class_id)
            .or_default()
            .entry(&g.tile)
            .or_default()
            .push(g.bbox);
    }
    let mut preds_by_class: BTreeMap<u32, Vec<&PredRecord<K>>> = BTreeMap::new();
    for p in preds {
        preds_by_class.entry(p.class_id).or_default().push(p);
    }

    let mut per_class = BTreeMap::new();
    let mut exact_sum = Some(Ratio::from_integer(0u64));
    for (&class_id, tiles) in &gt_index {
        let npos: usize = tiles.values().map(Vec::len).sum();
        let mut ranked = preds_by_class.remove(&class_id).unwrap_or_default();
        ranked.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.tile.cmp(&b.tile))
                .then_with(|| a.bbox.total_cmp(&b.bbox))
        });

        let mut matched: BTreeMap<&K, Vec<bool>> = tiles.iter().map(|(k, v)| (*k, vec![false; v.len()])).collect();
        let mut is_tp = Vec::with_capacity(ranked.len());
        for p in &ranked {
            let hit = tiles.get(&p.tile).and_then(|boxes| {
                let used = &matched[&p.tile];
                let mut best: Option<(usize, f64)> = None;
                for (i, g) in boxes.iter().enumerate() {
                    if used[i] {
                        continue;
                    }
                    let o = iou(&p.bbox, g);
                    if o >= iou_threshold && best.is_none_or(|(_, b)| o > b) {
                        best = Some((i, o));
                    }
                }
                best.map(|(i, _)| i)
            });
            if let Some(i) = hit {
                matched.get_mut(&p.tile).expect("tile has ground truth")[i] = true;
            }
            is_tp.push(hit.is_some());
        }
        let exact = exact_ap(&is_tp, npos);
        exact_sum = exact_sum.zip(exact).and_then(|(acc, ap)| acc.checked_add(&ap));
        per_class.insert(class_id, exact.map_or_else(|| float_ap(&is_tp, npos), to_f64));
    }

    let classes = per_class.len() as u64;
    let map = match exact_sum
        .and_then(|s| s.checked_div(&Ratio::from_integer(classes)))
        .and_then(representable)
    {
        Some(m) => to_f64(m),
        None => per_class.values().fold(0.0, |acc, ap| acc + ap) / classes as f64,
    };
    Ok(MapResult { map, per_class })
}

/// All-point interpolated AP of a ranked TP/FP sequence.
pub fn average_precision(is_tp: &[bool], npos: usize) -> f64 {
    if npos == 0 {
        return 0.0;
    }
    exact_ap(is_tp, npos).map_or_else(|| float_ap(is_tp, npos), to_f64)
}

const EXACT_LIMIT: u64 = 1 << f64::MANTISSA_DIGITS;

fn to_f64(r: Ratio<u64>) -> f64 {
    // both parts are exact in f64, so the division rounds once
    *r.numer() as f64 / *r.denom() as f64
}

fn exact_ap(is_tp: &[bool], npos: usize) -> Option<Ratio<u64>> {
    let mut envelope = vec![Ratio::from_integer(0u64); is_tp.len()];
    let mut tp = 0u64;
    for (i, &hit) in is_tp.iter().enumerate() {
        tp += hit as u64;
        envelope[i] = Ratio::new(tp, i as u64 + 1);
    }
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        if envelope[i + 1] > envelope[i] {
            envelope[i] = envelope[i + 1];
        }
    }
    let mut sum = Ratio::from_integer(0u64);
    for (_, p) in is_tp.iter().zip(&envelope).filter(|(hit, _)| **hit) {
        sum = sum.checked_add(p)?;
    }
    sum.checked_div(&Ratio::from_integer(npos as u64))
        .and_then(representable)
}

fn representable(r: Ratio<u64>) -> Option<Ratio<u64>> {
    (*r.numer() <= EXACT_LIMIT && *r.denom() <= EXACT_LIMIT).then_some(r)
}

fn float_ap(is_tp: &[bool], npos: usize) -> f64 {
    let mut precision = Vec::with_capacity(is_tp.len());
    let mut tp = 0usize;
    for (i, &hit) in is_tp.iter().enumerate() {
        if hit {
            tp += 1;
        }
        precision.push(tp as f64 / (i + 1) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let sum: f64 = is_tp
        .iter()
        .zip(&precision)
        .filter(|(hit, _)| **hit)
        .fold(0.0, |acc, (_, p)| acc + p);
    sum / npos as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1)
    }

    fn gt(tile: u32, class_id: u32, bbox: BBox) -> GtRecord<u32> {
        GtRecord { tile, class_id, bbox }
    }

    fn pred(tile: u32, class_id: u32, bbox: BBox, score: f64) -> PredRecord<u32> {
        PredRecord {
            tile,
            class_id,
            bbox,
            score,
        }
    }

    #[test]
    fn iou_cases() {
        let a = b(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &b(5.0, 5.0, 6.0, 6.0)), 0.0);
        assert_eq!(iou(&a, &b(2.0, 0.0, 4.0, 2.0)), 0.0);
        // areas 4 + 4, intersection 1, union 7
        assert!((iou(&a, &b(1.0, 1.0, 3.0, 3.0)) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let g = vec![gt(0, 0, b(0.0, 0.0, 10.0, 10.0)), gt(1, 1, b(5.0, 5.0, 20.0, 20.0))];
        let p: Vec<_> = g
            .iter()
            .enumerate()
            .map(|(i, g)| pred(g.tile, g.class_id, g.bbox, 0.9 - i as f64 * 0.1))
            .collect();
        let r = evaluate_map(&g, &p, 0.5).unwrap();
        assert_eq!(r.map, 1.0);
        assert_eq!(r.per_class.len(), 2);
    }

    #[test]
    fn no_predictions_score_zero() {
        let g = vec![gt(0, 0, b(0.0, 0.0, 10.0, 10.0))];
        let map = evaluate_map(&g, &[], 0.5).unwrap().map;
        assert_eq!(map.to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn no_ground_truth_is_an_error() {
        let p = vec![pred(0, 0, b(0.0, 0.0, 1.0, 1.0), 0.5)];
        assert!(matches!(evaluate_map::<u32>(&[], &p, 0.5), Err(Error::NoGroundTruth)));
    }

    #[test]
    fn hand_computed_three_prediction_case() {
        // PR points (1, .5), (.5, .5), (2/3, 1) -> AP = .5 * 1 + .5 * 2/3
        let g = vec![gt(0, 0, b(0.0, 0.0, 10.0, 10.0)), gt(0, 0, b(50.0, 50.0, 60.0, 60.0))];
        let p = vec![
            pred(0, 0, b(0.0, 0.0, 10.0, 10.0), 0.9),
            pred(0, 0, b(100.0, 100.0, 110.0, 110.0), 0.8),
            pred(0, 0, b(50.0, 50.0, 60.0, 60.0), 0.7),
        ];
        let r = evaluate_map(&g, &p, 0.5).unwrap();
        assert_eq!(r.map, 5.0 / 6.0);
    }

    #[test]
    fn long_rankings_fall_back_to_float_sums() {
        // lcm(1..=60) is far beyond 2^53
        let hits: Vec<bool> = (0..60).map(|i| i % 3 != 1).collect();
        let npos = 45;
        assert!(exact_ap(&hits, npos).is_none());
        let ap = average_precision(&hits, npos);
        assert!((ap - float_ap(&hits, npos)).abs() == 0.0);
        let short = [true, false, true];
        assert_eq!(average_precision(&short, 2), 5.0 / 6.0);
        assert_eq!(exact_ap(&short, 2), Some(Ratio::new(5, 6)));
    }

    #[test]
    fn duplicate_detection_counts_as_false_positive() {
        let g = vec![gt(0, 0, b(0.0, 0.0, 10.0, 10.0))];
        let p = vec![
            pred(0, 0, b(0.0, 0.0, 10.0, 10.0), 0.9),
            pred(0, 0, b(0.0, 0.0, 10.0, 10.5), 0.8),
        ];
        assert_eq!(evaluate_map(&g, &p, 0.5).unwrap().map, 1.0);
        let p_rev = vec![
            pred(0, 0, b(0.0, 0.0, 10.0, 10.0), 0.8),
            pred(0, 0, b(30.0, 30.0, 40.0, 40.0), 0.9),
        ];
        assert_eq!(evaluate_map(&g, &p_rev, 0.5).unwrap().map, 0.5);
    }

    #[test]
    fn predictions_in_other_tiles_never_match() {
        let g = vec![gt(0, 0, b(0.0, 0.0, 10.0, 10.0))];
        let p = vec![pred(1, 0, b(0.0, 0.0, 10.0, 10.0), 0.9)];
        assert_eq!(evaluate_map(&g, &p, 0.5).unwrap().map, 0.0);
    }

    #[test]
    fn classes_without_ground_truth_are_ignored() {
        let g = vec![gt(0, 0, b(0.0, 0.0, 10.0, 10.0))];
        let p = vec![
            pred(0, 0, b(0.0, 0.0, 10.0, 10.0), 0.5),
            pred(0, 3, b(0.0, 0.0, 10.0, 10.0), 0.9),
        ];
        let r = evaluate_map(&g, &p, 0.5).unwrap();
        assert_eq!(r.map, 1.0);
        assert!(!r.per_class.contains_key(&3));
    }
}
