//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use num_rational::Ratio;
use num_traits::ToPrimitive;
use satcollab::cli::load_scenario;
use satcollab::imaging::BBox;
use satcollab::orbit::{elevation_deg, propagate, GroundStation, OrbitSpec};
use satcollab::sim::Scenario;

/// Ground-truth box: (tile, class, box).
pub type Gt = (u32, u32, [f64; 4]);
/// Prediction: (tile, class, box, score).
pub type Pred = (u32, u32, [f64; 4], f64);

fn overlap(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let x0 = a[0].max(b[0]);
    let y0 = a[1].max(b[1]);
    let x1 = a[2].min(b[2]);
    let y1 = a[3].min(b[3]);
    if x0 < x1 && y0 < y1 {
        let inter = (x1 - x0) * (y1 - y0);
        let area = |r: &[f64; 4]| (r[2] - r[0]) * (r[3] - r[1]);
        inter / (area(a) + area(b) - inter)
    } else {
        0.0
    }
}

fn box_cmp(a: &[f64; 4], b: &[f64; 4]) -> std::cmp::Ordering {
    for i in 0..4 {
        let c = a[i].total_cmp(&b[i]);
        if c.is_ne() {
            return c;
        }
    }
    std::cmp::Ordering::Equal
}

/// Brute-force mAP: per class, rank predictions by score (desc), tile, box;
/// each claims the unmatched same-tile ground truth of highest IoU (first on
/// ties) if IoU reaches the threshold; AP sums the precision envelope at
/// every true positive and divides by the class's ground-truth count. All of
/// it in exact fractions, converted to f64 at the end.
pub fn reference_map(gt: &[Gt], preds: &[Pred], thr: f64) -> Option<f64> {
    let mut classes: Vec<u32> = gt.iter().map(|g| g.1).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return None;
    }
    let mut total = Ratio::from_integer(0i64);
    for &c in &classes {
        let npos = gt.iter().filter(|g| g.1 == c).count();
        let mut ranked: Vec<&Pred> = preds.iter().filter(|p| p.1 == c).collect();
        ranked.sort_by(|a, b| b.3.total_cmp(&a.3).then(a.0.cmp(&b.0)).then(box_cmp(&a.2, &b.2)));
        let mut used = vec![false; gt.len()];
        let mut hits = Vec::new();
        for p in &ranked {
            let mut best: Option<usize> = None;
            let mut best_iou = 0.0;
            for (j, g) in gt.iter().enumerate() {
                if g.0 != p.0 || g.1 != c || used[j] {
                    continue;
                }
                let o = overlap(&p.2, &g.2);
                if o >= thr && (best.is_none() || o > best_iou) {
                    best = Some(j);
                    best_iou = o;
                }
            }
            if let Some(j) = best {
                used[j] = true;
            }
            hits.push(best.is_some());
        }
        // precision at each rank, kept as exact fractions
        let mut precision = Vec::new();
        let mut tp = 0i64;
        for (i, h) in hits.iter().enumerate() {
            if *h {
                tp += 1;
            }
            precision.push(Ratio::new(tp, i as i64 + 1));
        }
        let mut sum = Ratio::from_integer(0i64);
        for i in 0..hits.len() {
            if hits[i] {
                sum += *precision[i..].iter().max().unwrap();
            }
        }
        total += sum / npos as i64;
    }
    (total / classes.len() as i64).to_f64()
}

pub fn to_bbox(b: &[f64; 4]) -> BBox {
    BBox::new(b[0], b[1], b[2], b[3])
}

/// Visibility intervals from 1 s elevation samples, with each boundary placed
/// by linear interpolation between the bracketing samples.
pub fn sampled_windows(orbit: &OrbitSpec, station: &GroundStation, horizon_s: f64) -> Vec<(f64, f64)> {
    let margin = |t: f64| elevation_deg(station, propagate(orbit, t).unwrap()).unwrap() - station.min_elevation_deg;
    let n = horizon_s.floor() as usize;
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    let mut prev = margin(0.0);
    if prev >= 0.0 {
        start = Some(0.0);
    }
    for k in 1..=n {
        let t = k as f64;
        let cur = margin(t);
        if prev < 0.0 && cur >= 0.0 {
            start = Some(t - 1.0 + prev / (prev - cur));
        } else if prev >= 0.0 && cur < 0.0 {
            out.push((start.take().unwrap(), t - 1.0 + prev / (prev - cur)));
        }
        prev = cur;
    }
    if let Some(s) = start {
        out.push((s, horizon_s));
    }
    out
}

/// A built-in scenario shrunk for fast tests.
pub fn small_scenario(seed: u64) -> Scenario {
    let mut s = load_scenario("baoyun_default").unwrap();
    s.sim.seed = seed;
    s.corpus.num_frames = 40;
    s.sim.horizon_s = 20_000.0;
    s.sim.capture_period_s = 200.0;
    s
}
