use proptest::prelude::*;
use satcollab::link::{bytes_in, goodput_bytes_per_s, schedule, Direction, JobKind, LinkSpec, TransferJob};
use satcollab::orbit::ContactWindow;

fn windows_from(gaps: &[(f64, f64)]) -> Vec<ContactWindow> {
    let mut t = 0.0;
    gaps.iter()
        .map(|&(gap, len)| {
            let start = t + gap;
            t = start + len;
            ContactWindow {
                sat_id: "sat".into(),
                station_id: "gs".into(),
                start_s: start,
                end_s: t,
            }
        })
        .collect()
}

fn jobs_strategy() -> impl Strategy<Value = Vec<(u64, f64, bool)>> {
    prop::collection::vec((1u64..400_000_000, 0.0f64..5_000.0, any::<bool>()), 0..30)
}

fn build_jobs(raw: &[(u64, f64, bool)], all_at_zero: bool) -> Vec<TransferJob> {
    raw.iter()
        .enumerate()
        .map(|(i, &(bytes, created, image))| {
            let kind = if image {
                JobKind::ImageTile
            } else {
                JobKind::ResultMessage
            };
            let created = if all_at_zero { 0.0 } else { created };
            TransferJob::new(i as u64, Direction::Down, bytes, created, kind).unwrap()
        })
        .collect()
}

fn link(loss: f64, overhead: f64, mbps: f64) -> LinkSpec {
    LinkSpec {
        downlink_mbps: mbps,
        loss_prob: loss,
        per_pass_overhead_s: overhead,
        ..LinkSpec::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_byte_is_delivered_or_still_owed(
        raw in jobs_strategy(),
        gaps in prop::collection::vec((0.0f64..3_000.0, 1.0f64..600.0), 0..6),
        loss in 0.0f64..0.95,
        overhead in 0.0f64..60.0,
    ) {
        let jobs = build_jobs(&raw, false);
        let ws = windows_from(&gaps);
        let s = schedule(&jobs, &ws, &link(loss, overhead, 40.0)).unwrap();
        for j in &jobs {
            let delivered: u64 = s.records.iter().filter(|r| r.job_id == j.id).map(|r| r.delivered_bytes).sum();
            let owed: u64 = s.residual.iter().filter(|p| p.job.id == j.id).map(|p| p.remaining_bytes).sum();
            prop_assert_eq!(delivered + owed, j.payload_bytes);
        }
    }

    #[test]
    fn transfers_respect_windows_capacity_and_creation(
        raw in jobs_strategy(),
        gaps in prop::collection::vec((0.0f64..3_000.0, 1.0f64..600.0), 1..6),
        loss in 0.0f64..0.95,
        overhead in 0.0f64..60.0,
    ) {
        let jobs = build_jobs(&raw, false);
        let ws = windows_from(&gaps);
        let l = link(loss, overhead, 40.0);
        let rate = goodput_bytes_per_s(&l, Direction::Down);
        let s = schedule(&jobs, &ws, &l).unwrap();
        for r in &s.records {
            let w = &ws[r.window];
            prop_assert!(r.start_s >= w.start_s + overhead - 1e-9 && r.end_s <= w.end_s + 1e-9);
            prop_assert!(r.start_s >= jobs[r.job_id as usize].created_s);
        }
        for (i, w) in ws.iter().enumerate() {
            let usable = (w.duration_s() - overhead).max(0.0);
            prop_assert!(s.delivered_in_window(i) <= bytes_in(usable, rate) + 1);
        }
        // records on one channel never overlap in time
        for pair in s.records.windows(2) {
            prop_assert!(pair[0].end_s <= pair[1].start_s + 1e-9);
        }
    }

    #[test]
    fn backlogged_windows_run_at_full_rate(
        raw in prop::collection::vec((50_000_000u64..400_000_000, 0.0f64..1.0, any::<bool>()), 20..40),
        gaps in prop::collection::vec((0.0f64..3_000.0, 20.0f64..300.0), 1..4),
        loss in 0.0f64..0.9,
    ) {
        let jobs = build_jobs(&raw, true);
        let ws = windows_from(&gaps);
        let l = link(loss, 10.0, 40.0);
        let rate = goodput_bytes_per_s(&l, Direction::Down);
        let s = schedule(&jobs, &ws, &l).unwrap();
        prop_assume!(!s.residual.is_empty());
        for (i, w) in ws.iter().enumerate() {
            let cap = bytes_in((w.duration_s() - 10.0).max(0.0), rate);
            let pieces = s.records.iter().filter(|r| r.window == i).count() as u64;
            let got = s.delivered_in_window(i);
            prop_assert!(got + pieces + 1 >= cap && got <= cap + 1, "window {i}: {got} of {cap}");
        }
    }

    #[test]
    fn results_are_served_before_images(
        raw in jobs_strategy(),
        len in 10.0f64..2_000.0,
    ) {
        let jobs = build_jobs(&raw, true);
        let ws = windows_from(&[(0.0, len)]);
        let s = schedule(&jobs, &ws, &link(0.0, 0.0, 40.0)).unwrap();
        let first_image = s.records.iter().position(|r| jobs[r.job_id as usize].kind == JobKind::ImageTile);
        if let Some(i) = first_image {
            for r in &s.records[i..] {
                prop_assert_eq!(jobs[r.job_id as usize].kind, JobKind::ImageTile);
            }
        }
    }

    #[test]
    fn schedule_is_deterministic(
        raw in jobs_strategy(),
        gaps in prop::collection::vec((0.0f64..3_000.0, 1.0f64..600.0), 0..6),
    ) {
        let jobs = build_jobs(&raw, false);
        let ws = windows_from(&gaps);
        let l = link(0.3, 10.0, 40.0);
        prop_assert_eq!(schedule(&jobs, &ws, &l).unwrap(), schedule(&jobs, &ws, &l).unwrap());
    }
}

#[test]
fn loss_scales_saturated_delivery() {
    let jobs: Vec<_> = (0..100)
        .map(|i| TransferJob::new(i, Direction::Down, 3_145_728, 0.0, JobKind::ImageTile).unwrap())
        .collect();
    let ws = windows_from(&[(100.0, 40.0)]);
    let full = schedule(&jobs, &ws, &link(0.0, 10.0, 40.0))
        .unwrap()
        .delivered_in_window(0);
    let lossy = schedule(&jobs, &ws, &link(0.8, 10.0, 40.0))
        .unwrap()
        .delivered_in_window(0);
    assert_eq!(full, 150_000_000);
    assert!((lossy as f64 - 0.2 * full as f64).abs() <= 1.0, "{lossy}");
}
