//! The event loop.
//!
//! Events are ordered by time, then kind rank (ContactStart, TileReady,
//! TransferProgress, ContactEnd, Capture, SimEnd), then insertion sequence.
//! Inference runs whenever the onboard computer is free; it is a single
//! FIFO server. Downlink transfers run only inside contact windows, after
//! the per-pass overhead, one job at a time in queue priority order. A job
//! still in flight when a window closes is cut at the last whole byte and
//! requeued with its remainder.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use super::accuracy::accuracy_block;
use super::report::{DataBlock, EnergyBlock, EnergyReading, Report, TimelineEntry, WindowReport};
use super::Scenario;
use crate::energy::EnergyLedger;
use crate::error::Result;
use crate::imaging::{corpus::generate_frame, filter_redundant, split_frame, Tile};
use crate::inference::{detect, route, RouteDecision};
use crate::link::{bytes_in, goodput_bytes_per_s, Direction, JobKind, JobQueue, OrderedTime, PendingJob, TransferJob};
use crate::orbit::{contact_windows, ContactWindow};
use crate::rng::RngStreams;

/// Contact windows of every station, sorted by start then station id.
pub fn station_windows(scenario: &Scenario) -> Result<Vec<ContactWindow>> {
    let mut all = Vec::new();
    for station in &scenario.stations {
        all.extend(contact_windows(
            &scenario.orbit,
            station,
            scenario.sim.horizon_s,
            scenario.sim.coarse_step_s,
        )?);
    }
    all.sort_by(|a, b| {
        a.start_s
            .total_cmp(&b.start_s)
            .then_with(|| a.station_id.cmp(&b.station_id))
    });
    Ok(all)
}

/// Disjoint transmit windows: where passes over different stations overlap,
/// the later window starts when the earlier one ends.
pub fn transmit_windows(scenario: &Scenario) -> Result<Vec<ContactWindow>> {
    let mut out: Vec<ContactWindow> = Vec::new();
    for mut w in station_windows(scenario)? {
        if let Some(prev) = out.last() {
            w.start_s = w.start_s.max(prev.end_s);
        }
        if w.start_s < w.end_s {
            out.push(w);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    ContactStart(usize),
    TileReady,
    TransferProgress(u64),
    ContactEnd(usize),
    Capture(u64),
    SimEnd,
}

impl EventKind {
    fn rank(self) -> u8 {
        match self {
            EventKind::ContactStart(_) => 0,
            EventKind::TileReady => 1,
            EventKind::TransferProgress(_) => 2,
            EventKind::ContactEnd(_) => 3,
            EventKind::Capture(_) => 4,
            EventKind::SimEnd => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Event {
    time: OrderedTime,
    rank: u8,
    seq: u64,
    kind: EventKind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.rank, self.seq).cmp(&(other.time, other.rank, other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

struct InFlight {
    pending: PendingJob,
    start_s: f64,
    token: u64,
}

struct Engine<'a> {
    sc: &'a Scenario,
    streams: RngStreams,
    windows: Vec<ContactWindow>,
    window_stats: Vec<(u64, u64)>,
    rate: f64,
    events: BinaryHeap<Reverse<Event>>,
    seq: u64,

    fifo: VecDeque<Tile>,
    inferring: Option<(Tile, f64)>,
    compute_busy: Vec<(f64, f64)>,

    queue: JobQueue,
    contact: Option<usize>,
    in_flight: Option<InFlight>,
    next_token: u64,
    next_job_id: u64,
    comm_busy: Vec<(f64, f64)>,

    data: DataBlock,
    kept: Vec<Tile>,
    timeline: Option<Vec<TimelineEntry>>,
}

/// Simulate `scenario` to its horizon.
pub fn run(scenario: &Scenario) -> Result<Report> {
    scenario.validate()?;
    let windows = transmit_windows(scenario)?;
    let mut engine = Engine {
        sc: scenario,
        streams: RngStreams::new(scenario.sim.seed),
        window_stats: vec![(0, 0); windows.len()],
        windows,
        rate: goodput_bytes_per_s(&scenario.link, Direction::Down),
        events: BinaryHeap::new(),
        seq: 0,
        fifo: VecDeque::new(),
        inferring: None,
        compute_busy: Vec::new(),
        queue: JobQueue::new(),
        contact: None,
        in_flight: None,
        next_token: 0,
        next_job_id: 0,
        comm_busy: Vec::new(),
        data: DataBlock::default(),
        kept: Vec::new(),
        timeline: scenario.sim.timeline.then(Vec::new),
    };
    engine.simulate();
    engine.finish()
}

impl Engine<'_> {
    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.events.push(Reverse(Event {
            time: OrderedTime(time),
            rank: kind.rank(),
            seq: self.seq,
            kind,
        }));
    }

    fn log(&mut self, entry: impl FnOnce() -> TimelineEntry) {
        if let Some(t) = &mut self.timeline {
            t.push(entry());
        }
    }

    fn simulate(&mut self) {
        let horizon = self.sc.sim.horizon_s;
        for i in 0..self.windows.len() {
            let (start, end) = (self.windows[i].start_s, self.windows[i].end_s);
            self.push(start, EventKind::ContactStart(i));
            self.push(end, EventKind::ContactEnd(i));
        }
        for k in 0..self.sc.captured_frames() {
            self.push(self.sc.capture_time(k), EventKind::Capture(k));
        }
        self.push(horizon, EventKind::SimEnd);

        while let Some(Reverse(ev)) = self.events.pop() {
            let t = ev.time.0;
            match ev.kind {
                EventKind::Capture(k) => self.on_capture(t, k),
                EventKind::TileReady => self.on_tile_ready(t),
                EventKind::ContactStart(w) => self.on_contact_start(t, w),
                EventKind::TransferProgress(token) => self.on_progress(t, token),
                EventKind::ContactEnd(w) => self.on_contact_end(t, w),
                EventKind::SimEnd => break,
            }
        }
    }

    fn on_capture(&mut self, t: f64, k: u64) {
        let frame = generate_frame(&self.sc.corpus, &self.streams, k, t);
        let tiles = split_frame(&frame, self.sc.corpus.tile_px).expect("validated tile size");
        let outcome = filter_redundant(tiles, &self.sc.filter);
        let d = &mut self.data;
        d.frames_captured += 1;
        d.bytes_raw += frame.payload_bytes();
        d.bytes_filtered_out += outcome.discarded_bytes();
        d.tiles_total += (outcome.kept.len() + outcome.discarded.len()) as u64;
        d.tiles_filtered_out += outcome.discarded.len() as u64;
        self.log(|| TimelineEntry {
            tile: Some(format!("f{k}")),
            bytes: Some(frame.payload_bytes()),
            ..TimelineEntry::new(t, "capture")
        });
        self.kept.extend(outcome.kept.iter().cloned());
        self.fifo.extend(outcome.kept);
        self.start_inference(t);
    }

    fn start_inference(&mut self, t: f64) {
        if self.inferring.is_some() {
            return;
        }
        let Some(tile) = self.fifo.pop_front() else {
            return;
        };
        let done = t + self.sc.detectors.onboard.latency_s_per_tile;
        self.inferring = Some((tile, t));
        if done <= self.sc.sim.horizon_s {
            self.push(done, EventKind::TileReady);
        }
    }

    fn on_tile_ready(&mut self, t: f64) {
        let (tile, started) = self.inferring.take().expect("tile in inference");
        self.compute_busy.push((started, t));
        let dets = detect(&self.sc.detectors.onboard, &tile, &self.streams);
        let decision = route(&tile, &dets, &self.sc.policy);
        self.data.tiles_inferred += 1;
        let kind = match decision {
            RouteDecision::SendResults { .. } => {
                self.data.tiles_resolved_as_results += 1;
                self.data.bytes_resolved_as_results += tile.payload_bytes;
                JobKind::ResultMessage
            }
            RouteDecision::SendImage { .. } => {
                self.data.tiles_offloaded += 1;
                JobKind::ImageTile
            }
        };
        let id = self.next_job_id;
        self.next_job_id += 1;
        self.log(|| TimelineEntry {
            tile: Some(tile.id.to_string()),
            job_id: Some(id),
            bytes: Some(decision.payload_bytes()),
            busy_from_s: Some(started),
            ..TimelineEntry::new(
                t,
                if decision.is_offload() {
                    "tile_ready_offload"
                } else {
                    "tile_ready_results"
                },
            )
        });
        let job = TransferJob::new(id, Direction::Down, decision.payload_bytes(), t, kind)
            .expect("route payloads are non-empty");
        self.enqueue(t, job);
        self.start_inference(t);
        self.start_transfer(t);
    }

    /// Admit a job, evicting the oldest queued image tiles when over capacity.
    fn enqueue(&mut self, t: f64, job: TransferJob) {
        let cap = self.sc.sim.buffer_capacity_bytes;
        let bytes = job.payload_bytes;
        if job.kind == JobKind::ImageTile {
            while self.queue.queued_bytes() + bytes > cap {
                let Some(victim) = self.queue.drop_oldest_image() else {
                    break;
                };
                self.drop_job(t, victim);
            }
            if self.queue.queued_bytes() + bytes > cap {
                self.drop_job(
                    t,
                    PendingJob {
                        job,
                        remaining_bytes: bytes,
                    },
                );
                return;
            }
        }
        self.queue.push(PendingJob {
            remaining_bytes: bytes,
            job,
        });
    }

    fn drop_job(&mut self, t: f64, victim: PendingJob) {
        self.data.bytes_dropped += victim.remaining_bytes;
        self.data.tiles_dropped += 1;
        self.log(|| TimelineEntry {
            job_id: Some(victim.job.id),
            bytes: Some(victim.remaining_bytes),
            ..TimelineEntry::new(t, "drop")
        });
    }

    fn usable_from(&self, w: usize) -> f64 {
        self.windows[w].start_s + self.sc.link.per_pass_overhead_s
    }

    fn on_contact_start(&mut self, t: f64, w: usize) {
        self.contact = Some(w);
        self.log(|| TimelineEntry {
            window: Some(w),
            ..TimelineEntry::new(t, "contact_start")
        });
        let from = self.usable_from(w);
        if from < self.windows[w].end_s {
            let token = self.token();
            self.push(from, EventKind::TransferProgress(token));
        }
    }

    fn token(&mut self) -> u64 {
        self.next_token += 1;
        self.next_token
    }

    fn start_transfer(&mut self, t: f64) {
        let Some(w) = self.contact else { return };
        if self.in_flight.is_some() || t < self.usable_from(w) || t >= self.windows[w].end_s {
            return;
        }
        let Some(pending) = self.queue.pop_ready(t) else {
            return;
        };
        let finish = t + pending.remaining_bytes as f64 / self.rate;
        let token = self.token();
        if finish <= self.windows[w].end_s {
            self.push(finish, EventKind::TransferProgress(token));
        }
        self.in_flight = Some(InFlight {
            pending,
            start_s: t,
            token,
        });
    }

    fn on_progress(&mut self, t: f64, token: u64) {
        if self.in_flight.as_ref().is_some_and(|f| f.token == token) {
            let f = self.in_flight.take().expect("checked above");
            let bytes = f.pending.remaining_bytes;
            self.deliver(t, f, bytes, "transfer_complete");
        }
        self.start_transfer(t);
    }

    fn on_contact_end(&mut self, t: f64, w: usize) {
        if let Some(mut f) = self.in_flight.take() {
            let delivered = bytes_in(t - f.start_s, self.rate).min(f.pending.remaining_bytes);
            if delivered == f.pending.remaining_bytes {
                self.deliver(t, f, delivered, "transfer_complete");
            } else {
                let mut rest = f.pending.clone();
                rest.remaining_bytes -= delivered;
                f.pending.remaining_bytes = delivered;
                self.deliver(t, f, delivered, "transfer_cut");
                self.queue.push(rest);
            }
        }
        self.contact = None;
        self.log(|| TimelineEntry {
            window: Some(w),
            ..TimelineEntry::new(t, "contact_end")
        });
    }

    fn deliver(&mut self, t: f64, f: InFlight, bytes: u64, kind: &str) {
        let w = self.contact.expect("transfers happen in contact");
        self.comm_busy.push((f.start_s, t));
        let stats = &mut self.window_stats[w];
        match f.pending.job.kind {
            JobKind::ImageTile => {
                self.data.bytes_tiles_downlinked += bytes;
                stats.1 += bytes;
            }
            _ => {
                self.data.bytes_result_msgs += bytes;
                stats.0 += bytes;
            }
        }
        self.log(|| TimelineEntry {
            window: Some(w),
            job_id: Some(f.pending.job.id),
            bytes: Some(bytes),
            busy_from_s: Some(f.start_s),
            ..TimelineEntry::new(t, kind)
        });
    }

    fn finish(mut self) -> Result<Report> {
        let horizon = self.sc.sim.horizon_s;
        debug_assert!(self.in_flight.is_none(), "windows end by the horizon");

        let mut pending_inference: u64 = self.fifo.iter().map(|t| t.payload_bytes).sum();
        if let Some((tile, started)) = self.inferring.take() {
            pending_inference += tile.payload_bytes;
            self.compute_busy.push((started, horizon));
            self.log(|| TimelineEntry {
                tile: Some(tile.id.to_string()),
                busy_from_s: Some(started),
                ..TimelineEntry::new(horizon, "inference_cut")
            });
        }
        let mut queued_images = 0;
        for p in self.queue.iter() {
            match p.job.kind {
                JobKind::ImageTile => queued_images += p.remaining_bytes,
                _ => self.data.bytes_result_msgs_pending += p.remaining_bytes,
            }
        }
        self.log(|| TimelineEntry::new(horizon, "sim_end"));
        let d = &mut self.data;
        d.bytes_pending_inference = pending_inference;
        d.bytes_buffered_at_end = queued_images + pending_inference;
        d.reduction_fraction = (d.bytes_raw > 0).then(|| 1.0 - d.bytes_delivered() as f64 / d.bytes_raw as f64);

        let filter_rate = if d.tiles_total == 0 {
            0.0
        } else {
            d.tiles_filtered_out as f64 / d.tiles_total as f64
        };
        let energy = EnergyBlock {
            constant: EnergyReading::constant(&self.sc.power, horizon),
            duty_cycled: duty_cycled(self.sc, &self.compute_busy, &self.comm_busy)?,
        };
        let overhead = self.sc.link.per_pass_overhead_s;
        let windows = self
            .windows
            .iter()
            .zip(&self.window_stats)
            .map(|(w, &(results, images))| WindowReport {
                sat_id: w.sat_id.clone(),
                station_id: w.station_id.clone(),
                start_s: w.start_s,
                end_s: w.end_s,
                duration_s: w.duration_s(),
                usable_s: (w.duration_s() - overhead).max(0.0),
                delivered_bytes: results + images,
                delivered_result_bytes: results,
                delivered_image_bytes: images,
            })
            .collect();
        let accuracy = accuracy_block(self.sc, std::mem::take(&mut self.kept))?;
        Ok(Report {
            data: self.data,
            filter_rate,
            accuracy,
            energy,
            windows,
            timeline: self.timeline,
        })
    }
}

/// Ledger with Compute and Comm active only during their busy intervals.
/// Each interval list is sorted and disjoint.
fn duty_cycled(sc: &Scenario, compute: &[(f64, f64)], comm: &[(f64, f64)]) -> Result<EnergyReading> {
    let horizon = sc.sim.horizon_s;
    let mut cuts: Vec<f64> = vec![0.0, horizon];
    for &(a, b) in compute.iter().chain(comm) {
        cuts.push(a.clamp(0.0, horizon));
        cuts.push(b.clamp(0.0, horizon));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let active = |list: &[(f64, f64)], mid: f64| {
        let i = list.partition_point(|&(_, end)| end <= mid);
        i < list.len() && list[i].0 <= mid
    };
    let mut ledger = EnergyLedger::new();
    let (mut compute_s, mut comm_s) = (0.0, 0.0);
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        let (c, m) = (active(compute, mid), active(comm, mid));
        if c {
            compute_s += b - a;
        }
        if m {
            comm_s += b - a;
        }
        ledger.accrue_interval(&sc.power, b - a, c, m)?;
    }
    Ok(EnergyReading::from_ledger(&ledger, compute_s, comm_s))
}
