//! Satellite-ground link model and window-gated store-and-forward scheduling.
//!
//! Loss is a deterministic derating of the raw rate (idealized ARQ: every lost
//! packet is resent, nothing else is charged). Jobs are served by priority
//! class, then FIFO by creation time; a job that does not fit in the remaining
//! window time is cut at the window end and resumes in the next window.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check, Error, FieldError, Result};
use crate::orbit::ContactWindow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    #[serde(default = "default_uplink")]
    pub uplink_mbps: f64,
    #[serde(default = "default_downlink")]
    pub downlink_mbps: f64,
    #[serde(default)]
    pub loss_prob: f64,
    /// Unusable acquisition time at the start of every window.
    #[serde(default = "default_overhead")]
    pub per_pass_overhead_s: f64,
}

fn default_uplink() -> f64 {
    1.0
}
fn default_downlink() -> f64 {
    40.0
}
fn default_overhead() -> f64 {
    10.0
}

impl Default for LinkSpec {
    fn default() -> Self {
        Self {
            uplink_mbps: default_uplink(),
            downlink_mbps: default_downlink(),
            loss_prob: 0.0,
            per_pass_overhead_s: default_overhead(),
        }
    }
}

impl LinkSpec {
    pub fn violations(&self, prefix: &str) -> Vec<FieldError> {
        let mut v = Vec::new();
        for (name, rate) in [("uplink_mbps", self.uplink_mbps), ("downlink_mbps", self.downlink_mbps)] {
            if !(rate.is_finite() && rate > 0.0) {
                v.push(FieldError::new(
                    format!("{prefix}.{name}"),
                    format!("must be > 0, got {rate}"),
                ));
            }
        }
        if !(0.0..1.0).contains(&self.loss_prob) {
            v.push(FieldError::new(
                format!("{prefix}.loss_prob"),
                format!("must be in [0, 1), got {}", self.loss_prob),
            ));
        }
        if !(self.per_pass_overhead_s.is_finite() && self.per_pass_overhead_s >= 0.0) {
            v.push(FieldError::new(
                format!("{prefix}.per_pass_overhead_s"),
                format!("must be >= 0, got {}", self.per_pass_overhead_s),
            ));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        check(self.violations("link"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobKind {
    ResultMessage,
    ImageTile,
    Command,
}

impl JobKind {
    /// Queue priority; lower is served first.
    pub fn rank(self) -> u8 {
        match self {
            JobKind::Command => 0,
            JobKind::ResultMessage => 1,
            JobKind::ImageTile => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferJob {
    pub id: u64,
    pub direction: Direction,
    pub payload_bytes: u64,
    pub created_s: f64,
    pub kind: JobKind,
}

impl TransferJob {
    pub fn new(id: u64, direction: Direction, payload_bytes: u64, created_s: f64, kind: JobKind) -> Result<Self> {
        if payload_bytes == 0 {
            return Err(Error::invalid(format!("transfer job {id} has an empty payload")));
        }
        if !created_s.is_finite() {
            return Err(Error::invalid(format!(
                "transfer job {id} has a non-finite creation time"
            )));
        }
        Ok(Self {
            id,
            direction,
            payload_bytes,
            created_s,
            kind,
        })
    }

    pub fn queue_key(&self) -> QueueKey {
        QueueKey {
            rank: self.kind.rank(),
            created: OrderedTime(self.created_s),
            id: self.id,
        }
    }
}

/// One contiguous stretch of transmission of (part of) a job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub job_id: u64,
    /// Index into the window list the schedule was computed over.
    pub window: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub delivered_bytes: u64,
}

/// A job with the bytes still owed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingJob {
    pub job: TransferJob,
    pub remaining_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderedTime(pub f64);

impl Eq for OrderedTime {}

impl PartialOrd for OrderedTime {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedTime {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Total service order: priority class, then creation time, then id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct QueueKey {
    pub rank: u8,
    pub created: OrderedTime,
    pub id: u64,
}

/// Priority queue of jobs waiting for link time.
#[derive(Debug, Clone, Default)]
pub struct JobQueue {
    jobs: BTreeMap<QueueKey, PendingJob>,
    bytes: u64,
}

impl JobQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, pending: PendingJob) {
        self.bytes += pending.remaining_bytes;
        self.jobs.insert(pending.job.queue_key(), pending);
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    /// Bytes still owed across all queued jobs.
    pub fn queued_bytes(&self) -> u64 {
        self.bytes
    }

    /// Highest-priority job created at or before `now`.
    pub fn pop_ready(&mut self, now: f64) -> Option<PendingJob> {
        let key = *self.jobs.iter().find(|(_, p)| p.job.created_s <= now)?.0;
        let pending = self.jobs.remove(&key)?;
        self.bytes -= pending.remaining_bytes;
        Some(pending)
    }

    /// Earliest creation time among queued jobs.
    pub fn next_creation(&self) -> Option<f64> {
        self.jobs.values().map(|p| p.job.created_s).min_by(f64::total_cmp)
    }

    /// Remove the oldest image tile (by creation time, then id).
    pub fn drop_oldest_image(&mut self) -> Option<PendingJob> {
        let key = *self
            .jobs
            .iter()
            .filter(|(_, p)| p.job.kind == JobKind::ImageTile)
            .min_by(|a, b| {
                a.1.job
                    .created_s
                    .total_cmp(&b.1.job.created_s)
                    .then(a.1.job.id.cmp(&b.1.job.id))
            })?
            .0;
        let pending = self.jobs.remove(&key)?;
        self.bytes -= pending.remaining_bytes;
        Some(pending)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PendingJob> {
        self.jobs.values()
    }

    pub fn into_vec(self) -> Vec<PendingJob> {
        self.jobs.into_values().collect()
    }
}

/// Effective rate after loss, Mbit/s.
pub fn goodput_mbps(link: &LinkSpec, direction: Direction) -> f64 {
    let rate = match direction {
        Direction::Up => link.uplink_mbps,
        Direction::Down => link.downlink_mbps,
    };
    rate * (1.0 - link.loss_prob)
}

/// Goodput in bytes per second.
pub fn goodput_bytes_per_s(link: &LinkSpec, direction: Direction) -> f64 {
    goodput_mbps(link, direction) * 1e6 / 8.0
}

pub fn transfer_time_s(payload_bytes: u64, goodput_mbps: f64) -> Result<f64> {
    if !(goodput_mbps.is_finite() && goodput_mbps > 0.0) {
        return Err(Error::invalid(format!("goodput must be > 0, got {goodput_mbps}")));
    }
    Ok(payload_bytes as f64 * 8.0 / (goodput_mbps * 1e6))
}

/// Bytes deliverable in `duration_s` at `rate_bytes_per_s`, rounded down.
pub fn bytes_in(duration_s: f64, rate_bytes_per_s: f64) -> u64 {
    if duration_s <= 0.0 {
        0
    } else {
        (duration_s * rate_bytes_per_s).floor() as u64
    }
}

/// Outcome of a static schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Sorted by start time, then job id.
    pub records: Vec<TransferRecord>,
    /// Jobs with bytes still owed, in service order.
    pub residual: Vec<PendingJob>,
}

impl Schedule {
    pub fn delivered_in_window(&self, window: usize) -> u64 {
        self.records
            .iter()
            .filter(|r| r.window == window)
            .map(|r| r.delivered_bytes)
            .sum()
    }
}

/// Serve `queue` through `windows`.
///
/// Each direction is an independent channel. `windows` must be sorted and
/// pairwise disjoint.
pub fn schedule(queue: &[TransferJob], windows: &[ContactWindow], link: &LinkSpec) -> Result<Schedule> {
    link.validate()?;
    for pair in windows.windows(2) {
        if pair[1].start_s < pair[0].end_s {
            return Err(Error::invalid("contact windows must be sorted and disjoint"));
        }
    }
    let mut records = Vec::new();
    let mut residual = Vec::new();
    for direction in [Direction::Down, Direction::Up] {
        let mut q = JobQueue::new();
        for job in queue.iter().filter(|j| j.direction == direction) {
            q.push(PendingJob {
                job: job.clone(),
                remaining_bytes: job.payload_bytes,
            });
        }
        let rate = goodput_bytes_per_s(link, direction);
        for (wi, w) in windows.iter().enumerate() {
            serve_window(
                &mut q,
                wi,
                w.start_s + link.per_pass_overhead_s,
                w.end_s,
                rate,
                &mut records,
            );
        }
        residual.extend(q.into_vec());
    }
    records.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.job_id.cmp(&b.job_id)));
    residual.sort_by_key(|p| p.job.queue_key());
    Ok(Schedule { records, residual })
}

fn serve_window(
    q: &mut JobQueue,
    window: usize,
    usable_from: f64,
    end: f64,
    rate: f64,
    records: &mut Vec<TransferRecord>,
) {
    let mut t = usable_from;
    while t < end && !q.is_empty() {
        let Some(mut pending) = q.pop_ready(t) else {
            match q.next_creation() {
                Some(next) if next < end => {
                    t = t.max(next);
                    continue;
                }
                _ => break,
            }
        };
        let finish = t + pending.remaining_bytes as f64 / rate;
        if finish <= end {
            records.push(TransferRecord {
                job_id: pending.job.id,
                window,
                start_s: t,
                end_s: finish,
                delivered_bytes: pending.remaining_bytes,
            });
            t = finish;
        } else {
            let delivered = bytes_in(end - t, rate).min(pending.remaining_bytes);
            if delivered > 0 {
                records.push(TransferRecord {
                    job_id: pending.job.id,
                    window,
                    start_s: t,
                    end_s: end,
                    delivered_bytes: delivered,
                });
            }
            pending.remaining_bytes -= delivered;
            q.push(pending);
            t = end;
        }
    }
}
