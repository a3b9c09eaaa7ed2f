//! Simulation output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::energy::{EnergyLedger, PowerProfile, SubsystemId};
use crate::inference::Aggregation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub data: DataBlock,
    pub filter_rate: f64,
    pub accuracy: AccuracyBlock,
    pub energy: EnergyBlock,
    pub windows: Vec<WindowReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeline: Option<Vec<TimelineEntry>>,
}

/// Byte and tile accounting. Tile bytes satisfy
/// `bytes_raw = bytes_filtered_out + bytes_tiles_downlinked +
/// bytes_buffered_at_end + bytes_dropped + bytes_resolved_as_results`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataBlock {
    pub bytes_raw: u64,
    pub bytes_filtered_out: u64,
    /// Result-message bytes delivered to the ground.
    pub bytes_result_msgs: u64,
    /// Image-tile bytes delivered to the ground, partial tiles included.
    pub bytes_tiles_downlinked: u64,
    /// Tile bytes still onboard at the horizon: queued image bytes plus
    /// tiles waiting for or undergoing inference.
    pub bytes_buffered_at_end: u64,
    /// Of `bytes_buffered_at_end`, tiles that never finished inference.
    pub bytes_pending_inference: u64,
    pub bytes_dropped: u64,
    /// Tile bytes summarised into result messages.
    pub bytes_resolved_as_results: u64,
    /// Result-message bytes not yet delivered at the horizon.
    pub bytes_result_msgs_pending: u64,
    /// `1 - (bytes_result_msgs + bytes_tiles_downlinked) / bytes_raw`;
    /// absent when nothing was captured.
    pub reduction_fraction: Option<f64>,
    pub frames_captured: u64,
    pub tiles_total: u64,
    pub tiles_filtered_out: u64,
    pub tiles_inferred: u64,
    pub tiles_resolved_as_results: u64,
    pub tiles_offloaded: u64,
    pub tiles_dropped: u64,
}

impl DataBlock {
    pub fn conservation_holds(&self) -> bool {
        self.bytes_filtered_out as u128
            + self.bytes_tiles_downlinked as u128
            + self.bytes_buffered_at_end as u128
            + self.bytes_dropped as u128
            + self.bytes_resolved_as_results as u128
            == self.bytes_raw as u128
    }

    pub fn bytes_delivered(&self) -> u64 {
        self.bytes_result_msgs + self.bytes_tiles_downlinked
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyBlock {
    pub iou_threshold: f64,
    pub interpolation: String,
    pub aggregation: Aggregation,
    pub confidence_threshold: f64,
    pub onboard_only_map: Option<f64>,
    pub collaborative_map: Option<f64>,
    pub relative_gain: Option<f64>,
    pub offload_fraction: Option<f64>,
    pub tiles_evaluated: usize,
    pub ground_truth_objects: usize,
    /// Why a metric is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBlock {
    /// Every subsystem at its tabulated draw for the whole horizon.
    pub constant: EnergyReading,
    /// Compute active only while inferring, Comm active only while
    /// transmitting.
    pub duty_cycled: EnergyReading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReading {
    pub elapsed_s: f64,
    pub joules: BTreeMap<SubsystemId, f64>,
    pub total_j: f64,
    pub fractions: BTreeMap<SubsystemId, f64>,
    pub payloads_over_total: Option<f64>,
    pub compute_over_payloads: Option<f64>,
    pub compute_over_total: Option<f64>,
    pub payload_bus_j: f64,
    pub payload_children_j: f64,
    /// `payload_children_j - payload_bus_j`.
    pub payload_discrepancy_j: f64,
    pub compute_active_s: f64,
    pub comm_active_s: f64,
    pub compute_average_w: f64,
}

impl EnergyReading {
    pub fn from_ledger(ledger: &EnergyLedger, compute_active_s: f64, comm_active_s: f64) -> Self {
        let fr = ledger.fractions().ok();
        Self {
            elapsed_s: ledger.total_elapsed_s,
            joules: ledger.joules.clone(),
            total_j: ledger.total_j(),
            fractions: fr.as_ref().map(|f| f.top_level.clone()).unwrap_or_default(),
            payloads_over_total: fr.as_ref().map(|f| f.payloads_over_total),
            compute_over_payloads: fr.as_ref().map(|f| f.compute_over_payloads),
            compute_over_total: fr.as_ref().map(|f| f.compute_over_total),
            payload_bus_j: ledger.get(SubsystemId::Payloads),
            payload_children_j: ledger.payload_children_j(),
            payload_discrepancy_j: ledger.payload_discrepancy_j(),
            compute_active_s,
            comm_active_s,
            compute_average_w: ledger.average_w(SubsystemId::Compute),
        }
    }

    /// Ledger of constant tabulated draws over `elapsed_s`.
    pub fn constant(power: &PowerProfile, elapsed_s: f64) -> Self {
        let mut ledger = EnergyLedger::new();
        ledger
            .accrue_interval(power, elapsed_s, true, true)
            .expect("validated power profile and horizon");
        Self::from_ledger(&ledger, elapsed_s, elapsed_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub sat_id: String,
    pub station_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub duration_s: f64,
    /// Time available for transmission after the per-pass overhead.
    pub usable_s: f64,
    pub delivered_bytes: u64,
    pub delivered_result_bytes: u64,
    pub delivered_image_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub time_s: f64,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bytes: Option<u64>,
    /// Start of the busy period this entry closes (inference or transfer).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub busy_from_s: Option<f64>,
}

impl TimelineEntry {
    pub fn new(time_s: f64, kind: &str) -> Self {
        Self {
            time_s,
            kind: kind.to_string(),
            window: None,
            tile: None,
            job_id: None,
            bytes: None,
            busy_from_s: None,
        }
    }
}
