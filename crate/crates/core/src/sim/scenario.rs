//! Declarative description of one simulated deployment.

use serde::{Deserialize, Serialize};

use crate::energy::PowerProfile;
use crate::error::{check, Error, FieldError, Result};
use crate::imaging::{CorpusSpec, FilterPolicy};
use crate::inference::map::DEFAULT_IOU_THRESHOLD;
use crate::inference::{DetectorProfile, RoutingPolicy};
use crate::link::LinkSpec;
use crate::orbit::{normalize_deg, GroundStation, OrbitSpec, DEFAULT_COARSE_STEP_S};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detectors {
    pub onboard: DetectorProfile,
    pub ground: DetectorProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub seed: u64,
    pub horizon_s: f64,
    /// Frame k is captured at (k + 1) * capture_period_s.
    #[serde(default = "default_capture_period")]
    pub capture_period_s: f64,
    /// Soft cap on queued downlink bytes; result messages are always admitted.
    #[serde(default = "default_buffer")]
    pub buffer_capacity_bytes: u64,
    #[serde(default = "default_coarse_step")]
    pub coarse_step_s: f64,
    #[serde(default = "default_iou")]
    pub iou_threshold: f64,
    /// Include the per-event timeline in the report.
    #[serde(default)]
    pub timeline: bool,
}

fn default_capture_period() -> f64 {
    60.0
}
fn default_buffer() -> u64 {
    16_000_000_000
}
fn default_coarse_step() -> f64 {
    DEFAULT_COARSE_STEP_S
}
fn default_iou() -> f64 {
    DEFAULT_IOU_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub orbit: OrbitSpec,
    pub stations: Vec<GroundStation>,
    #[serde(default)]
    pub link: LinkSpec,
    #[serde(default)]
    pub corpus: CorpusSpec,
    pub detectors: Detectors,
    pub policy: RoutingPolicy,
    #[serde(default)]
    pub filter: FilterPolicy,
    #[serde(default)]
    pub power: PowerProfile,
    pub sim: SimSettings,
}

/// Parameters accepted by [`Scenario::set_parameter`] and sweeps.
pub const SWEEP_PARAMETERS: [&str; 6] = [
    "policy.confidence_threshold",
    "corpus.tile_px",
    "link.loss_prob",
    "link.downlink_mbps",
    "link.uplink_mbps",
    "filter.cloud_threshold",
];

/// Reject names outside [`SWEEP_PARAMETERS`].
pub fn check_parameter(name: &str) -> Result<()> {
    if SWEEP_PARAMETERS.contains(&name) {
        Ok(())
    } else {
        Err(Error::Validation(vec![FieldError::new(
            name,
            format!(
                "not a sweepable parameter; expected one of {}",
                SWEEP_PARAMETERS.join(", ")
            ),
        )]))
    }
}

impl Scenario {
    /// Parse TOML text. A `preset` key in `[corpus]` selects a named corpus
    /// preset that the remaining keys of the section override.
    pub fn from_toml_str(text: &str, source: &str) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: source.to_string(),
            message,
        };
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        if let Some(toml::Value::Table(corpus)) = doc.get_mut("corpus") {
            if let Some(preset) = corpus.remove("preset") {
                let name = preset
                    .as_str()
                    .ok_or_else(|| parse_err("corpus.preset must be a string".into()))?;
                let spec = CorpusSpec::preset(name)
                    .ok_or_else(|| parse_err(format!("corpus.preset: unknown preset {name:?}")))?;
                let mut base = toml::Table::try_from(&spec).map_err(|e| parse_err(e.to_string()))?;
                base.extend(std::mem::take(corpus));
                *corpus = base;
            }
        }
        let mut scenario: Scenario = doc.try_into().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        scenario.normalize();
        scenario.validate()?;
        Ok(scenario)
    }

    /// Render with every default resolved.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario is representable as TOML")
    }

    pub fn normalize(&mut self) {
        self.orbit.raan_deg = normalize_deg(self.orbit.raan_deg);
        self.orbit.phase_deg = normalize_deg(self.orbit.phase_deg);
    }

    pub fn violations(&self) -> Vec<FieldError> {
        let mut v = self.orbit.violations("orbit");
        if self.stations.is_empty() {
            v.push(FieldError::new("stations", "at least one ground station is required"));
        }
        for (i, s) in self.stations.iter().enumerate() {
            v.extend(s.violations(&format!("stations[{i}]")));
            if self.stations[..i].iter().any(|o| o.id == s.id) {
                v.push(FieldError::new(
                    format!("stations[{i}].id"),
                    format!("duplicate id {:?}", s.id),
                ));
            }
        }
        v.extend(self.link.violations("link"));
        v.extend(self.corpus.violations("corpus"));
        let classes = self.corpus.num_classes;
        v.extend(self.detectors.onboard.violations("detectors.onboard", classes));
        v.extend(self.detectors.ground.violations("detectors.ground", classes));
        v.extend(self.policy.violations("policy"));
        v.extend(self.filter.violations("filter"));
        v.extend(self.power.violations("power"));

        let s = &self.sim;
        if !(s.horizon_s.is_finite() && s.horizon_s > 0.0) {
            v.push(FieldError::new(
                "sim.horizon_s",
                format!("must be > 0, got {}", s.horizon_s),
            ));
        }
        if !(s.capture_period_s.is_finite() && s.capture_period_s > 0.0) {
            v.push(FieldError::new(
                "sim.capture_period_s",
                format!("must be > 0, got {}", s.capture_period_s),
            ));
        }
        if !(s.coarse_step_s.is_finite() && s.coarse_step_s > 0.0) {
            v.push(FieldError::new(
                "sim.coarse_step_s",
                format!("must be > 0, got {}", s.coarse_step_s),
            ));
        }
        if !(0.0..=1.0).contains(&s.iou_threshold) {
            v.push(FieldError::new(
                "sim.iou_threshold",
                format!("must be in [0, 1], got {}", s.iou_threshold),
            ));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        check(self.violations())
    }

    /// Set one allowlisted parameter, then revalidate.
    pub fn set_parameter(&mut self, name: &str, value: f64) -> Result<()> {
        check_parameter(name)?;
        match name {
            "policy.confidence_threshold" => self.policy.confidence_threshold = value,
            "corpus.tile_px" => {
                if !(value.fract() == 0.0 && value >= 1.0 && value <= u32::MAX as f64) {
                    return Err(Error::Validation(vec![FieldError::new(
                        name,
                        format!("must be a positive integer, got {value}"),
                    )]));
                }
                self.corpus.tile_px = value as u32;
            }
            "link.loss_prob" => self.link.loss_prob = value,
            "link.downlink_mbps" => self.link.downlink_mbps = value,
            "link.uplink_mbps" => self.link.uplink_mbps = value,
            "filter.cloud_threshold" => self.filter.cloud_threshold = value,
            _ => unreachable!("checked against the allowlist"),
        }
        self.validate()
    }

    /// Frames captured within the horizon.
    pub fn captured_frames(&self) -> u64 {
        let s = &self.sim;
        let fit = ((s.horizon_s / s.capture_period_s).ceil() - 1.0).max(0.0) as u64;
        fit.min(self.corpus.num_frames as u64)
    }

    pub fn capture_time(&self, frame: u64) -> f64 {
        (frame + 1) as f64 * self.sim.capture_period_s
    }
}
