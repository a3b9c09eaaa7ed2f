//! Per-subsystem energy accounting.
//!
//! Two meter views are kept side by side. The bus view has one meter per
//! top-level subsystem, `Payloads` included, and is the basis of every
//! fraction. The rail view has one meter per payload child. The children are
//! configured independently of the payload bus reading, so their sum may
//! differ from it; [`EnergyLedger::payload_discrepancy_j`] reports the gap
//! instead of hiding it.
//!
//! Compute is the one rail that also moves the bus reading: the payload bus
//! draws `payloads_w - compute_active_w` plus whatever Compute draws, so a
//! duty-cycled Compute lowers the payload bus meter accordingly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsystemId {
    Electrical,
    Propulsion,
    Guidance,
    Avionics,
    Comm,
    Payloads,
    Camera,
    Occultation,
    Tribology,
    Mems,
    Adsbs,
    Compute,
}

impl SubsystemId {
    pub const TOP_LEVEL: [SubsystemId; 6] = [
        SubsystemId::Electrical,
        SubsystemId::Propulsion,
        SubsystemId::Guidance,
        SubsystemId::Avionics,
        SubsystemId::Comm,
        SubsystemId::Payloads,
    ];

    pub const PAYLOAD_CHILDREN: [SubsystemId; 6] = [
        SubsystemId::Camera,
        SubsystemId::Occultation,
        SubsystemId::Tribology,
        SubsystemId::Mems,
        SubsystemId::Adsbs,
        SubsystemId::Compute,
    ];

    pub fn is_payload_child(self) -> bool {
        Self::PAYLOAD_CHILDREN.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            SubsystemId::Electrical => "electrical",
            SubsystemId::Propulsion => "propulsion",
            SubsystemId::Guidance => "guidance",
            SubsystemId::Avionics => "avionics",
            SubsystemId::Comm => "comm",
            SubsystemId::Payloads => "payloads",
            SubsystemId::Camera => "camera",
            SubsystemId::Occultation => "occultation",
            SubsystemId::Tribology => "tribology",
            SubsystemId::Mems => "mems",
            SubsystemId::Adsbs => "adsbs",
            SubsystemId::Compute => "compute",
        }
    }
}

/// Watts per subsystem. Compute and Comm have idle and active levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerProfile {
    pub electrical_w: f64,
    pub propulsion_w: f64,
    pub guidance_w: f64,
    pub avionics_w: f64,
    pub comm_idle_w: f64,
    pub comm_active_w: f64,
    /// Payload bus reading with Compute active.
    pub payloads_w: f64,
    pub camera_w: f64,
    pub occultation_w: f64,
    pub tribology_w: f64,
    pub mems_w: f64,
    pub adsbs_w: f64,
    pub compute_idle_w: f64,
    pub compute_active_w: f64,
}

impl Default for PowerProfile {
    fn default() -> Self {
        Self {
            electrical_w: 1.47,
            propulsion_w: 7.00,
            guidance_w: 5.43,
            avionics_w: 4.81,
            comm_idle_w: 5.43,
            comm_active_w: 5.43,
            payloads_w: 26.93,
            camera_w: 0.09,
            occultation_w: 6.26,
            tribology_w: 5.68,
            mems_w: 0.95,
            adsbs_w: 6.12,
            compute_idle_w: 2.0,
            compute_active_w: 8.78,
        }
    }
}

impl PowerProfile {
    pub fn violations(&self, prefix: &str) -> Vec<FieldError> {
        let mut v = Vec::new();
        for (name, w) in self.fields() {
            if !(w.is_finite() && w >= 0.0) {
                v.push(FieldError::new(
                    format!("{prefix}.{name}"),
                    format!("must be >= 0, got {w}"),
                ));
            }
        }
        if self.payloads_w < self.compute_active_w {
            v.push(FieldError::new(
                format!("{prefix}.payloads_w"),
                "must be at least compute_active_w",
            ));
        }
        v
    }

    fn fields(&self) -> [(&'static str, f64); 14] {
        [
            ("electrical_w", self.electrical_w),
            ("propulsion_w", self.propulsion_w),
            ("guidance_w", self.guidance_w),
            ("avionics_w", self.avionics_w),
            ("comm_idle_w", self.comm_idle_w),
            ("comm_active_w", self.comm_active_w),
            ("payloads_w", self.payloads_w),
            ("camera_w", self.camera_w),
            ("occultation_w", self.occultation_w),
            ("tribology_w", self.tribology_w),
            ("mems_w", self.mems_w),
            ("adsbs_w", self.adsbs_w),
            ("compute_idle_w", self.compute_idle_w),
            ("compute_active_w", self.compute_active_w),
        ]
    }

    /// Draw of every subsystem for the given Compute and Comm states.
    pub fn draw(&self, compute_active: bool, comm_active: bool) -> [(SubsystemId, f64); 12] {
        let compute = if compute_active {
            self.compute_active_w
        } else {
            self.compute_idle_w
        };
        let comm = if comm_active {
            self.comm_active_w
        } else {
            self.comm_idle_w
        };
        [
            (SubsystemId::Electrical, self.electrical_w),
            (SubsystemId::Propulsion, self.propulsion_w),
            (SubsystemId::Guidance, self.guidance_w),
            (SubsystemId::Avionics, self.avionics_w),
            (SubsystemId::Comm, comm),
            (SubsystemId::Payloads, self.payloads_w - self.compute_active_w + compute),
            (SubsystemId::Camera, self.camera_w),
            (SubsystemId::Occultation, self.occultation_w),
            (SubsystemId::Tribology, self.tribology_w),
            (SubsystemId::Mems, self.mems_w),
            (SubsystemId::Adsbs, self.adsbs_w),
            (SubsystemId::Compute, compute),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub joules: BTreeMap<SubsystemId, f64>,
    pub total_elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyFractions {
    /// Share of the bus total for each top-level subsystem.
    pub top_level: BTreeMap<SubsystemId, f64>,
    /// Share of the payload bus reading for each payload child.
    pub payload_children: BTreeMap<SubsystemId, f64>,
    pub payloads_over_total: f64,
    pub compute_over_payloads: f64,
    pub compute_over_total: f64,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accrue(&mut self, subsystem: SubsystemId, watts: f64, duration_s: f64) -> Result<()> {
        if !(watts.is_finite() && watts >= 0.0) {
            return Err(Error::invalid(format!("watts must be >= 0, got {watts}")));
        }
        if !(duration_s.is_finite() && duration_s >= 0.0) {
            return Err(Error::invalid(format!("duration_s must be >= 0, got {duration_s}")));
        }
        if watts > 0.0 && duration_s > 0.0 {
            *self.joules.entry(subsystem).or_insert(0.0) += watts * duration_s;
        }
        Ok(())
    }

    /// Accrue every subsystem over one interval in the given state and
    /// advance the clock.
    pub fn accrue_interval(
        &mut self,
        profile: &PowerProfile,
        duration_s: f64,
        compute_active: bool,
        comm_active: bool,
    ) -> Result<()> {
        for (id, w) in profile.draw(compute_active, comm_active) {
            self.accrue(id, w, duration_s)?;
        }
        self.total_elapsed_s += duration_s;
        Ok(())
    }

    pub fn get(&self, subsystem: SubsystemId) -> f64 {
        self.joules.get(&subsystem).copied().unwrap_or(0.0)
    }

    /// Bus total: the sum of the top-level meters.
    pub fn total_j(&self) -> f64 {
        SubsystemId::TOP_LEVEL.iter().map(|&s| self.get(s)).sum()
    }

    /// Sum of the payload child rails.
    pub fn payload_children_j(&self) -> f64 {
        SubsystemId::PAYLOAD_CHILDREN.iter().map(|&s| self.get(s)).sum()
    }

    /// Children sum minus payload bus reading.
    pub fn payload_discrepancy_j(&self) -> f64 {
        self.payload_children_j() - self.get(SubsystemId::Payloads)
    }

    pub fn average_w(&self, subsystem: SubsystemId) -> f64 {
        if self.total_elapsed_s > 0.0 {
            self.get(subsystem) / self.total_elapsed_s
        } else {
            0.0
        }
    }

    pub fn fractions(&self) -> Result<EnergyFractions> {
        let total = self.total_j();
        if total <= 0.0 {
            return Err(Error::ZeroEnergy);
        }
        let payloads = self.get(SubsystemId::Payloads);
        let compute = self.get(SubsystemId::Compute);
        let top_level = SubsystemId::TOP_LEVEL
            .iter()
            .map(|&s| (s, self.get(s) / total))
            .collect();
        let payload_children = SubsystemId::PAYLOAD_CHILDREN
            .iter()
            .map(|&s| (s, if payloads > 0.0 { self.get(s) / payloads } else { 0.0 }))
            .collect();
        Ok(EnergyFractions {
            top_level,
            payload_children,
            payloads_over_total: payloads / total,
            compute_over_payloads: if payloads > 0.0 { compute / payloads } else { 0.0 },
            compute_over_total: compute / total,
        })
    }
}
