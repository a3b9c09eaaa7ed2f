//! Circular two-body orbits, ground-station elevation and contact windows.
//!
//! The Earth is a sphere of radius [`R_EARTH_KM`] rotating uniformly about
//! its z axis. The Earth-fixed and inertial frames coincide at `t = 0`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{check, Error, FieldError, Result};

/// Mean Earth radius, km.
pub const R_EARTH_KM: f64 = 6371.0;
/// Earth gravitational parameter, km³/s².
pub const MU_EARTH: f64 = 398_600.441_8;
/// Sidereal day, s.
pub const SIDEREAL_DAY_S: f64 = 86_164.090_5;
/// Window boundaries are bisected to this width, s.
pub const BOUNDARY_TOL_S: f64 = 1e-3;
/// Default coarse scan step, s.
pub const DEFAULT_COARSE_STEP_S: f64 = 30.0;

pub type Vec3 = [f64; 3];

fn default_sat_id() -> String {
    "baoyun".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSpec {
    /// Identifier used in contact windows.
    #[serde(default = "default_sat_id")]
    pub sat_id: String,
    pub altitude_km: f64,
    pub inclination_deg: f64,
    /// Right ascension of the ascending node.
    #[serde(default)]
    pub raan_deg: f64,
    /// Argument of latitude at `epoch_s`.
    #[serde(default)]
    pub phase_deg: f64,
    #[serde(default)]
    pub epoch_s: f64,
}

impl OrbitSpec {
    pub fn new(altitude_km: f64, inclination_deg: f64, raan_deg: f64, phase_deg: f64) -> Result<Self> {
        let orbit = OrbitSpec {
            sat_id: default_sat_id(),
            altitude_km,
            inclination_deg,
            raan_deg: normalize_deg(raan_deg),
            phase_deg: normalize_deg(phase_deg),
            epoch_s: 0.0,
        };
        check(orbit.violations("orbit"))?;
        Ok(orbit)
    }

    pub fn violations(&self, prefix: &str) -> Vec<FieldError> {
        let mut v = Vec::new();
        if !(self.altitude_km.is_finite() && self.altitude_km > 0.0) {
            v.push(FieldError::new(
                format!("{prefix}.altitude_km"),
                format!("must be > 0, got {}", self.altitude_km),
            ));
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            v.push(FieldError::new(
                format!("{prefix}.inclination_deg"),
                format!("must be in [0, 180], got {}", self.inclination_deg),
            ));
        }
        for (name, value) in [("raan_deg", self.raan_deg), ("phase_deg", self.phase_deg)] {
            if !value.is_finite() {
                v.push(FieldError::new(format!("{prefix}.{name}"), "must be finite"));
            }
        }
        if !self.epoch_s.is_finite() {
            v.push(FieldError::new(format!("{prefix}.epoch_s"), "must be finite"));
        }
        if self.sat_id.is_empty() {
            v.push(FieldError::new(format!("{prefix}.sat_id"), "must not be empty"));
        }
        v
    }

    pub fn semi_major_axis_km(&self) -> f64 {
        R_EARTH_KM + self.altitude_km
    }

    pub fn mean_motion_rad_s(&self) -> f64 {
        (MU_EARTH / self.semi_major_axis_km().powi(3)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStation {
    pub id: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    #[serde(default = "default_mask")]
    pub min_elevation_deg: f64,
}

fn default_mask() -> f64 {
    10.0
}

impl GroundStation {
    pub fn new(id: impl Into<String>, lat_deg: f64, lon_deg: f64, min_elevation_deg: f64) -> Result<Self> {
        let station = GroundStation {
            id: id.into(),
            lat_deg,
            lon_deg,
            min_elevation_deg,
        };
        check(station.violations("station"))?;
        Ok(station)
    }

    pub fn violations(&self, prefix: &str) -> Vec<FieldError> {
        let mut v = Vec::new();
        if self.id.is_empty() {
            v.push(FieldError::new(format!("{prefix}.id"), "must not be empty"));
        }
        if !(-90.0..=90.0).contains(&self.lat_deg) {
            v.push(FieldError::new(
                format!("{prefix}.lat_deg"),
                format!("must be in [-90, 90], got {}", self.lat_deg),
            ));
        }
        if !(-180.0..=180.0).contains(&self.lon_deg) {
            v.push(FieldError::new(
                format!("{prefix}.lon_deg"),
                format!("must be in [-180, 180], got {}", self.lon_deg),
            ));
        }
        if !(0.0..90.0).contains(&self.min_elevation_deg) {
            v.push(FieldError::new(
                format!("{prefix}.min_elevation_deg"),
                format!("must be in [0, 90), got {}", self.min_elevation_deg),
            ));
        }
        v
    }

    /// Earth-fixed position on the sphere.
    pub fn position_km(&self) -> Vec3 {
        let (lat, lon) = (self.lat_deg.to_radians(), self.lon_deg.to_radians());
        [
            R_EARTH_KM * lat.cos() * lon.cos(),
            R_EARTH_KM * lat.cos() * lon.sin(),
            R_EARTH_KM * lat.sin(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactWindow {
    pub sat_id: String,
    pub station_id: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl ContactWindow {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

pub fn normalize_deg(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360.0 for tiny negative inputs
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Keplerian period of a circular orbit at the given altitude.
pub fn orbital_period(altitude_km: f64) -> Result<f64> {
    if !(altitude_km.is_finite() && altitude_km > 0.0) {
        return Err(Error::invalid(format!("altitude_km must be > 0, got {altitude_km}")));
    }
    let a = R_EARTH_KM + altitude_km;
    Ok(TAU * (a.powi(3) / MU_EARTH).sqrt())
}

/// Position in the inertial frame at time `t`.
pub fn propagate_inertial(orbit: &OrbitSpec, t: f64) -> Result<Vec3> {
    check(orbit.violations("orbit"))?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid(format!("t must be >= 0, got {t}")));
    }
    Ok(inertial_unchecked(orbit, t))
}

fn inertial_unchecked(orbit: &OrbitSpec, t: f64) -> Vec3 {
    let a = orbit.semi_major_axis_km();
    let u = orbit.phase_deg.to_radians() + orbit.mean_motion_rad_s() * (t - orbit.epoch_s);
    let (su, cu) = u.sin_cos();
    let (so, co) = orbit.raan_deg.to_radians().sin_cos();
    let (si, ci) = orbit.inclination_deg.to_radians().sin_cos();
    [
        a * (co * cu - so * su * ci),
        a * (so * cu + co * su * ci),
        a * (su * si),
    ]
}

/// Earth rotation angle at time `t`.
pub fn earth_rotation_rad(t: f64) -> f64 {
    TAU / SIDEREAL_DAY_S * t
}

/// Position in the Earth-fixed frame at time `t`.
pub fn propagate(orbit: &OrbitSpec, t: f64) -> Result<Vec3> {
    let r = propagate_inertial(orbit, t)?;
    Ok(inertial_to_fixed(r, t))
}

fn propagate_unchecked(orbit: &OrbitSpec, t: f64) -> Vec3 {
    inertial_to_fixed(inertial_unchecked(orbit, t), t)
}

fn inertial_to_fixed(r: Vec3, t: f64) -> Vec3 {
    let (s, c) = earth_rotation_rad(t).sin_cos();
    [c * r[0] + s * r[1], -s * r[0] + c * r[1], r[2]]
}

pub fn norm(v: Vec3) -> f64 {
    dot(v, v).sqrt()
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Geometric elevation of `sat_pos` above the station's local horizon plane.
pub fn elevation_deg(station: &GroundStation, sat_pos: Vec3) -> Result<f64> {
    let r = norm(sat_pos);
    if r.is_nan() || r <= R_EARTH_KM {
        return Err(Error::invalid(format!(
            "satellite position is inside the Earth (|r| = {r} km)"
        )));
    }
    Ok(elevation_unchecked(station.position_km(), sat_pos))
}

fn elevation_unchecked(site: Vec3, sat_pos: Vec3) -> f64 {
    let d = [sat_pos[0] - site[0], sat_pos[1] - site[1], sat_pos[2] - site[2]];
    let sin_el = dot(d, site) / (norm(d) * R_EARTH_KM);
    sin_el.clamp(-1.0, 1.0).asin().to_degrees()
}

/// Maximal intervals within `[0, horizon_s]` where the satellite is at or
/// above the station's elevation mask.
///
/// Elevation is sampled every `coarse_step_s`; sign changes are bisected to
/// [`BOUNDARY_TOL_S`]. A pass that peaks above the mask between two samples
/// without any sample above it is recovered by a golden-section search for
/// the elevation maximum around every sampled local maximum.
pub fn contact_windows(
    orbit: &OrbitSpec,
    station: &GroundStation,
    horizon_s: f64,
    coarse_step_s: f64,
) -> Result<Vec<ContactWindow>> {
    if !(horizon_s.is_finite() && horizon_s > 0.0) {
        return Err(Error::invalid(format!("horizon_s must be > 0, got {horizon_s}")));
    }
    if !(coarse_step_s.is_finite() && coarse_step_s > 0.0) {
        return Err(Error::invalid(format!(
            "coarse_step_s must be > 0, got {coarse_step_s}"
        )));
    }
    check(orbit.violations("orbit"))?;
    check(station.violations("station"))?;

    let site = station.position_km();
    let mask = station.min_elevation_deg;
    let margin = |t: f64| elevation_unchecked(site, propagate_unchecked(orbit, t)) - mask;

    let n = (horizon_s / coarse_step_s).ceil() as usize;
    let times: Vec<f64> = (0..=n).map(|k| (k as f64 * coarse_step_s).min(horizon_s)).collect();
    let values: Vec<f64> = times.iter().map(|&t| margin(t)).collect();

    let mut windows = Vec::new();
    let mut open: Option<f64> = if values[0] >= 0.0 { Some(0.0) } else { None };
    for k in 1..times.len() {
        let (t0, t1) = (times[k - 1], times[k]);
        match (values[k - 1] >= 0.0, values[k] >= 0.0) {
            (false, true) => open = Some(bisect(&margin, t0, t1)),
            (true, false) => {
                let end = bisect(&margin, t0, t1);
                if let Some(start) = open.take() {
                    push_window(&mut windows, orbit, station, start, end);
                }
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        push_window(&mut windows, orbit, station, start, horizon_s);
    }

    // grazing passes that peak between samples without any sample above the mask
    let last = times.len() - 1;
    for k in 0..=last {
        let left = if k > 0 { values[k - 1] } else { f64::NEG_INFINITY };
        let right = if k < last { values[k + 1] } else { f64::NEG_INFINITY };
        if values[k] < 0.0 && left < 0.0 && right < 0.0 && values[k] >= left && values[k] >= right {
            let lo = times[k.saturating_sub(1)];
            let hi = times[(k + 1).min(last)];
            find_hidden_pass(&margin, &mut windows, orbit, station, lo, hi);
        }
    }
    windows.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    windows.dedup_by(|b, a| (a.start_s - b.start_s).abs() < BOUNDARY_TOL_S);
    Ok(windows)
}

fn push_window(windows: &mut Vec<ContactWindow>, orbit: &OrbitSpec, station: &GroundStation, start: f64, end: f64) {
    if end > start {
        windows.push(ContactWindow {
            sat_id: orbit.sat_id.clone(),
            station_id: station.id.clone(),
            start_s: start,
            end_s: end,
        });
    }
}

fn find_hidden_pass(
    margin: &impl Fn(f64) -> f64,
    windows: &mut Vec<ContactWindow>,
    orbit: &OrbitSpec,
    station: &GroundStation,
    lo: f64,
    hi: f64,
) {
    let (t_peak, v_peak) = golden_max(margin, lo, hi);
    if v_peak < 0.0 {
        return;
    }
    let start = if margin(lo) >= 0.0 {
        lo
    } else {
        bisect(margin, lo, t_peak)
    };
    let end = if margin(hi) >= 0.0 {
        hi
    } else {
        bisect(margin, t_peak, hi)
    };
    push_window(windows, orbit, station, start, end);
}

/// Bisect a sign change of `f` on `[lo, hi]`; returns the first time at which
/// `f >= 0` to within [`BOUNDARY_TOL_S`] (inside the visible side).
fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let rising = f(lo) < 0.0;
    while hi - lo > BOUNDARY_TOL_S {
        let mid = 0.5 * (lo + hi);
        let visible = f(mid) >= 0.0;
        if visible == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if rising {
        hi
    } else {
        lo
    }
}

fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > BOUNDARY_TOL_S {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let t = 0.5 * (lo + hi);
    (t, f(t))
}

/// Angle subtended at the Earth center by the visibility cone of a station
/// for a given altitude and mask; useful for sanity checks.
pub fn coverage_half_angle_rad(altitude_km: f64, min_elevation_deg: f64) -> f64 {
    let el = min_elevation_deg.to_radians();
    let ratio = R_EARTH_KM / (R_EARTH_KM + altitude_km);
    PI / 2.0 - el - (ratio * el.cos()).asin()
}
