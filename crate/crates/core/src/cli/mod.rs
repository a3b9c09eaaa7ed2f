//! Scenario loading, report files and the command implementations behind the
//! `satcollab` binary.
//!
//! Commands write machine-readable output atomically (temporary file, then
//! rename) and a short human summary to the given writer. They return the
//! process exit code: 0 on success, 2 for invalid input, 3 for I/O failures,
//! 1 for anything else.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::annotations::write_corpus;
use crate::imaging::corpus::generate_corpus;
use crate::inference::calibrate::{Budget, Calibration, CalibrationTargets};
use crate::inference::{evaluate_map, interchange};
use crate::sim::{self, Report, Scenario};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Directory searched for `<name>.toml` when a scenario argument is not a path.
pub const SCENARIO_DIR_ENV: &str = "SATCOLLAB_SCENARIO_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Scenarios compiled into the binary.
pub const BUILTIN_SCENARIOS: [(&str, &str); 3] = [
    ("baoyun_default", include_str!("../../scenarios/baoyun_default.toml")),
    ("config_b", include_str!("../../scenarios/config_b.toml")),
    ("downlink_stress", include_str!("../../scenarios/downlink_stress.toml")),
];

/// Values that are calibration choices rather than tabulated constants.
pub const CALIBRATED_INPUTS: [&str; 6] = [
    "corpus.redundant_fraction",
    "corpus.objects_per_nonredundant_tile",
    "detectors.onboard",
    "detectors.ground",
    "policy.confidence_threshold",
    "detectors.onboard.latency_s_per_tile",
];

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::InvalidArgument(_) | Error::Validation(_) | Error::NoGroundTruth | Error::Parse { .. } => EXIT_INVALID,
        Error::ZeroEnergy | Error::Calibration(_) => EXIT_FAILURE,
    }
}

pub fn builtin_scenario(name: &str) -> Option<&'static str> {
    BUILTIN_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

/// Resolve a scenario argument: an existing file, then
/// `$SATCOLLAB_SCENARIO_DIR/<arg>.toml`, then a built-in name.
pub fn load_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if path.is_file() {
        return load_scenario_file(path);
    }
    if let Some(dir) = std::env::var_os(SCENARIO_DIR_ENV) {
        let candidate = PathBuf::from(dir).join(format!("{arg}.toml"));
        if candidate.is_file() {
            return load_scenario_file(&candidate);
        }
    }
    match builtin_scenario(arg) {
        Some(text) => Scenario::from_toml_str(text, arg),
        None => Err(Error::io(
            path,
            io::Error::new(io::ErrorKind::NotFound, "no such scenario file or built-in scenario"),
        )),
    }
}

pub fn load_scenario_file(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_toml_str(&text, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub seed_override: Option<u64>,
    pub tool_version: String,
    pub calibrated_inputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub schema_version: u32,
    /// The scenario as run, with every default resolved and any seed
    /// override applied.
    pub scenario: Scenario,
    pub provenance: Provenance,
    #[serde(flatten)]
    pub report: Report,
}

impl ReportFile {
    pub fn new(scenario: Scenario, seed_override: Option<u64>, report: Report) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            provenance: Provenance {
                seed: scenario.sim.seed,
                seed_override,
                tool_version: TOOL_VERSION.to_string(),
                calibrated_inputs: CALIBRATED_INPUTS.iter().map(|s| s.to_string()).collect(),
            },
            scenario,
            report,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serialisable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: source.to_string(),
            message: e.to_string(),
        })
    }
}

/// Write `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn fail(err: &Error, out: &mut dyn Write) -> i32 {
    let _ = writeln!(out, "error: {err}");
    exit_code(err)
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{:.1}%", 100.0 * v))
}

pub fn summary(file: &ReportFile) -> String {
    let r = &file.report;
    let d = &r.data;
    let a = &r.accuracy;
    let e = &r.energy.constant;
    let dc = &r.energy.duty_cycled;
    let mut s = String::new();
    s += &format!(
        "seed {}  horizon {:.0} s  frames {}  windows {}\n",
        file.scenario.sim.seed,
        file.scenario.sim.horizon_s,
        d.frames_captured,
        r.windows.len()
    );
    s += &format!(
        "filter rate           {}  ({} of {} tiles)\n",
        pct(Some(r.filter_rate)),
        d.tiles_filtered_out,
        d.tiles_total
    );
    s += &format!(
        "data reduction        {}  ({} of {} bytes returned)\n",
        pct(d.reduction_fraction),
        d.bytes_delivered(),
        d.bytes_raw
    );
    s += &format!(
        "mAP onboard / collab  {} / {}  gain {}  offload {}\n",
        a.onboard_only_map.map_or("n/a".into(), |v| format!("{v:.4}")),
        a.collaborative_map.map_or("n/a".into(), |v| format!("{v:.4}")),
        pct(a.relative_gain),
        pct(a.offload_fraction)
    );
    s += &format!(
        "energy (constant)     payloads/total {}  compute/payloads {}  compute/total {}\n",
        pct(e.payloads_over_total),
        pct(e.compute_over_payloads),
        pct(e.compute_over_total)
    );
    s += &format!(
        "energy (duty-cycled)  payloads/total {}  compute/payloads {}  compute/total {}\n",
        pct(dc.payloads_over_total),
        pct(dc.compute_over_payloads),
        pct(dc.compute_over_total)
    );
    if let Some(note) = &a.note {
        s += &format!("note: {note}\n");
    }
    s
}

/// Run a scenario and write its report file.
pub fn cmd_run(scenario: &str, seed_override: Option<u64>, out_path: Option<&Path>, out: &mut dyn Write) -> i32 {
    match run_report(scenario, seed_override) {
        Ok(file) => {
            if let Some(path) = out_path {
                if let Err(e) = write_atomic(path, file.to_json().as_bytes()) {
                    return fail(&e, out);
                }
            }
            let _ = out.write_all(summary(&file).as_bytes());
            EXIT_OK
        }
        Err(e) => fail(&e, out),
    }
}

pub fn run_report(scenario: &str, seed_override: Option<u64>) -> Result<ReportFile> {
    let mut sc = load_scenario(scenario)?;
    if let Some(seed) = seed_override {
        sc.sim.seed = seed;
    }
    let report = sim::run(&sc)?;
    Ok(ReportFile::new(sc, seed_override, report))
}

/// Contact windows of every station as CSV.
pub fn windows_csv(sc: &Scenario) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::invalid(e.to_string());
    w.write_record(["sat", "station", "start_s", "end_s", "duration_s"])
        .map_err(wrap)?;
    for cw in sim::station_windows(sc)? {
        w.write_record([
            cw.sat_id.clone(),
            cw.station_id.clone(),
            format!("{:.3}", cw.start_s),
            format!("{:.3}", cw.end_s),
            format!("{:.3}", cw.duration_s()),
        ])
        .map_err(wrap)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn cmd_windows(scenario: &str, out_path: Option<&Path>, out: &mut dyn Write) -> i32 {
    let result = load_scenario(scenario).and_then(|sc| windows_csv(&sc));
    match result {
        Ok(table) => emit(out_path, &table, out),
        Err(e) => fail(&e, out),
    }
}

fn emit(out_path: Option<&Path>, text: &str, out: &mut dyn Write) -> i32 {
    match out_path {
        Some(path) => match write_atomic(path, text.as_bytes()) {
            Ok(()) => EXIT_OK,
            Err(e) => fail(&e, out),
        },
        None => {
            let _ = out.write_all(text.as_bytes());
            EXIT_OK
        }
    }
}

/// Per-class AP and mAP of interchange files, four decimals.
pub fn eval_map_text(gt_path: &Path, pred_path: &Path, iou_threshold: f64) -> Result<String> {
    let open = |p: &Path| fs::File::open(p).map_err(|e| Error::io(p, e));
    let gt = interchange::read_ground_truth(open(gt_path)?, &gt_path.display().to_string())?;
    let preds = interchange::read_predictions(open(pred_path)?, &pred_path.display().to_string())?;
    let r = evaluate_map(&gt, &preds, iou_threshold)?;
    let mut s = String::new();
    for (class, ap) in &r.per_class {
        s += &format!("class {class}  AP {ap:.4}\n");
    }
    s += &format!("mAP {:.4}\n", r.map);
    Ok(s)
}

pub fn cmd_eval_map(gt_path: &Path, pred_path: &Path, iou_threshold: f64, out: &mut dyn Write) -> i32 {
    match eval_map_text(gt_path, pred_path, iou_threshold) {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(e) => fail(&e, out),
    }
}

/// One row per swept value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub reduction_fraction: Option<f64>,
    pub filter_rate: f64,
    pub offload_fraction: Option<f64>,
    pub onboard_only_map: Option<f64>,
    pub collaborative_map: Option<f64>,
    pub relative_gain: Option<f64>,
    pub bytes_delivered: u64,
    pub bytes_result_msgs: u64,
    pub bytes_tiles_downlinked: u64,
    pub bytes_buffered_at_end: u64,
    pub bytes_dropped: u64,
    pub compute_over_total: Option<f64>,
}

impl SweepRow {
    pub fn from_report(value: f64, r: &Report) -> Self {
        Self {
            value,
            reduction_fraction: r.data.reduction_fraction,
            filter_rate: r.filter_rate,
            offload_fraction: r.accuracy.offload_fraction,
            onboard_only_map: r.accuracy.onboard_only_map,
            collaborative_map: r.accuracy.collaborative_map,
            relative_gain: r.accuracy.relative_gain,
            bytes_delivered: r.data.bytes_delivered(),
            bytes_result_msgs: r.data.bytes_result_msgs,
            bytes_tiles_downlinked: r.data.bytes_tiles_downlinked,
            bytes_buffered_at_end: r.data.bytes_buffered_at_end,
            bytes_dropped: r.data.bytes_dropped,
            compute_over_total: r.energy.constant.compute_over_total,
        }
    }
}

pub fn sweep_rows(scenario: &str, parameter: &str, values: &[f64], threads: usize) -> Result<Vec<SweepRow>> {
    sim::check_parameter(parameter)?;
    let sc = load_scenario(scenario)?;
    Ok(sim::sweep(&sc, parameter, values, threads)?
        .iter()
        .map(|(v, r)| SweepRow::from_report(*v, r))
        .collect())
}

pub fn sweep_csv(parameter: &str, rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::invalid(e.to_string());
    w.write_record([
        parameter,
        "reduction_fraction",
        "filter_rate",
        "offload_fraction",
        "onboard_only_map",
        "collaborative_map",
        "relative_gain",
        "bytes_delivered",
        "bytes_result_msgs",
        "bytes_tiles_downlinked",
        "bytes_buffered_at_end",
        "bytes_dropped",
        "compute_over_total",
    ])
    .map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn cmd_sweep(
    scenario: &str,
    parameter: &str,
    values: &[f64],
    threads: usize,
    out_path: Option<&Path>,
    out: &mut dyn Write,
) -> i32 {
    match sweep_rows(scenario, parameter, values, threads).and_then(|rows| sweep_csv(parameter, &rows)) {
        Ok(table) => emit(out_path, &table, out),
        Err(e) => fail(&e, out),
    }
}

/// Fit the scenario's onboard profile and print it as a TOML section.
pub fn cmd_calibrate(
    scenario: &str,
    targets: &CalibrationTargets,
    seeds: &[u64],
    budget: Budget,
    out: &mut dyn Write,
) -> i32 {
    let result = load_scenario(scenario).and_then(|sc| sim::calibrate_scenario(&sc, targets, seeds, budget));
    match result {
        Ok(c) => {
            let _ = out.write_all(calibration_text(&c).as_bytes());
            EXIT_OK
        }
        Err(Error::Calibration(best)) => {
            let _ = out.write_all(calibration_text(&best).as_bytes());
            fail(&Error::Calibration(best), out)
        }
        Err(e) => fail(&e, out),
    }
}

pub fn calibration_text(c: &Calibration) -> String {
    #[derive(Serialize)]
    struct Onboard<'a> {
        onboard: &'a crate::inference::DetectorProfile,
    }
    #[derive(Serialize)]
    struct Doc<'a> {
        detectors: Onboard<'a>,
    }
    let doc = Doc {
        detectors: Onboard { onboard: &c.onboard },
    };
    let mut s = format!(
        "# onboard mAP {:.4}  collaborative mAP {:.4}  gain {:.4}  offload {:.4}  evaluations {}  converged {}\n",
        c.onboard_map, c.collaborative_map, c.gain, c.offload_fraction, c.evaluations, c.converged
    );
    s += &toml::to_string(&doc).expect("profile is representable as TOML");
    s
}

/// Generate the scenario's corpus and write it as annotation lines.
pub fn cmd_corpus(scenario: &str, seed_override: Option<u64>, out_path: &Path, out: &mut dyn Write) -> i32 {
    let result = load_scenario(scenario).and_then(|sc| {
        let frames = generate_corpus(&sc.corpus, seed_override.unwrap_or(sc.sim.seed))?;
        let mut buf = Vec::new();
        write_corpus(&mut buf, &frames).map_err(|e| Error::io(out_path, e))?;
        write_atomic(out_path, &buf)?;
        Ok(frames.len())
    });
    match result {
        Ok(n) => {
            let _ = writeln!(out, "wrote {n} frames to {}", out_path.display());
            EXIT_OK
        }
        Err(e) => fail(&e, out),
    }
}

/// Print a scenario with every default resolved.
pub fn cmd_show(scenario: &str, out: &mut dyn Write) -> i32 {
    match load_scenario(scenario) {
        Ok(sc) => {
            let _ = out.write_all(sc.to_toml_string().as_bytes());
            EXIT_OK
        }
        Err(e) => fail(&e, out),
    }
}
