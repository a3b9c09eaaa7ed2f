//! Scenarios, the discrete-event engine, reports, sweeps and batch runs.

pub mod accuracy;
pub mod engine;
pub mod report;
pub mod scenario;

use rayon::prelude::*;

pub use accuracy::{calibrate_scenario, calibration_set, compare_accuracy, kept_tiles};
pub use engine::{run, station_windows, transmit_windows};
pub use report::{AccuracyBlock, DataBlock, EnergyBlock, EnergyReading, Report, TimelineEntry, WindowReport};
pub use scenario::{check_parameter, Detectors, Scenario, SimSettings, SWEEP_PARAMETERS};

use crate::error::{Error, Result};

/// Run independent scenarios on a pool of `threads` workers (0 = all
/// cores). Results are in input order and do not depend on the pool size.
pub fn run_batch(scenarios: &[Scenario], threads: usize) -> Result<Vec<Report>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| scenarios.par_iter().map(run).collect())
}

/// Run `base` once per value of `parameter`. Every run keeps the base seed,
/// so values differ only in the swept parameter.
pub fn sweep(base: &Scenario, parameter: &str, values: &[f64], threads: usize) -> Result<Vec<(f64, Report)>> {
    scenario::check_parameter(parameter)?;
    let scenarios = values
        .iter()
        .map(|&v| {
            let mut s = base.clone();
            s.set_parameter(parameter, v)?;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let reports = run_batch(&scenarios, threads)?;
    Ok(values.iter().copied().zip(reports).collect())
}
