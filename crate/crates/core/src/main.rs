use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use satcollab::cli;
use satcollab::inference::calibrate::{Budget, CalibrationTargets};
use satcollab::inference::map::DEFAULT_IOU_THRESHOLD;

/// Satellite-ground collaborative inference simulator.
///
/// SCENARIO arguments accept a file path, a name looked up as
/// `$SATCOLLAB_SCENARIO_DIR/<name>.toml`, or a built-in scenario:
/// baoyun_default, config_b, downlink_stress.
#[derive(Parser)]
#[command(name = "satcollab", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its JSON report.
    Run {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// List contact windows as CSV.
    Windows {
        scenario: String,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Evaluate mAP of a prediction file against a ground-truth file.
    EvalMap {
        gt: PathBuf,
        pred: PathBuf,
        #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
        iou: f64,
    },
    /// Run a scenario once per value of one parameter and tabulate key metrics.
    Sweep {
        scenario: String,
        /// One of: policy.confidence_threshold, corpus.tile_px, link.loss_prob,
        /// link.downlink_mbps, link.uplink_mbps, filter.cloud_threshold.
        parameter: String,
        /// Comma-separated values.
        #[arg(value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Fit the scenario's onboard profile to target accuracy figures.
    Calibrate {
        scenario: String,
        #[arg(long)]
        target_map: f64,
        #[arg(long)]
        target_gain: f64,
        #[arg(long, default_value_t = 0.02)]
        map_tolerance: f64,
        #[arg(long, default_value_t = 0.03)]
        gain_tolerance: f64,
        /// Seeds of the calibration corpora, comma-separated.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "1001,1002,1003,1004,1005,1006,1007,1008"
        )]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 200)]
        max_evaluations: usize,
        /// Keep refining until the tolerance-normalised squared error drops below this.
        #[arg(long, default_value_t = 1.0)]
        refine_loss: f64,
    },
    /// Write the scenario's synthetic corpus as annotation lines.
    Corpus {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Print a scenario with every default resolved.
    Show { scenario: String },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let code = match args.command {
        Command::Run {
            scenario,
            seed,
            out: path,
        } => cli::cmd_run(&scenario, seed, path.as_deref(), &mut out),
        Command::Windows { scenario, out: path } => cli::cmd_windows(&scenario, path.as_deref(), &mut out),
        Command::EvalMap { gt, pred, iou } => cli::cmd_eval_map(&gt, &pred, iou, &mut out),
        Command::Sweep {
            scenario,
            parameter,
            values,
            threads,
            out: path,
        } => cli::cmd_sweep(&scenario, &parameter, &values, threads, path.as_deref(), &mut out),
        Command::Calibrate {
            scenario,
            target_map,
            target_gain,
            map_tolerance,
            gain_tolerance,
            seeds,
            max_evaluations,
            refine_loss,
        } => cli::cmd_calibrate(
            &scenario,
            &CalibrationTargets {
                onboard_map: target_map,
                gain: target_gain,
                map_tolerance,
                gain_tolerance,
            },
            &seeds,
            Budget {
                max_evaluations,
                refine_loss,
            },
            &mut out,
        ),
        Command::Corpus {
            scenario,
            seed,
            out: path,
        } => cli::cmd_corpus(&scenario, seed, &path, &mut out),
        Command::Show { scenario } => cli::cmd_show(&scenario, &mut out),
    };
    ExitCode::from(code as u8)
}
