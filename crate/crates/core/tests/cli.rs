use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use satcollab::cli::{self, load_scenario, ReportFile, EXIT_FAILURE, EXIT_INVALID, EXIT_IO, EXIT_OK, SCENARIO_DIR_ENV};
use satcollab::sim::{self, Scenario};
use tempfile::TempDir;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_satcollab"))
        .args(args)
        .output()
        .unwrap()
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn small(dir: &Path, name: &str, edit: impl FnOnce(&mut Scenario)) -> String {
    let mut s = load_scenario("baoyun_default").unwrap();
    s.corpus.num_frames = 30;
    s.sim.horizon_s = 20_000.0;
    s.sim.capture_period_s = 300.0;
    edit(&mut s);
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, s.to_toml_string()).unwrap();
    path.display().to_string()
}

#[test]
fn invalid_scenario_names_the_field_and_exits_2() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.toml");
    let original = cli::builtin_scenario("baoyun_default").unwrap();
    fs::write(&path, original.replace("altitude_km = 500.0", "altitude_km = -5.0")).unwrap();
    let o = bin(&["run", path.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_INVALID, "{}", text(&o));
    assert!(text(&o).contains("orbit.altitude_km"), "{}", text(&o));

    fs::write(&path, original.replace("[sim]", "[sim]\nwarp_drive = true")).unwrap();
    let o = bin(&["show", path.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_INVALID, "{}", text(&o));
    assert!(text(&o).contains("warp_drive"));
}

#[test]
fn missing_scenario_is_an_io_error() {
    let o = bin(&["run", "/nonexistent/nowhere.toml"]);
    assert_eq!(code(&o), EXIT_IO, "{}", text(&o));
}

#[test]
fn seed_override_is_recorded_in_provenance() {
    let file = cli::run_report("baoyun_default", Some(7)).unwrap();
    assert_eq!(file.provenance.seed, 7);
    assert_eq!(file.provenance.seed_override, Some(7));
    assert_eq!(file.scenario.sim.seed, 7);
    let plain = cli::run_report("baoyun_default", None).unwrap();
    assert_eq!(plain.provenance.seed_override, None);
    assert_ne!(plain.report, file.report);
}

#[test]
fn report_file_reruns_byte_identically() {
    let dir = TempDir::new().unwrap();
    let scenario = small(dir.path(), "s", |s| s.sim.timeline = true);
    let first = dir.path().join("first.json");
    let o = bin(&["run", &scenario, "--seed", "42", "--out", first.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK, "{}", text(&o));
    let json = fs::read_to_string(&first).unwrap();
    let parsed = ReportFile::from_json(&json, "first.json").unwrap();
    assert_eq!(parsed.to_json(), json);

    // re-run the echoed scenario
    let echo = dir.path().join("echo.toml");
    fs::write(&echo, parsed.scenario.to_toml_string()).unwrap();
    let second = dir.path().join("second.json");
    let o = bin(&["run", echo.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK);
    let again = ReportFile::from_json(&fs::read_to_string(&second).unwrap(), "second.json").unwrap();
    assert_eq!(again.report, parsed.report);
    assert_eq!(again.scenario, parsed.scenario);
    let rerun = sim::run(&parsed.scenario).unwrap();
    assert_eq!(
        serde_json::to_string(&rerun).unwrap(),
        serde_json::to_string(&parsed.report).unwrap()
    );
}

#[test]
fn windows_table_is_sorted_with_positive_durations() {
    let o = bin(&["windows", "baoyun_default"]);
    assert_eq!(code(&o), EXIT_OK);
    let out = String::from_utf8(o.stdout).unwrap();
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("sat,station,start_s,end_s,duration_s"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').skip(2).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(!rows.is_empty());
    for r in &rows {
        assert!(r[2] > 0.0 && r[1] > r[0]);
    }
    for pair in rows.windows(2) {
        assert!(pair[0][0] <= pair[1][0]);
    }

    let dir = TempDir::new().unwrap();
    let steep = small(dir.path(), "steep", |s| s.stations[0].min_elevation_deg = 89.9);
    let o = bin(&["windows", &steep]);
    assert_eq!(code(&o), EXIT_OK);
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        "sat,station,start_s,end_s,duration_s\n"
    );
}

#[test]
fn scenario_directory_variable_is_searched() {
    let dir = TempDir::new().unwrap();
    small(dir.path(), "tiny", |s| s.sim.seed = 99);
    let o = Command::new(env!("CARGO_BIN_EXE_satcollab"))
        .args(["show", "tiny"])
        .env(SCENARIO_DIR_ENV, dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), EXIT_OK, "{}", text(&o));
    let shown = Scenario::from_toml_str(&String::from_utf8(o.stdout).unwrap(), "stdout").unwrap();
    assert_eq!(shown.sim.seed, 99);
    assert_eq!(shown.corpus.num_frames, 30);
}

#[test]
fn eval_map_prints_per_class_and_mean() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt.csv");
    fs::write(
        &gt,
        "tile_id,class_id,x_min,y_min,x_max,y_max\na,0,0,0,10,10\na,0,50,50,60,60\n",
    )
    .unwrap();
    let cases = [
        ("a,0,0,0,10,10,0.9\na,0,50,50,60,60,0.8\n", "1.0000"),
        ("", "0.0000"),
        (
            "a,0,0,0,10,10,0.9\na,0,100,100,110,110,0.8\na,0,50,50,60,60,0.7\n",
            "0.8333",
        ),
    ];
    for (rows, expected) in cases {
        let pred = dir.path().join("pred.csv");
        fs::write(&pred, format!("tile_id,class_id,x_min,y_min,x_max,y_max,score\n{rows}")).unwrap();
        let o = bin(&["eval-map", gt.to_str().unwrap(), pred.to_str().unwrap()]);
        assert_eq!(code(&o), EXIT_OK, "{}", text(&o));
        let out = String::from_utf8(o.stdout).unwrap();
        assert_eq!(out, format!("class 0  AP {expected}\nmAP {expected}\n"));
    }
    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        "tile_id,class_id,x_min,y_min,x_max,y_max,score\na,0,5,5,1,1,0.5\n",
    )
    .unwrap();
    let o = bin(&["eval-map", gt.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_INVALID, "{}", text(&o));
}

#[test]
fn sweep_table_and_error_codes() {
    let dir = TempDir::new().unwrap();
    let scenario = small(dir.path(), "s", |_| {});
    let o = bin(&[
        "sweep",
        &scenario,
        "policy.confidence_threshold",
        "0,0.5,0.9,1",
        "--threads",
        "2",
    ]);
    assert_eq!(code(&o), EXIT_OK, "{}", text(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    let mut lines = out.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "offload_fraction").unwrap();
    let offload: Vec<f64> = lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert_eq!(offload.len(), 4);
    for pair in offload.windows(2) {
        assert!(pair[0] <= pair[1], "{offload:?}");
    }

    let single = cli::sweep_rows(&scenario, "policy.confidence_threshold", &[0.5], 1).unwrap();
    let mut direct = load_scenario(&scenario).unwrap();
    direct.policy.confidence_threshold = 0.5;
    assert_eq!(single[0], cli::SweepRow::from_report(0.5, &sim::run(&direct).unwrap()));
    assert!(cli::sweep_rows(&scenario, "policy.confidence_threshold", &[], 1)
        .unwrap()
        .is_empty());

    let o = bin(&["sweep", &scenario, "orbit.flux_capacitor", "1"]);
    assert_eq!(code(&o), EXIT_INVALID);
    let o = bin(&["sweep", &scenario, "link.loss_prob", "1.5"]);
    assert_eq!(code(&o), EXIT_INVALID);
    let unwritable = dir.path().join("missing-dir").join("out.csv");
    let o = bin(&[
        "sweep",
        &scenario,
        "link.loss_prob",
        "0",
        "--out",
        unwritable.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), EXIT_IO, "{}", text(&o));
}

#[test]
fn unconverged_calibration_exits_1_with_best_effort() {
    let o = bin(&[
        "calibrate",
        "baoyun_default",
        "--target-map",
        "0.999",
        "--target-gain",
        "0.0",
        "--seeds",
        "1001",
        "--max-evaluations",
        "3",
    ]);
    assert_eq!(code(&o), EXIT_FAILURE, "{}", text(&o));
    let out = text(&o);
    assert!(out.contains("[detectors.onboard]"));
    assert!(out.contains("did not converge"));
}

#[test]
fn corpus_export_round_trips() {
    let dir = TempDir::new().unwrap();
    let scenario = small(dir.path(), "s", |_| {});
    let path = dir.path().join("corpus.jsonl");
    let o = bin(&["corpus", &scenario, "--seed", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK, "{}", text(&o));
    let frames =
        satcollab::imaging::annotations::read_corpus(std::io::BufReader::new(fs::File::open(&path).unwrap()), "corpus")
            .unwrap();
    let sc = load_scenario(&scenario).unwrap();
    assert_eq!(frames, satcollab::imaging::generate_corpus(&sc.corpus, 3).unwrap());
}
