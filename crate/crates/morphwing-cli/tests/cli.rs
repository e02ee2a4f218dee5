//! End-to-end runs of the installed binary against the repository's
//! reference config and demo data.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn morphwing() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_morphwing"));
    cmd.current_dir(repo_root());
    cmd.env_remove("MORPHWING_SEED");
    cmd
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn run_err(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(!out.status.success(), "expected a failure exit");
    out
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).expect("valid JSON output")
}

#[test]
fn synthesize_matches_reference_lengths() {
    let text = run_ok(morphwing().args(["synthesize", "--config", "configs/reference.json"]));
    let doc = json(&text);
    let derived = &doc["derived"];
    for (name, want) in [
        ("a", 15.3646),
        ("c", 33.5769),
        ("d", 76.4231),
        ("e", 73.6915),
        ("g", 180.0),
        ("h", 20.1844),
        ("i", 16.9713),
        ("j", 202.8699),
    ] {
        let got = derived[name].as_f64().expect("derived length present");
        assert!((got - want).abs() < 1e-3, "{name}: got {got}, want {want}");
    }
}

#[test]
fn synthesize_is_deterministic_and_seed_insensitive() {
    let first = run_ok(morphwing().args(["synthesize", "--config", "configs/reference.json"]));
    let second = run_ok(morphwing().args(["synthesize", "--config", "configs/reference.json"]));
    assert_eq!(first, second, "identical runs must be byte-identical");

    // a different multi-start seed still converges to the same design
    let reseeded = run_ok(
        morphwing()
            .args(["synthesize", "--config", "configs/reference.json"])
            .env("MORPHWING_SEED", "12345"),
    );
    let a = json(&first)["derived"]["a"].as_f64().unwrap();
    let b = json(&reseeded)["derived"]["a"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-6, "seed changed the synthesized root: {a} vs {b}");
}

#[test]
fn unknown_subcommand_exits_two() {
    let out = run_err(morphwing().arg("frobnicate"));
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty(), "usage text must go to standard error");
}

#[test]
fn missing_input_reports_error_json() {
    let out = run_err(morphwing().args(["kinematics", "--linkage", "/nonexistent.json", "--x-a", "45"]));
    assert_eq!(out.status.code(), Some(1));
    let err = json(&String::from_utf8_lossy(&out.stderr));
    assert_eq!(err["error"]["kind"], "io");
    assert!(err["error"]["message"].as_str().unwrap().contains("nonexistent"));
}

#[test]
fn kinematics_round_trips_synthesized_document() {
    let dir = tmp_dir("kin-roundtrip");
    let linkage = dir.join("linkage.json");
    run_ok(morphwing().args([
        "synthesize",
        "--config",
        "configs/reference.json",
        "--out",
        linkage.to_str().unwrap(),
    ]));

    let at45 = json(&run_ok(morphwing().args([
        "kinematics",
        "--linkage",
        linkage.to_str().unwrap(),
        "--x-a",
        "45",
    ])));
    let at65 = json(&run_ok(morphwing().args([
        "kinematics",
        "--linkage",
        linkage.to_str().unwrap(),
        "--x-a",
        "65",
    ])));
    for (doc, key, want) in [
        (&at45, "theta_s_deg", 51.0),
        (&at45, "theta_e_deg", 110.0),
        (&at45, "theta_w_deg", 147.0),
        (&at65, "theta_s_deg", 20.0),
        (&at65, "theta_e_deg", 41.0),
        (&at65, "theta_w_deg", 35.0),
    ] {
        let got = doc[key].as_f64().unwrap();
        assert!((got - want).abs() < 0.05, "{key}: got {got}, want {want}");
    }
}

#[test]
fn kinematics_sweep_emits_csv_rows() {
    let text = run_ok(morphwing().args([
        "kinematics",
        "--config",
        "configs/reference.json",
        "--sweep",
        "45:65:5",
        "--format",
        "csv",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x_a_mm,theta_s_deg,theta_e_deg,theta_w_deg");
    assert_eq!(lines.len(), 6, "header plus five sweep rows");
    assert!(lines[1].starts_with("45,"));
    assert!(lines[5].starts_with("65,"));
}

#[test]
fn simulate_controller_schedules_pulse_and_glide_stop() {
    let text = run_ok(morphwing().args([
        "simulate-controller",
        "--events",
        "data/controller_events.csv",
        "--format",
        "csv",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,kind,side,start,duration");
    // period 0.35 s: pulse starts half a cycle after the trigger at 1.05
    // and lasts three quarters of a cycle; the glide stop lands exactly
    // on the trigger that follows the low-throttle event
    assert_eq!(lines[1], "1.05,servo_pulse,left,1.225,0.2625");
    assert_eq!(lines[2], "1.75,motor_stop,,,");
    assert_eq!(lines.len(), 3);
}

#[test]
fn fit_recovers_surface_columns_from_bench_logs() {
    let text = run_ok(morphwing().args(["fit", "--manifest", "data/bench/manifest.json"]));
    let doc = json(&text);
    let surfaces = doc["surfaces"].as_array().unwrap();
    assert_eq!(surfaces.len(), 2);

    let expected: [(f64, [f64; 6], [f64; 6]); 2] = [
        (10.0, [9.94, 22.879, 97.421, -0.095, -0.664, 0.576], [-96.6, -4.41, 44.3, 0.018, -1.0, 0.105]),
        (25.0, [83.115, 26.2, 121.5, -0.119, -0.778, 0.682], [-96.82, -6.862, 49.781, 0.024, -1.35, 0.197]),
    ];
    for (entry, (mount, lift, thrust)) in surfaces.iter().zip(&expected) {
        assert_eq!(entry["wrist_mount_deg"].as_f64().unwrap(), *mount);
        for (channel, coeffs) in [("lift", lift), ("thrust", thrust)] {
            let s = &entry[channel];
            for (key, want) in ["z0", "a", "b", "c", "d", "f"].iter().zip(coeffs) {
                let got = s[*key].as_f64().unwrap();
                assert!(
                    (got - want).abs() < 1e-6,
                    "mount {mount} {channel} {key}: got {got}, want {want}"
                );
            }
            assert!(s["r_value"].as_f64().unwrap() >= 0.999);
            assert_eq!(s["n_points"].as_i64().unwrap(), 9);
        }
    }
}

#[test]
fn trim_consumes_fit_output_unchanged() {
    let dir = tmp_dir("fit-trim");
    let fitted = dir.join("fitted.json");
    run_ok(morphwing().args([
        "fit",
        "--manifest",
        "data/bench/manifest.json",
        "--out",
        fitted.to_str().unwrap(),
    ]));

    let doc = json(&run_ok(morphwing().args([
        "trim",
        "--surfaces",
        fitted.to_str().unwrap(),
        "--weight-g",
        "600",
    ])));
    let trims = doc["trims"].as_array().unwrap();
    assert_eq!(trims.len(), 2);
    let a10 = trims[0]["alpha_star_deg"].as_f64().unwrap();
    let a25 = trims[1]["alpha_star_deg"].as_f64().unwrap();
    assert!((a10 - 11.1535).abs() < 1e-3, "mount 10 trim at {a10}");
    assert!((a25 - 6.1000).abs() < 1e-3, "mount 25 trim at {a25}");
    assert!(a10 > a25, "steeper wrist mount must trim at a lower angle of attack");
    for t in trims {
        assert!((t["lift_at_trim_g"].as_f64().unwrap() - 600.0).abs() < 1e-3);
    }
}

#[test]
fn trim_mount_selector_returns_single_object() {
    let doc = json(&run_ok(morphwing().args([
        "trim",
        "--config",
        "configs/reference.json",
        "--mount",
        "15",
    ])));
    assert!(doc.get("trims").is_none(), "selected mount must collapse to one object");
    assert_eq!(doc["wrist_mount_deg"].as_f64().unwrap(), 15.0);
    let alpha = doc["alpha_star_deg"].as_f64().unwrap();
    assert!((alpha - 9.3000).abs() < 1e-3, "mount 15 trim at {alpha}");
}

#[test]
fn filter_response_matches_closed_form() {
    let text = run_ok(morphwing().args(["filter", "--format", "csv"]));
    let mut dc = None;
    let mut at50 = None;
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        match fields[0] {
            "0" => dc = Some(fields[1].parse::<f64>().unwrap()),
            "50" => at50 = Some(fields[1].parse::<f64>().unwrap()),
            _ => {}
        }
    }
    assert_eq!(dc, Some(1.0), "unity DC gain");
    let at50 = at50.expect("a 50 Hz sample in the response sweep");
    // rendered at nine significant digits, hence the loose absolute bound
    assert!(
        (at50 - 7.658116198e-4).abs() < 1e-11,
        "stopband magnitude at 50 Hz was {at50}"
    );
}

#[test]
fn filter_preserves_time_and_trigger_columns() {
    let dir = tmp_dir("filter-run");
    let out_path = dir.join("filtered.csv");
    run_ok(morphwing().args([
        "filter",
        "--in",
        "data/roll/a04_f20.csv",
        "--format",
        "csv",
        "--out",
        out_path.to_str().unwrap(),
    ]));
    let raw = std::fs::read_to_string(repo_root().join("data/roll/a04_f20.csv")).unwrap();
    let filtered = std::fs::read_to_string(&out_path).unwrap();
    let raw_lines: Vec<&str> = raw.lines().collect();
    let out_lines: Vec<&str> = filtered.lines().collect();
    assert_eq!(out_lines.len(), raw_lines.len());
    assert_eq!(out_lines[0], "t,fx,fy,fz,mx,my,mz,hall");
    for (a, b) in raw_lines.iter().zip(&out_lines).skip(1) {
        let af: Vec<&str> = a.split(',').collect();
        let bf: Vec<&str> = b.split(',').collect();
        assert_eq!(
            af[0].parse::<f64>().unwrap(),
            bf[0].parse::<f64>().unwrap(),
            "time column must pass through"
        );
        assert_eq!(af[7], bf[7], "trigger column must pass through");
    }
}

#[test]
fn roll_moment_regression_over_demo_files() {
    let doc = json(&run_ok(morphwing().args([
        "roll-moment",
        "--manifest",
        "data/roll/manifest.json",
    ])));
    let regressions = doc["regressions"].as_array().unwrap();
    assert_eq!(regressions.len(), 1);
    let slope = regressions[0]["slope_nm_per_hz"].as_f64().unwrap();
    let r2 = regressions[0]["r_squared"].as_f64().unwrap();
    assert!((slope - (-0.002)).abs() < 1e-9, "slope {slope}");
    assert!(r2 >= 1.0 - 1e-9, "r^2 {r2}");
    for c in doc["conditions"].as_array().unwrap() {
        assert_eq!(c["flagged"], Value::Bool(false));
    }
}

#[test]
fn agility_times_the_demo_maneuver() {
    let doc = json(&run_ok(morphwing().args([
        "agility",
        "--log",
        "data/attitude_demo.csv",
        "--target-deg",
        "90",
        "--start-tau",
        "2",
    ])));
    assert_eq!(doc["result"], "crossing");
    let cycles = doc["cycles"].as_f64().unwrap();
    assert!((cycles - 2.5).abs() < 1e-6, "crossing at {cycles} wingbeats");
}

#[test]
fn agility_single_log_rejects_csv_format() {
    let out = run_err(morphwing().args([
        "agility",
        "--log",
        "data/attitude_demo.csv",
        "--format",
        "csv",
    ]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_paths_supply_default_inputs() {
    // no --events flag: the config's paths table points at the demo log
    let text = run_ok(morphwing().args([
        "simulate-controller",
        "--config",
        "configs/reference.json",
        "--format",
        "csv",
    ]));
    assert!(text.lines().count() >= 2, "events resolved through the config");
}

#[test]
fn fit_output_is_byte_stable() {
    let first = run_ok(morphwing().args(["fit", "--manifest", "data/bench/manifest.json"]));
    let second = run_ok(morphwing().args(["fit", "--manifest", "data/bench/manifest.json"]));
    assert_eq!(first, second);
}
