use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use polariton::dispersion::{Domain, SystemParams};
use polariton::fit::synthesize;
use polariton::io::csv::save_dispersion_csv;
use polariton::io::report::without_timestamp;
use polariton::model::HamiltonianVariant;
use tempfile::TempDir;

fn polariton(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polariton"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .env_remove("POLARITON_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn deviation_map_has_one_row_per_ratio() {
    let dir = TempDir::new().unwrap();
    let out = polariton(&["deviation-map", "--ratios", "0:0.3:0.01", "--theta-res", "60"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("deviation_map.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 32);
    assert_eq!(lines[0].split(',').count(), 5);
    assert_eq!(lines[1], "0,0,0,0,0");
    let doc = read_json(&dir.path().join("deviation_map.json"));
    assert_eq!(doc["results"]["rows"].as_array().unwrap().len(), 31);
}

#[test]
fn compare_ranks_generating_model_first() {
    let dir = TempDir::new().unwrap();
    let params = SystemParams::reference(16.5, 60.0).unwrap();
    let angles: Vec<f64> = (0..10).map(|i| 50.0 + 2.0 * i as f64).collect();
    let data = synthesize(&params, HamiltonianVariant::Full, Domain::Angle, &angles).unwrap();
    let csv = dir.path().join("data.csv");
    save_dispersion_csv(&csv, &data).unwrap();
    let out = polariton(&["compare", "--data", csv.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    let first: Vec<&str> = table.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[0], "FULL");
    assert!((first[1].parse::<f64>().unwrap() - 16.5).abs() < 1e-4);
    assert!(first[2].parse::<f64>().unwrap() < 1e-4);
    for name in ["full", "no_antires", "no_antires_no_dia"] {
        assert!(dir.path().join(format!("compare_rms_{name}.csv")).exists());
    }
}

#[test]
fn fit_reports_recovered_coupling() {
    let dir = TempDir::new().unwrap();
    let params = SystemParams::reference(20.0, 60.0).unwrap();
    let angles: Vec<f64> = (0..8).map(|i| 52.0 + 2.0 * i as f64).collect();
    let data = synthesize(&params, HamiltonianVariant::NoAntires, Domain::Angle, &angles).unwrap();
    let csv = dir.path().join("data.csv");
    save_dispersion_csv(&csv, &data).unwrap();
    let out = polariton(&["fit", "--data", csv.to_str().unwrap(), "--variant", "NO_ANTIRES"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("fit.json"));
    assert_eq!(doc["results"]["variant"], "NO_ANTIRES");
    assert!((doc["results"]["omega_r_star"].as_f64().unwrap() - 20.0).abs() < 1e-4);
    assert!(dir.path().join("fit_rms_curve.csv").exists());
}

#[test]
fn oracle_check_passes_at_reference_parameters() {
    let dir = TempDir::new().unwrap();
    let out = polariton(&["oracle-check"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("oracle_check.json"));
    assert_eq!(doc["results"]["passed"], true);
    assert!(doc["results"]["max_discrepancy"].as_f64().unwrap() < 1e-6);
    assert_eq!(doc["results"]["cases"].as_array().unwrap().len(), 15);
}

#[test]
fn reruns_are_identical_apart_from_timestamp() {
    let dir = TempDir::new().unwrap();
    let args = ["dispersion", "--grid", "45:75:2.5", "--variant", "NO_ANTIRES"];
    assert_eq!(polariton(&args, dir.path()).status.code(), Some(0));
    let first = read_json(&dir.path().join("dispersion.json"));
    let first_csv = fs::read(dir.path().join("dispersion.csv")).unwrap();
    assert_eq!(polariton(&args, dir.path()).status.code(), Some(0));
    let second = read_json(&dir.path().join("dispersion.json"));
    assert_eq!(without_timestamp(&first), without_timestamp(&second));
    assert_eq!(first_csv, fs::read(dir.path().join("dispersion.csv")).unwrap());
    assert!(first.get("timestamp_unix").is_some());
    assert_eq!(first["config"]["system"]["e_12"], 152.0);
    assert_eq!(first["tolerances"]["pairing"], 1e-9);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[system]\ne_12 = -1.0\n").unwrap();
    let out = polariton(&["--config", config.to_str().unwrap(), "dispersion"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("system.e_12"));

    fs::write(&config, "[system]\ntransition = 150.0\n").unwrap();
    let out = polariton(&["--config", config.to_str().unwrap(), "dispersion"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let data = dir.path().join("lp_only.csv");
    fs::write(&data, "theta_deg,energy_mev,branch\n60,140,LP\n").unwrap();
    let out = polariton(&["fit", "--data", data.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("UP"));

    fs::write(&data, "theta_deg,energy_mev,branch\n60,140,LP\n60,170,X\n").unwrap();
    let out = polariton(&["fit", "--data", data.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));

    assert_eq!(polariton(&["no-such-command"], dir.path()).status.code(), Some(2));
    assert_eq!(polariton(&["deviation-map", "--ratios", "0.9"], dir.path()).status.code(), Some(2));
}

#[test]
fn solver_failures_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("steep.toml");
    // the propagation medium outruns the cavity light cone at grazing angles
    fs::write(&config, "[system]\nn_prop = 4.5\n[cavity]\ne_z = 76.0\n").unwrap();
    let out = polariton(&["--config", config.to_str().unwrap(), "dispersion", "--grid", "40,80"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("dispersion.json"));
    assert_eq!(doc["results"]["curve"]["partial"], true);
}

#[test]
fn plot_script_and_environment_output_dir() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_polariton"))
        .args(["ground-state", "--ratios", "0:0.3:0.05", "--plot-script"])
        .env("POLARITON_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("plot_ground_state.py").exists());
    let text = fs::read_to_string(dir.path().join("ground_state.csv")).unwrap();
    assert_eq!(text.lines().count(), 8);
    let zero: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&zero[4..], &["0", "0"]);
}

#[test]
fn bundled_config_runs() {
    let dir = TempDir::new().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/reference.toml");
    let out =
        polariton(&["--config", config.to_str().unwrap(), "deviation-map", "--ratios", "0,0.1,0.2,0.3"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("plot_deviation_map.py").exists());
    let doc = read_json(&dir.path().join("deviation_map.json"));
    assert_eq!(doc["config"]["fit"]["omega_r_bounds"][1], 45.6);
}
