use std::path::Path;
use std::process::{Command, Output};

use damas::error::{EXIT_INVALID_CONFIG, EXIT_NUMERICAL};

fn damas(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_damas"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const GRID: &str = "[grid]\ncenter = [0.0, 0.0, 2.0]\nwidth = 0.6\nheight = 0.6\nintervals = 6\n";

#[test]
fn invalid_scenario_config_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.toml", "[input]\nscenario = \"no_such_scenario\"\n");
    let o = damas(&["run", "a.toml"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_INVALID_CONFIG));
    assert!(stderr(&o).contains("input.scenario"), "{}", stderr(&o));

    write(
        dir.path(),
        "b.toml",
        "[input]\nscenario = \"turbine_point_source\"\n[output]\ndamas_floor_db = -3.0\n",
    );
    let o = damas(&["run", "b.toml"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_INVALID_CONFIG));
    assert!(stderr(&o).contains("output.damas_floor_db"), "{}", stderr(&o));
}

#[test]
fn invalid_timeseries_config_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("[input]\ntimeseries = \"missing.bin\"\n{GRID}[processing]\nfrequencies = [1000.0]\n");
    write(dir.path(), "a.toml", &cfg);
    let o = damas(&["run", "a.toml"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_INVALID_CONFIG));
    assert!(stderr(&o).contains("input.timeseries"), "{}", stderr(&o));

    write(dir.path(), "rec.csv", "sample_rate_hz,channels\n8000,2\n0,0\n");
    let cfg = format!(
        "[input]\ntimeseries = \"rec.csv\"\n{GRID}[processing]\nbands = [800.0, 2000.0]\nblock_size = 1000\n"
    );
    write(dir.path(), "b.toml", &cfg);
    let o = damas(&["run", "b.toml"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_INVALID_CONFIG));
    assert!(stderr(&o).contains("processing.block_size"), "{}", stderr(&o));
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.toml", "[input]\nscenario = \"turbine_point_source\"\n[solver]\niterations = 5\n");
    let o = damas(&["run", "a.toml"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_INVALID_CONFIG));
    assert!(stderr(&o).contains("iterations"), "{}", stderr(&o));
}

#[test]
fn non_finite_csm_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // a recording with a NaN sample poisons every CSM entry
    let mut text = String::from("sample_rate_hz,channels\n8000,4\n");
    for i in 0..64 {
        let v = if i == 10 { "NaN".to_string() } else { format!("{}", (i as f64).sin()) };
        text.push_str(&format!("{v},{v},{v},{v}\n"));
    }
    write(dir.path(), "rec.csv", &text);
    write(dir.path(), "array.txt", "0 0 0 1\n0.1 0 0 1\n0 0.1 0 1\n-0.1 0 0 1\n");
    let cfg = format!(
        "[input]\ntimeseries = \"rec.csv\"\n[array]\nfile = \"array.txt\"\n{GRID}\
         [processing]\nfrequencies = [1000.0]\nblock_size = 32\n"
    );
    write(dir.path(), "a.toml", &cfg);
    let o = damas(&["run", "a.toml"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_NUMERICAL), "{}", stderr(&o));
    let status = std::fs::read_to_string(dir.path().join("out/status.json")).unwrap();
    assert!(status.contains("\"failed\""), "{status}");
}

#[test]
fn scenario_iters_writes_maps_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let o = damas(&["scenario", "ucas_grid_083", "--iters", "120", "--out", "o"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("o");
    for f in ["beamform.csv", "beamform.png", "damas_100.csv", "damas_120.png", "history.csv", "metrics.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert!(!out.join("damas_1000.csv").exists());
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    let records = metrics.as_array().unwrap();
    // the legibility check at 5000 iterations is skipped
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["metric"], "total_power_error_db");
    assert_eq!(records[0]["checkpoint"], 100);
    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 121);
}

#[test]
fn unknown_scenario_verb_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = damas(&["scenario", "nope"], dir.path());
    assert_eq!(o.status.code(), Some(EXIT_INVALID_CONFIG));
}

#[test]
fn render_warns_on_blank_image() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "m.csv",
        "col,row,x,y,value_Pa²,value_dB\n0,0,0,0,0,-inf\n1,0,1,0,0,-inf\n0,1,0,1,0,-inf\n1,1,1,1,0,-inf\n",
    );
    let o = damas(&["render", "m.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("blank"));
    assert!(dir.path().join("m.png").is_file());
}
