use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use plcprep_core::pipeline::exit_code;

fn plcprep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plcprep"))
        .args(args)
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn constant_only_dataset_fails_with_no_features() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("flat.csv");
    fs::write(&input, "timestamp_ms,a,b\n0,1,5\n10,1,5\n20,1,5\n").unwrap();
    let out = plcprep(&["analyze", "--input", p(&input), "--out-dir", p(&dir.path().join("o")), "--step-ms", "10"]);
    assert_eq!(out.status.code(), Some(exit_code::DEGENERATE));
    assert!(stderr(&out).contains("no features remain"), "{}", stderr(&out));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = p(dir.path());

    let missing = plcprep(&["analyze", "--input", "/nonexistent.csv", "--out-dir", o, "--step-ms", "10"]);
    assert_eq!(missing.status.code(), Some(exit_code::IO));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "timestamp_ms,a\n0,1\n10,x\n").unwrap();
    let parse = plcprep(&["analyze", "--input", p(&bad), "--out-dir", o, "--step-ms", "10"]);
    assert_eq!(parse.status.code(), Some(exit_code::PARSE));
    assert!(stderr(&parse).contains("row 2"), "{}", stderr(&parse));

    let backwards = dir.path().join("back.csv");
    fs::write(&backwards, "timestamp_ms,a\n10,1\n10,0\n").unwrap();
    let out = plcprep(&["resample", "--input", p(&backwards), "--output", o, "--step-ms", "10"]);
    assert_eq!(out.status.code(), Some(exit_code::PARSE));
    assert!(stderr(&out).contains("non-increasing timestamp"));

    let good = dir.path().join("good.csv");
    fs::write(&good, "timestamp_ms,a\n0,1\n10,0\n").unwrap();
    let no_step = plcprep(&["analyze", "--input", p(&good), "--out-dir", o]);
    assert_eq!(no_step.status.code(), Some(exit_code::CONFIG));

    let synth = plcprep(&["synth", "--out", p(&dir.path().join("s.csv")), "--n-states", "1"]);
    assert_eq!(synth.status.code(), Some(exit_code::CONFIG));

    // three rows are too few for a spectrum
    let short = dir.path().join("short.csv");
    fs::write(&short, "timestamp_ms,a\n0,1\n10,0\n20,1\n").unwrap();
    let out = plcprep(&["analyze", "--input", p(&short), "--out-dir", o, "--step-ms", "10"]);
    assert_eq!(out.status.code(), Some(exit_code::DEGENERATE), "{}", stderr(&out));
}

#[test]
fn stepwise_commands_match_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);
    let run = |args: &[&str]| {
        let o = plcprep(args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    };

    run(&["synth", "--out", p(&d("events.csv")), "--duration-s", "1800", "--seed", "3"]);
    assert!(d("ground_truth.json").exists());
    run(&[
        "prune", "--input", p(&d("events.csv")), "--output", p(&d("pruned.csv")),
        "--report", p(&d("prune.json")), "--correlation", p(&d("corr.csv")),
    ]);
    run(&["resample", "--input", p(&d("pruned.csv")), "--output", p(&d("uniform.csv")), "--step-ms", "20"]);
    run(&["detect", "--input", p(&d("uniform.csv")), "--out-dir", p(&d("det"))]);
    run(&[
        "partition", "--input", p(&d("uniform.csv")), "--output", p(&d("part.csv")),
        "--detection", p(&d("det/detection.json")),
    ]);
    run(&["analyze", "--input", p(&d("events.csv")), "--out-dir", p(&d("full")), "--step-ms", "20"]);

    assert_eq!(
        fs::read_to_string(d("uniform.csv")).unwrap(),
        fs::read_to_string(d("full/resampled.csv")).unwrap()
    );
    assert_eq!(
        fs::read_to_string(d("part.csv")).unwrap(),
        fs::read_to_string(d("full/partition.csv")).unwrap()
    );
    assert_eq!(
        fs::read_to_string(d("corr.csv")).unwrap(),
        fs::read_to_string(d("full/correlation.csv")).unwrap()
    );
    let spectra = fs::read_dir(d("full/spectra")).unwrap().count();
    assert_eq!(spectra, fs::read_dir(d("det/spectra")).unwrap().count());

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d("full/report.json")).unwrap()).unwrap();
    let prune: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d("prune.json")).unwrap()).unwrap();
    assert_eq!(report["prune"], prune);
    assert_eq!(report["provenance"]["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("events.csv");
    let o = plcprep(&["synth", "--out", p(&input), "--duration-s", "900", "--seed", "1"]);
    assert!(o.status.success());
    let cfg = dir.path().join("params.toml");
    fs::write(&cfg, "step_ms = 40\nthr_corr = 0.9\ntop_fraction = 0.2\n").unwrap();

    let out = dir.path().join("o");
    let o = plcprep(&[
        "analyze", "--input", p(&input), "--out-dir", p(&out),
        "--config", p(&cfg), "--top-fraction", "0.25",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let c = &report["provenance"]["config"];
    assert_eq!(c["step_ms"], 40);
    assert_eq!(c["thr_corr"], 0.9);
    assert_eq!(c["top_fraction"], 0.25);
    assert_eq!(c["thr_var"], 0.001);
    assert_eq!(report["resample"]["step_ms"], 40);

    fs::write(&cfg, "step_ms = 40\nbogus = 1\n").unwrap();
    let o = plcprep(&["analyze", "--input", p(&input), "--out-dir", p(&out), "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(exit_code::CONFIG));
}
