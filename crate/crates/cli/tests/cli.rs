use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str =
    r#"{"hour_start": 9, "hour_end": 13, "scenarios": 150, "synth": {"n_days": 260}}"#;

fn pvmpi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvmpi"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = pvmpi(dir, args);
    assert!(
        out.status.success(),
        "pvmpi {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), SMALL).unwrap();
    dir
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = small_dir();
    let d = dir.path();
    assert_eq!(pvmpi(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(pvmpi(d, &[]).status.code(), Some(2));
    assert_eq!(
        pvmpi(d, &["--copula", "vine", "report"]).status.code(),
        Some(2)
    );
    assert_eq!(pvmpi(d, &["--seed", "-3", "report"]).status.code(), Some(2));

    fs::write(d.join("typo.json"), r#"{"capacty": 2}"#).unwrap();
    let out = pvmpi(d, &["--config", "typo.json", "report"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("capacty"));

    fs::write(d.join("neg.json"), r#"{"capacity": -1}"#).unwrap();
    assert_eq!(
        pvmpi(d, &["--config", "neg.json", "synth"]).status.code(),
        Some(2)
    );
    assert_eq!(
        pvmpi(d, &["--config", "absent.json", "synth"])
            .status
            .code(),
        Some(2)
    );
    fs::write(d.join("notjson.json"), "capacity = 3").unwrap();
    assert_eq!(
        pvmpi(d, &["--config", "notjson.json", "synth"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn missing_inputs_fail_with_a_hint() {
    let dir = small_dir();
    let d = dir.path();
    let out = pvmpi(d, &["--config", "cfg.json", "fit-marginals"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pvmpi synth"));

    ok(d, &["--config", "cfg.json", "synth"]);
    let out = pvmpi(d, &["--config", "cfg.json", "fit-copula"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fit-marginals"));

    let out = pvmpi(
        d,
        &["--config", "cfg.json", "plot", "--kind", "reliability"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!d.join("out/plots/reliability.svg").exists());
}

#[test]
fn synth_then_report_on_defaults_has_both_models() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth"]);
    let stdout = String::from_utf8(ok(d, &["report"]).stdout).unwrap();
    assert!(stdout.contains("gaussian") && stdout.contains("rvine"));
    let report = read_json(&d.join("out/report.json"));
    let models: Vec<&str> = report["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["model"].as_str().unwrap())
        .collect();
    assert_eq!(models, ["gaussian", "rvine"]);
    assert_eq!(report["dim"], 11);
    assert_eq!(report["n_scenarios"], 500);
    assert_eq!(
        report["n_train"].as_u64().unwrap() + report["n_eval"].as_u64().unwrap(),
        730
    );
    for m in report["models"].as_array().unwrap() {
        assert_eq!(m["empirical_coverage"].as_array().unwrap().len(), 19);
        for key in [
            "loglik",
            "aic",
            "bic",
            "energy_score",
            "variogram_score",
            "avg_volume_95",
        ] {
            assert!(m[key].as_f64().unwrap().is_finite(), "{key}");
        }
    }
    assert_eq!(report["models"][0]["kappa"], 55);
}

#[test]
fn report_is_byte_identical_and_inputs_untouched() {
    let dir = small_dir();
    let d = dir.path();
    ok(d, &["--config", "cfg.json", "synth"]);
    let data = fs::read(d.join("out/synth.csv")).unwrap();
    ok(d, &["--config", "cfg.json", "report"]);
    let first = fs::read(d.join("out/report.json")).unwrap();
    let scen = fs::read(d.join("out/scenarios_rvine.csv")).unwrap();
    ok(d, &["--config", "cfg.json", "report"]);
    assert_eq!(fs::read(d.join("out/report.json")).unwrap(), first);
    assert_eq!(fs::read(d.join("out/scenarios_rvine.csv")).unwrap(), scen);
    assert_eq!(fs::read(d.join("out/synth.csv")).unwrap(), data);

    // Same seed elsewhere gives the same bytes; another seed does not.
    fs::create_dir(d.join("b")).unwrap();
    fs::write(d.join("b/synth.csv"), &data).unwrap();
    ok(d, &["--config", "cfg.json", "--out", "b", "report"]);
    assert_eq!(fs::read(d.join("b/report.json")).unwrap(), first);
    fs::create_dir(d.join("c")).unwrap();
    fs::write(d.join("c/synth.csv"), &data).unwrap();
    ok(
        d,
        &[
            "--config", "cfg.json", "--out", "c", "--seed", "7", "report",
        ],
    );
    assert_ne!(fs::read(d.join("c/scenarios_rvine.csv")).unwrap(), scen);
    assert_eq!(
        fs::read(d.join("c/marginals.json")).unwrap(),
        fs::read(d.join("out/marginals.json")).unwrap()
    );
}

#[test]
fn individual_steps_reproduce_the_report() {
    let dir = small_dir();
    let d = dir.path();
    ok(d, &["--config", "cfg.json", "synth"]);
    for step in ["fit-marginals", "fit-copula", "sample", "mpi", "score"] {
        ok(d, &["--config", "cfg.json", step]);
    }
    fs::create_dir(d.join("full")).unwrap();
    fs::copy(d.join("out/synth.csv"), d.join("full/synth.csv")).unwrap();
    ok(d, &["--config", "cfg.json", "--out", "full", "report"]);

    let report = read_json(&d.join("full/report.json"));
    for m in report["models"].as_array().unwrap() {
        let name = m["model"].as_str().unwrap();
        assert_eq!(&read_json(&d.join(format!("out/scores_{name}.json"))), m);
        for file in [
            format!("copula_{name}.json"),
            format!("scenarios_{name}.csv"),
            format!("mpi_{name}.csv"),
            format!("reliability_{name}.csv"),
        ] {
            assert_eq!(
                fs::read(d.join("out").join(&file)).unwrap(),
                fs::read(d.join("full").join(&file)).unwrap(),
                "{file}"
            );
        }
    }

    let mpi = fs::read_to_string(d.join("out/mpi_rvine.csv")).unwrap();
    assert!(mpi.starts_with("day,alpha,dim,lower,upper\n"));
    let reliability = fs::read_to_string(d.join("out/reliability_gaussian.csv")).unwrap();
    assert!(reliability.starts_with("alpha,empirical\n"));
    assert_eq!(reliability.lines().count(), 20);
    let scen = fs::read_to_string(d.join("out/scenarios_gaussian.csv")).unwrap();
    assert!(scen.starts_with("day,scenario,h1,h2,h3,h4,h5\n"));
    let summary = read_json(&d.join("out/mpi_rvine_summary.json"));
    assert_eq!(summary["alphas"].as_array().unwrap().len(), 19);
}

#[test]
fn copula_flag_selects_models() {
    let dir = small_dir();
    let d = dir.path();
    ok(d, &["--config", "cfg.json", "synth"]);
    ok(d, &["--config", "cfg.json", "--copula", "rvine", "report"]);
    let report = read_json(&d.join("out/report.json"));
    assert_eq!(report["models"].as_array().unwrap().len(), 1);
    assert_eq!(report["models"][0]["model"], "rvine");
    assert!(!d.join("out/copula_gaussian.json").exists());
}

#[test]
fn plot_writes_one_svg_per_requested_kind() {
    let dir = small_dir();
    let d = dir.path();
    ok(d, &["--config", "cfg.json", "synth"]);
    ok(d, &["--config", "cfg.json", "report"]);
    ok(
        d,
        &[
            "--config",
            "cfg.json",
            "--copula",
            "gaussian",
            "plot",
            "--kind",
            "mpi",
            "--kind",
            "reliability",
        ],
    );
    let mut names: Vec<String> = fs::read_dir(d.join("out/plots"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["mpi_bands_gaussian.svg", "reliability.svg"]);
    let bands = fs::read_to_string(d.join("out/plots/mpi_bands_gaussian.svg")).unwrap();
    assert_eq!(bands.matches(r#"class="band""#).count(), 19);

    ok(d, &["--config", "cfg.json", "plot", "--hours", "1", "5"]);
    let count = fs::read_dir(d.join("out/plots")).unwrap().count();
    // fan + reliability + (scenarios, bands, boxes) per model.
    assert_eq!(count, 8);
    let boxes = fs::read_to_string(d.join("out/plots/mpi_boxes_rvine.svg")).unwrap();
    assert_eq!(boxes.matches(r#"class="box""#).count(), 19);
    assert_eq!(boxes.matches(r#"class="observation""#).count(), 1);
    assert!(boxes.contains("hours 9 and 13"));

    let bad = pvmpi(d, &["--config", "cfg.json", "plot", "--hours", "2", "2"]);
    assert_eq!(bad.status.code(), Some(2));
    let bad = pvmpi(d, &["--config", "cfg.json", "plot", "--day", "1999-01-01"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn external_csv_with_capacity_and_feature_selection() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("gen.json"), SMALL).unwrap();
    ok(d, &["--config", "gen.json", "synth"]);

    // Rescale to a 5 MW plant, rename columns and add an unused one.
    let text = fs::read_to_string(d.join("out/synth.csv")).unwrap();
    let mut lines = text.lines();
    lines.next();
    let mut csv = String::from("timestamp,power,irradiance,noise,station_id\n");
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let p: f64 = f[1].parse().unwrap();
        csv.push_str(&format!("{},{},{},{},42\n", f[0], p * 5.0, f[2], f[3]));
    }
    fs::create_dir(d.join("data")).unwrap();
    fs::write(d.join("data/plant.csv"), csv).unwrap();
    fs::write(
        d.join("data/run.json"),
        r#"{"data": "plant.csv", "capacity": 5.0, "hour_start": 9, "hour_end": 13,
            "feature_columns": ["irradiance"], "train_end": "2020-06-30", "scenarios": 50}"#,
    )
    .unwrap();
    ok(
        d,
        &["--config", "data/run.json", "--out", "ext", "fit-marginals"],
    );
    let model = read_json(&d.join("ext/marginals.json"));
    assert_eq!(model["feature_names"], serde_json::json!(["irradiance"]));
    let curves = fs::read_to_string(d.join("ext/curves_eval.csv")).unwrap();
    assert!(curves.starts_with("day,lead,q0.05,"));
    // Training runs through 2020-06-30, so evaluation starts the next day.
    assert!(curves.lines().nth(1).unwrap().starts_with("2020-07-01,1,"));
}
