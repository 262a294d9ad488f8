use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn art(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_art"))
        .args(args)
        .env_remove("ART_SEED")
        .output()
        .expect("spawn art")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "art failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn approx(v: &Value, x: f64) -> bool {
    v.as_f64().is_some_and(|y| (y - x).abs() < 1e-12)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Two clusters with slopes 1 and 3.
fn micro_csv(dir: &Path) -> PathBuf {
    let mut s = String::from("g,y,x\n");
    for (g, slope) in [("a", 1.0), ("b", 3.0)] {
        for x in [1.0, 2.0, 3.0, 4.0] {
            s.push_str(&format!("{g},{},{x}\n", slope * x));
        }
    }
    write(dir, "micro.csv", &s)
}

/// `q` clusters with intercept, slope near 2 and cluster-specific noise.
fn panel_csv(dir: &Path, q: usize) -> PathBuf {
    let mut s = String::from("school,score,hours,year\n");
    let mut t = 0;
    for j in 0..q {
        for i in 0..12 {
            let x = (i as f64) * 0.5 + (j as f64) * 0.1;
            let noise = (((i * 7 + j * 13) % 11) as f64 - 5.0) * 0.05 * (1 + j) as f64;
            let y = 1.0 + (2.0 + 0.05 * j as f64) * x + noise;
            s.push_str(&format!("s{j},{y},{x},{t}\n"));
            t += 1;
        }
    }
    write(dir, "panel.csv", &s)
}

#[test]
fn micro_instance_has_unit_p_value() {
    let dir = tempfile::tempdir().unwrap();
    let csv = micro_csv(dir.path());
    let out = art(&[
        "test",
        "--input",
        csv.to_str().unwrap(),
        "--cluster",
        "g",
        "--outcome",
        "y",
        "--covariates",
        "x",
        "--coef",
        "x",
        "--null",
        "2",
        "--alpha",
        "0.1",
    ]);
    let v = json(&out);
    assert_eq!(v["schema"], "art-report/1");
    let run = &v["runs"][0];
    assert_eq!(run["p_value"], 1.0);
    assert_eq!(run["reject"], false);
    assert_eq!(run["clusters"][0]["label"], "a");
    assert!(approx(&run["clusters"][1]["estimate"], 3.0));
    assert_eq!(run["group"]["size"], 4);
    // q = 2 cannot reject at 10%
    assert!(run["warnings"][0]
        .as_str()
        .unwrap()
        .contains("trivial power"));
}

#[test]
fn interval_on_micro_instance() {
    let dir = tempfile::tempdir().unwrap();
    let csv = micro_csv(dir.path());
    let args = [
        "ci",
        "--input",
        csv.to_str().unwrap(),
        "--cluster",
        "g",
        "--outcome",
        "y",
        "--covariates",
        "x",
        "--coef",
        "x",
    ];
    let mut wide = args.to_vec();
    wide.extend(["--alpha", "0.6"]);
    let v = json(&art(&wide));
    let run = &v["runs"][0];
    assert!(approx(&run["lambda0"], 2.0));
    assert!(approx(&run["lower"], 1.0));
    assert!(approx(&run["upper"], 3.0));

    let mut narrow = args.to_vec();
    narrow.extend(["--alpha", "0.3"]);
    let v = json(&art(&narrow));
    let run = &v["runs"][0];
    assert_eq!(run["lower"], "-inf");
    assert_eq!(run["upper"], "+inf");
    assert_eq!(run["upper_infinite"], true);
    assert!(run["warnings"][0].as_str().unwrap().contains("unbounded"));
}

#[test]
fn ci_matches_grid_inversion() {
    use art_core::group::SignGroup;
    use art_core::interval::{interval_by_inversion, GridSpec};
    use art_core::io::{ingest, DataConfig};

    let dir = tempfile::tempdir().unwrap();
    let csv = panel_csv(dir.path(), 8);
    let v = json(&art(&[
        "ci",
        "--input",
        csv.to_str().unwrap(),
        "--cluster",
        "school",
        "--outcome",
        "score",
        "--covariates",
        "hours",
        "--intercept",
        "--coef",
        "hours",
        "--alpha",
        "0.1",
    ]));
    let run = &v["runs"][0];
    let cfg = DataConfig {
        input: csv.clone(),
        cluster_column: Some("school".into()),
        outcome: "score".into(),
        covariates: vec!["hours".into()],
        intercept: true,
        blocks: vec![],
        time_column: None,
    };
    let data = ingest(&cfg, None).unwrap();
    let g = SignGroup::exhaustive(8, false).unwrap();
    let lambda0 = run["lambda0"].as_f64().unwrap();
    let grid = GridSpec {
        lower: lambda0 - 1.0,
        upper: lambda0 + 1.0,
        points: 4001,
    };
    let inv = interval_by_inversion(&data, &[0.0, 1.0], 0.1, &g, Some(grid)).unwrap();
    let step = grid.step();
    assert!((run["lower"].as_f64().unwrap() - inv.lower.to_f64()).abs() <= step);
    assert!((run["upper"].as_f64().unwrap() - inv.upper.to_f64()).abs() <= step);
}

#[test]
fn q4_warns_and_never_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let csv = panel_csv(dir.path(), 4);
    let out = art(&[
        "test",
        "--input",
        csv.to_str().unwrap(),
        "--cluster",
        "school",
        "--outcome",
        "score",
        "--covariates",
        "hours",
        "--intercept",
        "--coef",
        "hours",
        "--null",
        "100",
        "--alpha",
        "0.1",
    ]);
    let v = json(&out);
    let run = &v["runs"][0];
    assert_eq!(run["reject"], false);
    assert_eq!(run["p_value"], 0.125);
    assert!(String::from_utf8_lossy(&out.stderr).contains("trivial power"));
}

#[test]
fn rejects_far_null_with_enough_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let csv = panel_csv(dir.path(), 8);
    let v = json(&art(&[
        "test",
        "--input",
        csv.to_str().unwrap(),
        "--cluster",
        "school",
        "--outcome",
        "score",
        "--covariates",
        "hours",
        "--intercept",
        "--contrast",
        "0,1",
        "--null",
        "-3",
        "--variant",
        "studentized",
        "--restriction",
        "0,1",
        "--values",
        "-3",
    ]));
    let run = &v["runs"][0];
    assert_eq!(run["reject"], true);
    assert_eq!(run["p_value"], 2.0 / 256.0);
    assert_eq!(run["wald"]["p_value"], 2.0 / 256.0);
    assert_eq!(v["config"]["variant"], "studentized");
}

#[test]
fn sampled_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let csv = panel_csv(dir.path(), 16);
    let args = [
        "test",
        "--input",
        csv.to_str().unwrap(),
        "--cluster",
        "school",
        "--outcome",
        "score",
        "--covariates",
        "hours",
        "--intercept",
        "--coef",
        "hours",
        "--null",
        "2.3",
    ];
    let a = art(&args);
    let b = art(&args);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["runs"][0]["group"]["mode"], "sampled");
    assert_eq!(v["runs"][0]["group"]["size"], 1000);

    let seeded = Command::new(env!("CARGO_BIN_EXE_art"))
        .args(args)
        .env("ART_SEED", "5")
        .output()
        .unwrap();
    let v = json(&seeded);
    assert_eq!(v["runs"][0]["group"]["seed"], 5);
}

#[test]
fn block_sweep_over_time_ordered_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = panel_csv(dir.path(), 6);
    let v = json(&art(&[
        "test",
        "--input",
        csv.to_str().unwrap(),
        "--outcome",
        "score",
        "--covariates",
        "hours",
        "--intercept",
        "--coef",
        "hours",
        "--null",
        "2",
        "--blocks",
        "4,8",
        "--time",
        "year",
    ]));
    let runs = v["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(runs[0]["blocks"], 4);
    assert_eq!(runs[1]["q"], 8);
    assert_eq!(runs[1]["clusters"][0]["size"], 9);
}

#[test]
fn blocks_table() {
    let v = json(&art(&["blocks", "--n", "2631", "--q", "8,10,16"]));
    let bases: Vec<u64> = v["plans"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["base_size"].as_u64().unwrap())
        .collect();
    assert_eq!(bases, [328, 263, 164]);
    let text = art(&["blocks", "--n", "2631", "--q", "10", "--format", "text"]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("264"));
}

#[test]
fn export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = panel_csv(dir.path(), 5);
    let first = dir.path().join("first.csv");
    let out = art(&[
        "export",
        "--input",
        csv.to_str().unwrap(),
        "--cluster",
        "school",
        "--outcome",
        "score",
        "--covariates",
        "hours",
        "--intercept",
        "--output",
        first.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let second = art(&[
        "export",
        "--input",
        first.to_str().unwrap(),
        "--cluster",
        "cluster",
        "--outcome",
        "score",
        "--covariates",
        "const,hours",
    ]);
    assert_eq!(std::fs::read(&first).unwrap(), second.stdout);
}

#[test]
fn simulate_from_toml() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "study.toml",
        r#"
effects = [2.0]

[design]
sizes = [20, 20, 20, 20, 20, 20]
beta = [0.0, 1.0]
sigma = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
seed = 3

[study]
contrast = [0.0, 1.0]
alpha = 0.1
replications = 50
group = { mode = "exhaustive" }
"#,
    );
    let a = art(&["simulate", "--design", spec.to_str().unwrap()]);
    let v = json(&a);
    assert_eq!(v["size"]["replications"], 50);
    assert_eq!(v["power"][0]["effect"], 2.0);
    assert_eq!(
        art(&["simulate", "--design", spec.to_str().unwrap()]).stdout,
        a.stdout
    );
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = panel_csv(dir.path(), 5);
    let path = csv.to_str().unwrap();

    let missing = art(&[
        "test",
        "--input",
        path,
        "--cluster",
        "school",
        "--outcome",
        "nope",
        "--covariates",
        "hours",
        "--coef",
        "hours",
    ]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope"));

    let bad_alpha = art(&[
        "test",
        "--input",
        path,
        "--cluster",
        "school",
        "--outcome",
        "score",
        "--covariates",
        "hours",
        "--coef",
        "hours",
        "--alpha",
        "1.5",
    ]);
    assert_eq!(bad_alpha.status.code(), Some(1));

    let unknown_flag = art(&["test", "--bogus"]);
    assert_eq!(unknown_flag.status.code(), Some(1));

    // a regressor constant within clusters is not identified cluster by cluster
    let mut s = String::from("g,y,treated\n");
    for j in 0..5 {
        for i in 0..4 {
            s.push_str(&format!("c{j},{},{}\n", i as f64 + j as f64, j % 2));
        }
    }
    let csv = write(dir.path(), "school.csv", &s);
    let unid = art(&[
        "test",
        "--input",
        csv.to_str().unwrap(),
        "--cluster",
        "g",
        "--outcome",
        "y",
        "--covariates",
        "treated",
        "--intercept",
        "--coef",
        "treated",
    ]);
    assert_eq!(unid.status.code(), Some(2));
    let err = String::from_utf8_lossy(&unid.stderr);
    assert!(err.contains("c0"), "{err}");
    assert!(err.contains("coarsely"));
}

#[test]
fn text_format() {
    let dir = tempfile::tempdir().unwrap();
    let csv = micro_csv(dir.path());
    let out = art(&[
        "test",
        "--input",
        csv.to_str().unwrap(),
        "--cluster",
        "g",
        "--outcome",
        "y",
        "--covariates",
        "x",
        "--coef",
        "x",
        "--null",
        "2",
        "--format",
        "text",
    ]);
    let s = String::from_utf8_lossy(&out.stdout);
    assert!(s.contains("p-value         1.000000"));
}
