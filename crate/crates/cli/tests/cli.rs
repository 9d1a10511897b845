use risklab::ingest::write_county_table;
use risklab::synth::synthetic_counties;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"{
  "input_path": "counties.csv",
  "output_dir": "out",
  "seed": 11,
  "smote_before_split": true,
  "cv_folds": 3,
  "mda_repetitions": 2,
  "models": [
    {"kind": "LDA"},
    {"kind": "KNN", "hyper": {"knn_k": 5}},
    {"kind": "RANDOM_FOREST", "hyper": {"trees": 30}}
  ]
}"#;

fn risklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_risklab")).args(args).env_remove("RISKLAB_SEED").output().unwrap()
}

fn setup(n: usize) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let f = std::fs::File::create(dir.path().join("counties.csv")).unwrap();
    write_county_table(&synthetic_counties(n, 31, 0.02), f).unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, CONFIG).unwrap();
    (dir, config)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn run_writes_report_and_lists_files() {
    let (dir, config) = setup(150);
    let out = risklab(&["--threads", "2", "run", "--config", s(&config)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let listed = String::from_utf8(out.stdout).unwrap();
    for name in ["stage_train.json", "report.json", "table3_models.csv", "manifest.json", "elbow.svg"] {
        assert!(listed.lines().any(|l| l.ends_with(name)), "{name} not listed:\n{listed}");
    }
    let table3 = String::from_utf8(read(&dir.path().join("out/table3_models.csv"))).unwrap();
    assert_eq!(table3.lines().count(), 4);
}

#[test]
fn stagewise_run_matches_single_run() {
    let (dir, config) = setup(150);
    assert!(risklab(&["run", "--config", s(&config)]).status.success());
    let st = dir.path().join("stages");
    let steps: [(&str, PathBuf); 4] = [
        ("ingest", config.clone()),
        ("cluster", st.join("stage_ingest.json")),
        ("train", st.join("stage_cluster.json")),
        ("explain", st.join("stage_train.json")),
    ];
    for (cmd, input) in &steps {
        let out = risklab(&[cmd, "--in", s(input), "--out", s(&st)]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["report.json", "table2_clusters.csv", "importance.csv", "shap_long.csv", "manifest.json"] {
        assert_eq!(read(&st.join(name)), read(&dir.path().join("out").join(name)), "{name}");
    }
}

#[test]
fn plot_reproduces_run_svg() {
    let (dir, config) = setup(150);
    assert!(risklab(&["run", "--config", s(&config)]).status.success());
    let out_dir = dir.path().join("out");
    for (kind, csv) in [("elbow", "elbow.csv"), ("cluster_scatter", "clusters.csv"), ("importance_bars", "importance.csv")] {
        let svg = dir.path().join(format!("{kind}.svg"));
        let out = risklab(&["plot", "--kind", kind, "--in", s(&out_dir.join(csv)), "--out", s(&svg)]);
        assert!(out.status.success(), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(read(&svg), read(&out_dir.join(format!("{kind}.svg"))), "{kind}");
    }
    let svg = dir.path().join("dep.svg");
    let out = risklab(&[
        "plot", "--kind", "shap_dependence", "--in", s(&out_dir.join("shap_long.csv")), "--out", s(&svg), "--features", "longitude,pop_density",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(read(&svg)).unwrap();
    assert!(text.contains("<svg") && text.trim_end().ends_with("</svg>"));
    assert!(text.contains("longitude") && text.contains("pop_density") && !text.contains("pct_poverty"));
}

#[test]
fn config_errors_exit_2() {
    let (dir, _) = setup(40);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"models":[{"kind":"GRADIENT_BOOSTING"}]}"#).unwrap();
    let out = risklab(&["run", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
    assert!(!dir.path().join("out").exists());

    std::fs::write(&bad, r#"{"test_fraction": 0}"#).unwrap();
    assert_eq!(risklab(&["run", "--config", s(&bad)]).status.code(), Some(2));
    assert_eq!(risklab(&["run"]).status.code(), Some(2));
}

#[test]
fn seed_env_is_validated() {
    let (_dir, config) = setup(40);
    let out = Command::new(env!("CARGO_BIN_EXE_risklab"))
        .args(["ingest", "--in", s(&config), "--out", s(&config.with_file_name("st"))])
        .env("RISKLAB_SEED", "x")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let (dir, config) = setup(40);
    std::fs::write(dir.path().join("counties.csv"), "fips,county\n01001,Autauga\n").unwrap();
    let out = risklab(&["run", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{}").unwrap();
    let out = risklab(&["train", "--in", s(&junk), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));

    std::fs::write(&junk, "k,sse\n1,abc\n").unwrap();
    let out = risklab(&["plot", "--kind", "elbow", "--in", s(&junk), "--out", s(&dir.path().join("e.svg"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sse"));
}
