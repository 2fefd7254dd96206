use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use fairsim_cli::Config;
use fairsim_core::synth;

fn fairsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairsim"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

/// Small synthetic tables written once per test.
struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        synth::unbiased(60, 1)
            .unwrap()
            .save(dir.path().join("unbiased.csv"))
            .unwrap();
        synth::planted_bias(120, 1)
            .unwrap()
            .save(dir.path().join("biased.csv"))
            .unwrap();
        std::fs::write(
            dir.path().join("groups.json"),
            r#"[{"column": "group", "op": "eq", "value": "a"}]"#,
        )
        .unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn single_row_file_is_a_data_error() {
    let f = Fixture::new();
    std::fs::write(f.path("one.csv"), "x,y\n1,a\n").unwrap();
    let out = fairsim(&[
        "similarity",
        "--method",
        "gower",
        "--data",
        p(&f.path("one.csv")),
        "--out",
        p(&f.path("o")),
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_one() {
    let f = Fixture::new();
    assert_eq!(code(&fairsim(&["similarity", "--bogus"])), 1);
    assert_eq!(code(&fairsim(&["nonsense"])), 1);
    assert_eq!(code(&fairsim(&["similarity", "--out", p(&f.path("o"))])), 1);
    let data = f.path("unbiased.csv");
    assert_eq!(
        code(&fairsim(&[
            "classify",
            "--data",
            p(&data),
            "--policy",
            "median",
            "--out",
            p(&f.path("o"))
        ])),
        1
    );
    assert_eq!(
        code(&fairsim(&[
            "fairness",
            "--data",
            p(&data),
            "--out",
            p(&f.path("o"))
        ])),
        1
    );
    assert_eq!(code(&fairsim(&["--help"])), 0);
}

#[test]
fn certify_exit_codes() {
    let f = Fixture::new();
    let groups = f.path("groups.json");
    let fair = fairsim(&[
        "certify",
        "--data",
        p(&f.path("unbiased.csv")),
        "--groups",
        p(&groups),
        "--folds",
        "3",
        "--model",
        "rf:40",
        "--out",
        p(&f.path("o1")),
    ]);
    assert_eq!(code(&fair), 0, "{}", String::from_utf8_lossy(&fair.stderr));
    let cert = &report(&f.path("o1"))["certification"];
    assert_eq!(cert["certified"], true);
    assert_eq!(cert["trail"].as_array().unwrap().len(), 4);

    // With the label kept out of the similarity, group b's random labels
    // leave a gap in every representation.
    let strict = fairsim(&[
        "certify",
        "--data",
        p(&f.path("biased.csv")),
        "--groups",
        p(&groups),
        "--folds",
        "3",
        "--model",
        "rf:40",
        "--scope",
        "features",
        "--delta",
        "0.05",
        "--out",
        p(&f.path("o2")),
    ]);
    assert_eq!(code(&strict), 3);
    assert_eq!(report(&f.path("o2"))["certification"]["certified"], false);
}

#[test]
fn reruns_are_byte_identical() {
    let f = Fixture::new();
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let out = f.path(run);
        let o = fairsim(&[
            "kernel",
            "--data",
            p(&f.path("biased.csv")),
            "--seed",
            "3",
            "--out",
            p(&out),
        ]);
        assert_eq!(code(&o), 0);
        bytes.push(
            ["report.json", "kernel_ek.csv", "kernel_rwk.csv"]
                .map(|n| std::fs::read(out.join(n)).unwrap()),
        );
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn config_echo_reproduces_the_section() {
    let f = Fixture::new();
    let first = f.path("first");
    let o = fairsim(&[
        "classify",
        "--data",
        p(&f.path("biased.csv")),
        "--model",
        "knn:3",
        "--folds",
        "4",
        "--seed",
        "9",
        "--mu",
        "0.4",
        "--out",
        p(&first),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r1 = report(&first);
    assert_eq!(r1["fairsim_report"], 1);
    let cfg: Config = serde_json::from_value(r1["config"]["classify"].clone()).unwrap();
    assert_eq!(cfg.mu, 0.4);
    let second = f.path("second");
    let mut args = vec!["classify".to_string()];
    args.extend(cfg.to_args());
    args.extend(["--out".to_string(), p(&second).to_string()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(code(&fairsim(&args)), 0);
    let r2 = report(&second);
    assert_eq!(r1["classification"], r2["classification"]);
    assert_eq!(r1["config"], r2["config"]);
}

#[test]
fn sections_accumulate_in_one_report() {
    let f = Fixture::new();
    let out = f.path("o");
    let data = f.path("biased.csv");
    for cmd in ["similarity", "network", "complexity"] {
        assert_eq!(
            code(&fairsim(&[cmd, "--data", p(&data), "--out", p(&out)])),
            0
        );
    }
    let r = report(&out);
    for key in ["similarity", "network", "complexity", "dataset", "version"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["dataset"]["n_rows"], 120);
    assert_eq!(r["network"]["n_nodes"], 120);
    assert!(out.join("similarity.csv").exists() && out.join("network.edges").exists());
    let header = std::fs::read_to_string(out.join("similarity.csv")).unwrap();
    assert!(header.starts_with("# fairsim-similarity v1 n=120"));
}

#[test]
fn impute_fills_every_cell() {
    let f = Fixture::new();
    std::fs::write(
        f.path("gaps.csv"),
        "x,c,y\n1,p,a\nNA,p,a\n3,,b\n4,q,b\n5,q,a\n",
    )
    .unwrap();
    let out = f.path("o");
    let o = fairsim(&[
        "impute",
        "--data",
        p(&f.path("gaps.csv")),
        "--policy",
        "top_k:2",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("imputed.csv")).unwrap();
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.split(',').all(|c| !c.is_empty() && c != "NA")));
    assert_eq!(report(&out)["imputation"]["missing_cells"], 2);
}

#[test]
fn augmentation_methods_balance_and_mark_rows() {
    let f = Fixture::new();
    let data = f.path("generated");
    assert_eq!(
        code(&fairsim(&[
            "generate",
            "--rows",
            "80",
            "--seed",
            "2",
            "--out",
            p(&data)
        ])),
        0
    );
    let csv = data.join("employees.csv");
    let schema = data.join("schema.json");
    for (method, key) in [
        ("smote", "smote"),
        ("graph", "graph"),
        ("group:Gender", "group"),
    ] {
        let out = f.path(method.replace(':', "_").as_str());
        let o = fairsim(&[
            "augment",
            "--data",
            p(&csv),
            "--schema",
            p(&schema),
            "--bins",
            "25,40,55",
            "--augment",
            method,
            "--out",
            p(&out),
        ]);
        assert_eq!(
            code(&o),
            0,
            "{method}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let r = report(&out);
        let added = r["augmentation"]["provenance"][key].as_u64().unwrap();
        assert!(added > 0, "{method}");
        let text = std::fs::read_to_string(out.join("augmented.csv")).unwrap();
        assert!(text.lines().next().unwrap().ends_with(",__fairsim_origin"));
        assert_eq!(text.lines().count() as u64, 1 + 80 + added);
    }
}

#[test]
fn unknown_augmentation_is_usage_error() {
    let f = Fixture::new();
    let o = fairsim(&[
        "augment",
        "--data",
        p(&f.path("biased.csv")),
        "--augment",
        "gan",
        "--out",
        p(&f.path("o")),
    ]);
    assert_eq!(code(&o), 1);
}
