use std::process::Command;

use cookie_trees::criteria::CookieConfig;
use cookie_trees::tree::TreeModel;
use cookie_trees::walk::{escape_probability, TrialParams};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_cookie-trees");
const BINARY: &str = r#"{"type":"bary","b":2}"#;
const ALTERNATING: &str = r#"{"type":"ssym","period":[1,4]}"#;
const CRIT: &str = "0.3660254037844386";

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(args: &[&str]) -> Value {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&out).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn quantities_alternating_tree() {
    let v = json(&[
        "quantities",
        "--model",
        ALTERNATING,
        "--lambda1",
        "1",
        "--lambda",
        CRIT,
    ]);
    let r = &v["result"];
    let alpha = r["alpha_beta"]["alpha"].as_f64().unwrap();
    let beta = r["alpha_beta"]["beta"].as_f64().unwrap();
    assert!((alpha - 0.50311).abs() < 1e-4 && (beta - 0.50311).abs() < 1e-4);
    assert!(alpha > 0.5);
    assert!((r["br"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert_eq!(r["br_r"], "inf");
}

#[test]
fn quantities_binary_and_path() {
    let v = json(&["quantities", "--model", BINARY]);
    assert_eq!(v["result"]["br"].as_f64(), Some(2.0));
    assert_eq!(v["result"]["br_r"], "inf");
    let v = json(&["quantities", "--model", r#"{"type":"ssym","rule":"path"}"#]);
    assert_eq!(v["result"]["br"].as_f64(), Some(1.0));
    assert_eq!(v["result"]["br_r"].as_f64(), Some(0.0));
}

#[test]
fn quantities_reports_unsupported_pairs() {
    let explicit = r#"{"type":"explicit","children":{"":["0"],"0":[]}}"#;
    let v = json(&["quantities", "--model", explicit]);
    assert!(v["result"]["unsupported"]["br"]
        .as_str()
        .unwrap()
        .contains("unsupported"));
}

#[test]
fn classify_example_pair() {
    let v = json(&[
        "classify",
        "--model",
        ALTERNATING,
        "--lambda1",
        "1",
        "--lambda",
        CRIT,
    ]);
    assert_eq!(v["result"]["verdict"], "transient");
    assert_eq!(v["result"]["fired_rule"], "c_alpha_beta_vs_inv_br");
    let v = json(&[
        "classify",
        "--model",
        BINARY,
        "--lambda1",
        "1",
        "--lambda",
        CRIT,
    ]);
    assert_eq!(v["result"]["verdict"], "critical_or_inconclusive");
    let v = json(&[
        "classify",
        "--model",
        BINARY,
        "--lambda1",
        "0.3",
        "--lambda2",
        "4",
        "--lambda",
        "1",
    ]);
    assert_eq!(v["result"]["fired_rule"], "a_br_above_one");
    assert_eq!(v["result"]["verdict"], "transient");
}

#[test]
fn escape_matches_library_call() {
    let (code, out, _) = run(&[
        "escape",
        "--model",
        BINARY,
        "--lambda1",
        "1",
        "--lambda",
        "0.45",
        "--depth",
        "10",
        "--trials",
        "3000",
        "--seed",
        "17",
    ]);
    assert_eq!(code, 0);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 1);
    let est = escape_probability(
        &TreeModel::bary(2).unwrap(),
        &CookieConfig::oerw(1.0, 0.45).unwrap(),
        &TrialParams::new(10),
        3000,
        17,
    )
    .unwrap();
    assert_eq!(rows[0][7], est.p_hat.to_string());
    assert_eq!(rows[0][8], est.ci_halfwidth.to_string());
}

#[test]
fn csv_layout_and_depth_one() {
    let (code, out, _) = run(&[
        "escape",
        "--model",
        BINARY,
        "--lambda1",
        "0.2",
        "--lambda2",
        "3",
        "--lambda",
        "0.5",
        "--depth",
        "1",
        "--trials",
        "100",
    ]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("# config: {"));
    assert_eq!(
        lines.next().unwrap(),
        "schema_version,model_id,M,lambda1,lambda2,lambda,D,n_trials,p_hat,ci,capped,seed"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[1], "bary2");
    assert_eq!(row[2], "2");
    assert_eq!(row[8], "1");
}

#[test]
fn sweep_is_monotone_in_lambda() {
    let (code, out, _) = run(&[
        "sweep",
        "--model",
        BINARY,
        "--lambda1",
        "1",
        "--lambda-grid",
        "0.25:0.5:0.05",
        "--depths",
        "16",
        "--trials",
        "20000",
    ]);
    assert_eq!(code, 0);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 6);
    let p: Vec<f64> = rows.iter().map(|r| r[7].parse().unwrap()).collect();
    let ci: Vec<f64> = rows.iter().map(|r| r[8].parse().unwrap()).collect();
    for i in 1..p.len() {
        assert!(p[i] + 1.5 * (ci[i] + ci[i - 1]) > p[i - 1], "{p:?}");
    }
    assert!(p[5] > p[0]);
}

#[test]
fn outputs_replay_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(&str, Vec<&str>)> = vec![
        (
            "sweep.csv",
            vec![
                "sweep",
                "--model",
                BINARY,
                "--lambda1",
                "1",
                "--lambda1-grid",
                "0.5,1",
                "--lambda",
                "0.5",
                "--depths",
                "4,8",
                "--trials",
                "500",
                "--seed",
                "3",
            ],
        ),
        (
            "perc.json",
            vec![
                "percolate",
                "--model",
                BINARY,
                "--lambda1",
                "1",
                "--lambda",
                "0.6",
                "--depth",
                "5",
                "--samples",
                "3",
            ],
        ),
        (
            "cls.json",
            vec![
                "classify",
                "--model",
                ALTERNATING,
                "--lambda1",
                "1",
                "--lambda",
                CRIT,
            ],
        ),
    ];
    for (name, args) in cases {
        let path = dir.path().join(name);
        let mut a = args.clone();
        let p = path.to_str().unwrap();
        a.extend(["--out", p]);
        let (code, _, err) = run(&a);
        assert_eq!(code, 0, "{err}");
        let first = std::fs::read(&path).unwrap();
        let again = dir.path().join(format!("again-{name}"));
        let (code, _, err) = run(&["replay", p, "--out", again.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        assert_eq!(first, std::fs::read(&again).unwrap(), "{name}");
    }
}

#[test]
fn model_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, r#"{"type":"ssym","rule":"pow2_doubling"}"#).unwrap();
    let v = json(&["quantities", "--model", path.to_str().unwrap()]);
    assert_eq!(v["result"]["model_id"], "ssym_pow2_doubling");
}

#[test]
fn percolate_export() {
    let v = json(&[
        "percolate",
        "--model",
        BINARY,
        "--lambda1",
        "1",
        "--lambda",
        "0.6",
        "--depth",
        "1",
    ]);
    let s = &v["result"]["samples"][0];
    assert_eq!(s["disjoint_rays"], 2);
    assert_eq!(s["edges"].as_array().unwrap().len(), 2);
    assert!(s["edges"][0]["open"].as_bool().unwrap());
}

#[test]
fn critical_analytic() {
    let v = json(&[
        "critical",
        "--model",
        r#"{"type":"bary","b":4}"#,
        "--lambda1",
        "0",
    ]);
    assert!((v["result"]["lambda_c"].as_f64().unwrap() - 0.5).abs() < 1e-8);
}

#[test]
fn exit_codes() {
    // parameter errors
    assert_eq!(
        run(&["escape", "--model", BINARY, "--lambda", "-1", "--depth", "3"]).0,
        2
    );
    assert_eq!(
        run(&[
            "escape",
            "--model",
            BINARY,
            "--lambda2",
            "1",
            "--lambda",
            "1",
            "--depth",
            "3"
        ])
        .0,
        2
    );
    assert_eq!(
        run(&["escape", "--model", "{nope", "--lambda", "1", "--depth", "3"]).0,
        2
    );
    assert_eq!(run(&["bogus"]).0, 2);
    // unsupported
    let explicit = r#"{"type":"explicit","children":{"":["0"],"0":[]}}"#;
    assert_eq!(
        run(&[
            "classify",
            "--model",
            explicit,
            "--lambda1",
            "1",
            "--lambda",
            "0.5"
        ])
        .0,
        3
    );
    assert_eq!(
        run(&[
            "percolate",
            "--model",
            BINARY,
            "--lambda1",
            "1",
            "--lambda2",
            "1",
            "--lambda",
            "1",
            "--depth",
            "2"
        ])
        .0,
        3
    );
    // insufficient samples
    let (code, _, err) = run(&[
        "percolate",
        "--model",
        BINARY,
        "--lambda1",
        "1",
        "--lambda",
        "1",
        "--depth",
        "1",
        "--samples",
        "50",
        "--qi",
        "0.0,1.1",
    ]);
    assert_eq!(code, 4, "{err}");
    // io
    assert_eq!(run(&["replay", "/nonexistent/file.csv"]).0, 1);
}
