use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mdcms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdcms"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// `X ~ bern(0.45)`, `V_12 = X ⊕ bern(0.025)`, `U_l = X ⊕ bern(0.2)`, all
/// three Hamming constraints.
fn write_model(dir: &Path) -> std::path::PathBuf {
    let f = |c: bool, p: f64| if c { p } else { 1.0 - p };
    let mut probs = Vec::new();
    for x in 0..2 {
        for v in 0..2 {
            for u1 in 0..2 {
                for u2 in 0..2 {
                    probs.push(
                        f(x == 1, 0.45) * f(v != x, 0.025) * f(u1 != x, 0.2) * f(u2 != x, 0.2),
                    );
                }
            }
        }
    }
    let ham = serde_json::json!({"alphabet": 2, "matrix": [[0.0, 1.0], [1.0, 0.0]]});
    let model = serde_json::json!({
        "L": 2,
        "scheme": "ZB",
        "source": "X",
        "variables": [
            {"name": "X", "alphabet": 2},
            {"name": "V_12", "alphabet": 2},
            {"name": "U_1", "alphabet": 2},
            {"name": "U_2", "alphabet": 2}
        ],
        "roles": [
            {"name": "V_12", "kind": "shared", "subset": [1, 2]},
            {"name": "U_1", "kind": "private", "subset": [1]},
            {"name": "U_2", "kind": "private", "subset": [2]}
        ],
        "probs": probs,
        "distortions": {"[1]": ham, "[2]": ham, "[1,2]": ham}
    });
    let path = dir.join("model.json");
    fs::write(&path, serde_json::to_string_pretty(&model).unwrap()).unwrap();
    path
}

#[test]
fn rd_bss_point_and_grid() {
    let o = mdcms(&["rd", "--D", "0.25"]);
    assert!(o.status.success());
    let r: f64 = stdout(&o).trim().parse().unwrap();
    assert!((r - 0.188722).abs() < 1e-6);

    let o = mdcms(&["rd", "--grid", "0.1:0.3:0.1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "D,rate");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("0.2,0.278071905"));
}

#[test]
fn rd_blahut_arimoto_source_file() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src.json");
    fs::write(&src, r#"{"probs": [0.5, 0.5], "matrix": [[0, 1], [1, 0]]}"#).unwrap();
    let out = dir.path().join("rd.txt");
    let o = mdcms(&[
        "rd",
        "--source",
        src.to_str().unwrap(),
        "--D",
        "0.25",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: f64 = fs::read_to_string(&out).unwrap().trim().parse().unwrap();
    assert!((r - 0.188722).abs() < 1e-4);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("rd.txt.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["subcommand"], "rd");
    assert_eq!(manifest["input_digests"][0][1].as_str().unwrap().len(), 64);
}

#[test]
fn eval_and_decoders_on_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let out = dir.path().join("eval.json");
    let o = mdcms(&[
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let rates: Vec<f64> = v["rates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r.as_f64().unwrap())
        .collect();
    let objective = v["objective"].as_f64().unwrap();
    assert!((rates[0] + rates[1] - objective).abs() < 1e-9);
    assert!((rates[0] - rates[1]).abs() < 1e-9);
    // V_12 outweighs U_l whenever they disagree, so every decoder outputs V_12.
    for k in ["[1]", "[2]", "[1,2]"] {
        assert!(
            (v["distortions"][k].as_f64().unwrap() - 0.025).abs() < 1e-9,
            "{k}"
        );
    }
    assert!(dir.path().join("eval.json.manifest.json").exists());

    let exact = mdcms(&["eval", "--model", model.to_str().unwrap(), "--exact"]);
    let e: serde_json::Value = serde_json::from_str(&stdout(&exact)).unwrap();
    assert!((e["objective"].as_f64().unwrap() - objective).abs() < 1e-9);

    let o = mdcms(&["decoders", "--model", model.to_str().unwrap()]);
    assert!(o.status.success());
    let d: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(d["decoders"]["[1,2]"]["inputs"].as_array().unwrap().len() >= 3);
}

#[test]
fn sim_runs_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let csv = dir.path().join("trials.csv");
    let args = [
        "sim",
        "--model",
        model.to_str().unwrap(),
        "--seed",
        "3",
        "--n",
        "4",
        "--trials",
        "20",
    ];
    let mut with_csv = args.to_vec();
    with_csv.extend(["--csv", csv.to_str().unwrap()]);
    let o = mdcms(&with_csv);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["trials"], 20);
    let rows = fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 21);
    assert!(rows.starts_with("trial,success,"));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path());
    let args = [
        "sim",
        "--model",
        model.to_str().unwrap(),
        "--seed",
        "5",
        "--n",
        "6",
        "--trials",
        "30",
    ];
    let a = mdcms(&args);
    let b = mdcms(&[
        "--jobs", "1", args[0], args[1], args[2], args[3], args[4], args[5], args[6], args[7],
        args[8],
    ]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);

    let c = mdcms(&[
        "cross-section",
        "zb",
        "--D",
        "0.15",
        "--seed",
        "2",
        "--restarts",
        "4",
    ]);
    let d = mdcms(&[
        "cross-section",
        "zb",
        "--D",
        "0.15",
        "--seed",
        "2",
        "--restarts",
        "4",
    ]);
    assert!(c.status.success());
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(mdcms(&["eval", "--bogus"]).status.code(), Some(2));
    assert_eq!(mdcms(&["separation", "zb"]).status.code(), Some(2));
    assert_eq!(mdcms(&["nothing"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"L\": 2").unwrap();
    let o = mdcms(&["eval", "--model", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let missing = dir.path().join("missing.json");
    assert_eq!(
        mdcms(&["eval", "--model", missing.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(mdcms(&["rd", "--D=-0.5"]).status.code(), Some(1));
    assert_eq!(mdcms(&["rd"]).status.code(), Some(1));
    assert_eq!(
        mdcms(&["rd", "--grid", "0.3:0.1:0.1"]).status.code(),
        Some(1)
    );

    let model = write_model(dir.path());
    let o = mdcms(&[
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--weights",
        "1,x",
    ]);
    assert_eq!(o.status.code(), Some(1));
}
