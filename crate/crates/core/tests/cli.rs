use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn tablesel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tablesel"))
        .args(args)
        .output()
        .expect("run tablesel")
}

fn ok_json(out: Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn err_json(out: Output) -> Value {
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert_eq!(v["schema_version"], 1);
    v
}

fn write_config(dir: &Path, name: &str, theta: f64) -> PathBuf {
    let p = dir.join(name);
    let cfg = serde_json::json!({
        "theta": theta,
        "cdssm": {"shape": {"trigram_dim": 500, "window": 3, "conv_dim": 16, "sem_dim": 8}, "epochs": 2},
        "classifier": {"n_trees": 40},
    });
    fs::write(&p, cfg.to_string()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_train_evaluate_answer() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let corpus = root.join("corpus");
    let v = ok_json(tablesel(&[
        "generate-corpus",
        "--out",
        s(&corpus),
        "--seed",
        "3",
        "--normal",
        "40",
        "--match-distractor",
        "4",
        "--dominance-distractor",
        "4",
    ]));
    assert_eq!(v["queries"], 48);
    assert!(corpus.join("clicks.jsonl").is_file());

    let cfg = write_config(root, "run.json", 0.5);
    let train_out = root.join("train");
    let v = ok_json(tablesel(&[
        "train",
        "--corpus",
        s(&corpus),
        "--out",
        s(&train_out),
        "--config",
        s(&cfg),
    ]));
    assert!(v["trees"].as_u64().unwrap() > 0);
    for f in ["model.json", "features.jsonl", "train_report.json"] {
        assert!(train_out.join(f).is_file(), "{f}");
    }
    let model = train_out.join("model.json");

    let eval_out = root.join("eval");
    let v = ok_json(tablesel(&[
        "evaluate",
        "--corpus",
        s(&corpus),
        "--model",
        s(&model),
        "--out",
        s(&eval_out),
        "--config",
        s(&cfg),
    ]));
    assert!(v["pairs"].as_u64().unwrap() > 0);
    let csv = fs::read_to_string(eval_out.join("selector_pr.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("threshold,tp,fp,fn,precision,recall")
    );
    assert_eq!(csv.lines().count(), 102);
    for f in [
        "scores.jsonl",
        "answers.jsonl",
        "classifier_pr.csv",
        "classifier_pr.json",
        "selector_pr.json",
    ] {
        assert!(eval_out.join(f).is_file(), "{f}");
    }

    let first: Value = serde_json::from_str(
        fs::read_to_string(corpus.join("queries.jsonl"))
            .unwrap()
            .lines()
            .next()
            .unwrap(),
    )
    .unwrap();
    let query = first["text"].as_str().unwrap().to_string();
    let docs: Vec<String> = first["docs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| {
            corpus
                .join(d["path"].as_str().unwrap())
                .display()
                .to_string()
        })
        .collect();
    let answer = |cfg: &Path| -> Value {
        let mut args = vec![
            "answer",
            "--model",
            s(&model),
            "--query",
            &query,
            "--config",
            s(cfg),
        ];
        for d in &docs {
            args.push("--doc");
            args.push(d);
        }
        ok_json(tablesel(&args))
    };

    let never = write_config(root, "never.json", 1.0);
    let v = answer(&never);
    assert_eq!(v["status"], "no_answer");
    assert!(v["answer"].is_null());

    let always = write_config(root, "always.json", 0.0);
    let v = answer(&always);
    assert_eq!(v["status"], "answer");
    let snippet = &v["answer"]["snippet"];
    assert_eq!(snippet["rows"].as_array().unwrap().len(), 4);
    assert_eq!(snippet["cols"].as_array().unwrap().len(), 4);
    assert!(v["answer"]["doc_rank"].as_u64().unwrap() >= 1);
    assert!(v["answer"]["score"].as_f64().unwrap() > 0.0);

    let out = tablesel(&["inspect", "--model", s(&model)]);
    assert!(out.status.success());
    assert!(!out.stdout.is_empty());
}

#[test]
fn errors_are_json_with_exit_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();

    let v = err_json(tablesel(&[
        "train",
        "--corpus",
        s(&root.join("nope")),
        "--out",
        s(root),
    ]));
    assert_eq!(v["error"]["kind"], "corpus");

    let bad = root.join("bad.json");
    fs::write(&bad, r#"{"thetaa": 0.5}"#).unwrap();
    let v = err_json(tablesel(&[
        "inspect",
        "--model",
        "m.json",
        "--config",
        s(&bad),
    ]));
    assert_eq!(v["error"]["kind"], "json");

    let out_of_range = root.join("range.json");
    fs::write(&out_of_range, r#"{"theta": 2.0}"#).unwrap();
    let v = err_json(tablesel(&[
        "inspect",
        "--model",
        "m.json",
        "--config",
        s(&out_of_range),
    ]));
    assert_eq!(v["error"]["kind"], "invalid_argument");

    let v = err_json(tablesel(&[
        "answer",
        "--model",
        s(&root.join("missing.json")),
        "--query",
        "x",
        "--doc",
        "d.html",
    ]));
    assert_eq!(v["error"]["kind"], "io");
}
