mod support;

use std::fs;

use serde_json::Value;
use support::*;

fn augment_args<'a>(t: &'a Toy, out: &'a str) -> Vec<&'a str> {
    vec![
        "augment",
        "--corpus",
        p(&t.corpus),
        "--dict",
        &t.de_flag,
        "--dict",
        &t.zh_flag,
        "--seed",
        "7",
        "--batch-size",
        "2",
        "--out",
        out,
    ]
}

#[test]
fn augment_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let t = toy(dir.path());
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    ok(&augment_args(&t, p(&a)));
    ok(&augment_args(&t, p(&b)));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(read_lines(&a).len(), 5);
    assert!(dir.path().join("a.jsonl.stats.json").exists());
}

#[test]
fn alpha_zero_reproduces_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let t = toy(dir.path());
    let out = dir.path().join("o.jsonl");
    let mut args = augment_args(&t, p(&out));
    args.extend(["--alpha", "0", "--no-shuffle"]);
    ok(&args);
    let input = read_lines(&t.corpus);
    for (mut rec, orig) in read_lines(&out).into_iter().zip(input) {
        let trace = rec.as_object_mut().unwrap().remove("trace").unwrap();
        assert_eq!(
            trace,
            serde_json::json!({"selected": false, "records": [], "misses": []})
        );
        assert_eq!(rec, orig);
    }
}

#[test]
fn static_epochs_are_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let t = toy(dir.path());
    let out = dir.path().join("s.jsonl");
    let mut args = augment_args(&t, p(&out));
    args.extend(["--mode", "static", "--epochs", "3", "--beta", "0.5"]);
    ok(&args);
    let files: Vec<_> = (0..3)
        .map(|e| fs::read(dir.path().join(format!("s.epoch{e}.jsonl"))).unwrap())
        .collect();
    assert_eq!(files[0], files[1]);
    assert_eq!(files[1], files[2]);
    // materialized in corpus order
    let ids: Vec<_> = read_lines(&dir.path().join("s.epoch0.jsonl"))
        .iter()
        .map(|r| r["id"].as_str().unwrap().to_owned())
        .collect();
    assert_eq!(ids, ["t1", "t2", "t3", "t4", "t5"]);

    let stats: Value =
        serde_json::from_slice(&fs::read(dir.path().join("s.jsonl.stats.json")).unwrap()).unwrap();
    assert_eq!(stats["epochs"].as_array().unwrap().len(), 3);
    assert_eq!(stats["total"]["sentences_seen"], 15);
}

#[test]
fn seed_env_fallback_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let t = toy(dir.path());
    let run_with = |env: Option<&str>, flag: Option<&str>, name: &str| {
        let out = dir.path().join(name);
        let mut args = augment_args(&t, p(&out));
        args.retain(|a| *a != "--seed" && *a != "7");
        if let Some(s) = flag {
            args.extend(["--seed", s]);
        }
        let mut cmd = csf();
        cmd.args(&args).env_remove("CSF_SEED");
        if let Some(s) = env {
            cmd.env("CSF_SEED", s);
        }
        assert!(cmd.status().unwrap().success());
        fs::read(out).unwrap()
    };
    let flag7 = run_with(None, Some("7"), "f7.jsonl");
    assert_eq!(run_with(Some("7"), None, "e7.jsonl"), flag7);
    assert_eq!(run_with(Some("123"), Some("7"), "both.jsonl"), flag7);
    assert_ne!(run_with(Some("123"), None, "e123.jsonl"), flag7);
}

#[test]
fn augment_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let t = toy(dir.path());
    let out = dir.path().join("o.jsonl");
    for (extra, want) in [
        (vec!["--alpha", "1.5"], 2),
        (vec!["--languages", "es"], 2),
        (vec!["--languages", "de,de"], 2),
        (vec!["--mode", "sometimes"], 2),
        (vec!["--oov", "resample:0"], 2),
        (vec!["--batch-size", "0"], 2),
        (vec!["--workers", "0"], 2),
    ] {
        let mut args = augment_args(&t, p(&out));
        args.extend(extra.iter().copied());
        assert_eq!(code(&run(&args)), want, "{extra:?}");
    }

    let missing = dir.path().join("missing.jsonl");
    let mut args = augment_args(&t, p(&out));
    args[2] = p(&missing);
    assert_eq!(code(&run(&args)), 2);

    let bad = dir.path().join("bad.jsonl");
    fs::write(
        &bad,
        "{\"id\":\"x\",\"task\":\"tag_and_classify\",\"tokens\":[\"a\"],\"tags\":[]}\n",
    )
    .unwrap();
    let mut args = augment_args(&t, p(&out));
    args[2] = p(&bad);
    let res = run(&args);
    assert_eq!(code(&res), 3);
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 1"));
}

#[test]
fn dict_inspect_counts_and_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let dict = dir.path().join("d.txt");
    fs::write(&dict, "cold kalt\ncold frostig\n").unwrap();
    let corpus = dir.path().join("c.jsonl");
    // distinct tokens cold, time, warm, what; the second dict covers two
    fs::write(
        &corpus,
        r#"{"id":"a","task":"classify","tokens":["cold","time","warm","cold","what"]}"#,
    )
    .unwrap();
    let dict2 = dir.path().join("d2.txt");
    fs::write(&dict2, "cold kalt\ncold frostig\ntime zeit\n").unwrap();

    let out = ok(&["dict-inspect", "--dict", &format!("de={}", dict.display())]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["dictionaries"][0]["entries"], 1);
    assert_eq!(report["dictionaries"][0]["multi_translation_entries"], 1);

    let out = ok(&[
        "dict-inspect",
        "--dict",
        &format!("de={}", dict2.display()),
        "--corpus",
        p(&corpus),
    ]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let cov = &report["dictionaries"][0]["coverage"];
    assert_eq!(cov["distinct_tokens"], 4);
    assert_eq!(cov["covered"], 2);
    assert_eq!(cov["distinct_token_coverage"], 0.5);

    let res = run(&[
        "dict-inspect",
        "--dict",
        &format!("de={}", dir.path().join("nope.txt").display()),
    ]);
    assert_eq!(code(&res), 2);
}

#[test]
fn encode_examples() {
    let dir = tempfile::tempdir().unwrap();
    let t = toy(dir.path());
    let input = dir.path().join("in.jsonl");
    fs::write(
        &input,
        [
            r#"{"id":"m","task":"classify","tokens":["cold"]}"#,
            r#"{"id":"u","task":"classify","tokens":["it","zzz"]}"#,
            r#"{"id":"l","task":"pair_classify","tokens":["it","is","very","cold"],"tokens2":["play","jazz","music"]}"#,
        ]
        .join("\n"),
    )
    .unwrap();
    let out = dir.path().join("enc.jsonl");
    ok(&[
        "encode",
        "--input",
        p(&input),
        "--vocab",
        p(&t.vocab),
        "--max-len",
        "8",
        "--out",
        p(&out),
    ]);
    let recs = read_lines(&out);
    assert_eq!(
        recs[0]["pieces"],
        serde_json::json!(["[CLS]", "co", "##ld", "[SEP]"])
    );
    assert_eq!(recs[0]["ids"], serde_json::json!([2, 7, 8, 3]));
    assert_eq!(recs[0]["truncated"], false);
    assert_eq!(
        recs[1]["pieces"],
        serde_json::json!(["[CLS]", "it", "[UNK]", "[SEP]"])
    );
    assert_eq!(recs[2]["truncated"], true);
    assert_eq!(recs[2]["pieces"].as_array().unwrap().len(), 8);

    let res = run(&[
        "encode",
        "--input",
        p(&input),
        "--vocab",
        p(&t.vocab),
        "--max-len",
        "3",
    ]);
    assert_eq!(code(&res), 2);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, dicts) = synthetic(dir.path(), 2000, 8, &["de", "zh", "es"], 2);
    let out = dir.path().join("run.jsonl");
    let mut args = vec![
        "augment",
        "--corpus",
        p(&corpus),
        "--alpha",
        "0.6",
        "--beta",
        "0.5",
        "--seed",
        "3",
    ];
    for d in &dicts {
        args.extend(["--dict", d.as_str()]);
    }
    args.extend(["--out", p(&out)]);
    ok(&args);

    let verify_alpha = |path: &std::path::Path, alpha: &str, extra: &[&str]| {
        let mut a = vec![
            "verify",
            "--input",
            p(path),
            "--languages",
            "de,zh,es",
            "--alpha",
            alpha,
            "--beta",
            "0.5",
        ];
        a.extend(extra);
        code(&run(&a))
    };
    let verify = |path: &std::path::Path, extra: &[&str]| verify_alpha(path, "0.6", extra);
    assert_eq!(verify(&out, &[]), 0);
    assert_eq!(verify(&out, &["--n-min", "1000000"]), 5);
    assert_eq!(verify_alpha(&out, "0.9", &[]), 4);

    // every zh replacement relabelled as de
    let tampered = dir.path().join("tampered.jsonl");
    fs::write(
        &tampered,
        fs::read_to_string(&out)
            .unwrap()
            .replace(r#""lang":"zh""#, r#""lang":"de""#),
    )
    .unwrap();
    assert_eq!(verify(&tampered, &[]), 4);

    // a record pointing past its segment
    let corrupt = dir.path().join("corrupt.jsonl");
    let text = fs::read_to_string(&out).unwrap();
    let bad = text.replacen(r#""idx":"#, r#""idx":9"#, 1);
    assert_ne!(bad, text);
    fs::write(&corrupt, bad).unwrap();
    assert_eq!(verify(&corrupt, &[]), 3);
}
