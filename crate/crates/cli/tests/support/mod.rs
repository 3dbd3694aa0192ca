#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn csf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_csf"))
}

pub fn run(args: &[&str]) -> Output {
    csf()
        .args(args)
        .env_remove("CSF_SEED")
        .output()
        .expect("csf runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert_eq!(
        code(&out),
        0,
        "csf {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub struct Toy {
    pub corpus: PathBuf,
    pub de: PathBuf,
    pub zh: PathBuf,
    pub vocab: PathBuf,
    pub de_flag: String,
    pub zh_flag: String,
}

/// Small hand-written corpus covering all three task kinds.
pub fn toy(dir: &Path) -> Toy {
    let corpus = dir.join("toy.jsonl");
    let lines = [
        r#"{"id":"t1","task":"classify","tokens":["it","is","very","cold"],"label":"weather"}"#,
        r#"{"id":"t2","task":"pair_classify","tokens":["play","jazz","music"],"tokens2":["what","time","is","it"],"label":"neutral"}"#,
        r#"{"id":"t3","task":"tag_and_classify","tokens":["set","alarm","for","new","york","time"],"tags":["O","O","O","B-loc","I-loc","O"],"label":"alarm"}"#,
        r#"{"id":"t4","task":"classify","tokens":["The","music","is","very","good"],"label":"music"}"#,
        r#"{"id":"t5","task":"classify","tokens":["cold","cold","cold"],"label":"weather"}"#,
    ];
    fs::write(&corpus, lines.join("\n") + "\n").unwrap();
    let de = dir.join("de.txt");
    fs::write(
        &de,
        "it es\nis ist\nvery sehr\ncold kalt\ncold frostig\nwhat was\ntime zeit\nmusic musik\nplay spielen\nthe der\nalarm wecker\n",
    )
    .unwrap();
    let zh = dir.join("zh.txt");
    fs::write(
        &zh,
        "very 很\ncold 冷\nwhat 什么\ntime 时间\nmusic 音乐\nalarm 闹钟\nnew 新\n",
    )
    .unwrap();
    let vocab = dir.join("vocab.txt");
    fs::write(
        &vocab,
        [
            "[PAD]", "[UNK]", "[CLS]", "[SEP]", "it", "is", "very", "co", "##ld", "kalt", "sehr",
            "play", "ja", "##zz", "music",
        ]
        .join("\n")
            + "\n",
    )
    .unwrap();
    Toy {
        de_flag: format!("de={}", de.display()),
        zh_flag: format!("zh={}", zh.display()),
        corpus,
        de,
        zh,
        vocab,
    }
}

/// `n` classify instances over a fixed vocabulary, plus dictionaries that
/// give every word `n_tr` translations in each of `langs`.
pub fn synthetic(
    dir: &Path,
    n: usize,
    len: usize,
    langs: &[&str],
    n_tr: usize,
) -> (PathBuf, Vec<String>) {
    let words: Vec<String> = (0..50).map(|i| format!("w{i}")).collect();
    let corpus = dir.join("synthetic.jsonl");
    let mut body = String::new();
    for i in 0..n {
        let tokens: Vec<&str> = (0..len)
            .map(|j| words[(i * 7 + j * 13) % words.len()].as_str())
            .collect();
        body.push_str(&serde_json::json!({"id": format!("s{i}"), "task": "classify", "tokens": tokens, "label": "x"}).to_string());
        body.push('\n');
    }
    fs::write(&corpus, body).unwrap();
    let mut flags = Vec::new();
    for lang in langs {
        let path = dir.join(format!("{lang}.muse"));
        let mut text = String::new();
        for w in &words {
            for k in 0..n_tr {
                text.push_str(&format!("{w} {w}_{lang}{k}\n"));
            }
        }
        fs::write(&path, text).unwrap();
        flags.push(format!("{lang}={}", path.display()));
    }
    (corpus, flags)
}

pub fn read_lines(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}
