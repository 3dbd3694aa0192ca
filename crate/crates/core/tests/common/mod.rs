#![allow(dead_code)]

use csf_core::corpus::{Instance, TaskKind, Token};
use csf_core::dictionary::{load_dictionary_lines, DictionaryPack, MalformedPolicy};
use csf_core::{AugmentationConfig, LanguageCode, Ratio};
use proptest::prelude::*;

pub fn lang(s: &str) -> LanguageCode {
    LanguageCode::new(s).unwrap()
}

/// Words the toy pack knows in some languages, plus out-of-dictionary ones.
pub const WORDS: &[&str] = &[
    "it", "is", "very", "cold", "What", "time", "newyork", "music", "play", "jazz", "the", "xylo",
    "Cold", "blorp",
];

pub fn toy_pack() -> DictionaryPack {
    let de: &[&str] = &[
        "it es",
        "is ist",
        "very sehr",
        "cold kalt",
        "cold frostig",
        "what was",
        "time zeit",
        "music musik",
        "play spielen",
        "the der",
        "the die",
        "the das",
    ];
    let zh: &[&str] = &[
        "very 很",
        "cold 冷",
        "what 什么",
        "time 时间",
        "music 音乐",
        "newyork 纽约",
    ];
    let es: &[&str] = &[
        "it eso",
        "very muy",
        "cold frío",
        "what qué",
        "time tiempo",
        "time hora",
        "newyork nueva york",
        "music música",
        "play tocar",
        "jazz jazz",
        "the el",
        "the la",
    ];
    DictionaryPack::build(
        [("de", de), ("zh", zh), ("es", es)]
            .into_iter()
            .map(|(t, lines)| {
                load_dictionary_lines(lines, lang("en"), lang(t), MalformedPolicy::Abort).unwrap()
            })
            .collect(),
    )
    .unwrap()
}

/// Pack where every word in `words` has `n_tr` translations in each language.
pub fn full_coverage_pack(words: &[String], langs: &[&str], n_tr: usize) -> DictionaryPack {
    DictionaryPack::build(
        langs
            .iter()
            .map(|l| {
                let lines: Vec<String> = words
                    .iter()
                    .flat_map(|w| (0..n_tr).map(move |k| format!("{w} {w}_{l}{k}")))
                    .collect();
                load_dictionary_lines(&lines, lang("en"), lang(l), MalformedPolicy::Abort).unwrap()
            })
            .collect(),
    )
    .unwrap()
}

pub fn config(alpha: f64, beta: f64, langs: &[&str], seed: u64) -> AugmentationConfig {
    let mut c = AugmentationConfig::new(langs.iter().map(|l| lang(l)).collect(), seed);
    c.alpha = Ratio::new(alpha).unwrap();
    c.beta = Ratio::new(beta).unwrap();
    c
}

const TAGS: &[&str] = &["O", "B-x", "I-x", "B-city"];

fn tokens(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(WORDS).prop_map(str::to_owned), 0..max)
}

/// Random valid instances of all three task kinds.
pub fn instance_strategy() -> impl Strategy<Value = Instance> {
    let id = "[a-z0-9]{1,8}";
    prop_oneof![
        (id, tokens(12)).prop_map(|(id, t)| {
            Instance::new(
                id,
                TaskKind::Classify,
                vec![t.into_iter().map(Token::new).collect()],
                Some("l".into()),
            )
            .unwrap()
        }),
        (id, tokens(8), tokens(8)).prop_map(|(id, a, b)| {
            Instance::new(
                id,
                TaskKind::PairClassify,
                vec![
                    a.into_iter().map(Token::new).collect(),
                    b.into_iter().map(Token::new).collect(),
                ],
                None,
            )
            .unwrap()
        }),
        (
            id,
            tokens(12).prop_flat_map(|t| {
                let n = t.len();
                (
                    Just(t),
                    prop::collection::vec(prop::sample::select(TAGS), n),
                )
            })
        )
            .prop_map(|(id, (t, tags))| {
                Instance::new(
                    id,
                    TaskKind::TagAndClassify,
                    vec![t
                        .into_iter()
                        .zip(tags)
                        .map(|(w, g)| Token::tagged(w, g))
                        .collect()],
                    Some("intent".into()),
                )
                .unwrap()
            }),
    ]
}
