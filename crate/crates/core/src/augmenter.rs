//! Multi-lingual code-switching augmentation.
//!
//! For each instance a sentence-selection draw decides (with probability
//! `alpha`) whether the instance is code-switched at all. Inside a selected
//! instance every token of every segment is considered independently: with
//! probability `beta` it is selected, a target language is drawn uniformly
//! from the configured languages, and, if that language's dictionary has the
//! word, one of its translations is drawn uniformly and substituted.
//!
//! Draw order is part of the contract. Per instance: one sentence draw. If
//! selected, segments in index order, tokens in index order, and for each
//! token: the selection draw, then (if selected) a language draw, then (on a
//! dictionary hit) a translation draw. Under `resample_language` each further
//! attempt after a miss costs one more language draw. Nothing else consumes
//! randomness.

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, Instance, Origin, Token, WireRecord};
use crate::dictionary::{BilingualDictionary, CasePolicy, DictionaryPack};
use crate::language::LanguageCode;
use crate::rng::Xoshiro256StarStar;
use crate::subword::SubwordEncoding;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("ratio {0} is outside [0, 1]")]
    RatioOutOfRange(f64),
    #[error("language list is empty")]
    NoLanguages,
    #[error("language {0} listed more than once")]
    DuplicateLanguage(LanguageCode),
    #[error("language {0} has no dictionary in the pack")]
    LanguageNotInPack(LanguageCode),
    #[error("cannot choose from an empty list")]
    EmptyChoice,
    #[error("trace does not match instance {instance_id:?}: {reason}")]
    TraceMismatch { instance_id: String, reason: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Ratio(f64);

impl Ratio {
    pub const ZERO: Ratio = Ratio(0.0);
    pub const ONE: Ratio = Ratio(1.0);

    pub fn new(value: f64) -> Result<Self, AugmentError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(AugmentError::RatioOutOfRange(value))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Ratio {
    type Error = AugmentError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Ratio::new(value)
    }
}

impl From<Ratio> for f64 {
    fn from(r: Ratio) -> f64 {
        r.0
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Fresh augmentation for every (epoch, batch) appearance.
    #[default]
    Dynamic,
    /// One augmentation per instance, reused every epoch.
    Static,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dynamic" => Ok(Mode::Dynamic),
            "static" => Ok(Mode::Static),
            other => Err(format!("unknown mode {other:?} (expected dynamic|static)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicy {
    /// Leave the token unchanged and record a miss.
    #[default]
    Keep,
    /// Retry with languages not yet tried, up to `max_attempts` total attempts.
    ResampleLanguage { max_attempts: NonZeroUsize },
}

impl FromStr for OovPolicy {
    type Err = String;

    /// Accepts `keep` or `resample:<k>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "keep" {
            return Ok(OovPolicy::Keep);
        }
        let k = s
            .strip_prefix("resample:")
            .ok_or_else(|| format!("unknown oov policy {s:?} (expected keep|resample:<k>)"))?;
        let max_attempts = k
            .parse::<NonZeroUsize>()
            .map_err(|_| format!("resample attempts must be a positive integer, got {k:?}"))?;
        Ok(OovPolicy::ResampleLanguage { max_attempts })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiwordPolicy {
    /// A multi-word translation stays one token.
    #[default]
    SingleToken,
    /// A multi-word translation becomes one token per word; tags continue BIO-style.
    Split,
}

impl FromStr for MultiwordPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" | "single_token" => Ok(MultiwordPolicy::SingleToken),
            "split" => Ok(MultiwordPolicy::Split),
            other => Err(format!(
                "unknown multiword policy {other:?} (expected single|split)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    pub alpha: Ratio,
    pub beta: Ratio,
    pub languages: Vec<LanguageCode>,
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub oov_policy: OovPolicy,
    #[serde(default)]
    pub multiword_policy: MultiwordPolicy,
    #[serde(default)]
    pub case_policy: CasePolicy,
    #[serde(default = "default_shuffle")]
    pub shuffle: bool,
}

fn default_shuffle() -> bool {
    true
}

impl AugmentationConfig {
    /// Defaults: alpha 1.0, beta 0.9, dynamic, keep, single token,
    /// lowercase fallback, shuffled epochs.
    pub fn new(languages: Vec<LanguageCode>, seed: u64) -> Self {
        Self {
            alpha: Ratio::ONE,
            beta: Ratio(0.9),
            languages,
            seed,
            mode: Mode::Dynamic,
            oov_policy: OovPolicy::Keep,
            multiword_policy: MultiwordPolicy::SingleToken,
            case_policy: CasePolicy::LowercaseFallback,
            shuffle: true,
        }
    }

    /// Checks the language list against a pack: non-empty, no duplicates,
    /// every entry a pack target.
    pub fn validate(&self, pack: &DictionaryPack) -> Result<(), AugmentError> {
        if self.languages.is_empty() {
            return Err(AugmentError::NoLanguages);
        }
        for (i, lang) in self.languages.iter().enumerate() {
            if self.languages[..i].contains(lang) {
                return Err(AugmentError::DuplicateLanguage(lang.clone()));
            }
            if !pack.contains(lang) {
                return Err(AugmentError::LanguageNotInPack(lang.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementRecord {
    #[serde(rename = "seg")]
    pub segment_index: usize,
    /// Position in the original segment.
    #[serde(rename = "idx")]
    pub token_index: usize,
    #[serde(rename = "src")]
    pub source_surface: String,
    #[serde(rename = "lang")]
    pub target_lang: LanguageCode,
    #[serde(rename = "tr")]
    pub translation: String,
    #[serde(rename = "ti")]
    pub translation_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Miss {
    #[serde(rename = "seg")]
    pub segment_index: usize,
    #[serde(rename = "idx")]
    pub token_index: usize,
    #[serde(rename = "langs")]
    pub attempted_langs: Vec<LanguageCode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementTrace {
    /// Carried by the enclosing record on the wire.
    #[serde(skip)]
    pub instance_id: String,
    #[serde(rename = "selected")]
    pub sentence_selected: bool,
    pub records: Vec<ReplacementRecord>,
    pub misses: Vec<Miss>,
}

impl ReplacementTrace {
    pub fn unselected(instance_id: &str) -> Self {
        Self {
            instance_id: instance_id.to_owned(),
            sentence_selected: false,
            records: Vec::new(),
            misses: Vec::new(),
        }
    }

    /// Verifies the structural invariants against the original segment lengths:
    /// an unselected trace is empty, positions are in range and strictly
    /// increasing per segment, and no position is both replaced and missed.
    pub fn check_shape(&self, segment_lens: &[usize]) -> Result<(), String> {
        if !self.sentence_selected && !(self.records.is_empty() && self.misses.is_empty()) {
            return Err("unselected sentence carries replacements or misses".into());
        }
        for (s, &len) in segment_lens.iter().enumerate() {
            let mut last = None;
            for r in self.records.iter().filter(|r| r.segment_index == s) {
                if r.token_index >= len {
                    return Err(format!(
                        "record index {} out of range in segment {s}",
                        r.token_index
                    ));
                }
                if last.is_some_and(|l| r.token_index <= l) {
                    return Err(format!(
                        "record positions not strictly increasing in segment {s}"
                    ));
                }
                last = Some(r.token_index);
            }
            let mut last = None;
            for m in self.misses.iter().filter(|m| m.segment_index == s) {
                if m.token_index >= len {
                    return Err(format!(
                        "miss index {} out of range in segment {s}",
                        m.token_index
                    ));
                }
                if last.is_some_and(|l| m.token_index <= l) {
                    return Err(format!(
                        "miss positions not strictly increasing in segment {s}"
                    ));
                }
                if m.attempted_langs.is_empty() {
                    return Err("miss without attempted languages".into());
                }
                if self
                    .records
                    .iter()
                    .any(|r| r.segment_index == s && r.token_index == m.token_index)
                {
                    return Err(format!(
                        "position {} both replaced and missed",
                        m.token_index
                    ));
                }
                last = Some(m.token_index);
            }
        }
        let segs = segment_lens.len();
        if self.records.iter().any(|r| r.segment_index >= segs)
            || self.misses.iter().any(|m| m.segment_index >= segs)
        {
            return Err("segment index out of range".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedInstance {
    pub instance: Instance,
    pub trace: ReplacementTrace,
}

impl AugmentedInstance {
    /// Wire view: the corpus schema plus `trace`, and `encoding` when given.
    pub fn output_record<'a>(&'a self, encoding: Option<&'a SubwordEncoding>) -> OutputRecord<'a> {
        OutputRecord {
            record: self.instance.to_wire(Some(&self.trace)),
            encoding,
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.output_record(None)).expect("record serializes")
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.output_record(None)).expect("record serializes")
    }
}

#[derive(Debug, Serialize)]
pub struct OutputRecord<'a> {
    #[serde(flatten)]
    record: WireRecord<&'a ReplacementTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    encoding: Option<&'a SubwordEncoding>,
}

/// Parses an augmented JSONL line into the (post-replacement) instance and its trace.
pub fn parse_augmented_line(line: &str) -> Result<(Instance, ReplacementTrace), CorpusError> {
    let wire: WireRecord<ReplacementTrace> =
        serde_json::from_str(line).map_err(|e| CorpusError::Json(e.to_string()))?;
    let (instance, trace) = Instance::from_wire(wire)?;
    let mut trace = trace.ok_or_else(|| CorpusError::Schema {
        field: "trace".into(),
        message: "missing field".into(),
    })?;
    trace.instance_id = instance.id().to_owned();
    Ok((instance, trace))
}

#[inline]
pub fn select_sentence(rng: &mut Xoshiro256StarStar, alpha: Ratio) -> bool {
    rng.next_f64() < alpha.get()
}

#[inline]
pub fn select_token(rng: &mut Xoshiro256StarStar, beta: Ratio) -> bool {
    rng.next_f64() < beta.get()
}

pub fn choose_language<'a>(
    rng: &mut Xoshiro256StarStar,
    languages: &'a [LanguageCode],
) -> Result<&'a LanguageCode, AugmentError> {
    if languages.is_empty() {
        return Err(AugmentError::EmptyChoice);
    }
    Ok(&languages[rng.below(languages.len())])
}

pub fn choose_translation<'a>(
    rng: &mut Xoshiro256StarStar,
    translations: &'a [String],
) -> Result<(&'a str, usize), AugmentError> {
    if translations.is_empty() {
        return Err(AugmentError::EmptyChoice);
    }
    let i = rng.below(translations.len());
    Ok((&translations[i], i))
}

/// BIO continuation: `B-X` becomes `I-X`; anything else repeats unchanged.
pub fn continuation_tag(tag: &str) -> String {
    match tag.strip_prefix("B-") {
        Some(rest) => format!("I-{rest}"),
        None => tag.to_owned(),
    }
}

/// Tokens emitted for one replacement under the given multiword policy.
fn replacement_tokens(
    original: &Token,
    record: &ReplacementRecord,
    policy: MultiwordPolicy,
    out: &mut Vec<Token>,
) {
    let origin = Origin::Replaced {
        target_lang: record.target_lang.clone(),
        source_surface: record.source_surface.clone(),
        translation_index: record.translation_index,
    };
    match policy {
        MultiwordPolicy::SingleToken => out.push(Token {
            surface: record.translation.clone(),
            tag: original.tag.clone(),
            origin,
        }),
        MultiwordPolicy::Split => {
            for (k, word) in record.translation.split_whitespace().enumerate() {
                let tag = match (&original.tag, k) {
                    (Some(t), 0) => Some(t.clone()),
                    (Some(t), _) => Some(continuation_tag(t)),
                    (None, _) => None,
                };
                out.push(Token {
                    surface: word.to_owned(),
                    tag,
                    origin: origin.clone(),
                });
            }
        }
    }
}

fn translation_width(translation: &str, policy: MultiwordPolicy) -> usize {
    match policy {
        MultiwordPolicy::SingleToken => 1,
        MultiwordPolicy::Split => translation.split_whitespace().count(),
    }
}

/// A validated (pack, config) pair ready to augment instances.
#[derive(Debug, Clone)]
pub struct Augmenter<'a> {
    config: &'a AugmentationConfig,
    /// Dictionaries aligned with `config.languages`.
    dictionaries: Vec<&'a BilingualDictionary>,
}

impl<'a> Augmenter<'a> {
    pub fn new(
        pack: &'a DictionaryPack,
        config: &'a AugmentationConfig,
    ) -> Result<Self, AugmentError> {
        config.validate(pack)?;
        let dictionaries = config
            .languages
            .iter()
            .map(|l| pack.dictionary(l).expect("validated"))
            .collect();
        Ok(Self {
            config,
            dictionaries,
        })
    }

    pub fn config(&self) -> &AugmentationConfig {
        self.config
    }

    pub fn augment(&self, instance: &Instance, rng: &mut Xoshiro256StarStar) -> AugmentedInstance {
        let cfg = self.config;
        if !select_sentence(rng, cfg.alpha) {
            return AugmentedInstance {
                instance: instance.clone(),
                trace: ReplacementTrace::unselected(instance.id()),
            };
        }

        let mut trace = ReplacementTrace {
            instance_id: instance.id().to_owned(),
            sentence_selected: true,
            records: Vec::new(),
            misses: Vec::new(),
        };
        let n_langs = cfg.languages.len();
        let mut tried: Vec<usize> = Vec::with_capacity(n_langs);
        let mut remaining: Vec<usize> = Vec::with_capacity(n_langs);

        let segments = instance
            .segments()
            .iter()
            .enumerate()
            .map(|(s, segment)| {
                let mut out = Vec::with_capacity(segment.len());
                for (i, token) in segment.iter().enumerate() {
                    if !select_token(rng, cfg.beta) {
                        out.push(token.clone());
                        continue;
                    }
                    tried.clear();
                    let mut lang_idx = rng.below(n_langs);
                    loop {
                        tried.push(lang_idx);
                        let hit =
                            self.dictionaries[lang_idx].lookup(&token.surface, cfg.case_policy);
                        if let Some(translations) = hit {
                            let ti = rng.below(translations.len());
                            let record = ReplacementRecord {
                                segment_index: s,
                                token_index: i,
                                source_surface: token.surface.clone(),
                                target_lang: cfg.languages[lang_idx].clone(),
                                translation: translations[ti].clone(),
                                translation_index: ti,
                            };
                            replacement_tokens(token, &record, cfg.multiword_policy, &mut out);
                            trace.records.push(record);
                            break;
                        }
                        let retry = match cfg.oov_policy {
                            OovPolicy::Keep => false,
                            OovPolicy::ResampleLanguage { max_attempts } => {
                                tried.len() < max_attempts.get() && tried.len() < n_langs
                            }
                        };
                        if !retry {
                            trace.misses.push(Miss {
                                segment_index: s,
                                token_index: i,
                                attempted_langs: tried
                                    .iter()
                                    .map(|&l| cfg.languages[l].clone())
                                    .collect(),
                            });
                            out.push(token.clone());
                            break;
                        }
                        remaining.clear();
                        remaining.extend((0..n_langs).filter(|l| !tried.contains(l)));
                        lang_idx = remaining[rng.below(remaining.len())];
                    }
                }
                out
            })
            .collect();

        AugmentedInstance {
            instance: instance.with_segments(segments),
            trace,
        }
    }
}

/// Runs the augmentation for one instance. Validates `config` against `pack`
/// on every call; hold an [`Augmenter`] to augment many instances.
pub fn augment_instance(
    instance: &Instance,
    pack: &DictionaryPack,
    config: &AugmentationConfig,
    rng: &mut Xoshiro256StarStar,
) -> Result<AugmentedInstance, AugmentError> {
    Ok(Augmenter::new(pack, config)?.augment(instance, rng))
}

fn mismatch(instance: &Instance, reason: impl Into<String>) -> AugmentError {
    AugmentError::TraceMismatch {
        instance_id: instance.id().to_owned(),
        reason: reason.into(),
    }
}

/// Replays a trace against its original instance without any randomness.
/// Every record is checked against the pack: the source surface must match
/// the original token and the translation must sit at the recorded index.
pub fn apply_trace(
    original: &Instance,
    trace: &ReplacementTrace,
    pack: &DictionaryPack,
    config: &AugmentationConfig,
) -> Result<Instance, AugmentError> {
    if trace.instance_id != original.id() {
        return Err(mismatch(
            original,
            format!("trace belongs to {:?}", trace.instance_id),
        ));
    }
    let lens: Vec<usize> = original.segments().iter().map(Vec::len).collect();
    trace
        .check_shape(&lens)
        .map_err(|r| mismatch(original, r))?;

    let mut segments = Vec::with_capacity(lens.len());
    for (s, segment) in original.segments().iter().enumerate() {
        let mut records = trace
            .records
            .iter()
            .filter(|r| r.segment_index == s)
            .peekable();
        let mut out = Vec::with_capacity(segment.len());
        for (i, token) in segment.iter().enumerate() {
            let Some(record) = records.next_if(|r| r.token_index == i) else {
                out.push(token.clone());
                continue;
            };
            if record.source_surface != token.surface {
                return Err(mismatch(
                    original,
                    format!(
                        "stale source surface {:?} at ({s}, {i}), token is {:?}",
                        record.source_surface, token.surface
                    ),
                ));
            }
            let translations = pack
                .lookup(&token.surface, &record.target_lang, config.case_policy)
                .map_err(|e| mismatch(original, e.to_string()))?
                .ok_or_else(|| {
                    mismatch(
                        original,
                        format!(
                            "{:?} has no {} translation",
                            token.surface, record.target_lang
                        ),
                    )
                })?;
            if translations.get(record.translation_index) != Some(&record.translation) {
                return Err(mismatch(
                    original,
                    format!(
                        "translation {:?} is not entry {} for {:?}",
                        record.translation, record.translation_index, token.surface
                    ),
                ));
            }
            replacement_tokens(token, record, config.multiword_policy, &mut out);
        }
        segments.push(out);
    }
    Ok(original.with_segments(segments))
}

/// Reconstructs the original instance from an augmented one and its trace.
/// Used when only augmented output is at hand (e.g. auditing a JSONL run).
pub fn restore_original(
    augmented: &Instance,
    trace: &ReplacementTrace,
    policy: MultiwordPolicy,
) -> Result<Instance, AugmentError> {
    let mut segments = Vec::with_capacity(augmented.segments().len());
    let mut original_lens = Vec::with_capacity(augmented.segments().len());
    for (s, segment) in augmented.segments().iter().enumerate() {
        let mut out = Vec::with_capacity(segment.len());
        let mut pos = 0;
        for record in trace.records.iter().filter(|r| r.segment_index == s) {
            while out.len() < record.token_index {
                let token = segment.get(pos).ok_or_else(|| {
                    mismatch(
                        augmented,
                        format!("record ({s}, {}) past segment end", record.token_index),
                    )
                })?;
                out.push(Token {
                    origin: Origin::Original,
                    ..token.clone()
                });
                pos += 1;
            }
            if out.len() != record.token_index {
                return Err(mismatch(
                    augmented,
                    format!("records out of order in segment {s}"),
                ));
            }
            let width = translation_width(&record.translation, policy);
            let emitted = segment.get(pos..pos + width).ok_or_else(|| {
                mismatch(
                    augmented,
                    format!("replacement at ({s}, {}) truncated", record.token_index),
                )
            })?;
            let matches = match policy {
                MultiwordPolicy::SingleToken => emitted[0].surface == record.translation,
                MultiwordPolicy::Split => emitted
                    .iter()
                    .map(|t| t.surface.as_str())
                    .eq(record.translation.split_whitespace()),
            };
            if width == 0 || !matches {
                return Err(mismatch(
                    augmented,
                    format!(
                        "token at ({s}, {}) is not {:?}",
                        record.token_index, record.translation
                    ),
                ));
            }
            out.push(Token {
                surface: record.source_surface.clone(),
                tag: emitted[0].tag.clone(),
                origin: Origin::Original,
            });
            pos += width;
        }
        out.extend(segment[pos.min(segment.len())..].iter().map(|t| Token {
            origin: Origin::Original,
            ..t.clone()
        }));
        original_lens.push(out.len());
        segments.push(out);
    }
    trace
        .check_shape(&original_lens)
        .map_err(|r| mismatch(augmented, r))?;
    Ok(Instance::new(
        augmented.id(),
        augmented.task(),
        segments,
        augmented.label().map(str::to_owned),
    )?)
}
