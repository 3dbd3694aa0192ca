//! Pre-tokenized training corpora in JSONL form.
//!
//! One JSON object per line:
//!
//! ```text
//! {"id": "a1", "task": "classify", "tokens": ["it", "is", "cold"], "label": "weather"}
//! {"id": "p1", "task": "pair_classify", "tokens": [..], "tokens2": [..], "label": "entailment"}
//! {"id": "t1", "task": "tag_and_classify", "tokens": [..], "tags": [..], "label": "play_music"}
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::language::LanguageCode;

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// Surfaces reserved for model-input assembly; never valid corpus tokens.
pub fn is_reserved_surface(s: &str) -> bool {
    s == CLS || s == SEP
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("invalid json: {0}")]
    Json(String),
    #[error("schema violation at {field}: {message}")]
    Schema { field: String, message: String },
    #[error("line {line_no}: {source}")]
    Line {
        line_no: usize,
        #[source]
        source: Box<CorpusError>,
    },
    #[error("duplicate instance id {0:?}")]
    DuplicateId(String),
    #[error("corpus is empty")]
    Empty,
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> CorpusError {
    CorpusError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classify,
    PairClassify,
    TagAndClassify,
}

impl TaskKind {
    pub fn segment_count(self) -> usize {
        match self {
            TaskKind::PairClassify => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Original,
    Replaced {
        target_lang: LanguageCode,
        source_surface: String,
        translation_index: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub tag: Option<String>,
    pub origin: Origin,
}

impl Token {
    pub fn new(surface: impl Into<String>) -> Self {
        Self {
            surface: surface.into(),
            tag: None,
            origin: Origin::Original,
        }
    }

    pub fn tagged(surface: impl Into<String>, tag: impl Into<String>) -> Self {
        Self {
            surface: surface.into(),
            tag: Some(tag.into()),
            origin: Origin::Original,
        }
    }

    pub fn is_replaced(&self) -> bool {
        matches!(self.origin, Origin::Replaced { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    id: String,
    task: TaskKind,
    segments: Vec<Vec<Token>>,
    label: Option<String>,
}

impl Instance {
    pub fn new(
        id: impl Into<String>,
        task: TaskKind,
        segments: Vec<Vec<Token>>,
        label: Option<String>,
    ) -> Result<Self, CorpusError> {
        let instance = Self {
            id: id.into(),
            task,
            segments,
            label,
        };
        instance.validate()?;
        Ok(instance)
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if self.id.is_empty() {
            return Err(schema("id", "must be non-empty"));
        }
        if self.segments.len() != self.task.segment_count() {
            return Err(schema(
                "segments",
                format!(
                    "task {:?} needs {} segment(s), got {}",
                    self.task,
                    self.task.segment_count(),
                    self.segments.len()
                ),
            ));
        }
        for (s, segment) in self.segments.iter().enumerate() {
            let field = if s == 0 { "tokens" } else { "tokens2" };
            for (i, tok) in segment.iter().enumerate() {
                if tok.surface.is_empty() {
                    return Err(schema(format!("{field}[{i}]"), "empty token"));
                }
                if tok.surface.contains(['\n', '\r']) {
                    return Err(schema(format!("{field}[{i}]"), "token contains a newline"));
                }
                if is_reserved_surface(&tok.surface) {
                    return Err(schema(
                        format!("{field}[{i}]"),
                        format!("reserved surface {:?}", tok.surface),
                    ));
                }
            }
            let tagged = segment.iter().filter(|t| t.tag.is_some()).count();
            match self.task {
                TaskKind::TagAndClassify if tagged != segment.len() => {
                    return Err(schema("tags", "every token needs a tag"));
                }
                TaskKind::Classify | TaskKind::PairClassify if tagged != 0 => {
                    return Err(schema("tags", "only tag_and_classify instances carry tags"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn segments(&self) -> &[Vec<Token>] {
        &self.segments
    }

    pub fn token_count(&self) -> usize {
        self.segments.iter().map(Vec::len).sum()
    }

    /// Builds a sibling instance with new segments, same id/task/label.
    /// Caller guarantees the segments satisfy the instance invariants.
    pub(crate) fn with_segments(&self, segments: Vec<Vec<Token>>) -> Self {
        Self {
            id: self.id.clone(),
            task: self.task,
            segments,
            label: self.label.clone(),
        }
    }

    pub(crate) fn to_wire<T>(&self, trace: Option<T>) -> WireRecord<T> {
        let surfaces = |seg: &[Token]| seg.iter().map(|t| t.surface.clone()).collect::<Vec<_>>();
        WireRecord {
            id: self.id.clone(),
            task: self.task,
            tokens: surfaces(&self.segments[0]),
            tokens2: self.segments.get(1).map(|s| surfaces(s)),
            tags: (self.task == TaskKind::TagAndClassify).then(|| {
                self.segments[0]
                    .iter()
                    .map(|t| t.tag.clone().unwrap_or_default())
                    .collect()
            }),
            label: self.label.clone(),
            trace,
        }
    }

    pub(crate) fn from_wire<T>(wire: WireRecord<T>) -> Result<(Self, Option<T>), CorpusError> {
        let WireRecord {
            id,
            task,
            tokens,
            tokens2,
            tags,
            label,
            trace,
        } = wire;
        if task != TaskKind::PairClassify && tokens2.is_some() {
            return Err(schema(
                "tokens2",
                "only pair_classify instances carry tokens2",
            ));
        }
        if task != TaskKind::TagAndClassify && tags.is_some() {
            return Err(schema("tags", "only tag_and_classify instances carry tags"));
        }
        let first = match (task, tags) {
            (TaskKind::TagAndClassify, None) => return Err(schema("tags", "missing field")),
            (TaskKind::TagAndClassify, Some(tags)) => {
                if tags.len() != tokens.len() {
                    return Err(schema(
                        "tags",
                        format!(
                            "length {} does not match tokens length {}",
                            tags.len(),
                            tokens.len()
                        ),
                    ));
                }
                tokens
                    .into_iter()
                    .zip(tags)
                    .map(|(s, t)| Token::tagged(s, t))
                    .collect()
            }
            _ => tokens.into_iter().map(Token::new).collect(),
        };
        let mut segments = vec![first];
        match (task, tokens2) {
            (TaskKind::PairClassify, None) => return Err(schema("tokens2", "missing field")),
            (TaskKind::PairClassify, Some(t2)) => {
                segments.push(t2.into_iter().map(Token::new).collect())
            }
            _ => {}
        }
        let instance = Instance::new(id, task, segments, label)?;
        Ok((instance, trace))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_wire::<()>(None)).expect("instance serializes")
    }
}

/// The JSONL wire shape, optionally carrying a trace object.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct WireRecord<T> {
    pub id: String,
    pub task: TaskKind,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens2: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<T>,
}

/// Parses one corpus line. A `trace` field, if present, is accepted and ignored.
pub fn parse_instance(json_line: &str) -> Result<Instance, CorpusError> {
    let wire: WireRecord<serde::de::IgnoredAny> =
        serde_json::from_str(json_line).map_err(|e| CorpusError::Json(e.to_string()))?;
    Instance::from_wire(wire).map(|(i, _)| i)
}

#[derive(Debug, Clone)]
pub struct Corpus {
    source_lang: LanguageCode,
    instances: Vec<Instance>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(instances: Vec<Instance>, source_lang: LanguageCode) -> Result<Self, CorpusError> {
        if instances.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut by_id = HashMap::with_capacity(instances.len());
        for (i, inst) in instances.iter().enumerate() {
            if by_id.insert(inst.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(inst.id.clone()));
            }
        }
        Ok(Self {
            source_lang,
            instances,
            by_id,
        })
    }

    pub fn source_lang(&self) -> &LanguageCode {
        &self.source_lang
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn ordinal_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Instance> {
        self.ordinal_of(id).map(|i| &self.instances[i])
    }
}

/// Loads a corpus, one instance per non-blank line, preserving file order.
pub fn load_corpus<R: BufRead>(
    reader: R,
    source_lang: LanguageCode,
) -> Result<Corpus, CorpusError> {
    let mut instances = Vec::new();
    let mut seen = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst = parse_instance(&line).map_err(|e| CorpusError::Line {
            line_no,
            source: Box::new(e),
        })?;
        if seen.insert(inst.id.clone(), line_no).is_some() {
            return Err(CorpusError::Line {
                line_no,
                source: Box::new(CorpusError::DuplicateId(inst.id.clone())),
            });
        }
        instances.push(inst);
    }
    Corpus::new(instances, source_lang)
}

pub fn load_corpus_file(
    path: impl AsRef<Path>,
    source_lang: LanguageCode,
) -> Result<Corpus, CorpusError> {
    load_corpus(BufReader::new(File::open(path)?), source_lang)
}
