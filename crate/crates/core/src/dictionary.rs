//! MUSE-format bilingual dictionaries.
//!
//! A MUSE file holds one `source translation` pair per line, split at the
//! first whitespace run. A source word repeated on several lines has several
//! translations; they are kept in file order.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::is_reserved_surface;
use crate::language::LanguageCode;

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed dictionary line {line_no}: {line:?}")]
    Malformed { line_no: usize, line: String },
    #[error("dictionary {source_lang}->{target_lang} has no entries")]
    Empty {
        source_lang: LanguageCode,
        target_lang: LanguageCode,
    },
    #[error("source and target language are both {0}")]
    SameLanguage(LanguageCode),
    #[error("dictionary pack needs at least one dictionary")]
    EmptyPack,
    #[error("mixed source languages in pack: {expected} and {found}")]
    MixedSource {
        expected: LanguageCode,
        found: LanguageCode,
    },
    #[error("duplicate target language {0} in pack")]
    DuplicateTarget(LanguageCode),
    #[error("language {0} is not a target of this dictionary pack")]
    UnknownLanguage(LanguageCode),
}

/// Classification of a single dictionary line. Every line is exactly one of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuseLine<'a> {
    Pair {
        source: &'a str,
        translation: &'a str,
    },
    /// Empty, whitespace-only, or a `#` comment.
    Blank,
    Malformed,
}

/// Splits a line at its first whitespace run. The translation keeps any
/// internal whitespace verbatim; trailing whitespace (including `\r`) is dropped.
pub fn parse_muse_line(line: &str) -> MuseLine<'_> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return MuseLine::Blank;
    }
    let Some(split) = line.find(char::is_whitespace) else {
        return MuseLine::Malformed;
    };
    let source = &line[..split];
    let translation = line[split..].trim_start();
    if translation.is_empty() || is_reserved_surface(source) || is_reserved_surface(translation) {
        return MuseLine::Malformed;
    }
    MuseLine::Pair {
        source,
        translation,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MalformedPolicy {
    #[default]
    Skip,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CasePolicy {
    Exact,
    /// Exact key first, then the lowercased word against lowercased keys.
    #[default]
    LowercaseFallback,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationEntry {
    pub source_word: String,
    /// Non-empty, duplicate-free, in file order.
    pub translations: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct BilingualDictionary {
    source_lang: LanguageCode,
    target_lang: LanguageCode,
    entries: IndexMap<String, TranslationEntry>,
    /// Lowercased key -> index of the first entry (file order) folding to it.
    folded: HashMap<String, usize>,
    line_count: usize,
    skipped_line_count: usize,
}

impl BilingualDictionary {
    pub fn source_lang(&self) -> &LanguageCode {
        &self.source_lang
    }

    pub fn target_lang(&self) -> &LanguageCode {
        &self.target_lang
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn line_count(&self) -> usize {
        self.line_count
    }

    pub fn skipped_line_count(&self) -> usize {
        self.skipped_line_count
    }

    pub fn entries(&self) -> impl Iterator<Item = &TranslationEntry> {
        self.entries.values()
    }

    pub fn multi_translation_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| e.translations.len() > 1)
            .count()
    }

    pub fn lookup(&self, word: &str, case: CasePolicy) -> Option<&[String]> {
        if let Some(entry) = self.entries.get(word) {
            return Some(&entry.translations);
        }
        match case {
            CasePolicy::Exact => None,
            CasePolicy::LowercaseFallback => {
                let idx = *self.folded.get(&word.to_lowercase())?;
                Some(&self.entries[idx].translations)
            }
        }
    }

    /// MUSE lines reproducing this dictionary's entries in order.
    pub fn to_muse_lines(&self) -> impl Iterator<Item = String> + '_ {
        self.entries.values().flat_map(|e| {
            e.translations
                .iter()
                .map(move |t| format!("{} {}", e.source_word, t))
        })
    }

    pub fn write_muse<W: Write>(&self, mut out: W) -> io::Result<()> {
        for line in self.to_muse_lines() {
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

struct DictionaryBuilder {
    entries: IndexMap<String, TranslationEntry>,
    line_count: usize,
    skipped: usize,
    policy: MalformedPolicy,
}

impl DictionaryBuilder {
    fn push(&mut self, line: &str) -> Result<(), DictionaryError> {
        self.line_count += 1;
        match parse_muse_line(line) {
            MuseLine::Blank => {}
            MuseLine::Malformed => match self.policy {
                MalformedPolicy::Skip => self.skipped += 1,
                MalformedPolicy::Abort => {
                    return Err(DictionaryError::Malformed {
                        line_no: self.line_count,
                        line: line.to_owned(),
                    })
                }
            },
            MuseLine::Pair {
                source,
                translation,
            } => {
                let entry =
                    self.entries
                        .entry(source.to_owned())
                        .or_insert_with(|| TranslationEntry {
                            source_word: source.to_owned(),
                            translations: Vec::new(),
                        });
                if !entry.translations.iter().any(|t| t == translation) {
                    entry.translations.push(translation.to_owned());
                }
            }
        }
        Ok(())
    }

    fn finish(
        self,
        source_lang: LanguageCode,
        target_lang: LanguageCode,
    ) -> Result<BilingualDictionary, DictionaryError> {
        if self.entries.is_empty() {
            return Err(DictionaryError::Empty {
                source_lang,
                target_lang,
            });
        }
        let mut folded = HashMap::with_capacity(self.entries.len());
        for (idx, key) in self.entries.keys().enumerate() {
            folded.entry(key.to_lowercase()).or_insert(idx);
        }
        Ok(BilingualDictionary {
            source_lang,
            target_lang,
            entries: self.entries,
            folded,
            line_count: self.line_count,
            skipped_line_count: self.skipped,
        })
    }
}

fn check_languages(source: &LanguageCode, target: &LanguageCode) -> Result<(), DictionaryError> {
    if source == target {
        Err(DictionaryError::SameLanguage(source.clone()))
    } else {
        Ok(())
    }
}

/// Loads a dictionary from any line source.
pub fn load_dictionary_lines<I, S>(
    lines: I,
    source_lang: LanguageCode,
    target_lang: LanguageCode,
    on_malformed: MalformedPolicy,
) -> Result<BilingualDictionary, DictionaryError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    check_languages(&source_lang, &target_lang)?;
    let mut builder = DictionaryBuilder {
        entries: IndexMap::new(),
        line_count: 0,
        skipped: 0,
        policy: on_malformed,
    };
    for line in lines {
        builder.push(line.as_ref())?;
    }
    builder.finish(source_lang, target_lang)
}

pub fn load_dictionary<R: BufRead>(
    reader: R,
    source_lang: LanguageCode,
    target_lang: LanguageCode,
    on_malformed: MalformedPolicy,
) -> Result<BilingualDictionary, DictionaryError> {
    check_languages(&source_lang, &target_lang)?;
    let mut builder = DictionaryBuilder {
        entries: IndexMap::new(),
        line_count: 0,
        skipped: 0,
        policy: on_malformed,
    };
    for line in reader.lines() {
        builder.push(&line?)?;
    }
    builder.finish(source_lang, target_lang)
}

pub fn load_dictionary_file(
    path: impl AsRef<Path>,
    source_lang: LanguageCode,
    target_lang: LanguageCode,
    on_malformed: MalformedPolicy,
) -> Result<BilingualDictionary, DictionaryError> {
    let file = File::open(path)?;
    load_dictionary(BufReader::new(file), source_lang, target_lang, on_malformed)
}

/// One source language's dictionaries, keyed by target language.
#[derive(Debug, Clone)]
pub struct DictionaryPack {
    source_lang: LanguageCode,
    dictionaries: BTreeMap<LanguageCode, BilingualDictionary>,
}

impl DictionaryPack {
    pub fn build(dictionaries: Vec<BilingualDictionary>) -> Result<Self, DictionaryError> {
        let mut iter = dictionaries.into_iter();
        let first = iter.next().ok_or(DictionaryError::EmptyPack)?;
        let source_lang = first.source_lang.clone();
        let mut map = BTreeMap::new();
        map.insert(first.target_lang.clone(), first);
        for dict in iter {
            if dict.source_lang != source_lang {
                return Err(DictionaryError::MixedSource {
                    expected: source_lang,
                    found: dict.source_lang,
                });
            }
            if map.contains_key(&dict.target_lang) {
                return Err(DictionaryError::DuplicateTarget(dict.target_lang));
            }
            map.insert(dict.target_lang.clone(), dict);
        }
        Ok(Self {
            source_lang,
            dictionaries: map,
        })
    }

    pub fn source_lang(&self) -> &LanguageCode {
        &self.source_lang
    }

    /// Target languages in sorted order.
    pub fn targets(&self) -> impl Iterator<Item = &LanguageCode> {
        self.dictionaries.keys()
    }

    pub fn contains(&self, lang: &LanguageCode) -> bool {
        self.dictionaries.contains_key(lang)
    }

    pub fn dictionary(&self, lang: &LanguageCode) -> Result<&BilingualDictionary, DictionaryError> {
        self.dictionaries
            .get(lang)
            .ok_or_else(|| DictionaryError::UnknownLanguage(lang.clone()))
    }

    pub fn dictionaries(&self) -> impl Iterator<Item = &BilingualDictionary> {
        self.dictionaries.values()
    }

    /// `Ok(None)` is a word miss; an unknown language is an error.
    pub fn lookup(
        &self,
        word: &str,
        lang: &LanguageCode,
        case: CasePolicy,
    ) -> Result<Option<&[String]>, DictionaryError> {
        Ok(self.dictionary(lang)?.lookup(word, case))
    }

    /// Whether `word` has an entry in at least one of `langs`.
    pub fn covers(&self, word: &str, langs: &[LanguageCode], case: CasePolicy) -> bool {
        langs.iter().any(|l| {
            self.dictionaries
                .get(l)
                .is_some_and(|d| d.lookup(word, case).is_some())
        })
    }
}
