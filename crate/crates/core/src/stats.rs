//! Replacement statistics and their statistical audit against a configuration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augmenter::{AugmentationConfig, OovPolicy, ReplacementTrace};
use crate::corpus::Instance;
use crate::dictionary::DictionaryPack;
use crate::language::LanguageCode;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("trace does not belong to instance {instance_id:?}: {reason}")]
    Mismatch { instance_id: String, reason: String },
    #[error("check {check} needs at least {n_min} samples, have {n}")]
    InsufficientSamples { check: String, n: u64, n_min: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentationStats {
    pub sentences_seen: u64,
    pub sentences_selected: u64,
    pub tokens_seen: u64,
    /// Tokens inside selected sentences.
    pub tokens_considered: u64,
    pub tokens_selected: u64,
    pub tokens_replaced: u64,
    pub tokens_missed: u64,
    pub per_language_replacements: BTreeMap<LanguageCode, u64>,
    /// Failed lookups per attempted language.
    pub per_language_misses: BTreeMap<LanguageCode, u64>,
    /// Tokens with a dictionary entry in at least one configured language,
    /// when coverage was measured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens_covered: Option<u64>,
    /// `tokens_covered / tokens_seen`; recomputed on every update.
    pub coverage: Option<f64>,
}

impl AugmentationStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulate(
        &mut self,
        original: &Instance,
        trace: &ReplacementTrace,
    ) -> Result<(), StatsError> {
        let mismatch = |reason: String| StatsError::Mismatch {
            instance_id: original.id().to_owned(),
            reason,
        };
        if trace.instance_id != original.id() {
            return Err(mismatch(format!("trace is for {:?}", trace.instance_id)));
        }
        let lens: Vec<usize> = original.segments().iter().map(Vec::len).collect();
        trace.check_shape(&lens).map_err(mismatch)?;

        let tokens = original.token_count() as u64;
        self.sentences_seen += 1;
        self.tokens_seen += tokens;
        if trace.sentence_selected {
            self.sentences_selected += 1;
            self.tokens_considered += tokens;
        }
        let replaced = trace.records.len() as u64;
        let missed = trace.misses.len() as u64;
        self.tokens_selected += replaced + missed;
        self.tokens_replaced += replaced;
        self.tokens_missed += missed;
        for r in &trace.records {
            *self
                .per_language_replacements
                .entry(r.target_lang.clone())
                .or_default() += 1;
        }
        for m in &trace.misses {
            for lang in &m.attempted_langs {
                *self.per_language_misses.entry(lang.clone()).or_default() += 1;
            }
        }
        self.refresh_coverage();
        Ok(())
    }

    /// Counts the original instance's tokens that some configured language covers.
    pub fn add_coverage(
        &mut self,
        original: &Instance,
        pack: &DictionaryPack,
        config: &AugmentationConfig,
    ) {
        let covered = original
            .segments()
            .iter()
            .flatten()
            .filter(|t| pack.covers(&t.surface, &config.languages, config.case_policy))
            .count() as u64;
        *self.tokens_covered.get_or_insert(0) += covered;
        self.refresh_coverage();
    }

    fn refresh_coverage(&mut self) {
        self.coverage = self.tokens_covered.map(|c| {
            if self.tokens_seen == 0 {
                0.0
            } else {
                c as f64 / self.tokens_seen as f64
            }
        });
    }

    /// Associative, commutative reduction of partial statistics.
    pub fn merge(&mut self, other: &AugmentationStats) {
        self.sentences_seen += other.sentences_seen;
        self.sentences_selected += other.sentences_selected;
        self.tokens_seen += other.tokens_seen;
        self.tokens_considered += other.tokens_considered;
        self.tokens_selected += other.tokens_selected;
        self.tokens_replaced += other.tokens_replaced;
        self.tokens_missed += other.tokens_missed;
        for (l, c) in &other.per_language_replacements {
            *self.per_language_replacements.entry(l.clone()).or_default() += c;
        }
        for (l, c) in &other.per_language_misses {
            *self.per_language_misses.entry(l.clone()).or_default() += c;
        }
        self.tokens_covered = match (self.tokens_covered, other.tokens_covered) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(0) + b.unwrap_or(0)),
        };
        self.refresh_coverage();
    }

    /// Counter identities that hold after every accumulation.
    pub fn identities_hold(&self) -> bool {
        self.tokens_replaced + self.tokens_missed == self.tokens_selected
            && self.sentences_selected <= self.sentences_seen
            && self.tokens_considered <= self.tokens_seen
            && self.tokens_selected <= self.tokens_considered
            && self.per_language_replacements.values().sum::<u64>() == self.tokens_replaced
    }

    /// Language draws per language: replacements plus failed attempts.
    pub fn language_attempts(&self) -> BTreeMap<LanguageCode, u64> {
        let mut out = self.per_language_replacements.clone();
        for (l, c) in &self.per_language_misses {
            *out.entry(l.clone()).or_default() += c;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub n: u64,
    pub observed: f64,
    pub expected: f64,
    /// Half-width of the acceptance band, `z * sqrt(p (1 - p) / n)`.
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub z: f64,
    pub checks: Vec<Check>,
    /// Checks that do not apply to this configuration, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Binomial band half-width for proportion `p` over `n` trials.
pub fn binomial_band(p: f64, n: u64, z: f64) -> f64 {
    z * (p * (1.0 - p) / n as f64).sqrt()
}

fn proportion_check(name: String, count: u64, n: u64, p: f64, z: f64) -> Check {
    let observed = count as f64 / n as f64;
    let tolerance = binomial_band(p, n, z);
    Check {
        name,
        n,
        observed,
        expected: p,
        tolerance,
        passed: (observed - p).abs() <= tolerance,
    }
}

fn require(check: &str, n: u64, n_min: u64) -> Result<(), StatsError> {
    if n < n_min || n == 0 {
        Err(StatsError::InsufficientSamples {
            check: check.to_owned(),
            n,
            n_min,
        })
    } else {
        Ok(())
    }
}

/// Tests observed rates against the configured ratios.
///
/// * sentence selection rate vs `alpha` over all sentences,
/// * token selection rate vs `beta` over tokens of selected sentences,
/// * each language's share of language draws vs `1 / |languages|`.
///
/// Language draws are replacements plus misses per language, which are
/// uniform regardless of per-language dictionary coverage. Under
/// `resample_language` the failed attempts behind a successful replacement
/// are not traced, so the language check is skipped there.
pub fn verify(
    stats: &AugmentationStats,
    config: &AugmentationConfig,
    n_min: u64,
    z: f64,
) -> Result<VerifyReport, StatsError> {
    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    let alpha = config.alpha.get();
    let beta = config.beta.get();

    require("sentence_selection", stats.sentences_seen, n_min)?;
    checks.push(proportion_check(
        "sentence_selection".into(),
        stats.sentences_selected,
        stats.sentences_seen,
        alpha,
        z,
    ));

    if alpha == 0.0 {
        skipped.push(("token_selection".into(), "alpha is 0".into()));
    } else {
        require("token_selection", stats.tokens_considered, n_min)?;
        checks.push(proportion_check(
            "token_selection".into(),
            stats.tokens_selected,
            stats.tokens_considered,
            beta,
            z,
        ));
    }

    if alpha == 0.0 || beta == 0.0 {
        skipped.push((
            "language_uniformity".into(),
            "no tokens can be selected".into(),
        ));
    } else if config.oov_policy != OovPolicy::Keep {
        skipped.push((
            "language_uniformity".into(),
            "failed attempts are not traced under resample_language".into(),
        ));
    } else {
        let attempts = stats.language_attempts();
        let total: u64 = attempts.values().sum();
        require("language_uniformity", total, n_min)?;
        let p = 1.0 / config.languages.len() as f64;
        for lang in &config.languages {
            let count = attempts.get(lang).copied().unwrap_or(0);
            checks.push(proportion_check(
                format!("language_share[{lang}]"),
                count,
                total,
                p,
                z,
            ));
        }
        for (lang, &count) in &attempts {
            if !config.languages.contains(lang) {
                checks.push(proportion_check(
                    format!("language_share[{lang}]"),
                    count,
                    total,
                    0.0,
                    z,
                ));
            }
        }
    }

    Ok(VerifyReport { z, checks, skipped })
}
