//! Deterministic multi-lingual code-switching data augmentation.
//!
//! Source-language training instances are rewritten by replacing words with
//! bilingual-dictionary translations into randomly chosen target languages.
//! Every decision is drawn from a seeded generator whose state is derived
//! from stream coordinates, so any batch of any epoch can be regenerated
//! exactly, in any order, on any number of threads.
//!
//! Modules, bottom up:
//!
//! * [`dictionary`]: MUSE dictionary parsing and per-language packs.
//! * [`corpus`]: JSONL instances (single sentence, sentence pair, tagged).
//! * [`rng`]: xoshiro256** and seed derivation.
//! * [`augmenter`]: sentence, token and replacement selection with traces.
//! * [`stream`]: epoch plans and batch generation, dynamic or static.
//! * [`subword`]: WordPiece segmentation and `[CLS] .. [SEP]` assembly.
//! * [`stats`]: counters and their statistical audit.

pub mod augmenter;
pub mod corpus;
pub mod dictionary;
pub mod language;
pub mod rng;
pub mod stats;
pub mod stream;
pub mod subword;

pub use augmenter::{
    apply_trace, augment_instance, AugmentationConfig, AugmentedInstance, Augmenter, Mode,
    MultiwordPolicy, OovPolicy, OutputRecord, Ratio, ReplacementRecord, ReplacementTrace,
};
pub use corpus::{Corpus, Instance, TaskKind, Token};
pub use dictionary::{BilingualDictionary, CasePolicy, DictionaryPack};
pub use language::LanguageCode;
pub use stats::AugmentationStats;
pub use stream::{Engine, StreamError};
pub use subword::{encode_instance, SubwordEncoding, WordPieceVocab};

/// Library version; bindings report the same string.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
