//! `csf`: code-switching augmentation from the command line.
//!
//! Exit codes: 0 success, 2 configuration error (bad flags, unreadable
//! paths), 3 data error (malformed corpus, dictionary, vocab or trace),
//! 4 a verify check failed, 5 too few samples to verify.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use csf_core::augmenter::{parse_augmented_line, restore_original};
use csf_core::corpus::{load_corpus, parse_instance};
use csf_core::dictionary::{load_dictionary, MalformedPolicy};
use csf_core::stats::{verify, StatsError};
use csf_core::subword::DEFAULT_MAX_LEN;
use csf_core::{
    encode_instance, AugmentationConfig, AugmentationStats, CasePolicy, Corpus, DictionaryPack,
    Engine, Instance, LanguageCode, Mode, MultiwordPolicy, OovPolicy, Ratio, SubwordEncoding,
    WordPieceVocab,
};
use csf_service::Resources;
use serde_json::json;

#[derive(Debug)]
enum CliError {
    Config(String),
    Data(String),
    CheckFailed(String),
    Insufficient(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::CheckFailed(_) => 4,
            CliError::Insufficient(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m)
            | CliError::Data(m)
            | CliError::CheckFailed(m)
            | CliError::Insufficient(m) => m,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "csf",
    version,
    about = "Multi-lingual code-switching data augmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write augmented JSONL for one or more epochs plus a stats sidecar.
    Augment(AugmentArgs),
    /// Summarize dictionaries, optionally with coverage of a corpus.
    DictInspect(InspectArgs),
    /// Encode (augmented) JSONL into WordPiece model inputs.
    Encode(EncodeArgs),
    /// Audit an augmented JSONL run against the configured ratios.
    Verify(VerifyArgs),
    /// Serve batches over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
struct DictArgs {
    /// Bilingual dictionary as <lang>=<path>; repeat per target language.
    #[arg(long = "dict", value_name = "LANG=PATH", value_parser = parse_dict_spec)]
    dicts: Vec<(LanguageCode, PathBuf)>,
    #[arg(long, default_value = "en")]
    source_lang: LanguageCode,
    /// exact | lowercase_fallback
    #[arg(long, default_value = "lowercase_fallback", value_parser = parse_case_policy)]
    case_policy: CasePolicy,
}

#[derive(Debug, Clone, Args)]
struct ConfigArgs {
    /// Comma-separated target languages; defaults to the --dict languages in order.
    #[arg(long, value_delimiter = ',')]
    languages: Vec<LanguageCode>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[arg(long, env = "CSF_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "dynamic")]
    mode: Mode,
    /// keep | resample:<k>
    #[arg(long, default_value = "keep")]
    oov: OovPolicy,
    /// single | split
    #[arg(long, default_value = "single")]
    multiword: MultiwordPolicy,
    #[arg(long)]
    no_shuffle: bool,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    dict: DictArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1)]
    epochs: u64,
    /// Attach WordPiece encodings to every record.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    max_len: usize,
    /// Output JSONL; with several epochs `x.jsonl` becomes `x.epoch<e>.jsonl`.
    /// Stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stats JSON; defaults to `<out>.stats.json` when --out is given.
    #[arg(long)]
    stats_out: Option<PathBuf>,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[command(flatten)]
    dict: DictArgs,
    /// Corpus for distinct-token coverage.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    samples: usize,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    /// Corpus or augmented JSONL.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    max_len: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Augmented JSONL written by `augment`.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 1000)]
    n_min: u64,
    #[arg(long, default_value_t = 3.0)]
    z: f64,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    dict: DictArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    max_len: usize,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_dict_spec(s: &str) -> std::result::Result<(LanguageCode, PathBuf), String> {
    let (lang, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected <lang>=<path>, got {s:?}"))?;
    let lang = lang.parse::<LanguageCode>().map_err(|e| e.to_string())?;
    Ok((lang, PathBuf::from(path)))
}

fn parse_case_policy(s: &str) -> std::result::Result<CasePolicy, String> {
    match s {
        "exact" => Ok(CasePolicy::Exact),
        "lowercase_fallback" => Ok(CasePolicy::LowercaseFallback),
        other => Err(format!(
            "unknown case policy {other:?} (expected exact|lowercase_fallback)"
        )),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_err(e: io::Error) -> CliError {
    CliError::Config(format!("write failed: {e}"))
}

impl DictArgs {
    fn load_pack(&self) -> Result<DictionaryPack> {
        if self.dicts.is_empty() {
            return Err(CliError::Config(
                "at least one --dict <lang>=<path> is required".into(),
            ));
        }
        let mut dictionaries = Vec::with_capacity(self.dicts.len());
        for (lang, path) in &self.dicts {
            let d = load_dictionary(
                open(path)?,
                self.source_lang.clone(),
                lang.clone(),
                MalformedPolicy::Skip,
            )
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            dictionaries.push(d);
        }
        DictionaryPack::build(dictionaries).map_err(config_err)
    }
}

impl ConfigArgs {
    fn build(
        &self,
        default_languages: &[LanguageCode],
        case_policy: CasePolicy,
    ) -> Result<AugmentationConfig> {
        let languages = if self.languages.is_empty() {
            default_languages.to_vec()
        } else {
            self.languages.clone()
        };
        let mut cfg = AugmentationConfig::new(languages, self.seed);
        cfg.alpha =
            Ratio::new(self.alpha).map_err(|e| CliError::Config(format!("--alpha: {e}")))?;
        cfg.beta = Ratio::new(self.beta).map_err(|e| CliError::Config(format!("--beta: {e}")))?;
        cfg.mode = self.mode;
        cfg.oov_policy = self.oov;
        cfg.multiword_policy = self.multiword;
        cfg.case_policy = case_policy;
        cfg.shuffle = !self.no_shuffle;
        Ok(cfg)
    }
}

fn load_corpus_path(path: &Path, source_lang: &LanguageCode) -> Result<Corpus> {
    load_corpus(open(path)?, source_lang.clone())
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_vocab(path: &Path, max_len: usize) -> Result<WordPieceVocab> {
    if max_len < 4 {
        return Err(CliError::Config(format!(
            "--max-len {max_len} is too small; need at least 4"
        )));
    }
    WordPieceVocab::from_reader(open(path)?, csf_core::subword::DEFAULT_UNK)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Everything `augment` and `serve` share.
fn load_resources(
    corpus: &Path,
    dict: &DictArgs,
    config: &ConfigArgs,
    batch_size: usize,
    vocab: Option<&Path>,
    max_len: usize,
) -> Result<Resources> {
    let pack = dict.load_pack()?;
    let defaults: Vec<LanguageCode> = dict.dicts.iter().map(|(l, _)| l.clone()).collect();
    let cfg = config.build(&defaults, dict.case_policy)?;
    cfg.validate(&pack).map_err(config_err)?;
    if batch_size == 0 {
        return Err(CliError::Config("--batch-size must be at least 1".into()));
    }
    let vocab = vocab.map(|p| load_vocab(p, max_len)).transpose()?;
    let corpus = load_corpus_path(corpus, &dict.source_lang)?;
    let engine = Engine::new(corpus, pack, cfg, batch_size).map_err(config_err)?;
    Ok(Resources {
        engine,
        vocab,
        max_len,
    })
}

fn epoch_path(out: &Path, epoch: u64) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    let name = match out.extension() {
        Some(ext) => format!("{stem}.epoch{epoch}.{}", ext.to_string_lossy()),
        None => format!("{stem}.epoch{epoch}"),
    };
    out.with_file_name(name)
}

fn cmd_augment(args: AugmentArgs) -> Result<()> {
    if args.workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    if args.epochs == 0 {
        return Err(CliError::Config("--epochs must be at least 1".into()));
    }
    let mut res = load_resources(
        &args.corpus,
        &args.dict,
        &args.config,
        args.batch_size,
        args.vocab.as_deref(),
        args.max_len,
    )?;
    // a static run is written as the corpus in its own order, so every
    // epoch file is the same materialization
    if res.engine.config().mode == Mode::Static {
        let mut cfg = res.engine.config().clone();
        cfg.shuffle = false;
        let e = &res.engine;
        res.engine = Engine::new(e.corpus().clone(), e.pack().clone(), cfg, e.batch_size())
            .map_err(config_err)?;
    }
    let engine = &res.engine;

    let mut total = AugmentationStats::new();
    let mut per_epoch = Vec::new();
    for epoch in 0..args.epochs {
        let path = match &args.out {
            Some(out) if args.epochs > 1 => Some(epoch_path(out, epoch)),
            other => other.clone(),
        };
        let mut w = output(path.as_deref())?;
        let mut stats = AugmentationStats::new();
        let batches = engine.epoch(epoch, args.workers).map_err(config_err)?;
        for record in batches.iter().flatten() {
            let original = engine
                .corpus()
                .get(&record.trace.instance_id)
                .expect("stream yields corpus instances");
            stats
                .accumulate(original, &record.trace)
                .map_err(data_err)?;
            stats.add_coverage(original, engine.pack(), engine.config());
            let encoding = res
                .vocab
                .as_ref()
                .map(|v| encode_instance(&record.instance, v, res.max_len))
                .transpose()
                .map_err(data_err)?;
            serde_json::to_writer(&mut w, &record.output_record(encoding.as_ref()))
                .map_err(data_err)?;
            w.write_all(b"\n").map_err(write_err)?;
        }
        w.flush().map_err(write_err)?;
        total.merge(&stats);
        per_epoch.push(json!({"epoch": epoch, "batches": batches.len(), "stats": stats}));
    }

    let stats_path = args.stats_out.clone().or_else(|| {
        args.out
            .as_ref()
            .map(|o| PathBuf::from(format!("{}.stats.json", o.display())))
    });
    if let Some(path) = stats_path {
        let report = json!({
            "version": csf_core::VERSION,
            "config": engine.config(),
            "n": engine.corpus().len(),
            "batch_size": engine.batch_size(),
            "epochs": per_epoch,
            "total": total,
        });
        let mut w = create(&path)?;
        serde_json::to_writer_pretty(&mut w, &report).map_err(data_err)?;
        w.write_all(b"\n")
            .and_then(|_| w.flush())
            .map_err(write_err)?;
    }
    Ok(())
}

fn cmd_dict_inspect(args: InspectArgs) -> Result<()> {
    let pack = args.dict.load_pack()?;
    let corpus = args
        .corpus
        .as_deref()
        .map(|p| load_corpus_path(p, &args.dict.source_lang))
        .transpose()?;
    let distinct: Option<BTreeSet<&str>> = corpus.as_ref().map(|c| {
        c.instances()
            .iter()
            .flat_map(|i| i.segments().iter().flatten())
            .map(|t| t.surface.as_str())
            .collect()
    });

    let mut dictionaries = Vec::new();
    for (lang, path) in &args.dict.dicts {
        let d = pack.dictionary(lang).map_err(config_err)?;
        let samples: Vec<_> = d
            .entries()
            .take(args.samples)
            .map(|e| json!({"word": e.source_word, "translations": e.translations}))
            .collect();
        let coverage = distinct.as_ref().map(|words| {
            let covered = words
                .iter()
                .filter(|w| d.lookup(w, args.dict.case_policy).is_some())
                .count();
            json!({
                "distinct_tokens": words.len(),
                "covered": covered,
                "distinct_token_coverage": ratio(covered, words.len()),
            })
        });
        dictionaries.push(json!({
            "lang": lang,
            "path": path,
            "entries": d.len(),
            "multi_translation_entries": d.multi_translation_count(),
            "lines": d.line_count(),
            "skipped_lines": d.skipped_line_count(),
            "samples": samples,
            "coverage": coverage,
        }));
    }
    let languages: Vec<LanguageCode> = args.dict.dicts.iter().map(|(l, _)| l.clone()).collect();
    let overall = distinct.as_ref().map(|words| {
        let covered = words
            .iter()
            .filter(|w| pack.covers(w, &languages, args.dict.case_policy))
            .count();
        json!({
            "distinct_tokens": words.len(),
            "covered": covered,
            "distinct_token_coverage": ratio(covered, words.len()),
        })
    });
    let report = json!({
        "source_lang": pack.source_lang(),
        "dictionaries": dictionaries,
        "coverage": overall,
    });
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &report).map_err(data_err)?;
    writeln!(out).map_err(write_err)
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(serde::Serialize)]
struct EncodedLine<'a> {
    id: &'a str,
    #[serde(flatten)]
    encoding: &'a SubwordEncoding,
}

fn read_lines(path: &Path) -> Result<impl Iterator<Item = (usize, Result<String>)>> {
    Ok(open(path)?
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.map_err(data_err)))
        .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty())))
}

fn cmd_encode(args: EncodeArgs) -> Result<()> {
    let vocab = load_vocab(&args.vocab, args.max_len)?;
    let mut w = output(args.out.as_deref())?;
    for (line_no, line) in read_lines(&args.input)? {
        let inst: Instance = parse_instance(&line?)
            .map_err(|e| CliError::Data(format!("{} line {line_no}: {e}", args.input.display())))?;
        let encoding = encode_instance(&inst, &vocab, args.max_len).map_err(data_err)?;
        serde_json::to_writer(
            &mut w,
            &EncodedLine {
                id: inst.id(),
                encoding: &encoding,
            },
        )
        .map_err(data_err)?;
        w.write_all(b"\n").map_err(write_err)?;
    }
    w.flush().map_err(write_err)
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    if args.config.languages.is_empty() {
        return Err(CliError::Config(
            "--languages is required for verify".into(),
        ));
    }
    if !args.z.is_finite() || args.z <= 0.0 {
        return Err(CliError::Config(format!(
            "--z must be positive, got {}",
            args.z
        )));
    }
    let cfg = args.config.build(&[], CasePolicy::default())?;
    let mut stats = AugmentationStats::new();
    for (line_no, line) in read_lines(&args.input)? {
        let at = |e: &dyn std::fmt::Display| {
            CliError::Data(format!("{} line {line_no}: {e}", args.input.display()))
        };
        let (augmented, trace) = parse_augmented_line(&line?).map_err(|e| at(&e))?;
        let original =
            restore_original(&augmented, &trace, cfg.multiword_policy).map_err(|e| at(&e))?;
        stats.accumulate(&original, &trace).map_err(|e| at(&e))?;
    }

    let report = match verify(&stats, &cfg, args.n_min, args.z) {
        Ok(r) => r,
        Err(e @ StatsError::InsufficientSamples { .. }) => {
            return Err(CliError::Insufficient(e.to_string()))
        }
        Err(e) => return Err(data_err(e)),
    };
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(
        &mut out,
        &json!({"passed": report.passed(), "stats": stats, "report": report}),
    )
    .map_err(data_err)?;
    writeln!(out).map_err(write_err)?;
    if report.passed() {
        Ok(())
    } else {
        let names: Vec<_> = report.failures().map(|c| c.name.as_str()).collect();
        Err(CliError::CheckFailed(format!(
            "failed checks: {}",
            names.join(", ")
        )))
    }
}

fn cmd_serve(args: ServeArgs) -> Result<()> {
    // bad flags fail fast; file loading happens behind the running server
    args.config
        .build(&[], args.dict.case_policy)
        .map_err(|e| CliError::Config(e.message().to_owned()))?;
    let runtime = tokio::runtime::Runtime::new().map_err(config_err)?;
    let addr = args.addr;
    runtime
        .block_on(csf_service::serve(addr, move || {
            load_resources(
                &args.corpus,
                &args.dict,
                &args.config,
                args.batch_size,
                args.vocab.as_deref(),
                args.max_len,
            )
            .map_err(|e| e.message().to_owned())
        }))
        .map_err(|e| CliError::Config(format!("{addr}: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Augment(a) => cmd_augment(a),
        Command::DictInspect(a) => cmd_dict_inspect(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("csf: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
