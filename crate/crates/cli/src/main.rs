//! Batch front end. Each pipeline stage is a separate command with file handoff.
//!
//! Exit codes: 0 on full success, 1 on usage or configuration errors, 2 when some
//! input files failed (they are reported on stderr and the rest are processed).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use invoicekit::docmodel::{deserialize_document, serialize_document, Document, Format};
use invoicekit::evalharness::{generate_corpus, read_gold_jsonl, score_run, write_gold_jsonl, NoiseModel, Template};
use invoicekit::extract::ExtractionReport;
use invoicekit::ingest::{parse_tesseract_tsv, parse_wordbox_json, write_wordbox_json};
use invoicekit::pageclassify::{
    build_vocab, cross_validate, extract_features, labeled_pages, parse_vocab, predict, train, ClassifierKind,
    ClassifierModel, Stage,
};
use invoicekit::pipeline::Pipeline;
use invoicekit::textannot::MatchMode;
use invoicekit::PipelineConfig;
use rayon::prelude::*;
use serde::Serialize;

const BUILTIN_TEMPLATES: [&str; 6] = [
    include_str!("../../../corpus/templates/01_en_classic.json"),
    include_str!("../../../corpus/templates/02_en_stacked.json"),
    include_str!("../../../corpus/templates/03_cs_columns.json"),
    include_str!("../../../corpus/templates/04_cs_swapped.json"),
    include_str!("../../../corpus/templates/05_en_letterhead.json"),
    include_str!("../../../corpus/templates/06_en_unlabeled.json"),
];

#[derive(Parser)]
#[command(name = "invoicekit", version, about = "Invoice OCR layout analysis, annotation and field extraction")]
struct Cli {
    /// Worker threads for file-level parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Layout analysis of OCR output into document files.
    Analyze(AnalyzeArgs),
    /// Annotation and field extraction over analyzed documents.
    Extract(ExtractArgs),
    /// First-page classification of every page of analyzed documents.
    ClassifyPage(ClassifyArgs),
    /// Scores extraction reports against gold records.
    Evaluate(EvaluateArgs),
    /// Generates a synthetic OCR corpus with gold records.
    GenCorpus(GenCorpusArgs),
    /// Trains a first-page classifier on analyzed documents.
    TrainClassifier(TrainArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    /// Tesseract TSV.
    Tsv,
    /// Word-box JSON.
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum DocFormat {
    Json,
    Xml,
}

impl From<DocFormat> for Format {
    fn from(f: DocFormat) -> Self {
        match f {
            DocFormat::Json => Format::Json,
            DocFormat::Xml => Format::Xml,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// OCR files to analyze.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Format of the OCR inputs.
    #[arg(long, value_enum, default_value = "tsv")]
    format: InputFormat,
    /// Output directory; one `<stem>.doc.json` (or `.doc.xml`) per input.
    #[arg(long)]
    out: PathBuf,
    /// Serialization of the written documents.
    #[arg(long, value_enum, default_value = "json")]
    doc_format: DocFormat,
}

#[derive(Args)]
struct MatcherArgs {
    /// Keyword matching tolerant to OCR confusions (default).
    #[arg(long, conflicts_with = "regex")]
    similarity: bool,
    /// Exact keyword matching only.
    #[arg(long)]
    regex: bool,
}

impl MatcherArgs {
    fn mode(&self) -> MatchMode {
        if self.regex {
            MatchMode::Regex
        } else {
            MatchMode::Similarity
        }
    }
}

#[derive(Args)]
struct ExtractArgs {
    /// Analyzed documents (`.json` or `.xml`).
    docs: Vec<PathBuf>,
    /// Document language: `auto`, `en` or `cs`.
    #[arg(long, default_value = "auto")]
    lang: String,
    #[command(flatten)]
    matcher: MatcherArgs,
    /// Report file: a JSON array with one report per document.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Analyzed documents.
    docs: Vec<PathBuf>,
    /// Model written by `train-classifier`.
    #[arg(long)]
    model: PathBuf,
    /// Document language for annotation-stage models: `auto`, `en` or `cs`.
    #[arg(long, default_value = "auto")]
    lang: String,
    /// Output file: a JSON array of per-page predictions.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Gold records, one JSON object per line.
    #[arg(long)]
    gold: PathBuf,
    /// Report file written by `extract`.
    #[arg(long)]
    reports: PathBuf,
    /// CSV output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the full score table, including per-item results, as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct GenCorpusArgs {
    /// Number of invoices.
    #[arg(short = 'n', long, default_value_t = 50)]
    count: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Per-character OCR noise rate in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Template directory; the shipped templates when absent.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Use only the first N templates.
    #[arg(long)]
    max_templates: Option<usize>,
    /// Output directory: `ocr/<id>.json` per invoice and `gold.jsonl`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Nb,
    Lr,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    /// Words, title and page number only.
    Layout,
    /// Adds keyword, data type and block type features.
    Annotations,
}

#[derive(Args)]
struct TrainArgs {
    /// Analyzed documents; the first page of each is the positive example unless labeled.
    docs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "nb")]
    kind: KindArg,
    #[arg(long, value_enum, default_value = "annotations")]
    stage: StageArg,
    /// Vocabulary file, one word per line; built from the documents when absent.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Size of a vocabulary built from the documents.
    #[arg(long, default_value_t = 100)]
    vocab_size: usize,
    /// Document language for annotation-stage features.
    #[arg(long, default_value = "auto")]
    lang: String,
    /// Also report k-fold cross-validation metrics on stderr.
    #[arg(long)]
    cv: Option<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Model output file (JSON).
    #[arg(long)]
    out: PathBuf,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Fatal(anyhow::Error),
    PartialFiles(usize),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Fatal(e)
    }
}

impl From<invoicekit::Error> for Failure {
    fn from(e: invoicekit::Error) -> Self {
        Failure::Fatal(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Fatal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::PartialFiles(n)) => {
            eprintln!("{n} input file(s) failed");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Analyze(a) => analyze(a, cfg),
        Command::Extract(a) => extract(a, cfg),
        Command::ClassifyPage(a) => classify_page(a, cfg),
        Command::Evaluate(a) => evaluate(a, cfg),
        Command::GenCorpus(a) => gen_corpus(a, cfg),
        Command::TrainClassifier(a) => train_classifier(a, cfg),
    }
}

fn source_id(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    for suffix in [".doc.json", ".doc.xml", ".json", ".xml", ".tsv"] {
        if let Some(stem) = name.strip_suffix(suffix) {
            return stem.to_string();
        }
    }
    name
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

/// Runs `f` over every input in parallel, keeping input order. Failures are
/// reported and dropped.
fn per_file<T: Send>(inputs: &[PathBuf], f: impl Fn(&Path) -> anyhow::Result<T> + Sync) -> (Vec<T>, usize) {
    let results: Vec<anyhow::Result<T>> = inputs.par_iter().map(|p| f(p)).collect();
    let mut ok = Vec::new();
    let mut failed = 0;
    for (path, r) in inputs.iter().zip(results) {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                eprintln!("{}: {e:#}", path.display());
                failed += 1;
            }
        }
    }
    (ok, failed)
}

fn finish(failed: usize) -> CmdResult {
    if failed > 0 {
        Err(Failure::PartialFiles(failed))
    } else {
        Ok(())
    }
}

fn analyze(a: AnalyzeArgs, cfg: PipelineConfig) -> CmdResult {
    let pipeline = Pipeline::new(cfg, MatchMode::Similarity)?;
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let format: Format = a.doc_format.into();
    let ext = match a.doc_format {
        DocFormat::Json => "doc.json",
        DocFormat::Xml => "doc.xml",
    };
    let (_, failed) = per_file(&a.inputs, |path| {
        let bytes = fs::read(path)?;
        let pages = match a.format {
            InputFormat::Tsv => parse_tesseract_tsv(&bytes)?,
            InputFormat::Json => parse_wordbox_json(&bytes)?,
        };
        let id = source_id(path);
        let doc = pipeline.layout(&id, &pages);
        write_file(&a.out.join(format!("{id}.{ext}")), &serialize_document(&doc, format))
    });
    finish(failed)
}

fn read_document(path: &Path) -> anyhow::Result<Document> {
    let bytes = fs::read(path)?;
    let format = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")) {
        Format::Xml
    } else {
        Format::Json
    };
    Ok(deserialize_document(&bytes, format)?)
}

fn check_language(pipeline: &Pipeline, lang: &str) -> anyhow::Result<()> {
    if lang != "auto" && !pipeline.resources.keywords.contains_key(lang) {
        bail!("no dictionaries for language {lang:?}");
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("output values serialize");
    v.push(b'\n');
    v
}

fn extract(a: ExtractArgs, cfg: PipelineConfig) -> CmdResult {
    let pipeline = Pipeline::new(cfg, a.matcher.mode())?;
    check_language(&pipeline, &a.lang)?;
    let (reports, failed) = per_file(&a.docs, |path| {
        let doc = read_document(path)?;
        Ok(pipeline.extract(&doc, &a.lang)?.1)
    });
    write_file(&a.out, &to_json(&reports))?;
    finish(failed)
}

#[derive(Serialize)]
struct PagePrediction {
    source_id: String,
    page: u32,
    first_page: bool,
    first_page_probability: f64,
}

fn classify_page(a: ClassifyArgs, cfg: PipelineConfig) -> CmdResult {
    let text = fs::read_to_string(&a.model).with_context(|| format!("cannot read {}", a.model.display()))?;
    let model = ClassifierModel::from_json(&text)?;
    let vocab = model.schema.vocab.clone();
    let stage = model.schema.stage;
    let pipeline = Pipeline::new(cfg, MatchMode::Similarity)?;
    check_language(&pipeline, &a.lang)?;
    let (per_doc, failed) = per_file(&a.docs, |path| {
        let mut doc = read_document(path)?;
        if stage == Stage::WithAnnotations {
            doc = pipeline.annotate(&doc, &a.lang)?;
        }
        doc.pages
            .iter()
            .map(|page| {
                let fv = extract_features(page, &vocab, stage)?;
                let (first_page, first_page_probability) = predict(&model, &fv)?;
                Ok(PagePrediction {
                    source_id: doc.source_id.clone(),
                    page: page.number,
                    first_page,
                    first_page_probability,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()
    });
    let rows: Vec<PagePrediction> = per_doc.into_iter().flatten().collect();
    write_file(&a.out, &to_json(&rows))?;
    finish(failed)
}

fn evaluate(a: EvaluateArgs, cfg: PipelineConfig) -> CmdResult {
    let gold_text = fs::read_to_string(&a.gold).with_context(|| format!("cannot read {}", a.gold.display()))?;
    let gold = read_gold_jsonl(&gold_text)?;
    let reports_text =
        fs::read_to_string(&a.reports).with_context(|| format!("cannot read {}", a.reports.display()))?;
    let reports: Vec<ExtractionReport> = serde_json::from_str(&reports_text)
        .with_context(|| format!("{} is not a report array", a.reports.display()))?;
    let table = score_run(&gold, &reports, &cfg)?;
    if let Some(path) = &a.json {
        write_file(path, &to_json(&table))?;
    }
    let csv = table.to_csv();
    match &a.out {
        Some(path) => write_file(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn load_templates(dir: Option<&Path>) -> anyhow::Result<Vec<Template>> {
    match dir {
        Some(d) => Ok(invoicekit::evalharness::load_templates(d)?),
        None => BUILTIN_TEMPLATES
            .iter()
            .map(|t| Template::from_json(t.as_bytes()).map_err(Into::into))
            .collect(),
    }
}

fn gen_corpus(a: GenCorpusArgs, cfg: PipelineConfig) -> CmdResult {
    let pipeline = Pipeline::new(cfg, MatchMode::Similarity)?;
    let mut templates = load_templates(a.templates.as_deref())?;
    if let Some(k) = a.max_templates {
        templates.truncate(k);
    }
    let corpus = generate_corpus(
        a.count,
        &templates,
        &NoiseModel::with_rate(a.noise),
        &pipeline.resources.confusions,
        a.seed,
    )?;
    let ocr = a.out.join("ocr");
    fs::create_dir_all(&ocr).with_context(|| format!("cannot create {}", ocr.display()))?;
    corpus
        .par_iter()
        .try_for_each(|inv| write_file(&ocr.join(format!("{}.json", inv.source_id)), &write_wordbox_json(&inv.pages)))?;
    let gold: Vec<_> = corpus.iter().map(|c| c.gold.clone()).collect();
    write_file(&a.out.join("gold.jsonl"), write_gold_jsonl(&gold).as_bytes())?;
    Ok(())
}

fn train_classifier(a: TrainArgs, cfg: PipelineConfig) -> CmdResult {
    let stage = match a.stage {
        StageArg::Layout => Stage::LayoutOnly,
        StageArg::Annotations => Stage::WithAnnotations,
    };
    let kind = match a.kind {
        KindArg::Nb => ClassifierKind::NaiveBayes,
        KindArg::Lr => ClassifierKind::LogisticRegression,
    };
    let pipeline = Pipeline::new(cfg, MatchMode::Similarity)?;
    check_language(&pipeline, &a.lang)?;
    let (docs, failed) = per_file(&a.docs, |path| {
        let doc = read_document(path)?;
        Ok(match stage {
            Stage::WithAnnotations => pipeline.annotate(&doc, &a.lang)?,
            Stage::LayoutOnly => doc,
        })
    });
    let vocab = match &a.vocab {
        Some(p) => parse_vocab(&fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?),
        None => build_vocab(docs.iter().flat_map(|d| d.pages.iter()), a.vocab_size),
    };
    let data = labeled_pages(&docs, &vocab, stage)?;
    if let Some(k) = a.cv {
        let m = cross_validate(&data, kind, k, a.seed)?;
        eprintln!(
            "cross-validation ({k} folds): precision {:.4} recall {:.4} f1 {:.4}",
            m.precision, m.recall, m.f1
        );
    }
    let model = train(&data, kind)?;
    write_file(&a.out, model.to_json().as_bytes())?;
    finish(failed)
}
