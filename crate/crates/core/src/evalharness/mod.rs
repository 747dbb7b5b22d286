//! Field-level evaluation against gold values, ablation runs and the
//! synthetic corpus used for desk-scale experiments.

pub mod corpus;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use corpus::{generate_corpus, generate_invoice, load_templates, GeneratedInvoice, NoiseModel, Template};

use crate::config::PipelineConfig;
use crate::docmodel::{FieldKind, PartyRole};
use crate::error::{Error, Result};
use crate::extract::ExtractionReport;
use crate::pipeline::{Ablation, Pipeline};
use crate::textannot::validate::is_legal_form;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MatchClass {
    Match,
    Partial,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldItem {
    pub field: FieldKind,
    pub role: PartyRole,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub source_id: String,
    pub items: Vec<GoldItem>,
}

/// Parses JSON lines, one record per non-empty line.
pub fn read_gold_jsonl(text: &str) -> Result<Vec<GoldRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let de = &mut serde_json::Deserializer::from_str(l);
            serde_path_to_error::deserialize(de)
                .map_err(|e| Error::schema(format!("line {}: {}", i + 1, e.path()), e.inner().to_string()))
        })
        .collect()
}

pub fn write_gold_jsonl(records: &[GoldRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("gold records serialize") + "\n")
        .collect()
}

/// Lowercased alphanumeric tokens; legal-form tokens dropped when `main_only`.
fn tokens(s: &str, main_only: bool) -> Vec<String> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !(main_only && is_legal_form(t)))
        .map(|t| t.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Whether every main token of `gold` occurs in `extracted`, counting repeats.
fn contains_main_tokens(gold: &str, extracted: &str) -> bool {
    let main = tokens(gold, true);
    if main.is_empty() {
        return false;
    }
    let mut have: HashMap<String, usize> = HashMap::new();
    for t in tokens(extracted, false) {
        *have.entry(t).or_default() += 1;
    }
    main.iter().all(|t| match have.get_mut(t) {
        Some(n) if *n > 0 => {
            *n -= 1;
            true
        }
        _ => false,
    })
}

/// Exact match, partial match below the edit-distance threshold, or mismatch.
/// Company names and addresses also match when the extracted value holds all
/// main tokens of the gold value.
pub fn classify_match(gold: &str, extracted: &str, field: FieldKind, cfg: &PipelineConfig) -> MatchClass {
    if gold == extracted {
        return MatchClass::Match;
    }
    if matches!(field, FieldKind::CompanyName | FieldKind::Address) && contains_main_tokens(gold, extracted) {
        return MatchClass::Match;
    }
    let d = strsim::levenshtein(gold, extracted);
    if d == 0 {
        MatchClass::Match
    } else if d < cfg.partial_match_levenshtein {
        MatchClass::Partial
    } else {
        MatchClass::Mismatch
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub matched: usize,
    pub partial: usize,
    pub mismatch: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.matched + self.partial + self.mismatch
    }

    fn add(&mut self, c: MatchClass) {
        match c {
            MatchClass::Match => self.matched += 1,
            MatchClass::Partial => self.partial += 1,
            MatchClass::Mismatch => self.mismatch += 1,
        }
    }

    fn pct(&self, n: usize) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            100.0 * n as f64 / self.total() as f64
        }
    }

    pub fn match_pct(&self) -> f64 {
        self.pct(self.matched)
    }

    pub fn partial_pct(&self) -> f64 {
        self.pct(self.partial)
    }

    pub fn mismatch_pct(&self) -> f64 {
        self.pct(self.mismatch)
    }
}

/// One gold item with the value it was compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub source_id: String,
    pub field: FieldKind,
    pub role: PartyRole,
    pub gold: String,
    pub extracted: Option<String>,
    pub class: MatchClass,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub overall: Counts,
    /// Keyed by field label, all roles together.
    pub by_field: BTreeMap<String, Counts>,
    /// Keyed by `ROLE FIELD` for party fields and the field label otherwise.
    pub by_item: BTreeMap<String, Counts>,
    pub items: Vec<ItemResult>,
}

fn item_key(field: FieldKind, role: PartyRole) -> String {
    match role {
        PartyRole::None => field.as_str().to_string(),
        r => format!("{} {}", r.as_str(), field.as_str()),
    }
}

impl ScoreTable {
    pub fn field(&self, field: FieldKind) -> Counts {
        self.by_field.get(field.as_str()).copied().unwrap_or_default()
    }

    /// `key,match,partial,mismatch,total,match_pct,partial_pct,mismatch_pct` rows, overall first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("item,match,partial,mismatch,total,match_pct,partial_pct,mismatch_pct\n");
        let row = |k: &str, c: &Counts| {
            format!(
                "{k},{},{},{},{},{:.2},{:.2},{:.2}\n",
                c.matched,
                c.partial,
                c.mismatch,
                c.total(),
                c.match_pct(),
                c.partial_pct(),
                c.mismatch_pct()
            )
        };
        out.push_str(&row("OVERALL", &self.overall));
        for (k, c) in &self.by_item {
            out.push_str(&row(k, c));
        }
        out
    }
}

/// Compares every gold item with the extracted value of the same field and
/// role. A party field extracted under the wrong role counts as a mismatch.
pub fn score_run(gold: &[GoldRecord], reports: &[ExtractionReport], cfg: &PipelineConfig) -> Result<ScoreTable> {
    let by_source: HashMap<&str, &ExtractionReport> = reports.iter().map(|r| (r.source_id.as_str(), r)).collect();
    let mut table = ScoreTable::default();
    for record in gold {
        let report = by_source
            .get(record.source_id.as_str())
            .ok_or_else(|| Error::MissingReport(record.source_id.clone()))?;
        for item in &record.items {
            let extracted = report.get(item.field, item.role).map(|f| f.value.clone());
            let class = match &extracted {
                Some(v) => classify_match(&item.value, v, item.field, cfg),
                None => MatchClass::Mismatch,
            };
            table.overall.add(class);
            table.by_field.entry(item.field.as_str().to_string()).or_default().add(class);
            table.by_item.entry(item_key(item.field, item.role)).or_default().add(class);
            table.items.push(ItemResult {
                source_id: record.source_id.clone(),
                field: item.field,
                role: item.role,
                gold: item.value.clone(),
                extracted,
                class,
            });
        }
    }
    Ok(table)
}

/// Extraction reports for a generated corpus, in corpus order.
pub fn extract_corpus(corpus: &[GeneratedInvoice], pipeline: &Pipeline) -> Result<Vec<ExtractionReport>> {
    corpus
        .par_iter()
        .map(|inv| pipeline.run(&inv.source_id, &inv.pages, &inv.language))
        .collect()
}

/// Scores the corpus with the given annotation family switched off.
pub fn run_ablation(corpus: &[GeneratedInvoice], pipeline: &Pipeline, drop: Ablation) -> Result<ScoreTable> {
    let p = pipeline.clone().with_ablation(drop);
    let reports = extract_corpus(corpus, &p)?;
    let gold: Vec<GoldRecord> = corpus.iter().map(|i| i.gold.clone()).collect();
    score_run(&gold, &reports, &p.cfg)
}
