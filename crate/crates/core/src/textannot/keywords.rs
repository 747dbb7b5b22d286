//! Keyword annotation with exact and similarity matchers.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::distance::{fold_str, from_units, is_punct_or_space, similar_candidates, ConfusionTable};
use crate::config::PipelineConfig;
use crate::docmodel::{Annotation, AnnotationKind, Block, Span};
use crate::error::{Error, Result};

/// The fixed set of keyword labels.
pub const KEYWORD_LABELS: &[&str] = &[
    "TITLE",
    "INVOICE NUMBER",
    "INVOICE DATE",
    "DUE DATE",
    "PAYMENT DATE",
    "ORDER NUMBER",
    "PAYMENT METHOD",
    "TOTAL DUE",
    "AMOUNT PAID",
    "VAT NUMBER",
    "COMPANY ID",
    "IBAN",
    "SWIFT",
    "ACCOUNT NUMBER",
    "BANK",
    "PAGE NUMBER",
    "SELLER",
    "BUYER",
    "DELIVERY",
    "EMAIL",
    "PHONE",
    "WEBSITE",
    "CONTACT",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MatchMode {
    Regex,
    Similarity,
}

impl FromStr for MatchMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "regex" => Ok(MatchMode::Regex),
            "similarity" => Ok(MatchMode::Similarity),
            _ => Err(Error::Config(format!("unknown match mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordPhrase {
    pub phrase: String,
    /// Only matches at offset 0 of a line.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub line_initial: bool,
    /// Neighbouring characters must not be alphanumeric.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub whole_word: bool,
    /// Only punctuation or whitespace may surround the match on its line.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub whole_line: bool,
}

impl KeywordPhrase {
    pub fn plain(phrase: &str) -> Self {
        KeywordPhrase {
            phrase: phrase.to_string(),
            line_initial: false,
            whole_word: false,
            whole_line: false,
        }
    }

    fn admits(&self, line: &[char], start: usize, end: usize) -> bool {
        if self.line_initial && start != 0 {
            return false;
        }
        if self.whole_word {
            let before = start.checked_sub(1).map(|i| line[i]);
            let after = line.get(end).copied();
            if before.is_some_and(char::is_alphanumeric) || after.is_some_and(char::is_alphanumeric) {
                return false;
            }
        }
        if self.whole_line
            && !(line[..start].iter().chain(&line[end..]).all(|c| is_punct_or_space(*c)))
        {
            return false;
        }
        true
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PhraseEntry {
    Plain(String),
    Flagged(KeywordPhrase),
}

#[derive(Deserialize)]
struct KeywordFile {
    language: String,
    keywords: BTreeMap<String, Vec<PhraseEntry>>,
}

/// Per-language keyword phrases grouped by label.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordSet {
    pub language: String,
    pub entries: BTreeMap<String, Vec<KeywordPhrase>>,
}

impl KeywordSet {
    pub fn new(language: &str, entries: BTreeMap<String, Vec<KeywordPhrase>>) -> Result<Self> {
        for (label, phrases) in &entries {
            if !KEYWORD_LABELS.contains(&label.as_str()) {
                return Err(Error::Config(format!("unknown keyword label {label:?}")));
            }
            for p in phrases {
                if p.phrase.is_empty() || p.phrase != p.phrase.to_lowercase() {
                    return Err(Error::Config(format!(
                        "keyword phrase {:?} for {label} must be non-empty lowercase",
                        p.phrase
                    )));
                }
            }
        }
        Ok(KeywordSet {
            language: language.to_string(),
            entries,
        })
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let file: KeywordFile = serde_json::from_slice(bytes)
            .map_err(|e| Error::Config(format!("invalid keyword file: {e}")))?;
        let entries = file
            .keywords
            .into_iter()
            .map(|(label, list)| {
                let phrases = list
                    .into_iter()
                    .map(|e| match e {
                        PhraseEntry::Plain(s) => KeywordPhrase::plain(&s),
                        PhraseEntry::Flagged(p) => p,
                    })
                    .collect();
                (label, phrases)
            })
            .collect();
        Self::new(&file.language, entries)
    }

    pub fn phrases(&self) -> impl Iterator<Item = (&str, &KeywordPhrase)> {
        self.entries
            .iter()
            .flat_map(|(l, ps)| ps.iter().map(move |p| (l.as_str(), p)))
    }
}

/// One accepted keyword occurrence on a line.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordHit {
    pub label: String,
    pub phrase: String,
    pub start: usize,
    pub end: usize,
    pub distance: f64,
}

struct Candidate<'a> {
    label: &'a str,
    phrase: &'a KeywordPhrase,
    phrase_len: usize,
    start: usize,
    end: usize,
    units: u64,
}

fn exact_candidates<'a>(line: &[char], ks: &'a KeywordSet) -> Vec<Candidate<'a>> {
    let mut out = Vec::new();
    for (label, p) in ks.phrases() {
        let pat = fold_str(&p.phrase);
        if pat.len() > line.len() {
            continue;
        }
        for start in 0..=line.len() - pat.len() {
            let end = start + pat.len();
            if line[start..end] == pat[..] && p.admits(line, start, end) {
                out.push(Candidate {
                    label,
                    phrase: p,
                    phrase_len: pat.len(),
                    start,
                    end,
                    units: 0,
                });
            }
        }
    }
    out
}

fn fuzzy_candidates<'a>(
    line: &[char],
    ks: &'a KeywordSet,
    table: &ConfusionTable,
    ratio: f64,
) -> Vec<Candidate<'a>> {
    let mut out = Vec::new();
    for (label, p) in ks.phrases() {
        let pat = fold_str(&p.phrase);
        for (start, end, units) in similar_candidates(line, &pat, ratio, table) {
            if units > 0 && p.admits(line, start, end) {
                out.push(Candidate {
                    label,
                    phrase: p,
                    phrase_len: pat.len(),
                    start,
                    end,
                    units,
                });
            }
        }
    }
    out
}

/// Greedy non-overlapping selection: longest phrase first, then lowest distance, then leftmost.
fn select<'a>(mut cands: Vec<Candidate<'a>>, taken: &mut Vec<Candidate<'a>>) {
    cands.sort_by(|a, b| {
        (b.phrase_len, a.units, a.start, a.label).cmp(&(a.phrase_len, b.units, b.start, b.label))
    });
    for c in cands {
        if taken.iter().all(|t| c.end <= t.start || t.end <= c.start) {
            taken.push(c);
        }
    }
}

fn covered(c: &Candidate) -> usize {
    c.phrase_len.min(c.end - c.start)
}

/// Fuzzy selection ranked by covered length (a window cannot claim phrase characters it
/// dropped), then distance. Exact hits are displaced only by a strictly longer same-label
/// occurrence containing them.
fn extend_fuzzy<'a>(mut cands: Vec<Candidate<'a>>, taken: &mut Vec<Candidate<'a>>) {
    cands.sort_by(|a, b| {
        (covered(b), a.units, b.phrase_len, a.start, a.label)
            .cmp(&(covered(a), b.units, a.phrase_len, b.start, b.label))
    });
    for c in cands {
        let clash = |t: &Candidate| !(c.end <= t.start || t.end <= c.start);
        let displaceable = |t: &Candidate| {
            t.units == 0
                && t.label == c.label
                && c.start <= t.start
                && t.end <= c.end
                && covered(&c) > t.end - t.start
        };
        if taken.iter().filter(|t| clash(t)).all(displaceable) {
            taken.retain(|t| !clash(t));
            taken.push(c);
        }
    }
}

/// Keyword occurrences in one line. Exact occurrences are accepted first in both modes;
/// a fuzzy occurrence may only replace exact ones of its own label that it strictly
/// contains, so every regex hit stays covered by a similarity hit with the same label.
pub fn match_keywords_in_line(
    line_text: &str,
    ks: &KeywordSet,
    mode: MatchMode,
    table: &ConfusionTable,
    ratio: f64,
) -> Vec<KeywordHit> {
    let line = fold_str(line_text);
    let mut taken = Vec::new();
    select(exact_candidates(&line, ks), &mut taken);
    if mode == MatchMode::Similarity {
        extend_fuzzy(fuzzy_candidates(&line, ks, table, ratio), &mut taken);
    }
    let raw: Vec<char> = line_text.chars().collect();
    let mut hits: Vec<KeywordHit> = taken
        .into_iter()
        .map(|c| {
            // trim surrounding whitespace picked up by the fuzzy window
            let (mut s, mut e) = (c.start, c.end);
            while s < e && raw[s].is_whitespace() {
                s += 1;
            }
            while e > s && raw[e - 1].is_whitespace() {
                e -= 1;
            }
            KeywordHit {
                label: c.label.to_string(),
                phrase: c.phrase.phrase.clone(),
                start: s,
                end: e,
                distance: from_units(c.units),
            }
        })
        .collect();
    hits.sort_by_key(|h| h.start);
    hits
}

/// Adds one KEYWORD annotation per accepted match in every line of the block.
pub fn annotate_keywords(
    block: &Block,
    ks: &KeywordSet,
    mode: MatchMode,
    table: &ConfusionTable,
    cfg: &PipelineConfig,
) -> Block {
    let mut out = block.clone();
    let source = match mode {
        MatchMode::Regex => "keyword-regex",
        MatchMode::Similarity => "keyword-similarity",
    };
    for (li, line) in block.lines.iter().enumerate() {
        for hit in match_keywords_in_line(&line.text, ks, mode, table, cfg.similarity_threshold_ratio) {
            let len = hit.phrase.chars().count() as f64;
            let matched: String = line.text.chars().skip(hit.start).take(hit.end - hit.start).collect();
            out.annotations.push(Annotation {
                kind: AnnotationKind::Keyword,
                label: hit.label,
                span: Span {
                    line: li,
                    start: hit.start,
                    end: hit.end,
                },
                matched_text: matched,
                score: (1.0 - hit.distance / len).clamp(0.0, 1.0),
                source: source.to_string(),
            });
        }
    }
    out
}
