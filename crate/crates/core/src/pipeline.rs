//! End-to-end processing: layout, annotation, block typing, roles, extraction.
//!
//! Resources default to the data files compiled into the library; setting
//! `resources_dir` in the configuration loads the same layout from disk.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::docmodel::{BlockType, Document, Page, PartyRole};
use crate::entities::{annotate_entities, Gazetteer, GazetteerAnnotator, RuleAddressParser};
use crate::error::{Error, Result};
use crate::extract::{default_field_specs, extract_all, ExtractionReport, FieldSpec};
use crate::ingest::{detect_main_language, OcrPage, TermDictionary};
use crate::layout::analyze_page;
use crate::ruleengine::{block_type_rules, classify_roles, detect_block_types, role_rules, Rule};
use crate::textannot::{
    annotate_datatypes, annotate_keywords, compile_patterns, default_patterns, CompiledPattern, ConfusionTable,
    KeywordSet, MatchMode,
};

/// Annotation families switched off for ablation runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Ablation {
    #[default]
    None,
    KeywordAnnots,
    /// Drops data types together with entities and address parts.
    DatatypeAnnots,
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "none" => Ok(Ablation::None),
            "keyword_annots" | "keywords" | "keyword" => Ok(Ablation::KeywordAnnots),
            "datatype_annots" | "datatypes" | "datatype" | "data" => Ok(Ablation::DatatypeAnnots),
            other => Err(Error::Config(format!("unknown ablation {other:?}"))),
        }
    }
}

pub const LANGUAGES: &[&str] = &["en", "cs"];

struct LangFiles {
    keywords: &'static str,
    terms: &'static str,
    cities: &'static str,
    first_names: &'static str,
    countries: &'static str,
    legal_forms: &'static str,
    street_affixes: &'static str,
}

macro_rules! lang_files {
    ($lang:literal) => {
        LangFiles {
            keywords: include_str!(concat!("../../../config/keywords/", $lang, "/keywords.json")),
            terms: include_str!(concat!("../../../config/keywords/", $lang, "/terms.json")),
            cities: include_str!(concat!("../../../config/gazetteers/", $lang, "/cities.txt")),
            first_names: include_str!(concat!("../../../config/gazetteers/", $lang, "/first_names.txt")),
            countries: include_str!(concat!("../../../config/gazetteers/", $lang, "/countries.txt")),
            legal_forms: include_str!(concat!("../../../config/gazetteers/", $lang, "/legal_forms.txt")),
            street_affixes: include_str!(concat!("../../../config/gazetteers/", $lang, "/street_affixes.txt")),
        }
    };
}

const CONFUSIONS: &str = include_str!("../../../config/confusions.json");

/// Keyword lists, gazetteers, patterns and rules for every supported language.
#[derive(Debug, Clone)]
pub struct Resources {
    pub keywords: BTreeMap<String, KeywordSet>,
    pub gazetteers: BTreeMap<String, Gazetteer>,
    pub terms: Vec<TermDictionary>,
    pub confusions: ConfusionTable,
    pub patterns: Vec<CompiledPattern>,
    pub block_rules: Vec<(BlockType, Rule)>,
    pub role_rules: Vec<(PartyRole, Rule)>,
    pub global_rules: Vec<(PartyRole, Rule)>,
}

impl Resources {
    /// Data files compiled into the library.
    pub fn builtin(cfg: &PipelineConfig) -> Result<Self> {
        let mut keywords = BTreeMap::new();
        let mut gazetteers = BTreeMap::new();
        let mut terms = Vec::new();
        for (lang, f) in [("en", lang_files!("en")), ("cs", lang_files!("cs"))] {
            keywords.insert(lang.to_string(), KeywordSet::from_json(f.keywords.as_bytes())?);
            terms.push(TermDictionary::from_json(f.terms.as_bytes())?);
            gazetteers.insert(
                lang.to_string(),
                Gazetteer::from_texts(lang, f.cities, f.first_names, f.countries, f.legal_forms, f.street_affixes),
            );
        }
        Ok(Resources {
            keywords,
            gazetteers,
            terms,
            confusions: ConfusionTable::from_json(
                CONFUSIONS.as_bytes(),
                cfg.similarity_common_cost,
                cfg.similarity_default_cost,
            )?,
            patterns: compile_patterns(&default_patterns())?,
            block_rules: block_type_rules(crate::ruleengine::DEFAULT_BLOCK_TYPE_RULES)?,
            role_rules: role_rules(crate::ruleengine::DEFAULT_ROLE_RULES)?,
            global_rules: role_rules(crate::ruleengine::DEFAULT_GLOBAL_RULES)?,
        })
    }

    /// Loads the repository `config/` layout from `dir`. Every language directory
    /// under `keywords/` with a matching `gazetteers/` directory is loaded.
    pub fn from_dir(dir: &Path, cfg: &PipelineConfig) -> Result<Self> {
        let read = |rel: &str| {
            std::fs::read_to_string(dir.join(rel))
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", dir.join(rel).display())))
        };
        let mut keywords = BTreeMap::new();
        let mut gazetteers = BTreeMap::new();
        let mut terms = Vec::new();
        let kw_root = dir.join("keywords");
        let entries = std::fs::read_dir(&kw_root)
            .map_err(|e| Error::Config(format!("cannot list {}: {e}", kw_root.display())))?;
        let mut langs: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        langs.sort();
        for lang in langs {
            keywords.insert(lang.clone(), KeywordSet::from_json(read(&format!("keywords/{lang}/keywords.json"))?.as_bytes())?);
            terms.push(TermDictionary::from_json(read(&format!("keywords/{lang}/terms.json"))?.as_bytes())?);
            gazetteers.insert(lang.clone(), Gazetteer::load_dir(&lang, &dir.join("gazetteers").join(&lang))?);
        }
        Ok(Resources {
            keywords,
            gazetteers,
            terms,
            confusions: ConfusionTable::from_json(
                read("confusions.json")?.as_bytes(),
                cfg.similarity_common_cost,
                cfg.similarity_default_cost,
            )?,
            patterns: compile_patterns(&default_patterns())?,
            block_rules: block_type_rules(&read("rules/block_types.rules")?)?,
            role_rules: role_rules(&read("rules/roles.rules")?)?,
            global_rules: role_rules(&read("rules/global.rules")?)?,
        })
    }

    /// `resources_dir` from the configuration when set, built-in data otherwise.
    pub fn for_config(cfg: &PipelineConfig) -> Result<Self> {
        match &cfg.resources_dir {
            Some(dir) => Self::from_dir(dir, cfg),
            None => Self::builtin(cfg),
        }
    }
}

/// Configured processing run. Immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub resources: Resources,
    pub mode: MatchMode,
    pub ablation: Ablation,
    pub specs: Vec<FieldSpec>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, mode: MatchMode) -> Result<Self> {
        cfg.validate()?;
        let resources = Resources::for_config(&cfg)?;
        Ok(Pipeline {
            cfg,
            resources,
            mode,
            ablation: Ablation::None,
            specs: default_field_specs(),
        })
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.ablation = ablation;
        self
    }

    /// Layout analysis of OCR pages into a document without annotations.
    pub fn layout(&self, source_id: &str, pages: &[OcrPage]) -> Document {
        Document {
            source_id: source_id.to_string(),
            main_language: String::new(),
            pages: pages.iter().map(|p| analyze_page(p, &self.cfg)).collect(),
        }
    }

    /// Resolves `auto` (or an empty language) by term dictionary lookup.
    pub fn resolve_language(&self, doc: &Document, lang: &str) -> Result<String> {
        let lang = if lang.is_empty() || lang == "auto" {
            detect_main_language(&doc.text(), &self.resources.terms, &self.cfg.fallback_language)?
        } else {
            lang.to_string()
        };
        if !self.resources.keywords.contains_key(&lang) || !self.resources.gazetteers.contains_key(&lang) {
            return Err(Error::Config(format!("no keyword or gazetteer data for language {lang:?}")));
        }
        Ok(lang)
    }

    /// Annotates, types and role-labels every block of one page.
    pub fn annotate_page(&self, page: &Page, lang: &str) -> Result<Page> {
        let ks = &self.resources.keywords[lang];
        let gaz = &self.resources.gazetteers[lang];
        let ner = GazetteerAnnotator {
            gazetteer: gaz.clone(),
        };
        let parser = RuleAddressParser {
            gazetteer: gaz.clone(),
        };
        let mut out = page.clone();
        for block in out.blocks.iter_mut() {
            block.annotations.clear();
            block.block_types.clear();
            block.role = PartyRole::None;
            let mut b = block.clone();
            if self.ablation != Ablation::KeywordAnnots {
                b = annotate_keywords(&b, ks, self.mode, &self.resources.confusions, &self.cfg);
            }
            if self.ablation != Ablation::DatatypeAnnots {
                b = annotate_datatypes(&b, &self.resources.patterns);
                b = annotate_entities(&b, &ner, &parser, &self.cfg);
            }
            *block = b;
        }
        let typed = detect_block_types(&out, &self.resources.block_rules)?;
        classify_roles(&typed, &self.resources.role_rules, &self.resources.global_rules)
    }

    /// Full annotation of a laid-out document; `lang` may be `auto`.
    pub fn annotate(&self, doc: &Document, lang: &str) -> Result<Document> {
        let lang = self.resolve_language(doc, lang)?;
        let pages = doc.pages.iter().map(|p| self.annotate_page(p, &lang)).collect::<Result<Vec<_>>>()?;
        Ok(Document {
            source_id: doc.source_id.clone(),
            main_language: lang,
            pages,
        })
    }

    /// Annotation followed by field extraction.
    pub fn extract(&self, doc: &Document, lang: &str) -> Result<(Document, ExtractionReport)> {
        let annotated = self.annotate(doc, lang)?;
        let report = extract_all(&annotated, &self.specs, &self.cfg);
        Ok((annotated, report))
    }

    /// OCR pages straight to an extraction report.
    pub fn run(&self, source_id: &str, pages: &[OcrPage], lang: &str) -> Result<ExtractionReport> {
        let doc = self.layout(source_id, pages);
        Ok(self.extract(&doc, lang)?.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_matches_repository_config() {
        let cfg = PipelineConfig::default();
        let a = Resources::builtin(&cfg).unwrap();
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config");
        let b = Resources::from_dir(&dir, &cfg).unwrap();
        assert_eq!(a.keywords, b.keywords);
        assert_eq!(a.block_rules, b.block_rules);
        assert_eq!(a.role_rules.len(), 15);
        assert_eq!(a.global_rules.len(), 5);
    }

    #[test]
    fn unknown_language_is_config_error() {
        let p = Pipeline::new(PipelineConfig::default(), MatchMode::Similarity).unwrap();
        let doc = Document {
            source_id: "x".into(),
            main_language: String::new(),
            pages: vec![Page::new(1, 100, 100)],
        };
        assert!(matches!(p.resolve_language(&doc, "de"), Err(Error::Config(_))));
        assert_eq!(p.resolve_language(&doc, "auto").unwrap(), "en");
    }
}
