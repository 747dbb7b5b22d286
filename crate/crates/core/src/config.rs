//! Pipeline thresholds and weights.
//!
//! Every numeric constant used by layout analysis, keyword matching,
//! extraction and evaluation lives here so experiments can override it from
//! a TOML file without rebuilding.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vertical zone boundaries as fractions of the page height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZoneBounds {
    pub header: f64,
    pub top: f64,
    pub middle: f64,
    pub bottom: f64,
}

impl Default for ZoneBounds {
    fn default() -> Self {
        ZoneBounds {
            header: 0.08,
            top: 0.33,
            middle: 0.66,
            bottom: 0.92,
        }
    }
}

/// Weights used to pick between the right and the bottom candidate blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeighborScore {
    pub expected_data: f64,
    pub other_data: f64,
    pub other_keyword: f64,
}

impl Default for NeighborScore {
    fn default() -> Self {
        NeighborScore {
            expected_data: 2.0,
            other_data: 0.5,
            other_keyword: -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AddressConfidence {
    /// Span contains a country or city label.
    pub strong: f64,
    pub weak: f64,
    /// Added when a location entity overlaps the span.
    pub location_bonus: f64,
}

impl Default for AddressConfidence {
    fn default() -> Self {
        AddressConfidence {
            strong: 0.9,
            weak: 0.6,
            location_bonus: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Word gap threshold, in multiples of the first word's height.
    pub line_gap_factor: f64,
    /// Line gap threshold, in multiples of the previous line's height.
    pub block_gap_factor: f64,
    /// Minimum vertical overlap (fraction of the smaller height) for words on one line.
    pub line_vertical_overlap: f64,
    /// Allowed relative font height difference for words/lines to group.
    pub font_height_tolerance: f64,
    /// Minimum projection overlap for top/bottom/left/right neighbors.
    pub neighbor_overlap: f64,
    pub zones: ZoneBounds,
    pub similarity_common_cost: f64,
    pub similarity_default_cost: f64,
    pub similarity_threshold_ratio: f64,
    pub key_conf_only: f64,
    pub data_conf_only: f64,
    pub partial_match_levenshtein: usize,
    pub min_address_items: usize,
    pub neighbor_score: NeighborScore,
    pub address_confidence: AddressConfidence,
    /// Language assigned when no term dictionary has a hit.
    pub fallback_language: String,
    /// Directory with keyword, gazetteer and rule files; built-in data when absent.
    pub resources_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            line_gap_factor: 1.0,
            block_gap_factor: 2.0,
            line_vertical_overlap: 0.5,
            font_height_tolerance: 0.4,
            neighbor_overlap: 0.2,
            zones: ZoneBounds::default(),
            similarity_common_cost: 0.1,
            similarity_default_cost: 1.0,
            similarity_threshold_ratio: 0.15,
            key_conf_only: 0.7,
            data_conf_only: 0.8,
            partial_match_levenshtein: 2,
            min_address_items: 2,
            neighbor_score: NeighborScore::default(),
            address_confidence: AddressConfidence::default(),
            fallback_language: "en".to_string(),
            resources_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a TOML config; a relative `resources_dir` is resolved against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(dir), Some(parent)) = (cfg.resources_dir.as_ref(), path.parent()) {
            if dir.is_relative() {
                cfg.resources_dir = Some(parent.join(dir));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("line_gap_factor", self.line_gap_factor),
            ("block_gap_factor", self.block_gap_factor),
            ("similarity_common_cost", self.similarity_common_cost),
            ("similarity_default_cost", self.similarity_default_cost),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        let ratios = [
            ("similarity_threshold_ratio", self.similarity_threshold_ratio),
            ("line_vertical_overlap", self.line_vertical_overlap),
            ("font_height_tolerance", self.font_height_tolerance),
            ("neighbor_overlap", self.neighbor_overlap),
            ("key_conf_only", self.key_conf_only),
            ("data_conf_only", self.data_conf_only),
        ];
        for (name, v) in ratios {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1], got {v}")));
            }
        }
        if self.similarity_common_cost >= self.similarity_default_cost {
            return Err(Error::Config(
                "similarity_common_cost must be below similarity_default_cost".into(),
            ));
        }
        let z = &self.zones;
        if !(0.0 < z.header && z.header < z.top && z.top < z.middle && z.middle < z.bottom && z.bottom < 1.0) {
            return Err(Error::Config(format!("zone bounds must increase within (0, 1): {z:?}")));
        }
        let ns = &self.neighbor_score;
        if !(ns.expected_data > ns.other_data && ns.other_data > 0.0 && ns.other_keyword < 0.0) {
            return Err(Error::Config(
                "neighbor score weights must satisfy expected > other > 0 > keyword penalty".into(),
            ));
        }
        if self.min_address_items == 0 {
            return Err(Error::Config("min_address_items must be at least 1".into()));
        }
        Ok(())
    }
}
