//! Physical layout reconstruction, annotation and confidence-scored metadata
//! extraction for OCR-scanned invoices.

pub mod config;
pub mod docmodel;
pub mod entities;
pub mod error;
pub mod evalharness;
pub mod extract;
pub mod ingest;
pub mod layout;
pub mod pageclassify;
pub mod pipeline;
pub mod ruleengine;
pub mod textannot;

pub use config::PipelineConfig;
pub use error::{Error, Result};
