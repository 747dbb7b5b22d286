//! Keyword and data-type annotation of block lines, plus OCR repair of values.

pub mod checksums;
pub mod datatypes;
pub mod distance;
pub mod keywords;
pub mod validate;

pub use checksums::{ico_mod11, iban_mod97};
pub use datatypes::{annotate_datatypes, compile_patterns, default_patterns, CompiledPattern, DataTypePattern};
pub use distance::{find_keyword_similar, weighted_edit_distance, ConfusionTable, SimilarMatch};
pub use keywords::{annotate_keywords, KeywordPhrase, KeywordSet, MatchMode};
pub use validate::{validate_and_correct, Corrected, Correction};
