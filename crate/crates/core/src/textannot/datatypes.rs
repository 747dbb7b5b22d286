//! Structured data recognition: dates, amounts, identifiers, contacts.

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::checksums::{ico_mod11, iban_mod97, page_number_valid, parse_date, swift_valid, vat_valid};
use super::validate::validate_and_correct;
use crate::docmodel::{Annotation, AnnotationKind, Block, FieldKind, Span};
use crate::error::{Error, Result};

pub const DATATYPE_LABELS: &[&str] = &[
    "DATE",
    "PRICE",
    "NUMBER",
    "VAT NUMBER",
    "IBAN",
    "SWIFT",
    "EMAIL",
    "PHONE",
    "URL",
    "ACCOUNT NUMBER",
    "PAGE NUMBER",
    "COMPANY ID",
];

/// Source form of a data-type recognizer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataTypePattern {
    pub label: String,
    pub pattern: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validator: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Validator {
    Iban,
    Ico,
    Swift,
    Vat,
    Date,
    PageNumber,
    HasDigit,
}

impl Validator {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "iban_mod97" => Validator::Iban,
            "ico_mod11" => Validator::Ico,
            "swift" => Validator::Swift,
            "vat" => Validator::Vat,
            "date" => Validator::Date,
            "page_number" => Validator::PageNumber,
            "has_digit" => Validator::HasDigit,
            _ => return None,
        })
    }

    /// Checks the OCR-repaired form, so look-alike characters do not hide a valid value.
    fn check(self, text: &str) -> bool {
        match self {
            Validator::Iban => iban_mod97(&validate_and_correct(text, FieldKind::Iban).value),
            Validator::Ico => ico_mod11(text),
            Validator::Swift => swift_valid(&validate_and_correct(text, FieldKind::Swift).value),
            Validator::Vat => vat_valid(&validate_and_correct(text, FieldKind::VatNumber).value),
            Validator::Date => parse_date(&validate_and_correct(text, FieldKind::InvoiceDate).value).is_some(),
            Validator::PageNumber => page_number_valid(text),
            Validator::HasDigit => text.chars().any(|c| c.is_ascii_digit()),
        }
    }
}

/// A compiled recognizer.
#[derive(Debug, Clone)]
pub struct CompiledPattern {
    pub label: String,
    regex: Regex,
    anchored: Regex,
    validator: Option<Validator>,
}

impl DataTypePattern {
    pub fn new(label: &str, pattern: &str, validator: Option<&str>) -> Self {
        DataTypePattern {
            label: label.to_string(),
            pattern: pattern.to_string(),
            validator: validator.map(str::to_string),
        }
    }

    pub fn compile(&self) -> Result<CompiledPattern> {
        if !DATATYPE_LABELS.contains(&self.label.as_str()) {
            return Err(Error::Config(format!("unknown data type label {:?}", self.label)));
        }
        let regex = Regex::new(&self.pattern)
            .map_err(|e| Error::Config(format!("pattern for {} does not compile: {e}", self.label)))?;
        let anchored = Regex::new(&format!("^(?:{})$", self.pattern)).expect("anchored form of a valid pattern");
        let validator = match &self.validator {
            None => None,
            Some(name) => Some(
                Validator::from_name(name)
                    .ok_or_else(|| Error::Config(format!("unknown validator {name:?}")))?,
            ),
        };
        Ok(CompiledPattern {
            label: self.label.clone(),
            regex,
            anchored,
            validator,
        })
    }
}

impl CompiledPattern {
    fn accepts(&self, text: &str) -> bool {
        self.validator.is_none_or(|v| v.check(text))
    }

    /// Validated matches as byte ranges. A match failing validation is retried on
    /// its prefixes ending before whitespace, longest first.
    fn find(&self, text: &str) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for m in self.regex.find_iter(text) {
            let s = m.as_str();
            if self.accepts(s) {
                out.push((m.start(), m.end()));
                continue;
            }
            let cuts: Vec<usize> = s
                .char_indices()
                .filter(|(_, c)| c.is_whitespace())
                .map(|(i, _)| i)
                .collect();
            for cut in cuts.into_iter().rev() {
                let prefix = s[..cut].trim_end();
                if !prefix.is_empty() && self.anchored.is_match(prefix) && self.accepts(prefix) {
                    out.push((m.start(), m.start() + prefix.len()));
                    break;
                }
            }
        }
        out
    }
}

const CURRENCY: &str = r"(?:€|\$|£|EUR|USD|GBP|CZK|Kč|Kc)";
const MONTH: &str = r"(?:Jan(?:uary)?|Feb(?:ruary)?|Mar(?:ch)?|Apr(?:il)?|May|June?|July?|Aug(?:ust)?|Sep(?:t(?:ember)?)?|Oct(?:ober)?|Nov(?:ember)?|Dec(?:ember)?)";

/// Default recognizers in priority order: earlier labels claim overlapping text.
pub fn default_patterns() -> Vec<DataTypePattern> {
    let amount = r"\d{1,3}(?:[ ,.\u{a0}]\d{3})+[.,]\d{2}|\d+[.,]\d{2}";
    vec![
        DataTypePattern::new("EMAIL", r"[A-Za-z0-9._%+-]+(?:@|&&|&|©|Q)[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}\b", None),
        DataTypePattern::new("URL", r"(?i)\b(?:https?://[^\s]+|www\.[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)+(?:/[^\s]*)?)", None),
        DataTypePattern::new("IBAN", r"\b[A-Z]{2}[0-9OIl]{2}(?: ?[A-Z0-9]{4}){2,7}(?: ?[A-Z0-9]{1,3})?\b", Some("iban_mod97")),
        DataTypePattern::new(
            "DATE",
            &format!(
                r"(?i)\b(?:\d{{1,2}}\. ?\d{{1,2}}\. ?\d{{4}}|\d{{1,2}}/\d{{1,2}}/\d{{4}}|\d{{4}}-\d{{2}}-\d{{2}}|\d{{1,2}}(?:st|nd|rd|th)? {MONTH}\.?,? \d{{4}}|{MONTH}\.? \d{{1,2}}(?:st|nd|rd|th)?,? \d{{4}})\b"
            ),
            Some("date"),
        ),
        DataTypePattern::new("PHONE", r"(?:\+\d{1,3}[ -]?(?:\(\d{1,4}\)[ -]?)?|\(\d{2,5}\)[ -]?)\d{2,4}(?:[ -]?\d{2,4}){1,4}\b", None),
        DataTypePattern::new("VAT NUMBER", r"\b(?:[A-Z]{2}|[A-Z][0-9]|[0-9][A-Z]) ?[0-9A-Z]{8,12}\b", Some("vat")),
        DataTypePattern::new("SWIFT", r"\b[A-Z0-9]{6}[A-Z0-9]{2}(?:[A-Z0-9]{3})?\b", Some("swift")),
        DataTypePattern::new("ACCOUNT NUMBER", r"\b(?:\d{1,6}-)?\d{2,10}/\d{4}\b", None),
        DataTypePattern::new("COMPANY ID", r"\b\d{8}\b", Some("ico_mod11")),
        DataTypePattern::new("PAGE NUMBER", r"(?i)\b\d{1,2} ?(?:/|of|z|ze) ?\d{1,2}\b", Some("page_number")),
        DataTypePattern::new(
            "PRICE",
            &format!(r"(?:{CURRENCY} ?)?-?\b(?:{amount})\b(?: ?{CURRENCY})?|{CURRENCY} ?\d+\b|\b\d+ ?{CURRENCY}"),
            None,
        ),
        DataTypePattern::new("NUMBER", r"\b[A-Za-z0-9]+(?:[-/][A-Za-z0-9]+)*\b", Some("has_digit")),
    ]
}

pub fn compile_patterns(patterns: &[DataTypePattern]) -> Result<Vec<CompiledPattern>> {
    patterns.iter().map(DataTypePattern::compile).collect()
}

/// Non-overlapping validated matches in one line as (label, char start, char end),
/// earlier patterns taking precedence.
pub fn match_datatypes_in_line(text: &str, patterns: &[CompiledPattern]) -> Vec<(String, usize, usize)> {
    let mut taken: Vec<(String, usize, usize)> = Vec::new();
    for p in patterns {
        for (bs, be) in p.find(text) {
            if taken.iter().all(|(_, s, e)| be <= *s || *e <= bs) {
                taken.push((p.label.clone(), bs, be));
            }
        }
    }
    taken.sort_by_key(|t| t.1);
    taken
        .into_iter()
        .map(|(l, bs, be)| (l, text[..bs].chars().count(), text[..be].chars().count()))
        .collect()
}

/// Adds DATATYPE annotations for every non-overlapping validated match.
pub fn annotate_datatypes(block: &Block, patterns: &[CompiledPattern]) -> Block {
    let mut out = block.clone();
    for (li, line) in block.lines.iter().enumerate() {
        for (label, start, end) in match_datatypes_in_line(&line.text, patterns) {
            let matched: String = line.text.chars().skip(start).take(end - start).collect();
            out.annotations.push(Annotation {
                kind: AnnotationKind::DataType,
                label,
                span: Span { line: li, start, end },
                matched_text: matched,
                score: 1.0,
                source: "datatype".to_string(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(text: &str) -> Vec<(String, String)> {
        let ps = compile_patterns(&default_patterns()).unwrap();
        match_datatypes_in_line(text, &ps)
            .into_iter()
            .map(|(l, s, e)| (l, text.chars().skip(s).take(e - s).collect()))
            .collect()
    }

    fn has(text: &str, label: &str, value: &str) -> bool {
        labels(text).iter().any(|(l, v)| l == label && v == value)
    }

    #[test]
    fn spec_examples() {
        assert!(has("CZ00176150", "VAT NUMBER", "CZ00176150"));
        assert!(has("GB82WEST12345698765432", "IBAN", "GB82WEST12345698765432"));
        assert!(labels("hello").is_empty());
    }

    #[test]
    fn dates() {
        for d in ["1.3.2021", "31.03.2021", "2021-03-31", "31 March 2021", "March 31, 2021", "12/03/2021"] {
            assert!(has(&format!("Date: {d}"), "DATE", d), "{d}");
        }
        assert!(!labels("31.02.2021").iter().any(|(l, _)| l == "DATE"));
    }

    #[test]
    fn prices_in_both_locales() {
        for p in ["1,234.50", "1 234,50", "1.234,50", "EUR 1,234.50", "€1,234.50", "1 234,50 Kč", "12.00"] {
            assert!(has(&format!("Total {p}"), "PRICE", p), "{p}");
        }
    }

    #[test]
    fn identifiers() {
        assert!(has("IBAN: CZ65 0800 0000 1920 0014 5399 BIC", "IBAN", "CZ65 0800 0000 1920 0014 5399"));
        assert!(has("SWIFT: GIBACZPX", "SWIFT", "GIBACZPX"));
        assert!(has("ID 25596641", "COMPANY ID", "25596641"));
        assert!(has("Account 19-2000145399/0800", "ACCOUNT NUMBER", "19-2000145399/0800"));
        assert!(has("info@example.com", "EMAIL", "info@example.com"));
        assert!(has("www.example.com", "URL", "www.example.com"));
        assert!(has("Tel: +420 541 212 111", "PHONE", "+420 541 212 111"));
        assert!(has("Page 1 of 2", "PAGE NUMBER", "1 of 2"));
        assert!(has("Invoice 2021-0045", "NUMBER", "2021-0045"));
        assert!(has("C200176150", "VAT NUMBER", "C200176150"));
    }

    #[test]
    fn bad_patterns_rejected() {
        assert!(DataTypePattern::new("DATE", "(", None).compile().is_err());
        assert!(DataTypePattern::new("DATE", "x", Some("nope")).compile().is_err());
        assert!(DataTypePattern::new("COLOR", "x", None).compile().is_err());
    }
}
