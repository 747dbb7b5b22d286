//! Field-specific OCR repair of extracted values.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::checksums::vat_digits_only;
use crate::docmodel::FieldKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub rule: String,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corrected {
    pub value: String,
    pub log: Vec<Correction>,
}

/// Legal-form suffixes in canonical spelling.
pub const LEGAL_FORMS: &[&str] = &[
    "s.r.o.", "spol. s r.o.", "a.s.", "v.o.s.", "k.s.", "z.s.", "Ltd.", "Ltd", "Limited", "Inc.", "Inc", "GmbH",
    "B.V.", "N.V.", "Pty", "LLC", "plc", "AG", "SE", "S.A.", "Corp.", "Co.",
];

fn letter_to_digit(c: char) -> Option<char> {
    match c {
        'O' | 'o' => Some('0'),
        'I' | 'l' | 'i' | '|' => Some('1'),
        'S' | 's' => Some('5'),
        'B' => Some('8'),
        'Z' | 'z' => Some('2'),
        _ => None,
    }
}

fn digit_to_letter(c: char) -> Option<char> {
    match c {
        '0' => Some('O'),
        '1' => Some('I'),
        '5' => Some('S'),
        '8' => Some('B'),
        '2' => Some('Z'),
        _ => None,
    }
}

/// Lowercased, dots and digit confusions folded: the comparison key for legal forms.
pub(crate) fn legal_form_key(token: &str) -> String {
    token
        .chars()
        .filter(|c| *c != '.' && *c != ',')
        .map(|c| match c {
            '0' => 'o',
            '1' => 'l',
            '5' => 's',
            _ => c.to_ascii_lowercase(),
        })
        .collect()
}

pub fn is_legal_form(token: &str) -> bool {
    let key = legal_form_key(token);
    !key.is_empty() && LEGAL_FORMS.iter().any(|f| legal_form_key(f) == key)
}

struct Log<'a> {
    log: &'a mut Vec<Correction>,
}

impl Log<'_> {
    fn apply(&mut self, rule: &str, value: &mut String, new: String) {
        if *value != new {
            self.log.push(Correction {
                rule: rule.to_string(),
                before: value.clone(),
                after: new.clone(),
            });
            *value = new;
        }
    }
}

/// Tokens holding a digit whose other characters are all digit look-alikes are
/// constrained to digits and get their look-alikes replaced.
fn fix_numeric_tokens(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    let mut token = String::new();
    let flush = |token: &mut String, out: &mut String| {
        let has_digit = token.chars().any(|c| c.is_ascii_digit());
        let all_mappable = token.chars().all(|c| c.is_ascii_digit() || letter_to_digit(c).is_some());
        if has_digit && all_mappable {
            out.extend(token.chars().map(|c| letter_to_digit(c).unwrap_or(c)));
        } else {
            out.push_str(token);
        }
        token.clear();
    };
    for c in value.chars() {
        if c.is_alphanumeric() || c == '|' {
            token.push(c);
        } else {
            flush(&mut token, &mut out);
            out.push(c);
        }
    }
    flush(&mut token, &mut out);
    out
}

fn email_separator() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^([A-Za-z0-9._%+-]+?)(?:&&|&|©|Q|\(at\))([A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,})$")
            .expect("email repair pattern")
    })
}

fn correct_vat(value: &mut String, log: &mut Log) {
    let compact: String = value.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_uppercase();
    log.apply("vat-normalize", value, compact);
    let chars: Vec<char> = value.chars().collect();
    if chars.len() < 3 {
        return;
    }
    let prefix: String = chars[..2].iter().map(|c| digit_to_letter(*c).unwrap_or(*c)).collect();
    if vat_digits_only(&prefix).is_none() {
        return;
    }
    let fixed: String = prefix.chars().chain(chars[2..].iter().copied()).collect();
    log.apply("vat-prefix", value, fixed);
    if vat_digits_only(&prefix) == Some(true) {
        let rest: String = value.chars().skip(2).map(|c| letter_to_digit(c).unwrap_or(c)).collect();
        log.apply("vat-digits", value, format!("{prefix}{rest}"));
    }
}

/// IBAN countries whose national part is all digits.
const NUMERIC_IBAN: &[&str] = &[
    "AT", "BE", "CZ", "DE", "DK", "EE", "ES", "FI", "HR", "HU", "LT", "LU", "PL", "PT", "SE", "SI", "SK", "NO",
];

fn correct_iban(value: &mut String, log: &mut Log) {
    let upper = value.to_uppercase();
    log.apply("iban-case", value, upper);
    let mut pos = 0;
    let mut country = String::new();
    let fixed: String = value
        .chars()
        .map(|c| {
            if c.is_whitespace() {
                return c;
            }
            let out = match pos {
                0 | 1 => digit_to_letter(c).unwrap_or(c),
                _ => c,
            };
            if pos < 2 {
                country.push(out);
            }
            let out = if pos >= 2 && (pos < 4 || NUMERIC_IBAN.contains(&country.as_str())) {
                letter_to_digit(out).unwrap_or(out)
            } else {
                out
            };
            pos += 1;
            out
        })
        .collect();
    log.apply("iban-positions", value, fixed);
}

fn correct_swift(value: &mut String, log: &mut Log) {
    let upper = value.trim().to_uppercase();
    log.apply("swift-case", value, upper);
    let fixed: String = value
        .chars()
        .enumerate()
        .map(|(i, c)| if i < 6 { digit_to_letter(c).unwrap_or(c) } else { c })
        .collect();
    log.apply("swift-letters", value, fixed);
}

fn correct_company_name(value: &mut String, log: &mut Log) {
    let tokens: Vec<&str> = value.split(' ').collect();
    let fixed: Vec<String> = tokens
        .iter()
        .map(|t| {
            let key = legal_form_key(t);
            match LEGAL_FORMS.iter().find(|f| legal_form_key(f) == key) {
                Some(canon) if !key.is_empty() && !t.eq_ignore_ascii_case(canon) && t.contains(|c: char| c == '.' || c.is_ascii_digit()) => {
                    canon.to_string()
                }
                _ => t.to_string(),
            }
        })
        .collect();
    log.apply("legal-form", value, fixed.join(" "));
}

/// Applies the field's repair rules. Returns the value unchanged when no rule
/// applies; every applied rule is logged. Idempotent.
pub fn validate_and_correct(value: &str, field: FieldKind) -> Corrected {
    let mut log_entries = Vec::new();
    let mut log = Log { log: &mut log_entries };
    let mut v = value.trim().to_string();
    match field {
        FieldKind::VatNumber => correct_vat(&mut v, &mut log),
        FieldKind::Email => {
            if !v.contains('@') {
                if let Some(c) = email_separator().captures(&v) {
                    let fixed = format!("{}@{}", &c[1], &c[2]);
                    log.apply("email-at", &mut v, fixed);
                }
            }
        }
        FieldKind::Iban => correct_iban(&mut v, &mut log),
        FieldKind::Swift => correct_swift(&mut v, &mut log),
        FieldKind::InvoiceDate
        | FieldKind::DueDate
        | FieldKind::PaymentDate
        | FieldKind::PhoneNumber
        | FieldKind::AccountNumber
        | FieldKind::CompanyId
        | FieldKind::TotalDue
        | FieldKind::AmountPaid
        | FieldKind::PageNumber => {
            let fixed = fix_numeric_tokens(&v);
            log.apply("digit-lookalikes", &mut v, fixed);
        }
        FieldKind::InvoiceNumber | FieldKind::OrderNumber => {
            let has_digit = v.chars().any(|c| c.is_ascii_digit());
            let has_letter = v.chars().any(|c| c.is_alphabetic());
            let confusable = v.chars().any(|c| matches!(c, 'O' | 'o' | '0' | 'l' | 'I' | '1'));
            if has_digit && has_letter && confusable {
                log.log.push(Correction {
                    rule: "ambiguous-code".to_string(),
                    before: v.clone(),
                    after: v.clone(),
                });
            }
        }
        FieldKind::CompanyName => correct_company_name(&mut v, &mut log),
        FieldKind::Address | FieldKind::Contacts | FieldKind::Website | FieldKind::PaymentMethod => {}
    }
    Corrected { value: v, log: log_entries }
}
