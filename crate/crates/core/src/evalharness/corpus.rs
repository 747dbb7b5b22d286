//! Synthetic invoices: layout templates filled with seeded random values,
//! rendered to word boxes and optionally corrupted with OCR-style noise.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GoldItem, GoldRecord};
use crate::docmodel::{BBox, FieldKind, PartyRole, WordBox};
use crate::error::{Error, Result};
use crate::ingest::OcrPage;
use crate::textannot::ConfusionTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateBlock {
    pub x: u32,
    pub y: u32,
    /// Text lines with `{placeholder}` fields.
    pub lines: Vec<String>,
    /// Font height in pixels; the template default when absent.
    #[serde(default)]
    pub font: Option<u32>,
}

/// Page layout with placeholders. `continuation` blocks, when present, form an
/// optional second page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub name: String,
    pub language: String,
    pub width: u32,
    pub height: u32,
    pub font: u32,
    pub blocks: Vec<TemplateBlock>,
    #[serde(default)]
    pub continuation: Vec<TemplateBlock>,
}

impl Template {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        serde_path_to_error::deserialize(de).map_err(|e| Error::schema(e.path().to_string(), e.inner().to_string()))
    }
}

/// Every `*.json` file of `dir`, sorted by file name.
pub fn load_templates(dir: &Path) -> Result<Vec<Template>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::Config(format!("cannot list templates in {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p)?;
            Template::from_json(&bytes).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        })
        .collect()
}

/// OCR error inventory: confusable-character swaps, `@` misreads, dropped
/// punctuation and doubled digits. Each probability applies per character.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub char_substitution: f64,
    pub punctuation_drop: f64,
    pub digit_duplication: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            char_substitution: 0.0,
            punctuation_drop: 0.0,
            digit_duplication: 0.0,
        }
    }

    /// `rate` character noise with the other error kinds at a quarter of it.
    pub fn with_rate(rate: f64) -> Self {
        NoiseModel {
            char_substitution: rate,
            punctuation_drop: rate / 4.0,
            digit_duplication: rate / 4.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in [self.char_substitution, self.punctuation_drop, self.digit_duplication] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("noise probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.char_substitution == 0.0 && self.punctuation_drop == 0.0 && self.digit_duplication == 0.0
    }

    /// Corrupts one word. The result is never empty.
    pub fn apply(&self, word: &str, table: &ConfusionTable, rng: &mut impl Rng) -> String {
        if self.is_zero() {
            return word.to_string();
        }
        let mut out = String::new();
        for c in word.chars() {
            if c == '@' && rng.random_bool(self.char_substitution) {
                out.push_str(["©", "&&", "&", "Q"].choose(rng).expect("non-empty"));
                continue;
            }
            if c.is_ascii_punctuation() && c != '@' && rng.random_bool(self.punctuation_drop) {
                continue;
            }
            if rng.random_bool(self.char_substitution) {
                if c == 'm' {
                    out.push_str("rn");
                    continue;
                }
                let partners = table.partners(c);
                if let Some(p) = partners.choose(rng) {
                    let p = if c.is_uppercase() { p.to_uppercase().next().unwrap_or(*p) } else { *p };
                    out.push(p);
                    continue;
                }
            }
            out.push(c);
            if c.is_ascii_digit() && rng.random_bool(self.digit_duplication) {
                out.push(c);
            }
        }
        if out.is_empty() {
            word.to_string()
        } else {
            out
        }
    }
}

/// One generated invoice: OCR pages, clean gold values and the template used.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInvoice {
    pub source_id: String,
    pub template: String,
    pub language: String,
    pub pages: Vec<OcrPage>,
    pub gold: GoldRecord,
}

// ---------------------------------------------------------------- value pools

struct Pools {
    company_stems: &'static [&'static str],
    legal_forms: &'static [&'static str],
    streets: &'static [&'static str],
    street_kinds: &'static [&'static str],
    places: &'static [(&'static str, &'static str)],
    country: &'static str,
    first_names: &'static [&'static str],
    surnames: &'static [&'static str],
    tld: &'static str,
    phone_prefix: &'static str,
    vat_prefix: &'static str,
    iban_country: &'static str,
    swifts: &'static [&'static str],
    payment_methods: &'static [&'static str],
    currencies: &'static [&'static str],
}

const EN: Pools = Pools {
    company_stems: &[
        "Northwind Traders", "Contoso", "Fabrikam", "Globex", "Initech", "Acme Tools", "Blue Harbor",
        "Silverline Media", "Redwood Logistics", "Brightstone Analytics",
    ],
    legal_forms: &["Ltd", "Pty Ltd", "Inc.", "LLC", "Limited", "plc"],
    streets: &["Baker", "Elm", "Oakwood", "Mill", "Church", "Highfield", "Station", "Victoria"],
    street_kinds: &["Street", "Road", "Avenue", "Lane"],
    places: &[
        ("London", "EC1A 1BB"),
        ("Manchester", "M1 1AE"),
        ("Leeds", "LS1 4DY"),
        ("Bristol", "BS1 5TR"),
        ("Glasgow", "G1 2FF"),
    ],
    country: "United Kingdom",
    first_names: &["John", "Mary", "Robert", "Susan", "David", "Linda", "Thomas", "Karen"],
    surnames: &["Smith", "Johnson", "Walker", "Wright", "Robinson", "Thompson", "Hughes"],
    tld: "co.uk",
    phone_prefix: "+44",
    vat_prefix: "GB",
    iban_country: "GB",
    swifts: &["NWBKGB2L", "BARCGB22", "LOYDGB2L", "HBUKGB4B"],
    payment_methods: &["Bank transfer", "Credit card", "Direct debit"],
    currencies: &["EUR", "GBP", "£"],
};

const CS: Pools = Pools {
    company_stems: &[
        "Konica Minolta Business Solution Czech", "Hotel Continental", "Stavby Morava", "Elektro Servis",
        "Moravské Tiskárny", "Pekárna Vltava", "Strojírny Hranice", "Datová Centra",
    ],
    legal_forms: &["s.r.o.", "a.s.", "spol. s r.o.", "v.o.s."],
    streets: &["Mahenova", "Zarosicka", "Lidická", "Palackého", "Masarykova", "Husova", "Nádražní", "Kounicova"],
    street_kinds: &[],
    places: &[
        ("Brno", "628 00"),
        ("Praha", "110 00"),
        ("Olomouc", "779 00"),
        ("Ostrava", "702 00"),
        ("Plzeň", "301 00"),
        ("Zlín", "760 01"),
    ],
    country: "Česká republika",
    first_names: &["Petr", "Jana", "Tomáš", "Eva", "Martin", "Lucie", "Jan", "Hana"],
    surnames: &["Novák", "Svoboda", "Dvořák", "Černý", "Procházka", "Kučera", "Veselý"],
    tld: "cz",
    phone_prefix: "+420",
    vat_prefix: "CZ",
    iban_country: "CZ",
    swifts: &["GIBACZPX", "KOMBCZPP", "CEKOCZPP", "RZBCCZPP"],
    payment_methods: &["Převodem", "Bankovní převod", "Hotově"],
    currencies: &["Kč", "CZK"],
};

fn digits(rng: &mut impl Rng, n: usize) -> String {
    (0..n).map(|_| char::from(b'0' + rng.random_range(0..10u8))).collect()
}

fn mod97(s: &str) -> u32 {
    s.chars().fold(0u32, |rem, c| {
        let v = c.to_digit(36).expect("alphanumeric");
        if v < 10 {
            (rem * 10 + v) % 97
        } else {
            (rem * 100 + v) % 97
        }
    })
}

fn iban(country: &str, bban: &str) -> String {
    let check = 98 - mod97(&format!("{bban}{country}00"));
    let raw = format!("{country}{check:02}{bban}");
    raw.chars()
        .collect::<Vec<_>>()
        .chunks(4)
        .map(|c| c.iter().collect::<String>())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Valid company id: seven digits plus the mod-11 check digit.
fn company_id(rng: &mut impl Rng) -> String {
    loop {
        let body = digits(rng, 7);
        if body.starts_with('0') {
            continue;
        }
        let sum: u32 = body.chars().zip((2..=8).rev()).map(|(c, w)| c.to_digit(10).unwrap() * w).sum();
        return format!("{body}{}", (11 - sum % 11) % 10);
    }
}

fn group_thousands(n: u64, sep: &str) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push_str(sep);
        }
        out.push(c);
    }
    out
}

const MONTHS: &[&str] = &[
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October", "November",
    "December",
];

struct Date {
    y: i32,
    m: u32,
    d: u32,
}

fn date_text(lang: &str, style: usize, dt: &Date) -> String {
    match (lang, style % 3) {
        ("cs", 0) | ("cs", 2) => format!("{:02}.{:02}.{}", dt.d, dt.m, dt.y),
        ("cs", _) => format!("{}. {}. {}", dt.d, dt.m, dt.y),
        (_, 0) => format!("{} {} {}", dt.d, MONTHS[dt.m as usize - 1], dt.y),
        (_, 1) => format!("{} {}, {}", MONTHS[dt.m as usize - 1], dt.d, dt.y),
        _ => format!("{}-{:02}-{:02}", dt.y, dt.m, dt.d),
    }
}

fn price_text(lang: &str, rng: &mut impl Rng, amount_cents: u64, pools: &Pools) -> String {
    let cur = *pools.currencies.choose(rng).expect("currencies");
    let whole = amount_cents / 100;
    let cents = amount_cents % 100;
    if lang == "cs" {
        format!("{},{cents:02} {cur}", group_thousands(whole, " "))
    } else if cur == "£" {
        format!("£{}.{cents:02}", group_thousands(whole, ","))
    } else {
        format!("{cur} {}.{cents:02}", group_thousands(whole, ","))
    }
}

/// Placeholder values for one invoice.
fn invoice_values(lang: &str, rng: &mut ChaCha8Rng) -> BTreeMap<String, String> {
    let p = if lang == "cs" { &CS } else { &EN };
    let mut v = BTreeMap::new();
    let year = rng.random_range(2019..=2023);
    let month = rng.random_range(1..=11u32);
    let day = rng.random_range(1..=20u32);
    let style = rng.random_range(0..3usize);
    let issued = Date { y: year, m: month, d: day };
    let due = Date { y: year, m: month + 1, d: day + rng.random_range(0..8) };
    let paid = Date { y: year, m: month + 1, d: day + rng.random_range(0..8) };
    v.insert("invoice_date".into(), date_text(lang, style, &issued));
    v.insert("due_date".into(), date_text(lang, style, &due));
    v.insert("payment_date".into(), date_text(lang, style, &paid));
    let n = digits(rng, 4);
    let invoice_number = if lang == "cs" {
        format!("FV{year}{n}")
    } else {
        format!("INV-{year}-{n}")
    };
    v.insert("invoice_number".into(), invoice_number);
    v.insert(
        "order_number".into(),
        if lang == "cs" { format!("OBJ-{}", digits(rng, 5)) } else { format!("PO-{}", digits(rng, 5)) },
    );
    let total = rng.random_range(10_000..5_000_000u64);
    v.insert("total_due".into(), price_text(lang, rng, total, p));
    v.insert("amount_paid".into(), price_text(lang, rng, total, p));
    v.insert("payment_method".into(), p.payment_methods.choose(rng).expect("methods").to_string());
    let (bban, account) = if lang == "cs" {
        let bank = ["0800", "0100", "0300", "5500"].choose(rng).expect("banks").to_string();
        let prefix = format!("{}", rng.random_range(10..100));
        let number = digits(rng, 10);
        (format!("{bank}{:0>6}{number}", prefix), format!("{prefix}-{number}/{bank}"))
    } else {
        let bank = ["NWBK", "BARC", "LOYD", "HBUK"].choose(rng).expect("banks").to_string();
        (format!("{bank}{}", digits(rng, 14)), String::new())
    };
    v.insert("iban".into(), iban(p.iban_country, &bban));
    v.insert("account_number".into(), account);
    v.insert("swift".into(), p.swifts.choose(rng).expect("swifts").to_string());
    v.insert("item_price".into(), price_text(lang, rng, total / 2, p));

    let mut stems: Vec<&str> = p.company_stems.to_vec();
    for role in ["seller", "buyer", "delivery"] {
        let i = rng.random_range(0..stems.len());
        let stem = stems.remove(i);
        let company = format!("{stem} {}", p.legal_forms.choose(rng).expect("forms"));
        let domain = format!(
            "{}.{}",
            stem.split_whitespace().next().expect("stem").to_lowercase().replace(
                |c: char| !c.is_ascii_alphanumeric(),
                ""
            ),
            p.tld
        );
        let street = if p.street_kinds.is_empty() {
            let name = p.streets.choose(rng).expect("streets");
            if rng.random_bool(0.5) {
                format!("{name} {}", rng.random_range(1..200))
            } else {
                format!("{name} {}/{}", rng.random_range(100..5000), rng.random_range(1..40))
            }
        } else {
            format!(
                "{} {} {}",
                rng.random_range(1..400),
                p.streets.choose(rng).expect("streets"),
                p.street_kinds.choose(rng).expect("kinds")
            )
        };
        let (city, postcode) = *p.places.choose(rng).expect("places");
        let city_line = if lang == "cs" { format!("{postcode} {city}") } else { format!("{city} {postcode}") };
        let ico = company_id(rng);
        let vat = if lang == "cs" { format!("{}{ico}", p.vat_prefix) } else { format!("{}{}", p.vat_prefix, digits(rng, 9)) };
        let phone = if lang == "cs" {
            format!("{} {} {} {}", p.phone_prefix, digits(rng, 3), digits(rng, 3), digits(rng, 3))
        } else {
            format!("{} 20 {} {}", p.phone_prefix, digits(rng, 4), digits(rng, 4))
        };
        let contact = format!(
            "{} {}",
            p.first_names.choose(rng).expect("names"),
            p.surnames.choose(rng).expect("surnames")
        );
        let fields = [
            ("company", company),
            ("street", street),
            ("city_line", city_line),
            ("country", p.country.to_string()),
            ("vat", vat),
            ("company_id", ico),
            ("email", format!("billing@{domain}")),
            ("phone", phone),
            ("website", format!("www.{domain}")),
            ("contact", contact),
        ];
        for (k, val) in fields {
            v.insert(format!("{role}.{k}"), val);
        }
    }
    v
}

/// Gold field for a placeholder; `None` for decorative ones.
fn placeholder_field(name: &str) -> Option<(FieldKind, PartyRole)> {
    use FieldKind::*;
    let (role, key) = match name.split_once('.') {
        Some(("seller", k)) => (PartyRole::Seller, k),
        Some(("buyer", k)) => (PartyRole::Buyer, k),
        Some(("delivery", k)) => (PartyRole::Delivery, k),
        Some(_) => return None,
        None => (PartyRole::None, name),
    };
    let field = match (role, key) {
        (PartyRole::None, "invoice_number") => InvoiceNumber,
        (PartyRole::None, "order_number") => OrderNumber,
        (PartyRole::None, "invoice_date") => InvoiceDate,
        (PartyRole::None, "due_date") => DueDate,
        (PartyRole::None, "payment_date") => PaymentDate,
        (PartyRole::None, "total_due") => TotalDue,
        (PartyRole::None, "amount_paid") => AmountPaid,
        (PartyRole::None, "payment_method") => PaymentMethod,
        (PartyRole::None, "iban") => Iban,
        (PartyRole::None, "swift") => Swift,
        (PartyRole::None, "account_number") => AccountNumber,
        (PartyRole::None, "page_number") => PageNumber,
        (PartyRole::None, _) => return None,
        (_, "company") => CompanyName,
        (_, "street") | (_, "city_line") | (_, "country") => Address,
        (_, "vat") => VatNumber,
        (_, "company_id") => CompanyId,
        (_, "email") => Email,
        (_, "phone") => PhoneNumber,
        (_, "website") => Website,
        (_, "contact") => Contacts,
        _ => return None,
    };
    Some((field, role))
}

fn placeholders(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = line;
    while let Some(i) = rest.find('{') {
        let Some(j) = rest[i..].find('}') else { break };
        out.push(rest[i + 1..i + j].to_string());
        rest = &rest[i + j + 1..];
    }
    out
}

fn fill(line: &str, values: &BTreeMap<String, String>) -> Result<String> {
    let mut out = line.to_string();
    for name in placeholders(line) {
        let v = values
            .get(&name)
            .ok_or_else(|| Error::Config(format!("unknown template placeholder {{{name}}}")))?;
        out = out.replace(&format!("{{{name}}}"), v);
    }
    Ok(out)
}

/// Gold items for the placeholders a template uses; address parts join in
/// street, city line, country order.
fn gold_items(blocks: &[TemplateBlock], values: &BTreeMap<String, String>) -> Vec<GoldItem> {
    let mut used: Vec<String> = Vec::new();
    for b in blocks {
        for l in &b.lines {
            for p in placeholders(l) {
                if !used.contains(&p) {
                    used.push(p);
                }
            }
        }
    }
    let mut items: Vec<GoldItem> = Vec::new();
    for name in &used {
        let Some((field, role)) = placeholder_field(name) else { continue };
        if field == FieldKind::Address || items.iter().any(|g| g.field == field && g.role == role) {
            continue;
        }
        items.push(GoldItem {
            field,
            role,
            value: values[name].clone(),
        });
    }
    for role in ["seller", "buyer", "delivery"] {
        let parts: Vec<String> = ["street", "city_line", "country"]
            .iter()
            .map(|k| format!("{role}.{k}"))
            .filter(|k| used.contains(k))
            .map(|k| values[&k].clone())
            .collect();
        if !parts.is_empty() {
            let (_, r) = placeholder_field(&format!("{role}.street")).expect("role placeholder");
            items.push(GoldItem {
                field: FieldKind::Address,
                role: r,
                value: parts.join(", "),
            });
        }
    }
    items.sort_by(|a, b| (a.role, a.field).cmp(&(b.role, b.field)));
    items
}

/// Word boxes for the filled blocks. Character width is 0.55 of the font
/// height, word gaps 0.35 and line pitch 1.4 of it.
fn render(
    blocks: &[TemplateBlock],
    default_font: u32,
    values: &BTreeMap<String, String>,
    noise: &NoiseModel,
    table: &ConfusionTable,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<WordBox>> {
    let mut words = Vec::new();
    for b in blocks {
        let font = b.font.unwrap_or(default_font);
        let char_w = font as f64 * 0.55;
        let gap = (font as f64 * 0.35).round() as u32;
        let pitch = (font as f64 * 1.4).round() as u32;
        for (li, raw) in b.lines.iter().enumerate() {
            let text = fill(raw, values)?;
            let top = b.y + li as u32 * pitch;
            let mut x = b.x;
            for w in text.split_whitespace() {
                let width = ((w.chars().count() as f64 * char_w).round() as u32).max(1);
                let noisy = noise.apply(w, table, rng);
                let bbox = BBox::new(x, top, width, font)?;
                words.push(WordBox::new(noisy, bbox, Some(0.96))?);
                x += width + gap;
            }
        }
    }
    Ok(words)
}

/// Invoice `index` of a corpus: its own generator seeded from `(seed, index)`,
/// so invoices are independent of each other and of thread scheduling.
pub fn generate_invoice(
    index: usize,
    template: &Template,
    noise: &NoiseModel,
    table: &ConfusionTable,
    seed: u64,
) -> Result<GeneratedInvoice> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut values = invoice_values(&template.language, &mut rng);
    let two_pages = !template.continuation.is_empty() && rng.random_bool(0.5);
    let total = if two_pages { 2 } else { 1 };
    let page_label = |n: u32| {
        if template.language == "cs" {
            format!("{n}/{total}")
        } else {
            format!("{n} of {total}")
        }
    };
    values.insert("page_number".into(), page_label(1));
    values.insert("page_number_next".into(), page_label(2));
    let source_id = format!("inv_{index:04}");
    let mut pages = vec![OcrPage {
        number: 1,
        width: template.width,
        height: template.height,
        words: render(&template.blocks, template.font, &values, noise, table, &mut rng)?,
    }];
    if two_pages {
        pages.push(OcrPage {
            number: 2,
            width: template.width,
            height: template.height,
            words: render(&template.continuation, template.font, &values, noise, table, &mut rng)?,
        });
    }
    Ok(GeneratedInvoice {
        gold: GoldRecord {
            source_id: source_id.clone(),
            items: gold_items(&template.blocks, &values),
        },
        source_id,
        template: template.name.clone(),
        language: template.language.clone(),
        pages,
    })
}

/// `n` invoices cycling through the templates.
pub fn generate_corpus(
    n: usize,
    templates: &[Template],
    noise: &NoiseModel,
    table: &ConfusionTable,
    seed: u64,
) -> Result<Vec<GeneratedInvoice>> {
    if templates.is_empty() {
        return Err(Error::Config("no corpus templates".into()));
    }
    noise.validate()?;
    (0..n)
        .into_par_iter()
        .map(|i| generate_invoice(i, &templates[i % templates.len()], noise, table, seed))
        .collect()
}
