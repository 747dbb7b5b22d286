//! Shared document object model.
//!
//! Every pipeline stage reads a [`Document`] and produces an enriched copy.
//! Coordinates are integer pixels in the OCR engine's page space with the
//! origin at the top-left corner.

mod xml;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub left: u32,
    pub top: u32,
    pub width: u32,
    pub height: u32,
}

impl BBox {
    pub fn new(left: u32, top: u32, width: u32, height: u32) -> Result<Self> {
        let b = BBox {
            left,
            top,
            width,
            height,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Invariant(format!(
                "bbox {}x{} at ({}, {}) has zero extent",
                self.width, self.height, self.left, self.top
            )));
        }
        Ok(())
    }

    pub fn right(&self) -> u32 {
        self.left + self.width
    }

    pub fn bottom(&self) -> u32 {
        self.top + self.height
    }

    pub fn center_x(&self) -> f64 {
        self.left as f64 + self.width as f64 / 2.0
    }

    pub fn center_y(&self) -> f64 {
        self.top as f64 + self.height as f64 / 2.0
    }

    pub fn union(&self, other: &BBox) -> BBox {
        let left = self.left.min(other.left);
        let top = self.top.min(other.top);
        let right = self.right().max(other.right());
        let bottom = self.bottom().max(other.bottom());
        BBox {
            left,
            top,
            width: right - left,
            height: bottom - top,
        }
    }

    /// Length of the overlap of the two boxes' vertical extents.
    pub fn vertical_overlap(&self, other: &BBox) -> u32 {
        let lo = self.top.max(other.top);
        let hi = self.bottom().min(other.bottom());
        hi.saturating_sub(lo)
    }

    /// Length of the overlap of the two boxes' horizontal extents.
    pub fn horizontal_overlap(&self, other: &BBox) -> u32 {
        let lo = self.left.max(other.left);
        let hi = self.right().min(other.right());
        hi.saturating_sub(lo)
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.left <= other.left
            && self.top <= other.top
            && self.right() >= other.right()
            && self.bottom() >= other.bottom()
    }

    pub fn union_all<'a>(boxes: impl IntoIterator<Item = &'a BBox>) -> Option<BBox> {
        boxes.into_iter().fold(None, |acc: Option<BBox>, b| match acc {
            None => Some(*b),
            Some(a) => Some(a.union(b)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Style {
    pub font_height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordBox {
    pub text: String,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr_confidence: Option<f64>,
    pub style: Style,
}

impl WordBox {
    /// Builds a word whose font height equals its box height.
    pub fn new(text: impl Into<String>, bbox: BBox, ocr_confidence: Option<f64>) -> Result<Self> {
        let w = WordBox {
            text: text.into(),
            style: Style {
                font_height: bbox.height,
            },
            bbox,
            ocr_confidence,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        if self.text.trim().is_empty() {
            return Err(Error::Invariant("word text is empty".into()));
        }
        if self.text.contains(['\n', '\r']) {
            return Err(Error::Invariant(format!(
                "word text {:?} contains a line break",
                self.text
            )));
        }
        if let Some(c) = self.ocr_confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::Invariant(format!("word confidence {c} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub words: Vec<WordBox>,
    pub bbox: BBox,
    pub text: String,
}

impl Line {
    /// Builds a line from words, sorting them left to right.
    pub fn from_words(mut words: Vec<WordBox>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::Invariant("line has no words".into()));
        }
        words.sort_by_key(|w| w.bbox.left);
        let bbox = BBox::union_all(words.iter().map(|w| &w.bbox)).expect("non-empty");
        let text = join_words(&words);
        Ok(Line { words, bbox, text })
    }

    /// Height of the first (leftmost) word.
    pub fn first_word_height(&self) -> u32 {
        self.words[0].bbox.height
    }

    pub fn font_height(&self) -> f64 {
        let sum: u32 = self.words.iter().map(|w| w.style.font_height).sum();
        sum as f64 / self.words.len() as f64
    }

    pub fn char_count(&self) -> usize {
        self.text.chars().count()
    }

    pub fn avg_char_width(&self) -> f64 {
        let chars: usize = self.words.iter().map(|w| w.text.chars().count()).sum();
        let width: u32 = self.words.iter().map(|w| w.bbox.width).sum();
        width as f64 / chars.max(1) as f64
    }

    fn validate(&self) -> Result<()> {
        if self.words.is_empty() {
            return Err(Error::Invariant("line has no words".into()));
        }
        for w in &self.words {
            w.validate()?;
            if !self.bbox.contains(&w.bbox) {
                return Err(Error::Invariant(format!(
                    "line bbox does not enclose word {:?}",
                    w.text
                )));
            }
        }
        if self.words.windows(2).any(|p| p[0].bbox.left > p[1].bbox.left) {
            return Err(Error::Invariant(format!(
                "words of line {:?} not sorted by left",
                self.text
            )));
        }
        if self.text != join_words(&self.words) {
            return Err(Error::Invariant(format!(
                "line text {:?} differs from its words",
                self.text
            )));
        }
        Ok(())
    }
}

fn join_words(words: &[WordBox]) -> String {
    words
        .iter()
        .map(|w| w.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::schema(stringify!($name), format!("unknown value {other:?}"))),
                }
            }
        }
    };
}

string_enum!(ZoneV {
    Header => "header",
    Top => "top",
    Middle => "middle",
    Bottom => "bottom",
    Footer => "footer",
});

string_enum!(ZoneH {
    Left => "left",
    Right => "right",
});

string_enum!(Direction {
    Top => "top",
    Bottom => "bottom",
    Left => "left",
    Right => "right",
    BottomRight => "bottom_right",
});

string_enum!(AnnotationKind {
    Keyword => "KEYWORD",
    DataType => "DATATYPE",
    Entity => "ENTITY",
    AddressPart => "ADDRESS_PART",
});

string_enum!(BlockType {
    GeneralInfo => "GENERAL_INFO",
    SellerInfo => "SELLER_INFO",
    BuyerInfo => "BUYER_INFO",
    DeliveryInfo => "DELIVERY_INFO",
    BankInfo => "BANK_INFO",
    Title => "TITLE",
    PageNumber => "PAGE_NUMBER",
    Empty => "EMPTY",
});

impl BlockType {
    /// Accepts both `SELLER_INFO` and the human form `seller info`.
    pub fn from_rule_name(name: &str) -> Option<BlockType> {
        let canonical = name.trim().to_uppercase().replace(' ', "_");
        canonical.parse().ok()
    }

    /// Human form used in rule files and feature names, e.g. `seller info`.
    pub fn rule_name(&self) -> String {
        self.as_str().to_lowercase().replace('_', " ")
    }
}

string_enum!(
    /// Party an information block or extracted field belongs to.
    PartyRole {
        Seller => "SELLER",
        Buyer => "BUYER",
        Delivery => "DELIVERY",
        None => "NONE",
    }
);

impl Default for PartyRole {
    fn default() -> Self {
        PartyRole::None
    }
}

string_enum!(
    /// Metadata item types an invoice extraction can produce.
    FieldKind {
        InvoiceNumber => "INVOICE NUMBER",
        OrderNumber => "ORDER NUMBER",
        Swift => "SWIFT",
        AccountNumber => "ACCOUNT NUMBER",
        PageNumber => "PAGE NUMBER",
        InvoiceDate => "INVOICE DATE",
        DueDate => "DUE DATE",
        PaymentDate => "PAYMENT DATE",
        TotalDue => "TOTAL DUE",
        Iban => "IBAN",
        PaymentMethod => "PAYMENT METHOD",
        CompanyName => "COMPANY NAME",
        Contacts => "CONTACTS",
        Address => "ADDRESS",
        VatNumber => "VAT NUMBER",
        Email => "EMAIL",
        Website => "WEBSITE",
        PhoneNumber => "PHONE NUMBER",
        CompanyId => "COMPANY ID",
        AmountPaid => "AMOUNT PAID",
    }
);

impl Default for ZoneV {
    fn default() -> Self {
        ZoneV::Middle
    }
}

impl Default for ZoneH {
    fn default() -> Self {
        ZoneH::Left
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Neighbors {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bottom: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bottom_right: Option<u32>,
}

impl Neighbors {
    pub fn get(&self, dir: Direction) -> Option<u32> {
        match dir {
            Direction::Top => self.top,
            Direction::Bottom => self.bottom,
            Direction::Left => self.left,
            Direction::Right => self.right,
            Direction::BottomRight => self.bottom_right,
        }
    }

    pub fn set(&mut self, dir: Direction, id: Option<u32>) {
        match dir {
            Direction::Top => self.top = id,
            Direction::Bottom => self.bottom = id,
            Direction::Left => self.left = id,
            Direction::Right => self.right = id,
            Direction::BottomRight => self.bottom_right = id,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Direction, u32)> + '_ {
        Direction::ALL
            .iter()
            .filter_map(move |d| self.get(*d).map(|id| (*d, id)))
    }
}

/// Character span (in `char` units, end exclusive) within one line of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn overlaps(&self, other: &Span) -> bool {
        self.line == other.line && self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub kind: AnnotationKind,
    pub label: String,
    pub span: Span,
    pub matched_text: String,
    pub score: f64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: u32,
    pub lines: Vec<Line>,
    pub bbox: BBox,
    #[serde(default)]
    pub zone_v: ZoneV,
    #[serde(default)]
    pub zone_h: ZoneH,
    #[serde(default)]
    pub neighbors: Neighbors,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default)]
    pub block_types: BTreeSet<BlockType>,
    #[serde(default)]
    pub role: PartyRole,
}

impl Block {
    pub fn from_lines(id: u32, lines: Vec<Line>) -> Result<Self> {
        if lines.is_empty() {
            return Err(Error::Invariant(format!("block {id} has no lines")));
        }
        let bbox = BBox::union_all(lines.iter().map(|l| &l.bbox)).expect("non-empty");
        Ok(Block {
            id,
            lines,
            bbox,
            zone_v: ZoneV::default(),
            zone_h: ZoneH::default(),
            neighbors: Neighbors::default(),
            annotations: Vec::new(),
            block_types: BTreeSet::new(),
            role: PartyRole::None,
        })
    }

    pub fn text(&self) -> String {
        self.lines
            .iter()
            .map(|l| l.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn annotations_of(&self, kind: AnnotationKind) -> impl Iterator<Item = &Annotation> {
        self.annotations.iter().filter(move |a| a.kind == kind)
    }

    pub fn has_label(&self, kind: AnnotationKind, label: &str) -> bool {
        self.annotations_of(kind).any(|a| a.label == label)
    }

    /// Text of `span` sliced from the referenced line.
    pub fn span_text(&self, span: &Span) -> Option<String> {
        let line = self.lines.get(span.line)?;
        let len = line.text.chars().count();
        if span.start > span.end || span.end > len {
            return None;
        }
        Some(
            line.text
                .chars()
                .skip(span.start)
                .take(span.end - span.start)
                .collect(),
        )
    }

    fn validate(&self, page_width: u32, page_height: u32) -> Result<()> {
        if self.lines.is_empty() {
            return Err(Error::Invariant(format!("block {} has no lines", self.id)));
        }
        for line in &self.lines {
            line.validate()?;
            if !self.bbox.contains(&line.bbox) {
                return Err(Error::Invariant(format!(
                    "block {} bbox does not enclose line {:?}",
                    self.id, line.text
                )));
            }
        }
        if self.lines.windows(2).any(|p| p[0].bbox.top > p[1].bbox.top) {
            return Err(Error::Invariant(format!(
                "lines of block {} not sorted by top",
                self.id
            )));
        }
        if self.bbox.right() > page_width || self.bbox.bottom() > page_height {
            return Err(Error::Invariant(format!(
                "block {} exceeds page bounds {}x{}",
                self.id, page_width, page_height
            )));
        }
        if self.neighbors.iter().any(|(_, id)| id == self.id) {
            return Err(Error::Invariant(format!("block {} is its own neighbor", self.id)));
        }
        if self.block_types.contains(&BlockType::Empty) && self.block_types.len() > 1 {
            return Err(Error::Invariant(format!(
                "block {} has EMPTY together with other types",
                self.id
            )));
        }
        for a in &self.annotations {
            if !(0.0..=1.0).contains(&a.score) {
                return Err(Error::Invariant(format!(
                    "annotation {} score {} outside [0, 1]",
                    a.label, a.score
                )));
            }
            let sliced = self.span_text(&a.span).ok_or_else(|| {
                Error::Invariant(format!(
                    "annotation {} span {:?} outside block {}",
                    a.label, a.span, self.id
                ))
            })?;
            if normalize_ws(&sliced) != normalize_ws(&a.matched_text) {
                return Err(Error::Invariant(format!(
                    "annotation {} matched text {:?} differs from span text {:?}",
                    a.label, a.matched_text, sliced
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub number: u32,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub blocks: Vec<Block>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_invoice_first_page: Option<bool>,
}

impl Page {
    pub fn new(number: u32, width: u32, height: u32) -> Self {
        Page {
            number,
            width,
            height,
            blocks: Vec::new(),
            is_invoice_first_page: None,
        }
    }

    pub fn block(&self, id: u32) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn neighbor(&self, block: &Block, dir: Direction) -> Option<&Block> {
        block.neighbors.get(dir).and_then(|id| self.block(id))
    }

    pub fn text(&self) -> String {
        self.blocks
            .iter()
            .map(Block::text)
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Invariant(format!("page {} has zero size", self.number)));
        }
        let mut ids = BTreeSet::new();
        for b in &self.blocks {
            if !ids.insert(b.id) {
                return Err(Error::Invariant(format!(
                    "duplicate block id {} on page {}",
                    b.id, self.number
                )));
            }
        }
        for b in &self.blocks {
            b.validate(self.width, self.height)?;
            for (dir, id) in b.neighbors.iter() {
                if !ids.contains(&id) {
                    return Err(Error::Invariant(format!(
                        "block {} {} neighbor {} does not exist on page {}",
                        b.id, dir, id, self.number
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub source_id: String,
    pub main_language: String,
    pub pages: Vec<Page>,
}

impl Document {
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.pages.iter().enumerate() {
            if p.number as usize != i + 1 {
                return Err(Error::Invariant(format!(
                    "page numbers not consecutive: position {} has number {}",
                    i + 1,
                    p.number
                )));
            }
            p.validate()?;
        }
        Ok(())
    }

    pub fn text(&self) -> String {
        self.pages
            .iter()
            .map(Page::text)
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Where an extracted value was read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRef {
    pub page: u32,
    pub block: u32,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedField {
    pub field: FieldKind,
    pub role: PartyRole,
    pub value: String,
    pub key_conf: f64,
    pub data_conf: f64,
    pub combine_conf: f64,
    pub source: SourceRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Xml,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "xml" => Ok(Format::Xml),
            other => Err(Error::Config(format!("unknown document format {other:?}"))),
        }
    }
}

#[derive(Serialize)]
struct DocumentFileRef<'a> {
    schema_version: u32,
    source_id: &'a str,
    main_language: &'a str,
    pages: &'a [Page],
}

#[derive(Deserialize)]
struct DocumentFile {
    schema_version: u32,
    source_id: String,
    main_language: String,
    pages: Vec<Page>,
}

pub fn serialize_document(doc: &Document, format: Format) -> Vec<u8> {
    match format {
        Format::Json => serde_json::to_vec_pretty(&DocumentFileRef {
            schema_version: SCHEMA_VERSION,
            source_id: &doc.source_id,
            main_language: &doc.main_language,
            pages: &doc.pages,
        })
        .expect("document serialization is infallible"),
        Format::Xml => xml::write_document(doc),
    }
}

pub fn deserialize_document(bytes: &[u8], format: Format) -> Result<Document> {
    let doc = match format {
        Format::Json => {
            let de = &mut serde_json::Deserializer::from_slice(bytes);
            let file: DocumentFile = serde_path_to_error::deserialize(de).map_err(|e| {
                let path = e.path().to_string();
                Error::schema(path, e.into_inner().to_string())
            })?;
            if file.schema_version != SCHEMA_VERSION {
                return Err(Error::schema(
                    "schema_version",
                    format!("unsupported version {}", file.schema_version),
                ));
            }
            Document {
                source_id: file.source_id,
                main_language: file.main_language,
                pages: file.pages,
            }
        }
        Format::Xml => xml::read_document(bytes)?,
    };
    doc.validate()?;
    Ok(doc)
}
