//! Confidence-scored extraction of invoice fields from an annotated document.
//!
//! Each field is located through its keyword, then read from the same line,
//! from the better-scoring right or lower neighbor block, or, for structured
//! values, straight from a data-type match anywhere in the document.

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::docmodel::{
    Annotation, AnnotationKind, BBox, Block, BlockType, Direction, Document, ExtractedField, FieldKind, Line, Page,
    PartyRole, SourceRef,
};
use crate::entities::AddressLabel;
use crate::ruleengine::reading_order;
use crate::textannot::validate_and_correct;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Category {
    Date,
    Price,
    Number,
    General,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub field: FieldKind,
    /// Keyword labels that introduce the field.
    pub keywords: Vec<String>,
    /// Data-type label of the value; `None` for free-text fields.
    pub data_label: Option<String>,
    pub category: Category,
    /// False for structured values that can be found without a keyword.
    pub keyword_required: bool,
}

impl FieldSpec {
    pub fn new(field: FieldKind, keyword: &str, data_label: Option<&str>, keyword_required: bool) -> Self {
        let category = match data_label {
            Some("DATE") => Category::Date,
            Some("PRICE") => Category::Price,
            Some(_) => Category::Number,
            None => Category::General,
        };
        FieldSpec {
            field,
            keywords: vec![keyword.to_string()],
            data_label: data_label.map(str::to_string),
            category,
            keyword_required,
        }
    }
}

/// Specs for the document-level fields; party details come from role groups.
pub fn default_field_specs() -> Vec<FieldSpec> {
    use FieldKind::*;
    vec![
        FieldSpec::new(InvoiceNumber, "INVOICE NUMBER", Some("NUMBER"), true),
        FieldSpec::new(OrderNumber, "ORDER NUMBER", Some("NUMBER"), true),
        FieldSpec::new(InvoiceDate, "INVOICE DATE", Some("DATE"), true),
        FieldSpec::new(DueDate, "DUE DATE", Some("DATE"), true),
        FieldSpec::new(PaymentDate, "PAYMENT DATE", Some("DATE"), true),
        FieldSpec::new(TotalDue, "TOTAL DUE", Some("PRICE"), true),
        FieldSpec::new(AmountPaid, "AMOUNT PAID", Some("PRICE"), true),
        FieldSpec::new(PaymentMethod, "PAYMENT METHOD", None, true),
        FieldSpec::new(Iban, "IBAN", Some("IBAN"), false),
        FieldSpec::new(Swift, "SWIFT", Some("SWIFT"), false),
        FieldSpec::new(AccountNumber, "ACCOUNT NUMBER", Some("ACCOUNT NUMBER"), false),
        FieldSpec::new(PageNumber, "PAGE NUMBER", Some("PAGE NUMBER"), false),
    ]
}

/// Located annotation: page index, block index, annotation.
type Loc<'a> = (usize, usize, &'a Annotation);

fn is_data(a: &Annotation) -> bool {
    a.kind != AnnotationKind::Keyword
}

fn char_range_bbox(line: &Line, start: usize, end: usize) -> BBox {
    let mut pos = 0;
    let mut boxes = Vec::new();
    for w in &line.words {
        let len = w.text.chars().count();
        if pos < end && start < pos + len {
            boxes.push(w.bbox);
        }
        pos += len + 1;
    }
    BBox::union_all(boxes.iter()).unwrap_or(line.bbox)
}

fn ann_bbox(block: &Block, a: &Annotation) -> BBox {
    char_range_bbox(&block.lines[a.span.line], a.span.start, a.span.end)
}

fn confidences(key: bool, data: Option<f64>, cfg: &PipelineConfig) -> (f64, f64, f64) {
    let key_conf = if key { cfg.key_conf_only } else { 0.0 };
    let data_conf = data.unwrap_or(0.0);
    let combine = match (key, data.is_some()) {
        (true, true) => 1.0,
        (true, false) => cfg.key_conf_only,
        _ => cfg.data_conf_only,
    };
    (key_conf, data_conf, combine)
}

fn make_field(
    field: FieldKind,
    role: PartyRole,
    raw: &str,
    conf: (f64, f64, f64),
    page: &Page,
    block: &Block,
    line: usize,
) -> ExtractedField {
    ExtractedField {
        field,
        role,
        value: validate_and_correct(raw, field).value,
        key_conf: conf.0,
        data_conf: conf.1,
        combine_conf: conf.2,
        source: SourceRef {
            page: page.number,
            block: block.id,
            line,
        },
    }
}

/// Block indices of a page in reading order.
fn ordered_blocks(page: &Page) -> Vec<usize> {
    reading_order(page)
        .into_iter()
        .filter_map(|id| page.blocks.iter().position(|b| b.id == id))
        .collect()
}

/// Keyword occurrences for one field spec: GENERAL_INFO blocks first, then page, reading order, line, offset.
fn keyword_candidates<'a>(doc: &'a Document, spec: &FieldSpec) -> Vec<Loc<'a>> {
    let mut out = Vec::new();
    for (pi, page) in doc.pages.iter().enumerate() {
        for (rank, bi) in ordered_blocks(page).into_iter().enumerate() {
            let block = &page.blocks[bi];
            let general = block.block_types.contains(&BlockType::GeneralInfo);
            for a in block.annotations_of(AnnotationKind::Keyword) {
                if spec.keywords.contains(&a.label) {
                    out.push((!general, pi, rank, a.span.line, a.span.start, bi, a));
                }
            }
        }
    }
    out.sort_by_key(|c| (c.0, c.1, c.2, c.3, c.4));
    out.into_iter().map(|c| (c.1, c.5, c.6)).collect()
}

/// Expected data after the keyword on its own line, not separated from it by another keyword.
fn same_line_data<'a>(block: &'a Block, kw: &Annotation, label: &str) -> Option<&'a Annotation> {
    let line = kw.span.line;
    block
        .annotations
        .iter()
        .filter(|a| is_data(a) && a.label == label && a.span.line == line && a.span.start >= kw.span.end)
        .filter(|a| {
            !block.annotations.iter().any(|k| {
                k.kind == AnnotationKind::Keyword
                    && k.span.line == line
                    && k.label != kw.label
                    && k.span.start >= kw.span.end
                    && k.span.end <= a.span.start
            })
        })
        .min_by_key(|a| a.span.start)
}

/// Sum of neighbor weights over a candidate block's annotations.
pub fn neighbor_score(block: &Block, spec: &FieldSpec, cfg: &PipelineConfig) -> f64 {
    let w = &cfg.neighbor_score;
    block
        .annotations
        .iter()
        .map(|a| {
            if a.kind == AnnotationKind::Keyword {
                if spec.keywords.contains(&a.label) {
                    0.0
                } else {
                    w.other_keyword
                }
            } else if spec.data_label.as_deref() == Some(a.label.as_str()) {
                w.expected_data
            } else {
                w.other_data
            }
        })
        .sum()
}

fn center_y(b: &BBox) -> f64 {
    b.center_y()
}

/// Expected-data annotation in a neighbor, closest to the keyword: vertically for
/// the right neighbor, topmost then horizontally for the lower ones.
fn pick_in_neighbor<'a>(nb: &'a Block, dir: Direction, kw_box: &BBox, label: &str) -> Option<&'a Annotation> {
    let key = |a: &&Annotation| {
        let b = ann_bbox(nb, a);
        let dy = (center_y(&b) - center_y(kw_box)).abs();
        let dx = (b.center_x() - kw_box.center_x()).abs();
        match dir {
            Direction::Right => ((dy * 16.0) as u64, (dx * 16.0) as u64),
            _ => (a.span.line as u64, (dx * 16.0) as u64),
        }
    };
    nb.annotations.iter().filter(|a| is_data(a) && a.label == label).min_by_key(key)
}

/// Text after the keyword to the end of its line, without leading separators.
fn line_tail(block: &Block, kw: &Annotation) -> String {
    let line: Vec<char> = block.lines[kw.span.line].text.chars().collect();
    let tail: String = line[kw.span.end.min(line.len())..].iter().collect();
    tail.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, ':' | '-' | '.' | ',' | ';' | '#' | '|'))
        .trim()
        .to_string()
}

fn from_keyword(doc: &Document, spec: &FieldSpec, (pi, bi, kw): Loc, cfg: &PipelineConfig) -> Option<ExtractedField> {
    let page = &doc.pages[pi];
    let block = &page.blocks[bi];
    if let Some(label) = &spec.data_label {
        if let Some(d) = same_line_data(block, kw, label) {
            let conf = confidences(true, Some(cfg.data_conf_only), cfg);
            return Some(make_field(spec.field, PartyRole::None, &d.matched_text, conf, page, block, d.span.line));
        }
        let kw_box = ann_bbox(block, kw);
        let mut best: Option<(f64, &Block, &Annotation)> = None;
        for dir in [Direction::Right, Direction::Bottom, Direction::BottomRight] {
            let Some(nb) = page.neighbor(block, dir) else { continue };
            let Some(d) = pick_in_neighbor(nb, dir, &kw_box, label) else { continue };
            let score = neighbor_score(nb, spec, cfg);
            // strict comparison keeps the right neighbor on ties
            if score > 0.0 && best.is_none_or(|(s, _, _)| score > s) {
                best = Some((score, nb, d));
            }
        }
        if let Some((_, nb, d)) = best {
            let conf = confidences(true, Some(cfg.data_conf_only), cfg);
            return Some(make_field(spec.field, PartyRole::None, &d.matched_text, conf, page, nb, d.span.line));
        }
    }
    let conf = confidences(true, None, cfg);
    let tail = line_tail(block, kw);
    if !tail.is_empty() {
        return Some(make_field(spec.field, PartyRole::None, &tail, conf, page, block, kw.span.line));
    }
    if spec.data_label.is_none() {
        // free text beside the keyword: the vertically closest line of the right neighbor
        let nb = page.neighbor(block, Direction::Right)?;
        let kw_y = center_y(&ann_bbox(block, kw));
        let (li, line) = nb
            .lines
            .iter()
            .enumerate()
            .min_by_key(|(_, l)| ((center_y(&l.bbox) - kw_y).abs() * 16.0) as u64)?;
        return Some(make_field(spec.field, PartyRole::None, &line.text, conf, page, nb, li));
    }
    None
}

/// Runs the keyword, neighbor and structured-data steps for one field.
pub fn extract_field(doc: &Document, spec: &FieldSpec, cfg: &PipelineConfig) -> Option<ExtractedField> {
    let candidates = keyword_candidates(doc, spec);
    for c in &candidates {
        if let Some(f) = from_keyword(doc, spec, *c, cfg) {
            return Some(f);
        }
    }
    if !candidates.is_empty() || spec.keyword_required {
        return None;
    }
    let label = spec.data_label.as_deref()?;
    for page in &doc.pages {
        for bi in ordered_blocks(page) {
            let block = &page.blocks[bi];
            let hit = block
                .annotations
                .iter()
                .filter(|a| is_data(a) && a.label == label)
                .min_by_key(|a| (a.span.line, a.span.start));
            if let Some(d) = hit {
                let conf = confidences(false, Some(cfg.data_conf_only), cfg);
                return Some(make_field(spec.field, PartyRole::None, &d.matched_text, conf, page, block, d.span.line));
            }
        }
    }
    None
}

/// Contiguous address lines of a block, from the first road or house-number line
/// to the line with the highest-ranked address label. Returns the joined text,
/// its confidence and the first line index.
pub fn extract_address_span(block: &Block, cfg: &PipelineConfig) -> Option<(String, f64, usize)> {
    let mut parts: Vec<(AddressLabel, usize)> = block
        .annotations_of(AnnotationKind::AddressPart)
        .filter_map(|a| AddressLabel::parse(&a.label).map(|l| (l, a.span.line)))
        .collect();
    parts.sort_by_key(|(_, line)| *line);
    let start = parts
        .iter()
        .filter(|(l, _)| matches!(l, AddressLabel::Road | AddressLabel::HouseNumber))
        .map(|(_, line)| *line)
        .min()?;
    let (_, end) = parts
        .iter()
        .filter(|(_, line)| *line >= start)
        .fold(None::<(usize, usize)>, |best, (l, line)| match best {
            // rank 0 is highest; ties keep the earliest line
            Some((r, _)) if r <= l.rank() => best,
            _ => Some((l.rank(), *line)),
        })?;
    let end = end.max(start);
    let value = block.lines[start..=end].iter().map(|l| l.text.trim()).collect::<Vec<_>>().join(", ");
    let strong = parts
        .iter()
        .any(|(l, line)| (start..=end).contains(line) && matches!(l, AddressLabel::Country | AddressLabel::City));
    let ac = &cfg.address_confidence;
    let mut conf = if strong { ac.strong } else { ac.weak };
    let located = block.annotations_of(AnnotationKind::Entity).any(|a| {
        matches!(a.label.as_str(), "LOCATION" | "CITY" | "COUNTRY") && (start..=end).contains(&a.span.line)
    });
    if located {
        conf = (conf + ac.location_bonus).min(1.0);
    }
    Some((value, conf, start))
}

/// Whether the block, or its one-line top or left neighbor, carries the role's keyword.
fn role_keyword(block: &Block, page: &Page, role: PartyRole) -> bool {
    let has = |b: &Block| b.has_label(AnnotationKind::Keyword, role.as_str());
    has(block)
        || [Direction::Top, Direction::Left]
            .iter()
            .any(|d| page.neighbor(block, *d).is_some_and(|nb| nb.lines.len() == 1 && has(nb)))
}

const PARTY_DATA: &[(FieldKind, AnnotationKind, &str, &str)] = &[
    (FieldKind::CompanyName, AnnotationKind::Entity, "ORGANIZATION", ""),
    (FieldKind::Contacts, AnnotationKind::Entity, "PERSON", "CONTACT"),
    (FieldKind::VatNumber, AnnotationKind::DataType, "VAT NUMBER", "VAT NUMBER"),
    (FieldKind::CompanyId, AnnotationKind::DataType, "COMPANY ID", "COMPANY ID"),
    (FieldKind::Email, AnnotationKind::DataType, "EMAIL", "EMAIL"),
    (FieldKind::PhoneNumber, AnnotationKind::DataType, "PHONE", "PHONE"),
    (FieldKind::Website, AnnotationKind::DataType, "URL", "WEBSITE"),
];

/// Party fields read from the blocks of each role, one value per field and role.
pub fn assemble_role_groups(doc: &Document, cfg: &PipelineConfig) -> Vec<ExtractedField> {
    let mut out = Vec::new();
    for role in [PartyRole::Seller, PartyRole::Buyer, PartyRole::Delivery] {
        let blocks: Vec<(&Page, &Block)> = doc
            .pages
            .iter()
            .flat_map(|p| ordered_blocks(p).into_iter().map(move |bi| (p, &p.blocks[bi])))
            .filter(|(_, b)| b.role == role)
            .collect();
        if blocks.is_empty() {
            continue;
        }
        let keyed = blocks.iter().any(|(p, b)| role_keyword(b, p, role));
        let mut fields: Vec<ExtractedField> = Vec::new();
        for (field, kind, label, keyword) in PARTY_DATA {
            let hit = blocks.iter().find_map(|(p, b)| {
                b.annotations
                    .iter()
                    .filter(|a| a.kind == *kind && a.label == *label)
                    .min_by_key(|a| (a.span.line, a.span.start))
                    .map(|a| (*p, *b, a))
            });
            if let Some((p, b, a)) = hit {
                let own_key = !keyword.is_empty()
                    && b.annotations.iter().any(|k| {
                        k.kind == AnnotationKind::Keyword && k.label == *keyword && k.span.line == a.span.line
                    });
                let conf = confidences(keyed || own_key, Some(cfg.data_conf_only), cfg);
                fields.push(make_field(*field, role, &a.matched_text, conf, p, b, a.span.line));
            }
        }
        if let Some((p, b, (value, conf, line))) =
            blocks.iter().find_map(|(p, b)| extract_address_span(b, cfg).map(|s| (*p, *b, s)))
        {
            let c = confidences(keyed, Some(conf), cfg);
            fields.push(make_field(FieldKind::Address, role, &value, c, p, b, line));
        }
        fields.sort_by_key(|f| f.field);
        out.extend(fields);
    }
    out
}

/// Fields extracted from one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub source_id: String,
    pub language: String,
    #[serde(with = "flat_fields")]
    pub fields: Vec<ExtractedField>,
}

impl ExtractionReport {
    pub fn get(&self, field: FieldKind, role: PartyRole) -> Option<&ExtractedField> {
        self.fields.iter().find(|f| f.field == field && f.role == role)
    }
}

/// Report rows carry the source location inline: `{field, role, value, ..., page, block, line}`.
mod flat_fields {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Row {
        field: FieldKind,
        role: PartyRole,
        value: String,
        key_conf: f64,
        data_conf: f64,
        combine_conf: f64,
        page: u32,
        block: u32,
        line: usize,
    }

    pub fn serialize<S: Serializer>(fields: &[ExtractedField], s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Row> = fields
            .iter()
            .map(|f| Row {
                field: f.field,
                role: f.role,
                value: f.value.clone(),
                key_conf: f.key_conf,
                data_conf: f.data_conf,
                combine_conf: f.combine_conf,
                page: f.source.page,
                block: f.source.block,
                line: f.source.line,
            })
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<ExtractedField>, D::Error> {
        let rows = Vec::<Row>::deserialize(d)?;
        Ok(rows
            .into_iter()
            .map(|r| ExtractedField {
                field: r.field,
                role: r.role,
                value: r.value,
                key_conf: r.key_conf,
                data_conf: r.data_conf,
                combine_conf: r.combine_conf,
                source: SourceRef {
                    page: r.page,
                    block: r.block,
                    line: r.line,
                },
            })
            .collect())
    }
}

/// One pass per field spec in order, then the role groups.
pub fn extract_all(doc: &Document, specs: &[FieldSpec], cfg: &PipelineConfig) -> ExtractionReport {
    let mut fields: Vec<ExtractedField> = specs.iter().filter_map(|s| extract_field(doc, s, cfg)).collect();
    fields.extend(assemble_role_groups(doc, cfg));
    ExtractionReport {
        source_id: doc.source_id.clone(),
        language: doc.main_language.clone(),
        fields,
    }
}
