//! OCR output readers and main-language detection.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::docmodel::{BBox, Style, WordBox};
use crate::error::{Error, Result};

/// Words of one OCR page in source order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrPage {
    pub number: u32,
    pub width: u32,
    pub height: u32,
    pub words: Vec<WordBox>,
}

const TSV_COLUMNS: usize = 12;
const LEVEL_PAGE: u32 = 1;
const LEVEL_WORD: u32 = 5;

/// Reads Tesseract TSV output. Only page rows (level 1) and word rows (level 5)
/// are used; Tesseract's own block/paragraph/line grouping is ignored.
pub fn parse_tesseract_tsv(bytes: &[u8]) -> Result<Vec<OcrPage>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::schema("tsv", format!("not UTF-8: {e}")))?;
    let mut pages: Vec<OcrPage> = Vec::new();

    for (idx, raw) in text.split('\n').enumerate() {
        let row = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if row == 1 || line.trim().is_empty() {
            continue;
        }
        let mut fields: Vec<&str> = line.split('\t').collect();
        // non-word rows are sometimes written without the trailing empty text column
        if fields.len() == TSV_COLUMNS - 1 {
            fields.push("");
        }
        if fields.len() != TSV_COLUMNS {
            return Err(Error::schema(
                format!("row {row}"),
                format!("expected {TSV_COLUMNS} columns, found {}", fields.len()),
            ));
        }
        let int = |col: usize, name: &str| -> Result<i64> {
            fields[col].trim().parse::<i64>().map_err(|_| {
                Error::schema(format!("row {row}"), format!("non-numeric {name} {:?}", fields[col]))
            })
        };
        let level = int(0, "level")?;
        let page_num = int(1, "page_num")?;
        let (left, top, width, height) = (int(6, "left")?, int(7, "top")?, int(8, "width")?, int(9, "height")?);
        if left < 0 || top < 0 || width < 0 || height < 0 {
            return Err(Error::schema(format!("row {row}"), "negative geometry"));
        }
        let page_num = u32::try_from(page_num)
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::schema(format!("row {row}"), "page_num must be positive"))?;

        match level as u32 {
            LEVEL_PAGE => {
                pages.push(OcrPage {
                    number: page_num,
                    width: (left + width) as u32,
                    height: (top + height) as u32,
                    words: Vec::new(),
                });
            }
            LEVEL_WORD => {
                let text = fields[11];
                if text.trim().is_empty() {
                    continue;
                }
                let conf: f64 = fields[10].trim().parse().map_err(|_| {
                    Error::schema(format!("row {row}"), format!("non-numeric conf {:?}", fields[10]))
                })?;
                let conf = if conf < 0.0 { None } else { Some((conf / 100.0).min(1.0)) };
                let bbox = BBox::new(left as u32, top as u32, width as u32, height as u32)
                    .map_err(|e| Error::Invariant(format!("row {row}: {e}")))?;
                let word = WordBox::new(text.trim(), bbox, conf)?;
                let page = match pages.iter_mut().rposition(|p| p.number == page_num) {
                    Some(i) => &mut pages[i],
                    None => {
                        pages.push(OcrPage {
                            number: page_num,
                            width: 0,
                            height: 0,
                            words: Vec::new(),
                        });
                        pages.last_mut().expect("just pushed")
                    }
                };
                page.width = page.width.max(word.bbox.right());
                page.height = page.height.max(word.bbox.bottom());
                page.words.push(word);
            }
            _ => {}
        }
    }
    Ok(pages)
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonWords {
    pages: Vec<JsonPage>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonPage {
    number: u32,
    width: u32,
    height: u32,
    words: Vec<JsonWord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonWord {
    text: String,
    left: u32,
    top: u32,
    width: u32,
    height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    conf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    font_height: Option<u32>,
}

/// Reads the canonical word-box JSON interchange format.
pub fn parse_wordbox_json(bytes: &[u8]) -> Result<Vec<OcrPage>> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let parsed: JsonWords = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::schema(e.path().to_string(), e.into_inner().to_string()))?;
    parsed
        .pages
        .into_iter()
        .enumerate()
        .map(|(pi, p)| {
            let words = p
                .words
                .into_iter()
                .enumerate()
                .filter(|(_, w)| !w.text.trim().is_empty())
                .map(|(wi, w)| {
                    let bbox = BBox {
                        left: w.left,
                        top: w.top,
                        width: w.width,
                        height: w.height,
                    };
                    let word = WordBox {
                        text: w.text,
                        style: Style {
                            font_height: w.font_height.unwrap_or(w.height),
                        },
                        bbox,
                        ocr_confidence: w.conf,
                    };
                    word.validate()
                        .map_err(|e| Error::Invariant(format!("pages[{pi}].words[{wi}]: {e}")))?;
                    Ok(word)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(OcrPage {
                number: p.number,
                width: p.width,
                height: p.height,
                words,
            })
        })
        .collect()
}

pub fn write_wordbox_json(pages: &[OcrPage]) -> Vec<u8> {
    let file = JsonWords {
        pages: pages
            .iter()
            .map(|p| JsonPage {
                number: p.number,
                width: p.width,
                height: p.height,
                words: p
                    .words
                    .iter()
                    .map(|w| JsonWord {
                        text: w.text.clone(),
                        left: w.bbox.left,
                        top: w.bbox.top,
                        width: w.bbox.width,
                        height: w.bbox.height,
                        conf: w.ocr_confidence,
                        font_height: (w.style.font_height != w.bbox.height).then_some(w.style.font_height),
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_vec_pretty(&file).expect("word JSON serialization is infallible")
}

/// Field-name phrases characteristic of one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDictionary {
    pub language: String,
    pub terms: BTreeSet<String>,
}

impl TermDictionary {
    pub fn new(language: impl Into<String>, terms: impl IntoIterator<Item = impl Into<String>>) -> Result<Self> {
        let d = TermDictionary {
            language: language.into(),
            terms: terms.into_iter().map(Into::into).collect(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let d: TermDictionary = serde_json::from_slice(bytes)
            .map_err(|e| Error::Config(format!("invalid term dictionary: {e}")))?;
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Config(format!("term dictionary {} is empty", self.language)));
        }
        if let Some(t) = self.terms.iter().find(|t| t.to_lowercase() != **t) {
            return Err(Error::Config(format!("term {t:?} is not lowercase")));
        }
        Ok(())
    }

    /// Number of distinct terms occurring as whole phrases in `lowered`.
    fn hits(&self, lowered: &str) -> usize {
        self.terms.iter().filter(|t| contains_phrase(lowered, t)).count()
    }
}

fn contains_phrase(haystack: &str, phrase: &str) -> bool {
    haystack.match_indices(phrase).any(|(i, m)| {
        let before = haystack[..i].chars().next_back();
        let after = haystack[i + m.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

/// Picks the language whose dictionary has the most distinct phrase hits.
/// Ties go to the earlier dictionary; no hits at all yields `fallback`.
pub fn detect_main_language(text: &str, dicts: &[TermDictionary], fallback: &str) -> Result<String> {
    if dicts.is_empty() {
        return Err(Error::Config("no term dictionaries supplied".into()));
    }
    let lowered = text.to_lowercase();
    let mut best: Option<(&TermDictionary, usize)> = None;
    for d in dicts {
        let hits = d.hits(&lowered);
        if hits > 0 && best.is_none_or(|(_, h)| hits > h) {
            best = Some((d, hits));
        }
    }
    Ok(best.map_or_else(|| fallback.to_string(), |(d, _)| d.language.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "level\tpage_num\tblock_num\tpar_num\tline_num\tword_num\tleft\ttop\twidth\theight\tconf\ttext";

    #[test]
    fn word_row_maps_fields() {
        let tsv = format!("{HEADER}\n1\t1\t0\t0\t0\t0\t0\t0\t1000\t1400\t-1\t\n5\t1\t1\t1\t1\t1\t100\t200\t50\t20\t96.0\tInvoice\n");
        let pages = parse_tesseract_tsv(tsv.as_bytes()).unwrap();
        assert_eq!(pages.len(), 1);
        assert_eq!((pages[0].width, pages[0].height), (1000, 1400));
        let w = &pages[0].words[0];
        assert_eq!(w.text, "Invoice");
        assert_eq!(w.bbox, BBox { left: 100, top: 200, width: 50, height: 20 });
        assert!((w.ocr_confidence.unwrap() - 0.96).abs() < 1e-12);
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_tesseract_tsv(HEADER.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn negative_conf_is_absent() {
        let tsv = format!("{HEADER}\n5\t1\t1\t1\t1\t1\t10\t20\t30\t12\t-1\tword\n");
        let pages = parse_tesseract_tsv(tsv.as_bytes()).unwrap();
        assert_eq!(pages[0].words[0].ocr_confidence, None);
    }

    #[test]
    fn blank_word_rows_are_dropped_and_grouping_ignored() {
        let tsv = format!(
            "{HEADER}\n1\t1\t0\t0\t0\t0\t0\t0\t500\t500\t-1\t\n2\t1\t1\t0\t0\t0\t10\t10\t100\t20\t-1\t\n5\t1\t1\t1\t1\t1\t10\t10\t30\t12\t90\t \n5\t1\t1\t1\t1\t2\t50\t10\t30\t12\t90\tB\n"
        );
        let pages = parse_tesseract_tsv(tsv.as_bytes()).unwrap();
        assert_eq!(pages[0].words.len(), 1);
        assert_eq!(pages[0].words[0].text, "B");
    }

    #[test]
    fn bad_rows_report_row_number() {
        let tsv = format!("{HEADER}\n5\t1\t1\t1\t1\t1\tx\t20\t30\t12\t90\tword\n");
        match parse_tesseract_tsv(tsv.as_bytes()) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "row 2"),
            other => panic!("{other:?}"),
        }
        let tsv = format!("{HEADER}\n5\t1\t1\n");
        assert!(matches!(parse_tesseract_tsv(tsv.as_bytes()), Err(Error::Schema { .. })));
    }

    #[test]
    fn json_minimal_and_zero_width() {
        let ok = br#"{"pages":[{"number":1,"width":100,"height":100,"words":[{"text":"Total","left":1,"top":2,"width":30,"height":10}]}]}"#;
        let pages = parse_wordbox_json(ok).unwrap();
        assert_eq!(pages[0].words.len(), 1);
        assert_eq!(pages[0].words[0].style.font_height, 10);
        let bad = br#"{"pages":[{"number":1,"width":100,"height":100,"words":[{"text":"Total","left":1,"top":2,"width":0,"height":10}]}]}"#;
        assert!(matches!(parse_wordbox_json(bad), Err(Error::Invariant(_))));
        assert!(matches!(parse_wordbox_json(b"{\"pages\":[{"), Err(Error::Schema { .. })));
    }

    #[test]
    fn json_round_trip() {
        let ok = br#"{"pages":[{"number":1,"width":100,"height":100,"words":[{"text":"a","left":1,"top":2,"width":3,"height":4,"conf":0.5},{"text":"b","left":9,"top":2,"width":3,"height":4,"font_height":6}]}]}"#;
        let pages = parse_wordbox_json(ok).unwrap();
        assert_eq!(parse_wordbox_json(&write_wordbox_json(&pages)).unwrap(), pages);
    }

    fn dicts() -> Vec<TermDictionary> {
        vec![
            TermDictionary::new("en", ["invoice", "invoice date", "seller", "buyer", "due date"]).unwrap(),
            TermDictionary::new("cs", ["faktura", "dodavatel", "odběratel", "datum splatnosti"]).unwrap(),
        ]
    }

    #[test]
    fn czech_seller_buyer_terms() {
        let lang = detect_main_language("DODAVATEL: Firma\nOdběratel: Jiná", &dicts(), "en").unwrap();
        assert_eq!(lang, "cs");
    }

    #[test]
    fn english_and_counts() {
        assert_eq!(detect_main_language("Invoice date: 1.1.2020", &dicts(), "cs").unwrap(), "en");
        let text = "Faktura\nDodavatel\nOdběratel\nInvoice";
        assert_eq!(detect_main_language(text, &dicts(), "en").unwrap(), "cs");
    }

    #[test]
    fn fallback_ties_and_errors() {
        assert_eq!(detect_main_language("nothing here", &dicts(), "de").unwrap(), "de");
        assert_eq!(detect_main_language("invoice faktura", &dicts(), "de").unwrap(), "en");
        assert!(detect_main_language("x", &[], "en").is_err());
        // whole phrase only
        assert_eq!(detect_main_language("reinvoiced", &dicts(), "de").unwrap(), "de");
    }
}
