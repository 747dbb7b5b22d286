//! Named entities, address parts and the location ensemble.
//!
//! The shipped annotators are gazetteer and rule based. External models plug in
//! through [`EntityAnnotator`] and [`AddressParser`].

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::docmodel::{Annotation, AnnotationKind, Block, Line, Span};
use crate::error::{Error, Result};
use crate::textannot::distance::fold;
use crate::textannot::validate::legal_form_key;

pub const ENTITY_LABELS: &[&str] = &["PERSON", "ORGANIZATION", "LOCATION", "CITY", "COUNTRY"];

/// Address part labels, highest rank first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AddressLabel {
    Country,
    City,
    CityDistrict,
    Suburb,
    Postcode,
    Road,
    HouseNumber,
    House,
}

impl AddressLabel {
    pub const ALL: [AddressLabel; 8] = [
        AddressLabel::Country,
        AddressLabel::City,
        AddressLabel::CityDistrict,
        AddressLabel::Suburb,
        AddressLabel::Postcode,
        AddressLabel::Road,
        AddressLabel::HouseNumber,
        AddressLabel::House,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AddressLabel::Country => "country",
            AddressLabel::City => "city",
            AddressLabel::CityDistrict => "city_district",
            AddressLabel::Suburb => "suburb",
            AddressLabel::Postcode => "postcode",
            AddressLabel::Road => "road",
            AddressLabel::HouseNumber => "house_number",
            AddressLabel::House => "house",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.as_str() == s)
    }

    /// 0 is the highest rank.
    pub fn rank(&self) -> usize {
        *self as usize
    }
}

fn fold_lower(s: &str) -> String {
    s.chars().map(fold).collect()
}

/// Per-language word lists. All lookups are case-insensitive.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    pub language: String,
    first_names: HashSet<String>,
    cities: HashSet<String>,
    countries: HashSet<String>,
    legal_forms: Vec<Vec<String>>,
    street_affixes: HashSet<String>,
    max_place_tokens: usize,
}

fn lines_of(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

impl Gazetteer {
    pub fn from_texts(
        language: &str,
        cities: &str,
        first_names: &str,
        countries: &str,
        legal_forms: &str,
        street_affixes: &str,
    ) -> Self {
        let set = |t: &str| lines_of(t).map(fold_lower).collect::<HashSet<_>>();
        let cities = set(cities);
        let countries = set(countries);
        let max_place_tokens = cities
            .iter()
            .chain(&countries)
            .map(|p| p.split_whitespace().count())
            .max()
            .unwrap_or(1);
        Gazetteer {
            language: language.to_string(),
            first_names: set(first_names),
            cities,
            countries,
            legal_forms: lines_of(legal_forms)
                .map(|f| f.split_whitespace().map(legal_form_key).collect())
                .collect(),
            street_affixes: set(street_affixes),
            max_place_tokens,
        }
    }

    /// Reads `cities.txt`, `first_names.txt`, `countries.txt`, `legal_forms.txt`
    /// and `street_affixes.txt` from `dir`.
    pub fn load_dir(language: &str, dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| Error::Config(format!("cannot read gazetteer {}: {e}", dir.join(name).display())))
        };
        Ok(Self::from_texts(
            language,
            &read("cities.txt")?,
            &read("first_names.txt")?,
            &read("countries.txt")?,
            &read("legal_forms.txt")?,
            &read("street_affixes.txt")?,
        ))
    }

    pub fn is_first_name(&self, token: &str) -> bool {
        self.first_names.contains(&fold_lower(token))
    }

    pub fn is_city(&self, name: &str) -> bool {
        self.cities.contains(&fold_lower(name))
    }

    pub fn is_country(&self, name: &str) -> bool {
        self.countries.contains(&fold_lower(name))
    }

    pub fn is_street_affix(&self, token: &str) -> bool {
        self.street_affixes.contains(&fold_lower(token))
    }

    /// Length in tokens of a legal form starting at `tokens[0]`, longest first.
    fn legal_form_at(&self, tokens: &[&Tok]) -> Option<usize> {
        self.legal_forms
            .iter()
            .filter(|f| f.len() <= tokens.len())
            .filter(|f| f.iter().zip(tokens).all(|(k, t)| *k == legal_form_key(&t.raw)))
            .map(Vec::len)
            .max()
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.cities.len(), self.first_names.len(), self.countries.len())
    }
}

/// A whitespace-delimited token with char offsets. `core` drops surrounding
/// brackets, quotes and trailing separators.
#[derive(Debug, Clone)]
struct Tok {
    raw: String,
    core: String,
    start: usize,
    end: usize,
    ends_with_colon: bool,
    ends_with_comma: bool,
}

fn tokenize(text: &str) -> Vec<Tok> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let s = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let raw: String = chars[s..i].iter().collect();
        let lead = raw.chars().take_while(|c| matches!(c, '(' | '"' | '\'' | '[')).count();
        let body: Vec<char> = raw.chars().skip(lead).collect();
        let trail = body.iter().rev().take_while(|c| matches!(c, ',' | ';' | ':' | ')' | '"' | '\'' | ']')).count();
        let core_chars = &body[..body.len() - trail];
        let core: String = core_chars.iter().collect();
        if core.is_empty() {
            continue;
        }
        out.push(Tok {
            ends_with_colon: raw.ends_with(':'),
            ends_with_comma: raw.ends_with(','),
            raw: raw.trim_end_matches([',', ';', ':']).to_string(),
            start: s + lead,
            end: s + lead + core_chars.len(),
            core,
        });
    }
    out
}

fn lookup_key(tokens: &[Tok]) -> String {
    tokens
        .iter()
        .map(|t| fold_lower(t.core.trim_end_matches('.')))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Words that end a name run when scanning left from a legal form.
const RUN_STOPWORDS: &[&str] = &[
    "by", "to", "from", "for", "bill", "sold", "ship", "seller", "buyer", "supplier", "customer", "vendor", "client",
    "dodavatel", "odběratel", "odberatel", "prodávající", "kupující", "name", "company", "firma", "název", "nazev",
];

fn is_alpha_token(t: &Tok) -> bool {
    t.core.chars().any(char::is_alphabetic) && !t.core.chars().any(|c| c.is_ascii_digit())
}

/// Entity annotation behind a common interface so external models can replace the baseline.
pub trait EntityAnnotator: Send + Sync {
    fn name(&self) -> &str;
    /// Spans refer to indices in `lines`; labels come from [`ENTITY_LABELS`].
    fn annotate(&self, lines: &[Line]) -> Vec<Annotation>;
}

/// Address part recognition behind a common interface.
pub trait AddressParser: Send + Sync {
    fn name(&self) -> &str;
    fn parse(&self, line_text: &str) -> Vec<(AddressLabel, usize, usize)>;
}

fn entity(label: &str, line: usize, text: &str, start: usize, end: usize, source: &str) -> Annotation {
    Annotation {
        kind: AnnotationKind::Entity,
        label: label.to_string(),
        span: Span { line, start, end },
        matched_text: text.chars().skip(start).take(end - start).collect(),
        score: 1.0,
        source: source.to_string(),
    }
}

/// Longest gazetteer place match (country before city) at each position, non-overlapping.
fn place_matches(gaz: &Gazetteer, toks: &[Tok]) -> Vec<(&'static str, usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let mut found = None;
        for n in (1..=gaz.max_place_tokens.min(toks.len() - i)).rev() {
            // a name never spans a comma
            if toks[i..i + n - 1].iter().any(|t| t.ends_with_comma || t.ends_with_colon) {
                continue;
            }
            let key = lookup_key(&toks[i..i + n]);
            if gaz.countries.contains(&key) {
                found = Some(("COUNTRY", n));
            } else if gaz.cities.contains(&key) {
                found = Some(("CITY", n));
            }
            if found.is_some() {
                break;
            }
        }
        match found {
            Some((label, n)) => {
                out.push((label, i, i + n));
                i += n;
            }
            None => i += 1,
        }
    }
    out
}

/// Gazetteer and heuristic baseline for organizations, persons, cities and countries.
#[derive(Debug, Clone)]
pub struct GazetteerAnnotator {
    pub gazetteer: Gazetteer,
}

impl GazetteerAnnotator {
    fn line_annotations(&self, li: usize, text: &str) -> Vec<Annotation> {
        let gaz = &self.gazetteer;
        let toks = tokenize(text);
        let refs: Vec<&Tok> = toks.iter().collect();
        let mut out: Vec<Annotation> = Vec::new();
        let mut used = vec![false; toks.len()];

        // organizations: a name run closed by a legal form
        let mut j = 0;
        while j < toks.len() {
            let Some(n) = gaz.legal_form_at(&refs[j..]) else {
                j += 1;
                continue;
            };
            let end_tok = j + n - 1;
            let mut s = j;
            while s > 0 {
                let prev = &toks[s - 1];
                if prev.ends_with_colon || RUN_STOPWORDS.contains(&fold_lower(&prev.core).as_str()) {
                    break;
                }
                s -= 1;
            }
            if s < j && toks[s..j].iter().any(is_alpha_token) {
                out.push(entity("ORGANIZATION", li, text, toks[s].start, toks[end_tok].end, "gazetteer"));
                used[s..=end_tok].iter_mut().for_each(|u| *u = true);
            }
            j = end_tok + 1;
        }

        // persons: known first name followed by a name-like token
        let mut k = 0;
        while k + 1 < toks.len() {
            let (a, b) = (&toks[k], &toks[k + 1]);
            let ok = !used[k]
                && !used[k + 1]
                && !a.ends_with_comma
                && !a.ends_with_colon
                && is_alpha_token(a)
                && is_alpha_token(b)
                && b.core.chars().count() >= 2
                && gaz.is_first_name(&a.core)
                && !gaz.is_street_affix(b.core.trim_end_matches('.'))
                && gaz.legal_form_at(&refs[k + 1..k + 2]).is_none()
                && !RUN_STOPWORDS.contains(&fold_lower(&b.core).as_str());
            if ok {
                out.push(entity("PERSON", li, text, a.start, b.end, "gazetteer"));
                used[k] = true;
                used[k + 1] = true;
                k += 2;
            } else {
                k += 1;
            }
        }

        for (label, s, e) in place_matches(gaz, &toks) {
            if used[s..e].iter().any(|u| *u) {
                continue;
            }
            out.push(entity(label, li, text, toks[s].start, toks[e - 1].end, "gazetteer"));
        }
        out.sort_by_key(|a| (a.span.start, a.span.end));
        out
    }
}

impl EntityAnnotator for GazetteerAnnotator {
    fn name(&self) -> &str {
        "gazetteer"
    }

    fn annotate(&self, lines: &[Line]) -> Vec<Annotation> {
        lines
            .iter()
            .enumerate()
            .flat_map(|(li, l)| self.line_annotations(li, &l.text))
            .collect()
    }
}

/// Convenience wrapper over [`GazetteerAnnotator`].
pub fn gazetteer_annotate(lines: &[Line], gaz: &Gazetteer) -> Vec<Annotation> {
    GazetteerAnnotator { gazetteer: gaz.clone() }.annotate(lines)
}

fn is_house_number(core: &str) -> bool {
    let part = |p: &str| {
        let digits = p.trim_end_matches(|c: char| c.is_ascii_alphabetic());
        !digits.is_empty() && digits.len() <= 5 && digits.chars().all(|c| c.is_ascii_digit()) && p.len() - digits.len() <= 1
    };
    let mut parts = core.split('/');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), None, None) => part(a),
        (Some(a), Some(b), None) => part(a) && part(b),
        _ => false,
    }
}

const ROAD_STOPWORDS: &[&str] = &["page", "strana", "str", "no", "nr", "invoice", "faktura", "číslo", "cislo", "order", "tel", "fax"];

/// Rule and gazetteer based address parser.
#[derive(Debug, Clone)]
pub struct RuleAddressParser {
    pub gazetteer: Gazetteer,
}

impl RuleAddressParser {
    fn is_road_word(&self, t: &Tok) -> bool {
        is_alpha_token(t)
            && !t.ends_with_colon
            && t.core.chars().next().is_some_and(char::is_uppercase)
            && t.core.chars().count() >= 2
            && !ROAD_STOPWORDS.contains(&fold_lower(t.core.trim_end_matches('.')).as_str())
            && self.gazetteer.legal_form_at(&[t]).is_none()
    }
}

impl AddressParser for RuleAddressParser {
    fn name(&self) -> &str {
        "rules"
    }

    fn parse(&self, text: &str) -> Vec<(AddressLabel, usize, usize)> {
        let gaz = &self.gazetteer;
        let toks = tokenize(text);
        let n = toks.len();
        let mut used = vec![false; n];
        let mut out = Vec::new();
        let digits = |t: &Tok| !t.core.is_empty() && t.core.chars().all(|c| c.is_ascii_digit());

        // roads closed by a street suffix, or opened by a street prefix
        for i in 0..n {
            if used[i] || !gaz.is_street_affix(toks[i].core.trim_end_matches('.')) {
                continue;
            }
            let mut s = i;
            while s > 0 && !used[s - 1] && self.is_road_word(&toks[s - 1]) && !toks[s - 1].ends_with_comma && i - s < 3 {
                s -= 1;
            }
            let mut e = i;
            if s == i {
                // prefix form: affix followed by the name
                while e + 1 < n && !used[e + 1] && self.is_road_word(&toks[e + 1]) && !toks[e].ends_with_comma && e - i < 3 {
                    e += 1;
                }
                if e == i {
                    continue;
                }
            }
            out.push((AddressLabel::Road, toks[s].start, toks[e].end));
            used[s..=e].iter_mut().for_each(|u| *u = true);
            if s > 0 && !used[s - 1] && is_house_number(&toks[s - 1].core) {
                out.push((AddressLabel::HouseNumber, toks[s - 1].start, toks[s - 1].end));
                used[s - 1] = true;
            } else if e + 1 < n && !used[e + 1] && !toks[e].ends_with_comma && is_house_number(&toks[e + 1].core) {
                out.push((AddressLabel::HouseNumber, toks[e + 1].start, toks[e + 1].end));
                used[e + 1] = true;
            }
        }

        // name followed by a number/number house number
        for i in 1..n {
            if used[i] || !toks[i].core.contains('/') || !is_house_number(&toks[i].core) {
                continue;
            }
            let mut s = i;
            while s > 0 && !used[s - 1] && self.is_road_word(&toks[s - 1]) && i - s < 3 {
                if s < i && toks[s - 1].ends_with_comma {
                    break;
                }
                s -= 1;
            }
            if s == i {
                continue;
            }
            out.push((AddressLabel::Road, toks[s].start, toks[i - 1].end));
            out.push((AddressLabel::HouseNumber, toks[i].start, toks[i].end));
            used[s..=i].iter_mut().for_each(|u| *u = true);
        }

        // whole line of the form `Name [Name] N`
        if (2..=4).contains(&n)
            && !used.iter().any(|u| *u)
            && is_house_number(&toks[n - 1].core)
            && toks[..n - 1].iter().all(|t| self.is_road_word(t) && !t.ends_with_comma)
            && place_matches(gaz, &toks[..n - 1]).is_empty()
        {
            out.push((AddressLabel::Road, toks[0].start, toks[n - 2].end));
            out.push((AddressLabel::HouseNumber, toks[n - 1].start, toks[n - 1].end));
            used.iter_mut().for_each(|u| *u = true);
        }

        // postcodes
        let mut i = 0;
        while i < n {
            let t = &toks[i];
            let prev_numeric = i > 0 && (digits(&toks[i - 1]) || toks[i - 1].core.starts_with(['+', '(']));
            if used[i] || prev_numeric || t.raw.ends_with('.') {
                i += 1;
                continue;
            }
            let next = toks.get(i + 1);
            let upper = t.core.to_uppercase();
            let uk_outward = {
                let c: Vec<char> = upper.chars().collect();
                let letters = c.iter().take_while(|c| c.is_ascii_uppercase()).count();
                (1..=2).contains(&letters)
                    && c.len() > letters
                    && c[letters].is_ascii_digit()
                    && c.len() <= letters + 2
                    && c[letters + 1..].iter().all(|c| c.is_ascii_alphanumeric())
            };
            let uk_inward = |t: &Tok| {
                let c: Vec<char> = t.core.to_uppercase().chars().collect();
                c.len() == 3 && c[0].is_ascii_digit() && c[1].is_ascii_uppercase() && c[2].is_ascii_uppercase()
            };
            if digits(t) && t.core.len() == 3 && next.is_some_and(|x| digits(x) && x.core.len() == 2 && !used[i + 1]) && !t.ends_with_comma {
                out.push((AddressLabel::Postcode, t.start, toks[i + 1].end));
                used[i] = true;
                used[i + 1] = true;
                i += 2;
                continue;
            }
            if digits(t) && (4..=6).contains(&t.core.len()) && !next.is_some_and(|x| digits(x) && !t.ends_with_comma) {
                out.push((AddressLabel::Postcode, t.start, t.end));
                used[i] = true;
            } else if uk_outward && !t.ends_with_comma && next.is_some_and(|x| uk_inward(x) && !used[i + 1]) {
                out.push((AddressLabel::Postcode, t.start, toks[i + 1].end));
                used[i] = true;
                used[i + 1] = true;
                i += 2;
                continue;
            }
            i += 1;
        }

        for (label, s, e) in place_matches(gaz, &toks) {
            if used[s..e].iter().any(|u| *u) {
                continue;
            }
            let l = if label == "COUNTRY" { AddressLabel::Country } else { AddressLabel::City };
            out.push((l, toks[s].start, toks[e - 1].end));
        }
        out.sort_by_key(|(l, s, e)| (*s, *e, *l));
        out
    }
}

/// Convenience wrapper over [`RuleAddressParser`].
pub fn parse_address_parts(line_text: &str, gaz: &Gazetteer) -> Vec<(AddressLabel, usize, usize)> {
    RuleAddressParser { gazetteer: gaz.clone() }.parse(line_text)
}

/// ADDRESS_PART annotations for every line of a block.
pub fn address_annotations(lines: &[Line], parser: &dyn AddressParser) -> Vec<Annotation> {
    let mut out = Vec::new();
    for (li, line) in lines.iter().enumerate() {
        for (label, s, e) in parser.parse(&line.text) {
            out.push(Annotation {
                kind: AnnotationKind::AddressPart,
                label: label.as_str().to_string(),
                span: Span { line: li, start: s, end: e },
                matched_text: line.text.chars().skip(s).take(e - s).collect(),
                score: 1.0,
                source: parser.name().to_string(),
            });
        }
    }
    out
}

fn address_item(a: &Annotation) -> Option<String> {
    match (a.kind, a.label.as_str()) {
        (AnnotationKind::AddressPart, l) => Some(l.to_string()),
        (AnnotationKind::Entity, "CITY") => Some("city".into()),
        (AnnotationKind::Entity, "COUNTRY") => Some("country".into()),
        (AnnotationKind::Entity, "LOCATION") => Some("location".into()),
        _ => None,
    }
}

/// Merges entity and address-part annotations into the block.
///
/// Address parts survive only when the block holds at least `min_address_items`
/// distinct address items across both sources. Organizations beat overlapping
/// road or house claims; roads beat overlapping persons.
pub fn ensemble_locations(block: &Block, ner: &[Annotation], addr: &[Annotation], cfg: &PipelineConfig) -> Block {
    let overlaps = |a: &Annotation, b: &Annotation| a.span.overlaps(&b.span);
    let is_org = |a: &Annotation| a.label == "ORGANIZATION";
    let is_road = |a: &Annotation| a.label == "road";
    let addr_kept: Vec<&Annotation> = addr
        .iter()
        .filter(|a| {
            !(matches!(a.label.as_str(), "road" | "house_number" | "house")
                && ner.iter().any(|n| is_org(n) && overlaps(n, a)))
        })
        .collect();
    let ner_kept: Vec<&Annotation> = ner
        .iter()
        .filter(|n| !(n.label == "PERSON" && addr_kept.iter().any(|a| is_road(a) && overlaps(a, n))))
        .collect();
    let items: BTreeSet<String> = addr_kept
        .iter()
        .copied()
        .chain(ner_kept.iter().copied())
        .filter_map(address_item)
        .collect();
    let keep_addr = items.len() >= cfg.min_address_items;
    let mut out = block.clone();
    out.annotations.extend(ner_kept.into_iter().cloned());
    if keep_addr {
        out.annotations.extend(addr_kept.into_iter().cloned());
    }
    out
}

/// Runs both annotators over the block and merges them with [`ensemble_locations`].
pub fn annotate_entities(
    block: &Block,
    ner: &dyn EntityAnnotator,
    parser: &dyn AddressParser,
    cfg: &PipelineConfig,
) -> Block {
    let ner_annots = ner.annotate(&block.lines);
    let addr_annots = address_annotations(&block.lines, parser);
    ensemble_locations(block, &ner_annots, &addr_annots, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docmodel::{BBox, WordBox};

    pub(crate) fn gaz() -> Gazetteer {
        Gazetteer::from_texts(
            "cs",
            "Brno\nSydney\nPraha\nNew York",
            "Petr\nEva\nJan",
            "Czech Republic\nAustralia",
            "s.r.o.\nspol. s r.o.\nLtd\nPty Ltd\na.s.",
            "street\nst\nroad\nnám.",
        )
    }

    fn line(text: &str) -> Line {
        let mut left = 0;
        let words = text
            .split(' ')
            .map(|w| {
                let width = 10 * w.chars().count() as u32;
                let wb = WordBox::new(w, BBox::new(left, 0, width, 10).unwrap(), None).unwrap();
                left += width + 5;
                wb
            })
            .collect();
        Line::from_words(words).unwrap()
    }

    fn labelled(text: &str) -> Vec<(String, String)> {
        gazetteer_annotate(&[line(text)], &gaz())
            .into_iter()
            .map(|a| (a.label, a.matched_text))
            .collect()
    }

    #[test]
    fn organization_person_country() {
        let t = "Konica Minolta Business Solution Czech spol, s.r.o.";
        assert_eq!(labelled(t), vec![("ORGANIZATION".into(), t.into())]);
        assert_eq!(labelled("PETR GOTTHARD"), vec![("PERSON".into(), "PETR GOTTHARD".into())]);
        assert_eq!(labelled("CZECH REPUBLIC"), vec![("COUNTRY".into(), "CZECH REPUBLIC".into())]);
        assert_eq!(labelled("Seller: ACME Ltd"), vec![("ORGANIZATION".into(), "ACME Ltd".into())]);
        assert_eq!(labelled("Hotel Continental s.r.0"), vec![("ORGANIZATION".into(), "Hotel Continental s.r.0".into())]);
    }

    #[test]
    fn uppercasing_invariance() {
        for t in ["sold by acme ltd, Brno", "Eva novakova, Praha", "new york street 5"] {
            let a: Vec<_> = labelled(t).into_iter().map(|x| x.0).collect();
            let b: Vec<_> = labelled(&t.to_uppercase()).into_iter().map(|x| x.0).collect();
            assert_eq!(a, b, "{t}");
        }
    }

    fn parts(text: &str) -> Vec<(&'static str, String)> {
        parse_address_parts(text, &gaz())
            .into_iter()
            .map(|(l, s, e)| (l.as_str(), text.chars().skip(s).take(e - s).collect()))
            .collect()
    }

    #[test]
    fn address_parts() {
        assert_eq!(parts("Mahenova 9/181"), vec![("road", "Mahenova".into()), ("house_number", "9/181".into())]);
        assert_eq!(
            parts("Zarosicka 4395/13, Brno, Jihomoravsky kraj 62800"),
            vec![
                ("road", "Zarosicka".into()),
                ("house_number", "4395/13".into()),
                ("city", "Brno".into()),
                ("postcode", "62800".into())
            ]
        );
        assert!(parts("total due").is_empty());
        assert_eq!(
            parts("Level 6, 341 George St, Sydney NSW 2000, Australia"),
            vec![
                ("house_number", "341".into()),
                ("road", "George St".into()),
                ("city", "Sydney".into()),
                ("postcode", "2000".into()),
                ("country", "Australia".into())
            ]
        );
        assert_eq!(parts("602 00 Brno"), vec![("postcode", "602 00".into()), ("city", "Brno".into())]);
        assert!(parts("Tel: +44 20 7946 0958").is_empty());
    }

    #[test]
    fn ensemble_rules() {
        let cfg = PipelineConfig::default();
        let g = gaz();
        let lines = vec![line("Mahenova 9/181"), line("602 00 Brno")];
        let block = Block::from_lines(0, lines.clone()).unwrap();
        let out = annotate_entities(&block, &GazetteerAnnotator { gazetteer: g.clone() }, &RuleAddressParser { gazetteer: g.clone() }, &cfg);
        assert_eq!(out.annotations_of(AnnotationKind::AddressPart).count(), 4);

        let lone = Block::from_lines(0, vec![line("Mahenova 9/181")]).unwrap();
        let mut one_cfg = cfg.clone();
        let out = annotate_entities(&lone, &GazetteerAnnotator { gazetteer: g.clone() }, &RuleAddressParser { gazetteer: g.clone() }, &cfg);
        assert_eq!(out.annotations_of(AnnotationKind::AddressPart).count(), 2);
        one_cfg.min_address_items = 3;
        let out = annotate_entities(&lone, &GazetteerAnnotator { gazetteer: g.clone() }, &RuleAddressParser { gazetteer: g }, &one_cfg);
        assert_eq!(out.annotations_of(AnnotationKind::AddressPart).count(), 0);
    }

    #[test]
    fn organization_beats_road_and_road_beats_person() {
        let cfg = PipelineConfig::default();
        let block = Block::from_lines(0, vec![line("Konica Minolta Business Ltd")]).unwrap();
        let org = entity("ORGANIZATION", 0, "Konica Minolta Business Ltd", 0, 27, "t");
        let road = Annotation {
            kind: AnnotationKind::AddressPart,
            label: "road".into(),
            span: Span { line: 0, start: 0, end: 14 },
            matched_text: "Konica Minolta".into(),
            score: 1.0,
            source: "t".into(),
        };
        let mut pc = road.clone();
        pc.label = "postcode".into();
        pc.span = Span { line: 0, start: 24, end: 27 };
        pc.matched_text = "Ltd".into();
        let out = ensemble_locations(&block, &[org.clone()], &[road.clone(), pc.clone()], &cfg);
        assert!(out.has_label(AnnotationKind::Entity, "ORGANIZATION"));
        assert!(!out.has_label(AnnotationKind::AddressPart, "road"));

        let person = entity("PERSON", 0, "Konica Minolta Business Ltd", 0, 14, "t");
        let mut city = pc.clone();
        city.label = "city".into();
        let out = ensemble_locations(&block, &[person], &[road, city], &cfg);
        assert!(!out.has_label(AnnotationKind::Entity, "PERSON"));
        assert!(out.has_label(AnnotationKind::AddressPart, "road"));
    }

    #[test]
    fn shipped_gazetteers_meet_minimum_sizes() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/gazetteers");
        for lang in ["en", "cs"] {
            let g = Gazetteer::load_dir(lang, &root.join(lang)).unwrap();
            let (cities, names, countries) = g.counts();
            assert!(cities >= 500 && names >= 200 && countries > 0, "{lang}");
        }
    }
}
