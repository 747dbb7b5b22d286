//! OCR-aware weighted edit distance and approximate substring search.

use std::collections::HashMap;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Costs are held in integer micro-units so sums are exact and reproducible.
const UNITS: f64 = 1_000_000.0;

pub(crate) fn to_units(cost: f64) -> u64 {
    (cost * UNITS).round() as u64
}

pub(crate) fn from_units(units: u64) -> f64 {
    units as f64 / UNITS
}

/// Case folding that keeps a one-to-one char mapping, so char offsets stay valid.
pub fn fold(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

pub fn fold_str(s: &str) -> Vec<char> {
    s.chars().map(fold).collect()
}

/// Characters whose insertion or deletion is cheap.
pub fn is_punct_or_space(c: char) -> bool {
    c.is_whitespace()
        || c.is_ascii_punctuation()
        || matches!(c, '\u{2013}' | '\u{2014}' | '\u{2018}' | '\u{2019}' | '\u{201c}' | '\u{201d}' | '\u{00b7}' | '\u{2022}')
}

#[derive(Debug, Deserialize)]
struct ConfusionFile {
    pairs: Vec<(String, String)>,
    #[serde(default)]
    digraphs: Vec<(String, String)>,
}

/// Cheap OCR confusions: single-character substitution classes plus two-to-one
/// digraph substitutions (`rn` for `m`).
///
/// Pairs are closed transitively into classes so that any two members of a class
/// substitute at the common cost; this keeps the distance a metric.
#[derive(Debug, Clone)]
pub struct ConfusionTable {
    class_of: HashMap<char, usize>,
    digraphs: Vec<([char; 2], char)>,
    common: u64,
    default: u64,
}

impl ConfusionTable {
    pub fn new(
        pairs: impl IntoIterator<Item = (char, char)>,
        digraphs: impl IntoIterator<Item = ([char; 2], char)>,
        common_cost: f64,
        default_cost: f64,
    ) -> Result<Self> {
        if !(common_cost > 0.0 && common_cost < default_cost) {
            return Err(Error::Config(format!(
                "confusion cost {common_cost} must be in (0, {default_cost})"
            )));
        }
        // union-find over folded characters
        let mut parent: HashMap<char, char> = HashMap::new();
        fn find(parent: &mut HashMap<char, char>, c: char) -> char {
            let p = *parent.entry(c).or_insert(c);
            if p == c {
                return c;
            }
            let root = find(parent, p);
            parent.insert(c, root);
            root
        }
        for (a, b) in pairs {
            let (a, b) = (fold(a), fold(b));
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent.insert(ra.max(rb), ra.min(rb));
            }
        }
        let chars: Vec<char> = parent.keys().copied().collect();
        let mut roots: Vec<char> = chars.iter().map(|c| find(&mut parent, *c)).collect();
        roots.sort_unstable();
        roots.dedup();
        let class_of = chars
            .iter()
            .map(|c| {
                let r = find(&mut parent, *c);
                (*c, roots.binary_search(&r).expect("root present"))
            })
            .collect();
        Ok(ConfusionTable {
            class_of,
            digraphs: digraphs
                .into_iter()
                .map(|([a, b], c)| ([fold(a), fold(b)], fold(c)))
                .collect(),
            common: to_units(common_cost),
            default: to_units(default_cost),
        })
    }

    /// Reads `{"pairs": [["l","t"], ...], "digraphs": [["rn","m"]]}`.
    pub fn from_json(bytes: &[u8], common_cost: f64, default_cost: f64) -> Result<Self> {
        let file: ConfusionFile = serde_json::from_slice(bytes)
            .map_err(|e| Error::Config(format!("invalid confusion table: {e}")))?;
        let single = |s: &str| -> Result<char> {
            let mut it = s.chars();
            match (it.next(), it.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(Error::Config(format!("confusion pair member {s:?} must be one character"))),
            }
        };
        let pairs = file
            .pairs
            .iter()
            .map(|(a, b)| Ok((single(a)?, single(b)?)))
            .collect::<Result<Vec<_>>>()?;
        let digraphs = file
            .digraphs
            .iter()
            .map(|(two, one)| {
                let cs: Vec<char> = two.chars().collect();
                if cs.len() != 2 {
                    return Err(Error::Config(format!("digraph {two:?} must have two characters")));
                }
                Ok(([cs[0], cs[1]], single(one)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs, digraphs, common_cost, default_cost)
    }

    pub fn common_cost(&self) -> f64 {
        from_units(self.common)
    }

    pub fn default_cost(&self) -> f64 {
        from_units(self.default)
    }

    /// Whether two folded characters are in the same confusion class.
    pub fn confusable(&self, a: char, b: char) -> bool {
        match (self.class_of.get(&a), self.class_of.get(&b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    /// Members of `c`'s confusion class other than `c` (folded).
    pub fn partners(&self, c: char) -> Vec<char> {
        let c = fold(c);
        let Some(class) = self.class_of.get(&c) else {
            return Vec::new();
        };
        let mut out: Vec<char> = self
            .class_of
            .iter()
            .filter(|(k, v)| *v == class && **k != c)
            .map(|(k, _)| *k)
            .collect();
        out.sort_unstable();
        out
    }

    pub fn digraph_rules(&self) -> &[([char; 2], char)] {
        &self.digraphs
    }

    pub(crate) fn sub_units(&self, a: char, b: char) -> u64 {
        if a == b {
            0
        } else if self.confusable(a, b) {
            self.common
        } else {
            self.default
        }
    }

    pub(crate) fn indel_units(&self, c: char) -> u64 {
        if is_punct_or_space(c) {
            self.common
        } else {
            self.default
        }
    }

    pub(crate) fn digraph_units(&self, pair: [char; 2], single: char) -> Option<u64> {
        self.digraphs
            .iter()
            .any(|(d, s)| *d == pair && *s == single)
            .then_some(self.common)
    }

    /// Edit distance over folded char slices, in micro-units.
    pub(crate) fn distance_units(&self, a: &[char], b: &[char]) -> u64 {
        let (n, m) = (a.len(), b.len());
        let width = m + 1;
        let mut d = vec![0u64; (n + 1) * width];
        for j in 1..=m {
            d[j] = d[j - 1] + self.indel_units(b[j - 1]);
        }
        for i in 1..=n {
            d[i * width] = d[(i - 1) * width] + self.indel_units(a[i - 1]);
            for j in 1..=m {
                let mut best = d[(i - 1) * width + j] + self.indel_units(a[i - 1]);
                best = best.min(d[i * width + j - 1] + self.indel_units(b[j - 1]));
                best = best.min(d[(i - 1) * width + j - 1] + self.sub_units(a[i - 1], b[j - 1]));
                if i >= 2 {
                    if let Some(c) = self.digraph_units([a[i - 2], a[i - 1]], b[j - 1]) {
                        best = best.min(d[(i - 2) * width + j - 1] + c);
                    }
                }
                if j >= 2 {
                    if let Some(c) = self.digraph_units([b[j - 2], b[j - 1]], a[i - 1]) {
                        best = best.min(d[(i - 1) * width + j - 2] + c);
                    }
                }
                d[i * width + j] = best;
            }
        }
        d[n * width + m]
    }

    /// Lowest distance from `pattern` to any substring of `text` (free start and end).
    fn best_substring_units(&self, text: &[char], pattern: &[char]) -> u64 {
        let (n, m) = (pattern.len(), text.len());
        let width = m + 1;
        let mut d = vec![0u64; (n + 1) * width];
        for i in 1..=n {
            d[i * width] = d[(i - 1) * width] + self.indel_units(pattern[i - 1]);
            for j in 1..=m {
                let mut best = d[(i - 1) * width + j] + self.indel_units(pattern[i - 1]);
                best = best.min(d[i * width + j - 1] + self.indel_units(text[j - 1]));
                best = best.min(d[(i - 1) * width + j - 1] + self.sub_units(pattern[i - 1], text[j - 1]));
                if i >= 2 {
                    if let Some(c) = self.digraph_units([pattern[i - 2], pattern[i - 1]], text[j - 1]) {
                        best = best.min(d[(i - 2) * width + j - 1] + c);
                    }
                }
                if j >= 2 {
                    if let Some(c) = self.digraph_units([text[j - 2], text[j - 1]], pattern[i - 1]) {
                        best = best.min(d[(i - 1) * width + j - 2] + c);
                    }
                }
                d[i * width + j] = best;
            }
        }
        (0..=m).map(|j| d[n * width + j]).min().unwrap_or(0)
    }
}

/// Weighted Levenshtein distance after case folding: confusion-class
/// substitutions and punctuation/whitespace insertions or deletions cost the
/// common cost, every other edit the default cost. No transpositions.
pub fn weighted_edit_distance(a: &str, b: &str, table: &ConfusionTable) -> f64 {
    from_units(table.distance_units(&fold_str(a), &fold_str(b)))
}

/// A substring match of a phrase inside a line, in char offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarMatch {
    pub start: usize,
    pub end: usize,
    pub distance: f64,
}

/// Largest accepted distance for a phrase of `len` chars.
pub(crate) fn threshold_units(len: usize, ratio: f64) -> u64 {
    to_units(ratio * len as f64)
}

/// Every start offset's best span within the length window whose distance is within
/// the threshold. For one start, ties prefer the length closest to the phrase length,
/// then the shorter span.
pub(crate) fn similar_candidates(
    line: &[char],
    phrase: &[char],
    ratio: f64,
    table: &ConfusionTable,
) -> Vec<(usize, usize, u64)> {
    let len = phrase.len();
    if len == 0 || line.is_empty() {
        return Vec::new();
    }
    let limit = threshold_units(len, ratio);
    if table.best_substring_units(line, phrase) > limit {
        return Vec::new();
    }
    let window = (ratio * len as f64).ceil() as usize;
    let min_len = len.saturating_sub(window).max(1);
    let max_len = len + window;
    let mut out = Vec::new();
    for start in 0..line.len() {
        let mut best: Option<(usize, u64)> = None;
        for l in min_len..=max_len {
            let end = start + l;
            if end > line.len() {
                break;
            }
            let d = table.distance_units(&line[start..end], phrase);
            if d > limit {
                continue;
            }
            let better = match best {
                None => true,
                Some((bl, bd)) => {
                    d < bd || (d == bd && (l.abs_diff(len), l) < (bl.abs_diff(len), bl))
                }
            };
            if better {
                best = Some((l, d));
            }
        }
        if let Some((l, d)) = best {
            out.push((start, start + l, d));
        }
    }
    out
}

/// Best-matching substring of `line_text` for `phrase`: lowest distance, then leftmost.
/// Spans range over lengths within `ceil(ratio * len)` of the phrase length and are
/// accepted when their distance is at most `ratio * len`.
pub fn find_keyword_similar(
    line_text: &str,
    phrase: &str,
    ratio: f64,
    table: &ConfusionTable,
) -> Option<SimilarMatch> {
    let line = fold_str(line_text);
    let pat = fold_str(phrase);
    similar_candidates(&line, &pat, ratio, table)
        .into_iter()
        .min_by_key(|(s, _, d)| (*d, *s))
        .map(|(start, end, d)| SimilarMatch {
            start,
            end,
            distance: from_units(d),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn table() -> ConfusionTable {
        ConfusionTable::new(
            [('l', 't'), ('t', 'f'), ('l', 'f'), ('u', 'v'), ('O', '0'), ('l', '1'), ('I', 'l')],
            [(['r', 'n'], 'm')],
            0.1,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn worked_examples() {
        let t = table();
        assert_eq!(weighted_edit_distance("invoice", "invoice", &t), 0.0);
        assert_eq!(weighted_edit_distance("fotal", "total", &t), 0.1);
        assert_eq!(weighted_edit_distance("invoice:", "invoice", &t), 0.1);
        assert_eq!(weighted_edit_distance("rate", "date", &t), 1.0);
        assert_eq!(weighted_edit_distance("INVOICE", "invoice", &t), 0.0);
        assert_eq!(weighted_edit_distance("payrnent", "payment", &t), 0.1);
        assert_eq!(weighted_edit_distance("", "ab", &t), 2.0);
    }

    #[test]
    fn classes_are_closed() {
        let t = table();
        // i~l and l~1 imply i~1
        assert!(t.confusable('i', '1'));
        assert!(t.confusable('t', '1'));
        assert!(!t.confusable('u', 'l'));
        assert_eq!(t.partners('u'), vec!['v']);
    }

    #[test]
    fn similar_search_examples() {
        let t = table();
        let m = find_keyword_similar("Date ot issue: 1.1.2020", "date of issue", 0.15, &t).unwrap();
        assert_eq!((m.start, m.end), (0, 13));
        assert_eq!(m.distance, 0.1);
        let m = find_keyword_similar("Invoice Number", "invoice number", 0.15, &t).unwrap();
        assert_eq!(m.distance, 0.0);
        assert!(find_keyword_similar("rate", "date", 0.15, &t).is_none());
    }

    #[test]
    fn rejects_bad_costs() {
        assert!(ConfusionTable::new([], [], 1.0, 1.0).is_err());
        assert!(ConfusionTable::from_json(br#"{"pairs":[["ab","c"]]}"#, 0.1, 1.0).is_err());
    }
}
