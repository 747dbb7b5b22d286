//! Helpers shared by the property and acceptance tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use invoicekit::docmodel::{BBox, WordBox};
use invoicekit::ingest::OcrPage;
use rand::Rng;

/// Confusion pairs and digraphs of the shipped table, restated independently.
pub const PAIRS: &[(char, char)] = &[
    ('l', 't'),
    ('t', 'f'),
    ('l', 'f'),
    ('u', 'v'),
    ('O', '0'),
    ('l', '1'),
    ('I', 'l'),
    ('S', '5'),
    ('B', '8'),
    ('Z', '2'),
];
pub const DIGRAPHS: &[(&str, char)] = &[("rn", 'm')];

/// Twelve characters covering confusion pairs, a digraph and punctuation.
pub const ALPHABET: &[char] = &['l', 't', 'f', '1', 'i', 'o', '0', 'r', 'n', 'm', ' ', ':'];

fn lower(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

/// Confusion classes as the closure of the pair relation, by repeated relaxation.
pub fn confusion_classes() -> HashMap<char, usize> {
    let mut class: HashMap<char, usize> = HashMap::new();
    let mut next = 0;
    for (a, b) in PAIRS {
        for c in [lower(*a), lower(*b)] {
            class.entry(c).or_insert_with(|| {
                next += 1;
                next
            });
        }
    }
    loop {
        let mut changed = false;
        for (a, b) in PAIRS {
            let (ca, cb) = (class[&lower(*a)], class[&lower(*b)]);
            if ca != cb {
                let (keep, drop) = (ca.min(cb), ca.max(cb));
                for v in class.values_mut() {
                    if *v == drop {
                        *v = keep;
                    }
                }
                changed = true;
            }
        }
        if !changed {
            return class;
        }
    }
}

fn cheap_indel(c: char) -> bool {
    c.is_whitespace() || c.is_ascii_punctuation()
}

/// Weighted edit distance in tenths (cheap edit 1, other edit 10), computed as
/// a shortest path over the alignment lattice with Dijkstra's algorithm.
pub fn oracle_distance_tenths(a: &str, b: &str, classes: &HashMap<char, usize>) -> u64 {
    let a: Vec<char> = a.chars().map(lower).collect();
    let b: Vec<char> = b.chars().map(lower).collect();
    let sub = |x: char, y: char| -> u64 {
        if x == y {
            0
        } else if classes.get(&x).is_some_and(|cx| classes.get(&y) == Some(cx)) {
            1
        } else {
            10
        }
    };
    let indel = |c: char| if cheap_indel(c) { 1 } else { 10 };
    let digraph = |two: &[char], one: char| DIGRAPHS.iter().any(|(d, s)| d.chars().eq(two.iter().copied()) && *s == one);

    let mut best: HashMap<(usize, usize), u64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0u64, 0usize, 0usize)));
    while let Some(Reverse((d, i, j))) = heap.pop() {
        if best.get(&(i, j)).is_some_and(|x| *x <= d) {
            continue;
        }
        best.insert((i, j), d);
        if (i, j) == (a.len(), b.len()) {
            return d;
        }
        let mut moves: Vec<(u64, usize, usize)> = Vec::new();
        if i < a.len() {
            moves.push((indel(a[i]), i + 1, j));
        }
        if j < b.len() {
            moves.push((indel(b[j]), i, j + 1));
        }
        if i < a.len() && j < b.len() {
            moves.push((sub(a[i], b[j]), i + 1, j + 1));
        }
        if i + 1 < a.len() && j < b.len() && digraph(&a[i..i + 2], b[j]) {
            moves.push((1, i + 2, j + 1));
        }
        if j + 1 < b.len() && i < a.len() && digraph(&b[j..j + 2], a[i]) {
            moves.push((1, i + 1, j + 2));
        }
        for (c, ni, nj) in moves {
            heap.push(Reverse((d + c, ni, nj)));
        }
    }
    unreachable!("the end state is always reachable")
}

pub fn random_string(rng: &mut impl Rng, max_len: usize) -> String {
    let n = rng.random_range(0..=max_len);
    (0..n).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())]).collect()
}

/// A page of random text blocks: each block has 1 to 5 lines of 1 to 6 words
/// with a per-block font size and small vertical jitter.
pub fn random_page(rng: &mut impl Rng) -> OcrPage {
    let (width, height) = (2480u32, 3508u32);
    let mut words = Vec::new();
    for _ in 0..rng.random_range(0..10) {
        let font = rng.random_range(16..48u32);
        let x0 = rng.random_range(0..width - 800);
        let y0 = rng.random_range(0..height - 400);
        for l in 0..rng.random_range(1..=5u32) {
            let mut x = x0 + rng.random_range(0..=font / 4);
            let y = y0 + l * (font * 14 / 10) + rng.random_range(0..=font / 8);
            for _ in 0..rng.random_range(1..=6) {
                let chars = rng.random_range(1..10u32);
                let w = chars * font * 55 / 100 + 1;
                let text: String = (0..chars).map(|_| rng.random_range(b'a'..=b'z') as char).collect();
                words.push(WordBox::new(text, BBox::new(x, y, w, font).unwrap(), Some(0.9)).unwrap());
                x += w + rng.random_range(font / 5..font * 2);
            }
        }
    }
    OcrPage { number: 1, width, height, words }
}
