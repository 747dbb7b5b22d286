//! Bottom-up physical layout analysis: words to lines, lines to blocks, then
//! absolute zones and the relative neighbor graph.

use std::cmp::Ordering;

use crate::config::PipelineConfig;
use crate::docmodel::{BBox, Block, Direction, Line, Page, WordBox, ZoneH, ZoneV};
use crate::ingest::OcrPage;

struct LineAcc {
    words: Vec<WordBox>,
    bbox: BBox,
}

impl LineAcc {
    fn first(&self) -> &WordBox {
        &self.words[0]
    }

    fn last(&self) -> &WordBox {
        self.words.last().expect("non-empty")
    }

    fn accepts(&self, w: &WordBox, cfg: &PipelineConfig) -> bool {
        let first = self.first();
        let last = self.last();
        // alignment
        let min_h = self.bbox.height.min(w.bbox.height) as f64;
        if (self.bbox.vertical_overlap(&w.bbox) as f64) < cfg.line_vertical_overlap * min_h {
            return false;
        }
        // style
        let fh = first.style.font_height as f64;
        if (w.style.font_height as f64 - fh).abs() > cfg.font_height_tolerance * fh {
            return false;
        }
        // distance
        if w.bbox.left < last.bbox.left {
            return false;
        }
        let gap = w.bbox.left as f64 - last.bbox.right() as f64;
        gap < cfg.line_gap_factor * first.bbox.height as f64
    }
}

fn median(mut v: Vec<u32>) -> u32 {
    if v.is_empty() {
        return 1;
    }
    v.sort_unstable();
    v[v.len() / 2]
}

/// Reading order: top coordinate bucketed to half the median word height, then left.
fn reading_order(words: &[WordBox]) -> Vec<&WordBox> {
    let bucket = (median(words.iter().map(|w| w.bbox.height).collect()) / 2).max(1);
    let mut sorted: Vec<&WordBox> = words.iter().collect();
    sorted.sort_by_key(|w| (w.bbox.top / bucket, w.bbox.left, w.bbox.top));
    sorted
}

/// Groups the words of one page into lines by alignment, style and distance.
pub fn group_words_into_lines(words: &[WordBox], cfg: &PipelineConfig) -> Vec<Line> {
    let mut lines: Vec<LineAcc> = Vec::new();
    let mut current: Option<usize> = None;
    for w in reading_order(words) {
        let target = match current {
            Some(c) if lines[c].accepts(w, cfg) => Some(c),
            _ => lines
                .iter()
                .enumerate()
                .filter(|(_, l)| l.accepts(w, cfg))
                .max_by(|(ia, a), (ib, b)| {
                    a.bbox
                        .vertical_overlap(&w.bbox)
                        .cmp(&b.bbox.vertical_overlap(&w.bbox))
                        .then(ib.cmp(ia))
                })
                .map(|(i, _)| i),
        };
        match target {
            Some(i) => {
                let l = &mut lines[i];
                l.bbox = l.bbox.union(&w.bbox);
                l.words.push(w.clone());
                current = Some(i);
            }
            None => {
                lines.push(LineAcc {
                    words: vec![w.clone()],
                    bbox: w.bbox,
                });
                current = Some(lines.len() - 1);
            }
        }
    }
    let mut out: Vec<Line> = lines
        .into_iter()
        .map(|l| Line::from_words(l.words).expect("accumulated lines are non-empty"))
        .collect();
    out.sort_by_key(|l| (l.bbox.top, l.bbox.left));
    out
}

fn lines_align(prev: &Line, next: &Line) -> bool {
    if prev.bbox.horizontal_overlap(&next.bbox) > 0 {
        return true;
    }
    let tol = prev.avg_char_width();
    let close = |a: f64, b: f64| (a - b).abs() <= tol;
    close(prev.bbox.left as f64, next.bbox.left as f64)
        || close(prev.bbox.right() as f64, next.bbox.right() as f64)
        || close(prev.bbox.center_x(), next.bbox.center_x())
}

/// Vertical gap from `prev` down to `next`, when `next` may continue the block `prev` ends.
fn block_gap(prev: &Line, next: &Line, cfg: &PipelineConfig) -> Option<i64> {
    if next.bbox.top <= prev.bbox.top {
        return None;
    }
    let gap = next.bbox.top as i64 - prev.bbox.bottom() as i64;
    if gap as f64 >= cfg.block_gap_factor * prev.bbox.height as f64 {
        return None;
    }
    let pf = prev.font_height();
    if (next.font_height() - pf).abs() > cfg.font_height_tolerance * pf {
        return None;
    }
    lines_align(prev, next).then_some(gap)
}

/// Groups lines (any order) into blocks with fresh ids numbered from 0.
pub fn group_lines_into_blocks(mut lines: Vec<Line>, cfg: &PipelineConfig) -> Vec<Block> {
    lines.sort_by_key(|l| (l.bbox.top, l.bbox.left));
    let mut groups: Vec<Vec<Line>> = Vec::new();
    for line in lines {
        let best = groups
            .iter()
            .enumerate()
            .filter_map(|(i, g)| {
                let prev = g.last().expect("non-empty");
                block_gap(prev, &line, cfg).map(|gap| (i, gap, prev.bbox.horizontal_overlap(&line.bbox)))
            })
            .min_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)).then(a.0.cmp(&b.0)))
            .map(|(i, _, _)| i);
        match best {
            Some(i) => groups[i].push(line),
            None => groups.push(vec![line]),
        }
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(i, g)| Block::from_lines(i as u32, g).expect("groups are non-empty"))
        .collect()
}

pub fn assign_zones(mut page: Page, cfg: &PipelineConfig) -> Page {
    let h = page.height.max(1) as f64;
    let mid = page.width as f64 / 2.0;
    let z = &cfg.zones;
    for b in &mut page.blocks {
        let rel = b.bbox.center_y() / h;
        b.zone_v = if rel < z.header {
            ZoneV::Header
        } else if rel < z.top {
            ZoneV::Top
        } else if rel < z.middle {
            ZoneV::Middle
        } else if rel < z.bottom {
            ZoneV::Bottom
        } else {
            ZoneV::Footer
        };
        b.zone_h = if b.bbox.center_x() <= mid { ZoneH::Left } else { ZoneH::Right };
    }
    page
}

/// Distance from `a` to `b` in direction `dir`, when `b` lies that way with enough
/// projection overlap on the perpendicular axis.
fn directional_distance(a: &BBox, b: &BBox, dir: Direction, min_overlap: f64) -> Option<f64> {
    let h_ok = || b.horizontal_overlap(a) as f64 >= min_overlap * a.width.min(b.width) as f64 && b.horizontal_overlap(a) > 0;
    let v_ok = || b.vertical_overlap(a) as f64 >= min_overlap * a.height.min(b.height) as f64 && b.vertical_overlap(a) > 0;
    match dir {
        Direction::Bottom => (b.top >= a.bottom() && h_ok()).then(|| (b.top - a.bottom()) as f64),
        Direction::Top => (b.bottom() <= a.top && h_ok()).then(|| (a.top - b.bottom()) as f64),
        Direction::Right => (b.left >= a.right() && v_ok()).then(|| (b.left - a.right()) as f64),
        Direction::Left => (b.right() <= a.left && v_ok()).then(|| (a.left - b.right()) as f64),
        Direction::BottomRight => (b.top >= a.bottom() && b.left >= a.right()).then(|| {
            let dx = (b.left - a.right()) as f64;
            let dy = (b.top - a.bottom()) as f64;
            dx.hypot(dy)
        }),
    }
}

fn nearest(page: &Page, idx: usize, dir: Direction, min_overlap: f64) -> Option<usize> {
    let a = &page.blocks[idx].bbox;
    page.blocks
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != idx)
        .filter_map(|(j, b)| directional_distance(a, &b.bbox, dir, min_overlap).map(|d| (j, d)))
        .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(Ordering::Equal).then(x.0.cmp(&y.0)))
        .map(|(j, _)| j)
}

fn opposite(dir: Direction) -> Option<Direction> {
    match dir {
        Direction::Top => Some(Direction::Bottom),
        Direction::Bottom => Some(Direction::Top),
        Direction::Left => Some(Direction::Right),
        Direction::Right => Some(Direction::Left),
        Direction::BottomRight => None,
    }
}

/// Fills each block's top/bottom/left/right/bottom-right neighbors.
///
/// Top/bottom and left/right links are kept only between mutually nearest
/// blocks, so `A.bottom == B` always implies `B.top == A`.
pub fn compute_neighbors(mut page: Page, cfg: &PipelineConfig) -> Page {
    let n = page.blocks.len();
    let mut result = vec![crate::docmodel::Neighbors::default(); n];
    for i in 0..n {
        for dir in Direction::ALL {
            let Some(j) = nearest(&page, i, *dir, cfg.neighbor_overlap) else {
                continue;
            };
            let keep = match opposite(*dir) {
                Some(back) => nearest(&page, j, back, cfg.neighbor_overlap) == Some(i),
                None => true,
            };
            if keep {
                result[i].set(*dir, Some(page.blocks[j].id));
            }
        }
    }
    for (b, nb) in page.blocks.iter_mut().zip(result) {
        b.neighbors = nb;
    }
    page
}

/// Full layout analysis of one OCR page.
pub fn analyze_page(ocr: &OcrPage, cfg: &PipelineConfig) -> Page {
    let lines = group_words_into_lines(&ocr.words, cfg);
    let blocks = group_lines_into_blocks(lines, cfg);
    let mut page = Page::new(ocr.number, ocr.width, ocr.height);
    // OCR page dimensions may be smaller than the text extent on malformed input
    for b in &blocks {
        page.width = page.width.max(b.bbox.right());
        page.height = page.height.max(b.bbox.bottom());
    }
    page.blocks = blocks;
    let page = assign_zones(page, cfg);
    compute_neighbors(page, cfg)
}
