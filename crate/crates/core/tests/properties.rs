mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use invoicekit::docmodel::{Annotation, AnnotationKind, BBox, Block, FieldKind, Line, PartyRole, Span, WordBox};
use invoicekit::evalharness::*;
use invoicekit::extract::{default_field_specs, neighbor_score, ExtractionReport};
use invoicekit::ingest::OcrPage;
use invoicekit::layout::{analyze_page, group_lines_into_blocks, group_words_into_lines};
use invoicekit::pipeline::Pipeline;
use invoicekit::ruleengine::parse_rule;
use invoicekit::textannot::keywords::match_keywords_in_line;
use invoicekit::textannot::{validate_and_correct, weighted_edit_distance, ConfusionTable, KeywordSet, MatchMode};
use invoicekit::PipelineConfig;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn table() -> ConfusionTable {
    ConfusionTable::from_json(
        include_bytes!("../../../config/confusions.json"),
        0.1,
        1.0,
    )
    .unwrap()
}

fn small_string() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(common::ALPHABET.to_vec()), 0..=10).prop_map(|v| v.into_iter().collect())
}

fn page_from_seed(seed: u64) -> OcrPage {
    common::random_page(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn field_kind() -> impl Strategy<Value = FieldKind> {
    prop::sample::select(FieldKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn distance_matches_oracle(a in small_string(), b in small_string()) {
        let classes = common::confusion_classes();
        let d = weighted_edit_distance(&a, &b, &table());
        let o = common::oracle_distance_tenths(&a, &b, &classes);
        prop_assert_eq!((d * 10.0).round() as u64, o);
        prop_assert!((d - o as f64 / 10.0).abs() < 1e-9);
    }

    #[test]
    fn distance_is_symmetric_and_zero_only_on_equal(a in small_string(), b in small_string()) {
        let t = table();
        prop_assert_eq!(weighted_edit_distance(&a, &b, &t), weighted_edit_distance(&b, &a, &t));
        let zero = weighted_edit_distance(&a, &b, &t) == 0.0;
        prop_assert_eq!(zero, a.to_lowercase() == b.to_lowercase());
    }

    #[test]
    fn distance_triangle_inequality(a in small_string(), b in small_string(), c in small_string()) {
        let t = table();
        let ab = weighted_edit_distance(&a, &b, &t);
        let bc = weighted_edit_distance(&b, &c, &t);
        let ac = weighted_edit_distance(&a, &c, &t);
        prop_assert!(ac <= ab + bc + 1e-9, "{} > {} + {}", ac, ab, bc);
    }

    #[test]
    fn regex_hits_are_covered_by_similarity_hits(line in "[A-Za-z0-9 :.]{0,40}", idx in 0usize..64) {
        let ks = KeywordSet::from_json(include_bytes!("../../../config/keywords/en/keywords.json")).unwrap();
        let phrases: Vec<String> = ks.phrases().map(|(_, p)| p.phrase.clone()).collect();
        // splice a shipped phrase in so hits are common
        let text = format!("{line} {}", phrases[idx % phrases.len()]);
        let t = table();
        let regex = match_keywords_in_line(&text, &ks, MatchMode::Regex, &t, 0.15);
        let sim = match_keywords_in_line(&text, &ks, MatchMode::Similarity, &t, 0.15);
        for h in &regex {
            prop_assert!(sim.iter().any(|s| s.label == h.label && s.start <= h.start && h.end <= s.end), "{:?}", h);
        }
    }

    #[test]
    fn correction_is_idempotent(v in "[A-Za-z0-9 @.,/:-]{0,24}", field in field_kind()) {
        let once = validate_and_correct(&v, field).value;
        let twice = validate_and_correct(&once, field);
        prop_assert_eq!(&twice.value, &once);
        prop_assert!(twice.log.iter().all(|c| c.before == c.after), "{:?}", twice.log);
    }

    #[test]
    fn match_class_reflexive_and_symmetric(a in "[A-Za-z0-9 ,.]{0,16}", b in "[A-Za-z0-9 ,.]{0,16}", field in field_kind()) {
        let cfg = PipelineConfig::default();
        prop_assert_eq!(classify_match(&a, &a, field, &cfg), MatchClass::Match);
        if !matches!(field, FieldKind::CompanyName | FieldKind::Address) {
            prop_assert_eq!(classify_match(&a, &b, field, &cfg), classify_match(&b, &a, field, &cfg));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layout_partitions_words(seed in any::<u64>()) {
        let ocr = page_from_seed(seed);
        let page = analyze_page(&ocr, &PipelineConfig::default());
        let mut seen: Vec<&WordBox> = page.blocks.iter().flat_map(|b| &b.lines).flat_map(|l| &l.words).collect();
        prop_assert_eq!(seen.len(), ocr.words.len());
        let key = |w: &WordBox| (w.bbox.left, w.bbox.top, w.bbox.width, w.bbox.height, w.text.clone());
        seen.sort_by_key(|w| key(w));
        let mut input: Vec<&WordBox> = ocr.words.iter().collect();
        input.sort_by_key(|w| key(w));
        prop_assert!(seen.iter().zip(&input).all(|(a, b)| key(a) == key(b)));
        let ids: BTreeSet<u32> = page.blocks.iter().map(|b| b.id).collect();
        prop_assert_eq!(ids.len(), page.blocks.len());
    }

    #[test]
    fn layout_regrouping_is_idempotent(seed in any::<u64>()) {
        let cfg = PipelineConfig::default();
        let page = analyze_page(&page_from_seed(seed), &cfg);
        let lines: Vec<Line> = page.blocks.iter().flat_map(|b| b.lines.clone()).collect();
        let regrouped = group_lines_into_blocks(lines, &cfg);
        let as_text = |bs: &[Block]| bs.iter().map(|b| (b.bbox.left, b.bbox.top, b.bbox.width, b.bbox.height, b.text())).collect::<BTreeSet<_>>();
        prop_assert_eq!(as_text(&regrouped), as_text(&page.blocks));
    }

    #[test]
    fn layout_is_deterministic(seed in any::<u64>()) {
        let cfg = PipelineConfig::default();
        let ocr = page_from_seed(seed);
        prop_assert_eq!(analyze_page(&ocr, &cfg), analyze_page(&ocr, &cfg));
        let mut reversed = ocr.clone();
        reversed.words.reverse();
        prop_assert_eq!(analyze_page(&reversed, &cfg), analyze_page(&ocr, &cfg));
    }

    #[test]
    fn neighbors_are_antisymmetric(seed in any::<u64>()) {
        use invoicekit::docmodel::Direction::*;
        let page = analyze_page(&page_from_seed(seed), &PipelineConfig::default());
        for b in &page.blocks {
            for (dir, back) in [(Top, Bottom), (Bottom, Top), (Left, Right), (Right, Left)] {
                if let Some(n) = page.neighbor(b, dir) {
                    prop_assert_eq!(n.neighbors.get(back), Some(b.id));
                }
            }
        }
    }

    #[test]
    fn wider_line_gap_never_splits_lines(seed in any::<u64>(), factor in 1.0f64..3.0) {
        let ocr = page_from_seed(seed);
        let base = PipelineConfig::default();
        let wide = PipelineConfig { line_gap_factor: factor, ..base.clone() };
        let n_base = group_words_into_lines(&ocr.words, &base).len();
        let n_wide = group_words_into_lines(&ocr.words, &wide).len();
        prop_assert!(n_wide <= n_base, "{} lines became {}", n_base, n_wide);
    }
}

fn annotated_block(anns: &[(AnnotationKind, &str)]) -> Block {
    let line = Line::from_words(vec![WordBox::new("x", BBox::new(0, 0, 10, 10).unwrap(), None).unwrap()]).unwrap();
    let mut b = Block::from_lines(0, vec![line]).unwrap();
    b.annotations = anns
        .iter()
        .map(|(kind, label)| Annotation {
            kind: *kind,
            label: label.to_string(),
            span: Span { line: 0, start: 0, end: 1 },
            matched_text: "x".into(),
            score: 1.0,
            source: "test".into(),
        })
        .collect();
    b
}

const LABELS: &[(AnnotationKind, &str)] = &[
    (AnnotationKind::DataType, "PRICE"),
    (AnnotationKind::DataType, "DATE"),
    (AnnotationKind::DataType, "NUMBER"),
    (AnnotationKind::Entity, "ORGANIZATION"),
    (AnnotationKind::Keyword, "INVOICE DATE"),
    (AnnotationKind::Keyword, "TOTAL DUE"),
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn unrelated_keyword_never_raises_neighbor_score(
        picks in prop::collection::vec(0usize..LABELS.len(), 0..6),
        spec_idx in 0usize..12,
        extra in prop::sample::select(vec!["IBAN", "SELLER", "BUYER", "PAGE NUMBER", "TITLE"]),
    ) {
        let cfg = PipelineConfig::default();
        let spec = &default_field_specs()[spec_idx % default_field_specs().len()];
        let anns: Vec<(AnnotationKind, &str)> = picks.iter().map(|i| LABELS[*i]).collect();
        let before = neighbor_score(&annotated_block(&anns), spec, &cfg);
        let mut more = anns.clone();
        more.push((AnnotationKind::Keyword, extra));
        let after = neighbor_score(&annotated_block(&more), spec, &cfg);
        prop_assert!(after <= before);
    }

    #[test]
    fn score_counts_sum_to_items(
        items in prop::collection::vec((field_kind(), "[a-c]{0,3}", prop::option::of("[a-c]{0,3}")), 0..20),
    ) {
        let cfg = PipelineConfig::default();
        let mut gold_items = Vec::new();
        let mut fields = Vec::new();
        for (i, (field, gold, got)) in items.iter().enumerate() {
            // distinct roles keep (field, role) keys unique
            let role = [PartyRole::None, PartyRole::Seller, PartyRole::Buyer, PartyRole::Delivery][i % 4];
            if gold_items.iter().any(|g: &GoldItem| g.field == *field && g.role == role) {
                continue;
            }
            gold_items.push(GoldItem { field: *field, role, value: gold.clone() });
            if let Some(v) = got {
                fields.push(invoicekit::docmodel::ExtractedField {
                    field: *field,
                    role,
                    value: v.clone(),
                    key_conf: 0.7,
                    data_conf: 0.8,
                    combine_conf: 1.0,
                    source: invoicekit::docmodel::SourceRef { page: 1, block: 0, line: 0 },
                });
            }
        }
        let n = gold_items.len();
        let gold = vec![GoldRecord { source_id: "s".into(), items: gold_items }];
        let report = ExtractionReport { source_id: "s".into(), language: "en".into(), fields };
        let table = score_run(&gold, &[report], &cfg).unwrap();
        prop_assert_eq!(table.overall.total(), n);
        let mut per_field: BTreeMap<String, usize> = BTreeMap::new();
        for it in &table.items {
            *per_field.entry(it.field.as_str().to_string()).or_default() += 1;
        }
        for (k, c) in &table.by_field {
            prop_assert_eq!(c.total(), per_field[k]);
        }
        prop_assert_eq!(table.by_item.values().map(|c| c.total()).sum::<usize>(), n);
    }
}

const ATOMS: &[&str] = &[
    "num_lines == 1",
    "num_lines <= 3",
    "zone_v == footer",
    "zone_v in [header, top]",
    "SELLER in block_annot.keyword",
    "block_annot.data in [ORGANIZATION, VAT NUMBER]",
    "top_blocks.num_lines == 1",
    "left_blocks.block_annot.keyword in [TOTAL DUE, INVOICE DATE]",
    "aligned_with(SELLER)",
    "exists_role(BUYER)",
    "content_disjoint(SELLER, [COMPANY, ADDRESS])",
];

fn expr_text() -> impl Strategy<Value = String> {
    let leaf = prop::sample::select(ATOMS.to_vec()).prop_map(str::to_string);
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} and {b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) or ({b})")),
            inner.clone().prop_map(|a| format!("not ({a})")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rule_print_parse_fixpoint(body in expr_text(), target in prop::sample::select(vec!["seller info", "SELLER", "bank info"])) {
        let rule = parse_rule(&format!("{target} -> {body}")).unwrap();
        let printed = rule.to_string();
        let reparsed = parse_rule(&printed).unwrap();
        prop_assert_eq!(&reparsed, &rule);
        prop_assert_eq!(reparsed.to_string(), printed);
    }
}

#[test]
fn confidence_triples_take_three_values() {
    let p = Pipeline::new(PipelineConfig::default(), MatchMode::Similarity).unwrap();
    let templates = load_templates(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/templates"))).unwrap();
    let corpus = generate_corpus(12, &templates, &NoiseModel::with_rate(0.02), &p.resources.confusions, 11).unwrap();
    let reports = extract_corpus(&corpus, &p).unwrap();
    assert!(reports.iter().all(|r| !r.fields.is_empty()));
    for f in reports.iter().flat_map(|r| &r.fields) {
        assert!([0.7, 0.8, 1.0].contains(&f.combine_conf), "{f:?}");
    }
    // same document and config give the same report
    assert_eq!(extract_corpus(&corpus, &p).unwrap(), reports);
}
