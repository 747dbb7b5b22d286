use invoicekit::docmodel::{Annotation, AnnotationKind, BBox, Block, BlockType, Line, Page, PartyRole, Span, WordBox};
use invoicekit::layout::compute_neighbors;
use invoicekit::ruleengine::*;
use invoicekit::PipelineConfig;

const FIG7: &str = "seller info -> block_annot.data in [ORGANIZATION, PERSON, LOCATION, CITY,
        COUNTRY, EMAIL, PHONE] and SELLER in top_blocks.block_annot.keyword
        and top_blocks.num_lines == 1";

fn ann(kind: AnnotationKind, label: &str) -> Annotation {
    Annotation {
        kind,
        label: label.into(),
        span: Span { line: 0, start: 0, end: 1 },
        matched_text: "x".into(),
        score: 1.0,
        source: "test".into(),
    }
}

/// Block of `n` lines, each 20 px tall with a 10 px gap, 200 px wide.
fn block(id: u32, left: u32, top: u32, n: usize, anns: &[(AnnotationKind, &str)]) -> Block {
    let lines = (0..n)
        .map(|i| {
            let bb = BBox::new(left, top + 30 * i as u32, 200, 20).unwrap();
            Line::from_words(vec![WordBox::new("word", bb, None).unwrap()]).unwrap()
        })
        .collect();
    let mut b = Block::from_lines(id, lines).unwrap();
    b.annotations = anns.iter().map(|(k, l)| ann(*k, l)).collect();
    b
}

fn page(blocks: Vec<Block>) -> Page {
    let mut p = Page::new(1, 1000, 1400);
    p.blocks = blocks;
    compute_neighbors(p, &PipelineConfig::default())
}

use AnnotationKind::{AddressPart, DataType, Entity, Keyword};

#[test]
fn figure_rule_traces() {
    let rule = parse_rule(FIG7).unwrap();
    let p = page(vec![
        block(0, 100, 100, 1, &[(Keyword, "SELLER")]),
        block(1, 100, 140, 3, &[(Entity, "ORGANIZATION"), (Entity, "CITY")]),
    ]);
    assert!(eval_rule(&rule, &p.blocks[1], &p).unwrap());

    let p2 = page(vec![
        block(0, 100, 100, 2, &[(Keyword, "SELLER")]),
        block(1, 100, 170, 3, &[(Entity, "ORGANIZATION"), (Entity, "CITY")]),
    ]);
    assert!(!eval_rule(&rule, &p2.blocks[1], &p2).unwrap());

    let one = parse_rule("x -> num_lines == 1").unwrap();
    assert!(eval_rule(&one, &p.blocks[0], &p).unwrap());
    assert!(!eval_rule(&one, &p.blocks[1], &p).unwrap());
    // no top neighbor: atom false
    assert!(!eval_rule(&rule, &p.blocks[0], &p).unwrap());
}

#[test]
fn block_types_additive_and_empty() {
    let rule = parse_rule(FIG7).unwrap();
    let mut fig = page(vec![
        block(0, 100, 100, 1, &[(Keyword, "SELLER")]),
        block(1, 100, 140, 3, &[(Entity, "ORGANIZATION")]),
        block(2, 600, 600, 2, &[]),
    ]);
    let rules = vec![(BlockType::SellerInfo, rule)];
    fig = detect_block_types(&fig, &rules).unwrap();
    assert_eq!(fig.blocks[1].block_types.iter().copied().collect::<Vec<_>>(), vec![BlockType::SellerInfo]);
    assert_eq!(fig.blocks[2].block_types.iter().copied().collect::<Vec<_>>(), vec![BlockType::Empty]);

    let none = detect_block_types(&fig, &[]).unwrap();
    assert!(none.blocks.iter().all(|b| b.block_types.len() == 1 && b.block_types.contains(&BlockType::Empty)));

    let both = page(vec![block(0, 100, 100, 2, &[(Keyword, "IBAN"), (Keyword, "INVOICE NUMBER")])]);
    let defaults = block_type_rules(DEFAULT_BLOCK_TYPE_RULES).unwrap();
    let typed = detect_block_types(&both, &defaults).unwrap();
    assert!(typed.blocks[0].block_types.contains(&BlockType::BankInfo));
    assert!(typed.blocks[0].block_types.contains(&BlockType::GeneralInfo));

    let mut reversed = defaults.clone();
    reversed.reverse();
    assert_eq!(detect_block_types(&both, &reversed).unwrap(), typed);
}

fn typed(mut b: Block, t: BlockType) -> Block {
    b.block_types.insert(t);
    b
}

#[test]
fn alignment_rule_labels_seller() {
    let mut seller = typed(
        block(0, 100, 100, 3, &[(Entity, "ORGANIZATION"), (AddressPart, "road")]),
        BlockType::SellerInfo,
    );
    seller.role = PartyRole::Seller;
    let below = typed(block(1, 100, 200, 2, &[(DataType, "EMAIL"), (DataType, "PHONE")]), BlockType::SellerInfo);
    let rules = role_rules(DEFAULT_ROLE_RULES).unwrap();
    let out = classify_roles(&page(vec![seller.clone(), below]), &rules, &[]).unwrap();
    assert_eq!(out.blocks[1].role, PartyRole::Seller);

    // conflicting company details block the alignment rule
    let other = typed(block(1, 100, 200, 2, &[(Entity, "ORGANIZATION")]), BlockType::SellerInfo);
    let out = classify_roles(&page(vec![seller, other]), &rules, &[]).unwrap();
    assert_eq!(out.blocks[1].role, PartyRole::None);
}

#[test]
fn global_rules_order_side_by_side() {
    let addr = [(Entity, "ORGANIZATION"), (AddressPart, "road"), (AddressPart, "postcode")];
    let left = typed(typed(block(0, 100, 400, 3, &addr), BlockType::SellerInfo), BlockType::BuyerInfo);
    let right = typed(typed(block(1, 600, 402, 3, &addr), BlockType::SellerInfo), BlockType::BuyerInfo);
    let rules = role_rules(DEFAULT_ROLE_RULES).unwrap();
    let global = role_rules(DEFAULT_GLOBAL_RULES).unwrap();
    // right block listed first to show reading order, not storage order, decides
    let out = classify_roles(&page(vec![right, left]), &rules, &global).unwrap();
    assert_eq!(out.block(0).unwrap().role, PartyRole::Seller);
    assert_eq!(out.block(1).unwrap().role, PartyRole::Buyer);
}

#[test]
fn labeled_block_unchanged() {
    let mut b = typed(block(0, 100, 1300, 1, &[(Keyword, "BUYER")]), BlockType::BuyerInfo);
    b.role = PartyRole::Delivery;
    let rules = role_rules(DEFAULT_ROLE_RULES).unwrap();
    let global = role_rules(DEFAULT_GLOBAL_RULES).unwrap();
    let out = classify_roles(&page(vec![b]), &rules, &global).unwrap();
    assert_eq!(out.blocks[0].role, PartyRole::Delivery);
}

#[test]
fn pretty_print_round_trips_shipped_rules() {
    for text in [DEFAULT_BLOCK_TYPE_RULES, DEFAULT_ROLE_RULES, DEFAULT_GLOBAL_RULES] {
        for r in parse_rules(text).unwrap() {
            assert_eq!(parse_rule(&r.to_string()).unwrap(), r, "{r}");
        }
    }
}
