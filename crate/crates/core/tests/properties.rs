//! Property suites for the code grammar, text clean-up, reply parsing and
//! the comparison metrics.

use std::collections::BTreeSet;

use mscbench_core::classifier::{parse_outcome, Confidence, CueLexicon};
use mscbench_core::corpus::{normalize_text, parse_ground_truth};
use mscbench_core::evaluation::{aggregate, compare, Category, OutcomeSummary, RowIdentity};
use mscbench_core::msc::{extract_codes, parse_code, scan, top_level, Level, Token};
use mscbench_core::{MscCode, Taxonomy, TopClass, ValidationStatus};
use proptest::prelude::*;

fn code_text() -> impl Strategy<Value = String> {
    (
        0u8..100,
        prop_oneof![
            Just(String::new()),
            Just("-".to_string()),
            "[A-Za-z]".prop_map(|s| s),
        ],
        prop_oneof![
            Just(String::new()),
            (0u8..100).prop_map(|n| format!("{n:02}")),
            prop_oneof![Just("xx"), Just("XX"), Just("xX")].prop_map(String::from),
        ],
    )
        .prop_map(|(top, area, sub)| {
            if area.is_empty() {
                format!("{top:02}")
            } else {
                format!("{top:02}{area}{sub}")
            }
        })
}

fn code() -> impl Strategy<Value = MscCode> {
    code_text().prop_map(|t| parse_code(&t).unwrap())
}

fn top_set() -> impl Strategy<Value = BTreeSet<TopClass>> {
    prop::collection::btree_set(0u8..100, 1..6)
        .prop_map(|s| s.into_iter().map(|n| TopClass::new(n).unwrap()).collect())
}

fn outcome() -> impl Strategy<Value = OutcomeSummary> {
    (
        prop::collection::vec(code(), 0..4),
        prop::collection::vec(code(), 0..5),
    )
        .prop_map(|(primary, secondary)| OutcomeSummary { primary, secondary })
}

fn identity() -> RowIdentity {
    RowIdentity {
        arxiv_id: "x".into(),
        msc_section: "00".into(),
        arxiv_msc: String::new(),
    }
}

/// Prose fragments with codes, arXiv ids, numbers and punctuation mixed in.
fn reply_text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        code_text(),
        Just("85A-XX".to_string()),
        Just("2403.05604".to_string()),
        Just("math.NT".to_string()),
        Just("18-02".to_string()),
        "[a-z]{1,8}",
        Just("Primary:".to_string()),
        Just("secondary".to_string()),
        Just("likely".to_string()),
        Just("(".to_string()),
        Just(")".to_string()),
        Just(",".to_string()),
        Just(".".to_string()),
        Just("\n".to_string()),
        "[0-9]{1,6}",
    ];
    prop::collection::vec(piece, 0..24).prop_map(|v| v.join(" "))
}

#[test]
fn shipped_taxonomy_round_trips() {
    let tax = Taxonomy::shipped();
    assert!(!tax.is_empty());
    for (code, _) in tax.entries() {
        let text = code.canonical();
        assert_eq!(parse_code(&text).unwrap().canonical(), text);
        assert_eq!(tax.validate(code), ValidationStatus::Known);
    }
}

#[test]
fn shipped_taxonomy_is_prefix_closed() {
    let tax = Taxonomy::shipped();
    for (code, _) in tax.entries() {
        assert!(tax.contains(&code.top_level()), "{code}");
        if code.level() == Level::Third {
            let parent = code.second_level().unwrap();
            let special = parent.canonical().ends_with('-');
            assert!(special || tax.contains(&parent), "{code}");
        }
    }
}

proptest! {
    #[test]
    fn canonical_round_trip(c in code()) {
        prop_assert_eq!(parse_code(&c.canonical()).unwrap(), c);
        let canon = c.canonical();
        prop_assert_eq!(canon.to_uppercase(), canon);
    }

    #[test]
    fn wildcard_equivalence(top in 0u8..100, letter in "[A-Za-z]", xx in prop_oneof![Just("xx"), Just("XX")]) {
        let second = format!("{top:02}{letter}");
        prop_assert_eq!(parse_code(&format!("{second}{xx}")).unwrap(), parse_code(&second).unwrap());
        prop_assert_eq!(parse_code(&format!("{top:02}-{xx}")).unwrap(), parse_code(&format!("{top:02}")).unwrap());
    }

    #[test]
    fn parse_is_case_insensitive(t in code_text()) {
        prop_assert_eq!(parse_code(&t.to_lowercase()).unwrap(), parse_code(&t.to_uppercase()).unwrap());
    }

    #[test]
    fn top_level_is_idempotent(c in code()) {
        let once = top_level(&c);
        prop_assert_eq!(top_level(&once), once);
        prop_assert_eq!(once.top(), c.top());
        prop_assert_eq!(once.level(), Level::Top);
    }

    #[test]
    fn parse_never_panics(s in "\\PC{0,8}") {
        let _ = parse_code(&s);
    }

    #[test]
    fn extracted_spans_are_ordered_and_reparse(text in reply_text()) {
        let tax = Taxonomy::shipped();
        let mut last_end = 0;
        for token in scan(&text) {
            let span = token.span();
            prop_assert!(span.start >= last_end && span.start < span.end);
            last_end = span.end;
        }
        for hit in extract_codes(&text, tax) {
            let found = parse_code(&text[hit.span.clone()]).unwrap();
            prop_assert_eq!(&found, &hit.code);
            prop_assert_eq!(parse_code(&hit.code.canonical()).unwrap(), hit.code);
            prop_assert_eq!(hit.status, tax.validate(&hit.code));
        }
    }

    #[test]
    fn extraction_skips_arxiv_ids(yymm in 1000u32..3000, num in 0u32..100000) {
        let text = format!("see arXiv:{yymm}.{num:05} and {yymm}.{num:05}v2 for details");
        prop_assert!(extract_codes(&text, Taxonomy::shipped()).is_empty());
    }

    #[test]
    fn normalize_is_idempotent(s in "(\\PC|[\u{FB00}-\u{FB06}\u{0B}-\u{0F}\u{AD}\n -])*") {
        let once = normalize_text(&s);
        prop_assert_eq!(normalize_text(&once), once.clone());
        let ligature = once.chars().any(|c| ('\u{FB00}'..='\u{FB06}').contains(&c));
        prop_assert!(!ligature);
        prop_assert_eq!(once.trim(), once.as_str());
        prop_assert!(!once.contains("  "));
    }

    #[test]
    fn ground_truth_holds_only_well_formed_codes(field in reply_text()) {
        let gt = parse_ground_truth(&field);
        for c in &gt.codes {
            prop_assert_eq!(parse_code(&c.canonical()).unwrap(), *c);
        }
        let tops: BTreeSet<_> = gt.codes.iter().map(|c| top_level(c).top()).collect();
        prop_assert_eq!(tops, gt.top_set());
    }

    #[test]
    fn refusal_exactly_when_no_codes(replies in prop::collection::vec(reply_text(), 1..3)) {
        let tax = Taxonomy::shipped();
        let out = parse_outcome(&replies, tax, &CueLexicon::default());
        let empty = out.primary.is_empty() && out.secondary.is_empty();
        prop_assert_eq!(out.confidence == Confidence::Refusal, empty);
        for c in out.primary.iter().chain(&out.secondary) {
            prop_assert_eq!(parse_code(&c.canonical()).unwrap(), *c);
            if tax.validate(c) == ValidationStatus::UnknownCode {
                prop_assert!(out.validation_flags.iter().any(|f| f.code == c.canonical()));
            }
        }
        let mut seen = BTreeSet::new();
        for c in out.primary.iter().chain(&out.secondary) {
            prop_assert!(seen.insert(*c), "duplicate {}", c);
        }
    }

    #[test]
    fn rows_partition_and_bound(arxiv in top_set(), out in outcome()) {
        let row = compare(identity(), &arxiv, &out);
        prop_assert_eq!(row.category == Category::Matching, row.n_primary_wrong == 0);
        prop_assert!(row.n_primary_missed <= arxiv.len());
        prop_assert_eq!(row.n_arxiv_msc(), arxiv.len());
        if out.primary.is_empty() && out.secondary.is_empty() {
            prop_assert_eq!(row.category, Category::Matching);
            prop_assert_eq!(row.n_primary_missed, arxiv.len());
        }
    }

    #[test]
    fn extra_secondary_never_raises_missed(arxiv in top_set(), out in outcome(), more in code()) {
        let before = compare(identity(), &arxiv, &out);
        let mut grown = out.clone();
        grown.secondary.push(more);
        let after = compare(identity(), &arxiv, &grown);
        prop_assert!(after.n_primary_missed <= before.n_primary_missed);
        prop_assert_eq!(after.category, before.category);
    }

    #[test]
    fn aggregate_counts_sum(cases in prop::collection::vec((top_set(), outcome()), 1..12)) {
        let rows: Vec<_> = cases.iter().map(|(a, o)| compare(identity(), a, o)).collect();
        let n = rows.len();
        let report = aggregate(rows);
        let a = &report.aggregates;
        prop_assert_eq!(a.n_matching + a.n_differing, n);
        prop_assert_eq!(a.n_items, n);
        prop_assert!(a.n_matching_with_missed <= a.n_matching);
        prop_assert!(a.n_differing_with_missed <= a.n_differing);
        prop_assert_eq!(report.unscored, a.n_differing);
        prop_assert!(report.quality_distribution.is_empty());
    }
}

#[test]
fn malformed_tokens_are_reported_by_scan() {
    let tokens = scan("a hybrid like 85A-XX gets flagged");
    assert!(matches!(&tokens[..], [Token::Malformed { text, .. }] if text == "85A-XX"));
}
