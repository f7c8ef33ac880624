//! Replays the bundled classification fixture. Expected values below were
//! produced by `tests/oracle/tally_fixture.py` and frozen here.

use std::collections::BTreeMap;

use mscbench_core::evaluation::{
    aggregate, attach_score, emit_report, printed_count, reconcile, Category, DiscrepancyKind,
    QualityScore, ReportFormat, ReportHeader,
};
use mscbench_core::msc::parse_code;
use mscbench_core::store::{Fixture, BUILTIN_FIXTURE, BUILTIN_FIXTURE_SHA256};
use sha2::{Digest, Sha256};

fn tops(codes: &[&str]) -> Vec<mscbench_core::TopClass> {
    codes.iter().map(|c| parse_code(c).unwrap().top()).collect()
}

#[test]
fn fixture_matches_pinned_digest() {
    let digest = hex::encode(Sha256::digest(BUILTIN_FIXTURE.as_bytes()));
    assert_eq!(digest, BUILTIN_FIXTURE_SHA256.trim());
}

#[test]
fn fixture_rows_load_verbatim() {
    let f = Fixture::builtin();
    assert_eq!(f.rows.len(), 56);
    let r = f.row("2311.15913").unwrap();
    assert_eq!(
        r.arxiv_top_set().into_iter().collect::<Vec<_>>(),
        tops(&["34", "35", "49", "70", "74"])
    );
    assert_eq!(r.printed.n_primary_missed, "4");
    assert_eq!(
        f.row("1801.04970").unwrap().printed_quality(),
        Some(QualityScore::WayOff)
    );
    assert_eq!(
        f.row("2403.05604").unwrap().printed_quality(),
        Some(QualityScore::Arguable)
    );
    // Printed anomalies are kept as printed.
    assert_eq!(f.row("2401.02545").unwrap().printed.n_arxiv_msc, "2");
    assert_eq!(f.row("2403.18088").unwrap().printed.n_primary_missed, "-");
    let lower = f.row("2403.19691").unwrap();
    assert_eq!(lower.llm_primary[0].canonical(), "15A42");
}

#[test]
fn categories_follow_table_membership() {
    let f = Fixture::builtin();
    let (rows, _) = f.evaluate();
    for (row, fx) in rows.iter().zip(&f.rows) {
        assert_eq!(row.category, fx.table(), "{}", fx.arxiv_id);
    }
    let report = aggregate(rows);
    assert_eq!(report.aggregates.n_items, 56);
    assert_eq!(report.aggregates.n_matching, 34);
    assert_eq!(report.aggregates.n_differing, 22);
}

#[test]
fn aggregates_match_oracle() {
    let (rows, _) = Fixture::builtin().evaluate();
    let a = aggregate(rows).aggregates;
    assert_eq!(a.n_matching_with_missed, 17);
    assert_eq!(a.n_matching_with_extra, 8);
    assert_eq!(a.n_differing_with_missed, 18);
    assert_eq!(a.n_differing_with_fresh_extra, 8);
}

/// (arxiv_id, field, printed, computed) in fixture order.
const CELL_DISCREPANCIES: [(&str, &str, &str, usize); 14] = [
    ("9807008", "n_arxiv_msc", "3", 4),
    ("9807008", "n_primary_missed", "2", 3),
    ("2401.02545", "n_arxiv_msc", "2", 1),
    ("2404.00549", "n_secondary_extra", "-", 1),
    ("2403.18088", "n_arxiv_msc", "1", 3),
    ("2403.18088", "n_primary_missed", "-", 1),
    ("2312.12888", "n_secondary_extra", "-", 1),
    ("2403.05604", "n_secondary_extra", "1", 0),
    ("2306.17679", "n_secondary_extra", "1", 0),
    ("1910.03789", "n_secondary_extra", "1", 0),
    ("2312.03569", "n_secondary_extra", "1", 0),
    ("2402.07343", "n_secondary_extra", "1", 0),
    ("2311.17485", "n_secondary_extra", "1", 0),
    ("2401.06225", "n_secondary_extra", "-", 1),
];

#[test]
fn discrepancy_log_matches_oracle() {
    let (rows, refs) = Fixture::builtin().evaluate();
    let mut report = aggregate(rows);
    reconcile(&mut report, &refs);

    let cells: Vec<(String, String, String, usize)> = report
        .discrepancy_log
        .iter()
        .filter(|d| d.kind == DiscrepancyKind::Cell)
        .map(|d| {
            (
                d.arxiv_id.clone().unwrap(),
                d.field.clone(),
                d.printed.clone(),
                printed_count(&d.computed).unwrap(),
            )
        })
        .collect();
    let expected: Vec<(String, String, String, usize)> = CELL_DISCREPANCIES
        .iter()
        .map(|(a, b, c, d)| (a.to_string(), b.to_string(), c.to_string(), *d))
        .collect();
    assert_eq!(cells, expected);

    let summary: Vec<String> = report
        .discrepancy_log
        .iter()
        .filter(|d| d.kind != DiscrepancyKind::Cell)
        .map(ToString::to_string)
        .collect();
    assert_eq!(
        summary,
        [
            "aggregate n_differing_with_fresh_extra: printed 13, computed 8",
            "aggregate n_matching_with_extra: printed 6, computed 8",
            "column tally n_differing_with_fresh_extra: printed 13, computed 8",
            "column tally n_matching_with_extra: printed 6, computed 8",
            "column tally n_matching_with_missed: printed 16, computed 17",
        ]
    );
}

#[test]
fn missed_column_agreement() {
    let f = Fixture::builtin();
    let (rows, _) = f.evaluate();
    let mut agree: BTreeMap<Category, (usize, usize)> = BTreeMap::new();
    for (row, fx) in rows.iter().zip(&f.rows) {
        let slot = agree.entry(fx.table()).or_default();
        slot.1 += 1;
        if printed_count(&fx.printed.n_primary_missed) == Some(row.n_primary_missed) {
            slot.0 += 1;
        }
    }
    assert_eq!(agree[&Category::Matching], (32, 34));
    assert_eq!(agree[&Category::Differing], (22, 22));
}

#[test]
fn printed_scores_give_oracle_distribution() {
    let f = Fixture::builtin();
    let (mut rows, _) = f.evaluate();
    for (row, fx) in rows.iter_mut().zip(&f.rows) {
        if let Some(q) = fx.printed_quality() {
            attach_score(row, q, Some("fixture".into()), None).unwrap();
        }
    }
    let report = aggregate(rows);
    let dist: Vec<(i8, usize)> = report
        .quality_distribution
        .iter()
        .map(|(q, n)| (q.value(), *n))
        .collect();
    assert_eq!(dist, [(-2, 1), (0, 4), (1, 5), (2, 12)]);
    assert_eq!(report.unscored, 0);
    let way_off: Vec<_> = report
        .rows
        .iter()
        .filter(|r| r.quality == Some(QualityScore::WayOff))
        .map(|r| r.arxiv_id())
        .collect();
    assert_eq!(way_off, ["1801.04970"]);
}

#[test]
fn markdown_report_has_both_tables() {
    let (rows, refs) = Fixture::builtin().evaluate();
    let mut report = aggregate(rows);
    reconcile(&mut report, &refs);
    let header = ReportHeader {
        run_id: "fixture".into(),
        generated_at: chrono::DateTime::from_timestamp(0, 0).unwrap(),
    };
    let md = emit_report(&report, ReportFormat::Markdown, &header).unwrap();
    let section = |title: &str| -> usize {
        let start = md.find(title).unwrap();
        md[start..]
            .lines()
            .skip(4)
            .take_while(|l| l.starts_with("| "))
            .count()
    };
    assert_eq!(section("## Matching (34)"), 34);
    assert_eq!(section("## Differing (22)"), 22);
    assert!(md.contains("unscored: 22"));

    let csv = emit_report(&report, ReportFormat::Csv, &header).unwrap();
    assert_eq!(csv.lines().count(), 57);
}
