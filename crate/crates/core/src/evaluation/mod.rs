//! Top-level comparison of model suggestions against arXiv ground truth,
//! aggregate counts, human quality scores and report rendering.

mod quality;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::ClassificationOutcome;
use crate::msc::{MscCode, TopClass};

pub use quality::{InvalidScore, QualityScore};
pub use report::{emit_report, ReportFormat, ReportHeader, CSV_COLUMNS};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("{0} is a matching row; only differing rows can be scored")]
    MatchingRow(String),
    #[error("unknown report format {0:?} (expected markdown or csv)")]
    UnknownFormat(String),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Matching,
    Differing,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Matching => "matching",
            Category::Differing => "differing",
        })
    }
}

/// Display fields that identify a row.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowIdentity {
    pub arxiv_id: String,
    /// The class(es) the item was sampled under.
    pub msc_section: String,
    /// The ground-truth field as printed by arXiv.
    pub arxiv_msc: String,
}

/// The parts of an outcome the comparison looks at.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub primary: Vec<MscCode>,
    pub secondary: Vec<MscCode>,
}

impl From<&ClassificationOutcome> for OutcomeSummary {
    fn from(outcome: &ClassificationOutcome) -> Self {
        OutcomeSummary {
            primary: outcome.primary.clone(),
            secondary: outcome.secondary.clone(),
        }
    }
}

fn tops(codes: &[MscCode]) -> BTreeSet<TopClass> {
    codes.iter().map(MscCode::top).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRow {
    #[serde(flatten)]
    pub identity: RowIdentity,
    pub llm_primary: Vec<MscCode>,
    pub llm_secondary: Vec<MscCode>,
    pub arxiv_top_set: BTreeSet<TopClass>,
    pub llm_primary_top_set: BTreeSet<TopClass>,
    pub llm_secondary_top_set: BTreeSet<TopClass>,
    pub category: Category,
    pub n_primary_wrong: usize,
    pub n_primary_missed: usize,
    pub n_secondary_extra: usize,
    #[serde(default)]
    pub quality: Option<QualityScore>,
    #[serde(default)]
    pub reviewer: Option<String>,
    #[serde(default)]
    pub notes: Option<String>,
}

impl ComparisonRow {
    pub fn arxiv_id(&self) -> &str {
        &self.identity.arxiv_id
    }

    pub fn n_arxiv_msc(&self) -> usize {
        self.arxiv_top_set.len()
    }

    pub fn n_llm_primary_msc(&self) -> usize {
        self.llm_primary_top_set.len()
    }
}

/// Scores one item at the top level.
///
/// Unknown codes still count through their class; an empty primary list
/// (a refusal) is vacuously matching.
pub fn compare(
    identity: RowIdentity,
    arxiv_top_set: &BTreeSet<TopClass>,
    outcome: &OutcomeSummary,
) -> ComparisonRow {
    let p = tops(&outcome.primary);
    let s = tops(&outcome.secondary);
    let a = arxiv_top_set;
    let n_primary_wrong = p.difference(a).count();
    let n_primary_missed = a
        .iter()
        .filter(|c| !p.contains(c) && !s.contains(c))
        .count();
    let n_secondary_extra = s
        .iter()
        .filter(|c| !a.contains(c) && !p.contains(c))
        .count();
    ComparisonRow {
        identity,
        llm_primary: outcome.primary.clone(),
        llm_secondary: outcome.secondary.clone(),
        arxiv_top_set: a.clone(),
        llm_primary_top_set: p,
        llm_secondary_top_set: s,
        category: if n_primary_wrong == 0 {
            Category::Matching
        } else {
            Category::Differing
        },
        n_primary_wrong,
        n_primary_missed,
        n_secondary_extra,
        quality: None,
        reviewer: None,
        notes: None,
    }
}

/// Sets a human score, returning the one it replaces.
pub fn attach_score(
    row: &mut ComparisonRow,
    score: QualityScore,
    reviewer: Option<String>,
    notes: Option<String>,
) -> Result<Option<QualityScore>, EvaluationError> {
    if row.category == Category::Matching {
        return Err(EvaluationError::MatchingRow(row.identity.arxiv_id.clone()));
    }
    let previous = row.quality.replace(score);
    row.reviewer = reviewer;
    row.notes = notes;
    Ok(previous)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregates {
    pub n_items: usize,
    pub n_matching: usize,
    pub n_differing: usize,
    pub n_matching_with_missed: usize,
    pub n_matching_with_extra: usize,
    pub n_differing_with_missed: usize,
    pub n_differing_with_fresh_extra: usize,
}

impl Aggregates {
    pub const NAMES: [&'static str; 7] = [
        "n_items",
        "n_matching",
        "n_differing",
        "n_matching_with_missed",
        "n_matching_with_extra",
        "n_differing_with_missed",
        "n_differing_with_fresh_extra",
    ];

    pub fn get(&self, name: &str) -> Option<usize> {
        Some(match name {
            "n_items" => self.n_items,
            "n_matching" => self.n_matching,
            "n_differing" => self.n_differing,
            "n_matching_with_missed" => self.n_matching_with_missed,
            "n_matching_with_extra" => self.n_matching_with_extra,
            "n_differing_with_missed" => self.n_differing_with_missed,
            "n_differing_with_fresh_extra" => self.n_differing_with_fresh_extra,
            _ => return None,
        })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&'static str, usize)> + '_ {
        Self::NAMES
            .into_iter()
            .map(|n| (n, self.get(n).expect("known name")))
    }
}

/// Where a discrepancy was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyKind {
    /// A printed per-row cell differs from the recomputed value.
    Cell,
    /// A published aggregate differs from the recomputed count.
    Aggregate,
    /// A tally of a printed column differs from the recomputed count.
    ColumnTally,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub kind: DiscrepancyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arxiv_id: Option<String>,
    pub field: String,
    pub printed: String,
    pub computed: String,
}

impl fmt::Display for Discrepancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DiscrepancyKind::Cell => "cell",
            DiscrepancyKind::Aggregate => "aggregate",
            DiscrepancyKind::ColumnTally => "column tally",
        };
        match &self.arxiv_id {
            Some(id) => write!(
                f,
                "{kind} {id} {}: printed {}, computed {}",
                self.field, self.printed, self.computed
            ),
            None => write!(
                f,
                "{kind} {}: printed {}, computed {}",
                self.field, self.printed, self.computed
            ),
        }
    }
}

/// Per-row cells of a published table, kept verbatim. `-` means zero and an
/// empty cell means the column is absent for that table.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrintedColumns {
    pub table: Option<Category>,
    pub n_arxiv_msc: String,
    pub n_llm_primary_msc: String,
    pub n_llm_primary_wrong: String,
    pub llm_quality: String,
    pub n_primary_missed: String,
    pub n_secondary_extra: String,
}

/// Reads a printed count cell.
pub fn printed_count(cell: &str) -> Option<usize> {
    match cell.trim() {
        "" => None,
        "-" => Some(0),
        other => other.parse().ok(),
    }
}

impl PrintedColumns {
    pub fn quality(&self) -> Option<QualityScore> {
        self.llm_quality.parse().ok()
    }
}

/// Reference values to check a run against.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct References {
    pub rows: BTreeMap<String, PrintedColumns>,
    /// Published aggregate counts keyed by [`Aggregates::NAMES`].
    pub aggregates: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<ComparisonRow>,
    pub aggregates: Aggregates,
    pub quality_distribution: BTreeMap<QualityScore, usize>,
    pub unscored: usize,
    pub discrepancy_log: Vec<Discrepancy>,
}

impl RunReport {
    pub fn matching(&self) -> impl Iterator<Item = &ComparisonRow> {
        self.rows
            .iter()
            .filter(|r| r.category == Category::Matching)
    }

    pub fn differing(&self) -> impl Iterator<Item = &ComparisonRow> {
        self.rows
            .iter()
            .filter(|r| r.category == Category::Differing)
    }
}

fn count_aggregates(rows: &[ComparisonRow]) -> Aggregates {
    let mut agg = Aggregates {
        n_items: rows.len(),
        ..Aggregates::default()
    };
    for row in rows {
        match row.category {
            Category::Matching => {
                agg.n_matching += 1;
                agg.n_matching_with_missed += usize::from(row.n_primary_missed > 0);
                agg.n_matching_with_extra += usize::from(row.n_secondary_extra > 0);
            }
            Category::Differing => {
                agg.n_differing += 1;
                agg.n_differing_with_missed += usize::from(row.n_primary_missed > 0);
                agg.n_differing_with_fresh_extra += usize::from(row.n_secondary_extra > 0);
            }
        }
    }
    agg
}

/// Counts rows and scores. The discrepancy log starts empty; see [`reconcile`].
pub fn aggregate(rows: Vec<ComparisonRow>) -> RunReport {
    let aggregates = count_aggregates(&rows);
    let mut quality_distribution = BTreeMap::new();
    let mut unscored = 0;
    for row in rows.iter().filter(|r| r.category == Category::Differing) {
        match row.quality {
            Some(q) => *quality_distribution.entry(q).or_insert(0) += 1,
            None => unscored += 1,
        }
    }
    RunReport {
        rows,
        aggregates,
        quality_distribution,
        unscored,
        discrepancy_log: Vec::new(),
    }
}

fn show(n: usize) -> String {
    if n == 0 {
        "-".to_string()
    } else {
        n.to_string()
    }
}

/// Logs every way the report departs from `refs`: per-row printed cells,
/// published aggregates, and tallies of the printed columns. Nothing is
/// adjusted; the recomputed values stand.
pub fn reconcile(report: &mut RunReport, refs: &References) {
    let mut log = Vec::new();
    let mut cell = |id: &str, field: &str, printed: &str, computed: String| {
        log.push(Discrepancy {
            kind: DiscrepancyKind::Cell,
            arxiv_id: Some(id.to_string()),
            field: field.to_string(),
            printed: printed.to_string(),
            computed,
        });
    };
    let mut tallies: BTreeMap<&str, usize> = BTreeMap::new();
    for row in &report.rows {
        let id = row.arxiv_id();
        let Some(printed) = refs.rows.get(id) else {
            continue;
        };
        if let Some(table) = printed.table {
            if table != row.category {
                cell(id, "category", &table.to_string(), row.category.to_string());
            }
        }
        let checks = [
            ("n_arxiv_msc", &printed.n_arxiv_msc, row.n_arxiv_msc()),
            (
                "n_llm_primary_msc",
                &printed.n_llm_primary_msc,
                row.n_llm_primary_msc(),
            ),
            (
                "n_llm_primary_wrong",
                &printed.n_llm_primary_wrong,
                row.n_primary_wrong,
            ),
            (
                "n_primary_missed",
                &printed.n_primary_missed,
                row.n_primary_missed,
            ),
            (
                "n_secondary_extra",
                &printed.n_secondary_extra,
                row.n_secondary_extra,
            ),
        ];
        for (field, text, computed) in checks {
            match printed_count(text) {
                Some(value) if value != computed => cell(id, field, text, show(computed)),
                None if !text.trim().is_empty() => cell(id, field, text, show(computed)),
                _ => {}
            }
        }
        let table = printed.table.unwrap_or(row.category);
        let missed = printed_count(&printed.n_primary_missed).unwrap_or(0) > 0;
        let extra = printed_count(&printed.n_secondary_extra).unwrap_or(0) > 0;
        let (missed_name, extra_name) = match table {
            Category::Matching => ("n_matching_with_missed", "n_matching_with_extra"),
            Category::Differing => ("n_differing_with_missed", "n_differing_with_fresh_extra"),
        };
        *tallies.entry(missed_name).or_insert(0) += usize::from(missed);
        *tallies.entry(extra_name).or_insert(0) += usize::from(extra);
    }

    for (name, published) in &refs.aggregates {
        match report.aggregates.get(name) {
            Some(computed) if computed != *published => log.push(Discrepancy {
                kind: DiscrepancyKind::Aggregate,
                arxiv_id: None,
                field: name.clone(),
                printed: published.to_string(),
                computed: computed.to_string(),
            }),
            Some(_) => {}
            None => log::warn!("reference aggregate {name} is not computed"),
        }
    }
    if !refs.rows.is_empty() {
        for (name, tally) in tallies {
            let computed = report.aggregates.get(name).expect("known name");
            if computed != tally {
                log.push(Discrepancy {
                    kind: DiscrepancyKind::ColumnTally,
                    arxiv_id: None,
                    field: name.to_string(),
                    printed: tally.to_string(),
                    computed: computed.to_string(),
                });
            }
        }
    }
    report.discrepancy_log = log;
}
