use std::fmt::Write as _;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};

use crate::msc::MscCode;

use super::{ComparisonRow, EvaluationError, QualityScore, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = EvaluationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(EvaluationError::UnknownFormat(s.to_string())),
        }
    }
}

/// Run-specific values, confined to the first line of a markdown report.
#[derive(Debug, Clone)]
pub struct ReportHeader {
    pub run_id: String,
    pub generated_at: DateTime<Utc>,
}

pub const CSV_COLUMNS: [&str; 14] = [
    "category",
    "msc_section",
    "arxiv_id",
    "arxiv_msc",
    "llm_primary",
    "llm_secondary",
    "n_arxiv_msc",
    "n_llm_primary_msc",
    "n_llm_primary_wrong",
    "n_primary_missed",
    "n_secondary_extra",
    "quality",
    "reviewer",
    "notes",
];

fn join(codes: &[MscCode]) -> String {
    codes
        .iter()
        .map(MscCode::canonical)
        .collect::<Vec<_>>()
        .join(", ")
}

fn primary_cell(row: &ComparisonRow) -> String {
    if row.llm_primary.is_empty() {
        "none".to_string()
    } else {
        join(&row.llm_primary)
    }
}

fn dash(n: usize) -> String {
    if n == 0 {
        "-".into()
    } else {
        n.to_string()
    }
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

pub fn emit_report(
    report: &RunReport,
    format: ReportFormat,
    header: &ReportHeader,
) -> Result<String, EvaluationError> {
    match format {
        ReportFormat::Markdown => Ok(markdown(report, header)),
        ReportFormat::Csv => csv(report),
    }
}

fn markdown(report: &RunReport, header: &ReportHeader) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<!-- run {} generated {} -->",
        header.run_id,
        header
            .generated_at
            .to_rfc3339_opts(SecondsFormat::Secs, true)
    );
    out.push_str("# Classification report\n\n");

    let matching: Vec<_> = report.matching().collect();
    let _ = writeln!(out, "## Matching ({})\n", matching.len());
    out.push_str("| MSC section | arXiv Id | arXiv MSC | LLM primary | LLM secondary | # arXiv MSC | # LLM primary MSC | # primary missed | # secondary extra |\n");
    out.push_str("|---|---|---|---|---|---:|---:|---:|---:|\n");
    for row in matching {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            md_escape(&row.identity.msc_section),
            md_escape(&row.identity.arxiv_id),
            md_escape(&row.identity.arxiv_msc),
            primary_cell(row),
            join(&row.llm_secondary),
            row.n_arxiv_msc(),
            row.n_llm_primary_msc(),
            dash(row.n_primary_missed),
            dash(row.n_secondary_extra),
        );
    }

    let differing: Vec<_> = report.differing().collect();
    let _ = writeln!(out, "\n## Differing ({})\n", differing.len());
    out.push_str("| MSC section | arXiv Id | arXiv MSC | LLM primary | LLM secondary | # arXiv MSC | # LLM primary MSC | # LLM primary wrong | LLM quality | # primary missed | # secondary extra |\n");
    out.push_str("|---|---|---|---|---|---:|---:|---:|:---:|---:|---:|\n");
    for row in differing {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            md_escape(&row.identity.msc_section),
            md_escape(&row.identity.arxiv_id),
            md_escape(&row.identity.arxiv_msc),
            primary_cell(row),
            join(&row.llm_secondary),
            row.n_arxiv_msc(),
            row.n_llm_primary_msc(),
            row.n_primary_wrong,
            row.quality.map_or("", QualityScore::symbol),
            dash(row.n_primary_missed),
            dash(row.n_secondary_extra),
        );
    }

    out.push_str("\n## Aggregates\n\n| metric | value |\n|---|---:|\n");
    for (name, value) in report.aggregates.entries() {
        let _ = writeln!(out, "| {name} | {value} |");
    }

    out.push_str("\n## Quality distribution\n\n| score | label | count |\n|:---:|---|---:|\n");
    for q in QualityScore::ALL {
        let n = report.quality_distribution.get(&q).copied().unwrap_or(0);
        let _ = writeln!(out, "| {} | {} | {n} |", q.symbol(), q.label());
    }
    let _ = writeln!(out, "\nunscored: {}", report.unscored);

    out.push_str("\n## Discrepancy log\n\n");
    if report.discrepancy_log.is_empty() {
        out.push_str("none\n");
    } else {
        for d in &report.discrepancy_log {
            let _ = writeln!(out, "- {d}");
        }
    }
    out
}

fn csv(report: &RunReport) -> Result<String, EvaluationError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_COLUMNS)?;
    for row in &report.rows {
        writer.write_record([
            row.category.to_string(),
            row.identity.msc_section.clone(),
            row.identity.arxiv_id.clone(),
            row.identity.arxiv_msc.clone(),
            primary_cell(row),
            join(&row.llm_secondary),
            row.n_arxiv_msc().to_string(),
            row.n_llm_primary_msc().to_string(),
            row.n_primary_wrong.to_string(),
            row.n_primary_missed.to_string(),
            row.n_secondary_extra.to_string(),
            row.quality
                .map_or(String::new(), |q| q.symbol().to_string()),
            row.reviewer.clone().unwrap_or_default(),
            row.notes.clone().unwrap_or_default(),
        ])?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| EvaluationError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits UTF-8"))
}
