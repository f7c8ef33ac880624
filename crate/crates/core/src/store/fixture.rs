use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use crate::corpus::{parse_ground_truth, GroundTruth};
use crate::evaluation::{
    compare, printed_count, Category, ComparisonRow, OutcomeSummary, PrintedColumns, QualityScore,
    References, RowIdentity,
};
use crate::msc::{parse_code, MscCode, TopClass};

use super::StoreError;

/// The replay fixture bundled with the crate.
pub const BUILTIN_FIXTURE: &str = include_str!("../../data/tables.tsv");
/// Hex SHA-256 the bundled fixture must hash to.
pub const BUILTIN_FIXTURE_SHA256: &str = include_str!("../../data/tables.tsv.sha256");

const COLUMNS: [&str; 12] = [
    "table",
    "msc_section",
    "arxiv_id",
    "arxiv_msc",
    "llm_primary",
    "llm_secondary",
    "n_arxiv_msc",
    "n_llm_primary_msc",
    "n_llm_primary_wrong",
    "llm_quality",
    "n_primary_missed",
    "n_secondary_extra",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureRow {
    pub line: usize,
    pub msc_section: String,
    pub arxiv_id: String,
    pub arxiv_msc: String,
    pub ground_truth: GroundTruth,
    pub llm_primary: Vec<MscCode>,
    pub llm_secondary: Vec<MscCode>,
    pub printed: PrintedColumns,
}

impl FixtureRow {
    pub fn table(&self) -> Category {
        self.printed.table.expect("set on load")
    }

    pub fn arxiv_top_set(&self) -> BTreeSet<TopClass> {
        self.ground_truth.top_set()
    }

    pub fn outcome(&self) -> OutcomeSummary {
        OutcomeSummary {
            primary: self.llm_primary.clone(),
            secondary: self.llm_secondary.clone(),
        }
    }

    pub fn printed_quality(&self) -> Option<QualityScore> {
        self.printed.quality()
    }

    pub fn compare(&self) -> ComparisonRow {
        compare(
            RowIdentity {
                arxiv_id: self.arxiv_id.clone(),
                msc_section: self.msc_section.clone(),
                arxiv_msc: self.arxiv_msc.clone(),
            },
            &self.arxiv_top_set(),
            &self.outcome(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Fixture {
    pub rows: Vec<FixtureRow>,
    /// Published aggregate counts from `#@ name<TAB>value` lines.
    pub aggregates: BTreeMap<String, usize>,
}

impl Fixture {
    pub fn builtin() -> Fixture {
        parse_fixture(BUILTIN_FIXTURE).expect("bundled fixture is well-formed")
    }

    /// Recomputed rows (unscored) plus the printed values to check them against.
    pub fn evaluate(&self) -> (Vec<ComparisonRow>, References) {
        let rows = self.rows.iter().map(FixtureRow::compare).collect();
        let references = References {
            rows: self
                .rows
                .iter()
                .map(|r| (r.arxiv_id.clone(), r.printed.clone()))
                .collect(),
            aggregates: self.aggregates.clone(),
        };
        (rows, references)
    }

    pub fn row(&self, arxiv_id: &str) -> Option<&FixtureRow> {
        self.rows.iter().find(|r| r.arxiv_id == arxiv_id)
    }
}

pub fn load_fixture(path: impl AsRef<Path>) -> Result<Fixture, StoreError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_fixture(&text)
}

fn bad(line: usize, message: impl Into<String>) -> StoreError {
    StoreError::Fixture {
        line,
        message: message.into(),
    }
}

fn code_list(cell: &str, line: usize) -> Result<Vec<MscCode>, StoreError> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    let mut out: Vec<MscCode> = Vec::new();
    for token in cell
        .split([',', ';'])
        .map(str::trim)
        .filter(|t| !t.is_empty())
    {
        let code = parse_code(token).map_err(|e| bad(line, e.to_string()))?;
        if !out.contains(&code) {
            out.push(code);
        }
    }
    Ok(out)
}

/// Parses fixture text: `#` comments, `#@` aggregate lines, one header row,
/// then twelve tab-separated columns per item.
pub fn parse_fixture(text: &str) -> Result<Fixture, StoreError> {
    let mut fixture = Fixture::default();
    let mut header_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if let Some(directive) = raw.strip_prefix("#@") {
            let (name, value) = directive
                .trim()
                .split_once('\t')
                .ok_or_else(|| bad(line, "aggregate line needs name<TAB>value"))?;
            let value = value
                .trim()
                .parse()
                .map_err(|_| bad(line, format!("aggregate {name} is not a count")))?;
            fixture.aggregates.insert(name.trim().to_string(), value);
            continue;
        }
        if raw.starts_with('#') || raw.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.split('\t').collect();
        if !header_seen {
            if cells != COLUMNS {
                return Err(bad(line, format!("expected header {}", COLUMNS.join(" "))));
            }
            header_seen = true;
            continue;
        }
        if cells.len() != COLUMNS.len() {
            return Err(bad(
                line,
                format!("expected {} columns, found {}", COLUMNS.len(), cells.len()),
            ));
        }
        let table = match cells[0] {
            "matching" => Category::Matching,
            "differing" => Category::Differing,
            other => return Err(bad(line, format!("unknown table {other:?}"))),
        };
        for (i, name) in COLUMNS.iter().enumerate().skip(6) {
            if *name == "llm_quality" {
                continue;
            }
            if !cells[i].trim().is_empty() && printed_count(cells[i]).is_none() {
                return Err(bad(line, format!("{name} {:?} is not a count", cells[i])));
            }
        }
        if !cells[9].trim().is_empty() && cells[9].parse::<QualityScore>().is_err() {
            return Err(bad(
                line,
                format!("llm_quality {:?} is not a score", cells[9]),
            ));
        }
        let arxiv_id = cells[2].trim();
        if arxiv_id.is_empty() {
            return Err(bad(line, "empty arxiv_id"));
        }
        let ground_truth = parse_ground_truth(cells[3]);
        if ground_truth.is_empty() {
            return Err(bad(line, "arxiv_msc has no codes"));
        }
        fixture.rows.push(FixtureRow {
            line,
            msc_section: cells[1].trim().to_string(),
            arxiv_id: arxiv_id.to_string(),
            arxiv_msc: cells[3].trim().to_string(),
            ground_truth,
            llm_primary: code_list(cells[4], line)?,
            llm_secondary: code_list(cells[5], line)?,
            printed: PrintedColumns {
                table: Some(table),
                n_arxiv_msc: cells[6].to_string(),
                n_llm_primary_msc: cells[7].to_string(),
                n_llm_primary_wrong: cells[8].to_string(),
                llm_quality: cells[9].to_string(),
                n_primary_missed: cells[10].to_string(),
                n_secondary_extra: cells[11].to_string(),
            },
        });
    }
    if !header_seen {
        return Err(bad(text.lines().count().max(1), "missing header row"));
    }
    Ok(fixture)
}
