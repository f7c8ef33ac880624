//! Durable state: one append-only JSON-lines event file per run, a
//! content-addressed transcript cache, the arXiv response cache and the
//! replay fixture.
//!
//! ```text
//! <root>/.lock
//! <root>/runs/<run_id>/events.jsonl
//! <root>/runs/<run_id>/<artifacts>
//! <root>/cache/transcripts/<sha256>.json
//! <root>/cache/arxiv/<sha256>.atom
//! ```

mod cache;
mod fixture;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::ClassificationOutcome;
use crate::corpus::SampleSet;
use crate::evaluation::{
    aggregate, attach_score, reconcile, ComparisonRow, EvaluationError, QualityScore, References,
    RunReport,
};
use crate::msc::TopClass;

pub use cache::{TranscriptCache, TranscriptCacheEntry, TranscriptKey};
pub use fixture::{
    load_fixture, parse_fixture, Fixture, FixtureRow, BUILTIN_FIXTURE, BUILTIN_FIXTURE_SHA256,
};

pub const SCHEMA_VERSION: u32 = 1;
const EVENTS_FILE: &str = "events.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unknown run {0}")]
    UnknownRun(String),
    #[error("transcript for {0} is already cached")]
    DuplicateEntry(String),
    #[error("{}:{line}: {message}", path.display())]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("fixture line {line}: {message}")]
    Fixture { line: usize, message: String },
    #[error("store {} is locked by another process", .0.display())]
    Locked(PathBuf),
    #[error("run {run_id} has no row for {arxiv_id}")]
    UnknownRow { run_id: String, arxiv_id: String },
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Settings a run was produced with.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub provider: Option<String>,
    #[serde(default)]
    pub protocol_hash: Option<String>,
    #[serde(default)]
    pub cutoff: Option<DateTime<Utc>>,
    #[serde(default)]
    pub exclusions: Vec<TopClass>,
    #[serde(default)]
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreChange {
    pub arxiv_id: String,
    pub previous: Option<QualityScore>,
    pub score: QualityScore,
    #[serde(default)]
    pub reviewer: Option<String>,
    #[serde(default)]
    pub notes: Option<String>,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RunEvent {
    Header {
        schema_version: u32,
        run_id: String,
        created_at: DateTime<Utc>,
    },
    Config {
        config: RunConfig,
    },
    SampleBuilt {
        sample: SampleSet,
    },
    Classified {
        arxiv_id: String,
        outcome: ClassificationOutcome,
    },
    ClassificationFailed {
        arxiv_id: String,
        error: String,
    },
    Evaluated {
        rows: Vec<ComparisonRow>,
        #[serde(default)]
        references: Option<References>,
    },
    ScoreChanged(ScoreChange),
}

/// A run folded from its events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRecord {
    pub run_id: String,
    pub created_at: Option<DateTime<Utc>>,
    pub config: RunConfig,
    pub sample: Option<SampleSet>,
    /// Latest outcome per item, in first-classified order.
    pub outcomes: Vec<(String, ClassificationOutcome)>,
    pub failures: BTreeMap<String, String>,
    pub rows: Vec<ComparisonRow>,
    pub references: Option<References>,
    pub audit: Vec<ScoreChange>,
    pub events: usize,
}

impl RunRecord {
    pub fn outcome(&self, arxiv_id: &str) -> Option<&ClassificationOutcome> {
        self.outcomes
            .iter()
            .find(|(id, _)| id == arxiv_id)
            .map(|(_, o)| o)
    }

    pub fn is_evaluated(&self) -> bool {
        !self.rows.is_empty()
    }

    /// Aggregates, scores and, when references are known, the discrepancy log.
    pub fn report(&self) -> RunReport {
        let mut report = aggregate(self.rows.clone());
        if let Some(refs) = &self.references {
            reconcile(&mut report, refs);
        }
        report
    }

    fn apply(&mut self, event: RunEvent) {
        self.events += 1;
        match event {
            RunEvent::Header {
                run_id, created_at, ..
            } => {
                self.run_id = run_id;
                self.created_at = Some(created_at);
            }
            RunEvent::Config { config } => self.config = config,
            RunEvent::SampleBuilt { sample } => self.sample = Some(sample),
            RunEvent::Classified { arxiv_id, outcome } => {
                self.failures.remove(&arxiv_id);
                match self.outcomes.iter_mut().find(|(id, _)| *id == arxiv_id) {
                    Some(slot) => slot.1 = outcome,
                    None => self.outcomes.push((arxiv_id, outcome)),
                }
            }
            RunEvent::ClassificationFailed { arxiv_id, error } => {
                self.failures.insert(arxiv_id, error);
            }
            RunEvent::Evaluated { rows, references } => {
                self.rows = rows;
                self.references = references;
                // Human scores outlive re-evaluation.
                for change in &self.audit {
                    apply_score(&mut self.rows, change);
                }
            }
            RunEvent::ScoreChanged(change) => {
                apply_score(&mut self.rows, &change);
                self.audit.push(change);
            }
        }
    }
}

fn apply_score(rows: &mut [ComparisonRow], change: &ScoreChange) {
    if let Some(row) = rows.iter_mut().find(|r| r.arxiv_id() == change.arxiv_id) {
        let _ = attach_score(
            row,
            change.score,
            change.reviewer.clone(),
            change.notes.clone(),
        );
    }
}

/// Held while a command mutates the store; released on drop.
#[derive(Debug)]
pub struct StoreLock {
    _file: File,
}

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for dir in [
            root.join("runs"),
            root.join("cache/transcripts"),
            root.join("cache/arxiv"),
        ] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(RunStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn transcripts(&self) -> TranscriptCache {
        TranscriptCache::new(self.root.join("cache/transcripts"))
    }

    pub fn arxiv_cache_dir(&self) -> PathBuf {
        self.root.join("cache/arxiv")
    }

    fn lock_file(&self) -> Result<File, StoreError> {
        let path = self.root.join(".lock");
        OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(io_err(&path))
    }

    /// Takes the store lock or fails at once if another process holds it.
    pub fn try_lock(&self) -> Result<StoreLock, StoreError> {
        let file = self.lock_file()?;
        match file.try_lock() {
            Ok(()) => Ok(StoreLock { _file: file }),
            Err(fs::TryLockError::WouldBlock) => Err(StoreError::Locked(self.root.clone())),
            Err(fs::TryLockError::Error(source)) => Err(StoreError::Io {
                path: self.root.join(".lock"),
                source,
            }),
        }
    }

    /// Waits for the store lock.
    pub fn lock(&self) -> Result<StoreLock, StoreError> {
        let file = self.lock_file()?;
        file.lock().map_err(io_err(&self.root.join(".lock")))?;
        Ok(StoreLock { _file: file })
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join("runs").join(run_id)
    }

    fn events_path(&self, run_id: &str) -> Result<PathBuf, StoreError> {
        let valid = !run_id.is_empty()
            && run_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        let path = self.run_dir(run_id).join(EVENTS_FILE);
        if valid && path.is_file() {
            Ok(path)
        } else {
            Err(StoreError::UnknownRun(run_id.to_string()))
        }
    }

    /// Creates a run named `<UTC timestamp>-<random hex>` and writes its header.
    pub fn create_run(&self) -> Result<String, StoreError> {
        let now = Utc::now();
        loop {
            let run_id = format!(
                "{}-{:06x}",
                now.format("%Y%m%dT%H%M%SZ"),
                rand::random::<u32>() & 0xff_ffff
            );
            let dir = self.run_dir(&run_id);
            match fs::create_dir(&dir) {
                Ok(()) => {}
                Err(e) if e.kind() == ErrorKind::AlreadyExists => continue,
                Err(source) => return Err(StoreError::Io { path: dir, source }),
            }
            let path = dir.join(EVENTS_FILE);
            File::create_new(&path).map_err(io_err(&path))?;
            self.append_event(
                &run_id,
                &RunEvent::Header {
                    schema_version: SCHEMA_VERSION,
                    run_id: run_id.clone(),
                    created_at: now,
                },
            )?;
            return Ok(run_id);
        }
    }

    pub fn append_event(&self, run_id: &str, event: &RunEvent) -> Result<(), StoreError> {
        let path = self.events_path(run_id)?;
        let mut line = serde_json::to_string(event).expect("events serialize");
        line.push('\n');
        let mut file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        file.write_all(line.as_bytes()).map_err(io_err(&path))?;
        file.sync_data().map_err(io_err(&path))
    }

    pub fn read_events(&self, run_id: &str) -> Result<Vec<RunEvent>, StoreError> {
        let path = self.events_path(run_id)?;
        let file = File::open(&path).map_err(io_err(&path))?;
        let mut events = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            let event = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                path: path.clone(),
                line: idx + 1,
                message: e.to_string(),
            })?;
            events.push(event);
        }
        match events.first() {
            Some(RunEvent::Header { schema_version, .. }) if *schema_version <= SCHEMA_VERSION => {
                Ok(events)
            }
            Some(RunEvent::Header { schema_version, .. }) => Err(StoreError::Corrupt {
                path,
                line: 1,
                message: format!("unsupported schema version {schema_version}"),
            }),
            _ => Err(StoreError::Corrupt {
                path,
                line: 1,
                message: "missing header event".into(),
            }),
        }
    }

    pub fn load_run(&self, run_id: &str) -> Result<RunRecord, StoreError> {
        let mut record = RunRecord::default();
        for event in self.read_events(run_id)? {
            record.apply(event);
        }
        Ok(record)
    }

    /// Run ids in creation order.
    pub fn list_runs(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("runs");
        let mut runs = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            if entry.path().join(EVENTS_FILE).is_file() {
                runs.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        runs.sort();
        Ok(runs)
    }

    pub fn latest_run(&self) -> Result<Option<String>, StoreError> {
        Ok(self.list_runs()?.pop())
    }

    /// Scores a differing row and records the change.
    pub fn record_score(
        &self,
        run_id: &str,
        arxiv_id: &str,
        score: QualityScore,
        reviewer: Option<String>,
        notes: Option<String>,
    ) -> Result<ScoreChange, StoreError> {
        let mut record = self.load_run(run_id)?;
        let row = record
            .rows
            .iter_mut()
            .find(|r| r.arxiv_id() == arxiv_id)
            .ok_or_else(|| StoreError::UnknownRow {
                run_id: run_id.to_string(),
                arxiv_id: arxiv_id.to_string(),
            })?;
        let previous = attach_score(row, score, reviewer.clone(), notes.clone())?;
        let change = ScoreChange {
            arxiv_id: arxiv_id.to_string(),
            previous,
            score,
            reviewer,
            notes,
            at: Utc::now(),
        };
        self.append_event(run_id, &RunEvent::ScoreChanged(change.clone()))?;
        Ok(change)
    }

    /// Writes a derived file next to the run's events.
    pub fn write_artifact(
        &self,
        run_id: &str,
        name: &str,
        contents: &[u8],
    ) -> Result<PathBuf, StoreError> {
        self.events_path(run_id)?;
        let path = self.run_dir(run_id).join(name);
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, contents).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        Ok(path)
    }
}
