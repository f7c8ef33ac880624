//! Experiment sample: the most recent arXiv preprint for each top-level class,
//! plus the text clean-up applied before classification.

mod arxiv;
mod ground_truth;
mod text;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, NaiveDate, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::msc::{Taxonomy, TopClass};
use crate::net::TransportError;

pub use arxiv::{
    class_query, normalize_id, parse_feed, render_feed, ArxivTransport, AtomEntry, CachedTransport,
    HttpArxivTransport, BASE_URL_ENV, DEFAULT_BASE_URL,
};
pub use ground_truth::{parse_ground_truth, GroundTruth};
pub use text::normalize_text;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("class {class}: transport failure: {source}")]
    Transport {
        class: TopClass,
        #[source]
        source: TransportError,
    },
    #[error("class {0}: no eligible results")]
    NoResults(TopClass),
    #[error("{0}: nothing to classify")]
    NothingToClassify(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbstractSource {
    Metadata,
    SummarySection,
    Introduction,
    UserSupplied,
}

/// Texts an abstract may be taken from, besides user-supplied text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractCandidates {
    pub metadata: Option<String>,
    pub summary_section: Option<String>,
    pub introduction: Option<String>,
}

/// Picks the classification text: user text, then the metadata abstract,
/// then a summary section, then the introduction. Blank candidates are skipped.
pub fn resolve_abstract(
    arxiv_id: &str,
    candidates: &AbstractCandidates,
    user_text: Option<&str>,
) -> Result<(String, AbstractSource), CorpusError> {
    let ordered = [
        (user_text, AbstractSource::UserSupplied),
        (candidates.metadata.as_deref(), AbstractSource::Metadata),
        (
            candidates.summary_section.as_deref(),
            AbstractSource::SummarySection,
        ),
        (
            candidates.introduction.as_deref(),
            AbstractSource::Introduction,
        ),
    ];
    ordered
        .into_iter()
        .filter_map(|(text, source)| text.map(|t| (normalize_text(t), source)))
        .find(|(text, _)| !text.is_empty())
        .ok_or_else(|| CorpusError::NothingToClassify(arxiv_id.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperItem {
    pub arxiv_id: String,
    pub title: String,
    pub abstract_text: String,
    pub abstract_source: AbstractSource,
    /// The MSC field as served, for display.
    pub ground_truth_raw: String,
    pub ground_truth: GroundTruth,
    pub sampled_under: Vec<TopClass>,
    pub submitted: DateTime<Utc>,
    pub withdrawn: bool,
}

impl PaperItem {
    pub fn ground_truth_top_set(&self) -> BTreeSet<TopClass> {
        self.ground_truth.top_set()
    }
}

/// A class the sampler could not map, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unmapped {
    pub class: TopClass,
    pub reason: String,
    /// The fetch itself failed, as opposed to finding nothing eligible.
    #[serde(default)]
    pub transport: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub items: Vec<PaperItem>,
    pub cutoff: DateTime<Utc>,
    pub excluded_classes: Vec<TopClass>,
    pub class_to_item: BTreeMap<TopClass, String>,
    #[serde(default)]
    pub unmapped: Vec<Unmapped>,
}

impl SampleSet {
    pub fn item(&self, arxiv_id: &str) -> Option<&PaperItem> {
        self.items.iter().find(|i| i.arxiv_id == arxiv_id)
    }
}

/// The last instant of `date` in UTC, so a cutoff day is included in full.
pub fn end_of_day(date: NaiveDate) -> DateTime<Utc> {
    date.and_hms_opt(23, 59, 59).expect("valid time").and_utc()
}

#[derive(Debug, Clone)]
pub struct SampleOptions {
    pub concurrency: usize,
    pub max_results: usize,
    /// Restricts sampling to these classes when non-empty.
    pub only_classes: Vec<TopClass>,
    /// Replacement classification text keyed by arXiv id.
    pub user_texts: BTreeMap<String, String>,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            concurrency: 4,
            max_results: 50,
            only_classes: Vec::new(),
            user_texts: BTreeMap::new(),
        }
    }
}

/// The newest entry for `top` that is not withdrawn, was published no later
/// than `cutoff` and lists `top` in its own MSC field.
pub fn fetch_latest_for_class(
    top: TopClass,
    cutoff: DateTime<Utc>,
    transport: &dyn ArxivTransport,
    max_results: usize,
) -> Result<AtomEntry, CorpusError> {
    let query = class_query(top, max_results);
    let body = transport
        .fetch(&query)
        .map_err(|source| CorpusError::Transport { class: top, source })?;
    let entries =
        parse_feed(&body).map_err(|source| CorpusError::Transport { class: top, source })?;
    entries
        .into_iter()
        .filter(|e| !e.withdrawn() && e.published <= cutoff)
        .filter(|e| e.ground_truth.top_set().contains(&top))
        .max_by(|a, b| {
            a.published
                .cmp(&b.published)
                .then_with(|| b.arxiv_id.cmp(&a.arxiv_id))
        })
        .ok_or(CorpusError::NoResults(top))
}

fn to_item(
    entry: AtomEntry,
    top: TopClass,
    user_texts: &BTreeMap<String, String>,
) -> Result<PaperItem, CorpusError> {
    let candidates = AbstractCandidates {
        metadata: Some(entry.summary.clone()),
        ..AbstractCandidates::default()
    };
    let user = user_texts.get(&entry.arxiv_id).map(String::as_str);
    let (abstract_text, abstract_source) = resolve_abstract(&entry.arxiv_id, &candidates, user)?;
    let withdrawn = entry.withdrawn();
    Ok(PaperItem {
        title: normalize_text(&entry.title),
        abstract_text,
        abstract_source,
        ground_truth_raw: format!("({})", entry.msc_field),
        ground_truth: entry.ground_truth,
        sampled_under: vec![top],
        submitted: entry.published,
        withdrawn,
        arxiv_id: entry.arxiv_id,
    })
}

/// Samples one item per non-excluded top-level class and merges duplicates.
///
/// Fetches run on a bounded pool; the merge is sequential in class order so
/// the result does not depend on scheduling. Failed classes are recorded in
/// `unmapped` without aborting the others.
pub fn build_sample(
    taxonomy: &Taxonomy,
    cutoff: DateTime<Utc>,
    exclusions: &[TopClass],
    transport: &dyn ArxivTransport,
    opts: &SampleOptions,
) -> SampleSet {
    let classes: Vec<TopClass> = taxonomy
        .top_classes()
        .into_iter()
        .filter(|c| !exclusions.contains(c))
        .filter(|c| opts.only_classes.is_empty() || opts.only_classes.contains(c))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.concurrency.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<(TopClass, Result<PaperItem, CorpusError>)> = pool.install(|| {
        classes
            .par_iter()
            .map(|&class| {
                let item = fetch_latest_for_class(class, cutoff, transport, opts.max_results)
                    .and_then(|entry| to_item(entry, class, &opts.user_texts));
                (class, item)
            })
            .collect()
    });

    let mut set = SampleSet {
        items: Vec::new(),
        cutoff,
        excluded_classes: exclusions.to_vec(),
        class_to_item: BTreeMap::new(),
        unmapped: Vec::new(),
    };
    for (class, result) in results {
        match result {
            Ok(item) => {
                set.class_to_item.insert(class, item.arxiv_id.clone());
                match set.items.iter_mut().find(|i| i.arxiv_id == item.arxiv_id) {
                    Some(existing) => {
                        log::info!("{} is the latest item for {class} too", item.arxiv_id);
                        existing.sampled_under.push(class);
                    }
                    None => set.items.push(item),
                }
            }
            Err(err) => {
                log::warn!("{err}");
                set.unmapped.push(Unmapped {
                    class,
                    reason: err.to_string(),
                    transport: matches!(err, CorpusError::Transport { .. }),
                });
            }
        }
    }
    set
}
