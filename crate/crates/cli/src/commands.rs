//! Pipeline stages. Each reads the previous stage's events from the run
//! store and appends its own.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use chrono::Utc;
use mscbench_core::classifier::{
    ChatProvider, Classifier, ClassifierError, CueLexicon, HttpChatProvider, PromptProtocol,
    ReplayProvider, ScriptedProvider,
};
use mscbench_core::corpus::{
    build_sample, end_of_day, ArxivTransport, CachedTransport, HttpArxivTransport, SampleOptions,
};
use mscbench_core::evaluation::{
    aggregate, compare, emit_report, reconcile, ComparisonRow, OutcomeSummary, ReportFormat,
    ReportHeader, RowIdentity,
};
use mscbench_core::msc::{parse_code, Level};
use mscbench_core::net::RetryPolicy;
use mscbench_core::store::{load_fixture, Fixture, RunConfig, RunEvent, RunRecord, RunStore};
use mscbench_core::{Taxonomy, TopClass, ValidationStatus};

use crate::args::{ClassifyArgs, EvaluateArgs, FormatArg, ProviderKind, ReportArgs, SampleArgs};
use crate::exit::{PartialTransportFailure, UsageError};

/// The bundled code list, or the one at `path`.
pub fn load_taxonomy(path: Option<&Path>) -> Result<&'static Taxonomy> {
    match path {
        None => Ok(Taxonomy::shipped()),
        Some(path) => {
            let tax = Taxonomy::load(path)
                .with_context(|| format!("loading code list {}", path.display()))?;
            Ok(Box::leak(Box::new(tax)))
        }
    }
}

pub fn taxonomy_stats(taxonomy: &Taxonomy) -> String {
    taxonomy.level_counts().to_string()
}

pub fn taxonomy_check(taxonomy: &Taxonomy, codes: &[String]) -> Vec<String> {
    codes
        .iter()
        .map(|text| match parse_code(text) {
            Ok(code) => {
                let status = status_name(taxonomy.validate(&code));
                let description = taxonomy.description(&code).unwrap_or("");
                format!("{}\t{status}\t{description}", code.canonical())
            }
            Err(_) => format!(
                "{}\t{}\t",
                text.trim(),
                status_name(ValidationStatus::Malformed)
            ),
        })
        .collect()
}

fn status_name(status: ValidationStatus) -> String {
    serde_json::to_value(status)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn parse_class(text: &str) -> Result<TopClass> {
    match parse_code(text) {
        Ok(code) if code.level() == Level::Top => Ok(code.top()),
        _ => Err(UsageError(format!("{text:?} is not a top-level class")).into()),
    }
}

fn parse_classes(texts: &[String]) -> Result<Vec<TopClass>> {
    texts
        .iter()
        .map(|t| t.trim())
        .filter(|t| !t.is_empty() && !t.eq_ignore_ascii_case("none"))
        .map(parse_class)
        .collect()
}

/// Reads `<id>.txt` files; `/` in legacy ids is written as `_`.
fn read_user_texts(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut texts = BTreeMap::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| anyhow!("bad file name {}", path.display()))?
                .replace('_', "/");
            let text =
                fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            texts.insert(id, text);
        }
    }
    Ok(texts)
}

pub fn resolve_run(store: &RunStore, run: Option<&str>) -> Result<String> {
    match run {
        Some(id) => Ok(id.to_string()),
        None => store.latest_run()?.ok_or_else(|| {
            anyhow!("the store has no runs yet; start with `mscbench sample` or `mscbench evaluate --fixture`")
        }),
    }
}

pub fn sample(store: &RunStore, taxonomy: &Taxonomy, args: &SampleArgs) -> Result<String> {
    let exclusions = parse_classes(&args.exclude)?;
    let only_classes = parse_classes(&args.classes)?;
    let user_texts = match &args.user_text {
        Some(dir) => read_user_texts(dir)?,
        None => BTreeMap::new(),
    };
    let _lock = store.try_lock()?;
    let cache_dir = store.arxiv_cache_dir();
    let transport: Box<dyn ArxivTransport> = if args.offline {
        Box::new(CachedTransport::offline(cache_dir))
    } else {
        Box::new(CachedTransport::new(
            cache_dir,
            Box::new(HttpArxivTransport::from_env()?),
        ))
    };
    let cutoff = end_of_day(args.cutoff);
    let opts = SampleOptions {
        concurrency: args.concurrency.max(1),
        max_results: args.max_results,
        only_classes,
        user_texts,
    };
    let set = build_sample(taxonomy, cutoff, &exclusions, transport.as_ref(), &opts);

    let run = store.create_run()?;
    let config = RunConfig {
        cutoff: Some(cutoff),
        exclusions: exclusions.clone(),
        source: Some(if args.offline { "arxiv-cache" } else { "arxiv" }.into()),
        ..RunConfig::default()
    };
    store.append_event(&run, &RunEvent::Config { config })?;
    store.append_event(
        &run,
        &RunEvent::SampleBuilt {
            sample: set.clone(),
        },
    )?;
    store.write_artifact(&run, "sample.json", &serde_json::to_vec_pretty(&set)?)?;

    println!("run {run}");
    println!(
        "sampled {} items for {} classes ({} unmapped)",
        set.items.len(),
        set.class_to_item.len(),
        set.unmapped.len()
    );
    for u in &set.unmapped {
        println!("unmapped {}: {}", u.class, u.reason);
    }
    let failed = set.unmapped.iter().filter(|u| u.transport).count();
    if failed > 0 {
        return Err(PartialTransportFailure(format!(
            "{failed} classes could not be fetched; the partial sample is in run {run}"
        ))
        .into());
    }
    Ok(run)
}

fn build_provider(args: &ClassifyArgs) -> Result<Box<dyn ChatProvider>> {
    Ok(match args.provider {
        ProviderKind::Http => Box::new(HttpChatProvider::new(
            args.endpoint.clone(),
            args.model.clone(),
            &args.api_key_env,
            RetryPolicy::default(),
        )?),
        ProviderKind::Replay => Box::new(ReplayProvider::new(args.model.clone())),
        ProviderKind::Mock => {
            let path = args
                .mock_script
                .as_ref()
                .ok_or_else(|| UsageError("--provider mock needs --mock-script".into()))?;
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let script = ScriptedProvider::from_json(&text)
                .with_context(|| format!("parsing mock script {}", path.display()))?;
            Box::new(script)
        }
    })
}

fn load_lexicon(path: Option<&PathBuf>) -> Result<CueLexicon> {
    match path {
        None => Ok(CueLexicon::default()),
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing cues {}", path.display()))
        }
    }
}

fn sampled(record: &RunRecord) -> Result<&mscbench_core::corpus::SampleSet> {
    record.sample.as_ref().ok_or_else(|| {
        anyhow!(
            "run {} has no sample; run `mscbench sample` first",
            record.run_id
        )
    })
}

pub fn classify(store: &RunStore, taxonomy: &Taxonomy, args: &ClassifyArgs) -> Result<String> {
    let provider = build_provider(args)?;
    let lexicon = load_lexicon(args.cues.as_ref())?;
    let protocol = if args.broaden {
        PromptProtocol::default().with_broaden()
    } else {
        PromptProtocol::default()
    };
    let _lock = store.try_lock()?;
    let run = resolve_run(store, args.run.as_deref())?;
    let record = store.load_run(&run)?;
    let sample = sampled(&record)?;
    let cache = store.transcripts();
    let classifier = Classifier {
        provider: provider.as_ref(),
        protocol: &protocol,
        taxonomy,
        lexicon: &lexicon,
        cache: Some(&cache),
    };

    let config = RunConfig {
        model_id: Some(provider.model_id().to_string()),
        provider: Some(args.provider.name().to_string()),
        protocol_hash: Some(protocol.hash()),
        ..record.config.clone()
    };
    store.append_event(&run, &RunEvent::Config { config })?;

    let results = classifier.classify_all(&sample.items, args.concurrency.max(1), args.session);
    let mut failures = Vec::new();
    for (item, result) in sample.items.iter().zip(results) {
        match result {
            Ok(outcome) => store.append_event(
                &run,
                &RunEvent::Classified {
                    arxiv_id: item.arxiv_id.clone(),
                    outcome,
                },
            )?,
            Err(err) => {
                log::error!("{}: {err}", item.arxiv_id);
                store.append_event(
                    &run,
                    &RunEvent::ClassificationFailed {
                        arxiv_id: item.arxiv_id.clone(),
                        error: err.to_string(),
                    },
                )?;
                failures.push(err);
            }
        }
    }
    println!("run {run}");
    println!(
        "classified {} of {} items with {}",
        sample.items.len() - failures.len(),
        sample.items.len(),
        provider.model_id()
    );
    if let Some(first) = failures.first() {
        let summary = format!("{} items failed, first: {first}", failures.len());
        if failures
            .iter()
            .any(|e| matches!(e, ClassifierError::Transport { .. }))
        {
            return Err(PartialTransportFailure(summary).into());
        }
        bail!(summary);
    }
    Ok(run)
}

/// Rows for every sampled item that has an outcome, in sample order.
pub fn rows_for(record: &RunRecord) -> Result<Vec<ComparisonRow>> {
    let sample = sampled(record)?;
    let mut rows = Vec::new();
    for item in &sample.items {
        let Some(outcome) = record.outcome(&item.arxiv_id) else {
            log::warn!("{} has no classification; left out", item.arxiv_id);
            continue;
        };
        let identity = RowIdentity {
            arxiv_id: item.arxiv_id.clone(),
            msc_section: item
                .sampled_under
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(", "),
            arxiv_msc: item.ground_truth_raw.clone(),
        };
        rows.push(compare(
            identity,
            &item.ground_truth_top_set(),
            &OutcomeSummary::from(outcome),
        ));
    }
    if rows.is_empty() {
        bail!(
            "run {} has no classifications; run `mscbench classify` first",
            record.run_id
        );
    }
    Ok(rows)
}

pub fn evaluate(store: &RunStore, args: &EvaluateArgs) -> Result<String> {
    let _lock = store.try_lock()?;
    let (run, event) = match &args.fixture {
        Some(source) => {
            let fixture = if source == "builtin" {
                Fixture::builtin()
            } else {
                load_fixture(source)?
            };
            let (rows, references) = fixture.evaluate();
            let run = store.create_run()?;
            let config = RunConfig {
                source: Some(format!("fixture:{source}")),
                ..RunConfig::default()
            };
            store.append_event(&run, &RunEvent::Config { config })?;
            (
                run,
                RunEvent::Evaluated {
                    rows,
                    references: Some(references),
                },
            )
        }
        None => {
            let run = resolve_run(store, args.run.as_deref())?;
            let record = store.load_run(&run)?;
            let rows = rows_for(&record)?;
            (
                run,
                RunEvent::Evaluated {
                    rows,
                    references: None,
                },
            )
        }
    };
    store.append_event(&run, &event)?;
    let report = store.load_run(&run)?.report();
    println!("run {run}");
    for (name, value) in report.aggregates.entries() {
        println!("{name}\t{value}");
    }
    println!("discrepancies\t{}", report.discrepancy_log.len());
    Ok(run)
}

pub fn render_report(record: &RunRecord, format: ReportFormat) -> Result<String> {
    if !record.is_evaluated() {
        bail!(
            "run {} is not evaluated; run `mscbench evaluate` first",
            record.run_id
        );
    }
    let mut report = aggregate(record.rows.clone());
    if let Some(refs) = &record.references {
        reconcile(&mut report, refs);
    }
    let header = ReportHeader {
        run_id: record.run_id.clone(),
        generated_at: Utc::now(),
    };
    Ok(emit_report(&report, format, &header)?)
}

pub fn report(store: &RunStore, args: &ReportArgs) -> Result<String> {
    let _lock = store.try_lock()?;
    let run = resolve_run(store, args.run.as_deref())?;
    let record = store.load_run(&run)?;
    let (format, name) = match args.format {
        FormatArg::Markdown | FormatArg::Md => (ReportFormat::Markdown, "report.md"),
        FormatArg::Csv => (ReportFormat::Csv, "report.csv"),
    };
    let text = render_report(&record, format)?;
    store.write_artifact(&run, name, text.as_bytes())?;
    match &args.output {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(run)
}

pub fn list_runs(store: &RunStore) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    for run in store.list_runs()? {
        let record = store.load_run(&run)?;
        let items = record.sample.as_ref().map_or(0, |s| s.items.len());
        let line = if record.is_evaluated() {
            let a = record.report().aggregates;
            format!(
                "{run}\titems {}\tmatching {}\tdiffering {}\tscored {}",
                a.n_items,
                a.n_matching,
                a.n_differing,
                record.report().quality_distribution.values().sum::<usize>()
            )
        } else {
            format!(
                "{run}\titems {items}\tclassified {}\tnot evaluated",
                record.outcomes.len()
            )
        };
        lines.push(line);
    }
    Ok(lines)
}
