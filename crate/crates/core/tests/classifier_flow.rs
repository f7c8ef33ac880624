//! Conversation flows through the classifier with scripted, replayed and
//! HTTP providers.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::{DateTime, Utc};
use mockito::Matcher;
use mscbench_core::classifier::{
    ChatMessage, ChatProvider, ClassificationOutcome, Classifier, ClassifierError, Confidence,
    CueLexicon, Exchange, HttpChatProvider, PromptProtocol, ReplayProvider, ScriptedProvider,
};
use mscbench_core::corpus::{parse_ground_truth, AbstractSource, PaperItem};
use mscbench_core::evaluation::{compare, Category, OutcomeSummary, RowIdentity};
use mscbench_core::net::{RetryPolicy, TransportError};
use mscbench_core::store::{TranscriptCache, TranscriptKey};
use mscbench_core::{Taxonomy, TopClass, ValidationStatus};
use serde_json::json;

const DIALOGUE: &str = "Based on the title and abstract, the primary classification is 22E50 \
    (Representations of Lie and linear algebraic groups over local fields). \
    Secondary classifications: 11F27 (Theta series; Weil representation), \
    20G25 (Linear algebraic groups over local fields), \
    11F70 (Representation-theoretic methods; automorphic representations).";

const REFUSAL: &str = "With so little detail in the abstract it is challenging\n\
    to classify this text under MSC 2020. The abstract mentions recent work in\n\
    arithmetic geometry but lacks specific topics, so more of the paper would be needed.";

fn item(id: &str, msc: &str) -> PaperItem {
    PaperItem {
        arxiv_id: id.into(),
        title: format!("A title for {id}"),
        abstract_text: "We study theta correspondences for p-adic groups.".into(),
        abstract_source: AbstractSource::Metadata,
        ground_truth_raw: format!("({msc})"),
        ground_truth: parse_ground_truth(msc),
        sampled_under: vec![TopClass::new(22).unwrap()],
        submitted: DateTime::<Utc>::from_timestamp(1_711_600_000, 0).unwrap(),
        withdrawn: false,
    }
}

fn canon(codes: &[mscbench_core::MscCode]) -> Vec<String> {
    codes.iter().map(|c| c.canonical()).collect()
}

struct Setup {
    protocol: PromptProtocol,
    lexicon: CueLexicon,
}

impl Setup {
    fn new() -> Self {
        Setup {
            protocol: PromptProtocol::default(),
            lexicon: CueLexicon::default(),
        }
    }

    fn classifier<'a>(
        &'a self,
        provider: &'a dyn ChatProvider,
        cache: Option<&'a TranscriptCache>,
    ) -> Classifier<'a> {
        Classifier {
            provider,
            protocol: &self.protocol,
            taxonomy: Taxonomy::shipped(),
            lexicon: &self.lexicon,
            cache,
        }
    }
}

/// Counts round trips made through the wrapped provider.
struct Counting<P> {
    inner: P,
    calls: AtomicUsize,
}

impl<P: ChatProvider> ChatProvider for Counting<P> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(messages)
    }
}

#[test]
fn scripted_dialogue_yields_primary_and_secondaries() {
    let setup = Setup::new();
    let provider = ScriptedProvider::new("mock").script("2403.00000", &[DIALOGUE]);
    let out = setup
        .classifier(&provider, None)
        .classify(&item("2403.00000", "11F27, 22E50, 11F70"))
        .unwrap();
    assert_eq!(canon(&out.primary), ["22E50"]);
    assert_eq!(canon(&out.secondary), ["11F27", "20G25", "11F70"]);
    assert_eq!(out.confidence, Confidence::Definitive);
    assert_eq!(out.transcript.len(), 1);
    let prompts = &out.transcript[0].prompts;
    assert_eq!(prompts.len(), 3);
    assert!(prompts[0].starts_with("Call the following text \"2403.00000-Title\":"));
    assert!(prompts[1].starts_with("Call the following text \"2403.00000-Abstract\":"));
    assert!(prompts[2].contains("classify the text according to the MSC 2020 classification"));
    for p in prompts {
        assert!(!p.contains('{') && !p.contains('<'), "{p}");
    }
}

#[test]
fn missing_secondaries_trigger_one_follow_up() {
    let setup = Setup::new();
    let provider = Counting {
        inner: ScriptedProvider::new("mock").script(
            "2403.00000",
            &[
                "The main classification is 22E50.",
                "Nothing more to add.",
                "unused",
            ],
        ),
        calls: AtomicUsize::new(0),
    };
    let out = setup
        .classifier(&provider, None)
        .classify(&item("2403.00000", "22E50"))
        .unwrap();
    assert_eq!(out.transcript.len(), 2);
    assert_eq!(provider.calls.load(Ordering::SeqCst), 2);
    assert_eq!(out.transcript[1].prompts.len(), 1);
    assert!(out.transcript[1].prompts[0].contains("secondary"));
    assert_eq!(canon(&out.primary), ["22E50"]);
    assert!(out.secondary.is_empty());

    let provider = ScriptedProvider::new("mock").script(
        "2403.00000",
        &["Primary: 22E50.", "You could add 11F70 and 11F27."],
    );
    let out = setup
        .classifier(&provider, None)
        .classify(&item("2403.00000", "22E50"))
        .unwrap();
    assert_eq!(canon(&out.secondary), ["11F70", "11F27"]);
}

#[test]
fn broaden_prompt_is_opt_in() {
    let mut setup = Setup::new();
    setup.protocol = PromptProtocol::default().with_broaden();
    let provider = ScriptedProvider::new("mock").script(
        "2403.00000",
        &[DIALOGUE, "Further relevant areas include 11S37 and 22E35."],
    );
    let out = setup
        .classifier(&provider, None)
        .classify(&item("2403.00000", "22E50"))
        .unwrap();
    assert_eq!(out.transcript.len(), 2);
    assert!(out.secondary.iter().any(|c| c.canonical() == "22E35"));
    assert_ne!(PromptProtocol::default().hash(), setup.protocol.hash());
}

#[test]
fn hedged_hallucination_is_flagged_and_kept() {
    let setup = Setup::new();
    let provider = ScriptedProvider::new("mock").script(
        "2312.00000",
        &["This likely falls under 35Q72, with 74B20 secondary."],
    );
    let out = setup
        .classifier(&provider, None)
        .classify(&item("2312.00000", "22; 76"))
        .unwrap();
    assert_eq!(canon(&out.primary), ["35Q72"]);
    assert_eq!(canon(&out.secondary), ["74B20"]);
    assert_eq!(out.confidence, Confidence::Hedged);
    assert_eq!(out.validation_flags.len(), 1);
    assert_eq!(out.validation_flags[0].code, "35Q72");
    assert_eq!(
        out.validation_flags[0].status,
        ValidationStatus::UnknownCode
    );
    let row = compare(
        RowIdentity::default(),
        &parse_ground_truth("22; 76").top_set(),
        &OutcomeSummary::from(&out),
    );
    assert_eq!(row.category, Category::Differing);
    assert_eq!(row.n_primary_wrong, 1);
}

#[test]
fn refusal_replays_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = TranscriptCache::new(dir.path());
    let setup = Setup::new();
    let refused = item("2112.12010", "14; 13; 11; 19");
    let key = TranscriptKey {
        arxiv_id: refused.arxiv_id.clone(),
        protocol_hash: setup.protocol.hash(),
        model_id: "gpt-3.5-turbo".into(),
    };
    cache
        .put(
            &key,
            &[Exchange {
                prompts: vec!["earlier session".into()],
                reply: REFUSAL.into(),
            }],
        )
        .unwrap();
    let replay = ReplayProvider::new("gpt-3.5-turbo");
    let out = setup
        .classifier(&replay, Some(&cache))
        .classify(&refused)
        .unwrap();
    assert_eq!(out.confidence, Confidence::Refusal);
    assert!(out.primary.is_empty() && out.secondary.is_empty());
    assert_eq!(out.refusal_text.as_deref(), Some(REFUSAL));

    let row = compare(
        RowIdentity::default(),
        &refused.ground_truth_top_set(),
        &OutcomeSummary::from(&out),
    );
    assert_eq!(row.category, Category::Matching);
    assert_eq!(row.n_primary_wrong, 0);
    assert_eq!(row.n_primary_missed, 4);
}

#[test]
fn replay_without_cache_entry_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cache = TranscriptCache::new(dir.path());
    let setup = Setup::new();
    let replay = ReplayProvider::new("gpt-3.5-turbo");
    for cache in [None, Some(&cache)] {
        let err = setup
            .classifier(&replay, cache)
            .classify(&item("2403.00000", "22E50"))
            .unwrap_err();
        assert!(
            matches!(err, ClassifierError::NoCachedTranscript { .. }),
            "{err}"
        );
        assert!(err.to_string().contains("no cached transcript"));
    }
}

#[test]
fn replay_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cache = TranscriptCache::new(dir.path());
    let setup = Setup::new();
    let live = ScriptedProvider::new("mock").script("2403.00000", &[DIALOGUE]);
    let it = item("2403.00000", "22E50");
    let first = setup.classifier(&live, Some(&cache)).classify(&it).unwrap();

    let replay = ReplayProvider::new("mock");
    let a = setup
        .classifier(&replay, Some(&cache))
        .classify(&it)
        .unwrap();
    let b = setup
        .classifier(&replay, Some(&cache))
        .classify(&it)
        .unwrap();
    assert_eq!(a, b);
    assert_eq!(a, first);

    // A different model id does not see the entry.
    let other = ReplayProvider::new("other");
    assert!(setup
        .classifier(&other, Some(&cache))
        .classify(&it)
        .is_err());
}

#[test]
fn classify_all_keeps_item_order() {
    let setup = Setup::new();
    let ids: Vec<String> = (0..12).map(|n| format!("2403.{n:05}")).collect();
    let mut provider = ScriptedProvider::new("mock");
    for (n, id) in ids.iter().enumerate() {
        let reply = format!("Primary: {:02}A05. Secondary: 97U50.", n % 10);
        provider = provider.script(id, &[reply.as_str()]);
    }
    let items: Vec<PaperItem> = ids.iter().map(|id| item(id, "00")).collect();
    let classifier = setup.classifier(&provider, None);
    let parallel: Vec<ClassificationOutcome> = classifier
        .classify_all(&items, 4, false)
        .into_iter()
        .map(Result::unwrap)
        .collect();
    for (n, out) in parallel.iter().enumerate() {
        assert_eq!(canon(&out.primary), [format!("{:02}A05", n % 10)]);
    }
    let session: Vec<ClassificationOutcome> = classifier
        .classify_all(&items, 4, true)
        .into_iter()
        .map(Result::unwrap)
        .collect();
    assert_eq!(
        parallel.iter().map(|o| &o.primary).collect::<Vec<_>>(),
        session.iter().map(|o| &o.primary).collect::<Vec<_>>()
    );
}

#[test]
fn transcript_matches_round_trips() {
    let setup = Setup::new();
    let cases: [&[&str]; 3] = [
        &[DIALOGUE],
        &["Primary: 22E50.", "Secondary: 11F70."],
        &[REFUSAL],
    ];
    for replies in cases {
        let provider = Counting {
            inner: ScriptedProvider::new("mock").script("2403.00000", replies),
            calls: AtomicUsize::new(0),
        };
        let out = setup
            .classifier(&provider, None)
            .classify(&item("2403.00000", "22E50"))
            .unwrap();
        assert!(!out.transcript.is_empty());
        assert_eq!(out.transcript.len(), provider.calls.load(Ordering::SeqCst));
    }
}

#[test]
fn http_provider_speaks_chat_completions() {
    let mut server = mockito::Server::new();
    let key_env = "MSCBENCH_TEST_CHAT_KEY_PRESENT";
    // Only this test reads the variable.
    std::env::set_var(key_env, "sk-test");
    let busy = server
        .mock("POST", "/v1/chat/completions")
        .with_status(429)
        .expect(1)
        .create();
    let ok = server
        .mock("POST", "/v1/chat/completions")
        .match_header("authorization", "Bearer sk-test")
        .match_body(Matcher::PartialJson(json!({
            "model": "gpt-test",
            "messages": [{"role": "user", "content": "hello"}]
        })))
        .with_body(
            json!({"choices": [{"message": {"role": "assistant", "content": "Primary: 22E50."}}]})
                .to_string(),
        )
        .expect(1)
        .create();
    let retry = RetryPolicy {
        max_retries: 2,
        base_delay: std::time::Duration::from_millis(5),
        max_delay: std::time::Duration::from_millis(10),
    };
    let provider =
        HttpChatProvider::new(format!("{}/v1/", server.url()), "gpt-test", key_env, retry).unwrap();
    assert_eq!(provider.model_id(), "gpt-test");
    let reply = provider.complete(&[ChatMessage::user("hello")]).unwrap();
    assert_eq!(reply, "Primary: 22E50.");
    busy.assert();
    ok.assert();
}

#[test]
fn http_provider_without_key_sends_no_credentials() {
    let mut server = mockito::Server::new();
    let m = server
        .mock("POST", "/chat/completions")
        .match_header("authorization", Matcher::Missing)
        .with_body(json!({"choices": [{"message": {"content": "Secondary: 11F70."}}]}).to_string())
        .create();
    let provider = HttpChatProvider::new(
        server.url(),
        "local",
        "MSCBENCH_TEST_CHAT_KEY_ABSENT",
        RetryPolicy::none(),
    )
    .unwrap();
    assert_eq!(
        provider.complete(&[ChatMessage::user("x")]).unwrap(),
        "Secondary: 11F70."
    );
    m.assert();

    let failing = server
        .mock("POST", "/v2/chat/completions")
        .with_status(500)
        .expect(1)
        .create();
    let provider = HttpChatProvider::new(
        format!("{}/v2", server.url()),
        "local",
        "MSCBENCH_TEST_CHAT_KEY_ABSENT",
        RetryPolicy::none(),
    )
    .unwrap();
    let err = provider.complete(&[ChatMessage::user("x")]).unwrap_err();
    assert!(matches!(err, TransportError::Status { status: 500, .. }));
    failing.assert();
}

#[test]
fn empty_abstract_is_rejected() {
    let setup = Setup::new();
    let provider = ScriptedProvider::new("mock").script("*", &[DIALOGUE]);
    let mut bad = item("2403.00000", "22E50");
    bad.abstract_text.clear();
    assert!(setup.classifier(&provider, None).classify(&bad).is_err());
    let ids: BTreeSet<_> = provider.replies.keys().cloned().collect();
    assert_eq!(ids, BTreeSet::from(["*".to_string()]));
}
