//! arXiv Atom API client and an on-disk response cache keyed by query string.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use sha2::{Digest, Sha256};

use crate::msc::TopClass;
use crate::net::{RateLimiter, RetryPolicy, TransportError};

use super::ground_truth::{parse_ground_truth, GroundTruth};

pub const DEFAULT_BASE_URL: &str = "https://export.arxiv.org/api/query";
pub const BASE_URL_ENV: &str = "MSCBENCH_ARXIV_URL";

const ATOM_NS: &str = "http://www.w3.org/2005/Atom";
const ARXIV_NS: &str = "http://arxiv.org/schemas/atom";

/// One `<entry>` of an arXiv Atom feed.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomEntry {
    pub arxiv_id: String,
    pub title: String,
    pub summary: String,
    pub published: DateTime<Utc>,
    pub comment: Option<String>,
    pub categories: Vec<String>,
    /// Raw MSC field, reassembled from the category terms that are not arXiv archives.
    pub msc_field: String,
    pub ground_truth: GroundTruth,
}

impl AtomEntry {
    /// An entry whose only category term is the MSC field.
    pub fn new(
        arxiv_id: &str,
        title: &str,
        summary: &str,
        published: DateTime<Utc>,
        msc_field: &str,
    ) -> Self {
        AtomEntry {
            arxiv_id: arxiv_id.to_string(),
            title: title.to_string(),
            summary: summary.to_string(),
            published,
            comment: None,
            categories: vec![msc_field.to_string()],
            msc_field: msc_field.to_string(),
            ground_truth: parse_ground_truth(msc_field),
        }
    }

    pub fn with_comment(mut self, comment: &str) -> Self {
        self.comment = Some(comment.to_string());
        self
    }

    pub fn withdrawn(&self) -> bool {
        self.comment
            .as_deref()
            .is_some_and(|c| c.to_lowercase().contains("withdrawn"))
    }
}

/// Strips the abs URL prefix and version suffix: `http://arxiv.org/abs/2403.16849v2` → `2403.16849`.
pub fn normalize_id(raw: &str) -> String {
    let id = raw.trim();
    let id = id.split_once("/abs/").map_or(id, |(_, rest)| rest);
    match id.rfind('v') {
        Some(pos)
            if pos > 0
                && id[pos + 1..].bytes().all(|b| b.is_ascii_digit())
                && pos + 1 < id.len() =>
        {
            id[..pos].to_string()
        }
        _ => id.to_string(),
    }
}

fn is_arxiv_category(term: &str) -> bool {
    // math.NT, hep-th, cs.LG, q-bio.PE, stat.ML
    term.chars().next().is_some_and(|c| c.is_ascii_lowercase())
        && term
            .chars()
            .all(|c| c.is_ascii_alphabetic() || c == '.' || c == '-')
}

fn child_text<'a>(node: roxmltree::Node<'a, 'a>, ns: &str, name: &str) -> Option<&'a str> {
    node.children()
        .find(|n| n.has_tag_name((ns, name)))
        .and_then(|n| n.text())
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses an Atom response into entries, newest first as served.
pub fn parse_feed(xml: &str) -> Result<Vec<AtomEntry>, TransportError> {
    let doc = roxmltree::Document::parse(xml)
        .map_err(|e| TransportError::Decode(format!("invalid Atom document: {e}")))?;
    let mut out = Vec::new();
    for entry in doc
        .root_element()
        .children()
        .filter(|n| n.has_tag_name((ATOM_NS, "entry")))
    {
        let raw_id = child_text(entry, ATOM_NS, "id").unwrap_or_default();
        if raw_id.contains("/api/errors") {
            let msg = child_text(entry, ATOM_NS, "summary").unwrap_or("unknown error");
            return Err(TransportError::Decode(format!(
                "arXiv API error: {}",
                squash(msg)
            )));
        }
        let published = child_text(entry, ATOM_NS, "published")
            .and_then(|p| DateTime::parse_from_rfc3339(p.trim()).ok())
            .map(|p| p.with_timezone(&Utc))
            .ok_or_else(|| {
                TransportError::Decode(format!("entry {raw_id} lacks a valid <published>"))
            })?;
        let categories: Vec<String> = entry
            .children()
            .filter(|n| n.has_tag_name((ATOM_NS, "category")))
            .filter_map(|n| n.attribute("term"))
            .map(|t| t.trim().to_string())
            .collect();
        let mut msc_terms: Vec<String> = categories
            .iter()
            .filter(|t| !is_arxiv_category(t))
            .cloned()
            .collect();
        if let Some(extra) = child_text(entry, ARXIV_NS, "msc_class") {
            msc_terms.push(extra.trim().to_string());
        }
        let msc_field = msc_terms.join("; ");
        out.push(AtomEntry {
            arxiv_id: normalize_id(raw_id),
            title: squash(child_text(entry, ATOM_NS, "title").unwrap_or_default()),
            summary: child_text(entry, ATOM_NS, "summary")
                .unwrap_or_default()
                .to_string(),
            published,
            comment: child_text(entry, ARXIV_NS, "comment").map(squash),
            ground_truth: parse_ground_truth(&msc_field),
            msc_field,
            categories,
        });
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders entries as an arXiv-style Atom feed, e.g. to seed an offline cache.
pub fn render_feed(entries: &[AtomEntry]) -> String {
    let mut out = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<feed xmlns=\"http://www.w3.org/2005/Atom\" xmlns:arxiv=\"http://arxiv.org/schemas/atom\">\n",
    );
    for e in entries {
        out.push_str("  <entry>\n");
        out.push_str(&format!(
            "    <id>http://arxiv.org/abs/{}v1</id>\n",
            escape(&e.arxiv_id)
        ));
        out.push_str(&format!(
            "    <published>{}</published>\n",
            e.published
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        ));
        out.push_str(&format!("    <title>{}</title>\n", escape(&e.title)));
        out.push_str(&format!("    <summary>{}</summary>\n", escape(&e.summary)));
        if let Some(c) = &e.comment {
            out.push_str(&format!(
                "    <arxiv:comment>{}</arxiv:comment>\n",
                escape(c)
            ));
        }
        for term in &e.categories {
            out.push_str(&format!(
                "    <category term=\"{}\" scheme=\"http://arxiv.org/schemas/atom\"/>\n",
                escape(term)
            ));
        }
        out.push_str("  </entry>\n");
    }
    out.push_str("</feed>\n");
    out
}

/// Query string selecting the newest submissions mentioning a class.
pub fn class_query(top: TopClass, max_results: usize) -> String {
    format!(
        "search_query=all:{top}&sortBy=submittedDate&sortOrder=descending&start=0&max_results={max_results}"
    )
}

/// Fetches raw Atom documents for query strings.
pub trait ArxivTransport: Send + Sync {
    fn fetch(&self, query: &str) -> Result<String, TransportError>;
}

/// Live client for the arXiv API.
pub struct HttpArxivTransport {
    client: reqwest::blocking::Client,
    base_url: String,
    limiter: RateLimiter,
    retry: RetryPolicy,
}

impl HttpArxivTransport {
    /// Base URL from the environment, falling back to the public endpoint.
    /// arXiv asks clients to wait three seconds between calls.
    pub fn from_env() -> Result<Self, TransportError> {
        let base = std::env::var(BASE_URL_ENV).unwrap_or_else(|_| DEFAULT_BASE_URL.to_string());
        Self::new(base, Duration::from_secs(3), RetryPolicy::default())
    }

    pub fn new(
        base_url: impl Into<String>,
        min_interval: Duration,
        retry: RetryPolicy,
    ) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(concat!("mscbench/", env!("CARGO_PKG_VERSION")))
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(TransportError::from)?;
        Ok(HttpArxivTransport {
            client,
            base_url: base_url.into(),
            limiter: RateLimiter::new(min_interval),
            retry,
        })
    }
}

impl ArxivTransport for HttpArxivTransport {
    fn fetch(&self, query: &str) -> Result<String, TransportError> {
        let url = format!("{}?{query}", self.base_url);
        self.retry.run(|| {
            self.limiter.acquire();
            log::debug!("GET {url}");
            let resp = self.client.get(&url).send()?.error_for_status()?;
            Ok(resp.text()?)
        })
    }
}

/// Stores raw responses under `<dir>/<sha256(query)>.atom`.
///
/// With no inner transport it serves from disk only and reports misses as
/// [`TransportError::NotCached`].
pub struct CachedTransport {
    dir: PathBuf,
    inner: Option<Box<dyn ArxivTransport>>,
}

impl CachedTransport {
    pub fn new(dir: impl Into<PathBuf>, inner: Box<dyn ArxivTransport>) -> Self {
        CachedTransport {
            dir: dir.into(),
            inner: Some(inner),
        }
    }

    pub fn offline(dir: impl Into<PathBuf>) -> Self {
        CachedTransport {
            dir: dir.into(),
            inner: None,
        }
    }

    pub fn path_for(dir: &Path, query: &str) -> PathBuf {
        let digest = Sha256::digest(query.as_bytes());
        dir.join(format!("{}.atom", hex::encode(digest)))
    }

    /// Writes a response for `query`, replacing any previous copy.
    pub fn store(dir: &Path, query: &str, body: &str) -> std::io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = Self::path_for(dir, query);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(body.as_bytes())?;
            file.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

impl ArxivTransport for CachedTransport {
    fn fetch(&self, query: &str) -> Result<String, TransportError> {
        let path = Self::path_for(&self.dir, query);
        if let Ok(body) = fs::read_to_string(&path) {
            log::debug!("cache hit for {query}");
            return Ok(body);
        }
        let inner = self
            .inner
            .as_ref()
            .ok_or_else(|| TransportError::NotCached(query.to_string()))?;
        let body = inner.fetch(query)?;
        if let Err(err) = Self::store(&self.dir, query, &body) {
            log::warn!("could not cache response for {query}: {err}");
        }
        Ok(body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FEED: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<feed xmlns="http://www.w3.org/2005/Atom" xmlns:arxiv="http://arxiv.org/schemas/atom">
  <entry>
    <id>http://arxiv.org/abs/2403.16849v1</id>
    <published>2024-03-25T15:00:00Z</published>
    <title>A  title
      over two lines</title>
    <summary>  Some abstract.  </summary>
    <arxiv:comment>12 pages</arxiv:comment>
    <category term="math.HO" scheme="http://arxiv.org/schemas/atom"/>
    <category term="00A05, 97A99" scheme="http://arxiv.org/schemas/atom"/>
  </entry>
  <entry>
    <id>http://arxiv.org/abs/hep-th/9807008v3</id>
    <published>1998-07-01T00:00:00Z</published>
    <title>Old</title>
    <summary>x</summary>
    <arxiv:comment>This paper has been Withdrawn by the author</arxiv:comment>
    <category term="hep-th"/>
  </entry>
</feed>"#;

    #[test]
    fn ids_lose_prefix_and_version() {
        assert_eq!(
            normalize_id("http://arxiv.org/abs/2403.16849v2"),
            "2403.16849"
        );
        assert_eq!(
            normalize_id("http://arxiv.org/abs/math/9807008v1"),
            "math/9807008"
        );
        assert_eq!(normalize_id("9807008"), "9807008");
        assert_eq!(normalize_id("solv-int/9901001"), "solv-int/9901001");
    }

    #[test]
    fn parses_entries() {
        let entries = parse_feed(FEED).unwrap();
        assert_eq!(entries.len(), 2);
        let e = &entries[0];
        assert_eq!(e.arxiv_id, "2403.16849");
        assert_eq!(e.title, "A title over two lines");
        assert_eq!(e.msc_field, "00A05, 97A99");
        assert_eq!(e.ground_truth.codes.len(), 2);
        assert!(!e.withdrawn());
        assert!(entries[1].withdrawn());
        assert!(entries[1].ground_truth.is_empty());
    }

    #[test]
    fn api_errors_surface() {
        let xml = r#"<feed xmlns="http://www.w3.org/2005/Atom"><entry><id>http://arxiv.org/api/errors#bad</id><summary>malformed query</summary></entry></feed>"#;
        assert!(matches!(parse_feed(xml), Err(TransportError::Decode(_))));
        assert!(parse_feed("<not atom").is_err());
    }

    #[test]
    fn offline_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let offline = CachedTransport::offline(dir.path());
        let q = class_query(TopClass::new(0).unwrap(), 50);
        assert!(matches!(
            offline.fetch(&q),
            Err(TransportError::NotCached(_))
        ));
        CachedTransport::store(dir.path(), &q, FEED).unwrap();
        assert_eq!(offline.fetch(&q).unwrap(), FEED);
    }

    #[test]
    fn rendered_feeds_parse_back() {
        let published = DateTime::parse_from_rfc3339("2024-03-28T10:00:00Z")
            .unwrap()
            .to_utc();
        let entry = AtomEntry::new("2403.00000", "A & B", "x < y", published, "11F27, 22E50")
            .with_comment("withdrawn");
        let back = parse_feed(&render_feed(std::slice::from_ref(&entry))).unwrap();
        assert_eq!(back, [entry]);
    }

    #[test]
    fn query_shape() {
        assert_eq!(
            class_query(TopClass::new(5).unwrap(), 10),
            "search_query=all:05&sortBy=submittedDate&sortOrder=descending&start=0&max_results=10"
        );
    }
}
