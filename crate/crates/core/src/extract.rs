//! Fetches grouped URLs, extracts readable article text from pages, and
//! caches per-URL fetch records on disk.
//!
//! The page loader is abstract: a plain HTTP loader with a browser-like
//! user agent for live runs, and a fixture loader replaying canned bodies
//! for tests and offline runs. A driver for a headless browser can be
//! plugged in through the same trait for script-rendered pages.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Article;
use crate::search::UrlGroup;
use crate::util::{parallel_map, sha256_hex, RetryPolicy};

/// Extracted text shorter than this is treated as an extraction failure
/// (paywall stubs, interstitials).
pub const DEFAULT_MIN_TEXT_CHARS: usize = 200;
/// Articles are truncated to this many characters (document prefix),
/// keeping prompts safely under typical context limits.
pub const DEFAULT_MAX_TEXT_CHARS: usize = 24_000;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("unparseable content")]
    UnparseableContent,
    #[error("cache I/O error: {0}")]
    CacheIoError(String),
    #[error("missing page fixture: {0}")]
    MissingFixture(String),
}

/// Outcome of loading and extracting one URL. `status: ok` carries the
/// article; `status: failed` carries a reason, one of `timeout`,
/// `http_error(<code>)`, `blocked`, `empty_content`, `invalid_url`, or
/// `network_error` for other transport failures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchRecord {
    pub url: String,
    pub status: FetchStatus,
    #[serde(default)]
    pub failure_reason: Option<String>,
    #[serde(default)]
    pub article: Option<Article>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchStatus {
    Ok,
    Failed,
}

impl FetchRecord {
    pub fn ok(article: Article) -> Self {
        Self {
            url: article.url.clone(),
            status: FetchStatus::Ok,
            failure_reason: None,
            article: Some(article),
        }
    }

    pub fn failed(url: &str, reason: String) -> Self {
        Self {
            url: url.to_string(),
            status: FetchStatus::Failed,
            failure_reason: Some(reason),
            article: None,
        }
    }
}

/// A fetched page body with the time it was retrieved. The fixture
/// loader reports a fixed timestamp so replayed runs are byte-identical.
pub struct LoadedPage {
    pub body: String,
    pub fetched_at: DateTime<Utc>,
}

#[derive(Debug)]
pub enum LoadError {
    Timeout,
    Http(u16),
    Blocked,
    MissingFixture(String),
    Other(String),
}

impl LoadError {
    fn is_retryable(&self) -> bool {
        match self {
            LoadError::Timeout => true,
            LoadError::Http(code) => *code >= 500,
            _ => false,
        }
    }

    fn reason(&self) -> String {
        match self {
            LoadError::Timeout => "timeout".to_string(),
            LoadError::Http(code) => format!("http_error({code})"),
            LoadError::Blocked => "blocked".to_string(),
            LoadError::MissingFixture(d) => format!("missing_fixture({d})"),
            LoadError::Other(_) => "network_error".to_string(),
        }
    }
}

pub trait PageLoader: Send + Sync {
    fn load(&self, url: &str, timeout: Duration) -> Result<LoadedPage, LoadError>;
}

/// Plain HTTP GET loader with a per-host politeness delay.
pub struct HttpLoader {
    client: reqwest::blocking::Client,
    politeness_delay: Duration,
    last_access: Mutex<HashMap<String, Instant>>,
}

impl HttpLoader {
    pub fn new(user_agent: &str, politeness_delay: Duration) -> Result<Self, ExtractError> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(user_agent)
            .build()
            .map_err(|e| ExtractError::CacheIoError(e.to_string()))?;
        Ok(Self {
            client,
            politeness_delay,
            last_access: Mutex::new(HashMap::new()),
        })
    }

    fn wait_for_host(&self, host: &str) {
        let sleep_for = {
            let mut guard = self.last_access.lock().expect("host throttle lock");
            let now = Instant::now();
            let wait = guard.get(host).and_then(|last| {
                self.politeness_delay.checked_sub(now.duration_since(*last))
            });
            guard.insert(host.to_string(), now + wait.unwrap_or_default());
            wait
        };
        if let Some(wait) = sleep_for {
            std::thread::sleep(wait);
        }
    }
}

impl PageLoader for HttpLoader {
    fn load(&self, url: &str, timeout: Duration) -> Result<LoadedPage, LoadError> {
        let parsed = url::Url::parse(url).map_err(|e| LoadError::Other(e.to_string()))?;
        if let Some(host) = parsed.host_str() {
            self.wait_for_host(host);
        }
        let response = self
            .client
            .get(url)
            .timeout(timeout)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    LoadError::Timeout
                } else {
                    LoadError::Other(e.to_string())
                }
            })?;
        let status = response.status().as_u16();
        match status {
            200..=299 => {}
            403 | 429 => return Err(LoadError::Blocked),
            _ => return Err(LoadError::Http(status)),
        }
        let fetched_at = Utc::now();
        let body = response.text().map_err(|e| LoadError::Other(e.to_string()))?;
        Ok(LoadedPage { body, fetched_at })
    }
}

/// Replays canned page bodies from `<dir>/<sha256(url)>.html`.
pub struct FixtureLoader {
    dir: PathBuf,
}

impl FixtureLoader {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn fixture_path(&self, url: &str) -> PathBuf {
        self.dir.join(format!("{}.html", sha256_hex(url.as_bytes())))
    }

    /// Replayed pages carry a fixed retrieval time so fixture runs are
    /// byte-identical.
    pub fn fixed_timestamp() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 11, 1, 0, 0, 0).unwrap()
    }
}

impl PageLoader for FixtureLoader {
    fn load(&self, url: &str, _timeout: Duration) -> Result<LoadedPage, LoadError> {
        let path = self.fixture_path(url);
        let body = std::fs::read_to_string(&path)
            .map_err(|_| LoadError::MissingFixture(sha256_hex(url.as_bytes())))?;
        Ok(LoadedPage {
            body,
            fetched_at: Self::fixed_timestamp(),
        })
    }
}

// ---------------------------------------------------------------------------
// Text extraction
// ---------------------------------------------------------------------------

/// Tags whose entire content is dropped.
const SKIP_TAGS: &[&str] = &[
    "script", "style", "noscript", "head", "nav", "header", "footer", "aside", "form", "iframe",
    "svg", "template", "button", "select",
];

/// Tags that terminate the current paragraph.
const BLOCK_TAGS: &[&str] = &[
    "p", "div", "br", "h1", "h2", "h3", "h4", "h5", "h6", "li", "ul", "ol", "tr", "table",
    "section", "article", "blockquote", "figure", "figcaption", "main", "pre", "hr",
];

fn decode_entities(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c != '&' {
            out.push(c);
            continue;
        }
        let rest = &text[i + 1..];
        let end = rest.find(';').filter(|e| *e <= 10);
        let Some(end) = end else {
            out.push('&');
            continue;
        };
        let name = &rest[..end];
        let decoded = match name {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            "nbsp" => Some(' '),
            _ => name
                .strip_prefix("#x")
                .or_else(|| name.strip_prefix("#X"))
                .and_then(|h| u32::from_str_radix(h, 16).ok())
                .or_else(|| name.strip_prefix('#').and_then(|d| d.parse().ok()))
                .and_then(char::from_u32),
        };
        match decoded {
            Some(ch) => {
                out.push(ch);
                for _ in 0..=end {
                    chars.next();
                }
            }
            None => out.push('&'),
        }
    }
    out
}

fn looks_like_html(raw: &str) -> bool {
    let mut chars = raw.char_indices();
    while let Some((i, c)) = chars.next() {
        if c == '<' {
            if let Some(next) = raw[i + 1..].chars().next() {
                if next.is_ascii_alphabetic() || next == '/' || next == '!' {
                    return true;
                }
            }
        }
    }
    false
}

fn push_paragraph(paragraphs: &mut Vec<String>, buffer: &mut String) {
    let decoded = decode_entities(buffer);
    let normalized = decoded.split_whitespace().collect::<Vec<_>>().join(" ");
    if !normalized.is_empty() {
        paragraphs.push(normalized);
    }
    buffer.clear();
}

fn html_to_text(raw: &str) -> String {
    let mut paragraphs = Vec::new();
    let mut buffer = String::new();
    let mut skip_tag: Option<(String, usize)> = None;
    let bytes = raw.as_bytes();
    let mut pos = 0;

    while pos < raw.len() {
        let Some(open) = raw[pos..].find('<').map(|o| pos + o) else {
            if skip_tag.is_none() {
                buffer.push_str(&raw[pos..]);
            }
            break;
        };
        if skip_tag.is_none() {
            buffer.push_str(&raw[pos..open]);
        }
        // comments and doctype
        if raw[open..].starts_with("<!--") {
            pos = raw[open..].find("-->").map(|e| open + e + 3).unwrap_or(raw.len());
            continue;
        }
        if raw[open..].starts_with("<!") {
            pos = raw[open..].find('>').map(|e| open + e + 1).unwrap_or(raw.len());
            continue;
        }
        let Some(close) = raw[open..].find('>').map(|e| open + e) else {
            break;
        };
        let inner = &raw[open + 1..close];
        let closing = inner.starts_with('/');
        let name: String = inner
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();

        match &mut skip_tag {
            Some((skip_name, depth)) => {
                if name == *skip_name {
                    if closing {
                        *depth -= 1;
                        if *depth == 0 {
                            skip_tag = None;
                        }
                    } else if !inner.ends_with('/') {
                        *depth += 1;
                    }
                }
            }
            None => {
                if !closing && SKIP_TAGS.contains(&name.as_str()) && !inner.ends_with('/') {
                    push_paragraph(&mut paragraphs, &mut buffer);
                    skip_tag = Some((name.clone(), 1));
                } else if BLOCK_TAGS.contains(&name.as_str()) {
                    push_paragraph(&mut paragraphs, &mut buffer);
                } else {
                    // inline tag boundary still separates words
                    if bytes.get(open.wrapping_sub(1)).is_some_and(|b| !b.is_ascii_whitespace()) {
                        buffer.push(' ');
                    }
                }
            }
        }
        pos = close + 1;
    }
    push_paragraph(&mut paragraphs, &mut buffer);
    paragraphs.join("\n")
}

fn normalize_plain(raw: &str) -> String {
    let mut paragraphs = Vec::new();
    let mut current = String::new();
    for line in raw.lines() {
        if line.trim().is_empty() {
            push_paragraph(&mut paragraphs, &mut current);
        } else {
            current.push_str(line);
            current.push(' ');
        }
    }
    push_paragraph(&mut paragraphs, &mut current);
    paragraphs.join("\n")
}

/// Strips markup and boilerplate containers from a page, collapsing runs
/// of whitespace to single spaces and preserving paragraph breaks as
/// newlines. Plain text passes through with the same whitespace
/// normalization.
pub fn extract_text(raw: &str) -> Result<String, ExtractError> {
    if raw.trim().is_empty() || raw.contains('\0') {
        return Err(ExtractError::UnparseableContent);
    }
    if looks_like_html(raw) {
        Ok(html_to_text(raw))
    } else {
        Ok(normalize_plain(raw))
    }
}

// ---------------------------------------------------------------------------
// Fetching with cache
// ---------------------------------------------------------------------------

/// Fetch-stage knobs; see the module constants for the text thresholds.
#[derive(Debug, Clone)]
pub struct FetchLimits {
    pub timeout: Duration,
    pub min_text_chars: usize,
    pub max_text_chars: usize,
    pub parallelism: usize,
    pub retry: RetryPolicy,
}

impl Default for FetchLimits {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
            min_text_chars: DEFAULT_MIN_TEXT_CHARS,
            max_text_chars: DEFAULT_MAX_TEXT_CHARS,
            parallelism: 4,
            retry: RetryPolicy::default(),
        }
    }
}

/// Loads one URL and extracts its article text. Failures after retries
/// become failed records, never errors; the period and source stamp the
/// produced article.
pub fn fetch_url(
    url: &str,
    loader: &dyn PageLoader,
    limits: &FetchLimits,
    period: u32,
    source: &str,
) -> Result<FetchRecord, ExtractError> {
    if url::Url::parse(url).is_err() {
        return Ok(FetchRecord::failed(url, "invalid_url".to_string()));
    }
    let page = match limits
        .retry
        .run(|| loader.load(url, limits.timeout), LoadError::is_retryable)
    {
        Ok(page) => page,
        Err(LoadError::MissingFixture(digest)) => {
            return Err(ExtractError::MissingFixture(digest));
        }
        Err(e) => return Ok(FetchRecord::failed(url, e.reason())),
    };
    let text = match extract_text(&page.body) {
        Ok(t) => t,
        Err(_) => return Ok(FetchRecord::failed(url, "empty_content".to_string())),
    };
    if text.chars().count() < limits.min_text_chars {
        return Ok(FetchRecord::failed(url, "empty_content".to_string()));
    }
    let text: String = text.chars().take(limits.max_text_chars).collect();
    let content_hash = sha256_hex(text.as_bytes());
    Ok(FetchRecord::ok(Article {
        url: url.to_string(),
        source: source.to_string(),
        period,
        text,
        fetched_at: page.fetched_at,
        content_hash,
    }))
}

/// Disk cache of fetch records, one canonical-JSON file per URL digest.
pub struct FetchCache {
    dir: PathBuf,
}

impl FetchCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, ExtractError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| ExtractError::CacheIoError(e.to_string()))?;
        Ok(Self { dir })
    }

    fn path(&self, url: &str) -> PathBuf {
        self.dir.join(format!("{}.json", sha256_hex(url.as_bytes())))
    }

    /// Reads the cached record for a URL. A present-but-corrupt entry
    /// (unreadable JSON, or a record whose URL does not hash to the file
    /// name) is an error, not a miss.
    pub fn get(&self, url: &str) -> Result<Option<FetchRecord>, ExtractError> {
        let path = self.path(url);
        let body = match std::fs::read_to_string(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(ExtractError::CacheIoError(e.to_string())),
        };
        let record: FetchRecord = serde_json::from_str(&body).map_err(|e| {
            ExtractError::CacheIoError(format!("corrupt cache entry {}: {e}", path.display()))
        })?;
        if record.url != url {
            return Err(ExtractError::CacheIoError(format!(
                "cache entry {} holds record for different url {}",
                path.display(),
                record.url
            )));
        }
        Ok(Some(record))
    }

    pub fn put(&self, record: &FetchRecord) -> Result<(), ExtractError> {
        let path = self.path(&record.url);
        let tmp = path.with_extension("json.tmp");
        let body = serde_json::to_string_pretty(record)
            .map_err(|e| ExtractError::CacheIoError(e.to_string()))?;
        std::fs::write(&tmp, body).map_err(|e| ExtractError::CacheIoError(e.to_string()))?;
        std::fs::rename(&tmp, &path).map_err(|e| ExtractError::CacheIoError(e.to_string()))?;
        Ok(())
    }
}

/// Fetches every URL of a group, serving from the cache where possible.
/// The output has exactly one record per input URL, in input order; a
/// cached record is re-stamped with this group's period and source.
pub fn fetch_group(
    group: &UrlGroup,
    cache: &FetchCache,
    loader: &dyn PageLoader,
    limits: &FetchLimits,
) -> Result<Vec<FetchRecord>, ExtractError> {
    let results = parallel_map(&group.urls, limits.parallelism, |url| {
        match cache.get(url) {
            Err(e) => Err(e),
            Ok(Some(record)) => Ok(record),
            Ok(None) => {
                let record = fetch_url(url, loader, limits, group.period, &group.source)?;
                cache.put(&record)?;
                Ok(record)
            }
        }
    });
    results
        .into_iter()
        .map(|r| {
            r.map(|mut record| {
                if let Some(article) = record.article.as_mut() {
                    article.period = group.period;
                    article.source = group.source.clone();
                }
                record
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    #[test]
    fn strips_tags_and_script_content() {
        assert_eq!(extract_text("<p>Hello</p><script>x()</script>").unwrap(), "Hello");
    }

    #[test]
    fn plain_text_passes_through_normalized() {
        let text = "First   line\nstill first paragraph\n\nSecond  paragraph";
        assert_eq!(
            extract_text(text).unwrap(),
            "First line still first paragraph\nSecond paragraph"
        );
    }

    #[test]
    fn nested_markup_yields_newline_separated_paragraphs() {
        let html = "<html><head><title>t</title></head><body>\
            <div><p>First <b>one</b></p><p>Second</p></div><p>Third</p></body></html>";
        assert_eq!(extract_text(html).unwrap(), "First one\nSecond\nThird");
    }

    #[test]
    fn entities_are_decoded() {
        assert_eq!(
            extract_text("<p>Harris &amp; Trump &#8212; debate&nbsp;night</p>").unwrap(),
            "Harris & Trump \u{2014} debate night"
        );
    }

    #[test]
    fn navigation_and_style_are_dropped() {
        let html = "<nav><a href=x>Home</a></nav><style>p{}</style>\
            <article><p>Body text</p></article><footer>contact</footer>";
        assert_eq!(extract_text(html).unwrap(), "Body text");
    }

    #[test]
    fn unparseable_input_is_rejected() {
        assert!(matches!(extract_text("   "), Err(ExtractError::UnparseableContent)));
        assert!(matches!(extract_text("a\0b"), Err(ExtractError::UnparseableContent)));
    }

    struct MapLoader {
        pages: HashMap<String, Result<String, u16>>,
        calls: AtomicU32,
    }

    impl MapLoader {
        fn new(pages: Vec<(&str, Result<&str, u16>)>) -> Self {
            Self {
                pages: pages
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v.map(str::to_string)))
                    .collect(),
                calls: AtomicU32::new(0),
            }
        }
    }

    impl PageLoader for MapLoader {
        fn load(&self, url: &str, _timeout: Duration) -> Result<LoadedPage, LoadError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            match self.pages.get(url) {
                Some(Ok(body)) => Ok(LoadedPage {
                    body: body.clone(),
                    fetched_at: FixtureLoader::fixed_timestamp(),
                }),
                Some(Err(code)) => Err(LoadError::Http(*code)),
                None => Err(LoadError::MissingFixture(sha256_hex(url.as_bytes()))),
            }
        }
    }

    fn long_page(marker: &str) -> String {
        format!("<p>{marker} {}</p>", "campaign coverage word ".repeat(20))
    }

    fn limits() -> FetchLimits {
        FetchLimits {
            retry: RetryPolicy::immediate(3),
            ..FetchLimits::default()
        }
    }

    #[test]
    fn fetch_url_maps_http_errors() {
        let loader = MapLoader::new(vec![("https://a.test/x", Err(404))]);
        let record = fetch_url("https://a.test/x", &loader, &limits(), 0, "s").unwrap();
        assert_eq!(record.status, FetchStatus::Failed);
        assert_eq!(record.failure_reason.as_deref(), Some("http_error(404)"));
        assert!(record.article.is_none());
    }

    #[test]
    fn fetch_url_rejects_short_pages() {
        let loader = MapLoader::new(vec![("https://a.test/x", Ok("<p>too short</p>"))]);
        let record = fetch_url("https://a.test/x", &loader, &limits(), 0, "s").unwrap();
        assert_eq!(record.failure_reason.as_deref(), Some("empty_content"));
    }

    #[test]
    fn fetch_url_success_carries_scope_and_hash() {
        let page = long_page("first");
        let loader = MapLoader::new(vec![("https://a.test/x", Ok(page.as_str()))]);
        let record = fetch_url("https://a.test/x", &loader, &limits(), 2, "CNN").unwrap();
        assert_eq!(record.status, FetchStatus::Ok);
        let article = record.article.unwrap();
        assert_eq!(article.period, 2);
        assert_eq!(article.source, "CNN");
        assert_eq!(article.content_hash, sha256_hex(article.text.as_bytes()));
    }

    #[test]
    fn fetch_url_truncates_to_budget() {
        let page = long_page("x");
        let loader = MapLoader::new(vec![("https://a.test/x", Ok(page.as_str()))]);
        let mut l = limits();
        l.max_text_chars = 250;
        let record = fetch_url("https://a.test/x", &loader, &l, 0, "s").unwrap();
        assert_eq!(record.article.unwrap().text.chars().count(), 250);
    }

    fn group(urls: &[&str]) -> UrlGroup {
        UrlGroup {
            period: 1,
            source: "CNN".into(),
            urls: urls.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn fetch_group_tolerates_partial_failure() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FetchCache::new(dir.path().join("cache")).unwrap();
        let p1 = long_page("one");
        let p2 = long_page("two");
        let loader = MapLoader::new(vec![
            ("https://a.test/1", Ok(p1.as_str())),
            ("https://a.test/2", Err(404)),
            ("https://a.test/3", Ok(p2.as_str())),
        ]);
        let records = fetch_group(
            &group(&["https://a.test/1", "https://a.test/2", "https://a.test/3"]),
            &cache,
            &loader,
            &limits(),
        )
        .unwrap();
        assert_eq!(records.len(), 3);
        let ok = records.iter().filter(|r| r.status == FetchStatus::Ok).count();
        assert_eq!(ok, 2);
    }

    #[test]
    fn second_fetch_is_served_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FetchCache::new(dir.path().join("cache")).unwrap();
        let p1 = long_page("one");
        let loader = MapLoader::new(vec![("https://a.test/1", Ok(p1.as_str()))]);
        let g = group(&["https://a.test/1"]);
        let first = fetch_group(&g, &cache, &loader, &limits()).unwrap();
        assert_eq!(loader.calls.load(Ordering::SeqCst), 1);
        let second = fetch_group(&g, &cache, &loader, &limits()).unwrap();
        assert_eq!(loader.calls.load(Ordering::SeqCst), 1, "cache hit must not hit loader");
        assert_eq!(first, second);
    }

    #[test]
    fn cached_record_is_restamped_for_new_group() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FetchCache::new(dir.path().join("cache")).unwrap();
        let p1 = long_page("one");
        let loader = MapLoader::new(vec![("https://a.test/1", Ok(p1.as_str()))]);
        fetch_group(&group(&["https://a.test/1"]), &cache, &loader, &limits()).unwrap();
        let other = UrlGroup {
            period: 0,
            source: "Reuters".into(),
            urls: vec!["https://a.test/1".into()],
        };
        let records = fetch_group(&other, &cache, &loader, &limits()).unwrap();
        let article = records[0].article.as_ref().unwrap();
        assert_eq!(article.period, 0);
        assert_eq!(article.source, "Reuters");
    }

    #[test]
    fn poisoned_cache_entry_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FetchCache::new(dir.path().join("cache")).unwrap();
        let record = FetchRecord::failed("https://other.test/page", "timeout".into());
        // write the record under the digest of a different url
        let path = dir
            .path()
            .join("cache")
            .join(format!("{}.json", sha256_hex("https://a.test/1".as_bytes())));
        std::fs::write(&path, serde_json::to_string(&record).unwrap()).unwrap();
        let err = cache.get("https://a.test/1").unwrap_err();
        assert!(matches!(err, ExtractError::CacheIoError(_)));

        std::fs::write(&path, "{not json").unwrap();
        assert!(matches!(
            cache.get("https://a.test/1").unwrap_err(),
            ExtractError::CacheIoError(_)
        ));
    }

    #[test]
    fn missing_page_fixture_is_an_error_not_a_failed_record() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FetchCache::new(dir.path().join("cache")).unwrap();
        let loader = FixtureLoader::new(dir.path().join("pages"));
        let err = fetch_group(&group(&["https://a.test/1"]), &cache, &loader, &limits())
            .unwrap_err();
        assert!(matches!(err, ExtractError::MissingFixture(_)));
    }

    #[test]
    fn cache_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FetchCache::new(dir.path().join("cache")).unwrap();
        let p1 = long_page("alpha");
        let loader = MapLoader::new(vec![("https://a.test/1", Ok(p1.as_str()))]);
        let g = group(&["https://a.test/1"]);
        fetch_group(&g, &cache, &loader, &limits()).unwrap();
        let path = dir
            .path()
            .join("cache")
            .join(format!("{}.json", sha256_hex("https://a.test/1".as_bytes())));
        let bytes1 = std::fs::read(&path).unwrap();
        fetch_group(&g, &cache, &loader, &limits()).unwrap();
        let bytes2 = std::fs::read(&path).unwrap();
        assert_eq!(bytes1, bytes2);
    }
}
