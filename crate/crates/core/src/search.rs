//! Date- and source-restricted search: request planning, a pluggable
//! search backend (live HTTP or recorded fixtures), and grouping of
//! result URLs by (period, source).

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{SourceLabel, TimePeriod};
use crate::util::{sha256_hex, RetryPolicy};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("periods and sources must be non-empty")]
    EmptyConfig,
    #[error("search backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("search quota exceeded")]
    QuotaExceeded,
    #[error("malformed search response: {0}")]
    MalformedResponse(String),
    #[error("missing search fixture: {0}")]
    MissingFixture(String),
}

impl SearchError {
    /// Only backend-unavailable failures are worth retrying; quota and
    /// malformed responses are terminal for the cell.
    pub fn is_retryable(&self) -> bool {
        matches!(self, SearchError::BackendUnavailable(_))
    }
}

/// One planned search: the query restricted to a period and source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchRequest {
    pub query: String,
    pub period: TimePeriod,
    pub source: SourceLabel,
    pub max_results: usize,
}

impl SearchRequest {
    /// Canonical digest of the request, used as the fixture key.
    pub fn digest(&self) -> String {
        let canonical = format!(
            "search\0{}\0{}\0{}\0{}\0{}\0{}",
            self.query,
            self.period.start_date,
            self.period.end_date,
            self.source.name,
            self.source.site_filter,
            self.max_results
        );
        sha256_hex(canonical.as_bytes())
    }

    /// The query text sent to the backend: a `site:` qualifier is
    /// appended when the source restricts to a domain.
    pub fn effective_query(&self) -> String {
        if self.source.site_filter.is_empty() {
            self.query.clone()
        } else {
            format!("{} site:{}", self.query, self.source.site_filter)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub url: String,
    pub title: String,
    pub snippet: String,
    pub rank: usize,
}

/// URLs for one (period, source) cell, deduplicated and ordered by best
/// rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrlGroup {
    pub period: u32,
    pub source: String,
    pub urls: Vec<String>,
}

/// Builds the full `|periods| x |sources|` cross product of requests in
/// (period, source) order.
pub fn build_requests(
    query: &str,
    periods: &[TimePeriod],
    sources: &[SourceLabel],
    max_results: usize,
) -> Result<Vec<SearchRequest>, SearchError> {
    if query.is_empty() || periods.is_empty() || sources.is_empty() || max_results == 0 {
        return Err(SearchError::EmptyConfig);
    }
    let mut requests = Vec::with_capacity(periods.len() * sources.len());
    for period in periods {
        for source in sources {
            requests.push(SearchRequest {
                query: query.to_string(),
                period: period.clone(),
                source: source.clone(),
                max_results,
            });
        }
    }
    Ok(requests)
}

/// A search backend; implementations must be shareable across the
/// configured search parallelism.
pub trait SearchBackend: Send + Sync {
    fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, SearchError>;
}

/// Executes one request with retry on transient failures, truncates to
/// `max_results`, and normalizes ranks to 1..n.
pub fn execute_search(
    request: &SearchRequest,
    backend: &dyn SearchBackend,
    retry: &RetryPolicy,
) -> Result<Vec<SearchHit>, SearchError> {
    let mut hits = retry.run(|| backend.search(request), SearchError::is_retryable)?;
    hits.truncate(request.max_results);
    for (i, hit) in hits.iter_mut().enumerate() {
        hit.rank = i + 1;
    }
    Ok(hits)
}

/// Groups hits by (period, source). Within a group URLs are
/// deduplicated keeping the best (lowest) rank; a URL seen under two
/// sources stays in both groups. Output is deterministic regardless of
/// input order: groups sorted by (period, source), URLs by
/// (best rank, url).
pub fn group_urls(hits_by_request: &[(SearchRequest, Vec<SearchHit>)]) -> Vec<UrlGroup> {
    let mut cells: BTreeMap<(u32, String), BTreeMap<String, usize>> = BTreeMap::new();
    for (request, hits) in hits_by_request {
        let key = (request.period.index, request.source.name.clone());
        let cell = cells.entry(key).or_default();
        for hit in hits {
            let best = cell.entry(hit.url.clone()).or_insert(hit.rank);
            if hit.rank < *best {
                *best = hit.rank;
            }
        }
    }
    cells
        .into_iter()
        .filter(|(_, urls)| !urls.is_empty())
        .map(|((period, source), urls)| {
            let mut ranked: Vec<(usize, String)> =
                urls.into_iter().map(|(url, rank)| (rank, url)).collect();
            ranked.sort();
            UrlGroup {
                period,
                source,
                urls: ranked.into_iter().map(|(_, url)| url).collect(),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Fixture backend
// ---------------------------------------------------------------------------

/// Replays canned responses from one JSON file per request digest.
pub struct FixtureSearchBackend {
    dir: PathBuf,
}

impl FixtureSearchBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn fixture_path(&self, request: &SearchRequest) -> PathBuf {
        self.dir.join(format!("{}.json", request.digest()))
    }
}

impl SearchBackend for FixtureSearchBackend {
    fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, SearchError> {
        let path = self.fixture_path(request);
        let body = std::fs::read_to_string(&path)
            .map_err(|_| SearchError::MissingFixture(request.digest()))?;
        serde_json::from_str(&body).map_err(|e| SearchError::MalformedResponse(e.to_string()))
    }
}

/// Delegates to a live backend and records every response as a fixture,
/// so any live run is replayable.
pub struct RecordingSearchBackend<B> {
    inner: B,
    dir: PathBuf,
}

impl<B: SearchBackend> RecordingSearchBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> Self {
        Self { inner, dir: dir.into() }
    }
}

impl<B: SearchBackend> SearchBackend for RecordingSearchBackend<B> {
    fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, SearchError> {
        let hits = self.inner.search(request)?;
        let path = self.dir.join(format!("{}.json", request.digest()));
        if let Some(parent) = path.parent() {
            let _ = std::fs::create_dir_all(parent);
        }
        let body = serde_json::to_string_pretty(&hits)
            .map_err(|e| SearchError::MalformedResponse(e.to_string()))?;
        std::fs::write(&path, body).map_err(|e| SearchError::BackendUnavailable(e.to_string()))?;
        Ok(hits)
    }
}

// ---------------------------------------------------------------------------
// Live HTTP backend (programmable-search REST endpoint)
// ---------------------------------------------------------------------------

/// Configuration for the live backend, usually sourced from environment
/// variables.
#[derive(Debug, Clone)]
pub struct HttpSearchConfig {
    pub endpoint: String,
    pub api_key: String,
    pub engine_id: String,
}

/// Client for a programmable-search JSON endpoint. Date restriction uses
/// the backend's native `sort=date:r:YYYYMMDD:YYYYMMDD` range parameter
/// rather than query text.
pub struct HttpSearchBackend {
    config: HttpSearchConfig,
    client: reqwest::blocking::Client,
}

impl HttpSearchBackend {
    pub fn new(config: HttpSearchConfig) -> Result<Self, SearchError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(30))
            .build()
            .map_err(|e| SearchError::BackendUnavailable(e.to_string()))?;
        Ok(Self { config, client })
    }

    /// Query parameters for one request; exposed for testing.
    pub fn query_params(config: &HttpSearchConfig, request: &SearchRequest) -> Vec<(String, String)> {
        let date_range = format!(
            "date:r:{}:{}",
            request.period.start_date.format("%Y%m%d"),
            request.period.end_date.format("%Y%m%d")
        );
        vec![
            ("key".to_string(), config.api_key.clone()),
            ("cx".to_string(), config.engine_id.clone()),
            ("q".to_string(), request.effective_query()),
            ("num".to_string(), request.max_results.to_string()),
            ("sort".to_string(), date_range),
        ]
    }
}

#[derive(Debug, Deserialize)]
struct SearchResponseItem {
    link: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    snippet: String,
}

#[derive(Debug, Deserialize)]
struct SearchResponse {
    #[serde(default)]
    items: Vec<SearchResponseItem>,
}

impl SearchBackend for HttpSearchBackend {
    fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, SearchError> {
        let params = Self::query_params(&self.config, request);
        let response = self
            .client
            .get(&self.config.endpoint)
            .query(&params)
            .send()
            .map_err(|e| SearchError::BackendUnavailable(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 || status.as_u16() == 403 {
            return Err(SearchError::QuotaExceeded);
        }
        if status.is_server_error() {
            return Err(SearchError::BackendUnavailable(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(SearchError::MalformedResponse(format!("status {status}")));
        }
        let parsed: SearchResponse = response
            .json()
            .map_err(|e| SearchError::MalformedResponse(e.to_string()))?;
        Ok(parsed
            .items
            .into_iter()
            .enumerate()
            .map(|(i, item)| SearchHit {
                url: item.link,
                title: item.title,
                snippet: item.snippet,
                rank: i + 1,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn period(index: u32) -> TimePeriod {
        let month = 8 + index / 2;
        let day = if index % 2 == 0 { 1 } else { 16 };
        let end_day = if index % 2 == 0 { 15 } else { 28 };
        TimePeriod {
            index,
            start_date: format!("2024-{month:02}-{day:02}").parse().unwrap(),
            end_date: format!("2024-{month:02}-{end_day:02}").parse().unwrap(),
        }
    }

    fn periods(n: u32) -> Vec<TimePeriod> {
        (0..n).map(period).collect()
    }

    fn hit(url: &str, rank: usize) -> SearchHit {
        SearchHit {
            url: url.to_string(),
            title: format!("title {rank}"),
            snippet: String::new(),
            rank,
        }
    }

    #[test]
    fn request_plan_is_the_cross_product() {
        let sources: Vec<SourceLabel> = (0..9)
            .map(|i| SourceLabel::unrestricted(&format!("source {i}")))
            .collect();
        let reqs = build_requests("Kamala Harris AND Donald Trump", &periods(5), &sources, 10).unwrap();
        assert_eq!(reqs.len(), 45);

        let one = build_requests("q", &periods(1), &sources[..1], 10).unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn request_plan_order_is_period_then_source() {
        let sources = vec![
            SourceLabel::unrestricted("s0"),
            SourceLabel::unrestricted("s1"),
        ];
        let reqs = build_requests("q", &periods(3), &sources, 5).unwrap();
        let order: Vec<(u32, String)> = reqs
            .iter()
            .map(|r| (r.period.index, r.source.name.clone()))
            .collect();
        assert_eq!(
            order,
            vec![
                (0, "s0".into()),
                (0, "s1".into()),
                (1, "s0".into()),
                (1, "s1".into()),
                (2, "s0".into()),
                (2, "s1".into()),
            ]
        );
    }

    #[test]
    fn empty_config_is_rejected() {
        assert!(matches!(
            build_requests("q", &[], &[SourceLabel::unrestricted("s")], 10),
            Err(SearchError::EmptyConfig)
        ));
        assert!(matches!(
            build_requests("q", &periods(1), &[], 10),
            Err(SearchError::EmptyConfig)
        ));
    }

    struct CannedBackend(Vec<SearchHit>);

    impl SearchBackend for CannedBackend {
        fn search(&self, _request: &SearchRequest) -> Result<Vec<SearchHit>, SearchError> {
            Ok(self.0.clone())
        }
    }

    fn request(max_results: usize) -> SearchRequest {
        SearchRequest {
            query: "q".into(),
            period: period(0),
            source: SourceLabel::unrestricted("s"),
            max_results,
        }
    }

    #[test]
    fn execute_passes_fixture_hits_through() {
        let backend = CannedBackend(vec![hit("a", 1), hit("b", 2), hit("c", 3)]);
        let hits = execute_search(&request(10), &backend, &RetryPolicy::immediate(1)).unwrap();
        assert_eq!(hits.len(), 3);
        assert_eq!(hits.iter().map(|h| h.rank).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn execute_truncates_to_max_results() {
        let backend = CannedBackend((1..=5).map(|i| hit(&format!("u{i}"), i)).collect());
        let hits = execute_search(&request(2), &backend, &RetryPolicy::immediate(1)).unwrap();
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].url, "u1");
        assert_eq!(hits[1].url, "u2");
    }

    struct FlakyBackend {
        calls: AtomicU32,
        fail_times: u32,
    }

    impl SearchBackend for FlakyBackend {
        fn search(&self, _request: &SearchRequest) -> Result<Vec<SearchHit>, SearchError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_times {
                Err(SearchError::BackendUnavailable("connection reset".into()))
            } else {
                Ok(vec![hit("a", 1)])
            }
        }
    }

    #[test]
    fn transient_failures_are_retried() {
        let backend = FlakyBackend {
            calls: AtomicU32::new(0),
            fail_times: 2,
        };
        let hits = execute_search(&request(10), &backend, &RetryPolicy::immediate(3)).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn quota_errors_are_terminal() {
        struct QuotaBackend(AtomicU32);
        impl SearchBackend for QuotaBackend {
            fn search(&self, _request: &SearchRequest) -> Result<Vec<SearchHit>, SearchError> {
                self.0.fetch_add(1, Ordering::SeqCst);
                Err(SearchError::QuotaExceeded)
            }
        }
        let backend = QuotaBackend(AtomicU32::new(0));
        let err = execute_search(&request(10), &backend, &RetryPolicy::immediate(3)).unwrap_err();
        assert!(matches!(err, SearchError::QuotaExceeded));
        assert_eq!(backend.0.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn grouping_unions_urls_keeping_best_rank() {
        let r = request(10);
        let input = vec![
            (r.clone(), vec![hit("a", 1), hit("b", 2)]),
            (r, vec![hit("b", 1), hit("c", 2)]),
        ];
        let groups = group_urls(&input);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].urls, vec!["a", "b", "c"]);
    }

    #[test]
    fn empty_hits_produce_no_groups() {
        assert!(group_urls(&[]).is_empty());
        let input = vec![(request(10), vec![])];
        assert!(group_urls(&input).is_empty());
    }

    #[test]
    fn date_range_and_site_filter_are_encoded() {
        let config = HttpSearchConfig {
            endpoint: "https://search.test/v1".into(),
            api_key: "k".into(),
            engine_id: "cx".into(),
        };
        let mut req = request(10);
        req.source = SourceLabel::with_filter("CNN", "cnn.com");
        let params = HttpSearchBackend::query_params(&config, &req);
        let get = |name: &str| {
            params
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| v.clone())
                .unwrap()
        };
        assert_eq!(get("q"), "q site:cnn.com");
        assert_eq!(get("sort"), "date:r:20240801:20240815");
        assert_eq!(get("num"), "10");

        req.source = SourceLabel::unrestricted("Web sites");
        let params = HttpSearchBackend::query_params(&config, &req);
        let q = params.iter().find(|(k, _)| k == "q").unwrap().1.clone();
        assert_eq!(q, "q");
    }

    #[test]
    fn fixture_backend_round_trips_and_reports_missing() {
        let dir = tempfile::tempdir().unwrap();
        let backend = FixtureSearchBackend::new(dir.path());
        let req = request(10);
        let err = backend.search(&req).unwrap_err();
        assert!(matches!(err, SearchError::MissingFixture(d) if d == req.digest()));

        let recording =
            RecordingSearchBackend::new(CannedBackend(vec![hit("a", 1)]), dir.path());
        recording.search(&req).unwrap();
        let hits = backend.search(&req).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].url, "a");
    }

    proptest! {
        // same multiset of (request, hits) pairs in any order -> same groups
        #[test]
        fn grouping_is_order_independent(
            cells in prop::collection::vec(
                (0u32..3, 0usize..3, prop::collection::vec((0usize..6, 1usize..10), 0..5)),
                0..12
            ),
            shuffle_seed in 0u64..1000,
        ) {
            let sources = ["alpha", "beta", "gamma"];
            let build = |cells: &[(u32, usize, Vec<(usize, usize)>)]| {
                cells.iter().map(|(p, s, hits)| {
                    let req = SearchRequest {
                        query: "q".into(),
                        period: period(*p),
                        source: SourceLabel::unrestricted(sources[*s]),
                        max_results: 10,
                    };
                    let hits = hits.iter().map(|(u, r)| hit(&format!("url{u}"), *r)).collect();
                    (req, hits)
                }).collect::<Vec<_>>()
            };
            let forward = group_urls(&build(&cells));
            let mut reordered = cells.clone();
            // deterministic shuffle by rotating
            let k = (shuffle_seed as usize) % cells.len().max(1);
            reordered.rotate_left(k);
            let rotated = group_urls(&build(&reordered));
            prop_assert_eq!(forward.clone(), rotated);

            // no duplicate urls within a group; total bounded by input
            let total_in: usize = cells.iter().map(|(_, _, h)| h.len()).sum();
            let total_out: usize = forward.iter().map(|g| g.urls.len()).sum();
            prop_assert!(total_out <= total_in);
            for g in &forward {
                let mut seen = std::collections::HashSet::new();
                for u in &g.urls {
                    prop_assert!(seen.insert(u.clone()));
                }
            }
        }
    }
}
