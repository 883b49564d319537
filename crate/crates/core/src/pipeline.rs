//! Stage orchestration: search -> fetch -> analyze -> aggregate ->
//! stats -> fit -> report, with a per-config run directory, resumability,
//! and the fixture/live backend switch.
//!
//! Every stage writes its outputs under `<out>/runs/<config-digest>/` and
//! records an output digest in `state.json`; with `--resume`, completed
//! stages are skipped and their outputs loaded from disk, so a finished
//! stage is never recomputed. A failed article fetch or analysis excludes
//! that article and is listed in the report manifest; it never aborts the
//! run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{
    CampaignConfig, ConfigError, RunMode, LLM_API_KEY_ENV, SEARCH_API_KEY_ENV,
    SEARCH_ENGINE_ID_ENV,
};
use crate::extract::{
    fetch_group, ExtractError, FetchCache, FetchLimits, FetchRecord, FetchStatus, FixtureLoader,
    HttpLoader, PageLoader,
};
use crate::llm::{
    analyze_article, analyze_group, ChatClient, FixtureChatClient, HttpChatClient,
    HttpChatConfig, Level2Docs, Level2Mode, LlmError, PromptTemplate, RecordingChatClient,
};
use crate::model::{AggregateAnalysis, AnalyzedArticle, GroupKey, ScoreKind};
use crate::report::{
    emit_report, render_boxplots, render_trend_plot, render_value_boxplots, Plot, ReportBundle,
    ReportError, RunMeta,
};
use crate::search::{
    build_requests, execute_search, FixtureSearchBackend, HttpSearchBackend, HttpSearchConfig,
    RecordingSearchBackend, SearchBackend, SearchError, SearchHit, SearchRequest, UrlGroup,
};
use crate::stats::{
    boxplot_summaries, collect_scores, group_means, pooled_means, source_mean_lines,
    write_scores_csv, BoxplotSummary, GroupAxis, GroupMean, ScoreTable,
};
use crate::trend::{fit_trend, write_draws_csv, SourceScope, TrendData, TrendFitSummary};
use crate::util::{parallel_map, sha256_hex, RetryPolicy};

pub const STAGES: [&str; 7] = [
    "search", "fetch", "analyze", "aggregate", "stats", "fit", "report",
];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage {stage} failed: {message}")]
    StageFailed { stage: &'static str, message: String },
    #[error("missing fixture in stage {stage}: {digest}")]
    MissingFixture { stage: &'static str, digest: String },
}

impl PipelineError {
    /// CLI exit code: 2 config, 3 stage failure, 4 missing fixture.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::StageFailed { .. } => 3,
            PipelineError::MissingFixture { .. } => 4,
        }
    }
}

fn stage_err(stage: &'static str, message: impl std::fmt::Display) -> PipelineError {
    PipelineError::StageFailed {
        stage,
        message: message.to_string(),
    }
}

fn from_search(stage: &'static str, e: SearchError) -> PipelineError {
    match e {
        SearchError::MissingFixture(digest) => PipelineError::MissingFixture { stage, digest },
        other => stage_err(stage, other),
    }
}

fn from_extract(stage: &'static str, e: ExtractError) -> PipelineError {
    match e {
        ExtractError::MissingFixture(digest) => PipelineError::MissingFixture { stage, digest },
        other => stage_err(stage, other),
    }
}

fn from_llm(stage: &'static str, e: LlmError) -> PipelineError {
    match e {
        LlmError::MissingFixture(digest) => PipelineError::MissingFixture { stage, digest },
        other => stage_err(stage, other),
    }
}

/// The pluggable backends a run talks to. Built from config via
/// [`default_backends`]; tests inject counting or scripted stand-ins.
pub struct Backends {
    pub search: Box<dyn SearchBackend>,
    pub loader: Box<dyn PageLoader>,
    pub chat: Box<dyn ChatClient>,
}

fn require_env(var: &'static str) -> Result<String, PipelineError> {
    std::env::var(var).map_err(|_| {
        PipelineError::Config(ConfigError::Validation {
            field: var.to_string(),
            message: "environment variable required in live mode".to_string(),
        })
    })
}

/// Builds the mode-appropriate backends: fixture replay in fixtures mode;
/// in live mode, HTTP clients wrapped in recorders so the run is
/// replayable afterwards.
pub fn default_backends(config: &CampaignConfig) -> Result<Backends, PipelineError> {
    let fixtures = &config.paths.fixtures_dir;
    match config.mode {
        RunMode::Fixtures => Ok(Backends {
            search: Box::new(FixtureSearchBackend::new(fixtures.join("search"))),
            loader: Box::new(FixtureLoader::new(fixtures.join("pages"))),
            chat: Box::new(FixtureChatClient::new(fixtures.join("llm"))),
        }),
        RunMode::Live => {
            let search = HttpSearchBackend::new(HttpSearchConfig {
                endpoint: config.search.endpoint.clone(),
                api_key: require_env(SEARCH_API_KEY_ENV)?,
                engine_id: require_env(SEARCH_ENGINE_ID_ENV)?,
            })
            .map_err(|e| stage_err("search", e))?;
            let loader = HttpLoader::new(
                &config.limits.user_agent,
                Duration::from_millis(config.limits.politeness_delay_ms),
            )
            .map_err(|e| stage_err("fetch", e))?;
            let chat = HttpChatClient::new(HttpChatConfig {
                endpoint: config.llm.endpoint.clone(),
                api_key: require_env(LLM_API_KEY_ENV)?,
                model: config.llm.model.clone(),
                temperature: config.llm.temperature,
            })
            .map_err(|e| stage_err("analyze", e))?;
            Ok(Backends {
                search: Box::new(RecordingSearchBackend::new(search, fixtures.join("search"))),
                loader: Box::new(loader),
                chat: Box::new(RecordingChatClient::new(chat, fixtures.join("llm"))),
            })
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub resume: bool,
    /// Overrides the config's sampler seed.
    pub seed: Option<u64>,
    /// Stage names to run; `None` runs the full pipeline.
    pub stages: Option<Vec<String>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct RunState {
    stages: BTreeMap<String, String>,
}

impl RunState {
    fn load(path: &Path) -> Self {
        std::fs::read_to_string(path)
            .ok()
            .and_then(|body| serde_json::from_str(&body).ok())
            .unwrap_or_default()
    }

    fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).expect("state serializes"))
    }
}

/// Output of the stats stage, persisted as one JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct StatsOutput {
    table: ScoreTable,
    boxplots_by_period: Vec<BoxplotSummary>,
    boxplots_by_source: Vec<BoxplotSummary>,
    means_by_source: Vec<GroupMean>,
    pooled_means: Vec<GroupMean>,
}

struct Runner<'a> {
    config: &'a CampaignConfig,
    backends: &'a Backends,
    run_dir: PathBuf,
    state_path: PathBuf,
    state: RunState,
    resume: bool,
    selected: Option<Vec<String>>,
    seed: u64,
}

impl<'a> Runner<'a> {
    fn selected(&self, stage: &str) -> bool {
        self.selected
            .as_ref()
            .map_or(true, |list| list.iter().any(|s| s == stage))
    }

    /// A stage runs when selected and not already completed under
    /// `--resume` (completed = state entry plus intact output file).
    fn should_run(&self, stage: &str, output: &str) -> bool {
        if !self.selected(stage) {
            return false;
        }
        if self.resume
            && self.state.stages.contains_key(stage)
            && self.run_dir.join(output).exists()
        {
            log::info!("stage {stage}: up to date, skipping");
            return false;
        }
        true
    }

    fn save_json<T: Serialize>(
        &mut self,
        stage: &'static str,
        rel: &str,
        value: &T,
    ) -> Result<(), PipelineError> {
        let path = self.run_dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| stage_err(stage, e))?;
        }
        let body = serde_json::to_string_pretty(value).map_err(|e| stage_err(stage, e))?;
        std::fs::write(&path, &body).map_err(|e| stage_err(stage, e))?;
        self.state
            .stages
            .insert(stage.to_string(), sha256_hex(body.as_bytes()));
        self.state.save(&self.state_path).map_err(|e| stage_err(stage, e))?;
        Ok(())
    }

    fn load_json<T: for<'de> Deserialize<'de>>(
        &self,
        stage: &'static str,
        rel: &str,
        produced_by: &str,
    ) -> Result<T, PipelineError> {
        let path = self.run_dir.join(rel);
        let body = std::fs::read_to_string(&path).map_err(|_| {
            stage_err(
                stage,
                format!(
                    "missing input {rel}; run the {produced_by} stage first (or use `run`)"
                ),
            )
        })?;
        serde_json::from_str(&body).map_err(|e| stage_err(stage, e))
    }

    // ---- stages ------------------------------------------------------

    fn stage_search(&mut self) -> Result<(), PipelineError> {
        let requests = build_requests(
            &self.config.query,
            &self.config.periods,
            &self.config.sources,
            self.config.limits.max_results,
        )
        .map_err(|e| from_search("search", e))?;
        log::info!("stage search: {} requests", requests.len());

        let retry = match self.config.mode {
            RunMode::Fixtures => RetryPolicy::immediate(1),
            RunMode::Live => RetryPolicy::default(),
        };
        let results: Vec<Result<Vec<SearchHit>, SearchError>> = parallel_map(
            &requests,
            self.config.limits.search_parallelism,
            |request| execute_search(request, self.backends.search.as_ref(), &retry),
        );
        let mut hits_by_request: Vec<(SearchRequest, Vec<SearchHit>)> = Vec::new();
        for (request, result) in requests.into_iter().zip(results) {
            match result {
                Ok(hits) => hits_by_request.push((request, hits)),
                Err(SearchError::MissingFixture(digest)) => {
                    return Err(PipelineError::MissingFixture {
                        stage: "search",
                        digest,
                    })
                }
                Err(SearchError::QuotaExceeded) => {
                    return Err(stage_err("search", SearchError::QuotaExceeded))
                }
                Err(e) => {
                    // a failed (period, source) cell leaves a gap, not a
                    // failed run
                    log::warn!(
                        "search cell ({}, {}) failed after retries: {e}",
                        request.period.index,
                        request.source.name
                    );
                    hits_by_request.push((request, Vec::new()));
                }
            }
        }
        let groups = crate::search::group_urls(&hits_by_request);
        self.save_json("search", "search/url_groups.json", &groups)
    }

    fn stage_fetch(&mut self) -> Result<(), PipelineError> {
        let groups: Vec<UrlGroup> = self.load_json("fetch", "search/url_groups.json", "search")?;
        let cache = FetchCache::new(self.run_dir.join("fetch/cache"))
            .map_err(|e| from_extract("fetch", e))?;
        let limits = FetchLimits {
            timeout: Duration::from_secs(self.config.limits.fetch_timeout_secs),
            min_text_chars: self.config.limits.min_text_chars,
            max_text_chars: self.config.limits.max_text_chars,
            parallelism: self.config.limits.fetch_parallelism,
            retry: match self.config.mode {
                RunMode::Fixtures => RetryPolicy::immediate(1),
                RunMode::Live => RetryPolicy::default(),
            },
        };
        let mut records: Vec<FetchRecord> = Vec::new();
        for group in &groups {
            let group_records = fetch_group(group, &cache, self.backends.loader.as_ref(), &limits)
                .map_err(|e| from_extract("fetch", e))?;
            records.extend(group_records);
        }
        let ok = records.iter().filter(|r| r.status == FetchStatus::Ok).count();
        log::info!("stage fetch: {ok}/{} pages extracted", records.len());
        self.save_json("fetch", "fetch/records.json", &records)
    }

    fn stage_analyze(&mut self) -> Result<(), PipelineError> {
        let records: Vec<FetchRecord> = self.load_json("analyze", "fetch/records.json", "fetch")?;
        let template = PromptTemplate::load(&self.config.paths.templates_dir.join("level1.toml"))
            .map_err(|e| from_llm("analyze", e))?;
        let articles: Vec<_> = records
            .iter()
            .filter_map(|r| r.article.as_ref())
            .cloned()
            .collect();

        let results = parallel_map(&articles, self.config.limits.llm_parallelism, |article| {
            analyze_article(
                article,
                self.backends.chat.as_ref(),
                &template,
                &self.config.candidates,
                self.config.limits.llm_retries,
            )
        });

        let mut analyzed: Vec<AnalyzedArticle> = Vec::new();
        let mut exclusions: Vec<String> = records
            .iter()
            .filter(|r| r.status == FetchStatus::Failed)
            .map(|r| format!("{}: {}", r.url, r.failure_reason.clone().unwrap_or_default()))
            .collect();
        for (article, result) in articles.iter().zip(results) {
            match result {
                Ok(analysis) => analyzed.push(AnalyzedArticle {
                    url: article.url.clone(),
                    source: article.source.clone(),
                    period: article.period,
                    content_hash: article.content_hash.clone(),
                    analysis,
                }),
                Err(LlmError::MalformedAfterRetries { last_error, .. }) => {
                    log::warn!("analysis of {} excluded: {last_error}", article.url);
                    exclusions.push(format!("{}: invalid analysis ({last_error})", article.url));
                }
                Err(e) => return Err(from_llm("analyze", e)),
            }
        }
        log::info!(
            "stage analyze: {} analyses, {} exclusions",
            analyzed.len(),
            exclusions.len()
        );
        self.save_json("analyze", "analyze/exclusions.json", &exclusions)?;
        self.save_json("analyze", "analyze/analyses.json", &analyzed)
    }

    fn stage_aggregate(&mut self) -> Result<(), PipelineError> {
        let analyzed: Vec<AnalyzedArticle> =
            self.load_json("aggregate", "analyze/analyses.json", "analyze")?;
        if analyzed.is_empty() {
            return Err(stage_err("aggregate", "no analyses to aggregate"));
        }
        let dir = &self.config.paths.templates_dir;
        let period_template =
            PromptTemplate::load(&dir.join("level2_period.toml")).map_err(|e| from_llm("aggregate", e))?;
        let source_template =
            PromptTemplate::load(&dir.join("level2_source.toml")).map_err(|e| from_llm("aggregate", e))?;
        let trend_template =
            PromptTemplate::load(&dir.join("level2_trend.toml")).map_err(|e| from_llm("aggregate", e))?;
        let budget = self.config.limits.context_budget_chars;
        let retries = self.config.limits.llm_retries;

        let mut aggregates: Vec<AggregateAnalysis> = Vec::new();
        for period in &self.config.periods {
            let group: Vec<_> = analyzed
                .iter()
                .filter(|a| a.period == period.index)
                .map(|a| a.analysis.clone())
                .collect();
            if group.is_empty() {
                continue;
            }
            aggregates.push(
                analyze_group(
                    &Level2Docs::Analyses(&group),
                    GroupKey::Period(period.index),
                    &period.label(),
                    self.backends.chat.as_ref(),
                    &period_template,
                    Level2Mode::ByPeriod,
                    &self.config.candidates,
                    retries,
                    budget,
                )
                .map_err(|e| from_llm("aggregate", e))?,
            );
        }
        for source in &self.config.sources {
            let group: Vec<_> = analyzed
                .iter()
                .filter(|a| a.source == source.name)
                .map(|a| a.analysis.clone())
                .collect();
            if group.is_empty() {
                continue;
            }
            aggregates.push(
                analyze_group(
                    &Level2Docs::Analyses(&group),
                    GroupKey::Source(source.name.clone()),
                    &source.name,
                    self.backends.chat.as_ref(),
                    &source_template,
                    Level2Mode::BySource,
                    &self.config.candidates,
                    retries,
                    budget,
                )
                .map_err(|e| from_llm("aggregate", e))?,
            );
        }
        let period_aggs: Vec<AggregateAnalysis> = aggregates
            .iter()
            .filter(|a| matches!(a.group_key, GroupKey::Period(_)))
            .cloned()
            .collect();
        if !period_aggs.is_empty() {
            aggregates.push(
                analyze_group(
                    &Level2Docs::Aggregates(&period_aggs),
                    GroupKey::Campaign,
                    "full campaign",
                    self.backends.chat.as_ref(),
                    &trend_template,
                    Level2Mode::Trend,
                    &self.config.candidates,
                    retries,
                    budget,
                )
                .map_err(|e| from_llm("aggregate", e))?,
            );
        }
        log::info!("stage aggregate: {} aggregates", aggregates.len());
        self.save_json("aggregate", "aggregate/aggregates.json", &aggregates)
    }

    fn stage_stats(&mut self) -> Result<(), PipelineError> {
        let analyzed: Vec<AnalyzedArticle> =
            self.load_json("stats", "analyze/analyses.json", "analyze")?;
        let table = collect_scores(&analyzed, &self.config.scope());
        let output = StatsOutput {
            boxplots_by_period: boxplot_summaries(&table, GroupAxis::Period),
            boxplots_by_source: boxplot_summaries(&table, GroupAxis::Source),
            means_by_source: group_means(&table, ScoreKind::ProbabilityElected, GroupAxis::Source),
            pooled_means: pooled_means(&table, ScoreKind::ProbabilityElected),
            table,
        };
        let mut csv = Vec::new();
        write_scores_csv(&output.table, &mut csv).map_err(|e| stage_err("stats", e))?;
        let csv_path = self.run_dir.join("stats/scores.csv");
        std::fs::create_dir_all(csv_path.parent().expect("parent"))
            .map_err(|e| stage_err("stats", e))?;
        std::fs::write(&csv_path, &csv).map_err(|e| stage_err("stats", e))?;
        log::info!("stage stats: {} observations", output.table.observations.len());
        self.save_json("stats", "stats/stats.json", &output)
    }

    fn fit_seed(&self, data: &TrendData) -> u64 {
        let label = format!("{}\0{}\0{}", data.candidate, data.kind, data.scope);
        let digest = sha256_hex(label.as_bytes());
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&hex::decode(&digest[..16]).expect("hex digest")[..8]);
        self.seed ^ u64::from_le_bytes(bytes)
    }

    fn stage_fit(&mut self) -> Result<(), PipelineError> {
        let stats: StatsOutput = self.load_json("fit", "stats/stats.json", "stats")?;
        let draws_dir = self.run_dir.join("fit/draws");
        std::fs::create_dir_all(&draws_dir).map_err(|e| stage_err("fit", e))?;

        let mut scopes = vec![SourceScope::Pooled];
        scopes.extend(
            self.config
                .sources
                .iter()
                .map(|s| SourceScope::Source(s.name.clone())),
        );
        let mut summaries: Vec<TrendFitSummary> = Vec::new();
        for candidate in &self.config.candidates {
            for kind in ScoreKind::ALL {
                for scope in &scopes {
                    let data = TrendData::from_table(&stats.table, candidate, kind, scope.clone());
                    if data.validate().is_err() {
                        log::debug!(
                            "fit {candidate}/{kind}/{scope}: not enough data, skipped"
                        );
                        continue;
                    }
                    let mut config = self.config.sampler;
                    config.seed = self.fit_seed(&data);
                    let fit = fit_trend(&data, &self.config.priors, &config)
                        .map_err(|e| stage_err("fit", e))?;
                    let file = format!(
                        "{}_{}_{}.csv",
                        sanitize(candidate),
                        kind,
                        sanitize(&scope.to_string())
                    );
                    let mut csv = Vec::new();
                    write_draws_csv(&fit.posterior, &mut csv).map_err(|e| stage_err("fit", e))?;
                    std::fs::write(draws_dir.join(&file), &csv).map_err(|e| stage_err("fit", e))?;
                    summaries.push(TrendFitSummary::from(&fit));
                }
            }
        }
        log::info!("stage fit: {} fits", summaries.len());
        self.save_json("fit", "fit/fits.json", &summaries)
    }

    fn load_draws(&self, fit: &TrendFitSummary) -> Result<(Vec<f64>, Vec<f64>), PipelineError> {
        let file = format!(
            "{}_{}_{}.csv",
            sanitize(&fit.candidate),
            fit.kind,
            sanitize(&fit.scope.to_string())
        );
        let body = std::fs::read_to_string(self.run_dir.join("fit/draws").join(&file))
            .map_err(|e| stage_err("report", format!("cannot read draws {file}: {e}")))?;
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        for line in body.lines().skip(1) {
            let mut cols = line.split(',');
            let (_, _, a, b) = (
                cols.next(),
                cols.next(),
                cols.next().and_then(|v| v.parse::<f64>().ok()),
                cols.next().and_then(|v| v.parse::<f64>().ok()),
            );
            if let (Some(a), Some(b)) = (a, b) {
                alphas.push(a);
                betas.push(b);
            }
        }
        Ok((alphas, betas))
    }

    fn stage_report(&mut self) -> Result<ReportBundle, PipelineError> {
        let aggregates: Vec<AggregateAnalysis> =
            self.load_json("report", "aggregate/aggregates.json", "aggregate")?;
        let stats: StatsOutput = self.load_json("report", "stats/stats.json", "stats")?;
        let fits: Vec<TrendFitSummary> = self.load_json("report", "fit/fits.json", "fit")?;
        let exclusions: Vec<String> =
            self.load_json("report", "analyze/exclusions.json", "analyze")?;

        let mut plots: Vec<Plot> = Vec::new();
        if !stats.boxplots_by_period.is_empty() {
            plots.push(Plot {
                file_name: "boxplots_by_period.svg".into(),
                svg: render_boxplots(&stats.boxplots_by_period, GroupAxis::Period)
                    .map_err(|e| stage_err("report", e))?,
            });
        }
        if !stats.boxplots_by_source.is_empty() {
            plots.push(Plot {
                file_name: "boxplots_by_source.svg".into(),
                svg: render_boxplots(&stats.boxplots_by_source, GroupAxis::Source)
                    .map_err(|e| stage_err("report", e))?,
            });
        }

        // posterior parameter distributions over the pooled fits
        let pooled: Vec<&TrendFitSummary> = fits
            .iter()
            .filter(|f| f.scope == SourceScope::Pooled)
            .collect();
        let mut alpha_series = Vec::new();
        let mut beta_series = Vec::new();
        for fit in &pooled {
            let (alphas, betas) = self.load_draws(fit)?;
            let label = format!("{} {}", short_name(&fit.candidate), fit.kind);
            alpha_series.push((label.clone(), alphas));
            beta_series.push((label, betas));
        }
        if !alpha_series.is_empty() {
            plots.push(Plot {
                file_name: "posterior_alpha.svg".into(),
                svg: render_value_boxplots("posterior alpha (intercept)", &alpha_series)
                    .map_err(|e| stage_err("report", e))?,
            });
            plots.push(Plot {
                file_name: "posterior_beta.svg".into(),
                svg: render_value_boxplots("posterior beta (slope)", &beta_series)
                    .map_err(|e| stage_err("report", e))?,
            });
        }

        for fit in &pooled {
            let observations: Vec<_> = stats
                .table
                .observations
                .iter()
                .filter(|o| o.candidate == fit.candidate && o.kind == fit.kind)
                .cloned()
                .collect();
            if observations.is_empty() {
                continue;
            }
            let lines = source_mean_lines(&stats.table, &fit.candidate, fit.kind);
            plots.push(Plot {
                file_name: format!("trend_{}_{}.svg", sanitize(&fit.candidate), fit.kind),
                svg: render_trend_plot(&observations, &lines, fit)
                    .map_err(|e| stage_err("report", e))?,
            });
        }

        let bundle = ReportBundle {
            qualitative: aggregates,
            scores: stats.table,
            boxplots_by_period: stats.boxplots_by_period,
            boxplots_by_source: stats.boxplots_by_source,
            means_by_source: stats.means_by_source,
            pooled_means: stats.pooled_means,
            fits,
            plots,
            periods: self.config.periods.clone(),
            meta: RunMeta {
                config_digest: self.config.digest(),
                generated_at: Utc::now(),
                fixture_mode: self.config.mode == RunMode::Fixtures,
                query: self.config.query.clone(),
                exclusions,
            },
        };
        let manifest = emit_report(&bundle, &self.run_dir.join("report"))
            .map_err(|e: ReportError| stage_err("report", e))?;
        log::info!("stage report: manifest at {}", manifest.display());
        // the manifest stands in for the report stage's output digest
        let manifest_body =
            std::fs::read_to_string(&manifest).map_err(|e| stage_err("report", e))?;
        self.state
            .stages
            .insert("report".to_string(), sha256_hex(manifest_body.as_bytes()));
        self.state
            .save(&self.state_path)
            .map_err(|e| stage_err("report", e))?;
        Ok(bundle)
    }

}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn short_name(full: &str) -> String {
    full.split_whitespace().last().unwrap_or(full).to_string()
}

/// The run directory for a config under an output root.
pub fn run_dir_for(config: &CampaignConfig, out_dir: &Path) -> PathBuf {
    out_dir.join("runs").join(&config.digest()[..12])
}

/// Runs the pipeline with backends built from the config's mode.
pub fn run_pipeline(
    config: &CampaignConfig,
    opts: &RunOptions,
) -> Result<Option<ReportBundle>, PipelineError> {
    let backends = default_backends(config)?;
    run_pipeline_with(config, &backends, opts)
}

/// Runs the selected stages in order against the given backends.
/// Returns the report bundle when the report stage ran.
pub fn run_pipeline_with(
    config: &CampaignConfig,
    backends: &Backends,
    opts: &RunOptions,
) -> Result<Option<ReportBundle>, PipelineError> {
    config.validate().map_err(PipelineError::Config)?;
    if let Some(stages) = &opts.stages {
        for stage in stages {
            if !STAGES.contains(&stage.as_str()) {
                return Err(PipelineError::Config(ConfigError::Validation {
                    field: "stage".to_string(),
                    message: format!("unknown stage {stage}"),
                }));
            }
        }
    }

    let run_dir = run_dir_for(config, &opts.out_dir);
    std::fs::create_dir_all(&run_dir).map_err(|e| stage_err("search", e))?;
    let state_path = run_dir.join("state.json");
    let mut runner = Runner {
        config,
        backends,
        state: RunState::load(&state_path),
        state_path,
        run_dir,
        resume: opts.resume,
        selected: opts.stages.clone(),
        seed: opts.seed.unwrap_or(config.sampler.seed),
    };

    if runner.should_run("search", "search/url_groups.json") {
        runner.stage_search()?;
    }
    if runner.should_run("fetch", "fetch/records.json") {
        runner.stage_fetch()?;
    }
    if runner.should_run("analyze", "analyze/analyses.json") {
        runner.stage_analyze()?;
    }
    if runner.should_run("aggregate", "aggregate/aggregates.json") {
        runner.stage_aggregate()?;
    }
    if runner.should_run("stats", "stats/stats.json") {
        runner.stage_stats()?;
    }
    if runner.should_run("fit", "fit/fits.json") {
        runner.stage_fit()?;
    }
    if runner.should_run("report", "report/manifest.json") {
        return runner.stage_report().map(Some);
    }
    Ok(None)
}
