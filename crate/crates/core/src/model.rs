//! Shared domain types, their validation rules, and the canonical JSON
//! serialization contract used by every other module.
//!
//! Canonical on-disk encoding of every type here is JSON with
//! lower_snake_case field names; that encoding is the contract for cache
//! files, fixtures, and reports.
//!
//! Score scale: all three per-candidate scores (probability to be elected,
//! positive sentiment, negative sentiment) live on the unit interval
//! `[0, 1]`, and probabilities must sum to 1 across candidates. Prompts
//! request exactly this scale.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Probability sums inside this window are renormalized to 1; outside it
/// the document is rejected.
pub const PROB_SUM_WINDOW: (f64, f64) = (0.9, 1.1);
/// Scores within this distance of 0 or 1 are clamped to the boundary
/// (floating-point slack); anything further out is rejected.
pub const SCORE_CLAMP_SLACK: f64 = 1e-3;
/// Sums already this close to 1 are left untouched, which keeps
/// validation idempotent at the bit level.
pub const PROB_SUM_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("missing field: {0}")]
    MissingField(String),
    #[error("score out of range: {field} = {value}")]
    ScoreOutOfRange { field: String, value: f64 },
    #[error("candidate probabilities sum to {sum}, outside [0.9, 1.1]")]
    ProbabilitySumInvalid { sum: f64 },
    #[error("unknown candidate: {0}")]
    UnknownCandidate(String),
    #[error("duplicate candidate entry: {0}")]
    DuplicateCandidate(String),
}

/// One half-month analysis window. `index` is the regression time
/// covariate `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimePeriod {
    pub index: u32,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
}

impl TimePeriod {
    pub fn label(&self) -> String {
        format!("{} - {}", self.start_date, self.end_date)
    }
}

/// Checks the campaign-wide period invariants: indexes consecutive from 0,
/// chronologically ordered, non-overlapping, each with start <= end.
pub fn validate_periods(periods: &[TimePeriod]) -> Result<(), String> {
    if periods.is_empty() {
        return Err("at least one time period is required".into());
    }
    for (i, p) in periods.iter().enumerate() {
        if p.index != i as u32 {
            return Err(format!(
                "period indexes must be consecutive from 0; found index {} at position {i}",
                p.index
            ));
        }
        if p.start_date > p.end_date {
            return Err(format!(
                "period {} has start_date {} after end_date {}",
                p.index, p.start_date, p.end_date
            ));
        }
        if i > 0 && periods[i - 1].end_date >= p.start_date {
            return Err(format!(
                "period {} overlaps or is out of order with period {}",
                p.index,
                p.index - 1
            ));
        }
    }
    Ok(())
}

/// A named news source. An empty `site_filter` means an unrestricted
/// top-results search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceLabel {
    pub name: String,
    #[serde(default)]
    pub site_filter: String,
}

impl SourceLabel {
    pub fn unrestricted(name: &str) -> Self {
        Self {
            name: name.to_string(),
            site_filter: String::new(),
        }
    }

    pub fn with_filter(name: &str, site_filter: &str) -> Self {
        Self {
            name: name.to_string(),
            site_filter: site_filter.to_string(),
        }
    }
}

/// One fetched web resource with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub url: String,
    pub source: String,
    pub period: u32,
    pub text: String,
    pub fetched_at: DateTime<Utc>,
    pub content_hash: String,
}

/// Level-1 per-candidate block: three scores on [0, 1] plus the
/// qualitative lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateAnalysis {
    pub candidate: String,
    pub probability_elected: f64,
    pub positive_score: f64,
    pub negative_score: f64,
    pub positive_sentiments: Vec<String>,
    pub negative_sentiments: Vec<String>,
    pub cites: Vec<String>,
    pub main_narratives: Vec<String>,
}

/// Level-1 output for one article. `article_ref` is the content hash of
/// the analyzed article; the analysis layer fills it in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleAnalysis {
    pub article_ref: String,
    pub summary: String,
    pub per_candidate: Vec<CandidateAnalysis>,
    pub favorite_summary: String,
}

/// Grouping key for level-2 aggregates. `Campaign` identifies the single
/// whole-campaign trend document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Period(u32),
    Source(String),
    Campaign,
}

impl std::fmt::Display for GroupKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupKey::Period(i) => write!(f, "period_{i}"),
            GroupKey::Source(s) => write!(f, "source_{s}"),
            GroupKey::Campaign => write!(f, "campaign"),
        }
    }
}

/// Per-candidate block inside a level-2 aggregate. Source-grouped
/// aggregates carry no probability scores, and numeric sentiment scores
/// are optional at level 2 throughout; the plotted distributions always
/// come from level-1 scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCandidate {
    pub candidate: String,
    #[serde(default)]
    pub probability_elected: Option<f64>,
    #[serde(default)]
    pub positive_score: Option<f64>,
    #[serde(default)]
    pub negative_score: Option<f64>,
    pub positive_sentiments: Vec<String>,
    pub negative_sentiments: Vec<String>,
    pub cites: Vec<String>,
    pub main_narratives: Vec<String>,
}

/// Level-2 output: a grouped summary per period or source, or the
/// campaign-wide document carrying the trend summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateAnalysis {
    pub group_key: GroupKey,
    pub summary: String,
    pub per_candidate: Vec<AggregateCandidate>,
    /// Present on period-grouped aggregates; source-grouped blocks omit it.
    #[serde(default)]
    pub favorite_summary: Option<String>,
    #[serde(default)]
    pub trend: Option<TrendSummary>,
}

/// Qualitative trend block produced in trend mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub overall_summary: String,
    pub per_candidate_trend: BTreeMap<String, String>,
    pub per_candidate_narratives: BTreeMap<String, String>,
    pub favorite_summary: String,
}

/// Which of the three level-1 scores an observation carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    ProbabilityElected,
    Positive,
    Negative,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 3] = [
        ScoreKind::ProbabilityElected,
        ScoreKind::Positive,
        ScoreKind::Negative,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreKind::ProbabilityElected => "probability_elected",
            ScoreKind::Positive => "positive",
            ScoreKind::Negative => "negative",
        }
    }
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One flat (candidate, kind, period, source, value) observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreObservation {
    pub candidate: String,
    pub kind: ScoreKind,
    pub period_index: u32,
    pub source: String,
    pub value: f64,
}

/// The configured (candidates, periods, sources) universe that
/// observations and analyses are validated against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignScope {
    pub candidates: Vec<String>,
    pub period_indexes: Vec<u32>,
    pub sources: Vec<String>,
}

/// A validated level-1 analysis joined with its article's provenance;
/// the analysis stage's output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzedArticle {
    pub url: String,
    pub source: String,
    pub period: u32,
    pub content_hash: String,
    pub analysis: ArticleAnalysis,
}

// ---------------------------------------------------------------------------
// Validation of decoded analysis documents
// ---------------------------------------------------------------------------

fn req_str(raw: &Value, key: &str) -> Result<String, ValidationError> {
    raw.get(key)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ValidationError::MissingField(key.to_string()))
}

/// `key` is the JSON member to read; `path` is the dotted display path
/// reported in errors.
fn req_f64(v: &Value, key: &str, path: &str) -> Result<f64, ValidationError> {
    v.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| ValidationError::MissingField(path.to_string()))
}

/// String lists may be empty but never contain empty entries; blank
/// entries are dropped as a documented repair.
fn req_str_list(v: &Value, key: &str, path: &str) -> Result<Vec<String>, ValidationError> {
    let arr = v
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| ValidationError::MissingField(path.to_string()))?;
    let mut out = Vec::with_capacity(arr.len());
    for item in arr {
        let s = item
            .as_str()
            .ok_or_else(|| ValidationError::MissingField(path.to_string()))?;
        let trimmed = s.trim();
        if !trimmed.is_empty() {
            out.push(trimmed.to_string());
        }
    }
    Ok(out)
}

/// Reads a score, clamping values within [`SCORE_CLAMP_SLACK`] of the unit
/// interval's boundary and rejecting anything further out.
fn read_score(v: &Value, key: &str, path: &str) -> Result<f64, ValidationError> {
    let raw = req_f64(v, key, path)?;
    if raw.is_nan() {
        return Err(ValidationError::ScoreOutOfRange {
            field: path.to_string(),
            value: raw,
        });
    }
    if (0.0..=1.0).contains(&raw) {
        return Ok(raw);
    }
    if raw < 0.0 && raw >= -SCORE_CLAMP_SLACK {
        return Ok(0.0);
    }
    if raw > 1.0 && raw <= 1.0 + SCORE_CLAMP_SLACK {
        return Ok(1.0);
    }
    Err(ValidationError::ScoreOutOfRange {
        field: path.to_string(),
        value: raw,
    })
}

/// Indexes raw per-candidate blocks by configured candidate order,
/// rejecting unknown names, duplicates, and gaps.
fn candidate_blocks<'a>(
    raw: &'a Value,
    candidates: &[String],
) -> Result<Vec<&'a Value>, ValidationError> {
    let arr = raw
        .get("per_candidate")
        .and_then(Value::as_array)
        .ok_or_else(|| ValidationError::MissingField("per_candidate".to_string()))?;
    let mut by_name: BTreeMap<&str, &Value> = BTreeMap::new();
    for block in arr {
        let name = block
            .get("candidate")
            .and_then(Value::as_str)
            .ok_or_else(|| ValidationError::MissingField("per_candidate.candidate".to_string()))?;
        if !candidates.iter().any(|c| c == name) {
            return Err(ValidationError::UnknownCandidate(name.to_string()));
        }
        if by_name.insert(name, block).is_some() {
            return Err(ValidationError::DuplicateCandidate(name.to_string()));
        }
    }
    candidates
        .iter()
        .map(|c| {
            by_name
                .get(c.as_str())
                .copied()
                .ok_or_else(|| ValidationError::MissingField(format!("per_candidate.{c}")))
        })
        .collect()
}

/// Renormalizes probabilities to sum to 1 when the raw sum is inside
/// [`PROB_SUM_WINDOW`]; sums already within [`PROB_SUM_EPS`] of 1 are left
/// bit-identical so validation is idempotent.
fn normalize_probabilities(probs: &mut [f64]) -> Result<(), ValidationError> {
    let sum: f64 = probs.iter().sum();
    if sum < PROB_SUM_WINDOW.0 || sum > PROB_SUM_WINDOW.1 {
        return Err(ValidationError::ProbabilitySumInvalid { sum });
    }
    if (sum - 1.0).abs() > PROB_SUM_EPS {
        for p in probs.iter_mut() {
            *p /= sum;
        }
    }
    Ok(())
}

/// Validates a structurally decoded level-1 analysis document against the
/// configured candidates.
///
/// Repairs applied: probabilities renormalized when their sum is within
/// [0.9, 1.1]; scores clamped only within floating-point slack of the
/// [0, 1] boundary; blank list entries dropped. Everything else is
/// rejected with an error naming the offending field. Candidate blocks
/// are returned in configured order. Validation is idempotent: a
/// re-encoded valid document passes through unchanged.
pub fn validate_article_analysis(
    raw: &Value,
    candidates: &[String],
) -> Result<ArticleAnalysis, ValidationError> {
    let summary = req_str(raw, "summary")?;
    let favorite_summary = req_str(raw, "favorite_summary")?;
    let blocks = candidate_blocks(raw, candidates)?;

    let mut parsed = Vec::with_capacity(blocks.len());
    let mut probs = Vec::with_capacity(blocks.len());
    for (name, block) in candidates.iter().zip(&blocks) {
        let prefix = format!("per_candidate.{name}");
        let at = |key: &str| format!("{prefix}.{key}");
        probs.push(read_score(block, "probability_elected", &at("probability_elected"))?);
        parsed.push(CandidateAnalysis {
            candidate: name.clone(),
            probability_elected: 0.0,
            positive_score: read_score(block, "positive_score", &at("positive_score"))?,
            negative_score: read_score(block, "negative_score", &at("negative_score"))?,
            positive_sentiments: req_str_list(block, "positive_sentiments", &at("positive_sentiments"))?,
            negative_sentiments: req_str_list(block, "negative_sentiments", &at("negative_sentiments"))?,
            cites: req_str_list(block, "cites", &at("cites"))?,
            main_narratives: req_str_list(block, "main_narratives", &at("main_narratives"))?,
        });
    }
    normalize_probabilities(&mut probs)?;
    for (c, p) in parsed.iter_mut().zip(&probs) {
        c.probability_elected = *p;
    }

    Ok(ArticleAnalysis {
        article_ref: raw
            .get("article_ref")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string(),
        summary,
        per_candidate: parsed,
        favorite_summary,
    })
}

/// Which level-2 grouping a raw aggregate document claims to describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateMode {
    /// Probability scores required, favorite summary required.
    ByPeriod,
    /// Probability scores and favorite summary omitted.
    BySource,
}

/// Validates a decoded level-2 aggregate document. Probability fields are
/// required and renormalized in `ByPeriod` mode and optional in `BySource`
/// mode; numeric sentiment scores are optional in both.
pub fn validate_aggregate_analysis(
    raw: &Value,
    candidates: &[String],
    group_key: GroupKey,
    mode: AggregateMode,
) -> Result<AggregateAnalysis, ValidationError> {
    let summary = req_str(raw, "summary")?;
    let favorite_summary = match mode {
        AggregateMode::ByPeriod => Some(req_str(raw, "favorite_summary")?),
        AggregateMode::BySource => raw
            .get("favorite_summary")
            .and_then(Value::as_str)
            .map(str::to_string),
    };
    let blocks = candidate_blocks(raw, candidates)?;

    let mut parsed = Vec::with_capacity(blocks.len());
    let mut probs = Vec::with_capacity(blocks.len());
    for (name, block) in candidates.iter().zip(&blocks) {
        let prefix = format!("per_candidate.{name}");
        let at = |key: &str| format!("{prefix}.{key}");
        let probability = match mode {
            AggregateMode::ByPeriod => {
                Some(read_score(block, "probability_elected", &at("probability_elected"))?)
            }
            AggregateMode::BySource => match block.get("probability_elected") {
                Some(Value::Null) | None => None,
                Some(_) => Some(read_score(block, "probability_elected", &at("probability_elected"))?),
            },
        };
        let opt_score = |key: &str| -> Result<Option<f64>, ValidationError> {
            match block.get(key) {
                Some(Value::Null) | None => Ok(None),
                Some(_) => Ok(Some(read_score(block, key, &at(key))?)),
            }
        };
        if let Some(p) = probability {
            probs.push(p);
        }
        parsed.push(AggregateCandidate {
            candidate: name.clone(),
            probability_elected: probability,
            positive_score: opt_score("positive_score")?,
            negative_score: opt_score("negative_score")?,
            positive_sentiments: req_str_list(block, "positive_sentiments", &at("positive_sentiments"))?,
            negative_sentiments: req_str_list(block, "negative_sentiments", &at("negative_sentiments"))?,
            cites: req_str_list(block, "cites", &at("cites"))?,
            main_narratives: req_str_list(block, "main_narratives", &at("main_narratives"))?,
        });
    }
    if probs.len() == candidates.len() {
        normalize_probabilities(&mut probs)?;
        for (c, p) in parsed.iter_mut().zip(&probs) {
            c.probability_elected = Some(*p);
        }
    }

    Ok(AggregateAnalysis {
        group_key,
        summary,
        per_candidate: parsed,
        favorite_summary,
        trend: None,
    })
}

/// Validates a decoded trend document: every configured candidate must
/// have a trend entry and a narratives entry.
pub fn validate_trend_summary(
    raw: &Value,
    candidates: &[String],
) -> Result<TrendSummary, ValidationError> {
    let overall_summary = req_str(raw, "summary")?;
    let favorite_summary = req_str(raw, "favorite_summary")?;
    let read_map = |key: &str| -> Result<BTreeMap<String, String>, ValidationError> {
        let obj = raw
            .get(key)
            .and_then(Value::as_object)
            .ok_or_else(|| ValidationError::MissingField(key.to_string()))?;
        let mut out = BTreeMap::new();
        for (name, text) in obj {
            if !candidates.iter().any(|c| c == name) {
                return Err(ValidationError::UnknownCandidate(name.clone()));
            }
            let s = text
                .as_str()
                .ok_or_else(|| ValidationError::MissingField(format!("{key}.{name}")))?;
            out.insert(name.clone(), s.to_string());
        }
        for c in candidates {
            if !out.contains_key(c) {
                return Err(ValidationError::MissingField(format!("{key}.{c}")));
            }
        }
        Ok(out)
    };
    Ok(TrendSummary {
        overall_summary,
        per_candidate_trend: read_map("per_candidate_trend")?,
        per_candidate_narratives: read_map("per_candidate_narratives")?,
        favorite_summary,
    })
}
