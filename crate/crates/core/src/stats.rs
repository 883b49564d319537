//! Descriptive statistics over level-1 scores: the flat score table,
//! boxplot five-number summaries, and group means.
//!
//! Quantiles use linear interpolation between order statistics (the
//! "type 7" definition: `h = (n-1)q`, interpolate between `floor(h)` and
//! `ceil(h)`), which matches the default of the common plotting stacks.
//! Outliers follow the conventional Tukey rule: points beyond 1.5×IQR
//! from the quartiles, with whiskers at the extreme non-outlier values.
//!
//! Period-grouped summaries pool all sources for that period.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AnalyzedArticle, CampaignScope, GroupKey, ScoreKind, ScoreObservation};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
}

/// Flat collection of score observations plus the configured universe
/// they refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub observations: Vec<ScoreObservation>,
    pub scope: CampaignScope,
}

/// Which axis to group summaries by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupAxis {
    Period,
    Source,
}

/// Tukey five-number summary for one (group, candidate, kind) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub group_key: GroupKey,
    pub candidate: String,
    pub kind: ScoreKind,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub n: usize,
    pub outliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub group: GroupKey,
    pub candidate: String,
    pub kind: ScoreKind,
    pub mean: f64,
    pub n: usize,
}

/// Per-source polyline of per-period means, for trend plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMeanLine {
    pub source: String,
    pub points: Vec<(f64, f64)>,
}

/// Flattens validated analyses into the score table: exactly
/// `3 × |candidates|` observations per analysis (probability, positive,
/// negative for each candidate).
pub fn collect_scores(items: &[AnalyzedArticle], scope: &CampaignScope) -> ScoreTable {
    let mut observations = Vec::with_capacity(items.len() * scope.candidates.len() * 3);
    for item in items {
        for cand in &item.analysis.per_candidate {
            for kind in ScoreKind::ALL {
                let value = match kind {
                    ScoreKind::ProbabilityElected => cand.probability_elected,
                    ScoreKind::Positive => cand.positive_score,
                    ScoreKind::Negative => cand.negative_score,
                };
                observations.push(ScoreObservation {
                    candidate: cand.candidate.clone(),
                    kind,
                    period_index: item.period,
                    source: item.source.clone(),
                    value,
                });
            }
        }
    }
    ScoreTable {
        observations,
        scope: scope.clone(),
    }
}

/// Linear-interpolation quantile (type 7) of a non-empty slice.
pub fn quantile(values: &[f64], q: f64) -> Result<f64, StatsError> {
    assert!((0.0..=1.0).contains(&q), "quantile level out of [0,1]: {q}");
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn summarize(group_key: GroupKey, candidate: &str, kind: ScoreKind, values: &[f64]) -> BoxplotSummary {
    let q1 = quantile(values, 0.25).expect("non-empty group");
    let median = quantile(values, 0.5).expect("non-empty group");
    let q3 = quantile(values, 0.75).expect("non-empty group");
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let mut outliers: Vec<f64> = values
        .iter()
        .copied()
        .filter(|v| *v < lo_fence || *v > hi_fence)
        .collect();
    outliers.sort_by(f64::total_cmp);
    let inliers = values.iter().copied().filter(|v| *v >= lo_fence && *v <= hi_fence);
    // whiskers sit at the extreme non-outlier values, clamped at the box
    // edges when every point on that side is an outlier (matplotlib's
    // convention), which keeps min <= q1 and q3 <= max
    let min = inliers.clone().fold(f64::INFINITY, f64::min).min(q1);
    let max = inliers.fold(f64::NEG_INFINITY, f64::max).max(q3);
    BoxplotSummary {
        group_key,
        candidate: candidate.to_string(),
        kind,
        min,
        q1,
        median,
        q3,
        max,
        n: values.len(),
        outliers,
    }
}

fn group_keys(table: &ScoreTable, axis: GroupAxis) -> Vec<GroupKey> {
    match axis {
        GroupAxis::Period => table
            .scope
            .period_indexes
            .iter()
            .map(|i| GroupKey::Period(*i))
            .collect(),
        GroupAxis::Source => table
            .scope
            .sources
            .iter()
            .map(|s| GroupKey::Source(s.clone()))
            .collect(),
    }
}

fn matches_group(obs: &ScoreObservation, key: &GroupKey) -> bool {
    match key {
        GroupKey::Period(i) => obs.period_index == *i,
        GroupKey::Source(s) => &obs.source == s,
        GroupKey::Campaign => true,
    }
}

/// One Tukey summary per (group, candidate, kind) cell with at least one
/// observation; empty cells are skipped. Ordering follows the campaign
/// configuration (periods ascending, sources and candidates in configured
/// order, kinds probability/positive/negative).
pub fn boxplot_summaries(table: &ScoreTable, group_by: GroupAxis) -> Vec<BoxplotSummary> {
    let mut out = Vec::new();
    for key in group_keys(table, group_by) {
        for candidate in &table.scope.candidates {
            for kind in ScoreKind::ALL {
                let values: Vec<f64> = table
                    .observations
                    .iter()
                    .filter(|o| {
                        matches_group(o, &key) && &o.candidate == candidate && o.kind == kind
                    })
                    .map(|o| o.value)
                    .collect();
                if !values.is_empty() {
                    out.push(summarize(key.clone(), candidate, kind, &values));
                }
            }
        }
    }
    out
}

/// Arithmetic means of one score kind per (group, candidate); groups with
/// no observations are absent.
pub fn group_means(table: &ScoreTable, kind: ScoreKind, group_by: GroupAxis) -> Vec<GroupMean> {
    let mut out = Vec::new();
    for key in group_keys(table, group_by) {
        for candidate in &table.scope.candidates {
            let values: Vec<f64> = table
                .observations
                .iter()
                .filter(|o| matches_group(o, &key) && &o.candidate == candidate && o.kind == kind)
                .map(|o| o.value)
                .collect();
            if !values.is_empty() {
                out.push(GroupMean {
                    group: key.clone(),
                    candidate: candidate.clone(),
                    kind,
                    mean: values.iter().sum::<f64>() / values.len() as f64,
                    n: values.len(),
                });
            }
        }
    }
    out
}

/// Pooled mean of one score kind per candidate over the whole table.
pub fn pooled_means(table: &ScoreTable, kind: ScoreKind) -> Vec<GroupMean> {
    table
        .scope
        .candidates
        .iter()
        .filter_map(|candidate| {
            let values: Vec<f64> = table
                .observations
                .iter()
                .filter(|o| &o.candidate == candidate && o.kind == kind)
                .map(|o| o.value)
                .collect();
            if values.is_empty() {
                return None;
            }
            Some(GroupMean {
                group: GroupKey::Campaign,
                candidate: candidate.clone(),
                kind,
                mean: values.iter().sum::<f64>() / values.len() as f64,
                n: values.len(),
            })
        })
        .collect()
}

/// Per-source polylines of per-period means for one (candidate, kind),
/// for the trend plots. Sources or periods without observations are
/// skipped.
pub fn source_mean_lines(table: &ScoreTable, candidate: &str, kind: ScoreKind) -> Vec<SourceMeanLine> {
    table
        .scope
        .sources
        .iter()
        .filter_map(|source| {
            let mut points = Vec::new();
            for period in &table.scope.period_indexes {
                let values: Vec<f64> = table
                    .observations
                    .iter()
                    .filter(|o| {
                        &o.source == source
                            && o.candidate == candidate
                            && o.kind == kind
                            && o.period_index == *period
                    })
                    .map(|o| o.value)
                    .collect();
                if !values.is_empty() {
                    points.push((
                        *period as f64,
                        values.iter().sum::<f64>() / values.len() as f64,
                    ));
                }
            }
            if points.is_empty() {
                None
            } else {
                Some(SourceMeanLine {
                    source: source.clone(),
                    points,
                })
            }
        })
        .collect()
}

/// Writes the table as CSV with header `candidate,kind,period_index,source,value`.
pub fn write_scores_csv<W: std::io::Write>(table: &ScoreTable, writer: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["candidate", "kind", "period_index", "source", "value"])?;
    for o in &table.observations {
        w.write_record([
            o.candidate.as_str(),
            o.kind.as_str(),
            &o.period_index.to_string(),
            o.source.as_str(),
            &o.value.to_string(),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scope() -> CampaignScope {
        CampaignScope {
            candidates: vec!["Kamala Harris".into(), "Donald Trump".into()],
            period_indexes: vec![0, 1],
            sources: vec!["Web sites".into(), "CNN".into()],
        }
    }

    fn item(period: u32, source: &str, h_prob: f64) -> AnalyzedArticle {
        let cand = |name: &str, p: f64| crate::model::CandidateAnalysis {
            candidate: name.to_string(),
            probability_elected: p,
            positive_score: 0.6,
            negative_score: 0.3,
            positive_sentiments: vec![],
            negative_sentiments: vec![],
            cites: vec![],
            main_narratives: vec![],
        };
        AnalyzedArticle {
            url: format!("https://example.test/{source}/{period}"),
            source: source.to_string(),
            period,
            content_hash: "hash".into(),
            analysis: crate::model::ArticleAnalysis {
                article_ref: "hash".into(),
                summary: "s".into(),
                per_candidate: vec![
                    cand("Kamala Harris", h_prob),
                    cand("Donald Trump", 1.0 - h_prob),
                ],
                favorite_summary: "f".into(),
            },
        }
    }

    #[test]
    fn collect_scores_emits_three_per_candidate() {
        let table = collect_scores(&[item(0, "CNN", 0.505)], &scope());
        assert_eq!(table.observations.len(), 6);
        let table = collect_scores(&[], &scope());
        assert!(table.observations.is_empty());
    }

    #[test]
    fn corpus_of_436_articles_yields_2616_observations() {
        let items: Vec<AnalyzedArticle> =
            (0..436).map(|i| item(i % 2, "CNN", 0.5)).collect();
        let table = collect_scores(&items, &scope());
        assert_eq!(table.observations.len(), 2616);
    }

    #[test]
    fn csv_export_carries_the_declared_header() {
        let table = collect_scores(&[item(0, "CNN", 0.505)], &scope());
        let mut out = Vec::new();
        write_scores_csv(&table, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("candidate,kind,period_index,source,value\n"));
        assert_eq!(text.lines().count(), 7);
        assert!(text.contains("Kamala Harris,probability_elected,0,CNN,0.505"));
    }

    #[test]
    fn quantile_matches_hand_computed_examples() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 2.5);
        assert_eq!(quantile(&[5.0], 0.0).unwrap(), 5.0);
        assert_eq!(quantile(&[5.0], 0.73).unwrap(), 5.0);
        // h = 7 * 0.25 = 1.75 -> 2 + 0.75 * (3 - 2)
        let v: Vec<f64> = (1..=8).map(f64::from).collect();
        assert!((quantile(&v, 0.25).unwrap() - 2.75).abs() < 1e-15);
        assert_eq!(quantile(&[], 0.5), Err(StatsError::EmptyInput));
    }

    #[test]
    fn boxplot_nine_equally_spaced() {
        let values: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let s = summarize(GroupKey::Period(0), "c", ScoreKind::Positive, &values);
        assert!((s.median - 0.5).abs() < 1e-12);
        assert!((s.q1 - 0.3).abs() < 1e-12);
        assert!((s.q3 - 0.7).abs() < 1e-12);
        assert!(s.outliers.is_empty());
        assert_eq!((s.min, s.max), (0.1, 0.9));
    }

    #[test]
    fn boxplot_single_value_degenerates() {
        let s = summarize(GroupKey::Period(0), "c", ScoreKind::Positive, &[0.4]);
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (0.4, 0.4, 0.4, 0.4, 0.4));
        assert!(s.outliers.is_empty());
    }

    #[test]
    fn zero_iqr_flags_distinct_value_as_outlier() {
        let mut values = vec![0.5; 10];
        values.push(0.99);
        let s = summarize(GroupKey::Period(0), "c", ScoreKind::Positive, &values);
        assert_eq!(s.outliers, vec![0.99]);
        assert_eq!((s.min, s.max), (0.5, 0.5));
    }

    #[test]
    fn group_means_skip_empty_groups() {
        let table = collect_scores(&[item(0, "CNN", 0.4)], &scope());
        let means = group_means(&table, ScoreKind::ProbabilityElected, GroupAxis::Source);
        // only CNN has observations
        assert_eq!(means.len(), 2);
        assert!(means.iter().all(|m| m.group == GroupKey::Source("CNN".into())));
        assert!((means[0].mean - 0.4).abs() < 1e-12);
        assert!((means[1].mean - 0.6).abs() < 1e-12);
    }

    #[test]
    fn mean_of_two_values() {
        let table = collect_scores(&[item(0, "CNN", 0.4), item(1, "CNN", 0.6)], &scope());
        let means = pooled_means(&table, ScoreKind::ProbabilityElected);
        assert!((means[0].mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn paper_period_series_mean() {
        let probs = [0.505, 0.52, 0.525, 0.5, 0.52];
        let mean = probs.iter().sum::<f64>() / probs.len() as f64;
        assert!((mean - 0.514).abs() < 1e-12);
    }

    // Independent oracle: selection-based order statistics plus the
    // interpolation formula written out directly.
    fn quantile_oracle(values: &[f64], q: f64) -> f64 {
        fn kth(values: &[f64], k: usize) -> f64 {
            let mut pool = values.to_vec();
            for _ in 0..k {
                let (mi, _) = pool
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .unwrap();
                pool.swap_remove(mi);
            }
            pool.iter().copied().fold(f64::INFINITY, f64::min)
        }
        let n = values.len();
        let h = (n as f64 - 1.0) * q;
        let lo = h.floor() as usize;
        let frac = h - h.floor();
        if frac == 0.0 {
            kth(values, lo)
        } else {
            let a = kth(values, lo);
            let b = kth(values, lo + 1);
            a + frac * (b - a)
        }
    }

    proptest! {
        #[test]
        fn quantile_agrees_with_oracle(
            values in prop::collection::vec(0.0f64..1.0, 1..40),
            q in 0.0f64..=1.0,
        ) {
            let ours = quantile(&values, q).unwrap();
            let oracle = quantile_oracle(&values, q);
            prop_assert!((ours - oracle).abs() <= 1e-12, "ours={ours} oracle={oracle}");
        }

        #[test]
        fn boxplot_ordering_invariant(values in prop::collection::vec(0.0f64..1.0, 1..60)) {
            let s = summarize(GroupKey::Period(0), "c", ScoreKind::Positive, &values);
            prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
            let iqr = s.q3 - s.q1;
            for o in &s.outliers {
                prop_assert!(*o < s.q1 - 1.5 * iqr || *o > s.q3 + 1.5 * iqr);
            }
            prop_assert_eq!(s.n, values.len());
        }

        #[test]
        fn group_counts_conserve_total(
            cells in prop::collection::vec((0u32..2, 0usize..2, 0.0f64..1.0), 0..50)
        ) {
            let sc = scope();
            let items: Vec<AnalyzedArticle> = cells
                .iter()
                .map(|(p, s, v)| item(*p, &sc.sources[*s], *v))
                .collect();
            let table = collect_scores(&items, &sc);
            for axis in [GroupAxis::Period, GroupAxis::Source] {
                let summaries = boxplot_summaries(&table, axis);
                let total: usize = summaries.iter().map(|s| s.n).sum();
                prop_assert_eq!(total, table.observations.len());
            }
        }

        // pairwise-renormalized probabilities mean to complements per group
        #[test]
        fn complementarity_of_group_means(
            cells in prop::collection::vec((0u32..2, 0usize..2, 0.05f64..0.95), 1..50)
        ) {
            let sc = scope();
            let items: Vec<AnalyzedArticle> = cells
                .iter()
                .map(|(p, s, v)| item(*p, &sc.sources[*s], *v))
                .collect();
            let table = collect_scores(&items, &sc);
            let means = group_means(&table, ScoreKind::ProbabilityElected, GroupAxis::Period);
            for pair in means.chunks(2) {
                if pair.len() == 2 {
                    prop_assert!((pair[0].mean + pair[1].mean - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
