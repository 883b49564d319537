//! Report assembly: SVG boxplots and trend plots, CSV tables, the
//! human-readable summary document, and the manifest tying them together.
//!
//! All plots are deterministic vector documents; rendering the same
//! bundle twice yields byte-identical files, which the end-to-end tests
//! rely on. The summary document mirrors the heading vocabulary of the
//! qualitative outputs ("Summary", "probability score", "positive
//! sentiments", "cites", "main narratives", "Favorite candidate
//! summary").

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AggregateAnalysis, GroupKey, ScoreKind, ScoreObservation, TimePeriod};
use crate::stats::{self, BoxplotSummary, GroupAxis, GroupMean, ScoreTable, SourceMeanLine};
use crate::svg::{series_color, SvgBuilder};
use crate::trend::{SourceScope, TrendFitSummary};
use crate::util::sha256_hex;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to plot")]
    EmptyInput,
    #[error("fit and observations reference different (candidate, kind, scope)")]
    MismatchedScope,
    #[error("report I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ReportError {
    fn from(e: std::io::Error) -> Self {
        ReportError::Io(e.to_string())
    }
}

// panel geometry shared by the boxplot grid and its tests
pub(crate) const PANEL_W: f64 = 300.0;
pub(crate) const PANEL_H: f64 = 230.0;
pub(crate) const PANEL_ML: f64 = 46.0;
pub(crate) const PANEL_MR: f64 = 12.0;
pub(crate) const PANEL_MT: f64 = 30.0;
pub(crate) const PANEL_MB: f64 = 42.0;
const PANEL_COLS: usize = 2;

/// Pixel y of a unit-interval value inside the panel at grid (row, col).
pub(crate) fn panel_value_to_y(row: usize, value: f64) -> f64 {
    let top = row as f64 * PANEL_H + PANEL_MT;
    let inner = PANEL_H - PANEL_MT - PANEL_MB;
    top + (1.0 - value) * inner
}

fn group_label(key: &GroupKey) -> String {
    match key {
        GroupKey::Period(i) => format!("t{i}"),
        GroupKey::Source(s) => {
            let mut label: String = s.chars().take(12).collect();
            if s.chars().count() > 12 {
                label.push('…');
            }
            label
        }
        GroupKey::Campaign => "all".to_string(),
    }
}

fn draw_box(
    svg: &mut SvgBuilder,
    cx: f64,
    width: f64,
    y_of: &dyn Fn(f64) -> f64,
    q1: f64,
    median: f64,
    q3: f64,
    min: f64,
    max: f64,
    outliers: &[f64],
    color: &str,
) {
    let half = width / 2.0;
    svg.line("whisker", cx, y_of(q3), cx, y_of(max), color, None);
    svg.line("whisker", cx, y_of(min), cx, y_of(q1), color, None);
    svg.line("cap", cx - half * 0.6, y_of(max), cx + half * 0.6, y_of(max), color, None);
    svg.line("cap", cx - half * 0.6, y_of(min), cx + half * 0.6, y_of(min), color, None);
    svg.rect("box", cx - half, y_of(q3), width, y_of(q1) - y_of(q3), "none", color);
    svg.line("median", cx - half, y_of(median), cx + half, y_of(median), color, None);
    for o in outliers {
        svg.circle("outlier", cx, y_of(*o), 2.5, color);
    }
}

/// Renders one panel per (candidate, kind) with a Tukey box per group,
/// axes labeled over [0, 1].
pub fn render_boxplots(summaries: &[BoxplotSummary], _layout: GroupAxis) -> Result<String, ReportError> {
    if summaries.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    // panels and groups in encounter order
    let mut panels: Vec<(String, ScoreKind)> = Vec::new();
    let mut groups: Vec<GroupKey> = Vec::new();
    for s in summaries {
        let pk = (s.candidate.clone(), s.kind);
        if !panels.contains(&pk) {
            panels.push(pk);
        }
        if !groups.contains(&s.group_key) {
            groups.push(s.group_key.clone());
        }
    }
    let rows = panels.len().div_ceil(PANEL_COLS);
    let cols = panels.len().min(PANEL_COLS);
    let mut svg = SvgBuilder::new(cols as f64 * PANEL_W, rows as f64 * PANEL_H);

    for (pi, (candidate, kind)) in panels.iter().enumerate() {
        let row = pi / PANEL_COLS;
        let col = pi % PANEL_COLS;
        let ox = col as f64 * PANEL_W;
        let oy = row as f64 * PANEL_H;
        let inner_w = PANEL_W - PANEL_ML - PANEL_MR;
        let y_of = move |v: f64| panel_value_to_y(row, v);

        svg.text("panel-title", ox + PANEL_W / 2.0, oy + 18.0, 12.0, "middle",
            &format!("{candidate} / {kind}"));
        // axes
        svg.line("axis", ox + PANEL_ML, y_of(0.0), ox + PANEL_ML, y_of(1.0), "#333", None);
        svg.line("axis", ox + PANEL_ML, y_of(0.0), ox + PANEL_W - PANEL_MR, y_of(0.0), "#333", None);
        for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
            svg.line("tick", ox + PANEL_ML - 3.0, y_of(tick), ox + PANEL_ML, y_of(tick), "#333", None);
            svg.text("tick-label", ox + PANEL_ML - 6.0, y_of(tick) + 3.5, 9.0, "end",
                &format!("{tick:.2}"));
        }

        let slot = inner_w / groups.len() as f64;
        for (gi, group) in groups.iter().enumerate() {
            let Some(s) = summaries
                .iter()
                .find(|s| &s.group_key == group && &s.candidate == candidate && s.kind == *kind)
            else {
                continue;
            };
            let cx = ox + PANEL_ML + (gi as f64 + 0.5) * slot;
            let width = (slot * 0.55).min(26.0);
            draw_box(&mut svg, cx, width, &y_of, s.q1, s.median, s.q3, s.min, s.max,
                &s.outliers, series_color(gi));
            svg.text("group-label", cx, oy + PANEL_H - PANEL_MB + 14.0, 9.0, "middle",
                &group_label(group));
        }
    }
    Ok(svg.finish())
}

/// One auto-scaled panel of boxes, one per labeled draw series; used for
/// the posterior parameter distributions.
pub fn render_value_boxplots(title: &str, series: &[(String, Vec<f64>)]) -> Result<String, ReportError> {
    if series.is_empty() || series.iter().any(|(_, v)| v.is_empty()) {
        return Err(ReportError::EmptyInput);
    }
    let width = (series.len() as f64 * 90.0 + 110.0).max(320.0);
    let height = 280.0;
    let (ml, mr, mt, mb) = (64.0, 16.0, 34.0, 60.0);

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let summaries: Vec<BoxplotSummary> = series
        .iter()
        .map(|(label, values)| {
            let mut s = stats_summary(values);
            s.candidate = label.clone();
            lo = lo.min(s.min).min(s.outliers.first().copied().unwrap_or(s.min));
            hi = hi.max(s.max).max(s.outliers.last().copied().unwrap_or(s.max));
            s
        })
        .collect();
    let pad = ((hi - lo) * 0.08).max(1e-9);
    let (lo, hi) = (lo - pad, hi + pad);

    let mut svg = SvgBuilder::new(width, height);
    let inner_h = height - mt - mb;
    let y_of = move |v: f64| mt + (1.0 - (v - lo) / (hi - lo)) * inner_h;

    svg.text("panel-title", width / 2.0, 20.0, 12.0, "middle", title);
    svg.line("axis", ml, y_of(lo), ml, y_of(hi), "#333", None);
    svg.line("axis", ml, y_of(lo), width - mr, y_of(lo), "#333", None);
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        svg.line("tick", ml - 3.0, y_of(v), ml, y_of(v), "#333", None);
        svg.text("tick-label", ml - 6.0, y_of(v) + 3.5, 9.0, "end", &format!("{v:.3}"));
    }
    let slot = (width - ml - mr) / series.len() as f64;
    for (i, s) in summaries.iter().enumerate() {
        let cx = ml + (i as f64 + 0.5) * slot;
        draw_box(&mut svg, cx, (slot * 0.5).min(34.0), &y_of, s.q1, s.median, s.q3, s.min,
            s.max, &s.outliers, series_color(i));
        svg.text("group-label", cx, height - mb + 16.0, 9.0, "middle", &s.candidate);
    }
    Ok(svg.finish())
}

fn stats_summary(values: &[f64]) -> BoxplotSummary {
    let q1 = stats::quantile(values, 0.25).expect("non-empty");
    let median = stats::quantile(values, 0.5).expect("non-empty");
    let q3 = stats::quantile(values, 0.75).expect("non-empty");
    let iqr = q3 - q1;
    let (lo_f, hi_f) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let mut outliers: Vec<f64> = values.iter().copied().filter(|v| *v < lo_f || *v > hi_f).collect();
    outliers.sort_by(f64::total_cmp);
    let inliers = values.iter().copied().filter(|v| *v >= lo_f && *v <= hi_f);
    BoxplotSummary {
        group_key: GroupKey::Campaign,
        candidate: String::new(),
        kind: ScoreKind::Positive,
        min: inliers.clone().fold(f64::INFINITY, f64::min).min(q1),
        q1,
        median,
        q3,
        max: inliers.fold(f64::NEG_INFINITY, f64::max).max(q3),
        n: values.len(),
        outliers,
    }
}

// trend plot geometry
const TREND_W: f64 = 640.0;
const TREND_H: f64 = 400.0;
const TREND_ML: f64 = 56.0;
const TREND_MR: f64 = 150.0;
const TREND_MT: f64 = 40.0;
const TREND_MB: f64 = 48.0;

/// Scatter of observations, solid per-source mean polylines, the dashed
/// posterior-mean line, and the shaded credible band for one
/// (candidate, kind).
pub fn render_trend_plot(
    observations: &[ScoreObservation],
    mean_lines: &[SourceMeanLine],
    fit: &TrendFitSummary,
) -> Result<String, ReportError> {
    if observations.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    for o in observations {
        if o.candidate != fit.candidate || o.kind != fit.kind {
            return Err(ReportError::MismatchedScope);
        }
        if let SourceScope::Source(s) = &fit.scope {
            if &o.source != s {
                return Err(ReportError::MismatchedScope);
            }
        }
    }

    let ts: Vec<f64> = fit.credible_band.iter().map(|b| b.t).collect();
    let (t_lo, t_hi) = (
        ts.iter().copied().fold(f64::INFINITY, f64::min) - 0.5,
        ts.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 0.5,
    );
    let x_of = |t: f64| TREND_ML + (t - t_lo) / (t_hi - t_lo) * (TREND_W - TREND_ML - TREND_MR);
    let y_of = |v: f64| TREND_MT + (1.0 - v) * (TREND_H - TREND_MT - TREND_MB);

    let mut svg = SvgBuilder::new(TREND_W, TREND_H);
    svg.text("panel-title", (TREND_ML + TREND_W - TREND_MR) / 2.0, 22.0, 13.0, "middle",
        &format!("{} / {} ({})", fit.candidate, fit.kind, fit.scope));

    // credible band under everything else
    let mut band: Vec<(f64, f64)> = fit.credible_band.iter()
        .map(|b| (x_of(b.t), y_of(b.upper)))
        .collect();
    band.extend(fit.credible_band.iter().rev().map(|b| (x_of(b.t), y_of(b.lower))));
    svg.polygon("band", &band, "#9ecae1", 0.35);

    // axes with unit-interval ticks
    svg.line("axis", TREND_ML, y_of(0.0), TREND_ML, y_of(1.0), "#333", None);
    svg.line("axis", TREND_ML, y_of(0.0), TREND_W - TREND_MR, y_of(0.0), "#333", None);
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        svg.line("tick", TREND_ML - 3.0, y_of(tick), TREND_ML, y_of(tick), "#333", None);
        svg.text("tick-label", TREND_ML - 6.0, y_of(tick) + 3.5, 9.0, "end", &format!("{tick:.2}"));
    }
    for t in &ts {
        svg.line("tick", x_of(*t), y_of(0.0), x_of(*t), y_of(0.0) + 3.0, "#333", None);
        svg.text("tick-label", x_of(*t), y_of(0.0) + 14.0, 9.0, "middle", &format!("{t}"));
    }

    let source_index: BTreeMap<&str, usize> = mean_lines
        .iter()
        .enumerate()
        .map(|(i, l)| (l.source.as_str(), i))
        .collect();
    let n_sources = mean_lines.len().max(1);

    // observations, with a small deterministic per-source x offset so
    // coincident points stay visible
    for o in observations {
        let idx = source_index.get(o.source.as_str()).copied().unwrap_or(0);
        let dx = (idx as f64 - (n_sources as f64 - 1.0) / 2.0) * 0.05;
        svg.circle("obs", x_of(o.period_index as f64 + dx), y_of(o.value), 2.5,
            series_color(idx));
    }

    for (i, line) in mean_lines.iter().enumerate() {
        let pts: Vec<(f64, f64)> = line.points.iter().map(|(t, v)| (x_of(*t), y_of(*v))).collect();
        svg.polyline("source-mean", &pts, series_color(i), None);
    }

    // dashed posterior mean line over the band's t span
    let (a, b) = (fit.alpha_mean, fit.beta_mean);
    let (t0, t1) = (ts[0], ts[ts.len() - 1]);
    svg.line("fit-mean", x_of(t0), y_of(a + b * t0), x_of(t1), y_of(a + b * t1), "#111",
        Some("7 4"));

    // legend
    let lx = TREND_W - TREND_MR + 12.0;
    for (i, line) in mean_lines.iter().enumerate() {
        let ly = TREND_MT + 8.0 + i as f64 * 16.0;
        svg.line("legend-swatch", lx, ly, lx + 18.0, ly, series_color(i), None);
        svg.text("legend-label", lx + 24.0, ly + 3.5, 9.0, "start", &line.source);
    }
    let ly = TREND_MT + 8.0 + mean_lines.len() as f64 * 16.0;
    svg.line("legend-swatch", lx, ly, lx + 18.0, ly, "#111", Some("7 4"));
    svg.text("legend-label", lx + 24.0, ly + 3.5, 9.0, "start", "posterior mean");

    Ok(svg.finish())
}

// ---------------------------------------------------------------------------
// Bundle and emission
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_digest: String,
    pub generated_at: DateTime<Utc>,
    pub fixture_mode: bool,
    pub query: String,
    /// Articles excluded by fetch or analysis failures, as `url: reason`.
    pub exclusions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plot {
    pub file_name: String,
    pub svg: String,
}

/// Everything the report stage writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub qualitative: Vec<AggregateAnalysis>,
    pub scores: ScoreTable,
    pub boxplots_by_period: Vec<BoxplotSummary>,
    pub boxplots_by_source: Vec<BoxplotSummary>,
    pub means_by_source: Vec<GroupMean>,
    pub pooled_means: Vec<GroupMean>,
    pub fits: Vec<TrendFitSummary>,
    pub plots: Vec<Plot>,
    pub periods: Vec<TimePeriod>,
    pub meta: RunMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_digest: String,
    pub created_at: DateTime<Utc>,
    pub fixture_mode: bool,
    pub artifacts: Vec<ManifestEntry>,
    pub exclusions: Vec<String>,
}

/// Paper-style possessive: names ending in `s` take a bare apostrophe.
fn possessive(name: &str) -> String {
    if name.ends_with('s') || name.ends_with('S') {
        format!("{name}'")
    } else {
        format!("{name}'s")
    }
}

fn join_list(items: &[String]) -> String {
    if items.is_empty() {
        "—".to_string()
    } else {
        items.join("; ")
    }
}

fn period_heading(periods: &[TimePeriod], index: u32) -> String {
    periods
        .iter()
        .find(|p| p.index == index)
        .map(|p| format!("{} -- {}", p.start_date, p.end_date))
        .unwrap_or_else(|| format!("period {index}"))
}

/// The human-readable summary document: per-period sections, per-source
/// sections, and the trend section, using the qualitative outputs'
/// heading vocabulary.
pub fn render_summary_markdown(bundle: &ReportBundle) -> String {
    let mut out = String::new();
    out.push_str("# News analysis report\n\n");
    out.push_str(&format!("Search query: `{}`\n", bundle.meta.query));

    out.push_str("\n## Results grouped by time periods\n");
    let mut period_aggs: Vec<&AggregateAnalysis> = bundle
        .qualitative
        .iter()
        .filter(|a| matches!(a.group_key, GroupKey::Period(_)))
        .collect();
    period_aggs.sort_by_key(|a| match a.group_key {
        GroupKey::Period(i) => i,
        _ => u32::MAX,
    });
    for agg in period_aggs {
        let GroupKey::Period(index) = agg.group_key else { continue };
        out.push_str(&format!("\n### Dates: {}\n\n", period_heading(&bundle.periods, index)));
        push_aggregate_block(&mut out, agg);
    }

    out.push_str("\n## Results grouped by web resources\n");
    for agg in bundle
        .qualitative
        .iter()
        .filter(|a| matches!(a.group_key, GroupKey::Source(_)))
    {
        let GroupKey::Source(name) = &agg.group_key else { continue };
        out.push_str(&format!("\n### Web resource: {name}\n\n"));
        push_aggregate_block(&mut out, agg);
    }

    if let Some(trend_doc) = bundle.qualitative.iter().find(|a| a.trend.is_some()) {
        let trend = trend_doc.trend.as_ref().expect("trend present");
        out.push_str("\n## Trend summary\n\n");
        out.push_str(&format!("**Summary:** {}\n\n", trend.overall_summary));
        for (candidate, text) in &trend.per_candidate_trend {
            out.push_str(&format!("**{} trend summary:** {text}\n\n", possessive(candidate)));
        }
        for (candidate, text) in &trend.per_candidate_narratives {
            out.push_str(&format!("**{} main narratives:** {text}\n\n", possessive(candidate)));
        }
        out.push_str(&format!("**Favorite candidate's summary:** {}\n", trend.favorite_summary));
    }

    out.push_str("\n## Mean probability to be elected\n\n");
    out.push_str("| web resource | candidate | mean probability | n |\n");
    out.push_str("|---|---|---|---|\n");
    for m in &bundle.means_by_source {
        let source = match &m.group {
            GroupKey::Source(s) => s.clone(),
            other => other.to_string(),
        };
        out.push_str(&format!("| {source} | {} | {:.4} | {} |\n", m.candidate, m.mean, m.n));
    }
    for m in &bundle.pooled_means {
        out.push_str(&format!("| (all) | {} | {:.4} | {} |\n", m.candidate, m.mean, m.n));
    }

    if !bundle.fits.is_empty() {
        out.push_str("\n## Trend fits\n\n");
        out.push_str("| candidate | score | scope | alpha | beta | P(beta > 0) | R-hat max |\n");
        out.push_str("|---|---|---|---|---|---|---|\n");
        for f in &bundle.fits {
            let rhat = f
                .diagnostics
                .alpha
                .rhat
                .max(f.diagnostics.beta.rhat)
                .max(f.diagnostics.sigma.rhat);
            out.push_str(&format!(
                "| {} | {} | {} | {:.4} | {:+.4} | {:.3} | {:.3} |\n",
                f.candidate, f.kind, f.scope, f.alpha_mean, f.beta_mean, f.prob_beta_positive, rhat
            ));
        }
    }

    if !bundle.meta.exclusions.is_empty() {
        out.push_str("\n## Excluded articles\n\n");
        for e in &bundle.meta.exclusions {
            out.push_str(&format!("- {e}\n"));
        }
    }
    out
}

fn push_aggregate_block(out: &mut String, agg: &AggregateAnalysis) {
    out.push_str(&format!("**Summary:** {}\n\n", agg.summary));
    for c in &agg.per_candidate {
        if let Some(p) = c.probability_elected {
            out.push_str(&format!("**{} probability score:** {p}\n\n", possessive(&c.candidate)));
        }
    }
    for c in &agg.per_candidate {
        out.push_str(&format!(
            "**{} positive sentiments:** {}\n\n",
            possessive(&c.candidate),
            join_list(&c.positive_sentiments)
        ));
        out.push_str(&format!(
            "**{} negative sentiments:** {}\n\n",
            possessive(&c.candidate),
            join_list(&c.negative_sentiments)
        ));
    }
    for c in &agg.per_candidate {
        out.push_str(&format!(
            "**{} cites:** {}\n\n",
            possessive(&c.candidate),
            join_list(&c.cites)
        ));
    }
    for c in &agg.per_candidate {
        out.push_str(&format!(
            "**{} main narratives:** {}\n\n",
            possessive(&c.candidate),
            join_list(&c.main_narratives)
        ));
    }
    if let Some(fav) = &agg.favorite_summary {
        out.push_str(&format!("**Favorite candidate summary:** {fav}\n\n"));
    }
}

fn sanitize_file_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn qualitative_file_name(key: &GroupKey) -> String {
    match key {
        GroupKey::Period(i) => format!("period_{i}.json"),
        GroupKey::Source(s) => format!("source_{}.json", sanitize_file_name(s)),
        GroupKey::Campaign => "trend.json".to_string(),
    }
}

fn write_artifact(
    root: &Path,
    rel: &str,
    bytes: &[u8],
    artifacts: &mut Vec<ManifestEntry>,
) -> Result<(), ReportError> {
    let path = root.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&path, bytes)?;
    artifacts.push(ManifestEntry {
        path: rel.to_string(),
        sha256: sha256_hex(bytes),
    });
    Ok(())
}

/// Writes the qualitative JSON documents, CSV tables, SVG plots, the
/// summary document, and a manifest listing every artifact with its
/// digest. Returns the manifest path.
pub fn emit_report(bundle: &ReportBundle, out_dir: &Path) -> Result<PathBuf, ReportError> {
    std::fs::create_dir_all(out_dir)?;
    let mut artifacts: Vec<ManifestEntry> = Vec::new();

    for agg in &bundle.qualitative {
        let rel = format!("qualitative/{}", qualitative_file_name(&agg.group_key));
        let body = serde_json::to_string_pretty(agg).map_err(|e| ReportError::Io(e.to_string()))?;
        write_artifact(out_dir, &rel, body.as_bytes(), &mut artifacts)?;
    }

    let mut csv_bytes = Vec::new();
    stats::write_scores_csv(&bundle.scores, &mut csv_bytes)?;
    write_artifact(out_dir, "tables/scores.csv", &csv_bytes, &mut artifacts)?;

    let mut boxplot_csv = String::from("group,candidate,kind,min,q1,median,q3,max,n,outliers\n");
    for s in bundle.boxplots_by_period.iter().chain(&bundle.boxplots_by_source) {
        boxplot_csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            s.group_key, s.candidate, s.kind, s.min, s.q1, s.median, s.q3, s.max, s.n,
            s.outliers.len()
        ));
    }
    write_artifact(out_dir, "tables/boxplot_summaries.csv", boxplot_csv.as_bytes(), &mut artifacts)?;

    let mut means_csv = String::from("group,candidate,kind,mean,n\n");
    for m in bundle.means_by_source.iter().chain(&bundle.pooled_means) {
        means_csv.push_str(&format!("{},{},{},{},{}\n", m.group, m.candidate, m.kind, m.mean, m.n));
    }
    write_artifact(out_dir, "tables/mean_probabilities.csv", means_csv.as_bytes(), &mut artifacts)?;

    let fits_json =
        serde_json::to_string_pretty(&bundle.fits).map_err(|e| ReportError::Io(e.to_string()))?;
    write_artifact(out_dir, "fits.json", fits_json.as_bytes(), &mut artifacts)?;

    for plot in &bundle.plots {
        let rel = format!("plots/{}", sanitize_file_name(&plot.file_name));
        write_artifact(out_dir, &rel, plot.svg.as_bytes(), &mut artifacts)?;
    }

    let summary = render_summary_markdown(bundle);
    write_artifact(out_dir, "summary.md", summary.as_bytes(), &mut artifacts)?;

    artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        config_digest: bundle.meta.config_digest.clone(),
        created_at: bundle.meta.generated_at,
        fixture_mode: bundle.meta.fixture_mode,
        artifacts,
        exclusions: bundle.meta.exclusions.clone(),
    };
    let manifest_path = out_dir.join("manifest.json");
    let body =
        serde_json::to_string_pretty(&manifest).map_err(|e| ReportError::Io(e.to_string()))?;
    std::fs::write(&manifest_path, body)?;
    Ok(manifest_path)
}
