//! Regenerates the shipped fixture corpus for `configs/mini.toml`:
//! canned search responses, article pages, and recorded LLM exchanges
//! keyed by the same request digests the pipeline computes. Rerun after
//! changing templates, the mini config, or the prompt rendering.
//!
//!     cargo run --bin gen-fixtures
//!
//! The corpus is synthetic but engineered so the period-level aggregate
//! probabilities match the published qualitative results it mirrors
//! (0.505/0.495 in the first period, 0.52/0.48 in the second).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use newstrend::config::load_config;
use newstrend::extract::{fetch_group, FetchCache, FetchLimits, FixtureLoader};
use newstrend::llm::{
    analyze_article, render_level1_prompt, render_level2_prompt, ChatPrompt, FixtureChatClient,
    Level2Docs, Level2Mode, LlmExchange, PromptTemplate,
};
use newstrend::model::{AggregateAnalysis, Article, GroupKey};
use newstrend::pipeline::{run_pipeline, RunOptions};
use newstrend::search::{build_requests, group_urls, SearchHit, SearchRequest, UrlGroup};
use newstrend::util::{sha256_hex, RetryPolicy};

const MODEL_NAME: &str = "gpt-4o-fixture";

/// Per-article engineered level-1 scores:
/// (harris_prob, harris_pos, harris_neg, trump_pos, trump_neg).
/// Period means of harris_prob are 0.505 and 0.52.
const SCORES: [[(f64, f64, f64, f64, f64); 2]; 6] = [
    // period 0: Web sites, CNN, Reuters
    [(0.50, 0.55, 0.36, 0.52, 0.44), (0.51, 0.58, 0.33, 0.49, 0.47)],
    [(0.505, 0.54, 0.35, 0.50, 0.46), (0.50, 0.52, 0.38, 0.53, 0.43)],
    [(0.495, 0.56, 0.34, 0.51, 0.45), (0.52, 0.57, 0.32, 0.48, 0.48)],
    // period 1
    [(0.52, 0.60, 0.32, 0.50, 0.47), (0.515, 0.59, 0.31, 0.47, 0.49)],
    [(0.52, 0.61, 0.30, 0.49, 0.48), (0.525, 0.62, 0.29, 0.46, 0.50)],
    [(0.51, 0.58, 0.33, 0.51, 0.46), (0.53, 0.63, 0.28, 0.45, 0.51)],
];

const TOPICS: [&str; 6] = [
    "a rally in a battleground state",
    "a televised debate over economic policy",
    "new polling in the industrial midwest",
    "an endorsement from a union coalition",
    "a dispute over immigration enforcement",
    "a fundraising surge ahead of early voting",
];

fn article_url(period: u32, source_idx: usize, k: usize) -> String {
    match source_idx {
        0 => format!("https://www.eagle-report.example/2024/p{period}/story-{k}"),
        1 => format!("https://www.cnn.com/2024/politics/mini-p{period}-{k}"),
        _ => format!("https://www.reuters.com/world/us/mini-p{period}-{k}"),
    }
}

fn article_html(period: u32, source: &str, k: usize) -> String {
    let topic = TOPICS[(period as usize * 3 + k) % TOPICS.len()];
    format!(
        "<html><head><title>Harris and Trump clash over {topic}</title>\
         <style>body{{font-family:serif}}</style></head><body>\
         <nav><a href=\"/\">home</a> <a href=\"/politics\">politics</a></nav>\
         <article>\
         <h1>Harris and Trump clash over {topic}</h1>\
         <p>Kamala Harris and Donald Trump traded sharp words this week over {topic}, \
         as both campaigns pushed to consolidate support among undecided voters. \
         Coverage from {source} highlighted how each candidate framed the stakes \
         of the contest in starkly different terms.</p>\
         <p>Harris told supporters that the country faces a choice about its \
         direction, pointing to her plans for middle-class families and pledging \
         steady leadership. Her campaign emphasized turnout operations in the \
         suburbs and outreach to younger voters who remain persuadable.</p>\
         <p>Trump, speaking to an energetic crowd, promised a rapid economic \
         revival and attacked what he called failed establishment policies. His \
         team argued that enthusiasm among the base, combined with gains among \
         low-propensity voters, would decide the election in his favor.</p>\
         <p>Analysts quoted in the piece cautioned that the race remains \
         effectively tied, with {topic} unlikely to move the national picture on \
         its own, even as it dominates a news cycle in period {period}.</p>\
         </article>\
         <footer>contact us</footer><script>track();</script></body></html>"
    )
}

fn string_list(prefix: &str, flavor: &str) -> Vec<String> {
    vec![format!("{prefix} around {flavor}")]
}

fn level1_response(
    candidates: &[String],
    scores: (f64, f64, f64, f64, f64),
    flavor: &str,
) -> Value {
    let (h_prob, h_pos, h_neg, t_pos, t_neg) = scores;
    let block = |name: &str, prob: f64, pos: f64, neg: f64, fav: &str| {
        json!({
            "candidate": name,
            "probability_elected": prob,
            "positive_score": pos,
            "negative_score": neg,
            "positive_sentiments": string_list(&format!("{fav} strengths"), flavor),
            "negative_sentiments": string_list(&format!("{fav} criticism"), flavor),
            "cites": [format!("remark on {flavor}")],
            "main_narratives": [format!("{fav} framing of {flavor}")],
        })
    };
    json!({
        "summary": format!(
            "The article covers {flavor}, with both candidates courting undecided \
             voters and framing the race around competing economic visions."
        ),
        "per_candidate": [
            block(&candidates[0], h_prob, h_pos, h_neg, "organizing"),
            block(&candidates[1], 1.0 - h_prob, t_pos, t_neg, "populist"),
        ],
        "favorite_summary": if h_prob > 0.5 {
            "Coverage tilts slightly toward Harris in this article."
        } else if h_prob < 0.5 {
            "Coverage tilts slightly toward Trump in this article."
        } else {
            "Coverage treats both candidates evenly in this article."
        },
    })
}

fn level2_period_response(candidates: &[String], period: u32) -> Value {
    let h_prob = if period == 0 { 0.505 } else { 0.52 };
    let block = |name: &str, prob: f64, fav: &str| {
        json!({
            "candidate": name,
            "probability_elected": prob,
            "positive_sentiments": [format!("{fav} energy across the period")],
            "negative_sentiments": [format!("questions about {fav} consistency")],
            "cites": [format!("period {period} remark")],
            "main_narratives": [format!("{fav} period narrative")],
        })
    };
    json!({
        "summary": format!(
            "Across period {period}, coverage shows a tight race with small \
             shifts in emphasis between economic themes and turnout operations."
        ),
        "per_candidate": [
            block(&candidates[0], h_prob, "steady"),
            block(&candidates[1], 1.0 - h_prob, "combative"),
        ],
        "favorite_summary": "Coverage tilts slightly toward Harris across this period.",
    })
}

fn level2_source_response(candidates: &[String], source: &str) -> Value {
    let block = |name: &str, fav: &str| {
        json!({
            "candidate": name,
            "positive_sentiments": [format!("{fav} framing at {source}")],
            "negative_sentiments": [format!("{fav} scrutiny at {source}")],
            "cites": [format!("{source} quotation")],
            "main_narratives": [format!("{fav} storyline at {source}")],
        })
    };
    json!({
        "summary": format!(
            "{source} covers the race as effectively tied, balancing campaign \
             strategy pieces with policy-focused reporting."
        ),
        "per_candidate": [
            block(&candidates[0], "institutional"),
            block(&candidates[1], "insurgent"),
        ],
    })
}

fn trend_response(candidates: &[String]) -> Value {
    json!({
        "summary": "Across the two periods the race stays close, with Harris's \
                    coverage firming modestly while Trump's holds steady.",
        "per_candidate_trend": {
            candidates[0].clone(): "Slightly improving positive coverage and a \
                                    small gain in perceived electability.",
            candidates[1].clone(): "Stable base-focused coverage with unchanged \
                                    electability estimates.",
        },
        "per_candidate_narratives": {
            candidates[0].clone(): "Steady governance and coalition building.",
            candidates[1].clone(): "Economic revival and anti-establishment energy.",
        },
        "favorite_summary": "Current trends favor Harris by a narrow margin.",
    })
}

fn write_exchange(dir: &Path, prompt: &ChatPrompt, response: String) -> Result<()> {
    let exchange = LlmExchange {
        request_digest: prompt.digest(),
        model_name: MODEL_NAME.to_string(),
        response_text: response,
        input_tokens: (prompt.system.len() + prompt.user.len()) as u64 / 4,
        output_tokens: 200,
        latency_ms: 0,
    };
    let path = dir.join(format!("{}.json", exchange.request_digest));
    std::fs::write(&path, serde_json::to_string_pretty(&exchange)?)?;
    Ok(())
}

fn main() -> Result<()> {
    let root: PathBuf = match std::env::args().nth(1) {
        Some(dir) => PathBuf::from(dir),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../.."),
    };
    let config = load_config(&root.join("configs/mini.toml")).context("load mini config")?;
    let fixtures = config.paths.fixtures_dir.clone();
    let search_dir = fixtures.join("search");
    let pages_dir = fixtures.join("pages");
    let llm_dir = fixtures.join("llm");
    for dir in [&search_dir, &pages_dir, &llm_dir] {
        if dir.exists() {
            std::fs::remove_dir_all(dir)?;
        }
        std::fs::create_dir_all(dir)?;
    }

    // search fixtures: two ranked hits per (period, source) cell; the
    // groups are derived through the same grouping path the pipeline
    // uses, so document order matches at every later stage
    let requests = build_requests(
        &config.query,
        &config.periods,
        &config.sources,
        config.limits.max_results,
    )?;
    let mut hits_by_request: Vec<(SearchRequest, Vec<SearchHit>)> = Vec::new();
    for request in &requests {
        let source_idx = config
            .sources
            .iter()
            .position(|s| s.name == request.source.name)
            .expect("configured source");
        let hits: Vec<SearchHit> = (0..2)
            .map(|k| SearchHit {
                url: article_url(request.period.index, source_idx, k),
                title: format!("Harris and Trump clash, day {k}"),
                snippet: "Campaign coverage.".to_string(),
                rank: k + 1,
            })
            .collect();
        std::fs::write(
            search_dir.join(format!("{}.json", request.digest())),
            serde_json::to_string_pretty(&hits)?,
        )?;
        hits_by_request.push((request.clone(), hits));
    }
    let groups: Vec<UrlGroup> = group_urls(&hits_by_request);

    // page fixtures keyed by url digest
    for group in &groups {
        let source_idx = config
            .sources
            .iter()
            .position(|s| s.name == group.source)
            .expect("configured source");
        for (k, url) in group.urls.iter().enumerate() {
            let html = article_html(group.period, &config.sources[source_idx].name, k);
            std::fs::write(
                pages_dir.join(format!("{}.html", sha256_hex(url.as_bytes()))),
                html,
            )?;
        }
    }

    // reproduce the fetch stage to get the exact articles the pipeline
    // will hand to the prompt renderer
    let scratch = std::env::temp_dir().join(format!("newstrend-genfix-{}", std::process::id()));
    let cache = FetchCache::new(scratch.join("cache"))?;
    let loader = FixtureLoader::new(&pages_dir);
    let limits = FetchLimits {
        min_text_chars: config.limits.min_text_chars,
        max_text_chars: config.limits.max_text_chars,
        retry: RetryPolicy::immediate(1),
        ..FetchLimits::default()
    };
    let mut articles: Vec<Article> = Vec::new();
    for group in &groups {
        for record in fetch_group(group, &cache, &loader, &limits)? {
            match record.article {
                Some(article) => articles.push(article),
                None => bail!(
                    "fixture page for {} failed extraction: {:?}",
                    record.url,
                    record.failure_reason
                ),
            }
        }
    }

    // level-1 exchanges, one per article; the first CNN article of period
    // 0 arrives wrapped in a code fence to exercise fence stripping
    let template_dir = &config.paths.templates_dir;
    let level1 = PromptTemplate::load(&template_dir.join("level1.toml"))?;
    for article in &articles {
        let source_idx = config
            .sources
            .iter()
            .position(|s| s.name == article.source)
            .expect("configured source");
        let k = usize::from(!article.url.ends_with('0'));
        let scores = SCORES[article.period as usize * 3 + source_idx][k];
        let flavor = TOPICS[(article.period as usize * 3 + k) % TOPICS.len()];
        let doc = level1_response(&config.candidates, scores, flavor);
        let response = if article.period == 0 && source_idx == 1 && k == 0 {
            format!("```json\n{doc}\n```")
        } else {
            doc.to_string()
        };
        let prompt = render_level1_prompt(article, &level1, &config.candidates)?;
        write_exchange(&llm_dir, &prompt, response)?;
    }

    // replay the analysis stage against the freshly written fixtures so
    // the level-2 prompts embed exactly what the pipeline will produce
    let chat = FixtureChatClient::new(&llm_dir);
    let mut analyses = Vec::new();
    for article in &articles {
        analyses.push((
            article,
            analyze_article(article, &chat, &level1, &config.candidates, 0)?,
        ));
    }

    let budget = config.limits.context_budget_chars;
    let period_template = PromptTemplate::load(&template_dir.join("level2_period.toml"))?;
    let mut period_aggregates: Vec<AggregateAnalysis> = Vec::new();
    for period in &config.periods {
        let docs: Vec<_> = analyses
            .iter()
            .filter(|(a, _)| a.period == period.index)
            .map(|(_, an)| an.clone())
            .collect();
        let prompt = render_level2_prompt(
            &Level2Docs::Analyses(&docs),
            &period.label(),
            &period_template,
            Level2Mode::ByPeriod,
            &config.candidates,
            budget,
        )?;
        let response = level2_period_response(&config.candidates, period.index);
        write_exchange(&llm_dir, &prompt, response.to_string())?;
        period_aggregates.push(newstrend::model::validate_aggregate_analysis(
            &response,
            &config.candidates,
            GroupKey::Period(period.index),
            newstrend::model::AggregateMode::ByPeriod,
        )?);
    }

    let source_template = PromptTemplate::load(&template_dir.join("level2_source.toml"))?;
    for source in &config.sources {
        let docs: Vec<_> = analyses
            .iter()
            .filter(|(a, _)| a.source == source.name)
            .map(|(_, an)| an.clone())
            .collect();
        let prompt = render_level2_prompt(
            &Level2Docs::Analyses(&docs),
            &source.name,
            &source_template,
            Level2Mode::BySource,
            &config.candidates,
            budget,
        )?;
        write_exchange(
            &llm_dir,
            &prompt,
            level2_source_response(&config.candidates, &source.name).to_string(),
        )?;
    }

    let trend_template = PromptTemplate::load(&template_dir.join("level2_trend.toml"))?;
    let prompt = render_level2_prompt(
        &Level2Docs::Aggregates(&period_aggregates),
        "full campaign",
        &trend_template,
        Level2Mode::Trend,
        &config.candidates,
        budget,
    )?;
    write_exchange(&llm_dir, &prompt, trend_response(&config.candidates).to_string())?;

    println!(
        "fixtures written: {} search, {} pages, {} llm exchanges",
        std::fs::read_dir(&search_dir)?.count(),
        std::fs::read_dir(&pages_dir)?.count(),
        std::fs::read_dir(&llm_dir)?.count(),
    );

    // smoke: the pipeline must replay the corpus end to end
    let bundle = run_pipeline(
        &config,
        &RunOptions {
            out_dir: scratch.join("out"),
            ..RunOptions::default()
        },
    )?
    .expect("full run returns a report");
    println!(
        "smoke run: {} aggregates, {} observations, {} fits, {} exclusions",
        bundle.qualitative.len(),
        bundle.scores.observations.len(),
        bundle.fits.len(),
        bundle.meta.exclusions.len(),
    );
    for m in &bundle.pooled_means {
        println!("pooled mean probability, {}: {:.4}", m.candidate, m.mean);
    }
    std::fs::remove_dir_all(&scratch)?;
    Ok(())
}
