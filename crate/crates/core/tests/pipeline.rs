//! End-to-end pipeline behaviors: resumability, fixture-miss handling,
//! partial-failure tolerance, and the CLI contract (verbs and exit
//! codes).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::time::Duration;

use newstrend::config::{load_config, CampaignConfig};
use newstrend::extract::{FixtureLoader, LoadError, LoadedPage, PageLoader};
use newstrend::llm::{ChatClient, ChatPrompt, FixtureChatClient, LlmError, LlmExchange};
use newstrend::pipeline::{
    run_dir_for, run_pipeline_with, Backends, PipelineError, RunOptions,
};
use newstrend::search::{FixtureSearchBackend, SearchBackend, SearchError, SearchHit, SearchRequest};

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn mini_config() -> CampaignConfig {
    load_config(&repo_root().join("configs/mini.toml")).unwrap()
}

#[derive(Clone, Default)]
struct Counters {
    search: Arc<AtomicU32>,
    pages: Arc<AtomicU32>,
    chat: Arc<AtomicU32>,
}

impl Counters {
    fn total(&self) -> u32 {
        self.search.load(Ordering::SeqCst)
            + self.pages.load(Ordering::SeqCst)
            + self.chat.load(Ordering::SeqCst)
    }
}

struct CountingSearch(FixtureSearchBackend, Arc<AtomicU32>);
impl SearchBackend for CountingSearch {
    fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, SearchError> {
        self.1.fetch_add(1, Ordering::SeqCst);
        self.0.search(request)
    }
}

struct CountingLoader(FixtureLoader, Arc<AtomicU32>);
impl PageLoader for CountingLoader {
    fn load(&self, url: &str, timeout: Duration) -> Result<LoadedPage, LoadError> {
        self.1.fetch_add(1, Ordering::SeqCst);
        self.0.load(url, timeout)
    }
}

struct CountingChat(FixtureChatClient, Arc<AtomicU32>);
impl ChatClient for CountingChat {
    fn complete(&self, prompt: &ChatPrompt) -> Result<LlmExchange, LlmError> {
        self.1.fetch_add(1, Ordering::SeqCst);
        self.0.complete(prompt)
    }
}

fn counting_backends(config: &CampaignConfig) -> (Backends, Counters) {
    let counters = Counters::default();
    let fixtures = &config.paths.fixtures_dir;
    let backends = Backends {
        search: Box::new(CountingSearch(
            FixtureSearchBackend::new(fixtures.join("search")),
            counters.search.clone(),
        )),
        loader: Box::new(CountingLoader(
            FixtureLoader::new(fixtures.join("pages")),
            counters.pages.clone(),
        )),
        chat: Box::new(CountingChat(
            FixtureChatClient::new(fixtures.join("llm")),
            counters.chat.clone(),
        )),
    };
    (backends, counters)
}

#[test]
fn resume_skips_completed_stages_entirely() {
    let config = mini_config();
    let tmp = tempfile::tempdir().unwrap();
    let (backends, counters) = counting_backends(&config);
    let opts = RunOptions {
        out_dir: tmp.path().to_path_buf(),
        ..RunOptions::default()
    };
    run_pipeline_with(&config, &backends, &opts).unwrap().unwrap();
    let after_first = counters.total();
    assert_eq!(counters.search.load(Ordering::SeqCst), 6);
    assert_eq!(counters.pages.load(Ordering::SeqCst), 12);
    assert_eq!(counters.chat.load(Ordering::SeqCst), 18);

    // a resumed run performs zero backend work
    let resumed = RunOptions {
        out_dir: tmp.path().to_path_buf(),
        resume: true,
        ..RunOptions::default()
    };
    run_pipeline_with(&config, &backends, &resumed).unwrap();
    assert_eq!(counters.total(), after_first, "resume must not touch backends");

    // and leaves every recorded stage digest unchanged
    let state_path = run_dir_for(&config, tmp.path()).join("state.json");
    let state: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&state_path).unwrap()).unwrap();
    assert_eq!(state["stages"].as_object().unwrap().len(), 7);
}

#[test]
fn rerunning_a_completed_stage_reproduces_its_output_digest() {
    let config = mini_config();
    let tmp = tempfile::tempdir().unwrap();
    let (backends, _) = counting_backends(&config);
    let opts = RunOptions {
        out_dir: tmp.path().to_path_buf(),
        ..RunOptions::default()
    };
    run_pipeline_with(&config, &backends, &opts).unwrap();
    let state_path = run_dir_for(&config, tmp.path()).join("state.json");
    let before: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&state_path).unwrap()).unwrap();

    // re-run single stages without --resume: they recompute and must land
    // on identical content digests
    for stage in ["search", "fetch", "analyze", "stats"] {
        let opts = RunOptions {
            out_dir: tmp.path().to_path_buf(),
            stages: Some(vec![stage.to_string()]),
            ..RunOptions::default()
        };
        run_pipeline_with(&config, &backends, &opts).unwrap();
    }
    let after: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&state_path).unwrap()).unwrap();
    for stage in ["search", "fetch", "analyze", "stats"] {
        assert_eq!(
            before["stages"][stage], after["stages"][stage],
            "stage {stage} is not idempotent"
        );
    }
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.path().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
}

#[test]
fn deleted_llm_fixture_fails_with_its_digest() {
    let mut config = mini_config();
    let tmp = tempfile::tempdir().unwrap();
    let fixtures = tmp.path().join("fixtures");
    copy_dir(&config.paths.fixtures_dir, &fixtures);
    config.paths.fixtures_dir = fixtures.clone();

    // remove one recorded exchange
    let victim = std::fs::read_dir(fixtures.join("llm"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "json"))
        .unwrap();
    let digest = victim.file_stem().unwrap().to_string_lossy().to_string();
    std::fs::remove_file(&victim).unwrap();

    let (backends, _) = counting_backends(&config);
    let opts = RunOptions {
        out_dir: tmp.path().join("out"),
        ..RunOptions::default()
    };
    let err = run_pipeline_with(&config, &backends, &opts).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    match err {
        PipelineError::MissingFixture { digest: missing, .. } => assert_eq!(missing, digest),
        other => panic!("expected MissingFixture, got {other}"),
    }
}

#[test]
fn failed_extraction_excludes_the_article_but_completes_the_run() {
    let mut config = mini_config();
    let tmp = tempfile::tempdir().unwrap();
    let fixtures = tmp.path().join("fixtures");
    copy_dir(&config.paths.fixtures_dir, &fixtures);
    config.paths.fixtures_dir = fixtures.clone();

    // shrink one page below the extraction floor
    let victim = std::fs::read_dir(fixtures.join("pages"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "html"))
        .unwrap();
    std::fs::write(&victim, "<p>stub</p>").unwrap();

    let (backends, _) = counting_backends(&config);
    // the analysis stage still runs: level-2 fixtures do not exist for
    // the reduced corpus, so stop after analyze
    let opts = RunOptions {
        out_dir: tmp.path().join("out"),
        stages: Some(vec!["search".into(), "fetch".into(), "analyze".into()]),
        ..RunOptions::default()
    };
    run_pipeline_with(&config, &backends, &opts).unwrap();

    let run_dir = run_dir_for(&config, &tmp.path().join("out"));
    let analyses: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run_dir.join("analyze/analyses.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(analyses.as_array().unwrap().len(), 11);
    let exclusions: Vec<String> = serde_json::from_str(
        &std::fs::read_to_string(run_dir.join("analyze/exclusions.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(exclusions.len(), 1);
    assert!(exclusions[0].contains("empty_content"), "{exclusions:?}");
}

/// Minimal XML well-formedness check: prolog allowed, every element
/// closed in order, attributes quoted, no stray `<` or `&`.
fn assert_well_formed_xml(body: &str, name: &str) {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = body.trim_start();
    if let Some(after) = rest.strip_prefix("<?xml") {
        rest = &after[after.find("?>").expect("prolog closed") + 2..];
    }
    let mut pos = 0;
    let bytes = rest.as_bytes();
    while pos < rest.len() {
        match bytes[pos] {
            b'<' => {
                let close = rest[pos..].find('>').unwrap_or_else(|| panic!("{name}: unclosed tag")) + pos;
                let inner = &rest[pos + 1..close];
                if let Some(tag) = inner.strip_prefix('/') {
                    let open = stack.pop().unwrap_or_else(|| panic!("{name}: closing {tag} with empty stack"));
                    assert_eq!(open, tag, "{name}: mismatched close");
                } else if !inner.ends_with('/') && !inner.starts_with('!') {
                    let tag: String = inner.split_whitespace().next().unwrap().to_string();
                    stack.push(tag);
                }
                // attribute quoting: an even number of quotes per tag
                assert_eq!(inner.matches('"').count() % 2, 0, "{name}: unbalanced quotes in <{inner}>");
                pos = close + 1;
            }
            b'&' => {
                let entity_end = rest[pos..].find(';').map(|e| e <= 8).unwrap_or(false);
                assert!(entity_end, "{name}: bare ampersand at byte {pos}");
                pos += 1;
            }
            _ => pos += 1,
        }
    }
    assert!(stack.is_empty(), "{name}: unclosed elements {stack:?}");
}

#[test]
fn report_artifacts_are_well_formed() {
    let config = mini_config();
    let tmp = tempfile::tempdir().unwrap();
    let (backends, _) = counting_backends(&config);
    let opts = RunOptions {
        out_dir: tmp.path().to_path_buf(),
        ..RunOptions::default()
    };
    run_pipeline_with(&config, &backends, &opts).unwrap();
    let report = run_dir_for(&config, tmp.path()).join("report");

    let mut svg_count = 0;
    for entry in std::fs::read_dir(report.join("plots")).unwrap() {
        let path = entry.unwrap().path();
        let body = std::fs::read_to_string(&path).unwrap();
        assert_well_formed_xml(&body, &path.display().to_string());
        svg_count += 1;
    }
    assert!(svg_count >= 2, "expected at least two plots, found {svg_count}");

    let mut csv_count = 0;
    for entry in std::fs::read_dir(report.join("tables")).unwrap() {
        let path = entry.unwrap().path();
        let body = std::fs::read_to_string(&path).unwrap();
        let mut widths = body.lines().map(|l| l.split(',').count());
        let header = widths.next().unwrap();
        assert!(
            widths.all(|w| w == header),
            "{}: ragged rows",
            path.display()
        );
        csv_count += 1;
    }
    assert!(csv_count >= 2, "expected at least two tables, found {csv_count}");
}

// ---------------------------------------------------------------------------
// CLI contract
// ---------------------------------------------------------------------------

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_newstrend"))
}

#[test]
fn cli_full_run_exits_zero_and_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli()
        .current_dir(repo_root())
        .args(["run", "--config", "configs/mini.toml", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let config = mini_config();
    assert!(run_dir_for(&config, tmp.path()).join("report/manifest.json").exists());
}

#[test]
fn cli_stage_verbs_compose_into_a_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    for verb in ["search", "fetch", "analyze", "aggregate", "stats", "fit", "report"] {
        let out = cli()
            .current_dir(repo_root())
            .args([verb, "--config", "configs/mini.toml", "--out"])
            .arg(tmp.path())
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{verb} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let config = mini_config();
    assert!(run_dir_for(&config, tmp.path()).join("report/summary.md").exists());
}

#[test]
fn cli_stage_with_missing_inputs_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli()
        .current_dir(repo_root())
        .args(["stats", "--config", "configs/mini.toml", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("analyze"), "stderr should name the prerequisite: {stderr}");
}

#[test]
fn cli_config_errors_exit_two() {
    // missing config flag
    let out = cli().arg("run").output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // unreadable config path
    let out = cli()
        .args(["run", "--config", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // config with an unknown key
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    let body = std::fs::read_to_string(repo_root().join("configs/mini.toml"))
        .unwrap()
        .replace("query =", "quer =");
    std::fs::write(&bad, body).unwrap();
    let out = cli().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("quer"));
}

#[test]
fn cli_missing_fixture_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    // a config pointing at an empty fixtures directory
    std::fs::create_dir_all(tmp.path().join("fixtures")).unwrap();
    let body = std::fs::read_to_string(repo_root().join("configs/mini.toml"))
        .unwrap()
        .replace("fixtures_dir = \"../fixtures\"", "fixtures_dir = \"fixtures\"")
        .replace(
            "templates_dir = \"../templates\"",
            &format!(
                "templates_dir = \"{}\"",
                repo_root().join("templates").canonicalize().unwrap().display()
            ),
        );
    let config_path = tmp.path().join("empty.toml");
    std::fs::write(&config_path, body).unwrap();
    let out = cli()
        .args(["run", "--config"])
        .arg(&config_path)
        .args(["--out"])
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(4),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}
