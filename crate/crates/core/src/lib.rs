//! Retrieves dated, source-filtered news, scores it with a two-level
//! LLM analysis, and fits Bayesian linear trends to the scores.

pub mod config;
pub mod extract;
pub mod llm;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod search;
pub mod stats;
mod svg;
pub mod trend;
pub mod util;
