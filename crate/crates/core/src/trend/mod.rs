//! Bayesian linear trend model `y ~ Normal(alpha + beta * t, sigma)` with
//! an adaptive random-walk Metropolis sampler, convergence diagnostics,
//! and an exact conjugate posterior used as a verification oracle.
//!
//! The noise scale is sampled as `log sigma` with the Jacobian correction,
//! so every sigma draw is strictly positive. Proposal step sizes adapt
//! per coordinate during warmup toward the target acceptance rate and are
//! frozen afterwards, preserving detailed balance of the kept draws.

pub mod diagnostics;

pub use diagnostics::{diagnostics as param_diagnostics, ParamDiagnostics};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ScoreKind;
use crate::stats::{quantile, ScoreTable};

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Error, PartialEq)]
pub enum TrendError {
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("degenerate data: need at least 2 points with 2 distinct t values")]
    DegenerateData,
    #[error("singular posterior precision matrix")]
    SingularPrecision,
    #[error("need at least 2 chains with 4 post-warmup draws each")]
    InsufficientDraws,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Which slice of the corpus a trend fit covers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceScope {
    Pooled,
    Source(String),
}

impl std::fmt::Display for SourceScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SourceScope::Pooled => f.write_str("pooled"),
            SourceScope::Source(s) => write!(f, "{s}"),
        }
    }
}

/// Observations for one regression: `(t, y)` pairs for one candidate,
/// score kind, and source scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendData {
    pub points: Vec<(f64, f64)>,
    pub candidate: String,
    pub kind: ScoreKind,
    pub scope: SourceScope,
}

impl TrendData {
    /// Slices a score table into regression data, with `t` the period
    /// index.
    pub fn from_table(
        table: &ScoreTable,
        candidate: &str,
        kind: ScoreKind,
        scope: SourceScope,
    ) -> Self {
        let points = table
            .observations
            .iter()
            .filter(|o| {
                o.candidate == candidate
                    && o.kind == kind
                    && match &scope {
                        SourceScope::Pooled => true,
                        SourceScope::Source(s) => &o.source == s,
                    }
            })
            .map(|o| (o.period_index as f64, o.value))
            .collect();
        Self {
            points,
            candidate: candidate.to_string(),
            kind,
            scope,
        }
    }

    pub fn validate(&self) -> Result<(), TrendError> {
        if self.points.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
            return Err(TrendError::NonFiniteInput);
        }
        if self.points.len() < 2 {
            return Err(TrendError::DegenerateData);
        }
        let t0 = self.points[0].0;
        if self.points.iter().all(|(t, _)| *t == t0) {
            return Err(TrendError::DegenerateData);
        }
        Ok(())
    }

    /// Sorted distinct `t` values, for band evaluation.
    pub fn distinct_ts(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.points.iter().map(|(t, _)| *t).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalPrior {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfNormalPrior {
    pub sd: f64,
}

/// Priors for (alpha, beta, sigma). Defaults are weakly informative on
/// the unit score scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub alpha: NormalPrior,
    pub beta: NormalPrior,
    pub sigma: HalfNormalPrior,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            alpha: NormalPrior { mean: 0.5, sd: 1.0 },
            beta: NormalPrior { mean: 0.0, sd: 1.0 },
            sigma: HalfNormalPrior { sd: 1.0 },
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<(), TrendError> {
        if self.alpha.sd <= 0.0 || self.beta.sd <= 0.0 || self.sigma.sd <= 0.0 {
            return Err(TrendError::InvalidConfig("prior sds must be > 0".into()));
        }
        if ![self.alpha.mean, self.alpha.sd, self.beta.mean, self.beta.sd, self.sigma.sd]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(TrendError::NonFiniteInput);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub chains: usize,
    pub iterations: usize,
    pub warmup: usize,
    pub seed: u64,
    pub initial_step: f64,
    pub target_accept: f64,
    /// When set, sigma is held at this value and only (alpha, beta) are
    /// sampled — the known-noise conjugate case used for oracle checks.
    #[serde(default)]
    pub fixed_sigma: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            iterations: 5000,
            warmup: 2500,
            seed: 0,
            initial_step: 0.1,
            target_accept: 0.3,
            fixed_sigma: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), TrendError> {
        if self.chains < 2 {
            return Err(TrendError::InvalidConfig("need at least 2 chains".into()));
        }
        if self.warmup >= self.iterations {
            return Err(TrendError::InvalidConfig("warmup must be < iterations".into()));
        }
        if !(self.initial_step > 0.0) {
            return Err(TrendError::InvalidConfig("initial_step must be > 0".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(TrendError::InvalidConfig("target_accept must be in (0,1)".into()));
        }
        if let Some(s) = self.fixed_sigma {
            if !(s > 0.0) || !s.is_finite() {
                return Err(TrendError::InvalidConfig("fixed_sigma must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Post-warmup draws of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Alpha,
    Beta,
    Sigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub alpha: ParamDiagnostics,
    pub beta: ParamDiagnostics,
    pub sigma: ParamDiagnostics,
}

/// MCMC draws with chain metadata and convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub chains: Vec<ChainDraws>,
    pub diagnostics: Diagnostics,
    pub acceptance_rate: f64,
    pub config: SamplerConfig,
}

impl PosteriorSamples {
    pub fn per_chain(&self, param: Param) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| match param {
                Param::Alpha => c.alpha.clone(),
                Param::Beta => c.beta.clone(),
                Param::Sigma => c.sigma.clone(),
            })
            .collect()
    }

    pub fn draws(&self, param: Param) -> Vec<f64> {
        self.per_chain(param).into_iter().flatten().collect()
    }

    pub fn mean(&self, param: Param) -> f64 {
        let d = self.draws(param);
        d.iter().sum::<f64>() / d.len() as f64
    }

    pub fn sd(&self, param: Param) -> f64 {
        let d = self.draws(param);
        let m = d.iter().sum::<f64>() / d.len() as f64;
        (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt()
    }

    pub fn diagnostics_for(&self, param: Param) -> ParamDiagnostics {
        match param {
            Param::Alpha => self.diagnostics.alpha,
            Param::Beta => self.diagnostics.beta,
            Param::Sigma => self.diagnostics.sigma,
        }
    }

    /// Monte-Carlo standard error of the posterior mean.
    pub fn mcse_mean(&self, param: Param) -> f64 {
        self.sd(param) / self.diagnostics_for(param).ess.max(1.0).sqrt()
    }
}

/// Pointwise credible interval of the regression line at one `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub t: f64,
    pub lower: f64,
    pub upper: f64,
}

/// A fitted trend: posterior draws plus the summaries the plots need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub candidate: String,
    pub kind: ScoreKind,
    pub scope: SourceScope,
    pub posterior: PosteriorSamples,
    /// Posterior means (alpha_hat, beta_hat).
    pub mean_line: (f64, f64),
    /// 5%/95% draw quantiles of `alpha + beta * t` at each data `t`.
    pub credible_band: Vec<BandPoint>,
    pub prob_beta_positive: f64,
}

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

fn log_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    -0.5 * LN_2PI - sd.ln() - (x - mean).powi(2) / (2.0 * sd * sd)
}

fn log_half_normal_pdf(x: f64, sd: f64) -> f64 {
    // support x >= 0
    0.5 * (2.0 / std::f64::consts::PI).ln() - sd.ln() - x * x / (2.0 * sd * sd)
}

/// Sufficient statistics for O(1) likelihood evaluation.
struct DataSums {
    n: f64,
    st: f64,
    stt: f64,
    sy: f64,
    sty: f64,
    syy: f64,
}

impl DataSums {
    fn of(data: &TrendData) -> Self {
        let mut s = DataSums {
            n: 0.0,
            st: 0.0,
            stt: 0.0,
            sy: 0.0,
            sty: 0.0,
            syy: 0.0,
        };
        for (t, y) in &data.points {
            s.n += 1.0;
            s.st += t;
            s.stt += t * t;
            s.sy += y;
            s.sty += t * y;
            s.syy += y * y;
        }
        s
    }

    /// Residual sum of squares at (alpha, beta).
    fn rss(&self, alpha: f64, beta: f64) -> f64 {
        (self.syy + alpha * alpha * self.n + beta * beta * self.stt
            - 2.0 * alpha * self.sy
            - 2.0 * beta * self.sty
            + 2.0 * alpha * beta * self.st)
            .max(0.0)
    }
}

/// Gaussian log-likelihood of the data at (alpha, beta, sigma), written
/// in `u = ln sigma` for stability at extreme scales.
fn log_likelihood_u(sums: &DataSums, alpha: f64, beta: f64, u: f64) -> f64 {
    let rss = sums.rss(alpha, beta);
    let quad = if rss == 0.0 { 0.0 } else { -0.5 * (-2.0 * u).exp() * rss };
    -0.5 * sums.n * LN_2PI - sums.n * u + quad
}

/// Log posterior density of `(alpha, beta, sigma)` in the log-sigma
/// parametrization: Gaussian likelihood plus the three log priors plus
/// the log-Jacobian `ln sigma` of the transform.
///
/// Returns `NonFiniteInput` for non-finite inputs or `sigma <= 0`. The
/// value itself may be `-inf` when the density underflows.
pub fn log_posterior(
    alpha: f64,
    beta: f64,
    sigma: f64,
    data: &TrendData,
    priors: &PriorConfig,
) -> Result<f64, TrendError> {
    if !alpha.is_finite() || !beta.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
        return Err(TrendError::NonFiniteInput);
    }
    priors.validate()?;
    if data.points.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
        return Err(TrendError::NonFiniteInput);
    }
    let sums = DataSums::of(data);
    let u = sigma.ln();
    Ok(log_likelihood_u(&sums, alpha, beta, u)
        + log_normal_pdf(alpha, priors.alpha.mean, priors.alpha.sd)
        + log_normal_pdf(beta, priors.beta.mean, priors.beta.sd)
        + log_half_normal_pdf(sigma, priors.sigma.sd)
        + u)
}

// ---------------------------------------------------------------------------
// Ordinary least squares (initialization and test oracle)
// ---------------------------------------------------------------------------

/// Closed-form least-squares estimate `(alpha_hat, beta_hat)`.
pub fn ols(data: &TrendData) -> Result<(f64, f64), TrendError> {
    data.validate()?;
    let n = data.points.len() as f64;
    let mt = data.points.iter().map(|(t, _)| t).sum::<f64>() / n;
    let my = data.points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = data.points.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    let sxy: f64 = data.points.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let beta = sxy / sxx;
    Ok((my - beta * mt, beta))
}

fn residual_sd(data: &TrendData, alpha: f64, beta: f64) -> f64 {
    let n = data.points.len();
    let rss: f64 = data
        .points
        .iter()
        .map(|(t, y)| (y - alpha - beta * t).powi(2))
        .sum();
    if n > 2 {
        (rss / (n - 2) as f64).sqrt()
    } else {
        rss.sqrt()
    }
}

// ---------------------------------------------------------------------------
// Conjugate oracle
// ---------------------------------------------------------------------------

/// Exact bivariate Gaussian posterior over (alpha, beta) for known sigma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugatePosterior {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl ConjugatePosterior {
    pub fn alpha_sd(&self) -> f64 {
        self.cov[0][0].sqrt()
    }
    pub fn beta_sd(&self) -> f64 {
        self.cov[1][1].sqrt()
    }
}

/// Closed-form posterior for the linear model with known noise scale and
/// independent Gaussian priors on alpha and beta:
/// posterior precision = prior precision + X'X / sigma^2.
///
/// Data may be empty, in which case the posterior equals the prior.
pub fn conjugate_posterior(
    data: &TrendData,
    known_sigma: f64,
    alpha_prior: &NormalPrior,
    beta_prior: &NormalPrior,
) -> Result<ConjugatePosterior, TrendError> {
    if !(known_sigma > 0.0) || !known_sigma.is_finite() {
        return Err(TrendError::NonFiniteInput);
    }
    if alpha_prior.sd <= 0.0 || beta_prior.sd <= 0.0 {
        return Err(TrendError::InvalidConfig("prior sds must be > 0".into()));
    }
    if data.points.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
        return Err(TrendError::NonFiniteInput);
    }
    let s2 = known_sigma * known_sigma;
    let sums = DataSums::of(data);
    // precision matrix
    let p00 = 1.0 / (alpha_prior.sd * alpha_prior.sd) + sums.n / s2;
    let p01 = sums.st / s2;
    let p11 = 1.0 / (beta_prior.sd * beta_prior.sd) + sums.stt / s2;
    // precision-weighted mean vector
    let b0 = alpha_prior.mean / (alpha_prior.sd * alpha_prior.sd) + sums.sy / s2;
    let b1 = beta_prior.mean / (beta_prior.sd * beta_prior.sd) + sums.sty / s2;
    let det = p00 * p11 - p01 * p01;
    if !(det > 0.0) || !det.is_finite() {
        return Err(TrendError::SingularPrecision);
    }
    let cov = [[p11 / det, -p01 / det], [-p01 / det, p00 / det]];
    let mean = [cov[0][0] * b0 + cov[0][1] * b1, cov[1][0] * b0 + cov[1][1] * b1];
    Ok(ConjugatePosterior { mean, cov })
}

// ---------------------------------------------------------------------------
// Adaptive random-walk Metropolis
// ---------------------------------------------------------------------------

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add((chain as u64 + 1).wrapping_mul(0x9E3779B97F4A7C15)))
}

struct ChainOutput {
    draws: ChainDraws,
    accepted: u64,
    proposed: u64,
}

struct Target<'a> {
    sums: DataSums,
    priors: &'a PriorConfig,
    fixed_sigma: Option<f64>,
    /// Mean of the time covariate. The walk runs in the centered
    /// intercept `alpha_c = alpha + beta * t_mean`, which is nearly
    /// uncorrelated with the slope, so per-coordinate proposals mix
    /// well; draws are transformed back exactly (unit Jacobian).
    t_mean: f64,
}

impl Target<'_> {
    /// Log target density in (alpha_c, beta, u = ln sigma) space.
    fn log_density(&self, alpha_c: f64, beta: f64, u: f64) -> f64 {
        let alpha = alpha_c - beta * self.t_mean;
        let mut lp = log_likelihood_u(&self.sums, alpha, beta, u)
            + log_normal_pdf(alpha, self.priors.alpha.mean, self.priors.alpha.sd)
            + log_normal_pdf(beta, self.priors.beta.mean, self.priors.beta.sd);
        if self.fixed_sigma.is_none() {
            lp += log_half_normal_pdf(u.exp(), self.priors.sigma.sd) + u;
        }
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }
}

fn run_chain(
    target: &Target,
    init: (f64, f64, f64),
    config: &SamplerConfig,
    chain_index: usize,
) -> ChainOutput {
    let mut rng = chain_rng(config.seed, chain_index);
    let jitter = |rng: &mut ChaCha8Rng| 0.1 * rng.sample::<f64, _>(StandardNormal);

    let n_coords = if config.fixed_sigma.is_some() { 2 } else { 3 };
    let mut x = [
        init.0 + target.t_mean * init.1 + jitter(&mut rng),
        init.1 + jitter(&mut rng),
        match config.fixed_sigma {
            Some(s) => s.ln(),
            None => init.2.ln() + jitter(&mut rng),
        },
    ];
    let mut steps = [config.initial_step; 3];
    let mut lp = target.log_density(x[0], x[1], x[2]);

    // multiplicative step adaptation with fixed point at target_accept:
    // accept -> step *= exp(gain * (1 - target)), reject -> exp(-gain * target),
    // with a decaying gain so the frozen step converges to the scale that
    // attains the target acceptance
    let gain_at = |iter: usize| (iter as f64 + 1.0).powf(-0.6);

    let kept = config.iterations - config.warmup;
    let mut draws = ChainDraws {
        alpha: Vec::with_capacity(kept),
        beta: Vec::with_capacity(kept),
        sigma: Vec::with_capacity(kept),
    };
    let mut accepted = 0u64;
    let mut proposed = 0u64;

    for iter in 0..config.iterations {
        for coord in 0..n_coords {
            let old = x[coord];
            x[coord] = old + steps[coord] * rng.sample::<f64, _>(StandardNormal);
            let lp_new = target.log_density(x[0], x[1], x[2]);
            let accept = rng.gen::<f64>().ln() < lp_new - lp;
            if accept {
                lp = lp_new;
            } else {
                x[coord] = old;
            }
            if iter < config.warmup {
                let gain = gain_at(iter);
                steps[coord] *= if accept {
                    (gain * (1.0 - config.target_accept)).exp()
                } else {
                    (-gain * config.target_accept).exp()
                };
            } else {
                proposed += 1;
                accepted += u64::from(accept);
            }
        }
        if iter >= config.warmup {
            draws.alpha.push(x[0] - x[1] * target.t_mean);
            draws.beta.push(x[1]);
            // in fixed-sigma mode store the exact configured value rather
            // than exp(ln(sigma))
            draws.sigma.push(config.fixed_sigma.unwrap_or_else(|| x[2].exp()));
        }
    }
    ChainOutput {
        draws,
        accepted,
        proposed,
    }
}

/// Runs the adaptive random-walk Metropolis sampler: per-coordinate
/// Gaussian proposals in `(alpha, beta, log sigma)`, steps adapted during
/// warmup and frozen afterwards, chains initialized by jittering the
/// least-squares estimate. Fully reproducible for a given seed; chains
/// run in parallel, each with its own seed-derived random stream.
///
/// Non-convergence is not an error: diagnostics are attached for the
/// caller to inspect.
pub fn sample_posterior(
    data: &TrendData,
    priors: &PriorConfig,
    config: &SamplerConfig,
) -> Result<PosteriorSamples, TrendError> {
    data.validate()?;
    priors.validate()?;
    config.validate()?;

    let (alpha0, beta0) = ols(data)?;
    let sigma0 = residual_sd(data, alpha0, beta0).max(0.05);
    let sums = DataSums::of(data);
    let target = Target {
        t_mean: sums.st / sums.n,
        sums,
        priors,
        fixed_sigma: config.fixed_sigma,
    };

    let mut outputs: Vec<Option<ChainOutput>> = Vec::new();
    outputs.resize_with(config.chains, || None);
    std::thread::scope(|scope| {
        for (idx, slot) in outputs.iter_mut().enumerate() {
            let target = &target;
            scope.spawn(move || {
                *slot = Some(run_chain(target, (alpha0, beta0, sigma0), config, idx));
            });
        }
    });
    let outputs: Vec<ChainOutput> = outputs.into_iter().map(|o| o.expect("chain ran")).collect();

    let chains: Vec<ChainDraws> = outputs.iter().map(|o| o.draws.clone()).collect();
    let accepted: u64 = outputs.iter().map(|o| o.accepted).sum();
    let proposed: u64 = outputs.iter().map(|o| o.proposed).sum();

    let collect = |f: fn(&ChainDraws) -> &Vec<f64>| -> Vec<Vec<f64>> {
        chains.iter().map(|c| f(c).clone()).collect()
    };
    let diagnostics = Diagnostics {
        alpha: diagnostics::diagnostics(&collect(|c| &c.alpha))?,
        beta: diagnostics::diagnostics(&collect(|c| &c.beta))?,
        sigma: diagnostics::diagnostics(&collect(|c| &c.sigma))?,
    };

    Ok(PosteriorSamples {
        chains,
        diagnostics,
        acceptance_rate: accepted as f64 / proposed.max(1) as f64,
        config: *config,
    })
}

/// Samples the posterior and derives the plotting summaries: posterior
/// mean line, pointwise 5%/95% credible band at the data's `t` values,
/// and the posterior probability of an upward slope.
pub fn fit_trend(
    data: &TrendData,
    priors: &PriorConfig,
    config: &SamplerConfig,
) -> Result<TrendFit, TrendError> {
    let posterior = sample_posterior(data, priors, config)?;
    let alpha_hat = posterior.mean(Param::Alpha);
    let beta_hat = posterior.mean(Param::Beta);
    let alphas = posterior.draws(Param::Alpha);
    let betas = posterior.draws(Param::Beta);

    let credible_band = data
        .distinct_ts()
        .iter()
        .map(|&t| {
            let line: Vec<f64> = alphas.iter().zip(&betas).map(|(a, b)| a + b * t).collect();
            BandPoint {
                t,
                lower: quantile(&line, 0.05).expect("draws non-empty"),
                upper: quantile(&line, 0.95).expect("draws non-empty"),
            }
        })
        .collect();

    let prob_beta_positive = betas.iter().filter(|b| **b > 0.0).count() as f64 / betas.len() as f64;

    Ok(TrendFit {
        candidate: data.candidate.clone(),
        kind: data.kind,
        scope: data.scope.clone(),
        posterior,
        mean_line: (alpha_hat, beta_hat),
        credible_band,
        prob_beta_positive,
    })
}

/// Writes posterior draws as CSV with header `chain,iteration,alpha,beta,sigma`.
pub fn write_draws_csv<W: std::io::Write>(
    samples: &PosteriorSamples,
    writer: W,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["chain", "iteration", "alpha", "beta", "sigma"])?;
    for (ci, chain) in samples.chains.iter().enumerate() {
        for i in 0..chain.alpha.len() {
            w.write_record([
                ci.to_string(),
                i.to_string(),
                chain.alpha[i].to_string(),
                chain.beta[i].to_string(),
                chain.sigma[i].to_string(),
            ])?;
        }
    }
    w.flush()
}

/// Flat summary of one fit, for JSON export and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFitSummary {
    pub candidate: String,
    pub kind: ScoreKind,
    pub scope: SourceScope,
    pub alpha_mean: f64,
    pub alpha_sd: f64,
    pub beta_mean: f64,
    pub beta_sd: f64,
    pub sigma_mean: f64,
    pub prob_beta_positive: f64,
    pub acceptance_rate: f64,
    pub diagnostics: Diagnostics,
    pub credible_band: Vec<BandPoint>,
}

impl From<&TrendFit> for TrendFitSummary {
    fn from(fit: &TrendFit) -> Self {
        Self {
            candidate: fit.candidate.clone(),
            kind: fit.kind,
            scope: fit.scope.clone(),
            alpha_mean: fit.mean_line.0,
            alpha_sd: fit.posterior.sd(Param::Alpha),
            beta_mean: fit.mean_line.1,
            beta_sd: fit.posterior.sd(Param::Beta),
            sigma_mean: fit.posterior.mean(Param::Sigma),
            prob_beta_positive: fit.prob_beta_positive,
            acceptance_rate: fit.posterior.acceptance_rate,
            diagnostics: fit.posterior.diagnostics,
            credible_band: fit.credible_band.clone(),
        }
    }
}
