//! Convergence diagnostics: split-R̂ from within/between chain variances
//! and effective sample size from autocorrelations truncated at the first
//! negative paired sum (Geyer's initial positive sequence), following the
//! formulas in the Stan reference manual.

use serde::{Deserialize, Serialize};

use super::TrendError;

/// R-hat and effective sample size for one scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub rhat: f64,
    pub ess: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Splits each chain into halves, dropping the middle draw of odd-length
/// chains, and trims all chains to a common length first.
fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n / 2;
    let mut out = Vec::with_capacity(chains.len() * 2);
    for chain in chains {
        out.push(chain[..half].to_vec());
        out.push(chain[n - half..n].to_vec());
    }
    out
}

/// Autocovariance at lag `t` with 1/n normalization.
fn autocovariance(xs: &[f64], lag: usize) -> f64 {
    let n = xs.len();
    let m = mean(xs);
    (0..n - lag).map(|i| (xs[i] - m) * (xs[i + lag] - m)).sum::<f64>() / n as f64
}

struct VarianceParts {
    within: f64,
    between: f64,
    var_plus: f64,
    n: usize,
}

fn variance_parts(split: &[Vec<f64>]) -> VarianceParts {
    let n = split[0].len();
    let chain_means: Vec<f64> = split.iter().map(|c| mean(c)).collect();
    let within = mean(&split.iter().map(|c| sample_variance(c)).collect::<Vec<_>>());
    let between = n as f64 * sample_variance(&chain_means);
    let var_plus = (n as f64 - 1.0) / n as f64 * within + between / n as f64;
    VarianceParts {
        within,
        between,
        var_plus,
        n,
    }
}

fn check_shape(chains: &[Vec<f64>]) -> Result<(), TrendError> {
    if chains.len() < 2 || chains.iter().any(|c| c.len() < 4) {
        return Err(TrendError::InsufficientDraws);
    }
    Ok(())
}

/// `Some(true)` when every chain is exactly constant at one shared
/// value, `Some(false)` when chains are constant at different values.
/// Detected by exact comparison so summation round-off cannot masquerade
/// as variance.
fn constant_chains(chains: &[Vec<f64>]) -> Option<bool> {
    for chain in chains {
        if chain.iter().any(|x| *x != chain[0]) {
            return None;
        }
    }
    Some(chains.iter().all(|c| c[0] == chains[0][0]))
}

/// Split potential scale reduction. Chains with zero variance everywhere
/// return 1 by convention.
pub fn rhat(chains: &[Vec<f64>]) -> Result<f64, TrendError> {
    check_shape(chains)?;
    // all-constant chains carry no mixing information
    match constant_chains(chains) {
        Some(true) => return Ok(1.0),
        Some(false) => return Ok(f64::INFINITY),
        None => {}
    }
    let split = split_chains(chains);
    let parts = variance_parts(&split);
    if parts.within == 0.0 {
        return Ok(if parts.between == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok((parts.var_plus / parts.within).sqrt())
}

/// Effective sample size over the split chains, truncating the
/// autocorrelation sum at the first negative pair
/// `rho(2k) + rho(2k+1)`. Capped at the total draw count; all-constant
/// chains return the total draw count by convention.
pub fn ess(chains: &[Vec<f64>]) -> Result<f64, TrendError> {
    check_shape(chains)?;
    let split = split_chains(chains);
    let parts = variance_parts(&split);
    let m = split.len();
    let n = parts.n;
    let total = (m * n) as f64;
    match constant_chains(chains) {
        Some(true) => return Ok(total),
        Some(false) => return Ok(0.0),
        None => {}
    }
    if parts.var_plus == 0.0 {
        return Ok(total);
    }
    if parts.within == 0.0 {
        return Ok(0.0);
    }

    let rho = |lag: usize| -> f64 {
        let mean_autocov = split.iter().map(|c| autocovariance(c, lag)).sum::<f64>() / m as f64;
        1.0 - (parts.within - mean_autocov) / parts.var_plus
    };

    let mut tau = 0.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair < 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    tau -= 1.0;
    Ok((total / tau.max(1e-12)).min(total))
}

/// R-hat and ESS for one parameter from its per-chain post-warmup draws.
pub fn diagnostics(chains: &[Vec<f64>]) -> Result<ParamDiagnostics, TrendError> {
    Ok(ParamDiagnostics {
        rhat: rhat(chains)?,
        ess: ess(chains)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn constant_identical_chains_use_unit_convention() {
        let chains = vec![vec![2.0; 50], vec![2.0; 50]];
        let d = diagnostics(&chains).unwrap();
        assert_eq!(d.rhat, 1.0);
        assert_eq!(d.ess, 100.0);
    }

    #[test]
    fn iid_chains_mix_cleanly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..1000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let d = diagnostics(&chains).unwrap();
        assert!(d.rhat >= 0.99 && d.rhat <= 1.02, "rhat = {}", d.rhat);
        assert!(d.ess > 1000.0, "ess = {}", d.ess);
    }

    #[test]
    fn separated_chains_fail_rhat() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut chains: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..500).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        for x in &mut chains[1] {
            *x += 10.0;
        }
        let r = rhat(&chains).unwrap();
        assert!(r > 2.0, "rhat = {r}");
    }

    #[test]
    fn autocorrelated_chain_has_reduced_ess() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0f64;
                (0..1000)
                    .map(|_| {
                        let e: f64 = rng.sample(StandardNormal);
                        x = 0.9 * x + e;
                        x
                    })
                    .collect()
            })
            .collect();
        let d = diagnostics(&chains).unwrap();
        // AR(1) with phi = 0.9 has tau ~ 19
        assert!(d.ess < 1000.0, "ess = {}", d.ess);
        assert!(d.ess > 50.0, "ess = {}", d.ess);
    }

    #[test]
    fn too_few_chains_or_draws_rejected() {
        assert_eq!(
            diagnostics(&[vec![1.0, 2.0, 3.0, 4.0]]).unwrap_err(),
            TrendError::InsufficientDraws
        );
        assert_eq!(
            diagnostics(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap_err(),
            TrendError::InsufficientDraws
        );
    }
}
