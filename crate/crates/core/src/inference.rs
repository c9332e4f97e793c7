//! Posterior over `(center, lambda)` and its Metropolis-within-Gibbs sampler.
//!
//! Each iteration updates the center, then the spread:
//!
//! 1. propose `center' ~ Mallows(center, lambda)` by exact sampling and
//!    accept with the Metropolis-Hastings ratio. The proposal density
//!    `exp(-d/lambda) / psi(center, lambda)` is symmetric in `d` but not in
//!    `psi` when the two centers have different bucket compositions, so the
//!    ratio carries `psi(center) / psi(center')`;
//! 2. propose `lambda'` from a normal around `lambda` truncated to
//!    `(0, inf)`, with the truncation correction `Phi(lambda/s) / Phi(lambda'/s)`.
//!
//! The MAP estimate is the retained sample with the largest log-posterior.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mallows::{check_lambda, MallowsParams, PartitionCache, Sampler};
use crate::rankings::{complete_counts, CentralRanking, DistanceConfig, PartialRanking};

/// How a censored observation is normalized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LikelihoodNormalization {
    /// Each respondent is normalized over `{1..l}^r` for its `r` observed items.
    #[default]
    Restricted,
    /// Dropped-pair distance with the full-space partition function.
    Global,
}

/// Normal distribution truncated to `(0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormal {
    pub location: f64,
    pub scale: f64,
}

impl Default for TruncatedNormal {
    fn default() -> Self {
        TruncatedNormal {
            location: 0.0,
            scale: 1.0,
        }
    }
}

impl TruncatedNormal {
    pub fn new(location: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && location.is_finite()) {
            return Err(Error::domain(format!(
                "truncated normal needs finite location and positive scale, got ({location}, {scale})"
            )));
        }
        Ok(TruncatedNormal { location, scale })
    }

    /// Log density on `(0, inf)`; `-inf` elsewhere.
    pub fn log_density(&self, x: f64) -> f64 {
        if x <= 0.0 || !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        let z = (x - self.location) / self.scale;
        let mass = ln_std_normal_cdf(self.location / self.scale);
        -0.5 * z * z - (self.scale * (2.0 * std::f64::consts::PI).sqrt()).ln() - mass
    }
}

pub(crate) fn ln_std_normal_cdf(z: f64) -> f64 {
    (0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)).ln()
}

/// Spread used by the Mallows prior on the center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CenterPriorSpread {
    /// The current `lambda` of the chain.
    Coupled,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    pub lambda_prior: TruncatedNormal,
    /// Center of the Mallows prior on the central ranking.
    pub center: CentralRanking,
    pub spread: CenterPriorSpread,
}

impl PriorConfig {
    /// Truncated standard normal on `lambda`, coupled Mallows prior on the center.
    pub fn new(center: CentralRanking) -> Self {
        PriorConfig {
            lambda_prior: TruncatedNormal::default(),
            center,
            spread: CenterPriorSpread::Coupled,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    /// Total iterations, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub lambda_init: f64,
    /// Standard deviation of the `lambda` proposal; 0 keeps `lambda` at `lambda_init`.
    pub lambda_proposal_scale: f64,
    pub seed: u64,
    pub normalization: LikelihoodNormalization,
    /// Starting center; the prior center when `None`.
    pub init_center: Option<CentralRanking>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 1500,
            burn_in: 500,
            thinning: 1,
            lambda_init: 1.0,
            lambda_proposal_scale: 0.1,
            seed: 0,
            normalization: LikelihoodNormalization::Restricted,
            init_center: None,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.thinning == 0 {
            return Err(Error::domain("iterations and thinning must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::domain(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        check_lambda(self.lambda_init)?;
        if !(self.lambda_proposal_scale >= 0.0 && self.lambda_proposal_scale.is_finite()) {
            return Err(Error::domain("lambda proposal scale must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.iterations.saturating_sub(self.burn_in) / self.thinning
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub iteration: usize,
    pub center: CentralRanking,
    pub lambda: f64,
    pub log_posterior: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcTrace {
    pub samples: Vec<Sample>,
    /// Fraction of accepted center proposals.
    pub center_acceptance: f64,
    /// Fraction of accepted spread proposals; 0 when the spread is held fixed.
    pub lambda_acceptance: f64,
}

/// Per-item posterior stage frequencies, `n` rows of `l` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMarginals {
    pub n: usize,
    pub l: usize,
    pub frequencies: Vec<Vec<f64>>,
}

impl StageMarginals {
    pub fn row(&self, item: usize) -> &[f64] {
        &self.frequencies[item]
    }

    /// Most frequent stage (1-based) per item, lowest stage on ties.
    pub fn modes(&self) -> Vec<u8> {
        self.frequencies
            .iter()
            .map(|row| {
                let mut best = 0;
                for (s, &f) in row.iter().enumerate() {
                    if f > row[best] {
                        best = s;
                    }
                }
                best as u8 + 1
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub center_map: CentralRanking,
    pub lambda_map: f64,
    pub trace: McmcTrace,
    pub marginals: StageMarginals,
}

/// Respondents sharing one observed-item set.
#[derive(Debug)]
struct MaskGroup {
    observed: Vec<usize>,
    /// Observed stages of each respondent, aligned with `observed`.
    rows: Vec<Vec<u8>>,
}

/// The data side of the posterior, grouped for repeated evaluation.
#[derive(Debug)]
pub(crate) struct Likelihood {
    n: usize,
    l: usize,
    groups: Vec<MaskGroup>,
    mode: LikelihoodNormalization,
}

impl Likelihood {
    pub(crate) fn new(
        data: &[PartialRanking],
        mode: LikelihoodNormalization,
        cache: &PartitionCache,
    ) -> Result<Self> {
        let first = data
            .first()
            .ok_or_else(|| Error::domain("dataset contains no respondents"))?;
        let n = first.stages().len();
        let domain = first.domain();
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut groups: Vec<MaskGroup> = Vec::new();
        for (m, x) in data.iter().enumerate() {
            if x.stages().len() != n || x.domain() != domain {
                return Err(Error::domain(format!(
                    "respondent {m} does not share the item set or stage domain of respondent 0"
                )));
            }
            let observed = x.observed();
            if observed.is_empty() {
                return Err(Error::domain(format!("respondent {m} has no observed items")));
            }
            let row = x.observed_stages(&observed);
            let g = *index.entry(observed.clone()).or_insert_with(|| {
                groups.push(MaskGroup {
                    observed,
                    rows: Vec::new(),
                });
                groups.len() - 1
            });
            groups[g].rows.push(row);
        }
        let l = domain.l();
        let guard_n = match mode {
            LikelihoodNormalization::Restricted => {
                groups.iter().map(|g| g.observed.len()).max().unwrap_or(0)
            }
            LikelihoodNormalization::Global => n,
        };
        crate::mallows::check_guard(guard_n, l, cache.guard())?;
        Ok(Likelihood { n, l, groups, mode })
    }

    pub(crate) fn log_likelihood(
        &self,
        center: &CentralRanking,
        lambda: f64,
        cfg: DistanceConfig,
        cache: &PartitionCache,
    ) -> Result<f64> {
        if center.n() != self.n || center.domain().l() != self.l {
            return Err(Error::domain(
                "center does not match the dataset's item count or stage domain",
            ));
        }
        check_lambda(lambda)?;
        let global_log_psi = match self.mode {
            LikelihoodNormalization::Global => {
                Some(cache.log_psi_for_stages(center.stages(), self.l, lambda, cfg)?)
            }
            LikelihoodNormalization::Restricted => None,
        };
        let mut total = 0.0;
        for group in &self.groups {
            let restricted: Vec<u8> = group.observed.iter().map(|&i| center.stages()[i]).collect();
            let log_psi = match global_log_psi {
                Some(v) => v,
                None => cache.log_psi_for_stages(&restricted, self.l, lambda, cfg)?,
            };
            let mut distance_sum = 0.0;
            for row in &group.rows {
                let (d, e) = complete_counts(row, &restricted);
                distance_sum += d as f64 + cfg.p() * e as f64;
            }
            total += -distance_sum / lambda - group.rows.len() as f64 * log_psi;
        }
        Ok(total)
    }
}

/// `sum_m log f(X_m | center, lambda)`.
pub fn log_likelihood(
    data: &[PartialRanking],
    params: &MallowsParams,
    cfg: DistanceConfig,
    cache: &PartitionCache,
    mode: LikelihoodNormalization,
) -> Result<f64> {
    Likelihood::new(data, mode, cache)?.log_likelihood(&params.center, params.lambda, cfg, cache)
}

/// The two prior terms, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorTerms {
    pub lambda: f64,
    pub center: f64,
}

impl PriorTerms {
    pub fn total(&self) -> f64 {
        self.lambda + self.center
    }
}

pub fn prior_terms(
    center: &CentralRanking,
    lambda: f64,
    prior: &PriorConfig,
    cfg: DistanceConfig,
    cache: &PartitionCache,
) -> Result<PriorTerms> {
    let lambda_term = prior.lambda_prior.log_density(lambda);
    if lambda_term == f64::NEG_INFINITY {
        return Ok(PriorTerms {
            lambda: lambda_term,
            center: f64::NEG_INFINITY,
        });
    }
    let spread = match prior.spread {
        CenterPriorSpread::Coupled => lambda,
        CenterPriorSpread::Fixed(s) => s,
    };
    let prior_center = &prior.center;
    if prior_center.n() != center.n() || prior_center.domain() != center.domain() {
        return Err(Error::domain(
            "prior center does not match the center's item count or stage domain",
        ));
    }
    let log_psi = cache.log_psi_for_stages(prior_center.stages(), prior_center.domain().l(), spread, cfg)?;
    let (d, e) = complete_counts(center.stages(), prior_center.stages());
    let distance = d as f64 + cfg.p() * e as f64;
    Ok(PriorTerms {
        lambda: lambda_term,
        center: -distance / spread - log_psi,
    })
}

/// Truncated-normal log density of `lambda` plus the Mallows log-pmf of the
/// center under the prior center. `lambda <= 0` yields `-inf`.
pub fn log_prior(
    params: &MallowsParams,
    prior: &PriorConfig,
    cfg: DistanceConfig,
    cache: &PartitionCache,
) -> Result<f64> {
    Ok(prior_terms(&params.center, params.lambda, prior, cfg, cache)?.total())
}

/// Unnormalized log-posterior: log-likelihood plus log-prior.
pub fn log_posterior(
    data: &[PartialRanking],
    params: &MallowsParams,
    prior: &PriorConfig,
    cfg: DistanceConfig,
    cache: &PartitionCache,
    mode: LikelihoodNormalization,
) -> Result<f64> {
    let lik = log_likelihood(data, params, cfg, cache, mode)?;
    Ok(lik + log_prior(params, prior, cfg, cache)?)
}

struct Posterior<'a> {
    likelihood: Likelihood,
    prior: &'a PriorConfig,
    cfg: DistanceConfig,
    cache: &'a PartitionCache,
}

impl Posterior<'_> {
    fn eval(&self, center: &CentralRanking, lambda: f64) -> Result<f64> {
        if lambda.is_nan() || lambda <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let prior = prior_terms(center, lambda, self.prior, self.cfg, self.cache)?;
        let lik = self.likelihood.log_likelihood(center, lambda, self.cfg, self.cache)?;
        Ok(lik + prior.total())
    }
}

/// Runs the chain and extracts the MAP estimate and stage marginals.
pub fn mcmc_fit(
    data: &[PartialRanking],
    prior: &PriorConfig,
    mcmc: &McmcConfig,
    cfg: DistanceConfig,
    cache: &PartitionCache,
) -> Result<FitResult> {
    mcmc.validate()?;
    if let CenterPriorSpread::Fixed(s) = prior.spread {
        check_lambda(s)?;
    }
    let posterior = Posterior {
        likelihood: Likelihood::new(data, mcmc.normalization, cache)?,
        prior,
        cfg,
        cache,
    };
    let mut center = mcmc.init_center.clone().unwrap_or_else(|| prior.center.clone());
    if center.n() != posterior.likelihood.n || center.domain() != prior.center.domain() {
        return Err(Error::domain(
            "initial center does not match the dataset's item count or stage domain",
        ));
    }
    let mut lambda = mcmc.lambda_init;
    let l = center.domain().l();

    let init_prior = prior_terms(&center, lambda, prior, cfg, cache)?;
    let init_lik = posterior.likelihood.log_likelihood(&center, lambda, cfg, cache)?;
    for (term, value) in [
        ("log-likelihood", init_lik),
        ("lambda prior", init_prior.lambda),
        ("center prior", init_prior.center),
    ] {
        if !value.is_finite() {
            return Err(Error::Initialization { term, value });
        }
    }
    let mut log_post = init_lik + init_prior.total();

    let mut rng = ChaCha8Rng::seed_from_u64(mcmc.seed);
    let scale = mcmc.lambda_proposal_scale;
    let mut samples = Vec::with_capacity(mcmc.retained());
    let (mut center_accepts, mut lambda_accepts) = (0usize, 0usize);

    for t in 1..=mcmc.iterations {
        let proposal_params = MallowsParams {
            center: center.clone(),
            lambda,
        };
        let proposed = Sampler::new(&proposal_params, cfg, cache)?.draw(&mut rng);
        let proposed_lp = posterior.eval(&proposed, lambda)?;
        let hastings = cache.log_psi_for_stages(center.stages(), l, lambda, cfg)?
            - cache.log_psi_for_stages(proposed.stages(), l, lambda, cfg)?;
        let u: f64 = rng.random();
        if u.ln() < proposed_lp - log_post + hastings {
            center = proposed;
            log_post = proposed_lp;
            center_accepts += 1;
        }

        if scale > 0.0 {
            let proposed_lambda = loop {
                let z: f64 = rng.sample(StandardNormal);
                let candidate = lambda + scale * z;
                if candidate > 0.0 {
                    break candidate;
                }
            };
            let proposed_lp = posterior.eval(&center, proposed_lambda)?;
            let hastings =
                ln_std_normal_cdf(lambda / scale) - ln_std_normal_cdf(proposed_lambda / scale);
            let u: f64 = rng.random();
            if u.ln() < proposed_lp - log_post + hastings {
                lambda = proposed_lambda;
                log_post = proposed_lp;
                lambda_accepts += 1;
            }
        }

        if t > mcmc.burn_in && (t - mcmc.burn_in).is_multiple_of(mcmc.thinning) {
            samples.push(Sample {
                iteration: t,
                center: center.clone(),
                lambda,
                log_posterior: log_post,
            });
        }
    }

    let iterations = mcmc.iterations as f64;
    let trace = McmcTrace {
        samples,
        center_acceptance: center_accepts as f64 / iterations,
        lambda_acceptance: if scale > 0.0 {
            lambda_accepts as f64 / iterations
        } else {
            0.0
        },
    };
    let (center_map, lambda_map) = map_estimate(&trace)?;
    let marginals = stage_marginals(&trace)?;
    Ok(FitResult {
        center_map,
        lambda_map,
        trace,
        marginals,
    })
}

/// The sample with the largest stored log-posterior, earliest on ties.
pub fn map_estimate(trace: &McmcTrace) -> Result<(CentralRanking, f64)> {
    let mut best: Option<&Sample> = None;
    for s in &trace.samples {
        if best.is_none_or(|b| s.log_posterior > b.log_posterior) {
            best = Some(s);
        }
    }
    best.map(|s| (s.center.clone(), s.lambda))
        .ok_or_else(|| Error::domain("trace contains no samples"))
}

pub fn stage_marginals(trace: &McmcTrace) -> Result<StageMarginals> {
    let first = trace
        .samples
        .first()
        .ok_or_else(|| Error::domain("trace contains no samples"))?;
    let n = first.center.n();
    let l = first.center.domain().l();
    let mut counts = vec![vec![0usize; l]; n];
    for s in &trace.samples {
        for (i, &stage) in s.center.stages().iter().enumerate() {
            counts[i][stage as usize - 1] += 1;
        }
    }
    let total = trace.samples.len() as f64;
    let frequencies = counts
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / total).collect())
        .collect();
    Ok(StageMarginals { n, l, frequencies })
}
