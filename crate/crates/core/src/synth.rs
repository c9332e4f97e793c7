//! Synthetic datasets drawn from a known Mallows model, with right censoring.
//!
//! A censored respondent loses every item from a random cut position onward,
//! items taken in stage order. The cut is drawn from
//! `Normal(location_factor * n, scale)`, rounded and clipped to `[1, n]`;
//! positions are 1-based, so a cut at 6 keeps the five earliest items.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mallows::{sample, MallowsParams, PartitionCache};
use crate::rankings::{CentralRanking, DistanceConfig, PartialRanking};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub truth: MallowsParams,
    /// Number of respondents.
    pub m: usize,
    /// Percentage of respondents to censor, in `[0, 100]`.
    pub missing_percent: f64,
    pub censor_location_factor: f64,
    pub censor_scale: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(truth: MallowsParams, m: usize, missing_percent: f64, seed: u64) -> Self {
        SynthConfig {
            truth,
            m,
            missing_percent,
            censor_location_factor: 0.75,
            censor_scale: 1.0,
            seed,
        }
    }

    pub fn censored_count(&self) -> usize {
        (self.missing_percent * self.m as f64 / 100.0).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub responses: Vec<PartialRanking>,
    /// The draws before censoring.
    pub uncensored: Vec<CentralRanking>,
    pub truth: MallowsParams,
    /// Indices of the censored respondents, ascending.
    pub censored: Vec<usize>,
}

pub fn generate(
    cfg: &SynthConfig,
    dist_cfg: DistanceConfig,
    cache: &PartitionCache,
) -> Result<SyntheticData> {
    if cfg.m == 0 {
        return Err(Error::domain("dataset size must be at least 1"));
    }
    if !(0.0..=100.0).contains(&cfg.missing_percent) {
        return Err(Error::domain(format!(
            "missing percentage must lie in [0, 100], got {}",
            cfg.missing_percent
        )));
    }
    let cut = Normal::new(
        cfg.censor_location_factor * cfg.truth.center.n() as f64,
        cfg.censor_scale,
    )
    .map_err(|e| Error::domain(format!("invalid censoring distribution: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let uncensored = sample(&cfg.truth, dist_cfg, cache, &mut rng, cfg.m)?;
    let mut censored = index::sample(&mut rng, cfg.m, cfg.censored_count()).into_vec();
    censored.sort_unstable();

    let mut responses: Vec<PartialRanking> = uncensored.iter().map(CentralRanking::as_partial).collect();
    let n = cfg.truth.center.n();
    for &m in &censored {
        let r = (cut.sample(&mut rng).round() as i64).clamp(1, n as i64) as usize;
        let keep = (r - 1).max(1);
        let x = &uncensored[m];
        let mut stages: Vec<Option<u8>> = x.stages().iter().map(|&s| Some(s)).collect();
        for &item in &x.stage_order()[keep..] {
            stages[item] = None;
        }
        responses[m] = PartialRanking::new(stages, x.domain())?;
    }

    Ok(SyntheticData {
        responses,
        uncensored,
        truth: cfg.truth.clone(),
        censored,
    })
}
