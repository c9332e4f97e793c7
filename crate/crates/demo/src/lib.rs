//! In-browser explorers for the partial-ranking Mallows model.
//!
//! Three operations are exported through wasm-bindgen, each returning a JSON
//! string for `www/index.js` to draw:
//!
//! * [`distance`]: penalized Kendall distance between two stage vectors, pair by pair;
//! * [`mallows_pmf`]: the most probable rankings, mass by distance and a few
//!   exact draws for a center and spread;
//! * [`simulate_and_fit`]: draw a censored dataset, fit it by MCMC and return
//!   the item-by-stage heatmap.
//!
//! The `*_report` functions hold the logic and are plain Rust, so they are
//! tested natively.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use partial_mallows::inference::{mcmc_fit, McmcConfig, PriorConfig};
use partial_mallows::io::render_heatmap;
use partial_mallows::mallows::{
    check_guard, enumerate_space, log_partition_function, log_pmf, sample, MallowsParams, PartitionCache,
};
use partial_mallows::rankings::{
    classify_pair, kendall_tau_partial, CentralRanking, DistanceConfig, PairClass, PartialRanking, StageDomain,
};
use partial_mallows::synth::{generate, SynthConfig};

/// Largest ranking space the page will enumerate or fit over.
pub const DEMO_GUARD: u64 = 1 << 16;

type Result<T> = std::result::Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Parses "1,2,-,3": comma-separated stages, `-` or blank for unranked.
pub fn parse_stages(text: &str) -> Result<Vec<Option<u8>>> {
    text.split(',')
        .map(|s| match s.trim() {
            "" | "-" => Ok(None),
            t => t
                .parse::<u8>()
                .ok()
                .filter(|&v| v >= 1)
                .map(Some)
                .ok_or_else(|| format!("{t:?} is not a stage (1, 2, ... or - for unranked)")),
        })
        .collect()
}

fn parse_center(text: &str, l: usize) -> Result<CentralRanking> {
    let stages = parse_stages(text)?
        .into_iter()
        .map(|s| s.ok_or_else(|| "the center must rank every item".to_string()))
        .collect::<Result<Vec<u8>>>()?;
    CentralRanking::new(stages, StageDomain::new(l).map_err(err)?).map_err(err)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRow {
    pub i: usize,
    pub j: usize,
    pub class: &'static str,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub distance: f64,
    pub concordant: usize,
    pub discordant: usize,
    pub tied_both: usize,
    pub tied_one: usize,
    pub dropped: usize,
    pub pairs: Vec<PairRow>,
}

pub fn distance_report(a: &str, b: &str, p: f64) -> Result<DistanceReport> {
    let cfg = DistanceConfig::new(p).map_err(err)?;
    let (xa, xb) = (parse_stages(a)?, parse_stages(b)?);
    if xa.len() != xb.len() {
        return Err(format!("rankings have {} and {} items", xa.len(), xb.len()));
    }
    let l = xa.iter().chain(&xb).flatten().copied().max().unwrap_or(1);
    let domain = StageDomain::new(l as usize).map_err(err)?;
    let x = PartialRanking::new(xa, domain).map_err(err)?;
    let y = PartialRanking::new(xb, domain).map_err(err)?;
    let mut report = DistanceReport {
        distance: kendall_tau_partial(&x, &y, cfg).map_err(err)?,
        concordant: 0,
        discordant: 0,
        tied_both: 0,
        tied_one: 0,
        dropped: 0,
        pairs: Vec::new(),
    };
    let n = x.stages().len();
    for i in 0..n {
        for j in i + 1..n {
            let (class, contribution) = match classify_pair(&x, &y, i, j).map_err(err)? {
                PairClass::Concordant => {
                    report.concordant += 1;
                    ("concordant", 0.0)
                }
                PairClass::Discordant => {
                    report.discordant += 1;
                    ("discordant", 1.0)
                }
                PairClass::TiedBoth => {
                    report.tied_both += 1;
                    ("tied in both", 0.0)
                }
                PairClass::TiedOne => {
                    report.tied_one += 1;
                    ("tied in one", p)
                }
                PairClass::Dropped => {
                    report.dropped += 1;
                    ("dropped", 0.0)
                }
            };
            report.pairs.push(PairRow { i, j, class, contribution });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingMass {
    pub stages: Vec<u8>,
    pub distance: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceMass {
    pub distance: f64,
    pub rankings: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmfReport {
    pub log_partition: f64,
    pub space_size: usize,
    pub modal_mass: f64,
    pub top: Vec<RankingMass>,
    pub by_distance: Vec<DistanceMass>,
    pub samples: Vec<Vec<u8>>,
}

pub fn pmf_report(
    center: &str,
    l: usize,
    lambda: f64,
    p: f64,
    top_k: usize,
    samples: usize,
    seed: u64,
) -> Result<PmfReport> {
    let cfg = DistanceConfig::new(p).map_err(err)?;
    let center = parse_center(center, l)?;
    check_guard(center.n(), l, DEMO_GUARD).map_err(err)?;
    let params = MallowsParams::new(center.clone(), lambda).map_err(err)?;
    let cache = PartitionCache::with_guard(DEMO_GUARD);
    let mut all: Vec<RankingMass> = enumerate_space(center.n(), center.domain(), DEMO_GUARD)
        .map_err(err)?
        .map(|x| -> Result<RankingMass> {
            Ok(RankingMass {
                distance: kendall_tau_partial(&x, &center, cfg).map_err(err)?,
                probability: log_pmf(&x, &params, cfg, &cache).map_err(err)?.exp(),
                stages: x.stages().to_vec(),
            })
        })
        .collect::<Result<_>>()?;

    let mut by_distance: Vec<DistanceMass> = Vec::new();
    all.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    for r in &all {
        match by_distance.last_mut() {
            Some(last) if last.distance == r.distance => {
                last.rankings += 1;
                last.mass += r.probability;
            }
            _ => by_distance.push(DistanceMass {
                distance: r.distance,
                rankings: 1,
                mass: r.probability,
            }),
        }
    }
    let space_size = all.len();
    // Equally likely rankings stay in lexicographic order.
    all.sort_by(|a, b| b.probability.total_cmp(&a.probability).then(a.stages.cmp(&b.stages)));
    all.truncate(top_k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(PmfReport {
        log_partition: log_partition_function(&params, cfg, &cache).map_err(err)?,
        space_size,
        modal_mass: log_pmf(&center, &params, cfg, &cache).map_err(err)?.exp(),
        top: all,
        by_distance,
        samples: sample(&params, cfg, &cache, &mut rng, samples)
            .map_err(err)?
            .into_iter()
            .map(|x| x.stages().to_vec())
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitDemo {
    pub truth: Vec<u8>,
    pub prior_center: Vec<u8>,
    pub censored: usize,
    pub center_map: Vec<u8>,
    pub lambda_map: f64,
    pub distance_to_truth: f64,
    pub center_acceptance: f64,
    pub lambda_acceptance: f64,
    pub marginals: Vec<Vec<f64>>,
    pub svg: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDemoSettings {
    pub center: String,
    pub l: usize,
    pub lambda: f64,
    pub respondents: usize,
    pub missing_pct: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

/// Simulates from the given model, then fits with a uniformly random prior center.
pub fn simulate_fit_report(s: &FitDemoSettings) -> Result<FitDemo> {
    let cfg = DistanceConfig::default();
    let truth = parse_center(&s.center, s.l)?;
    check_guard(truth.n(), s.l, DEMO_GUARD).map_err(err)?;
    let cache = PartitionCache::with_guard(DEMO_GUARD);
    let params = MallowsParams::new(truth.clone(), s.lambda).map_err(err)?;
    let data = generate(&SynthConfig::new(params, s.respondents, s.missing_pct, s.seed), cfg, &cache)
        .map_err(err)?;

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x5eed);
    let l = s.l as u8;
    let prior_stages = (0..truth.n()).map(|_| rng.random_range(1..=l)).collect();
    let prior = PriorConfig::new(CentralRanking::new(prior_stages, truth.domain()).map_err(err)?);
    let mcmc = McmcConfig {
        iterations: s.iterations,
        burn_in: s.burn_in,
        seed: s.seed,
        ..Default::default()
    };
    let fit = mcmc_fit(&data.responses, &prior, &mcmc, cfg, &cache).map_err(err)?;
    let items: Vec<String> = (1..=truth.n()).map(|i| format!("item {i}")).collect();
    let labels: Vec<i64> = (1..=s.l as i64).collect();
    Ok(FitDemo {
        truth: truth.stages().to_vec(),
        prior_center: prior.center.stages().to_vec(),
        censored: data.censored.len(),
        center_map: fit.center_map.stages().to_vec(),
        lambda_map: fit.lambda_map,
        distance_to_truth: kendall_tau_partial(&fit.center_map, &truth, cfg).map_err(err)?,
        center_acceptance: fit.trace.center_acceptance,
        lambda_acceptance: fit.trace.lambda_acceptance,
        svg: render_heatmap(&fit.marginals, &items, &labels),
        marginals: fit.marginals.frequencies,
    })
}

fn to_json<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn distance(a: &str, b: &str, p: f64) -> std::result::Result<String, JsError> {
    to_json(distance_report(a, b, p))
}

#[wasm_bindgen]
pub fn mallows_pmf(
    center: &str,
    l: u32,
    lambda: f64,
    p: f64,
    top_k: u32,
    samples: u32,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_json(pmf_report(center, l as usize, lambda, p, top_k as usize, samples as usize, seed as u64))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate_and_fit(
    center: &str,
    l: u32,
    lambda: f64,
    respondents: u32,
    missing_pct: f64,
    iterations: u32,
    burn_in: u32,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_json(simulate_fit_report(&FitDemoSettings {
        center: center.to_string(),
        l: l as usize,
        lambda,
        respondents: respondents as usize,
        missing_pct,
        iterations: iterations as usize,
        burn_in: burn_in as usize,
        seed: seed as u64,
    }))
}
