mod common;

use std::collections::HashMap;

use partial_mallows::inference::{
    log_likelihood, log_posterior, log_prior, map_estimate, mcmc_fit, CenterPriorSpread,
    LikelihoodNormalization, McmcConfig, PriorConfig, TruncatedNormal,
};
use partial_mallows::mallows::{partition_function, MallowsParams, PartitionCache};
use partial_mallows::rankings::{kendall_tau_partial, CentralRanking, DistanceConfig, PartialRanking, StageDomain};
use partial_mallows::synth::{generate, SynthConfig};

fn dom(l: usize) -> StageDomain {
    StageDomain::new(l).unwrap()
}

fn center(stages: &[u8], l: usize) -> CentralRanking {
    CentralRanking::new(stages.to_vec(), dom(l)).unwrap()
}

fn tiny_dataset() -> Vec<PartialRanking> {
    let truth = MallowsParams::new(center(&[1, 1, 2], 2), 0.7).unwrap();
    let mut cfg = SynthConfig::new(truth, 5, 40.0, 17);
    cfg.censor_location_factor = 1.0;
    generate(&cfg, DistanceConfig::default(), &PartitionCache::new())
        .unwrap()
        .responses
}

#[test]
fn single_complete_respondent_at_center() {
    let cache = PartitionCache::new();
    let cfg = DistanceConfig::default();
    let params = MallowsParams::new(center(&[1, 2], 2), 1.0).unwrap();
    let data = vec![params.center.as_partial()];
    let ll = log_likelihood(&data, &params, cfg, &cache, LikelihoodNormalization::Restricted).unwrap();
    let psi = common::psi(&[1, 2], 2, 1.0, 0.5);
    assert!((ll + psi.ln()).abs() < 1e-14);
}

#[test]
fn duplicated_dataset_scales_likelihood() {
    let cache = PartitionCache::new();
    let cfg = DistanceConfig::default();
    let data = tiny_dataset();
    let params = MallowsParams::new(center(&[1, 2, 2], 2), 0.9).unwrap();
    for mode in [LikelihoodNormalization::Restricted, LikelihoodNormalization::Global] {
        let once = log_likelihood(&data, &params, cfg, &cache, mode).unwrap();
        let tripled: Vec<_> = data.iter().cycle().take(3 * data.len()).cloned().collect();
        let thrice = log_likelihood(&tripled, &params, cfg, &cache, mode).unwrap();
        assert!((thrice - 3.0 * once).abs() < 1e-12 * once.abs().max(1.0));
    }
}

#[test]
fn restricted_likelihood_matches_enumeration() {
    let cache = PartitionCache::new();
    let cfg = DistanceConfig::default();
    let data = tiny_dataset();
    assert!(data.iter().any(|x| !x.is_complete()));
    for c in common::all_rankings(3, 2) {
        for lambda in [0.2, 1.0, 4.0] {
            let params = MallowsParams::new(center(&c, 2), lambda).unwrap();
            let got = log_likelihood(&data, &params, cfg, &cache, LikelihoodNormalization::Restricted).unwrap();
            let want = common::log_lik(&data, &c, 2, lambda, 0.5);
            assert!((got - want).abs() < 1e-12 * want.abs().max(1.0));
        }
    }
}

#[test]
fn global_likelihood_uses_full_space_normalizer() {
    let cache = PartitionCache::new();
    let cfg = DistanceConfig::default();
    let data = tiny_dataset();
    let c = [2u8, 1, 2];
    let params = MallowsParams::new(center(&c, 2), 0.6).unwrap();
    let got = log_likelihood(&data, &params, cfg, &cache, LikelihoodNormalization::Global).unwrap();
    let log_psi = common::psi(&c, 2, 0.6, 0.5).ln();
    let wrap: Vec<Option<u8>> = c.iter().map(|&s| Some(s)).collect();
    let want: f64 = data
        .iter()
        .map(|x| -common::distance(x.stages(), &wrap, 0.5) / 0.6 - log_psi)
        .sum();
    assert!((got - want).abs() < 1e-12 * want.abs());
}

#[test]
fn normalizations_agree_without_missing_data() {
    let cache = PartitionCache::new();
    let cfg = DistanceConfig::default();
    let truth = MallowsParams::new(center(&[1, 2, 2, 3, 1], 3), 1.0).unwrap();
    let data = generate(&SynthConfig::new(truth, 40, 0.0, 5), cfg, &cache).unwrap().responses;
    for c in [[1u8, 2, 2, 3, 1], [3, 3, 1, 2, 2], [1, 1, 1, 1, 1]] {
        for lambda in [0.3, 1.0, 3.0] {
            let params = MallowsParams::new(center(&c, 3), lambda).unwrap();
            let r = log_likelihood(&data, &params, cfg, &cache, LikelihoodNormalization::Restricted).unwrap();
            let g = log_likelihood(&data, &params, cfg, &cache, LikelihoodNormalization::Global).unwrap();
            assert!((r - g).abs() <= 1e-12 * r.abs());
        }
    }
}

#[test]
fn prior_matches_closed_forms() {
    let cache = PartitionCache::new();
    let cfg = DistanceConfig::default();
    let init = center(&[1, 2, 2], 3);
    let prior = PriorConfig::new(init.clone());
    for c in common::all_rankings(3, 3) {
        for lambda in [0.4, 1.0, 2.5] {
            let params = MallowsParams::new(center(&c, 3), lambda).unwrap();
            let got = log_prior(&params, &prior, cfg, &cache).unwrap();
            let want = common::log_half_normal(lambda) + common::log_pmf(&c, init.stages(), 3, lambda, 0.5);
            assert!((got - want).abs() < 1e-12 * want.abs().max(1.0));
        }
    }
    let at_one = prior.lambda_prior.log_density(1.0);
    let phi = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
    assert!((at_one - (2.0 * phi).ln()).abs() < 1e-14);

    let fixed = PriorConfig {
        spread: CenterPriorSpread::Fixed(2.0),
        ..prior.clone()
    };
    let params = MallowsParams::new(center(&[2, 1, 1], 3), 0.5).unwrap();
    let got = log_prior(&params, &fixed, cfg, &cache).unwrap();
    let want = common::log_half_normal(0.5) + common::log_pmf(&[2, 1, 1], init.stages(), 3, 2.0, 0.5);
    assert!((got - want).abs() < 1e-12);
    assert!(TruncatedNormal::new(0.0, 0.0).is_err());
}

#[test]
fn posterior_is_likelihood_plus_prior() {
    let cache = PartitionCache::new();
    let cfg = DistanceConfig::default();
    let data = tiny_dataset();
    let prior = PriorConfig::new(center(&[1, 2, 2], 2));
    let params = MallowsParams::new(center(&[2, 1, 2], 2), 0.8).unwrap();
    let mode = LikelihoodNormalization::Restricted;
    let post = log_posterior(&data, &params, &prior, cfg, &cache, mode).unwrap();
    let sum = log_likelihood(&data, &params, cfg, &cache, mode).unwrap()
        + log_prior(&params, &prior, cfg, &cache).unwrap();
    assert_eq!(post, sum);
}

#[test]
fn fixed_lambda_chain_matches_conditional_posterior() {
    let cache = PartitionCache::new();
    let cfg = DistanceConfig::default();
    let data = tiny_dataset();
    let prior_center = [1u8, 2, 2];
    let lambda = 0.8;
    let prior = PriorConfig {
        lambda_prior: TruncatedNormal::default(),
        center: center(&prior_center, 2),
        spread: CenterPriorSpread::Fixed(lambda),
    };
    let mcmc = McmcConfig {
        iterations: 200_000,
        burn_in: 1_000,
        lambda_init: lambda,
        lambda_proposal_scale: 0.0,
        seed: 99,
        ..Default::default()
    };
    let fit = mcmc_fit(&data, &prior, &mcmc, cfg, &cache).unwrap();
    assert!(fit.trace.samples.iter().all(|s| s.lambda == lambda));

    let centers = common::all_rankings(3, 2);
    let logs: Vec<f64> = centers
        .iter()
        .map(|c| common::log_lik(&data, c, 2, lambda, 0.5) + common::log_pmf(c, &prior_center, 2, lambda, 0.5))
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logs.iter().map(|v| (v - max).exp()).sum();
    let exact: Vec<f64> = logs.iter().map(|v| (v - max).exp() / z).collect();

    let mut counts: HashMap<Vec<u8>, usize> = HashMap::new();
    for s in &fit.trace.samples {
        *counts.entry(s.center.stages().to_vec()).or_default() += 1;
    }
    let total = fit.trace.samples.len() as f64;
    let empirical: Vec<f64> = centers
        .iter()
        .map(|c| *counts.get(c).unwrap_or(&0) as f64 / total)
        .collect();
    let tv = common::total_variation(&exact, &empirical);
    assert!(tv <= 0.02, "total variation {tv}");
}

#[test]
fn map_is_the_joint_mode_on_a_tiny_instance() {
    let cache = PartitionCache::new();
    let cfg = DistanceConfig::default();
    let truth = MallowsParams::new(center(&[1, 2, 2], 2), 0.3).unwrap();
    let data = generate(&SynthConfig::new(truth, 5, 0.0, 3), cfg, &cache).unwrap().responses;
    let prior_center = [1u8, 1, 2];
    let prior = PriorConfig::new(center(&prior_center, 2));
    let mcmc = McmcConfig {
        iterations: 20_000,
        burn_in: 500,
        seed: 4,
        ..Default::default()
    };
    let fit = mcmc_fit(&data, &prior, &mcmc, cfg, &cache).unwrap();

    // Profile posterior of each center on a fine lambda grid.
    let profile: Vec<(Vec<u8>, f64)> = common::all_rankings(3, 2)
        .into_iter()
        .map(|c| {
            let best = (1..=2000)
                .map(|k| common::log_post(&data, &c, &prior_center, 2, k as f64 * 0.0025, 0.5))
                .fold(f64::NEG_INFINITY, f64::max);
            (c, best)
        })
        .collect();
    let top = profile.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    let modes: Vec<&Vec<u8>> = profile
        .iter()
        .filter(|(_, v)| *v >= top - 1e-9)
        .map(|(c, _)| c)
        .collect();
    assert!(
        modes.iter().any(|c| c.as_slice() == fit.center_map.stages()),
        "MAP {} not among exact modes {modes:?}",
        fit.center_map
    );
}

#[test]
fn stored_log_posteriors_and_map_recompute() {
    let cache = PartitionCache::new();
    let cfg = DistanceConfig::default();
    let data = tiny_dataset();
    let prior = PriorConfig::new(center(&[1, 2, 2], 2));
    let mcmc = McmcConfig {
        iterations: 600,
        burn_in: 100,
        thinning: 2,
        seed: 8,
        ..Default::default()
    };
    let fit = mcmc_fit(&data, &prior, &mcmc, cfg, &cache).unwrap();
    assert_eq!(fit.trace.samples.len(), 250);
    let fresh = PartitionCache::new();
    let recompute = |c: &CentralRanking, lambda: f64| {
        let params = MallowsParams::new(c.clone(), lambda).unwrap();
        log_posterior(&data, &params, &prior, cfg, &fresh, mcmc.normalization).unwrap()
    };
    for s in &fit.trace.samples {
        assert!((s.log_posterior - recompute(&s.center, s.lambda)).abs() < 1e-9);
    }
    let (c, lambda) = map_estimate(&fit.trace).unwrap();
    assert_eq!((c.clone(), lambda), (fit.center_map.clone(), fit.lambda_map));
    let best = recompute(&c, lambda);
    for s in &fit.trace.samples {
        assert!(best >= s.log_posterior - 1e-9);
    }
    for row in &fit.marginals.frequencies {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert!((0.0..=1.0).contains(&fit.trace.center_acceptance));
    assert!((0.0..=1.0).contains(&fit.trace.lambda_acceptance));
}

#[test]
fn fits_are_reproducible_and_cache_independent() {
    let cfg = DistanceConfig::default();
    let data = tiny_dataset();
    let prior = PriorConfig::new(center(&[1, 2, 2], 2));
    let mcmc = McmcConfig {
        seed: 21,
        ..Default::default()
    };
    let shared = PartitionCache::new();
    let a = mcmc_fit(&data, &prior, &mcmc, cfg, &shared).unwrap();
    let b = mcmc_fit(&data, &prior, &mcmc, cfg, &shared).unwrap();
    let c = mcmc_fit(&data, &prior, &mcmc, cfg, &PartitionCache::new()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    let bits = |f: &partial_mallows::inference::FitResult| {
        f.trace.samples.iter().map(|s| (s.lambda.to_bits(), s.log_posterior.to_bits())).collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&c));
}

#[test]
fn concurrent_chains_sharing_a_cache_match_private_runs() {
    let cfg = DistanceConfig::default();
    let truth = MallowsParams::new(center(&[1, 2, 2, 3, 3, 4], 4), 0.7).unwrap();
    let data = generate(&SynthConfig::new(truth.clone(), 60, 20.0, 2), cfg, &PartitionCache::new())
        .unwrap()
        .responses;
    let prior = PriorConfig::new(center(&[1, 1, 2, 2, 3, 4], 4));
    let shared = PartitionCache::new();
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4u64)
            .map(|seed| {
                let (data, prior, shared) = (&data, &prior, &shared);
                s.spawn(move || {
                    let mcmc = McmcConfig {
                        iterations: 400,
                        burn_in: 100,
                        seed,
                        ..Default::default()
                    };
                    mcmc_fit(data, prior, &mcmc, cfg, shared).unwrap()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (seed, r) in results.iter().enumerate() {
        let mcmc = McmcConfig {
            iterations: 400,
            burn_in: 100,
            seed: seed as u64,
            ..Default::default()
        };
        let private = mcmc_fit(&data, &prior, &mcmc, cfg, &PartitionCache::new()).unwrap();
        assert_eq!(r, &private);
    }
}

#[test]
fn concentrated_synthetic_fit_recovers_center() {
    let cfg = DistanceConfig::default();
    let cache = PartitionCache::new();
    let truth_center = center(&[1, 2, 2, 3, 3, 3, 3, 4], 4);
    let truth = MallowsParams::new(truth_center.clone(), 0.1).unwrap();
    let data = generate(&SynthConfig::new(truth, 100, 0.0, 12), cfg, &cache).unwrap().responses;
    let prior = PriorConfig::new(center(&[1, 1, 2, 2, 3, 3, 4, 4], 4));
    let mcmc = McmcConfig {
        seed: 12,
        ..Default::default()
    };
    let fit = mcmc_fit(&data, &prior, &mcmc, cfg, &cache).unwrap();
    assert_eq!(fit.center_map, truth_center);
    assert_eq!(fit.marginals.modes(), truth_center.stages());
    assert_eq!(kendall_tau_partial(&fit.center_map, &truth_center, cfg).unwrap(), 0.0);
    assert!(partition_function(&MallowsParams::new(truth_center, 0.1).unwrap(), cfg, &cache).unwrap() >= 1.0);
}
