//! Regenerates the bundled questionnaire-shaped synthetic dataset in `data/`.
//!
//! 30 respondents, 8 well-being symptoms, 4 stages labelled 2..=5. Stages are
//! drawn from a Mallows model around the clinical prior order; which cells are
//! reported follows a right-censoring pattern (respondents further along
//! report later-stage symptoms) with per-item response counts fixed to
//! 23, 19, 17, 13, 18, 16, 18 and 11 out of 30.
//!
//! Run with `cargo run -p partial-mallows --example make_ppa_like -- <out-dir>`.

use std::path::PathBuf;

use partial_mallows::io::{write_dataset, write_json, QuestionnaireDataset, RankingFile};
use partial_mallows::mallows::{sample, MallowsParams, PartitionCache};
use partial_mallows::rankings::{CentralRanking, DistanceConfig, ItemSet, PartialRanking, StageDomain};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ITEMS: [&str; 8] = [
    "Changes to sleeping patterns, e.g. napping",
    "Gluttonous",
    "Bodily complaints with no apparent cause",
    "Increased sensitivity to sound / tinnitus",
    "More 'rigid' / obsessional",
    "Walking more slowly",
    "Needs help dressing",
    "Difficulty swallowing",
];
const PRIOR: [u8; 8] = [1, 2, 2, 2, 2, 3, 3, 4];
const RESPONDED: [usize; 8] = [23, 19, 17, 13, 18, 16, 18, 11];
const M: usize = 30;
const SEED: u64 = 2023;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "crates/core/data".into()).into();
    let domain = StageDomain::new(4)?;
    let prior = CentralRanking::new(PRIOR.to_vec(), domain)?;
    let cfg = DistanceConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let draws = sample(&MallowsParams::new(prior.clone(), 1.0)?, cfg, &PartitionCache::new(), &mut rng, M)?;
    let progress: Vec<f64> = (0..M).map(|_| rng.random_range(1.0..4.5)).collect();

    let mut observed = vec![vec![false; ITEMS.len()]; M];
    for (i, &count) in RESPONDED.iter().enumerate() {
        let mut by_score: Vec<(f64, usize)> = (0..M)
            .map(|m| {
                let score = progress[m] - draws[m].stages()[i] as f64 + rng.random_range(0.0..1.5);
                (score, m)
            })
            .collect();
        by_score.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, m) in &by_score[..count] {
            observed[m][i] = true;
        }
    }
    // Give every respondent their earliest symptom, taking the cell from the
    // busiest respondent so the per-item counts stay fixed.
    for m in 0..M {
        if observed[m].iter().any(|&o| o) {
            continue;
        }
        let earliest = draws[m].stage_order()[0];
        let donor = (0..M)
            .filter(|&k| observed[k][earliest])
            .max_by_key(|&k| (observed[k].iter().filter(|&&o| o).count(), k))
            .expect("item has responders");
        observed[donor][earliest] = false;
        observed[m][earliest] = true;
    }

    let responses = (0..M)
        .map(|m| {
            let stages = (0..ITEMS.len())
                .map(|i| observed[m][i].then_some(draws[m].stages()[i]))
                .collect();
            Ok((format!("R{:02}", m + 1), PartialRanking::new(stages, domain)?))
        })
        .collect::<partial_mallows::Result<Vec<_>>>()?;
    let ds = QuestionnaireDataset::new(
        ItemSet::new(ITEMS.iter().map(|s| s.to_string()).collect())?,
        domain,
        2,
        responses,
        Some(format!(
            "SYNTHETIC sample, not patient data: 30 simulated respondents shaped like a symptom \
             questionnaire (items listed in clinical prior order; stage labels start at 2). \
             Generated by examples/make_ppa_like.rs with seed {SEED}."
        )),
    )?;
    std::fs::create_dir_all(&out)?;
    write_dataset(&ds, out.join("ppa_like_synthetic.csv"))?;
    write_json(&RankingFile::from_center(&prior, &ds), out.join("ppa_prior_center.json"))?;
    for (item, rate) in ITEMS.iter().zip(partial_mallows::io::item_response_rates(&ds)) {
        println!("{:>5.1}%  {item}", rate * 100.0);
    }
    Ok(())
}
