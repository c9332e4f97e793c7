use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use partial_mallows::io::read_ranking_file;
use partial_mallows::rankings::{pair_tally, DistanceConfig, ItemSet, PartialRanking, StageDomain};

use crate::{CliError, Result};

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct DistanceArgs {
    /// First ranking file.
    pub a: PathBuf,
    /// Second ranking file (same items, any order).
    pub b: PathBuf,
    /// Penalty for pairs tied in exactly one ranking.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
}

/// Both rankings on a common internal stage scale, items in `a`'s order.
fn load_pair(args: &DistanceArgs) -> Result<(PartialRanking, PartialRanking)> {
    let a = read_ranking_file(&args.a)?;
    let b = read_ranking_file(&args.b)?;
    let items = ItemSet::new(a.items.clone())?;
    let b_stages = b.aligned_to(&items)?;
    let labels = a.stages.iter().chain(&b_stages).flatten();
    let (Some(lo), Some(hi)) = (labels.clone().min(), labels.max()) else {
        return Err(CliError::Invalid("neither ranking assigns any stage".into()));
    };
    let l = usize::try_from(hi - lo + 1)
        .ok()
        .filter(|&l| l <= u8::MAX as usize)
        .ok_or_else(|| CliError::Invalid(format!("stage labels span {lo}..={hi}, too wide")))?;
    let domain = StageDomain::new(l)?;
    let shift = |v: &[Option<i64>]| -> Vec<Option<u8>> { v.iter().map(|s| s.map(|s| (s - lo + 1) as u8)).collect() };
    Ok((
        PartialRanking::new(shift(&a.stages), domain)?,
        PartialRanking::new(shift(&b_stages), domain)?,
    ))
}

pub fn cmd_distance(args: &DistanceArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = DistanceConfig::new(args.p)?;
    let (x, y) = load_pair(args)?;
    let tally = pair_tally(&x, &y)?;
    writeln!(out, "distance: {} (p = {})", tally.distance(cfg), cfg.p())?;
    writeln!(out, "concordant pairs: {}", tally.concordant)?;
    writeln!(out, "discordant pairs: {}", tally.discordant)?;
    writeln!(out, "tied in both: {}", tally.tied_both)?;
    writeln!(out, "tied in one only: {}", tally.tied_one)?;
    writeln!(out, "dropped (missing entry): {}", tally.dropped)?;
    Ok(())
}
