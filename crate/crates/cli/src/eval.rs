use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use partial_mallows::io::write_json;
use partial_mallows::mallows::PartitionCache;
use partial_mallows::rankings::{kendall_tau_partial, DistanceConfig};

use crate::fit::{fit_dataset, FitOptions, UNIFORM_RANDOM};
use crate::simulate::{simulate_dataset, ModelArgs};
use crate::{CliError, Result, RunManifest};

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Ranking file for the prior center, or "uniform-random" (drawn per repeat).
    #[arg(long, default_value = UNIFORM_RANDOM)]
    pub prior_center: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub options: FitOptions,
    #[arg(long, default_value_t = 12)]
    pub repeats: usize,
    /// Base seed; each repeat derives its own simulation and chain seeds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-repeat CSV; a JSON summary with the run manifest goes next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
}

/// One simulate + fit repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub repeat: usize,
    pub sim_seed: u64,
    pub fit_seed: u64,
    pub lambda_map: f64,
    pub abs_lambda_error: f64,
    pub distance_to_truth: f64,
    pub center_acceptance: f64,
    pub lambda_acceptance: f64,
    /// MAP center as space-separated stage labels.
    pub center_map: String,
}

/// Seed `role` of repeat `repeat`: a SplitMix64 step away from the base seed.
pub(crate) fn derive_seed(base: u64, repeat: usize, role: u64) -> u64 {
    let mut z = base.wrapping_add((repeat as u64 * 2 + role + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_repeat(args: &EvalArgs, repeat: usize, cfg: DistanceConfig, cache: &PartitionCache) -> Result<EvalRow> {
    let sim_seed = derive_seed(args.seed, repeat, 0);
    let fit_seed = derive_seed(args.seed, repeat, 1);
    let sim = simulate_dataset(&args.model, cfg, sim_seed, cache)?;
    let fitted = fit_dataset(&sim.dataset, &args.prior_center, fit_seed, &args.options, cache)?;
    let r = &fitted.result;
    let labels: Vec<String> = r
        .center_map
        .stages()
        .iter()
        .map(|&s| sim.dataset.external_label(s).to_string())
        .collect();
    Ok(EvalRow {
        repeat,
        sim_seed,
        fit_seed,
        lambda_map: r.lambda_map,
        abs_lambda_error: (r.lambda_map - sim.lambda).abs(),
        distance_to_truth: kendall_tau_partial(&r.center_map, &sim.center, cfg)?,
        center_acceptance: r.trace.center_acceptance,
        lambda_acceptance: r.trace.lambda_acceptance,
        center_map: labels.join(" "),
    })
}

fn mean(rows: &[EvalRow], f: impl Fn(&EvalRow) -> f64) -> f64 {
    rows.iter().map(f).sum::<f64>() / rows.len() as f64
}

fn render_csv(rows: &[EvalRow]) -> String {
    let mut s = String::from(
        "repeat,sim_seed,fit_seed,lambda_map,abs_lambda_error,distance_to_truth,center_acceptance,lambda_acceptance,center_map\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.repeat,
            r.sim_seed,
            r.fit_seed,
            r.lambda_map,
            r.abs_lambda_error,
            r.distance_to_truth,
            r.center_acceptance,
            r.lambda_acceptance,
            r.center_map
        );
    }
    let _ = writeln!(
        s,
        "mean,,,{},{},{},{},{},",
        mean(rows, |r| r.lambda_map),
        mean(rows, |r| r.abs_lambda_error),
        mean(rows, |r| r.distance_to_truth),
        mean(rows, |r| r.center_acceptance),
        mean(rows, |r| r.lambda_acceptance),
    );
    s
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    if args.repeats == 0 {
        return Err(CliError::Invalid("--repeats must be at least 1".into()));
    }
    let cfg = DistanceConfig::new(args.options.p)?;
    let cache = PartitionCache::with_guard(args.options.guard);
    let work = || -> Vec<Result<EvalRow>> {
        (0..args.repeats)
            .into_par_iter()
            .map(|k| run_repeat(args, k, cfg, &cache))
            .collect()
    };
    let results = match args.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Invalid(format!("--threads: {e}")))?
            .install(work),
        None => work(),
    };
    // The earliest failing repeat decides the error, whatever finished first.
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;

    let summary_path = args.out.with_extension("json");
    let manifest = RunManifest::new("eval", args.seed, args)
        .output("table", &args.out)
        .output("summary", &summary_path);
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| partial_mallows::Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(&args.out, render_csv(&rows)).map_err(|e| partial_mallows::Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let mae = mean(&rows, |r| r.abs_lambda_error);
    let mean_d = mean(&rows, |r| r.distance_to_truth);
    write_json(
        &json!({
            "repeats": rows.len(),
            "mean_abs_lambda_error": mae,
            "mean_distance_to_truth": mean_d,
            "manifest": manifest.to_value(),
        }),
        &summary_path,
    )?;

    for r in &rows {
        writeln!(
            out,
            "repeat {:>3}: lambda {:.4} (|err| {:.4}), distance {}, center [{}]",
            r.repeat, r.lambda_map, r.abs_lambda_error, r.distance_to_truth, r.center_map
        )?;
    }
    writeln!(out, "mean |lambda error| = {mae:.4}, mean distance to truth = {mean_d:.4}")?;
    writeln!(out, "wrote {} and {}", args.out.display(), summary_path.display())?;
    Ok(())
}
