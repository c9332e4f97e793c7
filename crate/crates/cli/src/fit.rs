use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::Serialize;
use serde_json::json;

use partial_mallows::inference::{
    mcmc_fit, CenterPriorSpread, FitResult, LikelihoodNormalization, McmcConfig, PriorConfig,
};
use partial_mallows::io::{
    read_dataset, read_ranking_file, write_fit_report, write_heatmap_svg, write_trace, Evaluation,
    FitReport, QuestionnaireDataset,
};
use partial_mallows::mallows::{check_guard, PartitionCache, DEFAULT_GUARD};
use partial_mallows::rankings::{kendall_tau_partial, CentralRanking, DistanceConfig};

use crate::simulate::TruthFile;
use crate::{stream_rng, uniform_center, CliError, Result, RunManifest, Stream};

/// Literal accepted by --prior-center in place of a ranking file.
pub const UNIFORM_RANDOM: &str = "uniform-random";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationArg {
    /// Each respondent normalized over their observed items only.
    Restricted,
    /// Every respondent normalized over the full ranking space.
    Global,
}

impl From<NormalizationArg> for LikelihoodNormalization {
    fn from(n: NormalizationArg) -> Self {
        match n {
            NormalizationArg::Restricted => LikelihoodNormalization::Restricted,
            NormalizationArg::Global => LikelihoodNormalization::Global,
        }
    }
}

/// Chain and model settings, shared by `fit` and `eval`.
#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct FitOptions {
    #[arg(long, default_value_t = 1500)]
    pub iterations: usize,
    #[arg(long, default_value_t = 500)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thinning: usize,
    #[arg(long, value_enum, default_value_t = NormalizationArg::Restricted)]
    pub normalization: NormalizationArg,
    /// Starting lambda (ignored with --random-init).
    #[arg(long, default_value_t = 1.0)]
    pub lambda_init: f64,
    /// Scale of the truncated-normal lambda proposal; 0 keeps lambda fixed.
    #[arg(long, default_value_t = 0.1)]
    pub proposal_scale: f64,
    /// Spread of the center prior: "coupled" (the sampled lambda) or a fixed value.
    #[arg(long, default_value = "coupled")]
    pub center_prior_spread: String,
    /// Start from a uniformly random center and lambda drawn from U[0.5, 2].
    #[arg(long)]
    pub random_init: bool,
    /// Penalty for pairs tied in exactly one ranking.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Largest ranking space l^n the tool will enumerate.
    #[arg(long, default_value_t = DEFAULT_GUARD)]
    pub guard: u64,
}

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct FitArgs {
    /// Dataset CSV (its sidecar JSON must sit next to it).
    #[arg(long)]
    pub data: PathBuf,
    /// Ranking file for the prior center, or "uniform-random".
    #[arg(long)]
    pub prior_center: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for report.json, trace.jsonl and heatmap.svg.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Truth file for evaluation; defaults to <data stem>.truth.json when present.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub options: FitOptions,
}

fn parse_spread(text: &str) -> Result<CenterPriorSpread> {
    if text == "coupled" {
        return Ok(CenterPriorSpread::Coupled);
    }
    text.parse::<f64>()
        .ok()
        .filter(|v| *v > 0.0 && v.is_finite())
        .map(CenterPriorSpread::Fixed)
        .ok_or_else(|| {
            CliError::Invalid(format!(
                "--center-prior-spread must be \"coupled\" or a positive number, got {text:?}"
            ))
        })
}

fn external(center: &CentralRanking, ds: &QuestionnaireDataset) -> Vec<i64> {
    center.stages().iter().map(|&s| ds.external_label(s)).collect()
}

/// A finished chain plus the settings drawn or derived on the way.
pub(crate) struct Fitted {
    pub result: FitResult,
    pub resolved: serde_json::Value,
}

/// Resolves the prior and initial state for `ds` and runs the chain.
pub(crate) fn fit_dataset(
    ds: &QuestionnaireDataset,
    prior_center: &str,
    seed: u64,
    opts: &FitOptions,
    cache: &PartitionCache,
) -> Result<Fitted> {
    let cfg = DistanceConfig::new(opts.p)?;
    let n = ds.items.len();
    check_guard(n, ds.domain.l(), cache.guard())?;
    let prior_center = if prior_center == UNIFORM_RANDOM {
        uniform_center(n, ds.domain, &mut stream_rng(seed, Stream::PriorCenter))
    } else {
        read_ranking_file(prior_center)?.to_center(ds)?
    };
    let mut prior = PriorConfig::new(prior_center);
    prior.spread = parse_spread(&opts.center_prior_spread)?;

    let mut mcmc = McmcConfig {
        iterations: opts.iterations,
        burn_in: opts.burn_in,
        thinning: opts.thinning,
        lambda_init: opts.lambda_init,
        lambda_proposal_scale: opts.proposal_scale,
        seed,
        normalization: opts.normalization.into(),
        init_center: None,
    };
    if opts.random_init {
        let mut rng = stream_rng(seed, Stream::RandomInit);
        mcmc.init_center = Some(uniform_center(n, ds.domain, &mut rng));
        mcmc.lambda_init = rng.random_range(0.5..2.0);
    }
    let init_center = mcmc.init_center.as_ref().unwrap_or(&prior.center);
    let resolved = json!({
        "prior_center": external(&prior.center, ds),
        "init_center": external(init_center, ds),
        "lambda_init": mcmc.lambda_init,
    });
    let result = mcmc_fit(&ds.rankings(), &prior, &mcmc, cfg, cache)?;
    Ok(Fitted { result, resolved })
}

pub(crate) fn evaluate(
    result: &FitResult,
    truth: &TruthFile,
    ds: &QuestionnaireDataset,
    cfg: DistanceConfig,
) -> Result<Evaluation> {
    let center = truth.center.to_center(ds)?;
    Ok(Evaluation {
        lambda_true: truth.lambda,
        abs_lambda_error: (result.lambda_map - truth.lambda).abs(),
        distance_to_truth: kendall_tau_partial(&result.center_map, &center, cfg)?,
    })
}

/// `data.csv` -> `data.truth.json`.
fn sibling_truth(data: &Path) -> PathBuf {
    data.with_extension("truth.json")
}

fn read_truth(path: &Path) -> Result<TruthFile> {
    let text = std::fs::read_to_string(path).map_err(|e| partial_mallows::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Core(partial_mallows::Error::Format {
            path: path.to_path_buf(),
            row: None,
            message: e.to_string(),
        })
    })
}

pub fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let ds = read_dataset(&args.data)?;
    let truth_path = args.truth.clone().or_else(|| {
        let p = sibling_truth(&args.data);
        p.exists().then_some(p)
    });
    let truth = truth_path.as_deref().map(read_truth).transpose()?;
    let cache = PartitionCache::with_guard(args.options.guard);
    let fitted = fit_dataset(&ds, &args.prior_center, args.seed, &args.options, &cache)?;
    let result = &fitted.result;

    let report_path = args.out_dir.join("report.json");
    let trace_path = args.out_dir.join("trace.jsonl");
    let heatmap_path = args.out_dir.join("heatmap.svg");
    let mut manifest = RunManifest::new("fit", args.seed, args)
        .input("data", &args.data)
        .output("report", &report_path)
        .output("trace", &trace_path)
        .output("heatmap", &heatmap_path);
    if args.prior_center != UNIFORM_RANDOM {
        manifest = manifest.input("prior_center", Path::new(&args.prior_center));
    }
    if let Some(p) = &truth_path {
        manifest = manifest.input("truth", p);
    }
    manifest.config["resolved"] = fitted.resolved.clone();
    let manifest = manifest.to_value();

    let mut report = FitReport::new(result, &ds, manifest.clone());
    if let Some(t) = &truth {
        report.evaluation = Some(evaluate(result, t, &ds, DistanceConfig::new(args.options.p)?)?);
    }
    std::fs::create_dir_all(&args.out_dir).map_err(|e| partial_mallows::Error::Io {
        path: args.out_dir.clone(),
        source: e,
    })?;
    write_fit_report(&report, &report_path)?;
    write_trace(&result.trace, Some(&manifest), &trace_path)?;
    write_heatmap_svg(&result.marginals, &ds, Some(&manifest.to_string()), &heatmap_path)?;

    writeln!(out, "MAP center:")?;
    for x in &report.center_map {
        writeln!(out, "  {}: {}", x.item, x.stage)?;
    }
    writeln!(out, "lambda (MAP): {:.4}", report.lambda_map)?;
    writeln!(
        out,
        "acceptance: center {:.3}, lambda {:.3}",
        report.acceptance.center, report.acceptance.lambda
    )?;
    writeln!(out, "retained samples: {}", report.retained_samples)?;
    if let Some(e) = &report.evaluation {
        writeln!(
            out,
            "vs truth: |lambda error| = {:.4}, distance = {}",
            e.abs_lambda_error, e.distance_to_truth
        )?;
    }
    writeln!(out, "wrote {}", args.out_dir.display())?;
    Ok(())
}
