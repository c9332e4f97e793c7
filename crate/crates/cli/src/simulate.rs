use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use partial_mallows::io::{write_dataset, write_json, QuestionnaireDataset, RankingFile};
use partial_mallows::mallows::{check_guard, MallowsParams, PartitionCache, DEFAULT_GUARD};
use partial_mallows::rankings::{CentralRanking, DistanceConfig, ItemSet, StageDomain};
use partial_mallows::synth::{generate, SynthConfig};

use crate::{stream_rng, uniform_center, CliError, Result, RunManifest, Stream};

/// The generating model and censoring settings, shared by `simulate` and `eval`.
#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct ModelArgs {
    /// Number of items (implied by --center when given).
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of stages.
    #[arg(long)]
    pub l: usize,
    /// True spread parameter.
    #[arg(long)]
    pub lambda: f64,
    /// True central ranking as comma-separated stage labels, e.g. "1,2,2,3".
    #[arg(long, required_unless_present = "center_random", conflicts_with = "center_random")]
    pub center: Option<String>,
    /// Draw the true central ranking uniformly at random (needs --n).
    #[arg(long)]
    pub center_random: bool,
    /// Number of respondents.
    #[arg(long = "M", visible_alias = "m", default_value_t = 100)]
    pub m: usize,
    /// Percentage of respondents to right-censor.
    #[arg(long, default_value_t = 0.0)]
    pub missing_pct: f64,
    /// Mean censoring cut position as a fraction of n.
    #[arg(long, default_value_t = 0.75)]
    pub censor_location: f64,
    /// Standard deviation of the censoring cut position.
    #[arg(long, default_value_t = 1.0)]
    pub censor_scale: f64,
    /// External label of the first stage.
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    pub stage_label_offset: i64,
}

#[derive(Debug, Clone, clap::Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix: writes <out>.csv, <out>.json and <out>.truth.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Penalty for pairs tied in exactly one ranking.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Largest ranking space l^n the tool will enumerate.
    #[arg(long, default_value_t = DEFAULT_GUARD)]
    pub guard: u64,
}

/// The generating model written next to a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub center: RankingFile,
    pub lambda: f64,
    pub p: f64,
    pub censored_respondents: Vec<String>,
    pub manifest: serde_json::Value,
}

pub(crate) struct Simulated {
    pub dataset: QuestionnaireDataset,
    pub center: CentralRanking,
    pub lambda: f64,
    pub censored: Vec<String>,
}

fn parse_center(text: &str, domain: StageDomain, offset: i64) -> Result<CentralRanking> {
    let stages = text
        .split(',')
        .map(|s| {
            let label: i64 = s
                .trim()
                .parse()
                .map_err(|_| CliError::Invalid(format!("--center: {s:?} is not an integer stage label")))?;
            let internal = label - offset + 1;
            if internal < 1 || internal > domain.l() as i64 {
                return Err(CliError::Invalid(format!(
                    "--center: stage label {label} outside {offset}..={}",
                    offset + domain.l() as i64 - 1
                )));
            }
            Ok(internal as u8)
        })
        .collect::<Result<Vec<u8>>>()?;
    Ok(CentralRanking::new(stages, domain)?)
}

/// The true model for `seed`, then a dataset drawn from it.
pub(crate) fn simulate_dataset(
    model: &ModelArgs,
    cfg: DistanceConfig,
    seed: u64,
    cache: &PartitionCache,
) -> Result<Simulated> {
    let domain = StageDomain::new(model.l)?;
    let center = match (&model.center, model.n) {
        (Some(text), n) => {
            let c = parse_center(text, domain, model.stage_label_offset)?;
            if n.is_some_and(|n| n != c.n()) {
                return Err(CliError::Invalid(format!(
                    "--n {} does not match the {} entries of --center",
                    n.unwrap(),
                    c.n()
                )));
            }
            c
        }
        (None, Some(n)) => uniform_center(n, domain, &mut stream_rng(seed, Stream::SimulatedCenter)),
        (None, None) => return Err(CliError::Invalid("--center-random needs --n".into())),
    };
    check_guard(center.n(), model.l, cache.guard())?;
    let truth = MallowsParams::new(center.clone(), model.lambda)?;
    let mut synth = SynthConfig::new(truth, model.m, model.missing_pct, seed);
    synth.censor_location_factor = model.censor_location;
    synth.censor_scale = model.censor_scale;
    let data = generate(&synth, cfg, cache)?;

    let width = model.m.to_string().len();
    let ids: Vec<String> = (1..=model.m).map(|k| format!("R{k:0width$}")).collect();
    let censored = data.censored.iter().map(|&k| ids[k].clone()).collect();
    let dataset = QuestionnaireDataset::new(
        ItemSet::numbered(center.n())?,
        domain,
        model.stage_label_offset,
        ids.into_iter().zip(data.responses).collect(),
        Some(format!("synthetic: pmallows simulate, seed {seed}")),
    )?;
    Ok(Simulated {
        dataset,
        center,
        lambda: model.lambda,
        censored,
    })
}

pub(crate) fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(prefix.as_os_str());
    s.push(suffix);
    s.into()
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = DistanceConfig::new(args.p)?;
    let cache = PartitionCache::with_guard(args.guard);
    let sim = simulate_dataset(&args.model, cfg, args.seed, &cache)?;

    let csv = with_suffix(&args.out, ".csv");
    let sidecar = with_suffix(&args.out, ".json");
    let truth_path = with_suffix(&args.out, ".truth.json");
    let manifest = RunManifest::new("simulate", args.seed, args)
        .output("dataset", &csv)
        .output("sidecar", &sidecar)
        .output("truth", &truth_path);
    let mut dataset = sim.dataset;
    dataset.provenance = Some(format!(
        "synthetic: pmallows simulate, seed {}; generating model and run manifest in {}",
        args.seed,
        truth_path.file_name().map(|f| f.to_string_lossy()).unwrap_or_default()
    ));
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| partial_mallows::Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    write_dataset(&dataset, &csv)?;
    let truth = TruthFile {
        center: RankingFile::from_center(&sim.center, &dataset),
        lambda: sim.lambda,
        p: args.p,
        censored_respondents: sim.censored.clone(),
        manifest: manifest.to_value(),
    };
    write_json(&truth, &truth_path)?;

    let labels: Vec<String> = sim
        .center
        .stages()
        .iter()
        .map(|&s| dataset.external_label(s).to_string())
        .collect();
    writeln!(
        out,
        "simulated {} respondents over {} items ({} censored)",
        dataset.responses.len(),
        dataset.items.len(),
        sim.censored.len()
    )?;
    writeln!(out, "true center: [{}], lambda = {}", labels.join(", "), sim.lambda)?;
    writeln!(out, "wrote {}, {}, {}", csv.display(), sidecar.display(), truth_path.display())?;
    Ok(())
}
