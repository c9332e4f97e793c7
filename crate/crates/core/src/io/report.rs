use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{FitResult, McmcTrace};
use crate::io::dataset::QuestionnaireDataset;
use crate::rankings::{CentralRanking, ItemSet};

/// A ranking over named items, stages in external labels; `null` = unranked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingFile {
    pub items: Vec<String>,
    pub stages: Vec<Option<i64>>,
}

impl RankingFile {
    pub fn from_center(center: &CentralRanking, ds: &QuestionnaireDataset) -> Self {
        RankingFile {
            items: ds.items.labels().to_vec(),
            stages: center
                .stages()
                .iter()
                .map(|&s| Some(ds.external_label(s)))
                .collect(),
        }
    }

    /// Stages reordered to follow `items`; fails unless both name the same item set.
    pub fn aligned_to(&self, items: &ItemSet) -> Result<Vec<Option<i64>>> {
        if self.items.len() != items.len() {
            return Err(Error::domain(format!(
                "ranking covers {} items, expected {}",
                self.items.len(),
                items.len()
            )));
        }
        items
            .labels()
            .iter()
            .map(|label| {
                self.items
                    .iter()
                    .position(|x| x == label)
                    .map(|k| self.stages[k])
                    .ok_or_else(|| Error::domain(format!("ranking has no item {label:?}")))
            })
            .collect()
    }

    /// The complete internal ranking under the dataset's labeling.
    pub fn to_center(&self, ds: &QuestionnaireDataset) -> Result<CentralRanking> {
        let stages = self
            .aligned_to(&ds.items)?
            .into_iter()
            .zip(ds.items.labels())
            .map(|(s, item)| {
                let label = s.ok_or_else(|| Error::domain(format!("item {item:?} has no stage")))?;
                ds.internal_stage(label).ok_or_else(|| {
                    Error::domain(format!("stage label {label} of {item:?} is outside the dataset's stages"))
                })
            })
            .collect::<Result<Vec<u8>>>()?;
        CentralRanking::new(stages, ds.domain)
    }
}

pub fn read_ranking_file(path: impl AsRef<Path>) -> Result<RankingFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: RankingFile =
        serde_json::from_str(&text).map_err(|e| Error::format(path, None, e.to_string()))?;
    if file.items.len() != file.stages.len() {
        return Err(Error::format(path, None, "items and stages differ in length"));
    }
    ItemSet::new(file.items.clone()).map_err(|e| Error::format(path, None, e.to_string()))?;
    Ok(file)
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemStage {
    pub item: String,
    pub stage: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub center: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalRow {
    pub item: String,
    pub frequencies: Vec<f64>,
}

/// Comparison of the fit against a known generating model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub lambda_true: f64,
    pub abs_lambda_error: f64,
    pub distance_to_truth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub center_map: Vec<ItemStage>,
    pub lambda_map: f64,
    pub log_posterior_map: f64,
    pub acceptance: AcceptanceRates,
    pub retained_samples: usize,
    /// External label of each stage column in `marginals`.
    pub stage_labels: Vec<i64>,
    pub marginals: Vec<MarginalRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Evaluation>,
    /// Free-form run description (settings, seed, paths).
    pub manifest: serde_json::Value,
}

impl FitReport {
    pub fn new(result: &FitResult, ds: &QuestionnaireDataset, manifest: serde_json::Value) -> Self {
        let labels = ds.items.labels();
        let map_lp = result
            .trace
            .samples
            .iter()
            .map(|s| s.log_posterior)
            .fold(f64::NEG_INFINITY, f64::max);
        FitReport {
            center_map: result
                .center_map
                .stages()
                .iter()
                .zip(labels)
                .map(|(&s, item)| ItemStage {
                    item: item.clone(),
                    stage: ds.external_label(s),
                })
                .collect(),
            lambda_map: result.lambda_map,
            log_posterior_map: map_lp,
            acceptance: AcceptanceRates {
                center: result.trace.center_acceptance,
                lambda: result.trace.lambda_acceptance,
            },
            retained_samples: result.trace.samples.len(),
            stage_labels: (1..=ds.domain.l() as u8).map(|s| ds.external_label(s)).collect(),
            marginals: result
                .marginals
                .frequencies
                .iter()
                .zip(labels)
                .map(|(row, item)| MarginalRow {
                    item: item.clone(),
                    frequencies: row.clone(),
                })
                .collect(),
            evaluation: None,
            manifest,
        }
    }

    /// The MAP center mapped back to internal stages.
    pub fn center_map_internal(&self, ds: &QuestionnaireDataset) -> Result<CentralRanking> {
        RankingFile {
            items: self.center_map.iter().map(|x| x.item.clone()).collect(),
            stages: self.center_map.iter().map(|x| Some(x.stage)).collect(),
        }
        .to_center(ds)
    }
}

pub fn write_fit_report(report: &FitReport, path: impl AsRef<Path>) -> Result<()> {
    write_json(report, path)
}

pub fn read_fit_report(path: impl AsRef<Path>) -> Result<FitReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, None, e.to_string()))
}

/// One line of a trace file. Stages are internal (`1..=l`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub lambda: f64,
    pub log_post: f64,
    pub stages: Vec<u8>,
}

/// Writes one JSON line per retained sample. A `manifest`, if given, goes on a
/// first line of its own as `{"manifest": ...}`.
pub fn write_trace(
    trace: &McmcTrace,
    manifest: Option<&serde_json::Value>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    if let Some(m) = manifest {
        serde_json::to_writer(&mut out, &serde_json::json!({ "manifest": m }))?;
        out.write_all(b"\n").expect("writing to a Vec");
    }
    for s in &trace.samples {
        let rec = TraceRecord {
            iter: s.iteration,
            lambda: s.lambda,
            log_post: s.log_posterior,
            stages: s.center.stages().to_vec(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n").expect("writing to a Vec");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| Error::format(path, Some(k + 1), e.to_string()))?;
        if k == 0 && value.get("manifest").is_some() {
            continue;
        }
        records.push(
            serde_json::from_value(value).map_err(|e| Error::format(path, Some(k + 1), e.to_string()))?,
        );
    }
    Ok(records)
}
