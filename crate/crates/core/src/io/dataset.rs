use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rankings::{ItemSet, PartialRanking, StageDomain};

/// Questionnaire responses over a fixed item list.
///
/// Stages are held internally as `1..=l`; `stage_label_offset` is the
/// external label of internal stage 1.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionnaireDataset {
    pub items: ItemSet,
    pub domain: StageDomain,
    pub stage_label_offset: i64,
    pub responses: Vec<(String, PartialRanking)>,
    pub provenance: Option<String>,
}

/// The JSON file next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub items: Vec<String>,
    pub l: usize,
    #[serde(default = "default_offset")]
    pub stage_label_offset: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

fn default_offset() -> i64 {
    1
}

/// `data.csv` -> `data.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

impl QuestionnaireDataset {
    pub fn new(
        items: ItemSet,
        domain: StageDomain,
        stage_label_offset: i64,
        responses: Vec<(String, PartialRanking)>,
        provenance: Option<String>,
    ) -> Result<Self> {
        let ds = QuestionnaireDataset {
            items,
            domain,
            stage_label_offset,
            responses,
            provenance,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let n = self.items.len();
        let mut ids = HashMap::new();
        let mut seen = vec![false; n];
        for (id, x) in &self.responses {
            if ids.insert(id.as_str(), ()).is_some() {
                return Err(Error::domain(format!("duplicate respondent id {id:?}")));
            }
            if x.stages().len() != n || x.domain() != self.domain {
                return Err(Error::domain(format!(
                    "respondent {id:?} does not match the item list or stage domain"
                )));
            }
            for i in x.observed() {
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::domain(format!(
                "item {:?} is not observed by any respondent",
                self.items.labels()[i]
            )));
        }
        Ok(())
    }

    pub fn rankings(&self) -> Vec<PartialRanking> {
        self.responses.iter().map(|(_, x)| x.clone()).collect()
    }

    pub fn external_label(&self, stage: u8) -> i64 {
        stage as i64 - 1 + self.stage_label_offset
    }

    /// Internal stage for an external label, if within the domain.
    pub fn internal_stage(&self, label: i64) -> Option<u8> {
        let s = label - self.stage_label_offset + 1;
        (s >= 1 && s <= self.domain.l() as i64).then_some(s as u8)
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            items: self.items.labels().to_vec(),
            l: self.domain.l(),
            stage_label_offset: self.stage_label_offset,
            provenance: self.provenance.clone(),
        }
    }
}

/// Reads `path` (long-form CSV) and its sidecar JSON.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<QuestionnaireDataset> {
    let path = path.as_ref();
    let side_path = sidecar_path(path);
    let side_text = fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&side_text)
        .map_err(|e| Error::format(&side_path, None, e.to_string()))?;
    let items = ItemSet::new(sidecar.items.clone()).map_err(|e| Error::format(&side_path, None, e.to_string()))?;
    let domain = StageDomain::new(sidecar.l).map_err(|e| Error::format(&side_path, None, e.to_string()))?;
    let offset = sidecar.stage_label_offset;
    let n = items.len();

    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes.as_slice());
    let header = reader
        .headers()
        .map_err(|e| Error::format(path, Some(1), e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["respondent_id", "item", "stage"] {
        return Err(Error::format(
            path,
            Some(1),
            "header must be respondent_id,item,stage",
        ));
    }

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, (Vec<Option<u8>>, usize)> = HashMap::new();
    let mut filled: HashMap<(String, usize), ()> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map(|p| p.line() as usize);
            Error::format(path, row, e.to_string())
        })?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 3 {
            return Err(Error::format(path, Some(row), "expected 3 fields"));
        }
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(Error::format(path, Some(row), "empty respondent id"));
        }
        let item_label = record[1].trim();
        let item = items
            .index_of(item_label)
            .ok_or_else(|| Error::format(path, Some(row), format!("unknown item {item_label:?}")))?;
        if filled.insert((id.clone(), item), ()).is_some() {
            return Err(Error::format(
                path,
                Some(row),
                format!("duplicate cell for respondent {id:?}, item {item_label:?}"),
            ));
        }
        let cell = record[2].trim();
        let stage = if cell.is_empty() {
            None
        } else {
            let label: i64 = cell
                .parse()
                .map_err(|_| Error::format(path, Some(row), format!("stage {cell:?} is not an integer")))?;
            let internal = label - offset + 1;
            if internal < 1 || internal > domain.l() as i64 {
                return Err(Error::format(
                    path,
                    Some(row),
                    format!(
                        "stage {label} outside the declared labels {}..={}",
                        offset,
                        offset + domain.l() as i64 - 1
                    ),
                ));
            }
            Some(internal as u8)
        };
        let entry = rows.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            (vec![None; n], row)
        });
        entry.0[item] = stage;
    }

    let mut responses = Vec::with_capacity(order.len());
    for id in order {
        let (stages, first_row) = rows.remove(&id).expect("respondent recorded");
        let x = PartialRanking::new(stages, domain).map_err(|_| {
            Error::format(
                path,
                Some(first_row),
                format!("respondent {id:?} has no observed items"),
            )
        })?;
        responses.push((id, x));
    }
    QuestionnaireDataset::new(items, domain, offset, responses, sidecar.provenance)
        .map_err(|e| Error::format(path, None, e.to_string()))
}

/// Writes the CSV and its sidecar. Rows follow respondent order, then item order.
pub fn write_dataset(ds: &QuestionnaireDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("respondent_id,item,stage\n");
    for (id, x) in &ds.responses {
        for i in x.observed() {
            let stage = x.stages()[i].expect("observed");
            out.push_str(&csv_field(id));
            out.push(',');
            out.push_str(&csv_field(&ds.items.labels()[i]));
            out.push(',');
            out.push_str(&ds.external_label(stage).to_string());
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))?;
    let side_path = sidecar_path(path);
    let mut json = serde_json::to_string_pretty(&ds.sidecar())?;
    json.push('\n');
    fs::write(&side_path, json).map_err(|e| Error::io(&side_path, e))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) || s.trim() != s {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Fraction of respondents with an observed stage, per item.
pub fn item_response_rates(ds: &QuestionnaireDataset) -> Vec<f64> {
    let mut counts = vec![0usize; ds.items.len()];
    for (_, x) in &ds.responses {
        for i in x.observed() {
            counts[i] += 1;
        }
    }
    let m = ds.responses.len() as f64;
    counts.into_iter().map(|c| c as f64 / m).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredDataset {
    pub dataset: QuestionnaireDataset,
    /// Ids of respondents left with no observed item.
    pub dropped_respondents: Vec<String>,
}

/// Keeps the items with a response rate of at least `min_rate`.
pub fn filter_items(ds: &QuestionnaireDataset, min_rate: f64) -> Result<FilteredDataset> {
    if !(0.0..=1.0).contains(&min_rate) {
        return Err(Error::domain(format!("minimum rate must lie in [0, 1], got {min_rate}")));
    }
    let rates = item_response_rates(ds);
    let keep: Vec<usize> = (0..rates.len()).filter(|&i| rates[i] >= min_rate).collect();
    if keep.is_empty() {
        return Err(Error::domain(format!("no item reaches a response rate of {min_rate}")));
    }
    let items = ItemSet::new(keep.iter().map(|&i| ds.items.labels()[i].clone()).collect())?;
    let mut responses = Vec::new();
    let mut dropped = Vec::new();
    for (id, x) in &ds.responses {
        let stages: Vec<Option<u8>> = keep.iter().map(|&i| x.stages()[i]).collect();
        match PartialRanking::new(stages, ds.domain) {
            Ok(r) => responses.push((id.clone(), r)),
            Err(_) => dropped.push(id.clone()),
        }
    }
    let dataset = QuestionnaireDataset::new(
        items,
        ds.domain,
        ds.stage_label_offset,
        responses,
        ds.provenance.clone(),
    )?;
    Ok(FilteredDataset {
        dataset,
        dropped_respondents: dropped,
    })
}
