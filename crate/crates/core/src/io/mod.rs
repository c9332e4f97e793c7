//! Dataset ingestion and result serialization.
//!
//! * dataset: long-form CSV `respondent_id,item,stage` with one row per
//!   observed cell, plus a sidecar JSON `{items, l, stage_label_offset}`;
//! * report: MAP fit report (JSON), ranking files, line-delimited traces;
//! * svg: the item-by-stage posterior heatmap.

mod dataset;
mod report;
mod svg;

pub use dataset::{
    filter_items, item_response_rates, read_dataset, sidecar_path, write_dataset, FilteredDataset,
    QuestionnaireDataset, Sidecar,
};
pub use report::{
    read_fit_report, read_ranking_file, read_trace, write_fit_report, write_json, write_trace,
    AcceptanceRates, Evaluation, FitReport, ItemStage, MarginalRow, RankingFile, TraceRecord,
};
pub use svg::{render_heatmap, write_heatmap_svg};
