use partial_mallows::inference::{mcmc_fit, McmcConfig, PriorConfig};
use partial_mallows::io::{
    read_dataset, read_fit_report, read_ranking_file, read_trace, write_dataset, write_fit_report,
    write_heatmap_svg, write_json, write_trace, FitReport, QuestionnaireDataset, RankingFile,
};
use partial_mallows::mallows::PartitionCache;
use partial_mallows::rankings::{CentralRanking, DistanceConfig, ItemSet, PartialRanking, StageDomain};
use serde_json::json;

fn dataset() -> QuestionnaireDataset {
    let d = StageDomain::new(3).unwrap();
    let rows = [
        vec![Some(1), Some(2), Some(3)],
        vec![Some(1), Some(1), None],
        vec![Some(2), None, Some(3)],
        vec![Some(1), Some(3), Some(3)],
    ];
    let responses = rows
        .iter()
        .enumerate()
        .map(|(k, r)| (format!("r{k}"), PartialRanking::new(r.clone(), d).unwrap()))
        .collect();
    let items = ItemSet::new(vec!["a, b".into(), "c".into(), "d \"e\"".into()]).unwrap();
    QuestionnaireDataset::new(items, d, 2, responses, Some("test".into())).unwrap()
}

fn fit(ds: &QuestionnaireDataset) -> partial_mallows::inference::FitResult {
    let prior = PriorConfig::new(CentralRanking::new(vec![1, 2, 3], ds.domain).unwrap());
    let mcmc = McmcConfig {
        iterations: 60,
        burn_in: 10,
        ..Default::default()
    };
    mcmc_fit(&ds.rankings(), &prior, &mcmc, DistanceConfig::default(), &PartitionCache::new()).unwrap()
}

#[test]
fn dataset_with_quoted_labels_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset();
    let path = dir.path().join("d.csv");
    write_dataset(&ds, &path).unwrap();
    assert_eq!(read_dataset(&path).unwrap(), ds);
}

#[test]
fn trace_round_trips_with_and_without_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let result = fit(&dataset());
    let manifest = json!({"seed": 7});
    for header in [None, Some(&manifest)] {
        let path = dir.path().join("t.jsonl");
        write_trace(&result.trace, header, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.starts_with("{\"manifest\""), header.is_some());
        let records = read_trace(&path).unwrap();
        assert_eq!(records.len(), 50);
        for (r, s) in records.iter().zip(&result.trace.samples) {
            assert_eq!(r.iter, s.iteration);
            assert_eq!(r.lambda, s.lambda);
            assert_eq!(r.log_post, s.log_posterior);
            assert_eq!(r.stages, s.center.stages());
        }
    }
}

#[test]
fn report_uses_external_labels_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset();
    let result = fit(&ds);
    let report = FitReport::new(&result, &ds, json!({"k": "v"}));
    assert_eq!(report.stage_labels, vec![2, 3, 4]);
    assert!(report.center_map.iter().all(|x| (2..=4).contains(&x.stage)));
    assert_eq!(report.center_map_internal(&ds).unwrap(), result.center_map);
    let path = dir.path().join("r.json");
    write_fit_report(&report, &path).unwrap();
    assert_eq!(read_fit_report(&path).unwrap(), report);
}

#[test]
fn ranking_file_aligns_by_item_name() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset();
    let file = RankingFile {
        items: vec!["c".into(), "d \"e\"".into(), "a, b".into()],
        stages: vec![Some(3), Some(4), Some(2)],
    };
    let path = dir.path().join("x.json");
    write_json(&file, &path).unwrap();
    let back = read_ranking_file(&path).unwrap();
    assert_eq!(back.to_center(&ds).unwrap().stages(), &[1, 2, 3]);
    let bad = RankingFile {
        items: vec!["c".into(), "zzz".into(), "a, b".into()],
        stages: vec![Some(3), Some(4), Some(2)],
    };
    assert!(bad.to_center(&ds).is_err());
    let out_of_range = RankingFile {
        stages: vec![Some(3), Some(9), Some(2)],
        ..file
    };
    assert!(out_of_range.to_center(&ds).is_err());
}

#[test]
fn heatmap_embeds_escaped_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset();
    let result = fit(&ds);
    let path = dir.path().join("h.svg");
    write_heatmap_svg(&result.marginals, &ds, Some(r#"{"a":"<b>"}"#), &path).unwrap();
    let svg = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = svg.lines().collect();
    assert!(lines[1].starts_with("<svg "));
    assert_eq!(lines[2], "<metadata>{&quot;a&quot;:&quot;&lt;b&gt;&quot;}</metadata>");
    assert_eq!(svg.matches("<rect ").count(), 9);
}
