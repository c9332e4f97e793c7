use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::inference::StageMarginals;
use crate::io::dataset::QuestionnaireDataset;

const CELL_W: usize = 56;
const CELL_H: usize = 28;
const LABEL_W: usize = 320;
const HEADER_H: usize = 40;
const FILL: &str = "#08306b";

/// Items x stages grid, each cell shaded by its posterior frequency.
///
/// Every cell is one `<rect class="cell">` with `fill-opacity` equal to the
/// frequency, so a frequency of 1 renders fully shaded.
pub fn render_heatmap(marginals: &StageMarginals, items: &[String], stage_labels: &[i64]) -> String {
    let width = LABEL_W + CELL_W * marginals.l + 10;
    let height = HEADER_H + CELL_H * marginals.n + 10;
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="14" text-anchor="middle">stage</text>"#,
        LABEL_W + CELL_W * marginals.l / 2
    );
    for (s, label) in stage_labels.iter().enumerate().take(marginals.l) {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#,
            LABEL_W + CELL_W * s + CELL_W / 2,
            HEADER_H - 8
        );
    }
    for (i, row) in marginals.frequencies.iter().enumerate() {
        let y = HEADER_H + CELL_H * i;
        let name = items.get(i).map(String::as_str).unwrap_or("");
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LABEL_W - 8,
            y + CELL_H / 2 + 4,
            escape(name)
        );
        for (s, f) in row.iter().enumerate() {
            let _ = writeln!(
                svg,
                r##"<rect class="cell" data-item="{i}" data-stage="{}" x="{}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{FILL}" fill-opacity="{f}" stroke="#999999" stroke-width="0.5"/>"##,
                s + 1,
                LABEL_W + CELL_W * s,
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Renders the heatmap for `ds` and writes it, embedding `metadata` (if any)
/// as the text of a `<metadata>` element.
pub fn write_heatmap_svg(
    marginals: &StageMarginals,
    ds: &QuestionnaireDataset,
    metadata: Option<&str>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let labels: Vec<i64> = (1..=ds.domain.l() as u8).map(|s| ds.external_label(s)).collect();
    let mut svg = render_heatmap(marginals, ds.items.labels(), &labels);
    if let Some(meta) = metadata {
        // After the XML declaration and the opening <svg> line.
        let at = svg.match_indices('\n').nth(1).map(|(k, _)| k + 1).unwrap_or(svg.len());
        svg.insert_str(at, &format!("<metadata>{}</metadata>\n", escape(meta)));
    }
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}
