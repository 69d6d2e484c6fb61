//! Summary table of macro accuracies: one row per (split, similarity kind),
//! and per dataset a paired `PDL - PML` cell plus a DL cell shared by all
//! rows of a split block.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::experiments::{load_results, macro_accuracy, GroupField, Method, RunResult, SplitMode};
use crate::similarity::SimilarityKind;

/// Rendered in place of a cell with no results.
pub const MISSING: &str = "—";

/// Column group label used when there are no results at all.
pub const PLACEHOLDER_DATASET: &str = "dataset";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetCells {
    pub pdl: Option<f64>,
    pub pml: Option<f64>,
    /// Same value on every row of a split block.
    pub dl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub split: SplitMode,
    pub kind: SimilarityKind,
    /// Aligned with [`ReportTable::datasets`].
    pub cells: Vec<DatasetCells>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub datasets: Vec<String>,
    /// Always six rows: SI then HYB, each with physical, sensor and
    /// physical sensor.
    pub rows: Vec<ReportRow>,
}

/// Row label of a similarity kind.
pub fn kind_label(kind: SimilarityKind) -> &'static str {
    match kind {
        SimilarityKind::Physical => "physical",
        SimilarityKind::Sensor => "sensor",
        SimilarityKind::PhysicalSensor => "physical sensor",
    }
}

/// Accuracy in percent with two decimals, or [`MISSING`].
pub fn format_percent(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:.2}", 100.0 * v),
        None => MISSING.to_string(),
    }
}

/// Builds the table with dataset columns in order of first appearance.
pub fn report_table(results: &[RunResult]) -> ReportTable {
    let mut datasets: Vec<String> = Vec::new();
    for r in results {
        if !datasets.contains(&r.dataset) {
            datasets.push(r.dataset.clone());
        }
    }
    if datasets.is_empty() {
        datasets.push(PLACEHOLDER_DATASET.to_string());
    }
    report_table_for(results, &datasets)
}

/// Builds the table for the given dataset columns; results of other
/// datasets are ignored.
pub fn report_table_for(results: &[RunResult], datasets: &[String]) -> ReportTable {
    let fields = [GroupField::Dataset, GroupField::Method, GroupField::SimKind, GroupField::Split];
    let cells: HashMap<Vec<String>, f64> = macro_accuracy(results, &fields)
        .map(|rows| rows.into_iter().map(|r| (r.key, r.accuracy)).collect())
        .unwrap_or_default();
    let lookup = |dataset: &str, method: Method, kind: Option<SimilarityKind>, split: SplitMode| {
        let key = vec![
            dataset.to_string(),
            method.to_string(),
            kind.map(|k| k.to_string()).unwrap_or_default(),
            split.to_string(),
        ];
        cells.get(&key).copied()
    };

    let mut rows = Vec::with_capacity(6);
    for split in SplitMode::ALL {
        for kind in SimilarityKind::ALL {
            rows.push(ReportRow {
                split,
                kind,
                cells: datasets
                    .iter()
                    .map(|d| DatasetCells {
                        pdl: lookup(d, Method::Pdl, Some(kind), split),
                        pml: lookup(d, Method::Pml, Some(kind), split),
                        dl: lookup(d, Method::Dl, None, split),
                    })
                    .collect(),
            });
        }
    }
    ReportTable {
        datasets: datasets.to_vec(),
        rows,
    }
}

pub fn report_table_from_csv(path: &Path) -> Result<ReportTable> {
    Ok(report_table(&load_results(path)?))
}

impl ReportTable {
    /// Fixed-width text. The DL value of a split block is printed on the
    /// block's first row and left blank below it.
    pub fn render_text(&self) -> String {
        let mut header = vec!["Split".to_string(), "Similarity".to_string()];
        for d in &self.datasets {
            header.push(format!("{d} PDL - PML"));
            header.push(format!("{d} DL"));
        }
        let mut body: Vec<Vec<String>> = Vec::new();
        let mut block_starts = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            let first_in_block = i == 0 || self.rows[i - 1].split != row.split;
            if first_in_block {
                block_starts.push(body.len());
            }
            let mut line = vec![
                if first_in_block { row.split.to_string() } else { String::new() },
                kind_label(row.kind).to_string(),
            ];
            for c in &row.cells {
                line.push(format!("{} - {}", format_percent(c.pdl), format_percent(c.pml)));
                line.push(if first_in_block { format_percent(c.dl) } else { String::new() });
            }
            body.push(line);
        }

        let width = |s: &str| s.chars().count();
        let mut widths: Vec<usize> = header.iter().map(|h| width(h)).collect();
        for line in &body {
            for (w, cell) in widths.iter_mut().zip(line) {
                *w = (*w).max(width(cell));
            }
        }
        let format_line = |cells: &[String]| {
            let mut s = String::new();
            for (j, (cell, w)) in cells.iter().zip(&widths).enumerate() {
                if j > 0 {
                    s.push_str(" | ");
                }
                s.push_str(cell);
                s.extend(std::iter::repeat_n(' ', w - width(cell)));
            }
            s.trim_end().to_string()
        };
        let rule: String = widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .join("-+-");

        let mut out = String::new();
        writeln!(out, "{}", format_line(&header)).unwrap();
        for (i, line) in body.iter().enumerate() {
            if block_starts.contains(&i) {
                writeln!(out, "{rule}").unwrap();
            }
            writeln!(out, "{}", format_line(line)).unwrap();
        }
        out
    }

    /// `split,similarity,<d>_pdl,<d>_pml,<d>_dl,...` with percentages; missing
    /// cells are empty and the DL value is repeated on each row of its block.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("split,similarity");
        for d in &self.datasets {
            write!(out, ",{d}_pdl,{d}_pml,{d}_dl").unwrap();
        }
        out.push('\n');
        let csv_cell = |v: Option<f64>| v.map(|v| format!("{:.2}", 100.0 * v)).unwrap_or_default();
        for row in &self.rows {
            write!(out, "{},{}", row.split, kind_label(row.kind)).unwrap();
            for c in &row.cells {
                write!(out, ",{},{},{}", csv_cell(c.pdl), csv_cell(c.pml), csv_cell(c.dl)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_results(dataset: &str, accuracy: f64) -> Vec<RunResult> {
        let mut out = Vec::new();
        for split in SplitMode::ALL {
            for subject in ["a", "b"] {
                let base = RunResult {
                    dataset: dataset.into(),
                    method: Method::Dl,
                    sim_kind: None,
                    split,
                    subject_id: subject.into(),
                    m: None,
                    n_test: 4,
                    accuracy,
                };
                out.push(base.clone());
                for kind in SimilarityKind::ALL {
                    out.push(RunResult {
                        method: Method::Pml,
                        sim_kind: Some(kind),
                        ..base.clone()
                    });
                    for m in [10, 15] {
                        out.push(RunResult {
                            method: Method::Pdl,
                            sim_kind: Some(kind),
                            m: Some(m),
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }

    #[test]
    fn half_accuracy_renders_fifty_everywhere() {
        let table = report_table(&full_results("unimib", 0.5));
        assert_eq!(table.rows.len(), 6);
        let text = table.render_text();
        assert!(!text.contains(MISSING));
        assert_eq!(text.matches("50.00 - 50.00").count(), 6);
        assert_eq!(text.matches("50.00").count(), 12 + 2);
    }

    #[test]
    fn empty_results_render_placeholders() {
        let table = report_table(&[]);
        assert_eq!(table.datasets, vec![PLACEHOLDER_DATASET.to_string()]);
        let text = table.render_text();
        let header: Vec<&str> = text.lines().next().unwrap().split('|').map(str::trim).collect();
        assert_eq!(header, ["Split", "Similarity", "dataset PDL - PML", "dataset DL"]);
        assert_eq!(text.matches("— - —").count(), 6);
        assert!(table.to_csv().ends_with("HYB,physical sensor,,,\n"));
    }

    #[test]
    fn missing_cells_are_not_fabricated() {
        let only_pml: Vec<RunResult> = full_results("d", 0.25)
            .into_iter()
            .filter(|r| r.method == Method::Pml && r.split == SplitMode::Si)
            .collect();
        let table = report_table(&only_pml);
        let c = table.rows[0].cells[0];
        assert_eq!((c.pdl, c.pml, c.dl), (None, Some(0.25), None));
        assert_eq!(table.rows[3].cells[0].pml, None);
        assert!(table.render_text().contains("— - 25.00"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut rs = full_results("unimib", 0.5);
        rs.extend(full_results("motionsense", 0.75));
        let a = report_table(&rs);
        assert_eq!(a.datasets, vec!["unimib".to_string(), "motionsense".to_string()]);
        assert_eq!(a.render_text(), report_table(&rs).render_text());
        assert_eq!(a.to_csv(), report_table(&rs).to_csv());
        assert!(a.to_csv().starts_with(
            "split,similarity,unimib_pdl,unimib_pml,unimib_dl,motionsense_pdl,motionsense_pml,motionsense_dl\n"
        ));
    }
}
