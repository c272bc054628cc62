//! Markdown and CSV rendering of similarity matrices, result tables and the
//! dataset overview, plus a lossless line-delimited result export.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::DatasetMeta;
use crate::error::{Error, Result};
use crate::experiments::ExperimentResult;
use crate::similarity::{Measure, SimilarityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "md" | "markdown" => Ok(Format::Markdown),
            other => Err(format!("unknown format `{other}` (expected csv or markdown)")),
        }
    }
}

/// Marker for cells without a value.
pub const ABSENT: &str = "X";

/// Rounds the shortest decimal representation of `value` to `places`
/// digits, halves away from zero.
pub fn round_half_away(value: f64, places: usize) -> String {
    if !value.is_finite() {
        return value.to_string();
    }
    let repr = value.abs().to_string();
    let (int_part, frac_part) = repr.split_once('.').unwrap_or((&repr, ""));
    let mut digits: Vec<u8> = int_part.bytes().chain(frac_part.bytes().chain(std::iter::repeat(b'0')).take(places)).map(|b| b - b'0').collect();
    if frac_part.as_bytes().get(places).is_some_and(|&d| d >= b'5') {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - places;
    let mut out = String::new();
    if value < 0.0 && digits.iter().any(|&d| d != 0) {
        out.push('-');
    }
    out.extend(digits[..split].iter().map(|d| char::from(b'0' + d)));
    if places > 0 {
        out.push('.');
        out.extend(digits[split..].iter().map(|d| char::from(b'0' + d)));
    }
    out
}

fn two(value: f64) -> String {
    round_half_away(value, 2)
}

fn csv_text(rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn markdown_text(rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| c.replace('|', "\\|")).collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
        if i == 0 {
            let _ = writeln!(out, "|{}", "---|".repeat(row.len()));
        }
    }
    out
}

fn render_rows(rows: &[Vec<String>], format: Format) -> String {
    match format {
        Format::Csv => csv_text(rows),
        Format::Markdown => markdown_text(rows),
    }
}

/// Upper-triangular grid with dataset ids as headers; the lower triangle is blank.
pub fn render_similarity_matrix(matrix: &SimilarityMatrix, format: Format) -> String {
    let k = matrix.ids.len();
    let mut rows = vec![std::iter::once(String::new())
        .chain(matrix.ids.iter().map(|id| id.to_string()))
        .collect::<Vec<_>>()];
    for i in 0..k {
        let mut row = vec![matrix.ids[i].to_string()];
        for j in 0..k {
            row.push(if j < i {
                String::new()
            } else if i == j && matrix.measure != Measure::Definition {
                two(1.0)
            } else {
                matrix.get(i, j).map(two).unwrap_or_else(|| ABSENT.to_string())
            });
        }
        rows.push(row);
    }
    render_rows(&rows, format)
}

pub const RESULT_COLUMNS: [&str; 7] = [
    "Target",
    "Training Datasets",
    "NonHate Prec",
    "NonHate Rec",
    "Hate Prec",
    "Hate Rec",
    "F1",
];

/// Column name of the CSV flag column listing the maxima a row holds.
pub const MAXIMA_COLUMN: &str = "Maxima";

/// One row per result; the maximum of each numeric column is marked (bold in
/// Markdown, listed in a flag column in CSV). Ties are all marked.
pub fn render_results_table(results: &[ExperimentResult], format: Format) -> Result<String> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let numeric: Vec<[String; 5]> = results
        .iter()
        .map(|r| {
            let m = &r.metrics;
            [
                two(m.non_hate.precision),
                two(m.non_hate.recall),
                two(m.hate.precision),
                two(m.hate.recall),
                two(m.macro_f1),
            ]
        })
        .collect();
    let maxima: Vec<f64> = (0..5)
        .map(|c| {
            numeric
                .iter()
                .map(|row| row[c].parse::<f64>().expect("rendered number"))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let is_max = |row: &[String; 5], c: usize| row[c].parse::<f64>().expect("rendered number") == maxima[c];

    let mut header: Vec<String> = RESULT_COLUMNS.iter().map(|s| s.to_string()).collect();
    if format == Format::Csv {
        header.push(MAXIMA_COLUMN.to_string());
    }
    let mut rows = vec![header];
    for (r, cells) in results.iter().zip(&numeric) {
        let mut row = vec![r.spec.target.to_string(), r.spec.training_label()];
        match format {
            Format::Markdown => {
                row.extend((0..5).map(|c| if is_max(cells, c) { format!("**{}**", cells[c]) } else { cells[c].clone() }));
            }
            Format::Csv => {
                row.extend(cells.iter().cloned());
                let flags: Vec<&str> = (0..5).filter(|&c| is_max(cells, c)).map(|c| RESULT_COLUMNS[c + 2]).collect();
                row.push(flags.join(";"));
            }
        }
        rows.push(row);
    }
    Ok(render_rows(&rows, format))
}

/// Dataset overview: id, language, platform, size and percentage of hate.
pub fn render_stats_table(metas: &[DatasetMeta], format: Format) -> String {
    let mut rows = vec![["ID", "Language", "Platform", "Size", "% Hate"].map(String::from).to_vec()];
    for m in metas {
        rows.push(vec![
            m.dataset_id.to_string(),
            m.language.to_string(),
            m.platform.to_string(),
            m.size.to_string(),
            two(m.hate_fraction * 100.0),
        ]);
    }
    render_rows(&rows, format)
}

/// One JSON object per line.
pub fn export_results(results: &[ExperimentResult]) -> String {
    results
        .iter()
        .map(|r| serde_json::to_string(r).expect("result serializes") + "\n")
        .collect()
}

/// Inverse of [`export_results`]; blank lines are ignored.
pub fn parse_results(text: &str) -> Result<Vec<ExperimentResult>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub body: String,
}

/// A titled Markdown document assembled from rendered tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub title: String,
    pub sections: Vec<Section>,
    /// Files or inputs the sections were rendered from.
    pub sources: Vec<String>,
}

impl ReportDocument {
    pub fn new(title: impl Into<String>) -> Self {
        ReportDocument {
            title: title.into(),
            sections: Vec::new(),
            sources: Vec::new(),
        }
    }

    pub fn push(&mut self, heading: impl Into<String>, body: impl Into<String>) {
        self.sections.push(Section {
            heading: heading.into(),
            body: body.into(),
        });
    }

    pub fn render(&self) -> String {
        let mut out = format!("# {}\n", self.title);
        for s in &self.sections {
            let _ = write!(out, "\n## {}\n\n{}", s.heading, s.body);
            if !s.body.ends_with('\n') {
                out.push('\n');
            }
        }
        if !self.sources.is_empty() {
            out.push_str("\n## Sources\n\n");
            for src in &self.sources {
                let _ = writeln!(out, "- {src}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DatasetId;
    use crate::experiments::{Contribution, ExperimentSpec};
    use crate::model::{Confusion, Metrics};
    use crate::similarity::SimilarityScore;

    fn id(s: &str) -> DatasetId {
        DatasetId::new(s).unwrap()
    }

    #[test]
    fn rounding() {
        assert_eq!(round_half_away(0.555, 2), "0.56");
        assert_eq!(round_half_away(0.125, 2), "0.13");
        assert_eq!(round_half_away(-0.125, 2), "-0.13");
        assert_eq!(round_half_away(0.994, 2), "0.99");
        assert_eq!(round_half_away(0.995, 2), "1.00");
        assert_eq!(round_half_away(9.999, 2), "10.00");
        assert_eq!(round_half_away(1.0, 2), "1.00");
        assert_eq!(round_half_away(0.0, 2), "0.00");
        assert_eq!(round_half_away(-0.001, 2), "0.00");
        assert_eq!(round_half_away(37.36, 2), "37.36");
        assert_eq!(round_half_away(1e-7, 2), "0.00");
        assert_eq!(round_half_away(2.5, 0), "3");
    }

    fn matrix(measure: Measure, values: &[Option<f64>]) -> SimilarityMatrix {
        let ids = vec![id("EY1"), id("ET4"), id("EW1")];
        let mut scores = Vec::new();
        let mut k = 0;
        for i in 0..3 {
            for j in i..3 {
                scores.push(SimilarityScore { pair: (ids[i].clone(), ids[j].clone()), measure, value: values[k] });
                k += 1;
            }
        }
        SimilarityMatrix { measure, ids, scores }
    }

    #[test]
    fn content_matrix_layout() {
        let m = matrix(Measure::Content, &[Some(1.0), Some(0.555), Some(0.4), Some(1.0), Some(0.3), Some(1.0)]);
        let md = render_similarity_matrix(&m, Format::Markdown);
        assert_eq!(
            md,
            "|  | EY1 | ET4 | EW1 |\n|---|---|---|---|\n| EY1 | 1.00 | 0.56 | 0.40 |\n| ET4 |  | 1.00 | 0.30 |\n| EW1 |  |  | 1.00 |\n"
        );
        let csv = render_similarity_matrix(&m, Format::Csv);
        assert_eq!(csv, ",EY1,ET4,EW1\nEY1,1.00,0.56,0.40\nET4,,1.00,0.30\nEW1,,,1.00\n");
    }

    #[test]
    fn definition_matrix_marks_absent() {
        let m = matrix(Measure::Definition, &[None, Some(0.7), None, None, None, None]);
        let csv = render_similarity_matrix(&m, Format::Csv);
        assert_eq!(csv, ",EY1,ET4,EW1\nEY1,X,0.70,X\nET4,,X,X\nEW1,,,X\n");
    }

    fn result(target: &str, augments: &[&str], nh: (f64, f64), h: (f64, f64), f1: f64) -> ExperimentResult {
        let spec = ExperimentSpec::new(id(target), 1).with_augments(augments.iter().map(|a| id(a)));
        let mut metrics = Metrics::from_confusion(Confusion { true_pos: 1, false_pos: 1, false_neg: 1, true_neg: 1 });
        metrics.non_hate.precision = nh.0;
        metrics.non_hate.recall = nh.1;
        metrics.hate.precision = h.0;
        metrics.hate.recall = h.1;
        metrics.macro_f1 = f1;
        ExperimentResult {
            spec,
            metrics,
            test_fingerprint: "0123456789abcdef0123456789abcdef".into(),
            train_size: 10,
            test_size: 4,
            contributions: vec![Contribution { dataset_id: id(target), records: 10 }],
        }
    }

    #[test]
    fn single_row_all_marked() {
        let r = vec![result("EY1", &[], (0.67, 0.55), (0.62, 0.73), 0.64)];
        let md = render_results_table(&r, Format::Markdown).unwrap();
        assert!(md.ends_with("| EY1 | EY1 | **0.67** | **0.55** | **0.62** | **0.73** | **0.64** |\n"), "{md}");
        let csv = render_results_table(&r, Format::Csv).unwrap();
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "EY1,EY1,0.67,0.55,0.62,0.73,0.64,NonHate Prec;NonHate Rec;Hate Prec;Hate Rec;F1"
        );
    }

    #[test]
    fn combination_label_and_ties() {
        let r = vec![
            result("EY1", &["ET4", "EG1"], (0.83, 0.61), (0.69, 0.87), 0.741),
            result("EY1", &[], (0.67, 0.55), (0.62, 0.73), 0.739),
        ];
        let md = render_results_table(&r, Format::Markdown).unwrap();
        let rows: Vec<&str> = md.lines().collect();
        assert!(rows[2].starts_with("| EY1 | EY1+ET4+EG1 |"));
        // 0.741 and 0.739 both render 0.74, so both are marked
        assert!(rows[2].ends_with("**0.74** |") && rows[3].ends_with("**0.74** |"));
        assert!(rows[3].contains("| 0.67 |"));
        assert!(matches!(render_results_table(&[], Format::Csv), Err(Error::EmptyResults)));
    }

    #[test]
    fn csv_quoting() {
        let r = vec![result("EY1", &[], (0.5, 0.5), (0.5, 0.5), 0.5)];
        let csv = render_results_table(&r, Format::Csv).unwrap();
        let mut reader = csv::Reader::from_reader(csv.as_bytes());
        assert_eq!(reader.headers().unwrap().len(), 8);
        assert_eq!(reader.records().count(), 1);
    }

    #[test]
    fn export_round_trip() {
        let r = vec![
            result("EY1", &["ET4"], (0.1 + 0.2, 1.0 / 3.0), (0.62, 0.73), 0.64),
            result("GY1", &[], (0.77, 0.6), (0.67, 0.82), 0.71),
        ];
        let text = export_results(&r);
        assert_eq!(text.lines().count(), 2);
        let back = parse_results(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back[0].test_fingerprint, "0123456789abcdef0123456789abcdef");
        assert_eq!(export_results(&[]), "");
        assert!(parse_results("").unwrap().is_empty());
        assert!(matches!(parse_results("{\"x\":1}\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn document_render() {
        let mut doc = ReportDocument::new("Results");
        doc.push("Table", "| a |\n");
        doc.sources.push("results.jsonl".into());
        let text = doc.render();
        assert_eq!(text, "# Results\n\n## Table\n\n| a |\n\n## Sources\n\n- results.jsonl\n");
        assert_eq!(text, doc.render());
    }
}
