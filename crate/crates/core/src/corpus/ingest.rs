//! Parsing of source dataset files (delimited tables or JSON lines) into the
//! canonical schema, driven by a [`Mapping`].

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Availability, CommentRecord, Dataset, DatasetId, Label, LanguageCode, Platform};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    /// Delimited text with a header row and RFC-4180 quoting.
    Csv,
    /// One JSON object per line.
    Jsonl,
}

fn default_availability() -> Availability {
    Availability::Partial
}

fn default_delimiter() -> char {
    ','
}

/// Column bindings for one source file, usually read from a TOML file.
///
/// ```toml
/// dataset_id = "EY1"
/// language = "en"
/// platform = "youtube"
/// availability = "partial"
/// format = "csv"
/// text_column = "comment"
/// label_column = "label"
/// hate_words_column = "hate_words"   # optional, `;`-separated
///
/// [label_map]
/// "1" = "hate"
/// "0" = "non_hate"
/// ```
///
/// An empty `label_map` means `"1"` is hate and `"0"` is non-hate. Empty label
/// cells (and JSON `null`) leave the record unlabeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mapping {
    pub dataset_id: DatasetId,
    pub language: LanguageCode,
    pub platform: Platform,
    #[serde(default = "default_availability")]
    pub availability: Availability,
    pub format: FileFormat,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    pub text_column: String,
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(default)]
    pub label_map: BTreeMap<String, Label>,
    #[serde(default)]
    pub hate_words_column: Option<String>,
    #[serde(default)]
    pub codebook: Option<String>,
}

impl Mapping {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidMapping(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    fn label_for(&self, value: &str) -> Option<Label> {
        if self.label_map.is_empty() {
            match value {
                "1" => Some(Label::Hate),
                "0" => Some(Label::NonHate),
                _ => None,
            }
        } else {
            self.label_map.get(value).copied()
        }
    }
}

pub fn parse_dataset_file(path: &Path, mapping: &Mapping) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_dataset_reader(&bytes, mapping, path)
}

/// Parses in-memory file content. `source` is used in error messages only.
pub fn parse_dataset_reader(bytes: &[u8], mapping: &Mapping, source: &Path) -> Result<Dataset> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(Error::EmptyFile {
            path: source.to_path_buf(),
        });
    }
    let rows = match mapping.format {
        FileFormat::Csv => csv_rows(bytes, mapping, source)?,
        FileFormat::Jsonl => jsonl_rows(bytes, mapping, source)?,
    };
    if rows.is_empty() {
        return Err(Error::EmptyFile {
            path: source.to_path_buf(),
        });
    }

    let mut records = Vec::with_capacity(rows.len());
    for (index, row) in rows.into_iter().enumerate() {
        let label = match row.label.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(value) => Some(mapping.label_for(value).ok_or_else(|| Error::UnmappableLabel {
                path: source.to_path_buf(),
                line: row.line,
                value: value.to_string(),
            })?),
        };
        records.push(CommentRecord::new(
            mapping.dataset_id.clone(),
            mapping.platform,
            mapping.language.clone(),
            index as u64,
            row.text,
            label,
            row.hate_words,
        ));
    }
    Ok(Dataset::from_records(
        mapping.dataset_id.clone(),
        mapping.language.clone(),
        mapping.platform,
        mapping.availability,
        mapping.codebook.clone(),
        records,
    ))
}

struct RawRow {
    line: u64,
    text: String,
    label: Option<String>,
    hate_words: Vec<String>,
}

fn split_words(cell: &str) -> Vec<String> {
    cell.split(';')
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

fn csv_rows(bytes: &[u8], mapping: &Mapping, source: &Path) -> Result<Vec<RawRow>> {
    if !mapping.delimiter.is_ascii() {
        return Err(Error::InvalidMapping(format!(
            "delimiter `{}` must be a single ASCII character",
            mapping.delimiter
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter as u8)
        .has_headers(true)
        .from_reader(bytes);
    let malformed = |line: u64, message: String| Error::MalformedRow {
        path: source.to_path_buf(),
        line,
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: source.to_path_buf(),
                column: name.to_string(),
            })
    };
    let text_idx = column(&mapping.text_column)?;
    let label_idx = mapping.label_column.as_deref().map(column).transpose()?;
    let words_idx = mapping.hate_words_column.as_deref().map(column).transpose()?;

    let mut rows = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        rows.push(RawRow {
            line,
            text: record[text_idx].to_string(),
            label: label_idx.map(|i| record[i].to_string()),
            hate_words: words_idx.map(|i| split_words(&record[i])).unwrap_or_default(),
        });
    }
    Ok(rows)
}

fn jsonl_rows(bytes: &[u8], mapping: &Mapping, source: &Path) -> Result<Vec<RawRow>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::MalformedRow {
        path: source.to_path_buf(),
        line: 0,
        message: format!("invalid UTF-8: {e}"),
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::MalformedRow {
            path: source.to_path_buf(),
            line: line_no,
            message,
        };
        let value: Value = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let object = value
            .as_object()
            .ok_or_else(|| malformed("expected a JSON object".to_string()))?;
        let text = match object.get(&mapping.text_column) {
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(malformed(format!("field `{}` is not a string", mapping.text_column))),
            None => return Err(malformed(format!("missing field `{}`", mapping.text_column))),
        };
        let label = match &mapping.label_column {
            None => None,
            Some(col) => match object.get(col) {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) => Some(s.clone()),
                Some(Value::Number(n)) => Some(n.to_string()),
                Some(Value::Bool(b)) => Some(b.to_string()),
                Some(_) => return Err(malformed(format!("field `{col}` is not a scalar"))),
            },
        };
        let hate_words = match &mapping.hate_words_column {
            None => Vec::new(),
            Some(col) => match object.get(col) {
                None | Some(Value::Null) => Vec::new(),
                Some(Value::String(s)) => split_words(s),
                Some(Value::Array(items)) => items
                    .iter()
                    .map(|v| {
                        v.as_str()
                            .map(|s| s.trim().to_string())
                            .ok_or_else(|| malformed(format!("field `{col}` holds a non-string")))
                    })
                    .filter(|w| !matches!(w, Ok(s) if s.is_empty()))
                    .collect::<Result<_>>()?,
                Some(_) => return Err(malformed(format!("field `{col}` must be a string or list"))),
            },
        };
        rows.push(RawRow {
            line: line_no,
            text,
            label,
            hate_words,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_mapping() -> Mapping {
        Mapping::from_toml(
            r#"
dataset_id = "EY1"
language = "en"
platform = "youtube"
format = "csv"
text_column = "text"
label_column = "label"
hate_words_column = "words"
"#,
        )
        .unwrap()
    }

    const CSV: &str = "text,label,words\n\"you are scum, really\",1,scum\nnice video friend,0,\nget out vermin,1,vermin; Scum\n";

    #[test]
    fn three_row_csv() {
        let d = parse_dataset_reader(CSV.as_bytes(), &csv_mapping(), Path::new("t.csv")).unwrap();
        assert_eq!(d.meta.size, 3);
        assert!((d.meta.hate_fraction - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(d.records[0].raw_text, "you are scum, really");
        assert_eq!(d.records[0].clean_text, "you are scum really");
        assert_eq!(d.records[2].annotated_hate_words, ["vermin", "Scum"]);
        assert_eq!(d.records[1].label, Some(Label::NonHate));
        assert_eq!(d.meta.availability, Availability::Partial);
    }

    #[test]
    fn reingestion_gives_identical_ids() {
        let a = parse_dataset_reader(CSV.as_bytes(), &csv_mapping(), Path::new("t.csv")).unwrap();
        let b = parse_dataset_reader(CSV.as_bytes(), &csv_mapping(), Path::new("t.csv")).unwrap();
        assert_eq!(a.to_canonical_string(), b.to_canonical_string());
        let ids: Vec<_> = a.records.iter().map(|r| &r.record_id).collect();
        let ids_b: Vec<_> = b.records.iter().map(|r| &r.record_id).collect();
        assert_eq!(ids, ids_b);
    }

    #[test]
    fn unmappable_label_names_row_and_value() {
        let data = "text,label,words\nfine words here,1,\nwhat is this,maybe,\n";
        let err = parse_dataset_reader(data.as_bytes(), &csv_mapping(), Path::new("t.csv")).unwrap_err();
        match err {
            Error::UnmappableLabel { line, value, .. } => {
                assert_eq!(line, 3);
                assert_eq!(value, "maybe");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column() {
        let data = "body,label,words\nhello there,1,\n";
        let err = parse_dataset_reader(data.as_bytes(), &csv_mapping(), Path::new("t.csv")).unwrap_err();
        assert!(matches!(err, Error::MissingColumn { ref column, .. } if column == "text"));
    }

    #[test]
    fn malformed_row_reports_line() {
        let data = "text,label,words\nok row here,1,\ntoo,many,fields,here\n";
        let err = parse_dataset_reader(data.as_bytes(), &csv_mapping(), Path::new("t.csv")).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn empty_file() {
        for data in ["", "  \n"] {
            let err = parse_dataset_reader(data.as_bytes(), &csv_mapping(), Path::new("t.csv")).unwrap_err();
            assert!(matches!(err, Error::EmptyFile { .. }));
        }
        let header_only = "text,label,words\n";
        assert!(matches!(
            parse_dataset_reader(header_only.as_bytes(), &csv_mapping(), Path::new("t.csv")),
            Err(Error::EmptyFile { .. })
        ));
    }

    #[test]
    fn empty_label_cell_is_unlabeled() {
        let data = "text,label,words\nhello there friend,,\n";
        let d = parse_dataset_reader(data.as_bytes(), &csv_mapping(), Path::new("t.csv")).unwrap();
        assert_eq!(d.records[0].label, None);
        assert_eq!(d.meta.hate_fraction, 0.0);
    }

    #[test]
    fn jsonl_with_custom_label_map() {
        let mapping = Mapping::from_toml(
            r#"
dataset_id = "GT2"
language = "de"
platform = "twitter"
availability = "open"
format = "jsonl"
text_column = "tweet"
label_column = "class"
hate_words_column = "marks"
codebook = "Hass ist ..."

[label_map]
"hate" = "hate"
"none" = "non_hate"
"#,
        )
        .unwrap();
        let data = "{\"tweet\":\"Das ist Hetze gegen alle\",\"class\":\"hate\",\"marks\":[\"Hetze\"]}\n\n{\"tweet\":\"Schönes Wetter heute\",\"class\":\"none\"}\n{\"tweet\":\"ohne Label hier\",\"class\":null}\n";
        let d = parse_dataset_reader(data.as_bytes(), &mapping, Path::new("t.jsonl")).unwrap();
        assert_eq!(d.meta.size, 3);
        assert_eq!(d.records[0].annotated_hate_words, ["Hetze"]);
        assert_eq!(d.records[2].label, None);
        assert_eq!(d.meta.codebook_text.as_deref(), Some("Hass ist ..."));
        assert!((d.meta.hate_fraction - 0.5).abs() < 1e-12);

        let bad = "{\"tweet\":\"ok\",\"class\":\"hate\"}\n{\"text\":\"wrong field\"}\n";
        let err = parse_dataset_reader(bad.as_bytes(), &mapping, Path::new("t.jsonl")).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 2, .. }));
        let numeric = "{\"tweet\":\"ok\",\"class\":1}\n";
        let err = parse_dataset_reader(numeric.as_bytes(), &mapping, Path::new("t.jsonl")).unwrap_err();
        assert!(matches!(err, Error::UnmappableLabel { ref value, .. } if value == "1"));
    }

    #[test]
    fn unknown_mapping_keys_rejected() {
        let err = Mapping::from_toml(
            "dataset_id = \"EY1\"\nlanguage = \"en\"\nplatform = \"youtube\"\nformat = \"csv\"\ntext_column = \"t\"\ncolour = \"red\"\n",
        );
        assert!(err.is_err());
    }
}
