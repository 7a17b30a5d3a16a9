//! News article records and JSONL/CSV dataset loading.

use std::collections::HashSet;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{HanError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Reliable = 0,
    Unreliable = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::Reliable),
            1 => Some(Label::Unreliable),
            _ => None,
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for Label {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        Label::from_index(v as usize).ok_or_else(|| format!("label must be 0 or 1, got {v}"))
    }
}

/// One news article with the dataset's field names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub uid: String,
    pub title: String,
    pub text: String,
    #[serde(rename = "normalizedText", skip_serializing_if = "Option::is_none", default)]
    pub normalized_text: Option<String>,
    pub label: Label,
}

impl Article {
    /// Body used for modeling: the cleansed text when present.
    pub fn body(&self) -> &str {
        match &self.normalized_text {
            Some(t) if !t.trim().is_empty() => t,
            _ => &self.text,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    pub fn from_path(path: &Path) -> DatasetFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Jsonl,
        }
    }
}

/// A record skipped because a required field was missing or empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RejectedRecord {
    pub line: usize,
    pub uid: Option<String>,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub articles: Vec<Article>,
    pub rejected: Vec<RejectedRecord>,
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| HanError::io(path, e))?;
    match format {
        DatasetFormat::Jsonl => parse_jsonl(&bytes),
        DatasetFormat::Csv => parse_csv(&bytes[..]),
    }
}

/// Parses JSON-lines input. Blank lines are skipped.
pub fn parse_jsonl(bytes: &[u8]) -> Result<Dataset> {
    let text = std::str::from_utf8(bytes).map_err(|e| HanError::Parse {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        message: "invalid UTF-8".into(),
    })?;
    let mut builder = Builder::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| HanError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let Value::Object(obj) = value else {
            return Err(HanError::Parse {
                line: line_no,
                message: "record is not a JSON object".into(),
            });
        };
        let field = |k: &str| -> Result<Option<String>> {
            match obj.get(k) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(other) => Err(HanError::Parse {
                    line: line_no,
                    message: format!("field {k:?} must be a string, got {other}"),
                }),
            }
        };
        let raw = RawRecord {
            uid: field("uid")?,
            title: field("title")?,
            text: field("text")?,
            normalized_text: field("normalizedText")?,
            label: label_text(&obj, line_no)?,
        };
        builder.add(line_no, raw)?;
    }
    Ok(builder.finish())
}

fn label_text(obj: &Map<String, Value>, line: usize) -> Result<Option<String>> {
    match obj.get("label") {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(Value::Number(n)) => Ok(Some(n.to_string())),
        Some(Value::Bool(b)) => Ok(Some(b.to_string())),
        Some(other) => Err(HanError::Parse {
            line,
            message: format!("label must be a number, got {other}"),
        }),
    }
}

/// Parses CSV with a header row using the JSONL field names.
pub fn parse_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (uid_c, title_c, text_c, norm_c, label_c) =
        (col("uid"), col("title"), col("text"), col("normalizedText"), col("label"));

    let mut builder = Builder::default();
    for (i, record) in rdr.records().enumerate() {
        let line_no = i + 2;
        let record = record.map_err(|e| csv_error(e, line_no))?;
        let line_no = record.position().map_or(line_no, |p| p.line() as usize);
        let get = |c: Option<usize>| c.and_then(|c| record.get(c)).map(str::to_string);
        let raw = RawRecord {
            uid: get(uid_c),
            title: get(title_c),
            text: get(text_c),
            normalized_text: get(norm_c).filter(|s| !s.is_empty()),
            label: get(label_c),
        };
        builder.add(line_no, raw)?;
    }
    Ok(builder.finish())
}

fn csv_error(e: csv::Error, fallback_line: usize) -> HanError {
    let line = e
        .position()
        .map_or(fallback_line, |p| p.line() as usize);
    HanError::Parse {
        line,
        message: e.to_string(),
    }
}

struct RawRecord {
    uid: Option<String>,
    title: Option<String>,
    text: Option<String>,
    normalized_text: Option<String>,
    label: Option<String>,
}

#[derive(Default)]
struct Builder {
    seen: HashSet<String>,
    out: Dataset,
}

impl Builder {
    fn add(&mut self, line: usize, raw: RawRecord) -> Result<()> {
        let uid = raw.uid.filter(|u| !u.is_empty());
        let reject = |reason: &str| RejectedRecord {
            line,
            uid: uid.clone(),
            reason: reason.to_string(),
        };
        let Some(uid_str) = uid.clone() else {
            self.out.rejected.push(reject("missing uid"));
            return Ok(());
        };
        let Some(title) = raw.title else {
            self.out.rejected.push(reject("missing title"));
            return Ok(());
        };
        let Some(text) = raw.text else {
            self.out.rejected.push(reject("missing text"));
            return Ok(());
        };
        let label = match raw.label.as_deref().map(str::trim) {
            Some("0") => Label::Reliable,
            Some("1") => Label::Unreliable,
            Some(other) => {
                return Err(HanError::Validation(format!(
                    "article {uid_str:?} (line {line}) has unknown label {other:?}"
                )))
            }
            None => {
                return Err(HanError::Validation(format!(
                    "article {uid_str:?} (line {line}) has no label"
                )))
            }
        };
        if !self.seen.insert(uid_str.clone()) {
            return Err(HanError::Validation(format!(
                "duplicate uid {uid_str:?} at line {line}"
            )));
        }
        self.out.articles.push(Article {
            uid: uid_str,
            title,
            text,
            normalized_text: raw.normalized_text,
            label,
        });
        Ok(())
    }

    fn finish(self) -> Dataset {
        self.out
    }
}

/// Serializes articles as JSON lines with keys in dataset order.
pub fn to_jsonl(articles: &[Article]) -> String {
    let mut out = String::new();
    for a in articles {
        out.push_str(&serde_json::to_string(a).expect("article serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(path: &Path, articles: &[Article]) -> Result<()> {
    fs::write(path, to_jsonl(articles)).map_err(|e| HanError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = concat!(
        r#"{"uid":"a1","title":"Breaking! Big news","text":"Body one. Body two.","normalizedText":"body one. body two.","label":1}"#,
        "\n",
        r#"{"uid":"a2","title":"Quiet day","text":"Nothing happened.","label":0}"#,
        "\n",
        r#"{"uid":"a3","title":"Markets","text":"Stocks rose 3.5 percent.","normalizedText":"stocks rose 3.5 percent.","label":0}"#,
        "\n",
    );

    #[test]
    fn empty_input_gives_empty_dataset() {
        let d = parse_jsonl(b"").unwrap();
        assert!(d.articles.is_empty() && d.rejected.is_empty());
    }

    #[test]
    fn fixture_round_trips_byte_equal() {
        let d = parse_jsonl(FIXTURE.as_bytes()).unwrap();
        assert_eq!(d.articles.len(), 3);
        assert_eq!(d.articles[0].label, Label::Unreliable);
        assert_eq!(d.articles[1].normalized_text, None);
        assert_eq!(d.articles[0].body(), "body one. body two.");
        assert_eq!(d.articles[1].body(), "Nothing happened.");
        assert_eq!(to_jsonl(&d.articles), FIXTURE);
    }

    #[test]
    fn unknown_label_names_uid() {
        let input = r#"{"uid":"bad7","title":"t","text":"x","label":"2"}"#;
        match parse_jsonl(input.as_bytes()) {
            Err(HanError::Validation(msg)) => assert!(msg.contains("bad7"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let input = r#"{"uid":"bad8","title":"t","text":"x","label":2}"#;
        assert!(matches!(parse_jsonl(input.as_bytes()), Err(HanError::Validation(_))));
    }

    #[test]
    fn malformed_record_reports_line() {
        let input = format!("{}\n{{not json\n", FIXTURE.lines().next().unwrap());
        match parse_jsonl(input.as_bytes()) {
            Err(HanError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_fields_are_reported_not_dropped() {
        let input = concat!(
            r#"{"uid":"ok","title":"t","text":"x","label":0}"#,
            "\n",
            r#"{"uid":"nt","text":"x","label":0}"#,
            "\n",
            r#"{"uid":"nb","title":"t","label":1}"#,
            "\n",
        );
        let d = parse_jsonl(input.as_bytes()).unwrap();
        assert_eq!(d.articles.len(), 1);
        assert_eq!(d.rejected.len(), 2);
        assert_eq!(d.rejected[0].line, 2);
        assert_eq!(d.rejected[0].uid.as_deref(), Some("nt"));
        assert_eq!(d.rejected[1].reason, "missing text");
    }

    #[test]
    fn duplicate_uid_rejected() {
        let line = r#"{"uid":"x","title":"t","text":"x","label":0}"#;
        let input = format!("{line}\n{line}\n");
        assert!(matches!(parse_jsonl(input.as_bytes()), Err(HanError::Validation(_))));
    }

    #[test]
    fn csv_with_same_headers() {
        let input = "uid,title,text,normalizedText,label\n\
                     c1,\"Hello, world\",Body.,,1\n\
                     c2,Title,Text here.,text here.,0\n";
        let d = parse_csv(input.as_bytes()).unwrap();
        assert_eq!(d.articles.len(), 2);
        assert_eq!(d.articles[0].title, "Hello, world");
        assert_eq!(d.articles[0].normalized_text, None);
        assert_eq!(d.articles[1].normalized_text.as_deref(), Some("text here."));

        let bad = "uid,title,text,label\nc1,t,x,5\n";
        assert!(matches!(parse_csv(bad.as_bytes()), Err(HanError::Validation(_))));
    }
}
