//! Attention trace files and standalone HTML heatmaps.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::encoders::{AttentionTrace, Variant};
use crate::error::{HanError, Result};

pub const TRACE_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    /// Position among the encoder's input sentences.
    pub index: usize,
    pub weight: f64,
    pub tokens: Vec<String>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArticleWeights {
    pub title: f64,
    pub body: f64,
}

/// On-disk form of one article's attention weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub schema_version: u32,
    pub uid: String,
    pub variant: Variant,
    pub p_unreliable: f64,
    #[serde(default)]
    pub label: Option<Label>,
    pub title_tokens: Vec<String>,
    /// Word weights of the separately encoded title (v2).
    #[serde(default)]
    pub title_weights: Option<Vec<f64>>,
    /// v1: sentence index 0 is the title.
    #[serde(default)]
    pub title_in_document: bool,
    pub sentences: Vec<SentenceRecord>,
    #[serde(default)]
    pub article_weights: Option<ArticleWeights>,
}

fn check_weights(what: &str, w: &[f64]) -> Result<()> {
    if w.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > 1.0 + 1e-9) {
        return Err(HanError::Validation(format!("{what}: weights must lie in [0, 1]")));
    }
    Ok(())
}

impl TraceRecord {
    pub fn new(
        uid: impl Into<String>,
        variant: Variant,
        p_unreliable: f64,
        label: Option<Label>,
        trace: &AttentionTrace,
    ) -> Result<Self> {
        let n = trace.sentence_weights.len();
        if trace.word_weights.len() != n || trace.sentence_texts.len() != n || trace.sentence_index.len() != n {
            return Err(HanError::Validation("attention trace arrays disagree in length".into()));
        }
        let sentences = (0..n)
            .map(|j| SentenceRecord {
                index: trace.sentence_index[j],
                weight: trace.sentence_weights[j],
                tokens: trace.sentence_texts[j].clone(),
                weights: trace.word_weights[j].clone(),
            })
            .collect();
        let record = TraceRecord {
            schema_version: TRACE_SCHEMA_VERSION,
            uid: uid.into(),
            variant,
            p_unreliable,
            label,
            title_tokens: trace.title_tokens.clone(),
            title_weights: trace.title_word_weights.clone(),
            title_in_document: trace.title_in_document,
            sentences,
            article_weights: trace.article_weights.map(|(title, body)| ArticleWeights { title, body }),
        };
        record.validate()?;
        Ok(record)
    }

    pub fn to_trace(&self) -> AttentionTrace {
        AttentionTrace {
            word_weights: self.sentences.iter().map(|s| s.weights.clone()).collect(),
            sentence_weights: self.sentences.iter().map(|s| s.weight).collect(),
            article_weights: self.article_weights.map(|a| (a.title, a.body)),
            title_word_weights: self.title_weights.clone(),
            sentence_texts: self.sentences.iter().map(|s| s.tokens.clone()).collect(),
            title_tokens: self.title_tokens.clone(),
            title_in_document: self.title_in_document,
            sentence_index: self.sentences.iter().map(|s| s.index).collect(),
        }
    }

    /// Structural checks: version, matching lengths, weights in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != TRACE_SCHEMA_VERSION {
            return Err(HanError::Format(format!(
                "unsupported trace schema_version {} (expected {TRACE_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(0.0..=1.0).contains(&self.p_unreliable) {
            return Err(HanError::Validation("p_unreliable must lie in [0, 1]".into()));
        }
        for s in &self.sentences {
            if s.tokens.len() != s.weights.len() {
                return Err(HanError::Validation(format!(
                    "sentence {}: {} tokens but {} weights",
                    s.index,
                    s.tokens.len(),
                    s.weights.len()
                )));
            }
            check_weights("sentence", &s.weights)?;
        }
        check_weights("sentence weights", &self.sentences.iter().map(|s| s.weight).collect::<Vec<_>>())?;
        if let Some(t) = &self.title_weights {
            if t.len() != self.title_tokens.len() {
                return Err(HanError::Validation("title tokens and weights differ in length".into()));
            }
            check_weights("title", t)?;
        }
        if let Some(a) = self.article_weights {
            check_weights("article", &[a.title, a.body])?;
        }
        Ok(())
    }
}

pub fn trace_to_json(record: &TraceRecord) -> Result<String> {
    serde_json::to_string_pretty(record).map_err(|e| HanError::Format(e.to_string()))
}

/// Parses and validates a trace file.
pub fn parse_trace(text: &str) -> Result<TraceRecord> {
    let record: TraceRecord = serde_json::from_str(text).map_err(|e| HanError::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    record.validate()?;
    Ok(record)
}

pub fn export_trace(record: &TraceRecord, path: &Path) -> Result<()> {
    fs::write(path, trace_to_json(record)? + "\n").map_err(|e| HanError::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<TraceRecord> {
    let text = fs::read_to_string(path).map_err(|e| HanError::io(path, e))?;
    parse_trace(&text)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapRow {
    pub index: usize,
    pub weight: f64,
    pub is_title: bool,
    pub tokens: Vec<String>,
    pub weights: Vec<f64>,
}

/// What a heatmap shows: the highest-weighted sentences, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapDocument {
    pub uid: String,
    pub title: String,
    pub label: Option<Label>,
    pub p_unreliable: f64,
    pub title_row: Option<(Vec<String>, Vec<f64>)>,
    pub article_weights: Option<ArticleWeights>,
    pub rows: Vec<HeatmapRow>,
    pub record: TraceRecord,
}

pub fn heatmap_document(record: &TraceRecord, top_k: usize) -> Result<HeatmapDocument> {
    record.validate()?;
    if top_k == 0 {
        return Err(HanError::Config("top-k must be ≥ 1".into()));
    }
    if record.sentences.is_empty() && record.title_weights.is_none() {
        return Err(HanError::Domain("attention trace is empty".into()));
    }
    let mut order: Vec<usize> = (0..record.sentences.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (&record.sentences[a], &record.sentences[b]);
        sb.weight.total_cmp(&sa.weight).then(sa.index.cmp(&sb.index))
    });
    let rows = order
        .into_iter()
        .take(top_k)
        .map(|i| {
            let s = &record.sentences[i];
            HeatmapRow {
                index: s.index,
                weight: s.weight,
                is_title: record.title_in_document && s.index == 0,
                tokens: s.tokens.clone(),
                weights: s.weights.clone(),
            }
        })
        .collect();
    Ok(HeatmapDocument {
        uid: record.uid.clone(),
        title: record.title_tokens.join(" "),
        label: record.label,
        p_unreliable: record.p_unreliable,
        title_row: record
            .title_weights
            .as_ref()
            .map(|w| (record.title_tokens.clone(), w.clone())),
        article_weights: record.article_weights,
        rows,
        record: record.clone(),
    })
}

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Opacity as a fraction of the strongest weight on display.
fn opacity(w: f64, max: f64) -> f64 {
    if max > 0.0 {
        (w / max).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

fn word_cells(out: &mut String, tokens: &[String], weights: &[f64], max: f64) {
    for (t, &w) in tokens.iter().zip(weights) {
        let _ = write!(
            out,
            r#"<span class="w" style="background:rgba(214,39,40,{:.4})" title="{:.6}">{}</span> "#,
            opacity(w, max),
            w,
            escape_html(t)
        );
    }
}

/// Self-contained HTML page: word cells shaded by word weight, a margin
/// bar per sentence shaded by sentence weight, and the full trace embedded
/// as JSON in `<script id="attention-data">`.
pub fn render_heatmap(doc: &HeatmapDocument) -> Result<String> {
    let word_max = doc
        .rows
        .iter()
        .flat_map(|r| r.weights.iter())
        .chain(doc.title_row.iter().flat_map(|(_, w)| w.iter()))
        .fold(0.0f64, |a, &b| a.max(b));
    let sent_max = doc.rows.iter().map(|r| r.weight).fold(0.0f64, f64::max);
    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(html, "<title>Attention: {}</title>", escape_html(&doc.uid));
    html.push_str(
        "<style>\n\
         body{font-family:sans-serif;margin:2em;max-width:60em}\n\
         .row{display:flex;align-items:stretch;margin:.3em 0}\n\
         .bar{width:1.2em;margin-right:.6em;border:1px solid #bbb}\n\
         .w{padding:.05em .15em;border-radius:2px;line-height:1.9}\n\
         .meta{color:#555;font-size:.9em}\n\
         .tag{font-size:.75em;color:#555;margin-right:.4em}\n\
         </style>\n</head>\n<body>\n",
    );
    let _ = writeln!(html, "<h1>{}</h1>", escape_html(&doc.title));
    let label = doc.label.map_or("unknown".to_string(), |l| format!("{l:?}").to_lowercase());
    let _ = writeln!(
        html,
        "<p class=\"meta\">uid {} &middot; p(unreliable) = {:.4} &middot; label {}</p>",
        escape_html(&doc.uid),
        doc.p_unreliable,
        label
    );
    if let Some((tokens, weights)) = &doc.title_row {
        let alpha = doc.article_weights.map_or(String::new(), |a| format!(" &alpha;<sub>t</sub>={:.4}", a.title));
        html.push_str("<div class=\"row title\"><div>");
        let _ = write!(html, "<span class=\"tag\">title{alpha}</span>");
        word_cells(&mut html, tokens, weights, word_max);
        html.push_str("</div></div>\n");
    }
    if let Some(a) = doc.article_weights {
        let _ = writeln!(html, "<p class=\"meta\">article attention: title {:.4}, body {:.4}</p>", a.title, a.body);
    }
    for r in &doc.rows {
        let _ = write!(
            html,
            r#"<div class="row" data-index="{}"><div class="bar" style="background:rgba(31,119,180,{:.4})" title="{:.6}"></div><div>"#,
            r.index,
            opacity(r.weight, sent_max),
            r.weight
        );
        if r.is_title {
            html.push_str("<span class=\"tag\">title</span>");
        }
        word_cells(&mut html, &r.tokens, &r.weights, word_max);
        html.push_str("</div></div>\n");
    }
    let json = serde_json::to_string(&doc.record).map_err(|e| HanError::Format(e.to_string()))?;
    let _ = writeln!(
        html,
        "<script type=\"application/json\" id=\"attention-data\">{}</script>",
        json.replace("</", "<\\/")
    );
    html.push_str("</body>\n</html>\n");
    Ok(html)
}

/// Pulls the embedded trace back out of a rendered page.
pub fn embedded_trace(html: &str) -> Result<TraceRecord> {
    let open = "<script type=\"application/json\" id=\"attention-data\">";
    let start = html
        .find(open)
        .ok_or_else(|| HanError::Format("no embedded attention data".into()))?
        + open.len();
    let end = html[start..]
        .find("</script>")
        .ok_or_else(|| HanError::Format("unterminated attention data".into()))?;
    parse_trace(&html[start..start + end])
}
