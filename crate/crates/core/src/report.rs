//! Text, SVG and tabular renderings of evaluation reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::Skill;
use crate::modules::Role;
use crate::runner::EvalReport;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("report {index} has no {key} to group by")]
    MissingGroupKey { index: usize, key: &'static str },
    #[error("unknown group key {0:?} (skill|model)")]
    UnknownGroupKey(String),
    #[error("no reports to summarize")]
    Empty,
    #[error("image dimensions must be positive, got {0}x{1}")]
    BadDimensions(u32, u32),
}

/// One line per statement, then the mean score.
///
/// ```text
/// [1] objectEval(img, 'dog') — found dog (1 box)
/// [0!] textEval(img, 'x') — error: ...
/// score: 0.50
/// ```
pub fn render_text_report(report: &EvalReport) -> String {
    let mut out = String::new();
    for r in &report.results {
        let mark = if r.errored {
            "0!".to_string()
        } else {
            r.score.to_string()
        };
        let _ = writeln!(out, "[{mark}] {} — {}", r.call, r.explanation);
    }
    let _ = writeln!(out, "score: {:.2}", report.score);
    out
}

pub fn role_color(role: Role) -> &'static str {
    match role {
        Role::Subject => "#1f77b4",
        Role::Reference => "#ff7f0e",
        Role::Detected => "#2ca02c",
        Role::Ocr => "#d62728",
    }
}

/// One decimal, with a trailing `.0` dropped.
fn px(v: f64) -> String {
    let s = format!("{v:.1}");
    match s.strip_suffix(".0") {
        Some("-0") => "0".to_string(),
        Some(t) => t.to_string(),
        None => s,
    }
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// SVG document with a labelled rectangle per annotation, in statement order,
/// and the prompt and score as caption.
///
/// ```
/// use vprog::dsl::parse_program;
/// use vprog::perception::FixtureBackend;
/// use vprog::report::render_overlay;
/// use vprog::runner::{run_program, RunConfig};
///
/// let backend = FixtureBackend::from_json_str(r#"{"images": {"i": {"objdet": {"dog": [
///     {"box": [0.1, 0.2, 0.5, 0.6], "confidence": 0.9, "closeness": 0.5}]}}}}"#).unwrap();
/// let program = parse_program("objectEval(img, 'dog')").unwrap();
/// let report = run_program(&backend, "i", &program, "a dog", &RunConfig::default());
/// let svg = render_overlay(&report, (1000, 800)).unwrap();
/// assert!(svg.contains(r#"<rect x="100" y="160" width="400" height="320""#));
/// ```
pub fn render_overlay(report: &EvalReport, dims: (u32, u32)) -> Result<String, ReportError> {
    let (w, h) = dims;
    if w == 0 || h == 0 {
        return Err(ReportError::BadDimensions(w, h));
    }
    let (wf, hf) = (f64::from(w), f64::from(h));
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    for r in &report.results {
        for a in &r.annotations {
            let [x1, y1, x2, y2] = a.bbox.to_array();
            let color = role_color(a.role);
            let _ = writeln!(
                out,
                r#"  <rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="{color}" stroke-width="3" data-role="{}"/>"#,
                px(x1 * wf),
                px(y1 * hf),
                px((x2 - x1) * wf),
                px((y2 - y1) * hf),
                a.role.as_str(),
            );
            let _ = writeln!(
                out,
                r#"  <text x="{}" y="{}" fill="{color}" font-family="sans-serif" font-size="14">{} ({})</text>"#,
                px(x1 * wf + 2.0),
                px((y1 * hf - 4.0).max(14.0)),
                escape_xml(&a.label),
                a.role.as_str(),
            );
        }
    }
    let caption = format!("{} | score: {:.2}", report.prompt, report.score);
    let _ = writeln!(
        out,
        r##"  <text x="8" y="{}" fill="#000000" font-family="sans-serif" font-size="16">{}</text>"##,
        px(hf - 8.0),
        escape_xml(&caption)
    );
    out.push_str("</svg>\n");
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Skill,
    Model,
}

impl std::str::FromStr for GroupBy {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, ReportError> {
        match s {
            "skill" => Ok(GroupBy::Skill),
            "model" => Ok(GroupBy::Model),
            other => Err(ReportError::UnknownGroupKey(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub name: String,
    /// Mean score ×100 per column; `None` when the row has no report there.
    pub values: Vec<Option<f64>>,
    /// Mean of the present column values.
    pub average: f64,
}

/// Scores ×100 with one column per group. Grouping by skill gives one row per
/// model (or a single `all` row when no report names a model), as in a
/// skill-score table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub columns: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

fn key(r: &EvalReport, i: usize, by: GroupBy) -> Result<&str, ReportError> {
    let (v, name) = match by {
        GroupBy::Skill => (&r.skill, "skill"),
        GroupBy::Model => (&r.model, "model"),
    };
    v.as_deref().ok_or(ReportError::MissingGroupKey {
        index: i,
        key: name,
    })
}

/// Known skills in their canonical order, then other names sorted.
fn column_order(names: impl Iterator<Item = String>) -> Vec<String> {
    let mut cols: Vec<String> = names.collect();
    cols.sort_by_key(|c| {
        (
            c.parse::<Skill>().map(|s| s as usize).unwrap_or(usize::MAX),
            c.clone(),
        )
    });
    cols.dedup();
    cols
}

/// Group reports and average their scores.
///
/// ```
/// use vprog::report::{summary_from_means, SummaryTable};
/// let t: SummaryTable = summary_from_means("model", &[("object", 97.0), ("count", 47.0),
///     ("spatial", 23.0), ("scale", 11.0), ("text", 9.0)]);
/// assert_eq!(format!("{:.1}", t.rows[0].average), "37.4");
/// ```
pub fn summarize(reports: &[EvalReport], by: GroupBy) -> Result<SummaryTable, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut cells: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    let any_model = reports.iter().any(|r| r.model.is_some());
    for (i, r) in reports.iter().enumerate() {
        let col = key(r, i, by)?.to_string();
        let row = match by {
            GroupBy::Skill if any_model => key(r, i, GroupBy::Model)?.to_string(),
            _ => "all".to_string(),
        };
        let cell = cells.entry((row, col)).or_insert((0.0, 0));
        cell.0 += r.score;
        cell.1 += 1;
    }
    let columns = column_order(cells.keys().map(|(_, c)| c.clone()));
    let mut row_names: Vec<String> = cells.keys().map(|(r, _)| r.clone()).collect();
    row_names.dedup();
    let rows = row_names
        .into_iter()
        .map(|name| {
            let values: Vec<Option<f64>> = columns
                .iter()
                .map(|c| {
                    cells
                        .get(&(name.clone(), c.clone()))
                        .map(|(s, n)| 100.0 * s / *n as f64)
                })
                .collect();
            let present: Vec<f64> = values.iter().flatten().copied().collect();
            let average = present.iter().sum::<f64>() / present.len() as f64;
            SummaryRow {
                name,
                values,
                average,
            }
        })
        .collect();
    Ok(SummaryTable { columns, rows })
}

/// A one-row table from precomputed column means.
pub fn summary_from_means(row: &str, means: &[(&str, f64)]) -> SummaryTable {
    let values: Vec<Option<f64>> = means.iter().map(|(_, v)| Some(*v)).collect();
    let average = means.iter().map(|(_, v)| v).sum::<f64>() / means.len() as f64;
    SummaryTable {
        columns: means.iter().map(|(c, _)| c.to_string()).collect(),
        rows: vec![SummaryRow {
            name: row.to_string(),
            values,
            average,
        }],
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.1}"))
        .unwrap_or_else(|| "-".to_string())
}

impl SummaryTable {
    fn grid(&self) -> Vec<Vec<String>> {
        let mut header = vec!["name".to_string()];
        header.extend(self.columns.iter().cloned());
        header.push("average".to_string());
        let mut grid = vec![header];
        for r in &self.rows {
            let mut line = vec![r.name.clone()];
            line.extend(r.values.iter().map(|v| cell(*v)));
            line.push(cell(Some(r.average)));
            grid.push(line);
        }
        grid
    }

    /// Left-aligned first column, right-aligned numbers.
    pub fn to_text(&self) -> String {
        let grid = self.grid();
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|j| grid.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &grid {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    if j == 0 {
                        format!("{s:<w$}", w = widths[j])
                    } else {
                        format!("{s:>w$}", w = widths[j])
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.grid() {
            let fields: Vec<String> = row
                .iter()
                .map(|f| {
                    if f.contains([',', '"', '\n']) {
                        format!("\"{}\"", f.replace('"', "\"\""))
                    } else {
                        f.clone()
                    }
                })
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}
