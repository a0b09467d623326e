//! Report serialisation. Output bytes are a pure function of the report:
//! fixed field order and 17 significant digits for every CSV float.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diag::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::io::read_text;
use crate::solver::ScoreReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidParameter(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub name_a: String,
    pub name_b: String,
    pub method: String,
    pub subjects: Vec<String>,
    pub per_subject_r: Vec<f64>,
    pub mean_r: f64,
    pub std_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pairs: Vec<CorrelationPair>,
}

pub enum Report<'a> {
    Score {
        report: &'a ScoreReport,
        labels: Option<&'a [String]>,
    },
    Diagnostics(&'a DiagnosticsReport),
    Correlation(&'a CorrelationReport),
}

/// Decimal rendering with 17 significant digits; parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0.0".into()
        } else {
            "0.0".into()
        };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-5..17).contains(&exp) {
        return sci;
    }
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let mut out = String::from(sign);
    if exp < 0 {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(&digits);
    } else {
        let split = (exp + 1) as usize;
        out.push_str(&digits[..split]);
        out.push('.');
        let frac = &digits[split..];
        out.push_str(if frac.is_empty() { "0" } else { frac });
    }
    out
}

/// Quotes a CSV field when it contains a delimiter, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Schema(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// `node_id,label,score` rows, node ids one-based.
pub fn scores_csv(scores: &[f64], labels: Option<&[String]>) -> String {
    let mut out = String::from("node_id,label,score\n");
    for (i, s) in scores.iter().enumerate() {
        let label = labels.and_then(|l| l.get(i)).map_or("", String::as_str);
        let _ = writeln!(out, "{},{},{}", i + 1, csv_field(label), fmt_f64(*s));
    }
    out
}

pub fn render_report(report: &Report<'_>, format: ReportFormat) -> Result<String> {
    match (report, format) {
        (Report::Score { report, .. }, ReportFormat::Json) => to_json(report),
        (Report::Score { report, labels }, ReportFormat::Csv) => Ok(scores_csv(report.score.as_slice(), *labels)),
        (Report::Diagnostics(d), ReportFormat::Json) => to_json(d),
        (Report::Diagnostics(d), ReportFormat::Csv) => {
            let mut out = String::from("key,value\n");
            let _ = writeln!(out, "horizon,{}", fmt_f64(d.horizon));
            let _ = writeln!(out, "det_g,{}", fmt_f64(d.det_g));
            let _ = writeln!(out, "log_abs_det_g,{}", fmt_f64(d.log_abs_det_g));
            let _ = writeln!(out, "lambda_min_g,{}", fmt_f64(d.lambda_min_g));
            let _ = writeln!(out, "lambda_max_g,{}", fmt_f64(d.lambda_max_g));
            let _ = writeln!(out, "assumption1_holds,{}", d.assumption1_holds);
            if let Some(dev) = d.small_t_deviation {
                let _ = writeln!(out, "small_t_deviation,{}", fmt_f64(dev));
            }
            Ok(out)
        }
        (Report::Correlation(c), ReportFormat::Json) => to_json(c),
        (Report::Correlation(c), ReportFormat::Csv) => {
            let mut out = String::from("name_a,name_b,method,subject,r\n");
            for p in &c.pairs {
                let prefix = format!("{},{},{}", csv_field(&p.name_a), csv_field(&p.name_b), p.method);
                for (s, r) in p.subjects.iter().zip(&p.per_subject_r) {
                    let _ = writeln!(out, "{prefix},{},{}", csv_field(s), fmt_f64(*r));
                }
                let _ = writeln!(out, "{prefix},mean,{}", fmt_f64(p.mean_r));
                let _ = writeln!(out, "{prefix},std,{}", fmt_f64(p.std_r));
            }
            Ok(out)
        }
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_report(report: &Report<'_>, path: &Path, format: ReportFormat) -> Result<()> {
    write_text(path, &render_report(report, format)?)
}

pub fn read_score_report_json(path: &Path) -> Result<ScoreReport> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Scores read back from a `node_id,label,score` file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreColumn {
    pub labels: Vec<String>,
    pub scores: Vec<f64>,
}

pub fn parse_scores_csv(text: &str, source: &str) -> Result<ScoreColumn> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let err = |row: usize, col: usize, msg: String| Error::Parse {
        path: source.to_string(),
        row,
        col,
        msg,
    };
    let headers = reader.headers().map_err(|e| err(1, 0, e.to_string()))?.clone();
    let expected = ["node_id", "label", "score"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(err(1, 0, format!("expected header {}", expected.join(","))));
    }
    let mut out = ScoreColumn {
        labels: Vec::new(),
        scores: Vec::new(),
    };
    for (r, rec) in reader.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| err(line, 0, e.to_string()))?;
        let id: usize = rec[0]
            .parse()
            .map_err(|_| err(line, 1, format!("bad node id {:?}", &rec[0])))?;
        if id != r + 1 {
            return Err(err(line, 1, format!("node ids must be 1..n in order, found {id}")));
        }
        let score: f64 = rec[2]
            .parse()
            .map_err(|_| err(line, 3, format!("not a number: {:?}", &rec[2])))?;
        out.labels.push(rec[1].to_string());
        out.scores.push(score);
    }
    Ok(out)
}

pub fn read_scores_csv(path: &Path) -> Result<ScoreColumn> {
    parse_scores_csv(&read_text(path)?, &path.display().to_string())
}

/// Subjects × nodes table of scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub subjects: Vec<String>,
    /// Column headers, one per node (label, or the one-based id if unlabelled).
    pub nodes: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn column(&self, node: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[node]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject");
        for h in &self.nodes {
            out.push(',');
            out.push_str(&csv_field(h));
        }
        out.push('\n');
        for (s, row) in self.subjects.iter().zip(&self.values) {
            out.push_str(&csv_field(s));
            for v in row {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let err = |row: usize, col: usize, msg: String| Error::Parse {
            path: source.to_string(),
            row,
            col,
            msg,
        };
        let headers = reader.headers().map_err(|e| err(1, 0, e.to_string()))?.clone();
        if headers.get(0) != Some("subject") || headers.len() < 2 {
            return Err(err(1, 1, "expected header subject,<node>...".into()));
        }
        let nodes: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut table = ScoreTable {
            subjects: Vec::new(),
            nodes,
            values: Vec::new(),
        };
        for (r, rec) in reader.records().enumerate() {
            let line = r + 2;
            let rec = rec.map_err(|e| err(line, 0, e.to_string()))?;
            table.subjects.push(rec[0].to_string());
            let row = rec
                .iter()
                .skip(1)
                .enumerate()
                .map(|(c, cell)| {
                    cell.parse::<f64>()
                        .map_err(|_| err(line, c + 2, format!("not a number: {cell:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            table.values.push(row);
        }
        if table.subjects.is_empty() {
            return Err(err(2, 0, "table has no subjects".into()));
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }
}
