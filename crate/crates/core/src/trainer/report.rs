//! Comma-separated curve and evaluation files, and aligned text tables.
//!
//! Numbers are written in shortest round-trip form, so parsing a file
//! reproduces the values exactly.

use std::fmt::Write as _;

use thiserror::Error;

use super::{EpochRecord, EvalReport};
use crate::dataset::Diagnosis;
use crate::NUM_CLASSES;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct ReportParseError {
    pub line: usize,
    pub message: String,
}

fn perr(line: usize, message: impl Into<String>) -> ReportParseError {
    ReportParseError {
        line,
        message: message.into(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const CURVES_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

/// One row per epoch; missing validation values are empty cells.
pub fn curves_csv(records: &[EpochRecord]) -> String {
    let mut s = format!("{CURVES_HEADER}\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.epoch,
            r.train_loss,
            r.train_acc,
            opt(r.val_loss),
            opt(r.val_acc)
        );
    }
    s
}

pub fn curves_from_csv(text: &str) -> Result<Vec<EpochRecord>, ReportParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CURVES_HEADER => {}
        _ => return Err(perr(1, format!("expected header `{CURVES_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let n = i + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 5 {
            return Err(perr(n, "expected 5 columns"));
        }
        let num = |c: &str| c.parse::<f64>().map_err(|_| perr(n, format!("`{c}` is not a number")));
        let opt_num = |c: &str| if c.is_empty() { Ok(None) } else { num(c).map(Some) };
        out.push(EpochRecord {
            epoch: cells[0].parse().map_err(|_| perr(n, "epoch is not an integer"))?,
            train_loss: num(cells[1])?,
            train_acc: num(cells[2])?,
            val_loss: opt_num(cells[3])?,
            val_acc: opt_num(cells[4])?,
        });
    }
    Ok(out)
}

/// Three blank-line separated blocks: scalar metrics (plus `extra` rows such
/// as baselines), per-class metrics, and the 8×8 confusion matrix.
pub fn report_csv(r: &EvalReport, extra: &[(&str, f64)]) -> String {
    let mut s = String::from("metric,value\n");
    let _ = writeln!(s, "accuracy,{}", r.accuracy);
    let _ = writeln!(s, "n_examples,{}", r.n_examples);
    let _ = writeln!(s, "mean_loss,{}", r.mean_loss);
    for (k, v) in extra {
        let _ = writeln!(s, "{k},{v}");
    }
    s.push_str("\nclass,support,precision,recall\n");
    for (c, d) in Diagnosis::ALL.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{}", d, r.support(c), opt(r.precision[c]), opt(r.recall[c]));
    }
    s.push_str("\ntrue\\predicted");
    for d in Diagnosis::ALL {
        let _ = write!(s, ",{d}");
    }
    s.push('\n');
    for (c, d) in Diagnosis::ALL.iter().enumerate() {
        let row: Vec<String> = r.confusion[c].iter().map(usize::to_string).collect();
        let _ = writeln!(s, "{d},{}", row.join(","));
    }
    s
}

/// Inverse of [`report_csv`]; returns the report and the extra metric rows.
pub fn report_from_csv(text: &str) -> Result<(EvalReport, Vec<(String, f64)>), ReportParseError> {
    let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).collect();
    let blocks: Vec<&[(usize, &str)]> = lines.split(|(_, l)| l.is_empty()).filter(|b| !b.is_empty()).collect();
    let [metrics, _, confusion] = blocks[..] else {
        return Err(perr(1, format!("expected 3 blocks, found {}", blocks.len())));
    };
    if metrics[0].1 != "metric,value" {
        return Err(perr(metrics[0].0, "expected `metric,value` header"));
    }
    let mut scalars = Vec::new();
    for &(n, l) in &metrics[1..] {
        let (k, v) = l.split_once(',').ok_or_else(|| perr(n, "expected `name,value`"))?;
        scalars.push((
            n,
            k.to_string(),
            v.parse::<f64>()
                .map_err(|_| perr(n, format!("`{v}` is not a number")))?,
        ));
    }
    if confusion.len() != NUM_CLASSES + 1 {
        return Err(perr(confusion[0].0, "confusion block must have 8 rows"));
    }
    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    for (c, &(n, l)) in confusion[1..].iter().enumerate() {
        let cells: Vec<&str> = l.split(',').collect();
        if cells.len() != NUM_CLASSES + 1 || cells[0] != Diagnosis::ALL[c].name() {
            return Err(perr(n, format!("expected row for {}", Diagnosis::ALL[c])));
        }
        for (p, cell) in cells[1..].iter().enumerate() {
            let k: usize = cell.parse().map_err(|_| perr(n, format!("`{cell}` is not a count")))?;
            truth.extend(std::iter::repeat_n(c, k));
            predicted.extend(std::iter::repeat_n(p, k));
        }
    }
    let mut report =
        EvalReport::from_predictions(&truth, &predicted, None).map_err(|e| perr(confusion[0].0, e.to_string()))?;
    let mut extra = Vec::new();
    for (n, k, v) in scalars {
        match k.as_str() {
            "mean_loss" => report.mean_loss = v,
            "accuracy" | "n_examples" => {
                let want = if k == "accuracy" {
                    report.accuracy
                } else {
                    report.n_examples as f64
                };
                if v != want {
                    return Err(perr(n, format!("{k} {v} disagrees with the confusion matrix ({want})")));
                }
            }
            _ => extra.push((k, v)),
        }
    }
    Ok((report, extra))
}

fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut s = line(header);
    s.push_str(&line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>()));
    for r in rows {
        s.push_str(&line(r));
    }
    s
}

fn fixed(v: f64) -> String {
    format!("{v:.4}")
}

pub fn curves_table(records: &[EpochRecord]) -> String {
    let header = ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"].map(String::from);
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.epoch.to_string(),
                fixed(r.train_loss),
                fixed(r.train_acc),
                r.val_loss.map_or("-".into(), fixed),
                r.val_acc.map_or("-".into(), fixed),
            ]
        })
        .collect();
    table(&header, &rows)
}

pub fn report_table(r: &EvalReport) -> String {
    let mut s = format!("accuracy {}  ({} examples)\n\n", fixed(r.accuracy), r.n_examples);
    let header = ["class", "support", "precision", "recall"].map(String::from);
    let rows: Vec<Vec<String>> = Diagnosis::ALL
        .iter()
        .enumerate()
        .map(|(c, d)| {
            vec![
                d.to_string(),
                r.support(c).to_string(),
                r.precision[c].map_or("undefined".into(), fixed),
                r.recall[c].map_or("undefined".into(), fixed),
            ]
        })
        .collect();
    s.push_str(&table(&header, &rows));
    s.push('\n');
    let mut header = vec!["true\\pred".to_string()];
    header.extend(Diagnosis::ALL.iter().map(|d| d.name().to_string()));
    let rows: Vec<Vec<String>> = Diagnosis::ALL
        .iter()
        .enumerate()
        .map(|(c, d)| {
            std::iter::once(d.to_string())
                .chain(r.confusion[c].iter().map(usize::to_string))
                .collect()
        })
        .collect();
    s.push_str(&table(&header, &rows));
    s
}
