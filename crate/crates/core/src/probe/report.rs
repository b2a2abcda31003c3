use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Behavior, CrossModelMatrix, ElicitationTable, SentimentCurve};
use crate::emotion::Emotion;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub elicitation: Option<ElicitationTable>,
    pub curve: Option<SentimentCurve>,
    pub cross: Option<CrossModelMatrix>,
}

pub const ELICITATION_FILE: &str = "elicitation.csv";
pub const CURVE_FILE: &str = "sentiment_curve.csv";
pub const CROSS_FILE: &str = "cross_model.csv";
pub const SUMMARY_FILE: &str = "summary.json";

fn f(v: f64) -> String {
    format!("{v:.6}")
}

pub fn elicitation_csv(table: Option<&ElicitationTable>) -> String {
    let mut s = String::from("category,count");
    for e in Emotion::ALL {
        s.push(',');
        s.push_str(e.as_str());
    }
    s.push('\n');
    if let Some(t) = table {
        for b in Behavior::ALL {
            if let Some(row) = t.rows.get(&b) {
                let _ = write!(s, "{},{}", b.as_str(), row.count);
                for p in row.proportions() {
                    let _ = write!(s, ",{}", f(p));
                }
                s.push('\n');
            }
        }
    }
    s
}

pub fn curve_csv(curve: Option<&SentimentCurve>) -> String {
    let mut s = String::from("outcome,turn,n,mean_sentiment\n");
    if let Some(c) = curve {
        for (name, cells) in [("success", &c.success), ("failure", &c.failure)] {
            for x in cells {
                let _ = writeln!(s, "{name},{},{},{}", x.turn, x.n, f(x.mean));
            }
        }
    }
    s
}

pub fn cross_csv(matrix: Option<&CrossModelMatrix>) -> String {
    let mut s = String::from("train_us,eval_us,mean,per_seed\n");
    if let Some(m) = matrix {
        let fmt_seeds = |v: &[f64]| v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(";");
        for (i, tv) in m.train.iter().enumerate() {
            for (j, ev) in m.eval.iter().enumerate() {
                let c = &m.cells[i][j];
                let _ = writeln!(s, "{tv},{ev},{},{}", f(c.mean), fmt_seeds(&c.per_seed));
            }
        }
        for (j, ev) in m.eval.iter().enumerate() {
            let c = &m.random_baseline[j];
            let _ = writeln!(s, "random,{ev},{},{}", f(c.mean), fmt_seeds(&c.per_seed));
        }
    }
    s
}

/// Writes the three CSVs and a JSON summary; missing parts give header-only files.
pub fn emit_report(report: &ProbeReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let summary = json!({
        "elicitation": report.elicitation,
        "sentiment_curve": report.curve,
        "cross_model": report.cross,
    });
    let files = [
        (ELICITATION_FILE, elicitation_csv(report.elicitation.as_ref())),
        (CURVE_FILE, curve_csv(report.curve.as_ref())),
        (CROSS_FILE, cross_csv(report.cross.as_ref())),
        (SUMMARY_FILE, serde_json::to_string_pretty(&summary)? + "\n"),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
