use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use serde::Deserialize;

use super::run::ARTIFACT_FILES;
use crate::error::{Error, Result};
use crate::eval::{read_eval_csv, reports_from_rows};

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub predicate: String,
    pub method: String,
    pub hr: f64,
    pub arhr: f64,
    pub auc: f64,
    pub repeats: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct SummaryRegression {
    pub x_metric: String,
    pub y_metric: String,
    pub slope: f64,
    pub intercept: f64,
    pub rvalue: f64,
    pub n_points: usize,
}

/// Method x metric means per predicate, recomputed from the per-repeat rows,
/// plus the headline regression grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub regression: Vec<SummaryRegression>,
}

pub fn report_summary(output_dir: &Path) -> Result<Summary> {
    let missing: Vec<_> = ARTIFACT_FILES.iter().map(|f| output_dir.join(f)).filter(|p| !p.is_file()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts(missing));
    }
    let rows = read_eval_csv(File::open(output_dir.join("eval.csv"))?)?;
    let rows = reports_from_rows(&rows)?
        .into_iter()
        .map(|r| SummaryRow {
            predicate: r.predicate,
            method: r.method.to_string(),
            hr: r.hr,
            arhr: r.arhr,
            auc: r.auc,
            repeats: r.repeats.len(),
        })
        .collect();
    let regression = csv::Reader::from_reader(File::open(output_dir.join("regression.csv"))?)
        .deserialize()
        .collect::<std::result::Result<Vec<SummaryRegression>, _>>()?;
    Ok(Summary { rows, regression })
}

impl Summary {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut current: Option<&str> = None;
        for row in &self.rows {
            if current != Some(row.predicate.as_str()) {
                if current.is_some() {
                    out.push('\n');
                }
                let _ = writeln!(out, "{}", row.predicate);
                let _ = writeln!(out, "  {:<8} {:>8} {:>8} {:>8} {:>8}", "method", "HR", "ARHR", "AUC", "repeats");
                current = Some(row.predicate.as_str());
            }
            let _ = writeln!(
                out,
                "  {:<8} {:>8.4} {:>8.4} {:>8.4} {:>8}",
                row.method, row.hr, row.arhr, row.auc, row.repeats
            );
        }
        out.push('\n');
        if self.regression.is_empty() {
            out.push_str("regression: no fits (needs at least 2 predicates with distinct topology)\n");
        } else {
            let _ = writeln!(
                out,
                "regression  {:<24} {:<6} {:>10} {:>10} {:>8} {:>4}",
                "x_metric", "y", "slope", "intercept", "rvalue", "n"
            );
            for r in &self.regression {
                let _ = writeln!(
                    out,
                    "            {:<24} {:<6} {:>10.4} {:>10.4} {:>8.4} {:>4}",
                    r.x_metric, r.y_metric, r.slope, r.intercept, r.rvalue, r.n_points
                );
            }
        }
        out
    }
}
