//! CSV ingestion, CSV writers for grids/lineplots/studies, and the JSON
//! report document.
//!
//! Probabilities are written with 12 significant digits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assessment::CalibrationReport;
use crate::boldness::{min_max, spread, BoldnessResult, ContourGrid};
use crate::error::{CalibError, Result};
use crate::estimation::MleFit;
use crate::llo::PredictionSet;
use crate::simulation::StudyTable;

pub const CONTOUR_HEADER: [&str; 4] = ["delta", "gamma", "posterior", "spread"];
pub const STUDY_HEADER: [&str; 6] = ["n", "replicate", "forecaster", "sigma", "metric", "value"];

/// Round to 12 significant digits and print the shortest decimal that
/// reads back to the rounded value.
pub fn fmt_sig12(v: f64) -> String {
    if v.is_nan() {
        return "NA".into();
    }
    if v == 0.0 || v.is_infinite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    let magnitude = rounded.abs();
    if (1e-5..1e15).contains(&magnitude) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), fmt_sig12)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<PredictionSet> {
    read_predictions_from(File::open(path)?)
}

/// Reads a headed CSV with columns `x`, `y` and optionally `label`.
/// Errors name the 1-based file row (the header is row 1).
pub fn read_predictions_from<R: Read>(reader: R) -> Result<PredictionSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(CalibError::InvalidData("input is empty".into()));
    }
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let missing = |name: &str| CalibError::Parse {
        row: 1,
        message: format!("missing required column '{name}'"),
    };
    let x_col = column("x").ok_or_else(|| missing("x"))?;
    let y_col = column("y").ok_or_else(|| missing("y"))?;
    let label_col = column("label");

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| CalibError::Parse {
            row,
            message: e.to_string(),
        })?;
        let field = |col: usize, name: &str| {
            record.get(col).ok_or_else(|| CalibError::Parse {
                row,
                message: format!("missing value for '{name}'"),
            })
        };

        let raw_x = field(x_col, "x")?;
        let p: f64 = raw_x.parse().map_err(|_| CalibError::Parse {
            row,
            message: format!("prediction '{raw_x}' is not a number"),
        })?;
        if !(0.0..=1.0).contains(&p) {
            return Err(CalibError::Parse {
                row,
                message: format!("prediction {p} is outside [0, 1]"),
            });
        }

        let raw_y = field(y_col, "y")?;
        let outcome = match raw_y.parse::<f64>() {
            Ok(v) if v == 0.0 => 0,
            Ok(v) if v == 1.0 => 1,
            _ => {
                return Err(CalibError::Parse {
                    row,
                    message: format!("outcome '{raw_y}' is not 0 or 1"),
                })
            }
        };

        x.push(p);
        y.push(outcome);
        if let Some(col) = label_col {
            labels.push(field(col, "label")?.to_string());
        }
    }
    if x.is_empty() {
        return Err(CalibError::InvalidData("input has a header but no data rows".into()));
    }
    let set = PredictionSet::new(x, y)?;
    match label_col {
        Some(_) => set.with_labels(labels),
        None => Ok(set),
    }
}

pub fn write_contour_csv<W: Write>(writer: W, grid: &ContourGrid) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CONTOUR_HEADER)?;
    for cell in &grid.cells {
        w.write_record([
            fmt_sig12(cell.delta),
            fmt_sig12(cell.gamma),
            fmt_sig12(cell.posterior),
            fmt_sig12(cell.spread),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Column name for a boldness level, e.g. `x_t95`, `x_t97.5`.
pub fn level_column(t: f64) -> String {
    let pct: f64 = format!("{:.6}", t * 100.0).parse().expect("formatted float parses");
    format!("x_t{pct}")
}

/// One row per prediction, in input order. Rows without labels are
/// labelled by their 1-based position.
#[derive(Debug, Clone, PartialEq)]
pub struct LineplotTable {
    pub labels: Vec<String>,
    pub y: Vec<u8>,
    /// `(column name, values)`, starting with `x_original` and `x_mle`.
    pub columns: Vec<(String, Vec<f64>)>,
}

impl LineplotTable {
    pub fn new(data: &PredictionSet, mle_adjusted: Vec<f64>, levels: &[BoldnessResult]) -> Self {
        let labels = match data.labels() {
            Some(l) => l.to_vec(),
            None => (1..=data.len()).map(|i| i.to_string()).collect(),
        };
        let mut columns = vec![
            ("x_original".to_string(), data.x().to_vec()),
            ("x_mle".to_string(), mle_adjusted),
        ];
        columns.extend(levels.iter().map(|r| (level_column(r.t), r.recalibrated.clone())));
        LineplotTable {
            labels,
            y: data.y().to_vec(),
            columns,
        }
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["label".to_string(), "y".to_string()];
        header.extend(self.columns.iter().map(|(name, _)| name.clone()));
        w.write_record(&header)?;
        for i in 0..self.labels.len() {
            let mut record = vec![self.labels[i].clone(), self.y[i].to_string()];
            record.extend(self.columns.iter().map(|(_, v)| fmt_sig12(v[i])));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 3 || &headers[0] != "label" || &headers[1] != "y" {
            return Err(CalibError::Parse {
                row: 1,
                message: "lineplot header must start with label,y and have at least one prediction column".into(),
            });
        }
        let mut table = LineplotTable {
            labels: Vec::new(),
            y: Vec::new(),
            columns: headers.iter().skip(2).map(|h| (h.to_string(), Vec::new())).collect(),
        };
        for (i, record) in rdr.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| CalibError::Parse {
                row,
                message: e.to_string(),
            })?;
            let bad = |what: &str| CalibError::Parse {
                row,
                message: format!("unparseable {what}"),
            };
            table.labels.push(record[0].to_string());
            table.y.push(record[1].parse().map_err(|_| bad("outcome"))?);
            for (c, (name, values)) in table.columns.iter_mut().enumerate() {
                values.push(record[c + 2].parse().map_err(|_| bad(name))?);
            }
        }
        Ok(table)
    }
}

pub fn write_study_csv<W: Write>(writer: W, table: &StudyTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(STUDY_HEADER)?;
    for row in &table.rows {
        for (metric, value) in row.metrics() {
            w.write_record([
                row.n.to_string(),
                row.replicate.to_string(),
                row.forecaster.clone(),
                format!("{}", row.sigma),
                metric.to_string(),
                fmt_opt(value),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub base_rate: f64,
    pub range_min: f64,
    pub range_max: f64,
}

/// Flat view of [`CalibrationReport`]; undefined values are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentSummary {
    pub prior_calibrated: f64,
    pub posterior_calibrated: f64,
    pub bayes_factor_21: Option<f64>,
    pub bic_null: Option<f64>,
    pub bic_mle: Option<f64>,
    pub lrt_statistic: Option<f64>,
    pub lrt_p_value: Option<f64>,
    pub brier: f64,
    pub brier_calibration: f64,
    pub ece: f64,
    pub auc: Option<f64>,
    pub n_bins: usize,
    pub degenerate: bool,
}

/// One row of the recalibration table: the MLE or a boldness level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecalibrationRow {
    pub method: String,
    pub t: Option<f64>,
    pub delta: f64,
    pub gamma: f64,
    pub posterior: f64,
    pub spread: f64,
    pub range_min: f64,
    pub range_max: f64,
    pub feasible: bool,
}

impl RecalibrationRow {
    /// `posterior` is the calibration posterior of the MLE-adjusted set.
    pub fn from_mle(fit: &MleFit, adjusted: &[f64], posterior: f64) -> Self {
        let (range_min, range_max) = min_max(adjusted);
        RecalibrationRow {
            method: "mle".into(),
            t: None,
            delta: fit.params.delta,
            gamma: fit.params.gamma,
            posterior,
            spread: spread(adjusted),
            range_min,
            range_max,
            feasible: true,
        }
    }

    pub fn from_boldness(result: &BoldnessResult) -> Self {
        let (range_min, range_max) = result.range();
        RecalibrationRow {
            method: "boldness".into(),
            t: Some(result.t),
            delta: result.params.delta,
            gamma: result.params.gamma,
            posterior: result.achieved_posterior,
            spread: result.achieved_spread,
            range_min,
            range_max,
            feasible: result.feasible,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub dataset: DatasetSummary,
    pub assessment: AssessmentSummary,
    pub recalibrations: Vec<RecalibrationRow>,
    pub warnings: Vec<String>,
}

impl ReportDocument {
    pub fn new(data: &PredictionSet, report: &CalibrationReport, prior: f64) -> Self {
        let (range_min, range_max) = min_max(data.x());
        ReportDocument {
            dataset: DatasetSummary {
                n: report.n,
                base_rate: report.base_rate,
                range_min,
                range_max,
            },
            assessment: AssessmentSummary {
                prior_calibrated: prior,
                posterior_calibrated: report.posterior_calibrated(),
                bayes_factor_21: report.bayes.map(|b| b.bayes_factor_21),
                bic_null: report.bayes.map(|b| b.bic_null),
                bic_mle: report.bayes.map(|b| b.bic_mle),
                lrt_statistic: report.lrt.map(|l| l.statistic),
                lrt_p_value: report.lrt.map(|l| l.p_value),
                brier: report.scores.brier,
                brier_calibration: report.scores.brier_calibration,
                ece: report.scores.ece,
                auc: report.scores.auc,
                n_bins: report.scores.n_bins,
                degenerate: report.degenerate,
            },
            recalibrations: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Human-readable summary in the layout of a results table.
    pub fn render_table(&self) -> String {
        let a = &self.assessment;
        let opt4 = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
        let p_value = match a.lrt_p_value {
            Some(p) if p < 0.001 => "<0.001".to_string(),
            other => opt4(other),
        };
        let mut out = format!(
            "n = {}, base rate = {:.4}, range = ({:.3}, {:.3})\n\
             {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}\n\
             {:>10} {:>10} {:>10.4} {:>10.4} {:>10.4} {:>10}\n",
            self.dataset.n,
            self.dataset.base_rate,
            self.dataset.range_min,
            self.dataset.range_max,
            "P(Mc|y)",
            "p-value",
            "Brier",
            "BSC",
            "ECE",
            "AUC",
            format!("{:.4}", a.posterior_calibrated),
            p_value,
            a.brier,
            a.brier_calibration,
            a.ece,
            opt4(a.auc),
        );
        if a.degenerate {
            out.push_str("degenerate data: the MLE diverges, posterior reported as 0\n");
        }
        if !self.recalibrations.is_empty() {
            out.push_str(&format!(
                "\n{:>10} {:>8} {:>8} {:>8} {:>10} {:>7} {:>7}\n",
                "method", "t", "delta", "gamma", "P(Mc|y)", "min", "max"
            ));
            for r in &self.recalibrations {
                let label = match r.t {
                    Some(t) => format!("{}% B-R", fmt_sig12(t * 100.0)),
                    None => "MLE".into(),
                };
                out.push_str(&format!(
                    "{:>10} {:>8} {:>8.3} {:>8.3} {:>10.4} {:>7.3} {:>7.3}{}\n",
                    label,
                    r.t.map_or("-".into(), |t| t.to_string()),
                    r.delta,
                    r.gamma,
                    r.posterior,
                    r.range_min,
                    r.range_max,
                    if r.feasible { "" } else { "  (infeasible)" }
                ));
            }
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}
