//! File formats shared by the library and the command-line tool.
//!
//! Every CSV starts with a `# schema: <name>/<version>` comment line;
//! readers skip comment lines.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::assessment::{AssessmentReport, JackknifeResiduals};
use crate::error::{Error, Result};
use crate::model::{CensorDirection, CensoredSeries, DesignMatrix, ParamDraw};
use crate::sampler::Chain;

pub const DATA_SCHEMA: &str = "clrar-data/1";
pub const DRAWS_SCHEMA: &str = "clrar-draws/1";
pub const AUGMENTED_SCHEMA: &str = "clrar-augmented/1";
pub const TRACE_SCHEMA: &str = "clrar-trace/1";
pub const GEWEKE_SCHEMA: &str = "clrar-geweke/1";
pub const ACF_SCHEMA: &str = "clrar-acf/1";
pub const QUANTILES_SCHEMA: &str = "clrar-quantiles/1";
pub const RESIDUALS_SCHEMA: &str = "clrar-residuals/1";
pub const METADATA_SCHEMA_VERSION: u32 = 1;

fn schema_line(out: &mut String, schema: &str) {
    writeln!(out, "# schema: {schema}").unwrap();
}

/// Companion of a data CSV describing how it was censored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMetadata {
    pub schema_version: u32,
    pub limit: f64,
    pub direction: CensorDirection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<ParamDraw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<crate::simstudy::Scenario>,
}

/// `t,y,censored,x2..xk`, with `t` 1-based.
pub fn data_csv(series: &CensoredSeries, x: &DesignMatrix) -> String {
    let mut out = String::new();
    schema_line(&mut out, DATA_SCHEMA);
    out.push_str("t,y,censored");
    for j in 2..=x.cols() {
        write!(out, ",x{j}").unwrap();
    }
    out.push('\n');
    let m = x.matrix();
    for t in 0..series.len() {
        write!(out, "{},{},{}", t + 1, series.values()[t], series.censored()[t]).unwrap();
        for j in 1..x.cols() {
            write!(out, ",{}", m[(t, j)]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Reads a data CSV.
///
/// Requires a `y` column; every column named `x*` becomes a covariate in
/// file order. Without a `censored` column, points at or beyond the limit
/// are treated as censored and recorded at the limit.
pub fn read_data_csv(path: &Path, limit: f64, direction: CensorDirection) -> Result<(CensoredSeries, DesignMatrix)> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let y_col = find("y").ok_or_else(|| Error::InvalidData("data file has no `y` column".into()))?;
    let c_col = find("censored");
    let x_cols: Vec<usize> =
        headers.iter().enumerate().filter(|(_, h)| h.starts_with('x') || h.starts_with('X')).map(|(i, _)| i).collect();

    let mut values = Vec::new();
    let mut censored = Vec::new();
    let mut covariates: Vec<Vec<f64>> = vec![Vec::new(); x_cols.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row + 1;
        let field = |i: usize| record.get(i).unwrap_or("");
        let number = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| {
                Error::InvalidData(format!("row {line}: `{}` in column `{}` is not a number", field(i), &headers[i]))
            })
        };
        let y = number(y_col)?;
        let (y, c) = match c_col {
            Some(i) => (
                y,
                parse_flag(field(i)).ok_or_else(|| {
                    Error::InvalidData(format!("row {line}: censored flag `{}` is not true/false/1/0", field(i)))
                })?,
            ),
            None => direction.censor(y, limit),
        };
        values.push(y);
        censored.push(c);
        for (dst, &i) in covariates.iter_mut().zip(&x_cols) {
            dst.push(number(i)?);
        }
    }
    let series = CensoredSeries::new(values, censored, limit, direction)?;
    let x = DesignMatrix::with_covariates(series.len(), &covariates)?;
    Ok((series, x))
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" => Some(true),
        "false" | "0" => Some(false),
        _ => None,
    }
}

/// Builds a design matrix from explicit covariate rows.
pub fn design_from_rows(rows: &[Vec<f64>]) -> Result<DesignMatrix> {
    let k = rows.first().map_or(0, Vec::len);
    let m = DMatrix::from_fn(rows.len(), k + 1, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    DesignMatrix::new(m)
}

/// `draw,beta0..,rho1..,sigma2`.
pub fn draws_csv(chain: &Chain) -> String {
    let mut out = String::new();
    schema_line(&mut out, DRAWS_SCHEMA);
    writeln!(out, "draw,{}", chain.parameter_names().join(",")).unwrap();
    for j in 0..chain.len() {
        write!(out, "{}", j + 1).unwrap();
        for v in chain.row(j) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// `t,y,censored,z`.
pub fn augmented_csv(series: &CensoredSeries, z: &[f64]) -> String {
    let mut out = String::new();
    schema_line(&mut out, AUGMENTED_SCHEMA);
    out.push_str("t,y,censored,z\n");
    for (t, zt) in z.iter().enumerate() {
        writeln!(out, "{},{},{},{}", t + 1, series.values()[t], series.censored()[t], zt).unwrap();
    }
    out
}

/// Long format `index,parameter,value`.
pub fn trace_csv(chain: &Chain) -> String {
    let mut out = String::new();
    schema_line(&mut out, TRACE_SCHEMA);
    out.push_str("index,parameter,value\n");
    for (c, name) in chain.parameter_names().iter().enumerate() {
        for (j, v) in chain.column(c).iter().enumerate() {
            writeln!(out, "{},{name},{v}", j + 1).unwrap();
        }
    }
    out
}

pub fn geweke_csv(result: &crate::diagnostics::GewekeResult) -> String {
    let mut out = String::new();
    schema_line(&mut out, GEWEKE_SCHEMA);
    writeln!(out, "# windows: early={} late={}", result.window_early, result.window_late).unwrap();
    out.push_str("parameter,z\n");
    for (name, z) in result.parameters.iter().zip(&result.z_scores) {
        writeln!(out, "{name},{z}").unwrap();
    }
    out
}

/// `lag,<parameter>..` with one column per parameter.
pub fn acf_csv(names: &[String], acfs: &[Vec<f64>]) -> String {
    let mut out = String::new();
    schema_line(&mut out, ACF_SCHEMA);
    writeln!(out, "lag,{}", names.join(",")).unwrap();
    let lags = acfs.first().map_or(0, Vec::len);
    for h in 0..lags {
        write!(out, "{h}").unwrap();
        for a in acfs {
            write!(out, ",{}", a[h]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// `index,parameter,q<prob>..`, one row per retained index and parameter.
pub fn quantiles_csv(names: &[String], probs: &[f64], traces: &[Vec<Vec<f64>>]) -> String {
    let mut out = String::new();
    schema_line(&mut out, QUANTILES_SCHEMA);
    out.push_str("index,parameter");
    for p in probs {
        write!(out, ",q{p}").unwrap();
    }
    out.push('\n');
    for (name, trace) in names.iter().zip(traces) {
        for (i, row) in trace.iter().enumerate() {
            write!(out, "{},{name}", i + 1).unwrap();
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// `t,residual,predictive_mean,predictive_variance`.
pub fn residuals_csv(res: &JackknifeResiduals) -> String {
    residual_rows_csv(&res.times, &res.residuals, &res.predictive_means, &res.predictive_variances)
}

pub fn report_residuals_csv(report: &AssessmentReport) -> String {
    residual_rows_csv(&report.residual_times, &report.residuals, &report.predictive_means, &report.predictive_variances)
}

fn residual_rows_csv(times: &[usize], residuals: &[f64], means: &[f64], variances: &[f64]) -> String {
    let mut out = String::new();
    schema_line(&mut out, RESIDUALS_SCHEMA);
    out.push_str("t,residual,predictive_mean,predictive_variance\n");
    for i in 0..residuals.len() {
        writeln!(out, "{},{},{},{}", times[i], residuals[i], means[i], variances[i]).unwrap();
    }
    out
}
