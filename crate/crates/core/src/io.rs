//! Delimited-text ingestion and export.
//!
//! Input is comma-separated UTF-8 with a header row and `.` as the decimal
//! point. Numbers are parsed with Rust's `f64` parser and exported with the
//! shortest representation that parses back to the same value, so an
//! exported file re-ingests bit for bit.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::art::{ScoreScaling, TestVariant};
use crate::blocks::{blockify, TimedRow};
use crate::error::ArtError;
use crate::group::GroupSpec;
use crate::model::{ClusteredDataset, LinearHypothesis, RawRow};

pub const INTERCEPT_NAME: &str = "const";

/// Errors surfaced by the command-line layer, each tied to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("column {0:?} not found in header")]
    MissingColumn(String),

    #[error("cannot parse {column:?} on line {line}: {value:?}")]
    Parse {
        line: u64,
        column: String,
        value: String,
    },

    #[error("non-finite value in {column:?} on line {line}")]
    NonFiniteValue { line: u64, column: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("invalid data: {0}")]
    Data(ArtError),

    #[error(transparent)]
    Art(#[from] ArtError),
}

impl CliError {
    /// 0 success, 1 usage, 2 identification/estimation, 3 input/output.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::MissingColumn(_)
            | CliError::Parse { .. }
            | CliError::NonFiniteValue { .. }
            | CliError::Io { .. }
            | CliError::Format(_)
            | CliError::Data(_) => 3,
            CliError::Art(e) => match e {
                ArtError::InvalidHypothesis(_)
                | ArtError::InvalidAlpha(_)
                | ArtError::GroupTooLarge { .. }
                | ArtError::TooFewDraws(_)
                | ArtError::InvalidGrid(_)
                | ArtError::InvalidDesign(_)
                | ArtError::LengthMismatch { .. } => 1,
                ArtError::TooFewObservations { .. } => 1,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// How the contrast `c` is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContrastSpec {
    Vector(Vec<f64>),
    /// Unit vector selecting one named coefficient.
    Coefficient(String),
}

/// Column layout of the input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub input: PathBuf,
    pub cluster_column: Option<String>,
    pub outcome: String,
    pub covariates: Vec<String>,
    pub intercept: bool,
    /// Pseudo-cluster counts; empty means clusters come from `cluster_column`.
    #[serde(default)]
    pub blocks: Vec<usize>,
    pub time_column: Option<String>,
}

/// Fully resolved settings of a `test` or `ci` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataConfig,
    pub contrast: ContrastSpec,
    pub null_value: f64,
    pub alpha: f64,
    pub group: GroupSpec,
    pub variant: TestVariant,
    /// Joint hypothesis `R beta = Lambda` for the Wald statistic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restriction: Option<WaldConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldConfig {
    pub rows: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub scaling: ScoreScaling,
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Usage(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !self.null_value.is_finite() {
            return Err(CliError::Usage("null value must be finite".into()));
        }
        self.data.validate()
    }

    /// Resolve the contrast against the dataset's covariate names.
    pub fn hypothesis(&self, data: &ClusteredDataset) -> CliResult<LinearHypothesis> {
        resolve_contrast(&self.contrast, data, self.null_value)
    }
}

pub fn resolve_contrast(
    spec: &ContrastSpec,
    data: &ClusteredDataset,
    value: f64,
) -> CliResult<LinearHypothesis> {
    match spec {
        ContrastSpec::Vector(c) => {
            if c.len() != data.dim() {
                return Err(CliError::Usage(format!(
                    "contrast has {} entries but the model has {} coefficients ({})",
                    c.len(),
                    data.dim(),
                    data.covariate_names().join(", ")
                )));
            }
            Ok(LinearHypothesis::new(c.clone(), value)?)
        }
        ContrastSpec::Coefficient(name) => {
            let idx = data.covariate_position(name).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown coefficient {name:?}; model has {}",
                    data.covariate_names().join(", ")
                ))
            })?;
            Ok(LinearHypothesis::coefficient(data.dim(), idx, value)?)
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.covariates.is_empty() && !self.intercept {
            return Err(CliError::Usage(
                "at least one covariate (or --intercept) is required".into(),
            ));
        }
        if self.blocks.is_empty() {
            if self.cluster_column.is_none() {
                return Err(CliError::Usage(
                    "either a cluster column or a block count is required".into(),
                ));
            }
        } else {
            if self.time_column.is_none() {
                return Err(CliError::Usage("block mode needs a time column".into()));
            }
            if let Some(&q) = self.blocks.iter().find(|&&q| q < 2) {
                return Err(CliError::Usage(format!(
                    "block count must be >= 2, got {q}"
                )));
            }
        }
        Ok(())
    }

    /// Names of the model's coefficients after intercept handling.
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.covariates.len() + 1);
        if self.intercept {
            names.push(INTERCEPT_NAME.to_string());
        }
        names.extend(self.covariates.iter().cloned());
        names
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

fn read_table<R: Read>(reader: R) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| CliError::Format(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Format(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }
    Ok(Table { header, rows })
}

fn column(header: &[String], name: &str) -> CliResult<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::MissingColumn(name.to_string()))
}

fn parse_number(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> CliResult<f64> {
    let raw = rec.get(idx).unwrap_or("");
    let value: f64 = raw.parse().map_err(|_| CliError::Parse {
        line,
        column: name.to_string(),
        value: raw.to_string(),
    })?;
    if !value.is_finite() {
        return Err(CliError::NonFiniteValue {
            line,
            column: name.to_string(),
        });
    }
    Ok(value)
}

struct Parsed {
    outcome: f64,
    covariates: Vec<f64>,
}

fn parse_rows(table: &Table, cfg: &DataConfig) -> CliResult<Vec<(u64, Parsed)>> {
    let y_idx = column(&table.header, &cfg.outcome)?;
    let x_idx: Vec<usize> = cfg
        .covariates
        .iter()
        .map(|c| column(&table.header, c))
        .collect::<CliResult<_>>()?;
    table
        .rows
        .iter()
        .map(|(line, rec)| {
            let outcome = parse_number(rec, y_idx, &cfg.outcome, *line)?;
            let mut covariates = Vec::with_capacity(x_idx.len() + 1);
            if cfg.intercept {
                covariates.push(1.0);
            }
            for (&i, name) in x_idx.iter().zip(&cfg.covariates) {
                covariates.push(parse_number(rec, i, name, *line)?);
            }
            Ok((
                *line,
                Parsed {
                    outcome,
                    covariates,
                },
            ))
        })
        .collect()
}

/// Read a dataset grouped by the cluster column.
pub fn ingest_clusters<R: Read>(reader: R, cfg: &DataConfig) -> CliResult<ClusteredDataset> {
    let table = read_table(reader)?;
    let label_col = cfg
        .cluster_column
        .as_deref()
        .ok_or_else(|| CliError::Usage("a cluster column is required".into()))?;
    let c_idx = column(&table.header, label_col)?;
    let parsed = parse_rows(&table, cfg)?;
    let rows = parsed
        .into_iter()
        .zip(&table.rows)
        .map(|((_, p), (_, rec))| {
            RawRow::new(rec.get(c_idx).unwrap_or(""), p.outcome, p.covariates)
        })
        .collect();
    ClusteredDataset::from_rows(rows, cfg.coefficient_names()).map_err(CliError::Data)
}

/// Read a time series and cut it into `q` consecutive blocks.
pub fn ingest_blocks<R: Read>(
    reader: R,
    cfg: &DataConfig,
    q: usize,
) -> CliResult<ClusteredDataset> {
    let table = read_table(reader)?;
    let time_col = cfg
        .time_column
        .as_deref()
        .ok_or_else(|| CliError::Usage("block mode needs a time column".into()))?;
    let t_idx = column(&table.header, time_col)?;
    let parsed = parse_rows(&table, cfg)?;
    let rows = parsed
        .into_iter()
        .zip(&table.rows)
        .map(|((line, p), (_, rec))| {
            Ok(TimedRow {
                time: parse_number(rec, t_idx, time_col, line)?,
                outcome: p.outcome,
                covariates: p.covariates,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    blockify(rows, q, cfg.coefficient_names()).map_err(|e| match e {
        ArtError::TooFewObservations { .. } | ArtError::TooFewClusters { .. } => CliError::Art(e),
        other => CliError::Data(other),
    })
}

fn open(path: &Path) -> CliResult<std::fs::File> {
    std::fs::File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Load the dataset described by `cfg`. In block mode `blocks` selects the
/// block count; it is ignored otherwise.
pub fn ingest(cfg: &DataConfig, blocks: Option<usize>) -> CliResult<ClusteredDataset> {
    cfg.validate()?;
    let file = open(&cfg.input)?;
    match blocks {
        Some(q) => ingest_blocks(file, cfg, q),
        None => ingest_clusters(file, cfg),
    }
}

/// Write the dataset as CSV with columns `cluster`, the outcome, then every
/// coefficient column (including the intercept when present).
pub fn export_csv<W: Write>(
    data: &ClusteredDataset,
    outcome_name: &str,
    writer: W,
) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["cluster".to_string(), outcome_name.to_string()];
    header.extend(data.covariate_names().iter().cloned());
    let fmt_err = |e: csv::Error| CliError::Format(e.to_string());
    wtr.write_record(&header).map_err(fmt_err)?;
    for j in 0..data.q() {
        for i in data.cluster_range(j) {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(data.label(j).to_string());
            rec.push(data.outcomes()[i].to_string());
            rec.extend(data.row(i).iter().map(|v| v.to_string()));
            wtr.write_record(&rec).map_err(fmt_err)?;
        }
    }
    wtr.flush().map_err(|source| CliError::Io {
        path: PathBuf::from("<output>"),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> DataConfig {
        DataConfig {
            input: PathBuf::new(),
            cluster_column: Some("cluster".into()),
            outcome: "y".into(),
            covariates: vec!["x".into()],
            intercept: false,
            blocks: vec![],
            time_column: None,
        }
    }

    const SMALL: &str = "cluster,y,x\na,1.0,2\na,2.5,3\nb,0.5,1\nb,4,5\na,3,1\nb,1,2\n";

    #[test]
    fn smoke() {
        let ds = ingest_clusters(SMALL.as_bytes(), &cfg()).unwrap();
        assert_eq!(ds.q(), 2);
        assert_eq!(ds.n(), 6);
        assert_eq!(ds.cluster_sizes(), vec![3, 3]);
    }

    #[test]
    fn intercept_is_prepended() {
        let mut c = cfg();
        c.intercept = true;
        let ds = ingest_clusters(SMALL.as_bytes(), &c).unwrap();
        assert_eq!(ds.covariate_names(), ["const", "x"]);
        assert_eq!(ds.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn missing_column_is_named() {
        let mut c = cfg();
        c.covariates = vec!["z".into()];
        match ingest_clusters(SMALL.as_bytes(), &c) {
            Err(CliError::MissingColumn(name)) => assert_eq!(name, "z"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "cluster,y,x\na,1,2\nb,oops,3\n";
        match ingest_clusters(text.as_bytes(), &cfg()) {
            Err(CliError::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_is_rejected() {
        let text = "cluster,y,x\na,1,2\nb,NaN,3\nc,1,1\n";
        let err = ingest_clusters(text.as_bytes(), &cfg()).unwrap_err();
        assert!(matches!(err, CliError::NonFiniteValue { line: 3, .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn export_round_trips() {
        let text =
            "cluster,y,x\nb,0.1,1e-7\na,-3.25,2\nb,1.0000000000000002,3\na,7,123456789.123\n";
        let ds = ingest_clusters(text.as_bytes(), &cfg()).unwrap();
        let mut buf = Vec::new();
        export_csv(&ds, "y", &mut buf).unwrap();
        let back = ingest_clusters(buf.as_slice(), &cfg()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn blocks_from_time_column() {
        let mut text = String::from("t,y,x\n");
        for t in (0..11).rev() {
            text.push_str(&format!("{t},{},{}\n", t * 2, t % 3));
        }
        let mut c = cfg();
        c.cluster_column = None;
        c.time_column = Some("t".into());
        c.blocks = vec![2];
        let ds = ingest_blocks(text.as_bytes(), &c, 2).unwrap();
        assert_eq!(ds.cluster_sizes(), vec![5, 6]);
        assert_eq!(ds.outcomes()[0], 0.0);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(
            CliError::Art(ArtError::IdentificationFailure {
                cluster: 0,
                label: "a".into(),
                rcond: 0.0
            })
            .exit_code(),
            2
        );
        assert_eq!(CliError::MissingColumn("x".into()).exit_code(), 3);
    }
}
