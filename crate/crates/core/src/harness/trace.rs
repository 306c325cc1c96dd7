//! Per-iteration metrics rows and their CSV form.
//!
//! The column set is fixed:
//! `iter,epoch,agent_evals_total,residual,consensus_error,train_acc,test_acc,wall_ms`.
//! Optional columns are left empty when not applicable. The first line of
//! every file is a `#` comment echoing the config hash and seed, so traces
//! are self-describing; byte-identical reruns are part of the contract
//! (wall_ms excepted).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{CoreError, Result};

pub const TRACE_HEADER: &str =
    "iter,epoch,agent_evals_total,residual,consensus_error,train_acc,test_acc,wall_ms";

/// One metrics row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: u64,
    /// Cumulative component evaluations over the sum of local sample
    /// counts: effective passes over the data.
    pub epoch: f64,
    pub agent_evals_total: u64,
    pub residual: Option<f64>,
    pub consensus_error: f64,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub wall_ms: f64,
}

impl TraceRecord {
    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.iter,
            self.epoch,
            self.agent_evals_total,
            opt(self.residual),
            self.consensus_error,
            opt(self.train_acc),
            opt(self.test_acc),
            self.wall_ms
        )
    }
}

/// Run identity echoed into every trace header.
#[derive(Debug, Clone, Default)]
pub struct RunMeta {
    pub config_hash: String,
    pub seed: u64,
    pub algorithm: String,
    pub alpha: f64,
    pub alpha_multiplier: f64,
    pub network: String,
    pub objective: String,
}

impl RunMeta {
    pub fn header_line(&self) -> String {
        format!(
            "# config_hash={} seed={} algorithm={} alpha={} alpha_multiplier={} network=\"{}\" objective=\"{}\"",
            self.config_hash,
            self.seed,
            self.algorithm,
            self.alpha,
            self.alpha_multiplier,
            self.network,
            self.objective
        )
    }
}

/// A completed run: metadata plus the ordered records.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub meta: RunMeta,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn final_record(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir).map_err(|e| CoreError::io(dir.display().to_string(), e))?;
            }
        }
        let mut out = String::new();
        out.push_str(&self.meta.header_line());
        out.push('\n');
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for rec in &self.records {
            out.push_str(&rec.to_csv_row());
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| CoreError::io(path.display().to_string(), e))
    }

    /// Parses a file written by [`write_csv`](Trace::write_csv). Metadata
    /// other than the raw header line is not reconstructed.
    pub fn read_csv(path: &Path) -> Result<Trace> {
        let text =
            fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
        let mut records = Vec::new();
        for line in text.lines() {
            if line.starts_with('#') || line.is_empty() || line.starts_with("iter,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(CoreError::Dataset(format!(
                    "trace row has {} fields: {line}",
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| CoreError::Dataset(format!("bad trace number '{s}'")))
            };
            let parse_opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    parse(s).map(Some)
                }
            };
            records.push(TraceRecord {
                iter: fields[0]
                    .parse()
                    .map_err(|_| CoreError::Dataset("bad iter".into()))?,
                epoch: parse(fields[1])?,
                agent_evals_total: fields[2]
                    .parse()
                    .map_err(|_| CoreError::Dataset("bad eval count".into()))?,
                residual: parse_opt(fields[3])?,
                consensus_error: parse(fields[4])?,
                train_acc: parse_opt(fields[5])?,
                test_acc: parse_opt(fields[6])?,
                wall_ms: parse(fields[7])?,
            });
        }
        Ok(Trace {
            meta: RunMeta::default(),
            records,
        })
    }
}

/// Receives rows as the runner produces them. The runner owns the only
/// mutable reference, so appends are serialized by construction.
pub trait MetricsSink {
    fn record(&mut self, meta: &RunMeta, rec: &TraceRecord) -> Result<()>;
}

/// Streams rows straight to a CSV file.
pub struct CsvSink {
    writer: std::io::BufWriter<fs::File>,
    path: String,
    wrote_header: bool,
}

impl CsvSink {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir).map_err(|e| CoreError::io(dir.display().to_string(), e))?;
            }
        }
        let file =
            fs::File::create(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
        Ok(CsvSink {
            writer: std::io::BufWriter::new(file),
            path: path.display().to_string(),
            wrote_header: false,
        })
    }
}

impl MetricsSink for CsvSink {
    fn record(&mut self, meta: &RunMeta, rec: &TraceRecord) -> Result<()> {
        if !self.wrote_header {
            writeln!(self.writer, "{}", meta.header_line())
                .and_then(|_| writeln!(self.writer, "{TRACE_HEADER}"))
                .map_err(|e| CoreError::io(self.path.clone(), e))?;
            self.wrote_header = true;
        }
        writeln!(self.writer, "{}", rec.to_csv_row())
            .map_err(|e| CoreError::io(self.path.clone(), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_is_exact() {
        let trace = Trace {
            meta: RunMeta {
                config_hash: "abc123".into(),
                seed: 9,
                algorithm: "addopt".into(),
                alpha: 0.125,
                alpha_multiplier: 1.0,
                network: "ring".into(),
                objective: "quadratic".into(),
            },
            records: vec![
                TraceRecord {
                    iter: 0,
                    epoch: 1.0,
                    agent_evals_total: 64,
                    residual: Some(0.123_456_789_012_345_68),
                    consensus_error: 3.5e-7,
                    train_acc: None,
                    test_acc: Some(0.875),
                    wall_ms: 1.5,
                },
                TraceRecord {
                    iter: 1,
                    epoch: 1.03125,
                    agent_evals_total: 66,
                    residual: None,
                    consensus_error: 0.0,
                    train_acc: None,
                    test_acc: None,
                    wall_ms: 2.0,
                },
            ],
        };
        let dir = std::env::temp_dir().join("push_lsvrg_trace_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trace.csv");
        trace.write_csv(&path).unwrap();
        let back = Trace::read_csv(&path).unwrap();
        assert_eq!(back.records, trace.records);
        std::fs::remove_file(&path).ok();
    }
}
