//! The on-disk trace format.
//!
//! A trace file starts with the header line `ddcrp-trace v1` followed by one
//! record per line:
//!
//! ```text
//! chain sweep logjoint K alpha a [c: i1 i2 ... in]
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! and re-serializing a trace reproduces it byte for byte. Link snapshots
//! use 1-based customer indices.

use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::evalpred::{EvalError, PosteriorSample, PosteriorSamples};
use crate::linkstate::CustomerLinks;

pub const TRACE_HEADER: &str = "ddcrp-trace v1";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: missing or wrong header (expected {TRACE_HEADER:?})")]
    BadHeader { path: String },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: sweep index went backwards within chain {chain}")]
    NonMonotoneSweep {
        path: String,
        line: usize,
        chain: u64,
    },
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One trace line: chain id, sweep index, state summary, and an optional
/// link snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub chain: u64,
    pub sweep: u64,
    pub log_joint: f64,
    pub n_tables: usize,
    pub alpha: f64,
    pub decay_param: f64,
    pub links: Option<CustomerLinks>,
}

impl TraceRecord {
    pub fn to_line(&self) -> String {
        let mut line = format!(
            "{} {} {} {} {} {}",
            self.chain, self.sweep, self.log_joint, self.n_tables, self.alpha, self.decay_param
        );
        if let Some(links) = &self.links {
            line.push_str(" c:");
            for target in links.iter() {
                line.push(' ');
                line.push_str(&(target + 1).to_string());
            }
        }
        line
    }

    pub fn from_line(line: &str, path: &str, lineno: usize) -> Result<Self, TraceError> {
        let parse_err = |message: String| TraceError::Parse {
            path: path.to_string(),
            line: lineno,
            message,
        };
        let (head, snapshot) = match line.split_once(" c:") {
            Some((head, rest)) => (head, Some(rest)),
            None => (line, None),
        };
        let fields: Vec<&str> = head.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(parse_err(format!(
                "expected 6 record fields, got {}",
                fields.len()
            )));
        }
        let chain = fields[0]
            .parse()
            .map_err(|_| parse_err(format!("bad chain id {:?}", fields[0])))?;
        let sweep = fields[1]
            .parse()
            .map_err(|_| parse_err(format!("bad sweep index {:?}", fields[1])))?;
        let log_joint = fields[2]
            .parse()
            .map_err(|_| parse_err(format!("bad log-joint {:?}", fields[2])))?;
        let n_tables = fields[3]
            .parse()
            .map_err(|_| parse_err(format!("bad table count {:?}", fields[3])))?;
        let alpha = fields[4]
            .parse()
            .map_err(|_| parse_err(format!("bad alpha {:?}", fields[4])))?;
        let decay_param = fields[5]
            .parse()
            .map_err(|_| parse_err(format!("bad decay parameter {:?}", fields[5])))?;
        let links = match snapshot {
            None => None,
            Some(rest) => {
                let mut targets = Vec::new();
                for token in rest.split_whitespace() {
                    let index: usize = token
                        .parse()
                        .ok()
                        .filter(|&v| v >= 1)
                        .ok_or_else(|| parse_err(format!("bad link target {token:?}")))?;
                    targets.push(index - 1);
                }
                Some(
                    CustomerLinks::from_vec(targets)
                        .map_err(|e| parse_err(format!("bad link snapshot: {e}")))?,
                )
            }
        };
        Ok(Self {
            chain,
            sweep,
            log_joint,
            n_tables,
            alpha,
            decay_param,
            links,
        })
    }
}

/// Incremental trace writer; writes the header on creation.
pub struct TraceWriter {
    out: BufWriter<std::fs::File>,
    path: String,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self, TraceError> {
        let file = std::fs::File::create(path).map_err(|source| TraceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{TRACE_HEADER}").map_err(|source| TraceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self {
            out,
            path: path.display().to_string(),
        })
    }

    pub fn write(&mut self, record: &TraceRecord) -> Result<(), TraceError> {
        writeln!(self.out, "{}", record.to_line()).map_err(|source| TraceError::Io {
            path: self.path.clone(),
            source,
        })
    }

    pub fn finish(mut self) -> Result<(), TraceError> {
        self.out.flush().map_err(|source| TraceError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

/// Reads and validates a trace file: header, field syntax, and per-chain
/// sweep monotonicity.
pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, TraceError> {
    let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let display = path.display().to_string();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TRACE_HEADER => {}
        _ => return Err(TraceError::BadHeader { path: display }),
    }
    let mut records = Vec::new();
    let mut last_sweep: std::collections::HashMap<u64, u64> = std::collections::HashMap::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let record = TraceRecord::from_line(line, &display, lineno + 1)?;
        if let Some(&previous) = last_sweep.get(&record.chain) {
            if record.sweep <= previous {
                return Err(TraceError::NonMonotoneSweep {
                    path: display,
                    line: lineno + 1,
                    chain: record.chain,
                });
            }
        }
        last_sweep.insert(record.chain, record.sweep);
        records.push(record);
    }
    Ok(records)
}

/// Collects the stored link snapshots from trace records into a
/// [`PosteriorSamples`] bag.
pub fn posterior_samples_from_records(
    records: &[TraceRecord],
    n: usize,
) -> Result<PosteriorSamples, EvalError> {
    let samples: Vec<PosteriorSample> = records
        .iter()
        .filter_map(|r| {
            r.links.as_ref().map(|links| PosteriorSample {
                links: links.clone(),
                log_joint: r.log_joint,
                alpha: r.alpha,
                decay_param: r.decay_param,
            })
        })
        .collect();
    PosteriorSamples::new(n, samples)
}
