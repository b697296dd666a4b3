//! Per-evaluation run log, persisted as JSON Lines.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Phase, PointExternal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// One-based evaluation number.
    pub n: usize,
    pub phase: Phase,
    pub point_external: PointExternal,
    pub f: f64,
    pub best_f_so_far: f64,
    pub sigma2: Option<f64>,
    pub phi_n: Option<f64>,
    pub weight_w: Option<f64>,
    pub candidates_generated: Option<usize>,
    pub candidates_surviving: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn best_curve(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_f_so_far).collect()
    }

    pub fn final_best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_f_so_far)
    }

    /// Checks numbering and the running-minimum column.
    pub fn check_consistency(&self) -> Result<(), String> {
        let mut best = f64::INFINITY;
        for (i, r) in self.records.iter().enumerate() {
            if r.n != i + 1 {
                return Err(format!("record {i} has n = {}, expected {}", r.n, i + 1));
            }
            if !r.f.is_finite() {
                return Err(format!("record {} has non-finite f", r.n));
            }
            best = best.min(r.f);
            if r.best_f_so_far != best {
                return Err(format!(
                    "record {} has best_f_so_far {} but running minimum is {best}",
                    r.n, r.best_f_so_far
                ));
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&record_line(r));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_jsonl().as_bytes())?;
        w.flush()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { records })
    }

    pub fn read_jsonl(path: &Path) -> io::Result<Self> {
        let mut records = Vec::new();
        for line in BufReader::new(File::open(path)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                serde_json::from_str(&line)
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?,
            );
        }
        Ok(Self { records })
    }
}

pub(crate) fn record_line(r: &TraceRecord) -> String {
    serde_json::to_string(r).expect("trace records always serialize")
}

/// Streams records to a file as they are produced.
pub(crate) struct TraceSink {
    out: BufWriter<File>,
}

impl TraceSink {
    pub(crate) fn create(path: &Path) -> io::Result<Self> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub(crate) fn push(&mut self, r: &TraceRecord) -> io::Result<()> {
        writeln!(self.out, "{}", record_line(r))?;
        self.out.flush()
    }
}

/// Smallest one-based evaluation number whose best-so-far reaches `target`.
pub fn evaluations_to_target(trace: &Trace, target: f64) -> Option<usize> {
    trace
        .records
        .iter()
        .find(|r| r.best_f_so_far <= target)
        .map(|r| r.n)
}
