//! Multi-trial studies: run several algorithms over seeded trials, persist
//! every trace, and summarize them.
//!
//! A study directory holds
//!
//! ```text
//! study.json                  the resolved configuration
//! {algorithm}/trial_{k}.jsonl one trace per run
//! summary.json                StudySummary
//! curves.csv                  algorithm,n,mean_best_f,std_best_f
//! ```
//!
//! The summary depends only on `study.json` and the traces, so [`report`]
//! can rebuild it at any time.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Domain, PointExternal, DEFAULT_D_TOL};
use crate::dycors::DEFAULT_SIGMA2;
use crate::evaluators::{builtin, EvaluatorSpec};
use crate::optimizer::{self, RunConfig, RunError, SearchMethod, Termination};
use crate::stats;
use crate::trace::{evaluations_to_target, Trace};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid study configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{algorithm} trial {trial}: {source}")]
    Run {
        algorithm: Algorithm,
        trial: usize,
        source: RunError,
    },
    #[error("{path}: {message}")]
    Trace { path: PathBuf, message: String },
}

impl StudyError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Hord,
    HordIsp,
    Random,
    RbfUniform,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Self::Hord, Self::HordIsp, Self::Random, Self::RbfUniform];

    pub fn name(self) -> &'static str {
        match self {
            Self::Hord => "hord",
            Self::HordIsp => "hord-isp",
            Self::Random => "random",
            Self::RbfUniform => "rbf-uniform",
        }
    }

    fn method(self) -> SearchMethod {
        match self {
            Self::Hord | Self::HordIsp => SearchMethod::Hord,
            Self::Random => SearchMethod::Random,
            Self::RbfUniform => SearchMethod::RbfUniform,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                format!("unknown algorithm `{s}` (expected hord, hord-isp, random or rbf-uniform)")
            })
    }
}

/// Search space and objective. For builtin objectives the variable list may
/// be omitted; the function's own box is used, sized by the `dim` and
/// `integers` entries of its `params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variables: Option<Domain>,
    pub evaluator: EvaluatorSpec,
}

impl Problem {
    pub fn domain(&self) -> Result<Domain, StudyError> {
        if let Some(d) = &self.variables {
            return Ok(d.clone());
        }
        match &self.evaluator {
            EvaluatorSpec::Builtin { name, params } => {
                let func = builtin::lookup(name)
                    .ok_or_else(|| StudyError::Config(format!("unknown builtin `{name}`")))?;
                let count = |key: &str, default: usize| -> Result<usize, StudyError> {
                    match params.get(key) {
                        None => Ok(default),
                        Some(&v) if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
                        Some(v) => Err(StudyError::Config(format!(
                            "params.{key} must be a non-negative integer, got {v}"
                        ))),
                    }
                };
                let dim = count("dim", func.default_dim)?;
                if dim == 0 {
                    return Err(StudyError::Config("params.dim must be positive".into()));
                }
                Ok(func.domain(dim, count("integers", 0)?))
            }
            EvaluatorSpec::External { .. } => Err(StudyError::Config(
                "an external evaluator needs an explicit variable list".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub problem: Problem,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    /// Trial `k` runs with seed `seed + k`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isp: Option<PointExternal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<usize>,
    #[serde(default = "default_d_tol")]
    pub d_tol: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2_init: f64,
    /// Objective value used for the evaluations-to-target table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default)]
    pub record_timing: bool,
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Hord]
}

fn default_trials() -> usize {
    5
}

fn default_max_evals() -> usize {
    200
}

fn default_out() -> PathBuf {
    PathBuf::from("study")
}

fn default_d_tol() -> f64 {
    DEFAULT_D_TOL
}

fn default_sigma2() -> f64 {
    DEFAULT_SIGMA2
}

impl StudyConfig {
    pub fn new(problem: Problem) -> Self {
        Self {
            problem,
            algorithms: default_algorithms(),
            trials: default_trials(),
            max_evals: default_max_evals(),
            seed: 0,
            out: default_out(),
            isp: None,
            n0: None,
            candidates: None,
            d_tol: DEFAULT_D_TOL,
            sigma2_init: DEFAULT_SIGMA2,
            target: None,
            record_timing: false,
        }
    }

    /// Parses TOML, or JSON when the file ends in `.json`.
    pub fn from_path(path: &Path) -> Result<Self, StudyError> {
        let text = fs::read_to_string(path).map_err(|e| StudyError::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| StudyError::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text)
                .map_err(|e| StudyError::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn trace_path(&self, algorithm: Algorithm, trial: usize) -> PathBuf {
        trace_path(&self.out, algorithm, trial)
    }

    /// Configuration of one run. Traces are streamed to the study directory.
    pub fn run_config(&self, algorithm: Algorithm, trial: usize) -> Result<RunConfig, StudyError> {
        let mut rc = RunConfig::new(self.problem.domain()?, self.problem.evaluator.clone());
        rc.method = algorithm.method();
        rc.max_evals = self.max_evals;
        rc.n0 = self.n0;
        rc.candidates = self.candidates;
        rc.seed = self.seed.wrapping_add(trial as u64);
        rc.isp = (algorithm == Algorithm::HordIsp)
            .then(|| self.isp.clone())
            .flatten();
        rc.d_tol = self.d_tol;
        rc.sigma2_init = self.sigma2_init;
        rc.record_timing = self.record_timing;
        rc.trace_path = Some(self.trace_path(algorithm, trial));
        Ok(rc)
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        if self.trials == 0 {
            return Err(StudyError::Config("trials must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(StudyError::Config("no algorithms selected".into()));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].contains(a) {
                return Err(StudyError::Config(format!("algorithm `{a}` listed twice")));
            }
        }
        if self.algorithms.contains(&Algorithm::HordIsp) && self.isp.is_none() {
            return Err(StudyError::Config(
                "hord-isp requires an `isp` point".into(),
            ));
        }
        if let Some(t) = self.target {
            if !t.is_finite() {
                return Err(StudyError::Config("target must be finite".into()));
            }
        }
        if let Some(isp) = &self.isp {
            self.problem
                .domain()?
                .normalize(isp)
                .map_err(|e| StudyError::Config(format!("isp: {e}")))?;
        }
        for &a in &self.algorithms {
            self.run_config(a, 0)?
                .validate()
                .map_err(|e| StudyError::Config(format!("{a}: {e}")))?;
        }
        Ok(())
    }
}

fn trace_path(dir: &Path, algorithm: Algorithm, trial: usize) -> PathBuf {
    dir.join(algorithm.name())
        .join(format!("trial_{trial}.jsonl"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    /// Trials contributing to the statistics (those with at least one
    /// evaluation).
    pub trials: usize,
    /// Best value found by each trial.
    pub final_best: Vec<f64>,
    pub mean_best_f: f64,
    pub std_best_f: f64,
    pub median_best_f: f64,
    /// Pointwise mean and standard deviation of the best-so-far curves,
    /// one entry per evaluation. Runs that stopped early hold their last
    /// value.
    pub mean_curve: Vec<f64>,
    pub std_curve: Vec<f64>,
    /// Per-trial evaluations needed to reach the study target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluations_to_target: Option<Vec<Option<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: Algorithm,
    pub b: Algorithm,
    /// Two-sided rank-sum p-value of the final best values; absent when a
    /// side has fewer than two trials.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub max_evals: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub algorithms: Vec<AlgorithmSummary>,
    pub comparisons: Vec<Comparison>,
}

impl StudySummary {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|s| s.algorithm == algorithm)
    }

    pub fn p_value(&self, a: Algorithm, b: Algorithm) -> Option<f64> {
        self.comparisons
            .iter()
            .find(|c| (c.a, c.b) == (a, b) || (c.a, c.b) == (b, a))
            .and_then(|c| c.p_value)
    }

    /// Rows of `curves.csv`.
    pub fn write_curves_csv(&self, path: &Path) -> Result<(), StudyError> {
        #[derive(Serialize)]
        struct Row {
            algorithm: Algorithm,
            n: usize,
            mean_best_f: f64,
            std_best_f: f64,
        }
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for s in &self.algorithms {
            for (i, (&mean, &std)) in s.mean_curve.iter().zip(&s.std_curve).enumerate() {
                w.serialize(Row {
                    algorithm: s.algorithm,
                    n: i + 1,
                    mean_best_f: mean,
                    std_best_f: std,
                })
                .map_err(|e| csv_error(path, e))?;
            }
        }
        w.flush().map_err(|e| StudyError::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> StudyError {
    StudyError::io(path, std::io::Error::other(e))
}

/// Summarizes traces grouped by algorithm, in the order given.
pub fn summarize(
    max_evals: usize,
    target: Option<f64>,
    traces: &[(Algorithm, Vec<Trace>)],
) -> StudySummary {
    let algorithms: Vec<AlgorithmSummary> = traces
        .iter()
        .map(|(algorithm, runs)| {
            let runs: Vec<&Trace> = runs.iter().filter(|t| !t.is_empty()).collect();
            let final_best: Vec<f64> = runs.iter().filter_map(|t| t.final_best()).collect();
            let curves: Vec<Vec<f64>> = runs
                .iter()
                .map(|t| {
                    let mut c = t.best_curve();
                    let last = *c.last().expect("non-empty");
                    c.resize(c.len().max(max_evals), last);
                    c
                })
                .collect();
            let len = curves.iter().map(Vec::len).max().unwrap_or(0);
            let column = |i: usize| curves.iter().map(|c| c[i]).collect::<Vec<_>>();
            let (mean_curve, std_curve) = (0..len)
                .map(|i| {
                    let col = column(i);
                    (stats::mean(&col), stats::std_dev(&col))
                })
                .unzip();
            let nonempty = !final_best.is_empty();
            AlgorithmSummary {
                algorithm: *algorithm,
                trials: runs.len(),
                mean_best_f: if nonempty {
                    stats::mean(&final_best)
                } else {
                    0.0
                },
                std_best_f: stats::std_dev(&final_best),
                median_best_f: if nonempty {
                    stats::median(&final_best)
                } else {
                    0.0
                },
                final_best,
                mean_curve,
                std_curve,
                evaluations_to_target: target
                    .map(|t| runs.iter().map(|r| evaluations_to_target(r, t)).collect()),
            }
        })
        .collect();
    let mut comparisons = Vec::new();
    for (i, a) in algorithms.iter().enumerate() {
        for b in &algorithms[i + 1..] {
            comparisons.push(Comparison {
                a: a.algorithm,
                b: b.algorithm,
                p_value: stats::rank_sum_test(&a.final_best, &b.final_best).ok(),
            });
        }
    }
    StudySummary {
        max_evals,
        target,
        algorithms,
        comparisons,
    }
}

/// A run that ended because its evaluator failed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub algorithm: Algorithm,
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub summary: StudySummary,
    pub failures: Vec<RunFailure>,
}

/// Runs every algorithm for every trial (in parallel), then writes
/// `study.json`, `summary.json` and `curves.csv` under `cfg.out`.
///
/// A run whose evaluator fails keeps its partial trace and is reported in
/// [`StudyOutcome::failures`]; the rest of the study still runs.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutcome, StudyError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out).map_err(|e| StudyError::io(&cfg.out, e))?;
    let study_file = cfg.out.join("study.json");
    let json = serde_json::to_string_pretty(cfg).expect("config serializes");
    fs::write(&study_file, json).map_err(|e| StudyError::io(&study_file, e))?;

    let jobs: Vec<(Algorithm, usize)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| (0..cfg.trials).map(move |k| (a, k)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(algorithm, trial)| {
            let rc = cfg.run_config(algorithm, trial)?;
            optimizer::run(&rc).map_err(|source| StudyError::Run {
                algorithm,
                trial,
                source,
            })
        })
        .collect();

    let mut grouped: Vec<(Algorithm, Vec<Trace>)> =
        cfg.algorithms.iter().map(|&a| (a, Vec::new())).collect();
    let mut failures = Vec::new();
    for (&(algorithm, trial), result) in jobs.iter().zip(results) {
        let result = result?;
        if result.termination == Termination::EvaluatorFailure {
            failures.push(RunFailure {
                algorithm,
                trial,
                message: result.message.unwrap_or_default(),
            });
        }
        let slot = grouped
            .iter_mut()
            .find(|(a, _)| *a == algorithm)
            .expect("grouped");
        slot.1.push(result.trace);
    }
    let summary = summarize(cfg.max_evals, cfg.target, &grouped);
    write_summary(&cfg.out, &summary)?;
    Ok(StudyOutcome { summary, failures })
}

fn write_summary(dir: &Path, summary: &StudySummary) -> Result<(), StudyError> {
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    fs::write(&path, json).map_err(|e| StudyError::io(&path, e))?;
    summary.write_curves_csv(&dir.join("curves.csv"))
}

/// Traces grouped by algorithm, one per trial.
pub type TraceGroups = Vec<(Algorithm, Vec<Trace>)>;

/// Reads the traces of a finished study.
pub fn load_traces(dir: &Path) -> Result<(StudyConfig, TraceGroups), StudyError> {
    let cfg = StudyConfig::from_path(&dir.join("study.json"))?;
    let mut grouped = Vec::new();
    for &a in &cfg.algorithms {
        let mut runs = Vec::new();
        for k in 0..cfg.trials {
            let path = trace_path(dir, a, k);
            let trace = Trace::read_jsonl(&path).map_err(|e| StudyError::io(&path, e))?;
            trace
                .check_consistency()
                .map_err(|message| StudyError::Trace {
                    path: path.clone(),
                    message,
                })?;
            runs.push(trace);
        }
        grouped.push((a, runs));
    }
    Ok((cfg, grouped))
}

/// Rebuilds `summary.json` and `curves.csv` of a study directory from its
/// traces.
pub fn report(dir: &Path) -> Result<StudySummary, StudyError> {
    let (cfg, grouped) = load_traces(dir)?;
    let summary = summarize(cfg.max_evals, cfg.target, &grouped);
    write_summary(dir, &summary)?;
    Ok(summary)
}
