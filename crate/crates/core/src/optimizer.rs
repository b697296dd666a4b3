//! The optimization loop.
//!
//! A run evaluates an optional user-supplied starting point, then a Latin
//! hypercube design of `n0` points, then repeatedly fits the RBF surrogate,
//! draws candidates, scores them and evaluates the best one until the
//! evaluation budget (which counts every evaluation) is spent.

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    Domain, DomainError, EvaluationHistory, EvaluationRecord, Phase, PointExternal, PointInternal,
    DEFAULT_D_TOL,
};
use crate::dycors::{
    generate_candidates, score_candidates, select_next, CandidateStrategy, SearchError,
    SearchState, DEFAULT_SIGMA2, SIGMA2_FLOOR,
};
use crate::evaluators::{EvalError, EvaluatorSpec, Objective};
use crate::rbf::{fit, FitInput};
use crate::sampling::{latin_hypercube, RngState};
use crate::trace::{Trace, TraceRecord, TraceSink};

/// Attempts to draw a fresh, non-duplicate point before giving up.
const MAX_DRAW_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("trace does not match the configuration: {0}")]
    CorruptTrace(String),
    #[error("trace output failed: {0}")]
    Io(#[from] std::io::Error),
}

impl From<DomainError> for RunError {
    fn from(e: DomainError) -> Self {
        Self::ConfigInvalid(e.to_string())
    }
}

/// How adaptive points are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMethod {
    /// Surrogate plus coordinate-perturbation candidates.
    #[default]
    Hord,
    /// Surrogate plus uniformly distributed candidates.
    RbfUniform,
    /// Uniform random sampling, no surrogate.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: Domain,
    pub evaluator: EvaluatorSpec,
    #[serde(default)]
    pub method: SearchMethod,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    /// Initial design size; `2(D + 1)` when absent.
    #[serde(default)]
    pub n0: Option<usize>,
    /// Candidates per iteration; `100 D` when absent.
    #[serde(default)]
    pub candidates: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub isp: Option<PointExternal>,
    #[serde(default = "default_d_tol")]
    pub d_tol: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2_init: f64,
    /// Record wall-clock evaluation time in the trace. Off by default so
    /// traces of deterministic objectives are byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
    /// Stream the trace to this file while running.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<PathBuf>,
}

fn default_max_evals() -> usize {
    200
}

fn default_d_tol() -> f64 {
    DEFAULT_D_TOL
}

fn default_sigma2() -> f64 {
    DEFAULT_SIGMA2
}

impl RunConfig {
    pub fn new(domain: Domain, evaluator: EvaluatorSpec) -> Self {
        Self {
            domain,
            evaluator,
            method: SearchMethod::Hord,
            max_evals: default_max_evals(),
            n0: None,
            candidates: None,
            seed: 0,
            isp: None,
            d_tol: DEFAULT_D_TOL,
            sigma2_init: DEFAULT_SIGMA2,
            record_timing: false,
            trace_path: None,
        }
    }

    pub fn n0(&self) -> usize {
        self.n0.unwrap_or(2 * (self.domain.dim() + 1))
    }

    pub fn candidates(&self) -> usize {
        self.candidates.unwrap_or(100 * self.domain.dim())
    }

    /// Evaluations spent before the adaptive phase.
    pub fn initial_evals(&self) -> usize {
        self.n0() + usize::from(self.isp.is_some())
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let dim = self.domain.dim();
        let bad = |msg: String| Err(RunError::ConfigInvalid(msg));
        self.evaluator
            .validate()
            .map_err(|e| RunError::ConfigInvalid(e.to_string()))?;
        if !(self.d_tol > 0.0 && self.d_tol < 1.0) {
            return bad(format!("d_tol must be in (0, 1), got {}", self.d_tol));
        }
        if let Some(isp) = &self.isp {
            self.domain.normalize(isp)?;
        }
        match self.method {
            SearchMethod::Random => {
                if self.max_evals == 0 {
                    return bad("max_evals must be positive".into());
                }
            }
            SearchMethod::Hord | SearchMethod::RbfUniform => {
                let n0 = self.n0();
                if n0 < dim + 1 {
                    return bad(format!("n0 = {n0} is below D + 1 = {}", dim + 1));
                }
                if self.candidates() == 0 {
                    return bad("candidate count must be positive".into());
                }
                if !(self.sigma2_init >= SIGMA2_FLOOR && self.sigma2_init.is_finite()) {
                    return bad(format!(
                        "sigma2_init must be at least {SIGMA2_FLOOR}, got {}",
                        self.sigma2_init
                    ));
                }
                let init = self.initial_evals();
                if self.max_evals < init + 2 {
                    return bad(format!(
                        "max_evals = {} leaves fewer than 2 adaptive steps after {init} initial evaluations",
                        self.max_evals
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    BudgetExhausted,
    EvaluatorFailure,
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub x_best: Option<PointExternal>,
    pub f_best: Option<f64>,
    pub trace: Trace,
    pub termination: Termination,
    /// Why the run stopped early, if it did.
    pub message: Option<String>,
    pub config: RunConfig,
}

/// Runs the configured method against the configured evaluator.
pub fn run(config: &RunConfig) -> Result<RunResult, RunError> {
    config.validate()?;
    let mut objective = LazyObjective::new(config);
    Engine::new(config, &mut objective, None)?.execute()
}

/// Runs against a caller-supplied objective instead of `config.evaluator`.
pub fn run_with(config: &RunConfig, objective: &mut dyn Objective) -> Result<RunResult, RunError> {
    config.validate()?;
    Engine::new(config, objective, None)?.execute()
}

/// Continues a finished or interrupted run with `extra_budget` more
/// evaluations.
///
/// The run is replayed from its seed with the enlarged budget; evaluations
/// already in the trace are served from the trace instead of the objective.
/// The result is identical to an uninterrupted run with the larger budget.
pub fn resume(result: &RunResult, extra_budget: usize) -> Result<RunResult, RunError> {
    let mut config = result.config.clone();
    config.max_evals += extra_budget;
    resume_from_trace(&config, &result.trace)
}

/// Replays `trace` under `config` (whose budget may exceed the trace length)
/// and continues with the live objective.
pub fn resume_from_trace(config: &RunConfig, trace: &Trace) -> Result<RunResult, RunError> {
    config.validate()?;
    let mut objective = LazyObjective::new(config);
    resume_with(config, trace, &mut objective)
}

pub fn resume_with(
    config: &RunConfig,
    trace: &Trace,
    objective: &mut dyn Objective,
) -> Result<RunResult, RunError> {
    config.validate()?;
    trace.check_consistency().map_err(RunError::CorruptTrace)?;
    Engine::new(config, objective, Some(trace))?.execute()
}

/// Uniform random search with the same trace format.
pub fn baseline_random(config: &RunConfig) -> Result<RunResult, RunError> {
    let mut config = config.clone();
    config.method = SearchMethod::Random;
    run(&config)
}

/// The surrogate loop with uniformly distributed candidates.
pub fn baseline_rbf_uniform(config: &RunConfig) -> Result<RunResult, RunError> {
    let mut config = config.clone();
    config.method = SearchMethod::RbfUniform;
    run(&config)
}

/// Instantiates the configured evaluator on first use, so fully replayed
/// runs never start an external process.
struct LazyObjective<'a> {
    config: &'a RunConfig,
    inner: Option<Box<dyn Objective>>,
}

impl<'a> LazyObjective<'a> {
    fn new(config: &'a RunConfig) -> Self {
        Self {
            config,
            inner: None,
        }
    }
}

impl Objective for LazyObjective<'_> {
    fn evaluate(&mut self, point: &PointExternal) -> Result<f64, EvalError> {
        if self.inner.is_none() {
            self.inner = Some(self.config.evaluator.instantiate(&self.config.domain)?);
        }
        self.inner.as_mut().expect("just set").evaluate(point)
    }
}

fn point_key(domain: &Domain, p: &PointExternal) -> Vec<u64> {
    domain
        .ordered_values(p)
        .into_iter()
        .map(f64::to_bits)
        .collect()
}

struct Cached {
    f: f64,
    wall_time: Option<f64>,
}

/// Extra fields logged alongside an evaluation.
#[derive(Default)]
struct StepInfo {
    sigma2: Option<f64>,
    phi_n: Option<f64>,
    weight_w: Option<f64>,
    candidates_generated: Option<usize>,
    candidates_surviving: Option<usize>,
}

enum Outcome {
    Evaluated { improved: bool },
    Failed(String),
}

struct Engine<'a> {
    config: &'a RunConfig,
    objective: &'a mut dyn Objective,
    history: EvaluationHistory,
    trace: Trace,
    sink: Option<TraceSink>,
    rng: RngState,
    cache: HashMap<Vec<u64>, Cached>,
    /// Initial-design points the replayed trace must reproduce, in order.
    expected_prefix: Vec<PointExternal>,
    failure: Option<String>,
}

impl<'a> Engine<'a> {
    fn new(
        config: &'a RunConfig,
        objective: &'a mut dyn Objective,
        replay: Option<&Trace>,
    ) -> Result<Self, RunError> {
        let sink = config
            .trace_path
            .as_deref()
            .map(TraceSink::create)
            .transpose()?;
        let mut cache = HashMap::new();
        let mut expected_prefix = Vec::new();
        if let Some(trace) = replay {
            for r in &trace.records {
                if r.phase != Phase::Adaptive && r.n == expected_prefix.len() + 1 {
                    expected_prefix.push(r.point_external.clone());
                }
                cache.insert(
                    point_key(&config.domain, &r.point_external),
                    Cached {
                        f: r.f,
                        wall_time: r.wall_time,
                    },
                );
            }
        }
        Ok(Self {
            config,
            objective,
            history: EvaluationHistory::new(config.d_tol),
            trace: Trace::default(),
            sink,
            rng: RngState::new(config.seed),
            cache,
            expected_prefix,
            failure: None,
        })
    }

    fn finish(self, termination: Termination, message: Option<String>) -> RunResult {
        let best = self.history.best();
        RunResult {
            x_best: best.map(|r| r.point_external.clone()),
            f_best: best.map(|r| r.value),
            trace: self.trace,
            termination,
            message,
            config: self.config.clone(),
        }
    }

    fn execute(self) -> Result<RunResult, RunError> {
        match self.config.method {
            SearchMethod::Random => self.execute_random(),
            SearchMethod::Hord => self.execute_surrogate(CandidateStrategy::Dycors),
            SearchMethod::RbfUniform => self.execute_surrogate(CandidateStrategy::Uniform),
        }
    }

    fn check_replay(&self, ext: &PointExternal) -> Result<(), RunError> {
        let i = self.history.len();
        if let Some(expected) = self.expected_prefix.get(i) {
            if expected != ext {
                return Err(RunError::CorruptTrace(format!(
                    "initial design point #{} differs from the replayed run",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Evaluates (or replays) one point, retrying a failed evaluation once.
    fn evaluate(
        &mut self,
        point: PointInternal,
        phase: Phase,
        info: StepInfo,
    ) -> Result<Outcome, RunError> {
        let ext = self.config.domain.denormalize(&point);
        if phase != Phase::Adaptive {
            self.check_replay(&ext)?;
        }
        let key = point_key(&self.config.domain, &ext);
        let (value, wall_time) = match self.cache.remove(&key) {
            Some(c) => (c.f, c.wall_time),
            None => {
                let start = Instant::now();
                let mut attempt = || {
                    self.objective.evaluate(&ext).and_then(|f| {
                        if f.is_finite() {
                            Ok(f)
                        } else {
                            Err(EvalError::NonFiniteValue(f))
                        }
                    })
                };
                let result = attempt().or_else(|_| attempt());
                let elapsed = start.elapsed().as_secs_f64();
                match result {
                    Ok(f) => (f, self.config.record_timing.then_some(elapsed)),
                    Err(e) => return Ok(Outcome::Failed(e.to_string())),
                }
            }
        };
        let improved = self.history.best().is_none_or(|b| value < b.value);
        self.history
            .record(EvaluationRecord {
                index: 0,
                point,
                point_external: ext.clone(),
                value,
                phase,
                wall_time,
            })
            .map_err(|e| RunError::CorruptTrace(format!("history rejected a point: {e}")))?;
        let record = TraceRecord {
            n: self.history.len(),
            phase,
            point_external: ext,
            f: value,
            best_f_so_far: self.history.best().expect("non-empty").value,
            sigma2: info.sigma2,
            phi_n: info.phi_n,
            weight_w: info.weight_w,
            candidates_generated: info.candidates_generated,
            candidates_surviving: info.candidates_surviving,
            wall_time,
        };
        if let Some(sink) = &mut self.sink {
            sink.push(&record)?;
        }
        self.trace.records.push(record);
        Ok(Outcome::Evaluated { improved })
    }

    /// Uniform draw with integer coordinates sampled evenly on their grid.
    fn uniform_feasible(&mut self) -> PointInternal {
        let coords = self
            .config
            .domain
            .variables()
            .iter()
            .map(|v| {
                if v.is_integer() {
                    let steps = (v.upper - v.lower) as usize;
                    v.to_internal(v.lower + self.rng.index(steps + 1) as f64)
                } else {
                    self.rng.uniform()
                }
            })
            .collect();
        PointInternal(coords)
    }

    fn fresh_uniform(&mut self) -> Option<PointInternal> {
        for _ in 0..MAX_DRAW_ATTEMPTS {
            let p = self.uniform_feasible();
            if self.history.find_near(&p).is_none() {
                return Some(p);
            }
        }
        None
    }

    fn execute_random(mut self) -> Result<RunResult, RunError> {
        while self.history.len() < self.config.max_evals {
            let Some(p) = self.fresh_uniform() else {
                return Ok(self.finish(
                    Termination::Stalled,
                    Some("no unevaluated point found".into()),
                ));
            };
            if let Outcome::Failed(msg) = self.evaluate(p, Phase::Adaptive, StepInfo::default())? {
                return Ok(self.finish(Termination::EvaluatorFailure, Some(msg)));
            }
        }
        Ok(self.finish(Termination::BudgetExhausted, None))
    }

    fn initial_design(&mut self) -> Result<Option<Termination>, RunError> {
        let domain = &self.config.domain;
        let mut points = Vec::new();
        let mut phases = Vec::new();
        if let Some(isp) = &self.config.isp {
            points.push(domain.normalize(isp)?);
            phases.push(Phase::Isp);
        }
        for mut p in latin_hypercube(self.config.n0(), domain.dim(), &mut self.rng) {
            domain.snap(&mut p);
            points.push(p);
            phases.push(Phase::InitialDesign);
        }
        for (p, phase) in points.into_iter().zip(phases) {
            if self.history.find_near(&p).is_some() {
                continue;
            }
            if let Outcome::Failed(msg) = self.evaluate(p, phase, StepInfo::default())? {
                self.failure = Some(msg);
                return Ok(Some(Termination::EvaluatorFailure));
            }
        }
        // integer collisions can thin the design below what the tail needs
        while self.history.len() < self.config.domain.dim() + 1 {
            let Some(p) = self.fresh_uniform() else {
                self.failure = Some("initial design has too few distinct points".into());
                return Ok(Some(Termination::Stalled));
            };
            if let Outcome::Failed(msg) =
                self.evaluate(p, Phase::InitialDesign, StepInfo::default())?
            {
                self.failure = Some(msg);
                return Ok(Some(Termination::EvaluatorFailure));
            }
        }
        Ok(None)
    }

    fn execute_surrogate(mut self, strategy: CandidateStrategy) -> Result<RunResult, RunError> {
        if let Some(t) = self.initial_design()? {
            let msg = self.failure.take();
            return Ok(self.finish(t, msg));
        }
        let dim = self.config.domain.dim();
        let mut state = SearchState::new(dim, self.history.len(), self.config.max_evals)
            .with_sigma2(self.config.sigma2_init)
            .with_candidates(self.config.candidates());

        while self.history.len() < self.config.max_evals {
            let input = FitInput::new(
                self.history.points().map(|p| p.0.clone()).collect(),
                self.history.records().iter().map(|r| r.value).collect(),
            )
            .with_d_tol(self.config.d_tol);
            let model = match fit(input) {
                Ok(m) => m,
                Err(e) => {
                    return Ok(self.finish(
                        Termination::Stalled,
                        Some(format!("surrogate fit failed: {e}")),
                    ))
                }
            };
            let x_best = self.history.best().expect("non-empty").point.clone();
            state.n = self.history.len();
            let phi = state
                .perturbation_probability()
                .expect("loop guard keeps n below the budget");
            let w = state.advance_weight();

            let evaluated: Vec<&PointInternal> = self.history.points().collect();
            let generate = |sigma2: f64, rng: &mut RngState| {
                generate_candidates(
                    strategy,
                    &self.config.domain,
                    &x_best,
                    &evaluated,
                    self.config.d_tol,
                    state.m,
                    phi,
                    sigma2,
                    rng,
                )
            };
            let batch = match generate(state.sigma2, &mut self.rng) {
                Err(SearchError::NoCandidates) => generate(2.0 * state.sigma2, &mut self.rng),
                other => other,
            };
            let batch = match batch {
                Ok(b) => b,
                Err(e) => {
                    return Ok(self.finish(
                        Termination::Stalled,
                        Some(format!("candidate search failed: {e}")),
                    ))
                }
            };
            let generated = batch.generated;
            let surviving = batch.points.len();
            let values =
                model.predict_batch(&batch.points.iter().map(|p| p.coords()).collect::<Vec<_>>());
            let scored = score_candidates(batch.points, &values, &evaluated, w)
                .expect("non-empty, aligned and w from the cycle");
            let pick = select_next(&scored).expect("non-empty");
            let next = scored
                .into_iter()
                .nth(pick)
                .expect("index from select_next")
                .point;

            let info = StepInfo {
                sigma2: (strategy == CandidateStrategy::Dycors).then_some(state.sigma2),
                phi_n: (strategy == CandidateStrategy::Dycors).then_some(phi),
                weight_w: Some(w),
                candidates_generated: Some(generated),
                candidates_surviving: Some(surviving),
            };
            match self.evaluate(next, Phase::Adaptive, info)? {
                Outcome::Evaluated { improved } => state.adjust_variance(improved),
                Outcome::Failed(msg) => {
                    return Ok(self.finish(Termination::EvaluatorFailure, Some(msg)))
                }
            }
        }
        Ok(self.finish(Termination::BudgetExhausted, None))
    }
}
