//! Mixed-integer black-box global optimization with a cubic RBF surrogate
//! and dynamic coordinate search (HORD), plus the evaluators, baselines and
//! study harness used to benchmark it.

pub mod domain;
pub mod rbf;
pub mod sampling;

pub use domain::{
    Domain, DomainError, EvaluationHistory, EvaluationRecord, Phase, PointExternal, PointInternal,
    VariableKind, VariableSpec,
};
pub use rbf::{fit, refit_with, FitInput, RbfError, RbfModel};
pub use sampling::{draw_normal, latin_hypercube, RngState};
pub mod dycors;
pub mod evaluators;
pub mod optimizer;
pub mod stats;
pub mod study;
pub mod trace;

pub use dycors::{CandidateStrategy, SearchState};
pub use evaluators::{builtin_catalog, EvalError, EvaluatorSpec, Objective};
pub use optimizer::{
    baseline_random, baseline_rbf_uniform, resume, run, run_with, RunConfig, RunError, RunResult,
    SearchMethod, Termination,
};
pub use stats::{rank_sum_test, StatsError};
pub use study::{
    report, run_study, Algorithm, Problem, StudyConfig, StudyError, StudyOutcome, StudySummary,
};
pub use trace::{evaluations_to_target, Trace, TraceRecord};
