//! Objective functions: builtin test problems and external processes.

pub mod builtin;
pub mod external;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Domain, PointExternal};

pub use builtin::{builtin_catalog, BuiltinFunction};
pub use external::ExternalEvaluator;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("evaluator did not answer within {0} s")]
    Timeout(f64),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("objective value {0} is not finite")]
    NonFiniteValue(f64),
    #[error("evaluator process exited: {0}")]
    ChildCrashed(String),
    #[error("failed to start evaluator: {0}")]
    Spawn(String),
    #[error("evaluator reported an error: {0}")]
    Reported(String),
    #[error("unknown builtin function `{0}`")]
    UnknownBuiltin(String),
    #[error("{0}")]
    Invalid(String),
}

fn default_timeout() -> f64 {
    600.0
}

/// Which objective to optimize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EvaluatorSpec {
    Builtin {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    External {
        command: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_s: f64,
    },
}

impl EvaluatorSpec {
    pub fn builtin(name: impl Into<String>) -> Self {
        Self::Builtin {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        match self {
            Self::Builtin { name, .. } => builtin::lookup(name)
                .map(|_| ())
                .ok_or_else(|| EvalError::UnknownBuiltin(name.clone())),
            Self::External {
                command, timeout_s, ..
            } => {
                if command.is_empty() {
                    return Err(EvalError::Invalid("external command is empty".into()));
                }
                if !(*timeout_s > 0.0 && timeout_s.is_finite()) {
                    return Err(EvalError::Invalid(format!(
                        "timeout_s must be positive, got {timeout_s}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Builds a live evaluator. External processes are started lazily on the
    /// first evaluation.
    pub fn instantiate(&self, domain: &Domain) -> Result<Box<dyn Objective>, EvalError> {
        self.validate()?;
        Ok(match self {
            Self::Builtin { name, .. } => {
                let func = builtin::lookup(name).expect("validated");
                if let Some(d) = func.fixed_dim {
                    if d != domain.dim() {
                        return Err(EvalError::Invalid(format!(
                            "builtin `{name}` needs {d} variables, domain has {}",
                            domain.dim()
                        )));
                    }
                }
                Box::new(BuiltinEvaluator {
                    func,
                    domain: domain.clone(),
                })
            }
            Self::External {
                command,
                args,
                timeout_s,
            } => Box::new(ExternalEvaluator::new(
                command.clone(),
                args.clone(),
                *timeout_s,
                domain.clone(),
            )),
        })
    }
}

/// A black-box objective to minimize.
pub trait Objective {
    fn evaluate(&mut self, point: &PointExternal) -> Result<f64, EvalError>;
}

impl<F> Objective for F
where
    F: FnMut(&PointExternal) -> Result<f64, EvalError>,
{
    fn evaluate(&mut self, point: &PointExternal) -> Result<f64, EvalError> {
        self(point)
    }
}

pub struct BuiltinEvaluator {
    func: &'static BuiltinFunction,
    domain: Domain,
}

impl Objective for BuiltinEvaluator {
    fn evaluate(&mut self, point: &PointExternal) -> Result<f64, EvalError> {
        let x = self.domain.ordered_values(point);
        if x.iter().any(|v| v.is_nan()) {
            return Err(EvalError::Invalid("point is missing variables".into()));
        }
        let f = self.func.evaluate(&x);
        if f.is_finite() {
            Ok(f)
        } else {
            Err(EvalError::NonFiniteValue(f))
        }
    }
}

/// One-shot evaluation of `p` under `spec`.
pub fn evaluate(
    spec: &EvaluatorSpec,
    domain: &Domain,
    p: &PointExternal,
) -> Result<f64, EvalError> {
    spec.instantiate(domain)?.evaluate(p)
}
