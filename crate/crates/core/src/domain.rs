//! Search-space definition and the evaluation history.
//!
//! All search geometry (perturbation, distances, surrogate fitting) happens in
//! the unit hypercube. [`Domain::normalize`] and [`Domain::denormalize`] move
//! points between user units and that internal representation; integer
//! variables are rounded only on the way out.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum normalized distance between two evaluated points.
pub const DEFAULT_D_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("domain must contain at least one variable")]
    Empty,
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("variable `{name}`: {reason}")]
    InvalidVariable { name: String, reason: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("missing value for variable `{0}`")]
    MissingVariable(String),
    #[error("value {value} for `{name}` is outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("value {value} for integer variable `{name}` is not integral")]
    NotIntegral { name: String, value: f64 },
    #[error("point has {got} coordinates, domain has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default = "default_kind")]
    pub kind: VariableKind,
}

fn default_kind() -> VariableKind {
    VariableKind::Continuous
}

impl VariableSpec {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            kind: VariableKind::Continuous,
        }
    }

    pub fn integer(name: impl Into<String>, lower: i64, upper: i64) -> Self {
        Self {
            name: name.into(),
            lower: lower as f64,
            upper: upper as f64,
            kind: VariableKind::Integer,
        }
    }

    pub fn is_integer(&self) -> bool {
        self.kind == VariableKind::Integer
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    fn validate(&self) -> Result<(), DomainError> {
        let invalid = |reason: &str| DomainError::InvalidVariable {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.is_empty() {
            return Err(invalid("name must not be empty"));
        }
        if !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(invalid("bounds must be finite"));
        }
        if self.lower >= self.upper {
            return Err(invalid("lower bound must be below upper bound"));
        }
        if self.is_integer() {
            if self.lower.fract() != 0.0 || self.upper.fract() != 0.0 {
                return Err(invalid("integer bounds must be integral"));
            }
            if self.upper - self.lower < 1.0 {
                return Err(invalid("integer range must span at least one step"));
            }
        }
        Ok(())
    }

    /// Maps a unit-interval coordinate to user units, rounding integers
    /// half away from zero and clamping into bounds.
    pub fn to_external(&self, coord: f64) -> f64 {
        let value = self.lower + coord * self.width();
        match self.kind {
            VariableKind::Continuous => value.clamp(self.lower, self.upper),
            VariableKind::Integer => value.round().clamp(self.lower, self.upper),
        }
    }

    pub fn to_internal(&self, value: f64) -> f64 {
        (value - self.lower) / self.width()
    }

    /// Snaps an internal coordinate onto the feasible grid (identity for
    /// continuous variables).
    pub fn snap(&self, coord: f64) -> f64 {
        let coord = coord.clamp(0.0, 1.0);
        match self.kind {
            VariableKind::Continuous => coord,
            VariableKind::Integer => self.to_internal(self.to_external(coord)),
        }
    }
}

/// Ordered list of variables defining the search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<VariableSpec>", into = "Vec<VariableSpec>")]
pub struct Domain {
    variables: Vec<VariableSpec>,
}

impl TryFrom<Vec<VariableSpec>> for Domain {
    type Error = DomainError;

    fn try_from(variables: Vec<VariableSpec>) -> Result<Self, Self::Error> {
        Domain::new(variables)
    }
}

impl From<Domain> for Vec<VariableSpec> {
    fn from(d: Domain) -> Self {
        d.variables
    }
}

impl Domain {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self, DomainError> {
        if variables.is_empty() {
            return Err(DomainError::Empty);
        }
        let mut seen = HashSet::new();
        for v in &variables {
            v.validate()?;
            if !seen.insert(v.name.as_str()) {
                return Err(DomainError::DuplicateName(v.name.clone()));
            }
        }
        Ok(Self { variables })
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn has_integers(&self) -> bool {
        self.variables.iter().any(VariableSpec::is_integer)
    }

    pub fn normalize(&self, p: &PointExternal) -> Result<PointInternal, DomainError> {
        for name in p.values.keys() {
            if !self.variables.iter().any(|v| &v.name == name) {
                return Err(DomainError::UnknownVariable(name.clone()));
            }
        }
        let coords = self
            .variables
            .iter()
            .map(|v| {
                let value = *p
                    .values
                    .get(&v.name)
                    .ok_or_else(|| DomainError::MissingVariable(v.name.clone()))?;
                if !(value >= v.lower && value <= v.upper) {
                    return Err(DomainError::OutOfBounds {
                        name: v.name.clone(),
                        value,
                        lower: v.lower,
                        upper: v.upper,
                    });
                }
                if v.is_integer() && value.fract() != 0.0 {
                    return Err(DomainError::NotIntegral {
                        name: v.name.clone(),
                        value,
                    });
                }
                Ok(v.to_internal(value))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PointInternal(coords))
    }

    pub fn denormalize(&self, p: &PointInternal) -> PointExternal {
        debug_assert_eq!(p.dim(), self.dim());
        let values = self
            .variables
            .iter()
            .zip(p.coords())
            .map(|(v, &c)| (v.name.clone(), v.to_external(c)))
            .collect();
        PointExternal { values }
    }

    /// Values of `p` in domain order.
    pub fn ordered_values(&self, p: &PointExternal) -> Vec<f64> {
        self.variables
            .iter()
            .map(|v| p.values.get(&v.name).copied().unwrap_or(f64::NAN))
            .collect()
    }

    /// Rounds integer coordinates of an internal point onto their grid, so
    /// the point represents exactly what will be evaluated.
    pub fn snap(&self, p: &mut PointInternal) {
        for (v, c) in self.variables.iter().zip(p.0.iter_mut()) {
            *c = v.snap(*c);
        }
    }

    pub fn check_internal(&self, p: &PointInternal) -> Result<(), DomainError> {
        if p.dim() != self.dim() {
            return Err(DomainError::DimensionMismatch {
                expected: self.dim(),
                got: p.dim(),
            });
        }
        Ok(())
    }
}

/// A point in the unit hypercube, one coordinate per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointInternal(pub Vec<f64>);

impl PointInternal {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &PointInternal) -> f64 {
        distance(&self.0, &other.0)
    }
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A point in user units, keyed by variable name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointExternal {
    pub values: BTreeMap<String, f64>,
}

impl PointExternal {
    pub fn new(values: BTreeMap<String, f64>) -> Self {
        Self { values }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for PointExternal {
    fn from_iter<T: IntoIterator<Item = (S, f64)>>(iter: T) -> Self {
        Self {
            values: iter.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    InitialDesign,
    Isp,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    /// Zero-based position in the history.
    pub index: usize,
    pub point: PointInternal,
    pub point_external: PointExternal,
    pub value: f64,
    pub phase: Phase,
    pub wall_time: Option<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistoryError {
    #[error("point is within {d_tol} of evaluated point #{existing}")]
    DuplicatePoint { existing: usize, d_tol: f64 },
    #[error("objective value {0} is not finite")]
    NonFinite(f64),
}

/// Evaluated points plus the incumbent.
#[derive(Debug, Clone)]
pub struct EvaluationHistory {
    records: Vec<EvaluationRecord>,
    best_index: Option<usize>,
    d_tol: f64,
}

impl Default for EvaluationHistory {
    fn default() -> Self {
        Self::new(DEFAULT_D_TOL)
    }
}

impl EvaluationHistory {
    pub fn new(d_tol: f64) -> Self {
        Self {
            records: Vec::new(),
            best_index: None,
            d_tol,
        }
    }

    pub fn d_tol(&self) -> f64 {
        self.d_tol
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EvaluationRecord] {
        &self.records
    }

    pub fn best_index(&self) -> Option<usize> {
        self.best_index
    }

    pub fn best(&self) -> Option<&EvaluationRecord> {
        self.best_index.map(|i| &self.records[i])
    }

    pub fn points(&self) -> impl Iterator<Item = &PointInternal> {
        self.records.iter().map(|r| &r.point)
    }

    /// Index of the first stored point closer than `d_tol` to `p`.
    pub fn find_near(&self, p: &PointInternal) -> Option<usize> {
        self.records
            .iter()
            .position(|r| r.point.distance(p) < self.d_tol)
    }

    /// Appends a record. `record.index` is overwritten with its position.
    pub fn record(&mut self, mut record: EvaluationRecord) -> Result<usize, HistoryError> {
        if !record.value.is_finite() {
            return Err(HistoryError::NonFinite(record.value));
        }
        if let Some(existing) = self.find_near(&record.point) {
            return Err(HistoryError::DuplicatePoint {
                existing,
                d_tol: self.d_tol,
            });
        }
        let idx = self.records.len();
        record.index = idx;
        let improves = match self.best() {
            None => true,
            Some(best) => record.value < best.value,
        };
        self.records.push(record);
        if improves {
            self.best_index = Some(idx);
        }
        Ok(idx)
    }
}
