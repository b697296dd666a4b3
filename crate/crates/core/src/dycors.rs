//! Dynamic coordinate search: candidate generation around the incumbent,
//! surrogate/distance scoring and step-size adaptation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{distance, Domain, PointInternal};
use crate::sampling::{uniform_point, RngState};

/// Weights applied to the surrogate criterion, cycled once per adaptive step.
pub const WEIGHT_CYCLE: [f64; 4] = [0.3, 0.5, 0.8, 0.95];
pub const DEFAULT_SIGMA2: f64 = 0.2;
pub const SIGMA2_FLOOR: f64 = 0.005;
/// Consecutive improvements that trigger a doubling of the variance.
pub const SUCCESS_TOLERANCE: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("evaluation budget exhausted (n = {n}, max = {max})")]
    BudgetExhausted { n: usize, max: usize },
    #[error("schedule needs n >= n0 ({n} < {n0})")]
    BeforeSchedule { n: usize, n0: usize },
    #[error("every generated candidate was discarded")]
    NoCandidates,
    #[error("candidate set is empty")]
    EmptyCandidateSet,
    #[error("{candidates} candidates but {values} surrogate values")]
    LengthMismatch { candidates: usize, values: usize },
    #[error("weight {0} outside [0, 1]")]
    InvalidWeight(f64),
    #[error("variance must be non-negative, got {0}")]
    NegativeVariance(f64),
}

pub fn default_phi0(dim: usize) -> f64 {
    (20.0 / dim as f64).min(1.0)
}

pub fn default_t_fail(dim: usize) -> usize {
    dim.max(5)
}

pub fn default_candidates(dim: usize) -> usize {
    100 * dim
}

/// Mutable state of the coordinate search across one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub sigma2: f64,
    /// Upper bound for `sigma2`; the initial variance.
    pub sigma2_cap: f64,
    pub fail_streak: usize,
    pub success_streak: usize,
    pub weight_index: usize,
    /// Number of completed evaluations.
    pub n: usize,
    pub n0: usize,
    pub n_max: usize,
    pub phi0: f64,
    pub m: usize,
    pub t_fail: usize,
}

impl SearchState {
    pub fn new(dim: usize, n0: usize, n_max: usize) -> Self {
        Self {
            sigma2: DEFAULT_SIGMA2,
            sigma2_cap: DEFAULT_SIGMA2,
            fail_streak: 0,
            success_streak: 0,
            weight_index: 0,
            n: n0,
            n0,
            n_max,
            phi0: default_phi0(dim),
            m: default_candidates(dim),
            t_fail: default_t_fail(dim),
        }
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = sigma2;
        self.sigma2_cap = sigma2;
        self
    }

    pub fn with_candidates(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    /// Probability of perturbing each coordinate at the current `n`:
    /// `phi0 * (1 - ln(n - n0 + 1) / ln(n_max - n0))`, clamped to `[0, 1]`.
    pub fn perturbation_probability(&self) -> Result<f64, SearchError> {
        perturbation_probability(self.phi0, self.n, self.n0, self.n_max)
    }

    /// Returns the current cycle weight and moves to the next one.
    pub fn advance_weight(&mut self) -> f64 {
        let w = WEIGHT_CYCLE[self.weight_index % WEIGHT_CYCLE.len()];
        self.weight_index = (self.weight_index + 1) % WEIGHT_CYCLE.len();
        w
    }

    /// Updates the streak counters and, when a streak completes, halves
    /// (floored at 0.005) or doubles (capped at the initial value) the
    /// variance.
    pub fn adjust_variance(&mut self, improved: bool) {
        if improved {
            self.fail_streak = 0;
            self.success_streak += 1;
            if self.success_streak >= SUCCESS_TOLERANCE {
                self.sigma2 = (2.0 * self.sigma2).min(self.sigma2_cap);
                self.success_streak = 0;
            }
        } else {
            self.success_streak = 0;
            self.fail_streak += 1;
            if self.fail_streak >= self.t_fail {
                self.sigma2 = (self.sigma2 / 2.0).max(SIGMA2_FLOOR);
                self.fail_streak = 0;
            }
        }
    }
}

pub fn perturbation_probability(
    phi0: f64,
    n: usize,
    n0: usize,
    n_max: usize,
) -> Result<f64, SearchError> {
    if n >= n_max {
        return Err(SearchError::BudgetExhausted { n, max: n_max });
    }
    if n < n0 {
        return Err(SearchError::BeforeSchedule { n, n0 });
    }
    let span = (n_max - n0) as f64;
    if span < 2.0 {
        // ln(1) = 0 would divide by zero; a single step is the schedule's end
        return Ok(if n == n0 { phi0 } else { 0.0 });
    }
    let phi = phi0 * (1.0 - ((n - n0 + 1) as f64).ln() / span.ln());
    Ok(phi.clamp(0.0, 1.0))
}

/// How candidate points are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateStrategy {
    /// Gaussian perturbation of a random subset of the incumbent's coordinates.
    Dycors,
    /// Uniform over the whole box.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBatch {
    pub points: Vec<PointInternal>,
    /// Candidates drawn before filtering.
    pub generated: usize,
}

/// Draws up to `m` candidates. Integer coordinates are snapped onto their
/// grid; anything within `d_tol` of an evaluated point (which includes the
/// incumbent) is dropped without replacement.
#[allow(clippy::too_many_arguments)]
pub fn generate_candidates(
    strategy: CandidateStrategy,
    domain: &Domain,
    x_best: &PointInternal,
    evaluated: &[&PointInternal],
    d_tol: f64,
    m: usize,
    phi: f64,
    sigma2: f64,
    rng: &mut RngState,
) -> Result<CandidateBatch, SearchError> {
    if sigma2.is_nan() || sigma2 < 0.0 {
        return Err(SearchError::NegativeVariance(sigma2));
    }
    let dim = domain.dim();
    let mut points = Vec::with_capacity(m);
    let mut mask = vec![false; dim];
    for _ in 0..m {
        let mut y = match strategy {
            CandidateStrategy::Dycors => {
                let mut any = false;
                for slot in mask.iter_mut() {
                    *slot = rng.bernoulli(phi);
                    any |= *slot;
                }
                if !any {
                    mask[rng.index(dim)] = true;
                }
                let mut y = x_best.clone();
                for (c, &perturb) in y.0.iter_mut().zip(&mask) {
                    if perturb {
                        let delta = rng
                            .normal(0.0, sigma2)
                            .map_err(|_| SearchError::NegativeVariance(sigma2))?;
                        *c = (*c + delta).clamp(0.0, 1.0);
                    }
                }
                y
            }
            CandidateStrategy::Uniform => uniform_point(dim, rng),
        };
        domain.snap(&mut y);
        if y == *x_best {
            continue;
        }
        if evaluated.iter().any(|p| p.distance(&y) < d_tol) {
            continue;
        }
        points.push(y);
    }
    if points.is_empty() {
        return Err(SearchError::NoCandidates);
    }
    Ok(CandidateBatch {
        points,
        generated: m,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub point: PointInternal,
    pub surrogate_value: f64,
    pub min_distance: f64,
    pub v_ev: f64,
    pub v_dm: f64,
    pub score: f64,
}

fn min_max(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    })
}

/// Scores candidates by min-max normalized surrogate value and distance to
/// the evaluated points; `w` weighs the surrogate term.
pub fn score_candidates(
    points: Vec<PointInternal>,
    surrogate_values: &[f64],
    evaluated: &[&PointInternal],
    w: f64,
) -> Result<Vec<Candidate>, SearchError> {
    if points.is_empty() {
        return Err(SearchError::EmptyCandidateSet);
    }
    if points.len() != surrogate_values.len() {
        return Err(SearchError::LengthMismatch {
            candidates: points.len(),
            values: surrogate_values.len(),
        });
    }
    if !(0.0..=1.0).contains(&w) {
        return Err(SearchError::InvalidWeight(w));
    }
    let distances: Vec<f64> = points
        .iter()
        .map(|t| {
            evaluated
                .iter()
                .map(|x| distance(t.coords(), x.coords()))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let (s_min, s_max) = min_max(surrogate_values.iter().copied());
    let (d_min, d_max) = min_max(distances.iter().copied());

    Ok(points
        .into_iter()
        .zip(surrogate_values)
        .zip(distances)
        .map(|((point, &s), delta)| {
            let v_ev = if s_max != s_min {
                (s - s_min) / (s_max - s_min)
            } else {
                1.0
            };
            let v_dm = if d_max != d_min {
                (d_max - delta) / (d_max - d_min)
            } else {
                1.0
            };
            Candidate {
                point,
                surrogate_value: s,
                min_distance: delta,
                v_ev,
                v_dm,
                score: w * v_ev + (1.0 - w) * v_dm,
            }
        })
        .collect())
}

/// Index of the lowest score; the earliest candidate wins ties.
pub fn select_next(candidates: &[Candidate]) -> Result<usize, SearchError> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        match best {
            Some(b) if candidates[b].score <= c.score => {}
            _ => best = Some(i),
        }
    }
    best.ok_or(SearchError::EmptyCandidateSet)
}
