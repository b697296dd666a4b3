//! Cubic radial basis function interpolant with a linear polynomial tail.
//!
//! The model is
//!
//! ```text
//! S(x) = sum_i lambda_i * |x - x_i|^3 + b'x + a
//! ```
//!
//! fitted by solving the symmetric augmented system
//!
//! ```text
//! [ Phi  P ] [ lambda ]   [ F ]
//! [ P'   0 ] [ c      ] = [ 0 ]
//! ```
//!
//! with `Phi_ij = |x_i - x_j|^3`, `P = [x_i' 1]` and `c = (b, a)`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::domain::distance;

/// Residual bound used to decide whether a solve needs regularization.
const RESIDUAL_TOL: f64 = 1e-8;
/// Relative ridge added to the kernel diagonal when the plain solve fails.
const RIDGE_SCALE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RbfError {
    #[error("need at least {needed} points for a {dim}-dimensional fit, got {got}")]
    TooFewPoints {
        needed: usize,
        dim: usize,
        got: usize,
    },
    #[error("augmented system is singular even after regularization")]
    SingularSystem,
    #[error("point #{index} duplicates node #{existing}")]
    DuplicatePoint { index: usize, existing: usize },
    #[error("input is inconsistent: {0}")]
    InvalidInput(String),
}

#[inline]
pub fn cubic(r: f64) -> f64 {
    r * r * r
}

/// Points and values to interpolate.
#[derive(Debug, Clone, PartialEq)]
pub struct FitInput {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// Minimum allowed distance between two nodes.
    pub d_tol: f64,
}

impl FitInput {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Self {
        Self {
            points,
            values,
            d_tol: 0.0,
        }
    }

    pub fn with_d_tol(mut self, d_tol: f64) -> Self {
        self.d_tol = d_tol;
        self
    }

    fn validate(&self) -> Result<usize, RbfError> {
        let n = self.points.len();
        if n != self.values.len() {
            return Err(RbfError::InvalidInput(format!(
                "{n} points but {} values",
                self.values.len()
            )));
        }
        let dim = self.points.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(RbfError::InvalidInput(
                "points must have dimension >= 1".into(),
            ));
        }
        if self.points.iter().any(|p| p.len() != dim) {
            return Err(RbfError::InvalidInput("ragged point matrix".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(RbfError::InvalidInput(format!("non-finite value {v}")));
        }
        if n < dim + 1 {
            return Err(RbfError::TooFewPoints {
                needed: dim + 1,
                dim,
                got: n,
            });
        }
        for i in 1..n {
            for j in 0..i {
                let r = distance(&self.points[i], &self.points[j]);
                if r == 0.0 || r < self.d_tol {
                    return Err(RbfError::DuplicatePoint {
                        index: i,
                        existing: j,
                    });
                }
            }
        }
        Ok(dim)
    }
}

/// A fitted interpolant. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfModel {
    input: FitInput,
    lambda: Vec<f64>,
    tail_b: Vec<f64>,
    tail_a: f64,
    regularized: bool,
}

impl RbfModel {
    /// Builds a model from explicit coefficients.
    pub fn from_parts(
        nodes: Vec<Vec<f64>>,
        lambda: Vec<f64>,
        tail_b: Vec<f64>,
        tail_a: f64,
    ) -> Self {
        let values = vec![0.0; nodes.len()];
        Self {
            input: FitInput::new(nodes, values),
            lambda,
            tail_b,
            tail_a,
            regularized: false,
        }
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.input.points
    }

    pub fn values(&self) -> &[f64] {
        &self.input.values
    }

    pub fn fit_input(&self) -> &FitInput {
        &self.input
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn tail_b(&self) -> &[f64] {
        &self.tail_b
    }

    pub fn tail_a(&self) -> f64 {
        self.tail_a
    }

    pub fn dim(&self) -> usize {
        self.tail_b.len()
    }

    /// Whether the ridge fallback was needed to solve the system.
    pub fn regularized(&self) -> bool {
        self.regularized
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let kernel: f64 = self
            .input
            .points
            .iter()
            .zip(&self.lambda)
            .map(|(node, l)| l * cubic(distance(x, node)))
            .sum();
        let tail: f64 = self.tail_b.iter().zip(x).map(|(b, xi)| b * xi).sum();
        kernel + tail + self.tail_a
    }

    /// Evaluates many points in one sweep over the nodes.
    pub fn predict_batch<P: AsRef<[f64]>>(&self, xs: &[P]) -> Vec<f64> {
        let mut out: Vec<f64> = xs
            .iter()
            .map(|x| {
                let x = x.as_ref();
                self.tail_b.iter().zip(x).map(|(b, xi)| b * xi).sum::<f64>() + self.tail_a
            })
            .collect();
        // node-major keeps each node hot while it is applied to every query
        for (node, &l) in self.input.points.iter().zip(&self.lambda) {
            if l == 0.0 {
                continue;
            }
            for (acc, x) in out.iter_mut().zip(xs) {
                *acc += l * cubic(distance(x.as_ref(), node));
            }
        }
        out
    }

    /// `P' lambda`, which vanishes for an exact solve.
    pub fn orthogonality_residual(&self) -> Vec<f64> {
        let dim = self.dim();
        let mut out = vec![0.0; dim + 1];
        for (node, l) in self.input.points.iter().zip(&self.lambda) {
            for k in 0..dim {
                out[k] += node[k] * l;
            }
            out[dim] += l;
        }
        out
    }
}

/// Kernel matrix `Phi_ij = |x_i - x_j|^3`.
pub fn kernel_matrix(points: &[Vec<f64>]) -> DMatrix<f64> {
    let n = points.len();
    let mut phi = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = cubic(distance(&points[i], &points[j]));
            phi[(i, j)] = v;
            phi[(j, i)] = v;
        }
    }
    phi
}

fn augmented_system(points: &[Vec<f64>], ridge: f64) -> DMatrix<f64> {
    let n = points.len();
    let dim = points[0].len();
    let size = n + dim + 1;
    let mut a = DMatrix::zeros(size, size);
    a.view_mut((0, 0), (n, n)).copy_from(&kernel_matrix(points));
    for i in 0..n {
        a[(i, i)] += ridge;
        for k in 0..dim {
            a[(i, n + k)] = points[i][k];
            a[(n + k, i)] = points[i][k];
        }
        a[(i, n + dim)] = 1.0;
        a[(n + dim, i)] = 1.0;
    }
    a
}

fn solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.clone().lu();
    let mut x = lu.solve(rhs)?;
    // one round of iterative refinement recovers accuracy lost to clustered nodes
    let r = rhs - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Whether `P = [x_i' 1]` has full column rank, i.e. the nodes determine a
/// unique linear tail.
fn tail_unisolvent(points: &[Vec<f64>]) -> bool {
    let n = points.len();
    let dim = points[0].len();
    let p = DMatrix::from_fn(n, dim + 1, |i, k| if k < dim { points[i][k] } else { 1.0 });
    let sv = p.singular_values();
    let max = sv.max();
    max > 0.0 && sv.min() > 1e-10 * max
}

fn interpolation_ok(input: &FitInput, model: &RbfModel) -> bool {
    input
        .points
        .iter()
        .zip(&input.values)
        .all(|(p, &f)| (model.predict(p) - f).abs() <= RESIDUAL_TOL * (1.0 + f.abs()))
}

/// Fits the interpolant. Falls back once to a ridge-regularized kernel
/// (`Phi + eps I`, `eps = 1e-8 max|Phi|`) when the plain solve is singular or
/// misses the interpolation tolerance.
pub fn fit(input: FitInput) -> Result<RbfModel, RbfError> {
    let dim = input.validate()?;
    let n = input.points.len();
    if !tail_unisolvent(&input.points) {
        return Err(RbfError::SingularSystem);
    }
    let mut rhs = DVector::zeros(n + dim + 1);
    for (i, &f) in input.values.iter().enumerate() {
        rhs[i] = f;
    }

    let build = |sol: DVector<f64>, input: &FitInput, regularized: bool| RbfModel {
        input: input.clone(),
        lambda: sol.rows(0, n).iter().copied().collect(),
        tail_b: sol.rows(n, dim).iter().copied().collect(),
        tail_a: sol[n + dim],
        regularized,
    };

    if let Some(sol) = solve(&augmented_system(&input.points, 0.0), &rhs) {
        let model = build(sol, &input, false);
        if interpolation_ok(&input, &model) {
            return Ok(model);
        }
    }

    let max_phi = kernel_matrix(&input.points).amax();
    let ridge = RIDGE_SCALE * max_phi.max(f64::MIN_POSITIVE);
    let sol =
        solve(&augmented_system(&input.points, ridge), &rhs).ok_or(RbfError::SingularSystem)?;
    Ok(build(sol, &input, true))
}

/// Refits with one extra node. Equivalent to [`fit`] on the enlarged set.
pub fn refit_with(model: &RbfModel, point: Vec<f64>, value: f64) -> Result<RbfModel, RbfError> {
    let input = model.fit_input();
    if let Some(existing) = input.points.iter().position(|p| {
        let r = distance(p, &point);
        r == 0.0 || r < input.d_tol
    }) {
        return Err(RbfError::DuplicatePoint {
            index: input.points.len(),
            existing,
        });
    }
    let mut next = input.clone();
    next.points.push(point);
    next.values.push(value);
    fit(next)
}
