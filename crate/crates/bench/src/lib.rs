//! Benchmark fixtures.

use hord_core::{fit, Domain, FitInput, PointInternal, RbfModel, RngState, VariableSpec};

/// `n` evaluated points in `[0, 1]^dim` with Rastrigin-like values.
pub struct Fixture {
    pub domain: Domain,
    pub points: Vec<PointInternal>,
    pub values: Vec<f64>,
}

impl Fixture {
    pub fn new(n: usize, dim: usize, seed: u64) -> Self {
        let mut rng = RngState::new(seed);
        let domain = Domain::new(
            (0..dim)
                .map(|i| VariableSpec::continuous(format!("x{i}"), 0.0, 1.0))
                .collect(),
        )
        .expect("valid domain");
        let points: Vec<PointInternal> = (0..n)
            .map(|_| PointInternal((0..dim).map(|_| rng.uniform()).collect()))
            .collect();
        let values = points
            .iter()
            .map(|p| {
                p.coords()
                    .iter()
                    .map(|x| {
                        let z = 10.24 * x - 5.12;
                        z * z - 10.0 * (std::f64::consts::TAU * z).cos() + 10.0
                    })
                    .sum()
            })
            .collect();
        Self {
            domain,
            points,
            values,
        }
    }

    pub fn input(&self) -> FitInput {
        FitInput::new(
            self.points.iter().map(|p| p.0.clone()).collect(),
            self.values.clone(),
        )
    }

    pub fn model(&self) -> RbfModel {
        fit(self.input()).expect("random nodes are unisolvent")
    }

    /// `m` uniform query points.
    pub fn queries(&self, m: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = RngState::new(seed);
        let dim = self.domain.dim();
        (0..m)
            .map(|_| (0..dim).map(|_| rng.uniform()).collect())
            .collect()
    }

    pub fn best(&self) -> &PointInternal {
        let i = self
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("non-empty");
        &self.points[i]
    }
}
