//! Synthetic objectives with known optima.

use std::f64::consts::{E, PI};

use crate::domain::{Domain, VariableSpec};

/// A registered test function.
pub struct BuiltinFunction {
    pub name: &'static str,
    pub description: &'static str,
    /// Fixed dimension, if the function only exists for one.
    pub fixed_dim: Option<usize>,
    pub default_dim: usize,
    eval: fn(&[f64]) -> f64,
    template: fn(usize, usize) -> Domain,
    optimum: fn(usize, usize) -> (Vec<f64>, f64),
}

impl std::fmt::Debug for BuiltinFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BuiltinFunction")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

impl BuiltinFunction {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// Default search box for `dim` variables, `integers` of them integer.
    /// Integer counts only matter for the mixed-integer entries.
    pub fn domain(&self, dim: usize, integers: usize) -> Domain {
        (self.template)(self.fixed_dim.unwrap_or(dim), integers)
    }

    /// Location (in user units) and value of the global minimum.
    pub fn optimum(&self, dim: usize, integers: usize) -> (Vec<f64>, f64) {
        (self.optimum)(self.fixed_dim.unwrap_or(dim), integers)
    }

    pub fn is_mixed_integer(&self) -> bool {
        self.domain(self.default_dim, 2).has_integers()
    }
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

pub fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
}

pub fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let last = w[w.len() - 1];
    let head = (PI * w[0]).sin().powi(2);
    let body: f64 = w[..w.len() - 1]
        .iter()
        .map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2)))
        .sum();
    let tail = (last - 1.0).powi(2) * (1.0 + (2.0 * PI * last).sin().powi(2));
    head + body + tail
}

const PSEUDO_DNN_NAMES: [&str; 6] = [
    "learning_rate",
    "momentum",
    "dropout",
    "init_scale",
    "hidden_1",
    "hidden_2",
];
const PSEUDO_DNN_OPT_CONT: [f64; 4] = [0.3, 0.7, 0.45, 0.6];
const PSEUDO_DNN_OPT_INT: [f64; 2] = [4.0, 7.0];
const PSEUDO_DNN_INT_RANGE: (f64, f64) = (1.0, 10.0);
const PSEUDO_DNN_FLOOR: f64 = 0.08;

/// Smooth multimodal stand-in for a validation-error surface over four
/// continuous and two integer hyperparameters. Each coordinate is rescaled
/// to `[0, 1]` and contributes a bowl plus a cosine ripple, so the global
/// minimum 0.08 sits at a single grid-feasible point.
pub fn pseudo_dnn(x: &[f64]) -> f64 {
    let (lo, hi) = PSEUDO_DNN_INT_RANGE;
    let offsets = x.iter().enumerate().map(|(i, &v)| {
        if i < 4 {
            v - PSEUDO_DNN_OPT_CONT[i]
        } else {
            (v - PSEUDO_DNN_OPT_INT[i - 4]) / (hi - lo)
        }
    });
    PSEUDO_DNN_FLOOR
        + offsets
            .map(|d| 0.5 * d * d + 0.05 * (1.0 - (6.0 * PI * d).cos()))
            .sum::<f64>()
}

fn symmetric(prefix: &str, dim: usize, bound: f64) -> Domain {
    Domain::new(
        (0..dim)
            .map(|i| VariableSpec::continuous(format!("{prefix}{i}"), -bound, bound))
            .collect(),
    )
    .expect("template domain is valid")
}

/// `dim` variables on `[-5, 5]`, the last `integers` of them integer.
fn mixed(dim: usize, integers: usize) -> Domain {
    let integers = integers.min(dim);
    Domain::new(
        (0..dim)
            .map(|i| {
                if i >= dim - integers {
                    VariableSpec::integer(format!("k{i}"), -5, 5)
                } else {
                    VariableSpec::continuous(format!("x{i}"), -5.0, 5.0)
                }
            })
            .collect(),
    )
    .expect("template domain is valid")
}

fn pseudo_dnn_domain(_: usize, _: usize) -> Domain {
    let (lo, hi) = PSEUDO_DNN_INT_RANGE;
    Domain::new(
        PSEUDO_DNN_NAMES
            .iter()
            .enumerate()
            .map(|(i, name)| {
                if i < 4 {
                    VariableSpec::continuous(*name, 0.0, 1.0)
                } else {
                    VariableSpec::integer(*name, lo as i64, hi as i64)
                }
            })
            .collect(),
    )
    .expect("template domain is valid")
}

fn at_origin(dim: usize, _: usize) -> (Vec<f64>, f64) {
    (vec![0.0; dim], 0.0)
}

static CATALOG: [BuiltinFunction; 7] = [
    BuiltinFunction {
        name: "sphere",
        description: "sum x_i^2 on [-5.12, 5.12]^D",
        fixed_dim: None,
        default_dim: 2,
        eval: sphere,
        template: |d, _| symmetric("x", d, 5.12),
        optimum: at_origin,
    },
    BuiltinFunction {
        name: "rastrigin",
        description: "10D + sum (x_i^2 - 10 cos 2 pi x_i) on [-5.12, 5.12]^D",
        fixed_dim: None,
        default_dim: 2,
        eval: rastrigin,
        template: |d, _| symmetric("x", d, 5.12),
        optimum: at_origin,
    },
    BuiltinFunction {
        name: "ackley",
        description: "Ackley (a = 20, b = 0.2, c = 2 pi) on [-32.768, 32.768]^D",
        fixed_dim: None,
        default_dim: 2,
        eval: ackley,
        template: |d, _| symmetric("x", d, 32.768),
        optimum: at_origin,
    },
    BuiltinFunction {
        name: "levy",
        description: "Levy on [-10, 10]^D, minimum at x = 1",
        fixed_dim: None,
        default_dim: 2,
        eval: levy,
        template: |d, _| symmetric("x", d, 10.0),
        optimum: |d, _| (vec![1.0; d], 0.0),
    },
    BuiltinFunction {
        name: "mixed-sphere",
        description: "sphere on [-5, 5]^D with the trailing variables integer",
        fixed_dim: None,
        default_dim: 6,
        eval: sphere,
        template: mixed,
        optimum: at_origin,
    },
    BuiltinFunction {
        name: "mixed-rastrigin",
        description: "rastrigin on [-5, 5]^D with the trailing variables integer",
        fixed_dim: None,
        default_dim: 6,
        eval: rastrigin,
        template: mixed,
        optimum: at_origin,
    },
    BuiltinFunction {
        name: "pseudo-dnn",
        description: "multimodal validation-error surface, 4 continuous + 2 integer variables",
        fixed_dim: Some(6),
        default_dim: 6,
        eval: pseudo_dnn,
        template: pseudo_dnn_domain,
        optimum: |_, _| {
            let mut x = PSEUDO_DNN_OPT_CONT.to_vec();
            x.extend(PSEUDO_DNN_OPT_INT);
            (x, PSEUDO_DNN_FLOOR)
        },
    },
];

pub fn builtin_catalog() -> &'static [BuiltinFunction] {
    &CATALOG
}

pub fn lookup(name: &str) -> Option<&'static BuiltinFunction> {
    CATALOG.iter().find(|f| f.name == name)
}
