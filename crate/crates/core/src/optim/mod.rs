//! Inner optimizers used to score candidate benchmarks: a real-coded GA
//! (binary tournament, SBX, polynomial mutation, (μ+λ) survival) and
//! DE/rand/1/bin.

mod de;
mod ga;
pub mod operators;

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::expr::{EvalResult, Expression};

pub use de::{run_de, DeConfig};
pub use ga::{run_ga, GaConfig};

/// A box `[lower, upper]^dimension`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dimension: usize,
    pub lower: f64,
    pub upper: f64,
}

impl SearchSpace {
    pub fn new(dimension: usize, lower: f64, upper: f64) -> Self {
        SearchSpace {
            dimension,
            lower,
            upper,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension && x.iter().all(|v| *v >= self.lower && *v <= self.upper)
    }

    pub fn clip(&self, x: &mut [f64]) {
        for v in x {
            *v = v.clamp(self.lower, self.upper);
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dimension)
            .map(|_| self.lower + rng.random::<f64>() * self.width())
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dimension == 0 {
            return Err(ConfigError("search space dimension must be positive"));
        }
        if !(self.lower < self.upper) || !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(ConfigError("search space needs finite lower < upper"));
        }
        Ok(())
    }
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace::new(5, -1.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigError(pub &'static str);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

impl core::error::Error for ConfigError {}

/// Anything that can be minimized over a box.
pub trait Objective {
    fn eval(&self, x: &[f64]) -> EvalResult;
}

impl Objective for Expression {
    fn eval(&self, x: &[f64]) -> EvalResult {
        self.evaluate(x)
    }
}

impl<F: Fn(&[f64]) -> EvalResult> Objective for F {
    fn eval(&self, x: &[f64]) -> EvalResult {
        self(x)
    }
}

/// Result of one seeded optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// Best objective value found; finite whenever `valid`.
    pub best_value: f64,
    pub best_point: Vec<f64>,
    pub seed: u64,
    /// False as soon as any evaluation was invalid; the run stops there.
    pub valid: bool,
    /// Objective calls made by the generational loop.
    pub evaluations_used: u64,
    /// Objective calls spent on the initial population.
    pub initial_evaluations: u64,
    /// Best value after initialization and after each completed generation.
    pub history: Vec<f64>,
}

impl TrialOutcome {
    fn invalid(seed: u64, best: Option<&(Vec<f64>, f64)>, evals: u64, init: u64, history: Vec<f64>) -> Self {
        let (best_point, best_value) = match best {
            Some((x, f)) => (x.clone(), *f),
            None => (Vec::new(), f64::INFINITY),
        };
        TrialOutcome {
            best_value,
            best_point,
            seed,
            valid: false,
            evaluations_used: evals,
            initial_evaluations: init,
            history,
        }
    }
}

type Scored = (Vec<f64>, f64);

/// Evaluates and ranks an initial population; `Err` carries the evaluation
/// count at the point the run hit an invalid value.
fn initial_population<O: Objective + ?Sized, R: Rng + ?Sized>(
    objective: &O,
    space: &SearchSpace,
    size: usize,
    rng: &mut R,
) -> Result<Vec<Scored>, (u64, Option<Scored>)> {
    let mut pop: Vec<(Vec<f64>, f64)> = Vec::with_capacity(size);
    for k in 0..size {
        let x = space.sample_uniform(rng);
        match objective.eval(&x) {
            Ok(f) => pop.push((x, f)),
            Err(_) => {
                let best = pop.iter().min_by(|a, b| a.1.total_cmp(&b.1)).cloned();
                return Err((k as u64 + 1, best));
            }
        }
    }
    Ok(pop)
}

fn best_of(pop: &[(Vec<f64>, f64)]) -> &(Vec<f64>, f64) {
    pop.iter()
        .reduce(|best, cand| if cand.1 < best.1 { cand } else { best })
        .expect("population is nonempty")
}
