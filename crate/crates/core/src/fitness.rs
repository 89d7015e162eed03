//! Pooled-rank fitness of a candidate benchmark, plus pre-validation.
//!
//! A benchmark is scored by running the target algorithm A1 and the
//! comparative algorithm A2 for `T` seeded trials each, ranking all `2T`
//! best values together (ascending, average ranks on ties), and normalizing
//! A1's rank sum by `1 + 2 + ... + 2T`. A penalty `alpha * max(0, -min A1)`
//! discourages benchmarks whose values run negative. Lower is better; the
//! floor for `T = 20` is `210 / 820`.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::Expression;
use crate::optim::{run_de, run_ga, DeConfig, GaConfig, Objective, SearchSpace, TrialOutcome};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "GA")]
    Ga,
    #[serde(rename = "DE")]
    De,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ga => "GA",
            Algorithm::De => "DE",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Algorithm::Ga => 0x4741,
            Algorithm::De => 0x4445,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitnessConfig {
    pub trials: usize,
    pub alpha: f64,
    /// Fitness assigned when any trial hits an invalid value.
    pub invalid_penalty: f64,
    pub a1: Algorithm,
    pub a2: Algorithm,
    pub base_seed: u64,
    pub prevalidation_samples: usize,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        FitnessConfig {
            trials: 20,
            alpha: 10.0,
            invalid_penalty: 1e6,
            a1: Algorithm::Ga,
            a2: Algorithm::De,
            base_seed: 0,
            prevalidation_samples: 1000,
        }
    }
}

impl FitnessConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.trials == 0 {
            return Err("trials must be at least 1");
        }
        if self.a1 == self.a2 {
            return Err("a1 and a2 must be different algorithms");
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err("alpha must be a nonnegative finite number");
        }
        if !(self.invalid_penalty > 0.0) || !self.invalid_penalty.is_finite() {
            return Err("invalid_penalty must be a positive finite number");
        }
        Ok(())
    }
}

/// Inner-optimizer settings shared by every trial.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerConfigs {
    pub space: SearchSpace,
    pub ga: GaConfig,
    pub de: DeConfig,
}

impl InnerConfigs {
    pub fn run(&self, algorithm: Algorithm, objective: &(impl Objective + ?Sized), seed: u64) -> TrialOutcome {
        match algorithm {
            Algorithm::Ga => run_ga(objective, &self.space, &self.ga, seed),
            Algorithm::De => run_de(objective, &self.space, &self.de, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEvaluation {
    pub fitness: f64,
    #[serde(with = "finite_or_null")]
    pub a1_bests: Vec<f64>,
    #[serde(with = "finite_or_null")]
    pub a2_bests: Vec<f64>,
    pub rank_term: f64,
    pub penalty_term: f64,
    pub any_invalid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitnessError {
    NonFinite,
    LengthMismatch { a1: usize, a2: usize },
    Empty,
}

impl fmt::Display for FitnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitnessError::NonFinite => f.write_str("trial bests must be finite"),
            FitnessError::LengthMismatch { a1, a2 } => {
                write!(f, "trial counts differ: {a1} for A1, {a2} for A2")
            }
            FitnessError::Empty => f.write_str("at least one trial per algorithm is required"),
        }
    }
}

impl core::error::Error for FitnessError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledRank {
    pub fitness: f64,
    pub rank_term: f64,
    pub penalty_term: f64,
}

/// Ascending average ranks (1-based) of `values`.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

pub fn pooled_rank_fitness(a1_bests: &[f64], a2_bests: &[f64], alpha: f64) -> Result<PooledRank, FitnessError> {
    if a1_bests.len() != a2_bests.len() {
        return Err(FitnessError::LengthMismatch {
            a1: a1_bests.len(),
            a2: a2_bests.len(),
        });
    }
    if a1_bests.is_empty() {
        return Err(FitnessError::Empty);
    }
    if a1_bests.iter().chain(a2_bests).any(|v| !v.is_finite()) {
        return Err(FitnessError::NonFinite);
    }
    let t = a1_bests.len();
    let pooled: Vec<f64> = a1_bests.iter().chain(a2_bests).copied().collect();
    let ranks = average_ranks(&pooled);
    let rank_sum: f64 = ranks[..t].iter().sum();
    let n = 2 * t;
    let rank_term = rank_sum / ((n * (n + 1) / 2) as f64);
    let best_a1 = a1_bests.iter().copied().fold(f64::INFINITY, f64::min);
    let penalty_term = alpha * f64::max(0.0, -best_a1);
    Ok(PooledRank {
        fitness: rank_term + penalty_term,
        rank_term,
        penalty_term,
    })
}

/// True iff `samples` uniform points in `space` all evaluate to finite values.
pub fn prevalidate(expr: &Expression, space: &SearchSpace, samples: usize, seed: u64) -> bool {
    let mut rng = seed::rng(seed);
    (0..samples).all(|_| expr.evaluate(&space.sample_uniform(&mut rng)).is_ok())
}

/// Seed of trial `index` of `algorithm` under `base_seed`.
pub fn trial_seed(base_seed: u64, algorithm: Algorithm, index: usize) -> u64 {
    seed::derive(&[base_seed, algorithm.tag(), index as u64])
}

/// One inner-optimizer run to schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSpec {
    pub algorithm: Algorithm,
    pub index: usize,
    pub seed: u64,
}

/// The `2T` runs a benchmark evaluation needs: A1's trials, then A2's.
pub fn trial_plan(config: &FitnessConfig) -> Vec<TrialSpec> {
    [config.a1, config.a2]
        .into_iter()
        .flat_map(|algorithm| {
            (0..config.trials).map(move |index| TrialSpec {
                algorithm,
                index,
                seed: trial_seed(config.base_seed, algorithm, index),
            })
        })
        .collect()
}

/// Combines trial outcomes, in `trial_plan` order, into an evaluation.
pub fn assemble(config: &FitnessConfig, outcomes: &[TrialOutcome]) -> BenchmarkEvaluation {
    assert_eq!(outcomes.len(), 2 * config.trials, "one outcome per planned trial");
    let (a1, a2) = outcomes.split_at(config.trials);
    let a1_bests: Vec<f64> = a1.iter().map(|o| o.best_value).collect();
    let a2_bests: Vec<f64> = a2.iter().map(|o| o.best_value).collect();
    let any_invalid = outcomes.iter().any(|o| !o.valid);
    let scored = if any_invalid {
        None
    } else {
        pooled_rank_fitness(&a1_bests, &a2_bests, config.alpha).ok()
    };
    match scored {
        Some(r) => BenchmarkEvaluation {
            fitness: r.fitness,
            a1_bests,
            a2_bests,
            rank_term: r.rank_term,
            penalty_term: r.penalty_term,
            any_invalid: false,
        },
        None => BenchmarkEvaluation {
            fitness: config.invalid_penalty,
            a1_bests,
            a2_bests,
            rank_term: 0.0,
            penalty_term: 0.0,
            any_invalid: true,
        },
    }
}

/// Runs all `2T` trials sequentially and scores the benchmark.
pub fn evaluate_benchmark(expr: &Expression, config: &FitnessConfig, inner: &InnerConfigs) -> BenchmarkEvaluation {
    let outcomes: Vec<TrialOutcome> = trial_plan(config)
        .iter()
        .map(|t| inner.run(t.algorithm, expr, t.seed))
        .collect();
    assemble(config, &outcomes)
}

/// Serializes non-finite entries as `null` (JSON has no infinities) and reads
/// `null` back as NaN.
pub mod finite_or_null {
    use alloc::vec::Vec;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mapped: Vec<Option<f64>> = values.iter().map(|v| v.is_finite().then_some(*v)).collect();
        mapped.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
    }
}
