use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::expr::Expression;
use crate::fitness::{trial_plan, Algorithm, FitnessConfig, InnerConfigs};

/// Best-so-far values of one inner-optimizer trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub trial: usize,
    pub seed: u64,
    pub valid: bool,
    /// Entry 0 is after initialization, entry `g` after generation `g`.
    pub history: Vec<f64>,
}

/// Re-runs the `2T` trials a benchmark was scored with, keeping their
/// convergence histories. Trial seeds are the ones fitness evaluation uses,
/// so the final values match the recorded per-trial bests.
pub fn convergence_traces(expr: &Expression, fitness: &FitnessConfig, inner: &InnerConfigs) -> Vec<Trace> {
    trial_plan(fitness)
        .into_iter()
        .map(|t| {
            let out = inner.run(t.algorithm, expr, t.seed);
            Trace {
                algorithm: t.algorithm,
                trial: t.index,
                seed: t.seed,
                valid: out.valid,
                history: out.history,
            }
        })
        .collect()
}

/// Rows of `(generation, value per trace)`; shorter traces (aborted trials)
/// leave `None`.
pub fn trace_table(traces: &[Trace]) -> Vec<(usize, Vec<Option<f64>>)> {
    let rows = traces.iter().map(|t| t.history.len()).max().unwrap_or(0);
    (0..rows)
        .map(|g| (g, traces.iter().map(|t| t.history.get(g).copied()).collect()))
        .collect()
}
