use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{Benchmark, LineageEvent, Origin, RunRecord};

/// Ancestry of one benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageStats {
    pub best_id: u64,
    /// Distinct individuals in the ancestor graph, the benchmark included.
    pub individuals: usize,
    pub crossovers: usize,
    pub mutations: usize,
    /// `crossovers / (crossovers + mutations)`; 0 when nothing was counted.
    pub crossover_ratio: f64,
    pub ratio_defined: bool,
}

impl LineageStats {
    pub fn operations(&self) -> usize {
        self.crossovers + self.mutations
    }
}

/// Averages over several runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorStats {
    pub avg_lineage_individuals: f64,
    pub avg_genetic_operations: f64,
    /// Pooled over runs: all crossovers over all counted operations.
    pub crossover_ratio: f64,
    pub ratio_defined: bool,
    pub runs: Vec<LineageStats>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineageError {
    UnknownBenchmark(u64),
}

impl fmt::Display for LineageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LineageError::UnknownBenchmark(id) => write!(f, "benchmark {id} is not in the run"),
        }
    }
}

impl core::error::Error for LineageError {}

/// Walks every ancestor of `best_id` (init conditioning edges included) and
/// counts the crossover and mutation events that produced them, skipping
/// offspring identical to a parent. Init events are not genetic operations.
pub fn lineage_stats(
    benchmarks: &[Benchmark],
    lineage: &[LineageEvent],
    best_id: u64,
) -> Result<LineageStats, LineageError> {
    let by_id: BTreeMap<u64, &Benchmark> = benchmarks.iter().map(|b| (b.id, b)).collect();
    let identical: BTreeSet<u64> = lineage.iter().filter(|e| e.identical).map(|e| e.child_id).collect();
    let mut seen = BTreeSet::new();
    let mut stack = alloc::vec![best_id];
    let (mut crossovers, mut mutations) = (0, 0);
    while let Some(id) = stack.pop() {
        if !seen.insert(id) {
            continue;
        }
        let b = by_id.get(&id).ok_or(LineageError::UnknownBenchmark(id))?;
        if !identical.contains(&id) {
            match b.origin {
                Origin::Crossover => crossovers += 1,
                Origin::Mutation => mutations += 1,
                Origin::Seed | Origin::InitLlm => {}
            }
        }
        stack.extend(b.parent_ids.iter().copied());
    }
    let counted = crossovers + mutations;
    Ok(LineageStats {
        best_id,
        individuals: seen.len(),
        crossovers,
        mutations,
        crossover_ratio: if counted > 0 {
            crossovers as f64 / counted as f64
        } else {
            0.0
        },
        ratio_defined: counted > 0,
    })
}

/// Lineage statistics of each run's final best benchmark, averaged.
pub fn operator_stats(records: &[&RunRecord]) -> Result<OperatorStats, LineageError> {
    let runs = records
        .iter()
        .filter_map(|r| r.best().map(|b| (r, b.id)))
        .map(|(r, id)| lineage_stats(&r.benchmarks, &r.lineage, id))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(runs))
}

pub fn aggregate(runs: Vec<LineageStats>) -> OperatorStats {
    let k = runs.len().max(1) as f64;
    let crossovers: usize = runs.iter().map(|s| s.crossovers).sum();
    let counted: usize = runs.iter().map(LineageStats::operations).sum();
    OperatorStats {
        avg_lineage_individuals: runs.iter().map(|s| s.individuals as f64).sum::<f64>() / k,
        avg_genetic_operations: counted as f64 / k,
        crossover_ratio: if counted > 0 {
            crossovers as f64 / counted as f64
        } else {
            0.0
        },
        ratio_defined: counted > 0,
        runs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub generation: usize,
    pub best_fitness: f64,
    pub median_fitness: f64,
    pub best_id: u64,
}

/// Best and median fitness of every recorded population.
pub fn generation_summary(record: &RunRecord) -> Vec<GenerationSummary> {
    record
        .populations
        .iter()
        .enumerate()
        .filter_map(|(g, _)| {
            let pop = record.population(g);
            let mut fit: Vec<f64> = pop.iter().map(|b| b.fitness).collect();
            fit.sort_by(f64::total_cmp);
            let best = pop
                .iter()
                .min_by(|a, b| a.fitness.total_cmp(&b.fitness).then(a.id.cmp(&b.id)))?;
            Some(GenerationSummary {
                generation: g,
                best_fitness: best.fitness,
                median_fitness: super::quantile_sorted(&fit, 0.5),
                best_id: best.id,
            })
        })
        .collect()
}
