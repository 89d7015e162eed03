use ebg_core::engine::Scorer;
use ebg_core::expr::Expression;
use ebg_core::fitness::{assemble, trial_plan, BenchmarkEvaluation, FitnessConfig, InnerConfigs};
use ebg_core::optim::TrialOutcome;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Runs every inner-optimizer trial of a batch on a bounded thread pool.
/// Results are identical to sequential scoring.
pub struct ParallelScorer {
    pool: ThreadPool,
}

impl ParallelScorer {
    /// `workers = 0` uses the available parallelism.
    pub fn new(workers: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = ThreadPoolBuilder::new().num_threads(workers).build()?;
        Ok(ParallelScorer { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Scorer for ParallelScorer {
    fn score(
        &self,
        expressions: &[&Expression],
        fitness: &FitnessConfig,
        inner: &InnerConfigs,
    ) -> Vec<BenchmarkEvaluation> {
        let plan = trial_plan(fitness);
        let jobs: Vec<(usize, usize)> = (0..expressions.len())
            .flat_map(|e| (0..plan.len()).map(move |t| (e, t)))
            .collect();
        let outcomes: Vec<TrialOutcome> = self.pool.install(|| {
            jobs.par_iter()
                .map(|&(e, t)| inner.run(plan[t].algorithm, expressions[e], plan[t].seed))
                .collect()
        });
        outcomes
            .chunks(plan.len().max(1))
            .map(|trials| assemble(fitness, trials))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ebg_core::engine::SequentialScorer;
    use ebg_core::expr::FunctionWhitelist;
    use ebg_core::optim::{DeConfig, GaConfig};

    #[test]
    fn matches_sequential() {
        let fitness = FitnessConfig {
            trials: 3,
            ..FitnessConfig::default()
        };
        let inner = InnerConfigs {
            ga: GaConfig {
                population: 10,
                generations: 10,
                ..GaConfig::default()
            },
            de: DeConfig {
                population: 10,
                generations: 10,
                ..DeConfig::default()
            },
            ..InnerConfigs::default()
        };
        let wl = FunctionWhitelist::default();
        let exprs: Vec<Expression> = ["x[0]**2 + abs(x[1])", "sin(x[0]) + x[2]", "1"]
            .iter()
            .map(|s| Expression::parse(s, 5, &wl).unwrap())
            .collect();
        let refs: Vec<&Expression> = exprs.iter().collect();
        let par = ParallelScorer::new(3).unwrap().score(&refs, &fitness, &inner);
        let seq = SequentialScorer.score(&refs, &fitness, &inner);
        assert_eq!(par, seq);
        assert_eq!(par[2].fitness, 0.5);
    }
}
