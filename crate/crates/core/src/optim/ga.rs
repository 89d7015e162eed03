use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::operators::{pm_mutate, sbx_pair};
use super::{best_of, initial_population, ConfigError, Objective, SearchSpace, TrialOutcome};
use crate::seed;

/// Real-coded GA settings. Defaults are the published experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    /// Probability that a selected pair undergoes SBX.
    pub crossover_rate: f64,
    /// Per-gene probability of polynomial mutation.
    pub mutation_rate: f64,
    pub eta_sbx: f64,
    pub eta_pm: f64,
    pub tournament_size: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 50,
            generations: 1000,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            eta_sbx: 20.0,
            eta_pm: 20.0,
            tournament_size: 2,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population < 2 || !self.population.is_multiple_of(2) {
            return Err(ConfigError("GA population must be even and at least 2"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(ConfigError("GA rates must lie in [0, 1]"));
        }
        if !(self.eta_sbx > 0.0) || !(self.eta_pm > 0.0) {
            return Err(ConfigError("GA distribution indices must be positive"));
        }
        if self.tournament_size == 0 {
            return Err(ConfigError("GA tournament size must be positive"));
        }
        Ok(())
    }
}

fn tournament<R: Rng + ?Sized>(pop: &[(Vec<f64>, f64)], size: usize, rng: &mut R) -> usize {
    let mut winner = rng.random_range(0..pop.len());
    for _ in 1..size {
        let challenger = rng.random_range(0..pop.len());
        if pop[challenger].1 < pop[winner].1 {
            winner = challenger;
        }
    }
    winner
}

/// Runs one seeded GA trial minimizing `objective` over `space`.
///
/// Each generation breeds `population` offspring from binary-tournament
/// parents, then keeps the best `population` of parents plus offspring.
/// The run stops at the first invalid evaluation and reports `valid = false`.
pub fn run_ga<O: Objective + ?Sized>(objective: &O, space: &SearchSpace, config: &GaConfig, seed: u64) -> TrialOutcome {
    let mut rng = seed::rng(seed);
    let mu = config.population;
    let init = mu as u64;
    let mut pop = match initial_population(objective, space, mu, &mut rng) {
        Ok(pop) => pop,
        Err((evals, best)) => return TrialOutcome::invalid(seed, best.as_ref(), 0, evals, Vec::new()),
    };
    let mut history = Vec::with_capacity(config.generations + 1);
    history.push(best_of(&pop).1);
    let mut evals = 0u64;

    for _ in 0..config.generations {
        let mut offspring: Vec<(Vec<f64>, f64)> = Vec::with_capacity(mu);
        while offspring.len() < mu {
            let a = tournament(&pop, config.tournament_size, &mut rng);
            let b = tournament(&pop, config.tournament_size, &mut rng);
            let (c1, c2) = if rng.random::<f64>() < config.crossover_rate {
                sbx_pair(&pop[a].0, &pop[b].0, config.eta_sbx, space, &mut rng)
            } else {
                (pop[a].0.clone(), pop[b].0.clone())
            };
            for child in [c1, c2] {
                if offspring.len() == mu {
                    break;
                }
                let child = pm_mutate(&child, config.eta_pm, config.mutation_rate, space, &mut rng);
                evals += 1;
                match objective.eval(&child) {
                    Ok(f) => offspring.push((child, f)),
                    Err(_) => {
                        let best = best_of(&pop).clone();
                        return TrialOutcome::invalid(seed, Some(&best), evals, init, history);
                    }
                }
            }
        }
        pop.extend(offspring);
        // stable: earlier (parent) entries win ties
        pop.sort_by(|x, y| x.1.total_cmp(&y.1));
        pop.truncate(mu);
        history.push(pop[0].1);
    }

    let (best_point, best_value) = best_of(&pop).clone();
    TrialOutcome {
        best_value,
        best_point,
        seed,
        valid: true,
        evaluations_used: evals,
        initial_evaluations: init,
        history,
    }
}
