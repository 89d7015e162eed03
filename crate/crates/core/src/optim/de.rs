use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::operators::{binomial_cross, de_mutant};
use super::{best_of, initial_population, ConfigError, Objective, SearchSpace, TrialOutcome};
use crate::seed;

/// DE/rand/1/bin settings. Defaults are the published experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeConfig {
    pub population: usize,
    pub generations: usize,
    pub scale_f: f64,
    pub crossover_cr: f64,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig {
            population: 50,
            generations: 1000,
            scale_f: 1.0,
            crossover_cr: 0.8,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population < 4 {
            return Err(ConfigError("DE population must be at least 4"));
        }
        if !(0.0..=1.0).contains(&self.crossover_cr) {
            return Err(ConfigError("DE crossover rate must lie in [0, 1]"));
        }
        if !self.scale_f.is_finite() {
            return Err(ConfigError("DE scale factor must be finite"));
        }
        Ok(())
    }
}

/// Three mutually distinct indices, all different from `target`.
fn pick_three<R: Rng + ?Sized>(n: usize, target: usize, rng: &mut R) -> [usize; 3] {
    let mut picked = [usize::MAX; 3];
    for k in 0..3 {
        loop {
            let c = rng.random_range(0..n);
            if c != target && !picked[..k].contains(&c) {
                picked[k] = c;
                break;
            }
        }
    }
    picked
}

/// Runs one seeded DE/rand/1/bin trial minimizing `objective` over `space`.
///
/// Trial vectors are clipped to the box, and a trial replaces its target
/// when its value is no worse. Generations are synchronous.
pub fn run_de<O: Objective + ?Sized>(objective: &O, space: &SearchSpace, config: &DeConfig, seed: u64) -> TrialOutcome {
    let mut rng = seed::rng(seed);
    let n = config.population;
    let init = n as u64;
    let mut pop = match initial_population(objective, space, n, &mut rng) {
        Ok(pop) => pop,
        Err((evals, best)) => return TrialOutcome::invalid(seed, best.as_ref(), 0, evals, Vec::new()),
    };
    let mut history = Vec::with_capacity(config.generations + 1);
    history.push(best_of(&pop).1);
    let mut evals = 0u64;

    for _ in 0..config.generations {
        let mut next = pop.clone();
        for (i, slot) in next.iter_mut().enumerate() {
            let [r1, r2, r3] = pick_three(n, i, &mut rng);
            let mut mutant = de_mutant(&pop[r1].0, &pop[r2].0, &pop[r3].0, config.scale_f);
            space.clip(&mut mutant);
            let trial = binomial_cross(&pop[i].0, &mutant, config.crossover_cr, &mut rng);
            evals += 1;
            match objective.eval(&trial) {
                Ok(f) => {
                    if f <= pop[i].1 {
                        *slot = (trial, f);
                    }
                }
                Err(_) => {
                    let best = best_of(&pop).clone();
                    return TrialOutcome::invalid(seed, Some(&best), evals, init, history);
                }
            }
        }
        pop = next;
        history.push(best_of(&pop).1);
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
