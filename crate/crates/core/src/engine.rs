//! The generational loop: a seeded initial population grown by init prompts,
//! then crossover or mutation offspring each generation, scored by pooled
//! rank and filtered by elitist top-N survival.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::expr::{BinaryOp, Expression, FunctionWhitelist, Node};
use crate::fitness::{evaluate_benchmark, BenchmarkEvaluation, FitnessConfig, InnerConfigs};
use crate::llm::{
    generate_offspring, AttemptCounter, ChatBackend, DecodingParams, OffspringError, OperatorSettings, PromptKind,
    RetryPolicy,
};
use crate::seed::{self, StdRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub crossover_rate: f64,
    pub dimension: usize,
    pub fitness: FitnessConfig,
    pub inner: InnerConfigs,
    pub retry: RetryPolicy,
    /// Unary functions the sanitizer accepts, by name.
    pub functions: Vec<String>,
    /// Most recent members shown to an init prompt; all of them when `None`.
    pub max_init_examples: Option<usize>,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            population_size: 10,
            max_generations: 20,
            crossover_rate: 0.5,
            dimension: 5,
            fitness: FitnessConfig::default(),
            inner: InnerConfigs::default(),
            retry: RetryPolicy::default(),
            functions: FunctionWhitelist::default()
                .names()
                .into_iter()
                .map(String::from)
                .collect(),
            max_init_examples: None,
            seed: 0,
        }
    }
}

impl EngineConfig {
    /// Every violated constraint, as `field: message`.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.population_size < 2 {
            errors.push("engine.population_size: must be at least 2".into());
        }
        if self.max_generations < 1 {
            errors.push("engine.max_generations: must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            errors.push("engine.crossover_rate: must lie in [0, 1]".into());
        }
        if self.dimension < 1 {
            errors.push("engine.dimension: must be at least 1".into());
        }
        if self.inner.space.dimension != self.dimension {
            errors.push(format!(
                "engine.inner.space.dimension: {} differs from engine.dimension {}",
                self.inner.space.dimension, self.dimension
            ));
        }
        if let Err(e) = self.inner.space.validate() {
            errors.push(format!("engine.inner.space: {e}"));
        }
        if let Err(e) = self.inner.ga.validate() {
            errors.push(format!("engine.inner.ga: {e}"));
        }
        if let Err(e) = self.inner.de.validate() {
            errors.push(format!("engine.inner.de: {e}"));
        }
        if let Err(e) = self.fitness.validate() {
            errors.push(format!("engine.fitness: {e}"));
        }
        if self.retry.max_attempts_per_offspring == 0 {
            errors.push("engine.retry.max_attempts_per_offspring: must be at least 1".into());
        }
        if let Err(name) = self.whitelist() {
            errors.push(format!("engine.functions: unknown function \"{name}\""));
        }
        if self.max_init_examples == Some(0) {
            errors.push("engine.max_init_examples: must be at least 1 when set".into());
        }
        errors
    }

    pub fn whitelist(&self) -> Result<FunctionWhitelist, String> {
        FunctionWhitelist::from_names(self.functions.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Seed,
    InitLlm,
    Crossover,
    Mutation,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::Seed => "seed",
            Origin::InitLlm => "init_llm",
            Origin::Crossover => "crossover",
            Origin::Mutation => "mutation",
        }
    }
}

/// One individual. `parent_ids` holds the two crossover parents, the single
/// mutation parent, or for init members the earlier members shown as
/// examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "BenchmarkRecord", try_from = "BenchmarkRecord")]
pub struct Benchmark {
    pub id: u64,
    pub expression: Expression,
    pub fitness: f64,
    pub evaluation: BenchmarkEvaluation,
    pub generation_created: usize,
    pub origin: Origin,
    pub parent_ids: Vec<u64>,
}

/// Flat on-disk form of a [`Benchmark`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub id: u64,
    pub expression: String,
    pub dimension: usize,
    pub fitness: f64,
    pub rank_term: f64,
    pub penalty_term: f64,
    pub generation_created: usize,
    pub origin: Origin,
    pub parent_ids: Vec<u64>,
    pub evaluation: BenchmarkEvaluation,
}

impl From<Benchmark> for BenchmarkRecord {
    fn from(b: Benchmark) -> Self {
        BenchmarkRecord {
            id: b.id,
            expression: b.expression.render(),
            dimension: b.expression.dimension(),
            fitness: b.fitness,
            rank_term: b.evaluation.rank_term,
            penalty_term: b.evaluation.penalty_term,
            generation_created: b.generation_created,
            origin: b.origin,
            parent_ids: b.parent_ids,
            evaluation: b.evaluation,
        }
    }
}

impl TryFrom<BenchmarkRecord> for Benchmark {
    type Error = String;

    fn try_from(r: BenchmarkRecord) -> Result<Self, String> {
        let expression = Expression::parse(&r.expression, r.dimension, &FunctionWhitelist::default())
            .map_err(|e| format!("benchmark {}: {e}", r.id))?;
        Ok(Benchmark {
            id: r.id,
            expression,
            fitness: r.fitness,
            evaluation: r.evaluation,
            generation_created: r.generation_created,
            origin: r.origin,
            parent_ids: r.parent_ids,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageEvent {
    pub child_id: u64,
    pub kind: Origin,
    pub parent_ids: Vec<u64>,
    pub attempts: usize,
    pub identical: bool,
    pub generation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationBest {
    pub generation: usize,
    pub id: u64,
    pub fitness: f64,
    pub expression: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: EngineConfig,
    /// Member ids of each generation, in survivor order.
    pub populations: Vec<Vec<u64>>,
    /// Every benchmark created, in id order.
    pub benchmarks: Vec<Benchmark>,
    pub lineage: Vec<LineageEvent>,
    pub best_per_generation: Vec<GenerationBest>,
    pub attempts: AttemptCounter,
    /// Benchmarks actually scored (cache misses).
    pub scored_benchmarks: u64,
    pub inner_trials: u64,
    pub complete: bool,
}

impl RunRecord {
    pub fn benchmark(&self, id: u64) -> Option<&Benchmark> {
        self.benchmarks
            .binary_search_by_key(&id, |b| b.id)
            .ok()
            .map(|k| &self.benchmarks[k])
    }

    pub fn population(&self, generation: usize) -> Vec<&Benchmark> {
        self.populations
            .get(generation)
            .map(|ids| ids.iter().filter_map(|id| self.benchmark(*id)).collect())
            .unwrap_or_default()
    }

    pub fn best(&self) -> Option<&Benchmark> {
        self.best_per_generation.last().and_then(|b| self.benchmark(b.id))
    }
}

/// Scores a batch of expressions. Implementations may run the `2T` trials of
/// each in parallel but must return evaluations in input order.
pub trait Scorer {
    fn score(
        &self,
        expressions: &[&Expression],
        fitness: &FitnessConfig,
        inner: &InnerConfigs,
    ) -> Vec<BenchmarkEvaluation>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SequentialScorer;

impl Scorer for SequentialScorer {
    fn score(
        &self,
        expressions: &[&Expression],
        fitness: &FitnessConfig,
        inner: &InnerConfigs,
    ) -> Vec<BenchmarkEvaluation> {
        expressions
            .iter()
            .map(|e| evaluate_benchmark(e, fitness, inner))
            .collect()
    }
}

/// Receives run progress as it happens, e.g. to persist it.
pub trait RunObserver {
    fn benchmark_created(&mut self, _benchmark: &Benchmark) -> Result<(), String> {
        Ok(())
    }

    fn lineage_event(&mut self, _event: &LineageEvent) -> Result<(), String> {
        Ok(())
    }

    /// Called once per generation, after survivor selection.
    fn generation_finished(&mut self, _generation: usize, _population: &[&Benchmark]) -> Result<(), String> {
        Ok(())
    }
}

pub struct NoObserver;

impl RunObserver for NoObserver {}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    Config(Vec<String>),
    Operator(OffspringError),
    Observer(String),
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Config(errors) => write!(f, "invalid configuration: {}", errors.join("; ")),
            EngineError::Operator(e) => write!(f, "{e}"),
            EngineError::Observer(e) => write!(f, "observer failed: {e}"),
        }
    }
}

impl core::error::Error for EngineError {}

/// A run that stopped early, with everything recorded up to that point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunAbort {
    pub error: EngineError,
    pub partial: Box<RunRecord>,
}

impl fmt::Display for RunAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "run aborted after {} generation(s): {}",
            self.partial.populations.len(),
            self.error
        )
    }
}

impl core::error::Error for RunAbort {}

/// `x[0] + x[1]**2 + ... + x[D-1]**D`.
pub fn seed_expression(dimension: usize) -> Expression {
    assert!(dimension >= 1, "dimension must be positive");
    let term = |i: usize| {
        if i == 0 {
            Node::var(0)
        } else {
            Node::binary(BinaryOp::Pow, Node::var(i), Node::constant((i + 1) as f64))
        }
    };
    let root = (1..dimension).fold(term(0), |acc, i| Node::binary(BinaryOp::Add, acc, term(i)));
    Expression::from_node(root, dimension).expect("indices below dimension")
}

/// Top `n` by ascending fitness, ties to the lower id, in that order.
pub fn select_survivors(mut union: Vec<Benchmark>, n: usize) -> Vec<Benchmark> {
    union.sort_by(|a, b| a.fitness.total_cmp(&b.fitness).then(a.id.cmp(&b.id)));
    union.truncate(n);
    union
}

/// Mutable state of one run.
pub struct Engine<'a> {
    config: &'a EngineConfig,
    decoding: &'a DecodingParams,
    whitelist: FunctionWhitelist,
    backend: &'a dyn ChatBackend,
    scorer: &'a dyn Scorer,
    observer: &'a mut dyn RunObserver,
    rng: StdRng,
    cache: BTreeMap<String, BenchmarkEvaluation>,
    record: RunRecord,
}

impl<'a> Engine<'a> {
    pub fn new(
        config: &'a EngineConfig,
        decoding: &'a DecodingParams,
        backend: &'a dyn ChatBackend,
        scorer: &'a dyn Scorer,
        observer: &'a mut dyn RunObserver,
    ) -> Result<Self, EngineError> {
        let errors = config.validate();
        if !errors.is_empty() {
            return Err(EngineError::Config(errors));
        }
        let whitelist = config.whitelist().map_err(|e| EngineError::Config(alloc::vec![e]))?;
        Ok(Engine {
            config,
            decoding,
            whitelist,
            backend,
            scorer,
            observer,
            rng: seed::rng(seed::derive(&[config.seed, 0x454E_4749_4E45])),
            cache: BTreeMap::new(),
            record: RunRecord {
                config: config.clone(),
                populations: Vec::new(),
                benchmarks: Vec::new(),
                lineage: Vec::new(),
                best_per_generation: Vec::new(),
                attempts: AttemptCounter::default(),
                scored_benchmarks: 0,
                inner_trials: 0,
                complete: false,
            },
        })
    }

    pub fn record(&self) -> &RunRecord {
        &self.record
    }

    pub fn into_record(self) -> RunRecord {
        self.record
    }

    fn settings(&self) -> OperatorSettings<'_> {
        OperatorSettings {
            a1: self.config.fitness.a1,
            a2: self.config.fitness.a2,
            whitelist: &self.whitelist,
            decoding: self.decoding,
            space: &self.config.inner.space,
            prevalidation_samples: self.config.fitness.prevalidation_samples,
            policy: &self.config.retry,
            seed: seed::derive(&[self.config.seed, 0x5052_4556]),
        }
    }

    fn offspring(
        &mut self,
        kind: PromptKind,
        parents: &[&Expression],
    ) -> Result<crate::llm::Offspring, OffspringError> {
        let mut counter = self.record.attempts.clone();
        let settings = self.settings();
        let out = generate_offspring(kind, parents, self.backend, &settings, &mut counter);
        self.record.attempts = counter;
        out
    }

    /// Scores `pending` (cache first) and stores them as new benchmarks.
    fn admit(&mut self, pending: Vec<(Expression, Origin, Vec<u64>, usize)>) -> Result<Vec<u64>, EngineError> {
        let mut misses: Vec<&Expression> = Vec::new();
        let mut miss_keys: Vec<String> = Vec::new();
        for (expr, ..) in &pending {
            let key = expr.render();
            if !self.cache.contains_key(&key) && !miss_keys.contains(&key) {
                misses.push(expr);
                miss_keys.push(key);
            }
        }
        let evaluations = self.scorer.score(&misses, &self.config.fitness, &self.config.inner);
        self.record.scored_benchmarks += misses.len() as u64;
        self.record.inner_trials += (misses.len() * 2 * self.config.fitness.trials) as u64;
        for (key, evaluation) in miss_keys.into_iter().zip(evaluations) {
            self.cache.insert(key, evaluation);
        }
        let mut ids = Vec::with_capacity(pending.len());
        for (expression, origin, parent_ids, generation_created) in pending {
            let evaluation = self.cache[&expression.render()].clone();
            let benchmark = Benchmark {
                id: self.record.benchmarks.len() as u64,
                expression,
                fitness: evaluation.fitness,
                evaluation,
                generation_created,
                origin,
                parent_ids,
            };
            self.observer
                .benchmark_created(&benchmark)
                .map_err(EngineError::Observer)?;
            ids.push(benchmark.id);
            self.record.benchmarks.push(benchmark);
        }
        Ok(ids)
    }

    fn push_event(&mut self, event: LineageEvent) -> Result<(), EngineError> {
        self.observer.lineage_event(&event).map_err(EngineError::Observer)?;
        self.record.lineage.push(event);
        Ok(())
    }

    fn finish_generation(&mut self, generation: usize, members: Vec<u64>) -> Result<(), EngineError> {
        let population: Vec<&Benchmark> = members.iter().map(|id| &self.record.benchmarks[*id as usize]).collect();
        let best = population
            .iter()
            .min_by(|a, b| a.fitness.total_cmp(&b.fitness).then(a.id.cmp(&b.id)))
            .expect("population is nonempty");
        let entry = GenerationBest {
            generation,
            id: best.id,
            fitness: best.fitness,
            expression: best.expression.render(),
        };
        self.observer
            .generation_finished(generation, &population)
            .map_err(EngineError::Observer)?;
        self.record.best_per_generation.push(entry);
        self.record.populations.push(members);
        Ok(())
    }

    /// Generation 0: the seed function, then `N - 1` init-prompt members,
    /// each conditioned on the members accepted before it.
    pub fn initialize_population(&mut self) -> Result<(), EngineError> {
        let n = self.config.population_size;
        let mut exprs: Vec<Expression> = alloc::vec![seed_expression(self.config.dimension)];
        let mut events = Vec::new();
        while exprs.len() < n {
            let from = match self.config.max_init_examples {
                Some(cap) => exprs.len().saturating_sub(cap),
                None => 0,
            };
            let examples: Vec<&Expression> = exprs[from..].iter().collect();
            let base = self.record.benchmarks.len() as u64;
            match self.offspring(PromptKind::Init, &examples) {
                Ok(child) => {
                    events.push(LineageEvent {
                        child_id: base + exprs.len() as u64,
                        kind: Origin::InitLlm,
                        parent_ids: (from..exprs.len()).map(|k| base + k as u64).collect(),
                        attempts: child.attempts,
                        identical: child.identical,
                        generation: 0,
                    });
                    exprs.push(child.expression);
                }
                Err(OffspringError::Exhausted { .. }) => continue,
                Err(e) => {
                    self.admit_partial_init(exprs, &events)?;
                    return Err(EngineError::Operator(e));
                }
            }
        }
        let pending = exprs
            .into_iter()
            .enumerate()
            .map(|(k, e)| {
                let (origin, parents) = match k {
                    0 => (Origin::Seed, Vec::new()),
                    _ => (Origin::InitLlm, events[k - 1].parent_ids.clone()),
                };
                (e, origin, parents, 0)
            })
            .collect();
        let ids = self.admit(pending)?;
        for event in events {
            self.push_event(event)?;
        }
        self.finish_generation(0, ids)
    }

    /// Keeps what initialization produced before an abort, unscored members
    /// included, so the partial record shows how far it got.
    fn admit_partial_init(&mut self, exprs: Vec<Expression>, events: &[LineageEvent]) -> Result<(), EngineError> {
        let pending = exprs
            .into_iter()
            .enumerate()
            .map(|(k, e)| {
                let (origin, parents) = match k {
                    0 => (Origin::Seed, Vec::new()),
                    _ => (Origin::InitLlm, events[k - 1].parent_ids.clone()),
                };
                (e, origin, parents, 0)
            })
            .collect();
        self.admit(pending)?;
        for event in events {
            self.push_event(event.clone())?;
        }
        Ok(())
    }

    /// Generation `g`: `N` offspring by crossover (probability `p_c`, two
    /// distinct parents) or mutation, then top-N survival over parents and
    /// offspring.
    pub fn step_generation(&mut self, generation: usize) -> Result<(), EngineError> {
        let parents_ids = self.record.populations.last().expect("initialized").clone();
        let n = parents_ids.len();
        let mut children: Vec<(Expression, Origin, Vec<u64>, usize)> = Vec::with_capacity(n);
        let mut events = Vec::with_capacity(n);
        let next_id = self.record.benchmarks.len() as u64;
        let mut outcome = Ok(());
        'offspring: while children.len() < n {
            let crossover = self.rng.random::<f64>() < self.config.crossover_rate;
            let picked: Vec<u64> = if crossover {
                let a = self.rng.random_range(0..n);
                let mut b = self.rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                alloc::vec![parents_ids[a], parents_ids[b]]
            } else {
                alloc::vec![parents_ids[self.rng.random_range(0..n)]]
            };
            let (kind, origin) = if crossover {
                (PromptKind::Crossover, Origin::Crossover)
            } else {
                (PromptKind::Mutation, Origin::Mutation)
            };
            loop {
                let exprs: Vec<Expression> = picked
                    .iter()
                    .map(|id| self.record.benchmarks[*id as usize].expression.clone())
                    .collect();
                let refs: Vec<&Expression> = exprs.iter().collect();
                match self.offspring(kind, &refs) {
                    Ok(child) => {
                        events.push(LineageEvent {
                            child_id: next_id + children.len() as u64,
                            kind: origin,
                            parent_ids: picked.clone(),
                            attempts: child.attempts,
                            identical: child.identical,
                            generation,
                        });
                        children.push((child.expression, origin, picked, generation));
                        continue 'offspring;
                    }
                    Err(OffspringError::Exhausted { .. }) if self.config.retry.reselect_parents_on_failure => {
                        continue 'offspring;
                    }
                    Err(OffspringError::Exhausted { .. }) => continue,
                    Err(e) => {
                        outcome = Err(EngineError::Operator(e));
                        break 'offspring;
                    }
                }
            }
        }
        let child_ids = self.admit(children)?;
        for event in events {
            self.push_event(event)?;
        }
        outcome?;
        let union: Vec<Benchmark> = parents_ids
            .iter()
            .chain(&child_ids)
            .map(|id| self.record.benchmarks[*id as usize].clone())
            .collect();
        let survivors = select_survivors(union, n).into_iter().map(|b| b.id).collect();
        self.finish_generation(generation, survivors)
    }

    /// Initialization plus `max_generations - 1` generation steps.
    pub fn run(mut self) -> Result<RunRecord, RunAbort> {
        let result = (|| {
            self.initialize_population()?;
            for g in 1..self.config.max_generations {
                self.step_generation(g)?;
            }
            Ok(())
        })();
        match result {
            Ok(()) => {
                self.record.complete = true;
                Ok(self.record)
            }
            Err(error) => Err(RunAbort {
                error,
                partial: Box::new(self.record),
            }),
        }
    }
}

/// Runs the whole loop with no observer.
pub fn run(
    config: &EngineConfig,
    decoding: &DecodingParams,
    backend: &dyn ChatBackend,
    scorer: &dyn Scorer,
) -> Result<RunRecord, RunAbort> {
    let mut observer = NoObserver;
    match Engine::new(config, decoding, backend, scorer, &mut observer) {
        Ok(engine) => engine.run(),
        Err(error) => Err(RunAbort {
            error,
            partial: Box::new(RunRecord {
                config: config.clone(),
                populations: Vec::new(),
                benchmarks: Vec::new(),
                lineage: Vec::new(),
                best_per_generation: Vec::new(),
                attempts: AttemptCounter::default(),
                scored_benchmarks: 0,
                inner_trials: 0,
                complete: false,
            }),
        }),
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
