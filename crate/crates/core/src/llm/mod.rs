//! Language-model variation operators: prompt construction, response
//! sanitizing, pluggable chat backends, and the regenerate-on-invalid loop.

mod backend;
mod prompt;
mod sanitize;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{Expression, FunctionWhitelist};
use crate::fitness::{prevalidate, Algorithm};
use crate::optim::SearchSpace;
use crate::seed;

pub use backend::{
    prompt_digest, BackendError, ChatBackend, CompletionRequest, DecodingParams, ReplayBackend, ReplayMode,
    TranscriptEntry,
};
pub use prompt::{build_prompt, PromptError, PromptKind, PromptSpec, OPERATOR_LIST_TEXT};
pub use sanitize::{sanitize_response, Rejection};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts_per_offspring: usize,
    /// Draw new parents after an offspring exhausts its attempts.
    pub reselect_parents_on_failure: bool,
    /// Failed attempts allowed over a whole run before it aborts.
    pub global_failure_cap: usize,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts_per_offspring: 10,
            reselect_parents_on_failure: true,
            global_failure_cap: 500,
        }
    }
}

/// Everything an operator call needs besides its parents.
#[derive(Debug, Clone, Copy)]
pub struct OperatorSettings<'a> {
    pub a1: Algorithm,
    pub a2: Algorithm,
    pub whitelist: &'a FunctionWhitelist,
    pub decoding: &'a DecodingParams,
    pub space: &'a SearchSpace,
    pub prevalidation_samples: usize,
    pub policy: &'a RetryPolicy,
    /// Mixed with the running attempt count to seed pre-validation.
    pub seed: u64,
}

/// Run-wide attempt bookkeeping shared by every operator call.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptCounter {
    pub attempts: u64,
    pub failures: u64,
}

/// Why one attempt was thrown away.
#[derive(Debug, Clone, PartialEq)]
pub enum AttemptFailure {
    Rejected(Rejection),
    FailedPrevalidation,
    Backend(BackendError),
}

impl fmt::Display for AttemptFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttemptFailure::Rejected(r) => write!(f, "{r}"),
            AttemptFailure::FailedPrevalidation => f.write_str("failed pre-validation"),
            AttemptFailure::Backend(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Offspring {
    pub expression: Expression,
    pub attempts: usize,
    /// Rendered text equals one of the parents'.
    pub identical: bool,
    pub failures: Vec<AttemptFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OffspringError {
    /// Every attempt failed; the caller should reselect parents.
    Exhausted {
        attempts: usize,
        last: Option<AttemptFailure>,
    },
    /// The run-wide failure budget is spent.
    GlobalCapExceeded {
        failures: u64,
    },
    /// A backend failure that retrying cannot fix.
    Backend(BackendError),
    Prompt(PromptError),
}

impl fmt::Display for OffspringError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OffspringError::Exhausted { attempts, last } => {
                write!(f, "no valid offspring after {attempts} attempts")?;
                if let Some(last) = last {
                    write!(f, " (last: {last})")?;
                }
                Ok(())
            }
            OffspringError::GlobalCapExceeded { failures } => {
                write!(f, "run-wide failure cap exceeded after {failures} failed attempts")
            }
            OffspringError::Backend(e) => write!(f, "{e}"),
            OffspringError::Prompt(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for OffspringError {}

/// Asks the model for one offspring of `parents` (the in-context examples),
/// retrying until a response parses and passes pre-validation.
///
/// Crossover takes two parents, mutation one, initialization any nonzero
/// number of previously accepted members.
pub fn generate_offspring(
    kind: PromptKind,
    parents: &[&Expression],
    backend: &dyn ChatBackend,
    settings: &OperatorSettings<'_>,
    counter: &mut AttemptCounter,
) -> Result<Offspring, OffspringError> {
    let dimension = parents.first().map_or(settings.space.dimension, |p| p.dimension());
    let parent_texts: Vec<String> = parents.iter().map(|p| p.render()).collect();
    let spec = PromptSpec::new(
        kind,
        dimension,
        settings.a1.name(),
        settings.a2.name(),
        parent_texts.clone(),
    );
    let prompt = build_prompt(&spec).map_err(OffspringError::Prompt)?;
    let request = CompletionRequest {
        prompt: &prompt,
        params: settings.decoding,
    };
    let mut failures = Vec::new();
    let max = settings.policy.max_attempts_per_offspring.max(1);
    for attempt in 1..=max {
        counter.attempts += 1;
        let failure = match backend.complete(&request) {
            Err(e) if !e.is_retryable() => return Err(OffspringError::Backend(e)),
            Err(e) => AttemptFailure::Backend(e),
            Ok(raw) => match sanitize_response(&raw, dimension, settings.whitelist) {
                Err(r) => AttemptFailure::Rejected(r),
                Ok(expression) => {
                    let pv_seed = seed::derive(&[settings.seed, counter.attempts]);
                    if prevalidate(&expression, settings.space, settings.prevalidation_samples, pv_seed) {
                        let text = expression.render();
                        let identical = parent_texts.contains(&text);
                        return Ok(Offspring {
                            expression,
                            attempts: attempt,
                            identical,
                            failures,
                        });
                    }
                    AttemptFailure::FailedPrevalidation
                }
            },
        };
        counter.failures += 1;
        failures.push(failure);
        if counter.failures > settings.policy.global_failure_cap as u64 {
            return Err(OffspringError::GlobalCapExceeded {
                failures: counter.failures,
            });
        }
    }
    Err(OffspringError::Exhausted {
        attempts: max,
        last: failures.pop(),
    })
}
