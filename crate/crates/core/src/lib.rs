//! Core of an evolutionary benchmark generator that uses a language model as
//! its crossover and mutation operator.
//!
//! Candidate benchmarks are symbolic objective functions ([`expr`]). Each is
//! scored by how consistently one inner optimizer beats another on it
//! ([`optim`], [`fitness`]), and the population evolves through prompts sent
//! to a chat backend ([`llm`], [`engine`]). [`analysis`] characterizes the
//! resulting landscapes and lineages.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, HTTP and the
//! command line live in the companion `ebg` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod engine;
pub mod expr;
pub mod fitness;
pub mod llm;
pub mod optim;
pub mod seed;
