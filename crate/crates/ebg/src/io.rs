//! JSON-lines helpers and the run directory layout.
//!
//! ```text
//! config.json             configuration snapshot
//! population.gen<k>.jsonl survivors of generation k, best first
//! benchmarks.jsonl        every benchmark created, in id order
//! lineage.jsonl           one operator event per created benchmark
//! transcript.jsonl        prompt/response log (record mode)
//! best.json               final best benchmark and per-generation trace
//! ```

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ebg_core::engine::{Benchmark, BenchmarkRecord, GenerationBest, LineageEvent, RunObserver, RunRecord};
use ebg_core::llm::AttemptCounter;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::Config;

pub const CONFIG_FILE: &str = "config.json";
pub const BENCHMARKS_FILE: &str = "benchmarks.jsonl";
pub const LINEAGE_FILE: &str = "lineage.jsonl";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const BEST_FILE: &str = "best.json";

pub fn population_file(generation: usize) -> String {
    format!("population.gen{generation}.jsonl")
}

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Reads one JSON value per nonblank line; errors carry the 1-based line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let io_err = |source| JsonlError::Io {
        path: path.to_owned(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| JsonlError::Parse {
            path: path.to_owned(),
            line: k + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)
}

/// Contents of `best.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSummary {
    pub complete: bool,
    pub error: Option<String>,
    pub best: Option<BenchmarkRecord>,
    pub best_per_generation: Vec<GenerationBest>,
    pub attempts: AttemptCounter,
    pub scored_benchmarks: u64,
    pub inner_trials: u64,
}

impl BestSummary {
    pub fn of(record: &RunRecord, error: Option<String>) -> Self {
        BestSummary {
            complete: record.complete,
            error,
            best: record.best().cloned().map(BenchmarkRecord::from),
            best_per_generation: record.best_per_generation.clone(),
            attempts: record.attempts.clone(),
            scored_benchmarks: record.scored_benchmarks,
            inner_trials: record.inner_trials,
        }
    }
}

struct LineSink(BufWriter<File>);

impl LineSink {
    fn create(path: &Path) -> std::io::Result<Self> {
        Ok(LineSink(BufWriter::new(File::create(path)?)))
    }

    fn push<T: Serialize>(&mut self, value: &T) -> Result<(), String> {
        serde_json::to_writer(&mut self.0, value)
            .map_err(|e| e.to_string())
            .and_then(|_| self.0.write_all(b"\n").map_err(|e| e.to_string()))
            .and_then(|_| self.0.flush().map_err(|e| e.to_string()))
    }
}

/// Persists a run as it progresses.
pub struct RunWriter {
    dir: PathBuf,
    benchmarks: LineSink,
    lineage: LineSink,
}

impl RunWriter {
    /// Creates `dir` if needed, removes files of an earlier run there and
    /// writes the configuration snapshot.
    pub fn create(dir: &Path, config: &Config) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        for entry in fs::read_dir(dir)? {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            if name.starts_with("population.gen") && name.ends_with(".jsonl") {
                fs::remove_file(dir.join(&*name))?;
            }
        }
        for stale in [BEST_FILE, TRANSCRIPT_FILE] {
            match fs::remove_file(dir.join(stale)) {
                Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(e),
                _ => {}
            }
        }
        fs::write(dir.join(CONFIG_FILE), config.to_pretty_json() + "\n")?;
        Ok(RunWriter {
            dir: dir.to_owned(),
            benchmarks: LineSink::create(&dir.join(BENCHMARKS_FILE))?,
            lineage: LineSink::create(&dir.join(LINEAGE_FILE))?,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn finish(&self, record: &RunRecord, error: Option<String>) -> std::io::Result<()> {
        write_json(&self.dir.join(BEST_FILE), &BestSummary::of(record, error))
    }
}

impl RunObserver for RunWriter {
    fn benchmark_created(&mut self, benchmark: &Benchmark) -> Result<(), String> {
        self.benchmarks.push(benchmark)
    }

    fn lineage_event(&mut self, event: &LineageEvent) -> Result<(), String> {
        self.lineage.push(event)
    }

    fn generation_finished(&mut self, generation: usize, population: &[&Benchmark]) -> Result<(), String> {
        write_jsonl(&self.dir.join(population_file(generation)), population.iter())
            .map_err(|e| format!("cannot write {}: {e}", population_file(generation)))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunLoadError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Lines(#[from] JsonlError),
    #[error("cannot read {path}: {message}")]
    Other { path: PathBuf, message: String },
    #[error("{0}")]
    Inconsistent(String),
}

/// Reads a run directory back into a record.
pub fn load_run(dir: &Path) -> Result<(Config, RunRecord), RunLoadError> {
    let config = Config::load(&dir.join(CONFIG_FILE))?;
    let benchmarks: Vec<Benchmark> = read_jsonl(&dir.join(BENCHMARKS_FILE))?;
    for (k, b) in benchmarks.iter().enumerate() {
        if b.id != k as u64 {
            return Err(RunLoadError::Inconsistent(format!(
                "{}: line {} holds id {}, expected {k}",
                BENCHMARKS_FILE,
                k + 1,
                b.id
            )));
        }
    }
    let lineage: Vec<LineageEvent> = read_jsonl(&dir.join(LINEAGE_FILE))?;
    for event in &lineage {
        let known = |id: u64| (id as usize) < benchmarks.len();
        if !known(event.child_id) || !event.parent_ids.iter().all(|p| known(*p) && *p < event.child_id) {
            return Err(RunLoadError::Inconsistent(format!(
                "{LINEAGE_FILE}: event for {} refers to unknown benchmarks",
                event.child_id
            )));
        }
    }
    let mut populations = Vec::new();
    while dir.join(population_file(populations.len())).exists() {
        let members: Vec<BenchmarkRecord> = read_jsonl(&dir.join(population_file(populations.len())))?;
        populations.push(members.into_iter().map(|m| m.id).collect::<Vec<u64>>());
    }
    let best_path = dir.join(BEST_FILE);
    let summary: Option<BestSummary> = if best_path.exists() {
        let text = fs::read_to_string(&best_path).map_err(|e| RunLoadError::Other {
            path: best_path.clone(),
            message: e.to_string(),
        })?;
        Some(serde_json::from_str(&text).map_err(|e| RunLoadError::Other {
            path: best_path.clone(),
            message: e.to_string(),
        })?)
    } else {
        None
    };
    let mut record = RunRecord {
        config: config.engine.clone(),
        populations,
        benchmarks,
        lineage,
        best_per_generation: Vec::new(),
        attempts: AttemptCounter::default(),
        scored_benchmarks: 0,
        inner_trials: 0,
        complete: false,
    };
    record.best_per_generation = (0..record.populations.len())
        .filter_map(|g| {
            record
                .population(g)
                .into_iter()
                .min_by(|a, b| a.fitness.total_cmp(&b.fitness).then(a.id.cmp(&b.id)))
                .map(|b| GenerationBest {
                    generation: g,
                    id: b.id,
                    fitness: b.fitness,
                    expression: b.expression.render(),
                })
        })
        .collect();
    if let Some(s) = summary {
        record.attempts = s.attempts;
        record.scored_benchmarks = s.scored_benchmarks;
        record.inner_trials = s.inner_trials;
        record.complete = s.complete;
    }
    Ok((config, record))
}
