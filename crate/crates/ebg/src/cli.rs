//! Command-line entry points. Exit codes: 0 success, 1 invalid input or
//! configuration, 2 a run or analysis that aborted.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ebg_core::analysis::{
    aggregate, convergence_traces, curvature_features, distance_matrix, generation_summary, lineage_stats, mds_embed,
    sobol_indices, CurvatureFeatures, SobolResult,
};
use ebg_core::engine::Scorer;
use ebg_core::engine::{Benchmark, Engine, RunRecord};
use ebg_core::expr::{Expression, FunctionWhitelist};
use ebg_core::fitness::BenchmarkEvaluation;
use ebg_core::llm::{sanitize_response, ChatBackend, ReplayMode};
use ebg_core::seed;
use serde::Serialize;

use crate::backend::{load_replay, HttpBackend, RecordingBackend};
use crate::config::{BackendMode, Config};
use crate::io::{self, load_run, write_json, RunWriter};
use crate::report;
use crate::scorer::ParallelScorer;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_ABORT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ebg",
    version,
    about = "Evolve optimization benchmarks with a language model as the variation operator"
)]
pub struct Cli {
    /// Print the full default configuration as JSON and exit.
    #[arg(long)]
    pub print_default_config: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the evolutionary loop and write a run directory.
    Generate(GenerateArgs),
    /// Score one expression with the pooled-rank fitness.
    Evaluate(EvaluateArgs),
    /// Sobol indices and curvature features of an expression or a run's best.
    Analyze(AnalyzeArgs),
    /// Edit distances, MDS layout, operator statistics and a DOT graph of a run.
    Lineage(LineageArgs),
    /// Per-generation fitness table and per-trial convergence traces of a run.
    Trajectories(TrajectoryArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration file; defaults apply to anything it omits.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for inner-optimizer trials (0: all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `engine.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Answer prompts from this transcript instead of calling an endpoint.
    #[arg(long, conflicts_with = "record")]
    pub replay: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub replay_mode: Option<ReplayModeArg>,
    /// Call the endpoint and log every exchange to `<out>/transcript.jsonl`.
    #[arg(long)]
    pub record: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReplayModeArg {
    Strict,
    Fuzzy,
}

#[derive(Debug, Args)]
#[group(id = "target", required = true, multiple = false)]
pub struct ExprSource {
    #[arg(long, group = "target")]
    pub expr: Option<String>,
    /// File whose first expression line is scored.
    #[arg(long, group = "target")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub source: ExprSource,
    #[command(flatten)]
    pub common: Common,
    /// Overrides `engine.fitness.base_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `engine.fitness.trials`.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum What {
    Sobol,
    Curvature,
    Both,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, conflicts_with = "run")]
    pub expr: Option<String>,
    /// Analyze the final best benchmark of this run (or `--id`).
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long, requires = "run")]
    pub id: Option<u64>,
    #[arg(long, value_enum, default_value = "both")]
    pub what: What,
    #[command(flatten)]
    pub common: Common,
    /// Overrides `analysis.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to the run directory or `.`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LineageArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrajectoryArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Benchmarks to trace; defaults to the final population.
    #[arg(long, value_delimiter = ',')]
    pub ids: Vec<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

/// A failed command: message plus exit code.
struct Failure {
    code: i32,
    message: String,
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        message: message.into(),
    }
}

fn abort(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_ABORT,
        message: message.into(),
    }
}

type Outcome = Result<(), Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, S>(args: I, env: &dyn Fn(&str) -> Option<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    if cli.print_default_config {
        let _ = writeln!(out, "{}", Config::default().to_pretty_json());
        return EXIT_OK;
    }
    let Some(command) = cli.command else {
        let _ = writeln!(err, "no command given; see --help");
        return EXIT_INVALID;
    };
    let result = match command {
        Command::Generate(a) => generate(a, env, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Analyze(a) => analyze(a, out),
        Command::Lineage(a) => lineage(a, out),
        Command::Trajectories(a) => trajectories(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    match path {
        Some(p) => Config::load(p).map_err(|e| invalid(e.to_string())),
        None => Ok(Config::default()),
    }
}

fn report_errors(errors: Vec<String>) -> Outcome {
    if errors.is_empty() {
        Ok(())
    } else {
        Err(invalid(format!("invalid configuration:\n  {}", errors.join("\n  "))))
    }
}

fn scorer(workers: usize) -> Result<ParallelScorer, Failure> {
    ParallelScorer::new(workers).map_err(|e| abort(format!("cannot start worker pool: {e}")))
}

fn generate(a: GenerateArgs, env: &dyn Fn(&str) -> Option<String>, out: &mut dyn Write) -> Outcome {
    let mut config = load_config(a.common.config.as_deref())?;
    config.apply_env(env);
    if let Some(s) = a.seed {
        config.engine.seed = s;
    }
    if let Some(t) = a.replay {
        config.backend.mode = BackendMode::Replay;
        config.backend.transcript = Some(t);
    }
    if a.record {
        config.backend.mode = BackendMode::Record;
    }
    if let Some(m) = a.replay_mode {
        config.backend.replay_mode = match m {
            ReplayModeArg::Strict => ReplayMode::Strict,
            ReplayModeArg::Fuzzy => ReplayMode::Fuzzy,
        };
    }
    report_errors(config.validate())?;

    // load the transcript before the writer clears the output directory
    let replay = match (&config.backend.mode, &config.backend.transcript) {
        (BackendMode::Replay, Some(path)) => {
            Some(load_replay(path, config.backend.replay_mode).map_err(|e| invalid(e.to_string()))?)
        }
        _ => None,
    };
    let mut writer = RunWriter::create(&a.out, &config)
        .map_err(|e| abort(format!("cannot create run directory {}: {e}", a.out.display())))?;
    let backend: Box<dyn ChatBackend> = match (config.backend.mode, replay) {
        (BackendMode::Replay, Some(r)) => Box::new(r),
        (BackendMode::Record, _) => {
            let live = HttpBackend::from_config(&config.backend).map_err(invalid)?;
            Box::new(
                RecordingBackend::create(live, &a.out.join(io::TRANSCRIPT_FILE))
                    .map_err(|e| abort(format!("cannot create transcript: {e}")))?,
            )
        }
        _ => Box::new(HttpBackend::from_config(&config.backend).map_err(invalid)?),
    };
    let scorer = scorer(a.common.workers)?;
    let decoding = config.backend.decoding();
    let engine_config = config.engine.clone();
    let engine = Engine::new(&engine_config, &decoding, backend.as_ref(), &scorer, &mut writer)
        .map_err(|e| invalid(e.to_string()))?;
    match engine.run() {
        Ok(record) => {
            writer
                .finish(&record, None)
                .map_err(|e| abort(format!("cannot write {}: {e}", io::BEST_FILE)))?;
            let best = record.best().expect("a finished run has a best benchmark");
            let _ = writeln!(out, "best fitness: {}", best.fitness);
            let _ = writeln!(out, "best expression: {}", best.expression);
            let _ = writeln!(out, "run directory: {}", a.out.display());
            Ok(())
        }
        Err(stop) => {
            let _ = writer.finish(&stop.partial, Some(stop.error.to_string()));
            Err(abort(stop.to_string()))
        }
    }
}

fn read_expression(source: &ExprSource, dimension: usize, wl: &FunctionWhitelist) -> Result<Expression, Failure> {
    let text = match (&source.expr, &source.file) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => fs::read_to_string(p).map_err(|e| invalid(format!("cannot read {}: {e}", p.display())))?,
        (None, None) => return Err(invalid("give --expr or --file")),
    };
    sanitize_response(&text, dimension, wl).map_err(|e| invalid(format!("cannot use expression: {e}")))
}

/// The first invalid sample pre-validation would hit, if any.
fn prevalidation_failure(expr: &Expression, config: &Config) -> Option<String> {
    let space = &config.engine.inner.space;
    let mut rng = seed::rng(config.engine.fitness.base_seed);
    (0..config.engine.fitness.prevalidation_samples).find_map(|_| {
        let x = space.sample_uniform(&mut rng);
        expr.evaluate(&x).err().map(|cause| format!("{cause} at {x:?}"))
    })
}

#[derive(Serialize)]
struct EvaluationReport<'a> {
    expression: String,
    a1: &'a str,
    a2: &'a str,
    trials: usize,
    base_seed: u64,
    #[serde(flatten)]
    evaluation: &'a BenchmarkEvaluation,
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Outcome {
    let mut config = load_config(a.common.config.as_deref())?;
    if let Some(s) = a.seed {
        config.engine.fitness.base_seed = s;
    }
    if let Some(t) = a.trials {
        config.engine.fitness.trials = t;
    }
    report_errors(config.engine.validate())?;
    let wl = config.engine.whitelist().map_err(invalid)?;
    let expr = read_expression(&a.source, config.engine.dimension, &wl)?;
    if let Some(why) = prevalidation_failure(&expr, &config) {
        return Err(invalid(format!("pre-validation failed for {expr}: {why}")));
    }
    let scorer = scorer(a.common.workers)?;
    let f = &config.engine.fitness;
    let evaluation = scorer
        .score(&[&expr], f, &config.engine.inner)
        .pop()
        .expect("one evaluation per expression");

    let _ = writeln!(out, "expression: {expr}");
    let _ = writeln!(out, "fitness: {}", evaluation.fitness);
    let _ = writeln!(out, "rank term: {}", evaluation.rank_term);
    let _ = writeln!(out, "penalty term: {}", evaluation.penalty_term);
    if evaluation.any_invalid {
        let _ = writeln!(out, "a trial hit an invalid value; fitness is the invalid penalty");
    }
    let _ = writeln!(out, "{:>5}  {:>22}  {:>22}", "trial", f.a1.name(), f.a2.name());
    for (k, (x, y)) in evaluation.a1_bests.iter().zip(&evaluation.a2_bests).enumerate() {
        let _ = writeln!(out, "{k:>5}  {x:>22.12e}  {y:>22.12e}");
    }
    fs::create_dir_all(&a.out).map_err(|e| abort(format!("cannot create {}: {e}", a.out.display())))?;
    let report = EvaluationReport {
        expression: expr.render(),
        a1: f.a1.name(),
        a2: f.a2.name(),
        trials: f.trials,
        base_seed: f.base_seed,
        evaluation: &evaluation,
    };
    write_json(&a.out.join("evaluation.json"), &report).map_err(|e| abort(format!("cannot write evaluation.json: {e}")))
}

#[derive(Serialize)]
struct SobolReport<'a> {
    expression: String,
    benchmark_id: Option<u64>,
    seed: u64,
    #[serde(flatten)]
    result: &'a SobolResult,
}

#[derive(Serialize)]
struct CurvatureReport<'a> {
    expression: String,
    benchmark_id: Option<u64>,
    seed: u64,
    #[serde(flatten)]
    result: &'a CurvatureFeatures,
}

fn load_run_or_invalid(dir: &Path) -> Result<(Config, RunRecord), Failure> {
    load_run(dir).map_err(|e| invalid(format!("cannot load run {}: {e}", dir.display())))
}

fn analyze(a: AnalyzeArgs, out: &mut dyn Write) -> Outcome {
    let (mut config, expr, id, out_dir) = match (&a.expr, &a.run) {
        (Some(text), None) => {
            let config = load_config(a.common.config.as_deref())?;
            let wl = config.engine.whitelist().map_err(invalid)?;
            let source = ExprSource {
                expr: Some(text.clone()),
                file: None,
            };
            let expr = read_expression(&source, config.engine.dimension, &wl)?;
            (config, expr, None, a.out.clone().unwrap_or_else(|| PathBuf::from(".")))
        }
        (None, Some(dir)) => {
            let (mut config, record) = load_run_or_invalid(dir)?;
            if let Some(p) = &a.common.config {
                config.analysis = load_config(Some(p))?.analysis;
            }
            let b = match a.id {
                Some(id) => record
                    .benchmark(id)
                    .ok_or_else(|| invalid(format!("no benchmark {id} in run")))?,
                None => record.best().ok_or_else(|| invalid("run has no finished generation"))?,
            };
            (
                config,
                b.expression.clone(),
                Some(b.id),
                a.out.clone().unwrap_or_else(|| dir.clone()),
            )
        }
        _ => return Err(invalid("give exactly one of --expr or --run")),
    };
    if let Some(s) = a.seed {
        config.analysis.seed = s;
    }
    report_errors(config.validate_analysis())?;
    fs::create_dir_all(&out_dir).map_err(|e| abort(format!("cannot create {}: {e}", out_dir.display())))?;
    let space = config.engine.inner.space;
    let an = &config.analysis;
    let _ = writeln!(out, "expression: {expr}");
    if matches!(a.what, What::Sobol | What::Both) {
        let r = sobol_indices(&expr, &space, an.sobol_base_samples, seed::derive(&[an.seed, 1]))
            .map_err(|e| abort(format!("Sobol analysis stopped: {e}")))?;
        let _ = writeln!(out, "total variance: {}", r.total_variance);
        let _ = writeln!(out, "{:>4}  {:>12}  {:>12}", "var", "first", "total");
        for (i, (s, t)) in r.first_order.iter().zip(&r.total_order).enumerate() {
            let _ = writeln!(out, "{:>4}  {s:>12.6}  {t:>12.6}", format!("x[{i}]"));
        }
        let rep = SobolReport {
            expression: expr.render(),
            benchmark_id: id,
            seed: an.seed,
            result: &r,
        };
        write_json(&out_dir.join("sobol.json"), &rep).map_err(|e| abort(format!("cannot write sobol.json: {e}")))?;
    }
    if matches!(a.what, What::Curvature | What::Both) {
        let r = curvature_features(
            &expr,
            &space,
            an.curvature_points,
            an.fd_steps,
            seed::derive(&[an.seed, 2]),
        )
        .map_err(|e| abort(format!("curvature analysis stopped: {e}")))?;
        let _ = writeln!(out, "gradient ratio median: {}", r.grad_ratio_median);
        let _ = writeln!(
            out,
            "Hessian condition lower quartile: {}",
            r.hessian_cond_lower_quartile
        );
        let rep = CurvatureReport {
            expression: expr.render(),
            benchmark_id: id,
            seed: an.seed,
            result: &r,
        };
        write_json(&out_dir.join("curvature.json"), &rep)
            .map_err(|e| abort(format!("cannot write curvature.json: {e}")))?;
    }
    Ok(())
}

fn lineage(a: LineageArgs, out: &mut dyn Write) -> Outcome {
    let (_, record) = load_run_or_invalid(&a.run)?;
    let best = record.best().ok_or_else(|| invalid("run has no finished generation"))?;
    let out_dir = a.out.clone().unwrap_or_else(|| a.run.clone());
    fs::create_dir_all(&out_dir).map_err(|e| abort(format!("cannot create {}: {e}", out_dir.display())))?;
    let write_err = |name: &str, e: &dyn std::fmt::Display| abort(format!("cannot write {name}: {e}"));

    let ids: Vec<u64> = record.benchmarks.iter().map(|b| b.id).collect();
    let texts: Vec<String> = record.benchmarks.iter().map(|b| b.expression.render()).collect();
    let d = distance_matrix(&texts);
    report::write_distances(&out_dir.join("distances.csv"), &ids, &d).map_err(|e| write_err("distances.csv", &e))?;
    let points = mds_embed(&d, ids.len(), 2).map_err(|e| abort(format!("MDS failed: {e}")))?;
    report::write_embedding(&out_dir.join("embedding.csv"), &ids, &points)
        .map_err(|e| write_err("embedding.csv", &e))?;

    let stats = lineage_stats(&record.benchmarks, &record.lineage, best.id).map_err(|e| invalid(e.to_string()))?;
    let summary = aggregate(vec![stats.clone()]);
    write_json(&out_dir.join("operator_stats.json"), &summary).map_err(|e| write_err("operator_stats.json", &e))?;
    fs::write(out_dir.join("lineage.dot"), report::lineage_dot(&record)).map_err(|e| write_err("lineage.dot", &e))?;

    let _ = writeln!(out, "benchmarks: {}", ids.len());
    let _ = writeln!(out, "best: {} (fitness {})", best.id, best.fitness);
    let _ = writeln!(out, "lineage individuals: {}", stats.individuals);
    let _ = writeln!(
        out,
        "genetic operations: {} ({} crossover, {} mutation)",
        stats.operations(),
        stats.crossovers,
        stats.mutations
    );
    if stats.ratio_defined {
        let _ = writeln!(out, "crossover ratio: {}", stats.crossover_ratio);
    } else {
        let _ = writeln!(out, "crossover ratio: undefined (no genetic operations)");
    }
    Ok(())
}

fn trajectories(a: TrajectoryArgs, out: &mut dyn Write) -> Outcome {
    let (config, record) = load_run_or_invalid(&a.run)?;
    let out_dir = a.out.clone().unwrap_or_else(|| a.run.join("trajectories"));
    fs::create_dir_all(&out_dir).map_err(|e| abort(format!("cannot create {}: {e}", out_dir.display())))?;
    report::write_generations(&out_dir.join("generations.csv"), &generation_summary(&record))
        .map_err(|e| abort(format!("cannot write generations.csv: {e}")))?;

    let chosen: Vec<&Benchmark> = if a.ids.is_empty() {
        record
            .populations
            .last()
            .map(|_| record.population(record.populations.len() - 1))
            .unwrap_or_default()
    } else {
        a.ids
            .iter()
            .map(|id| {
                record
                    .benchmark(*id)
                    .ok_or_else(|| invalid(format!("no benchmark {id} in run")))
            })
            .collect::<Result<_, _>>()?
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.workers)
        .build()
        .map_err(|e| abort(format!("cannot start worker pool: {e}")))?;
    let engine = &config.engine;
    let traces: Vec<_> = pool.install(|| {
        use rayon::prelude::*;
        chosen
            .par_iter()
            .map(|b| convergence_traces(&b.expression, &engine.fitness, &engine.inner))
            .collect()
    });
    for (b, t) in chosen.iter().zip(&traces) {
        let name = format!("benchmark_{}.csv", b.id);
        report::write_traces(&out_dir.join(&name), t).map_err(|e| abort(format!("cannot write {name}: {e}")))?;
    }
    let _ = writeln!(out, "wrote {} trace table(s) to {}", chosen.len(), out_dir.display());
    Ok(())
}
