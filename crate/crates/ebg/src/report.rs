//! Plot-ready output files: CSV tables, JSON summaries and a DOT graph.

use std::fmt::Write as _;
use std::path::Path;

use ebg_core::analysis::{GenerationSummary, Trace};
use ebg_core::engine::{Origin, RunRecord};

pub fn edge_style(origin: Origin) -> Option<&'static str> {
    match origin {
        Origin::Crossover => Some("solid"),
        Origin::Mutation => Some("dashed"),
        Origin::InitLlm => Some("dotted"),
        Origin::Seed => None,
    }
}

/// Lineage graph: one node per benchmark, one edge per parent. Crossover
/// edges are solid, mutation edges dashed, init conditioning edges dotted.
pub fn lineage_dot(record: &RunRecord) -> String {
    let mut out = String::from("digraph lineage {\n  rankdir=TB;\n  node [shape=box, fontsize=10];\n");
    for b in &record.benchmarks {
        let _ = writeln!(
            out,
            "  n{} [label=\"{}\\nf={:.4}\\ngen {}\"];",
            b.id, b.id, b.fitness, b.generation_created
        );
    }
    for b in &record.benchmarks {
        let Some(style) = edge_style(b.origin) else { continue };
        for p in &b.parent_ids {
            let _ = writeln!(out, "  n{p} -> n{} [style={style}];", b.id);
        }
    }
    out.push_str("}\n");
    out
}

fn csv_writer(path: &Path) -> csv::Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path)
}

/// Condensed pairwise distances: one row per unordered pair.
pub fn write_distances(path: &Path, ids: &[u64], matrix: &[f64]) -> csv::Result<()> {
    let n = ids.len();
    let mut w = csv_writer(path)?;
    w.write_record(["id_a", "id_b", "distance"])?;
    for i in 0..n {
        for j in (i + 1)..n {
            w.write_record([ids[i].to_string(), ids[j].to_string(), matrix[i * n + j].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_embedding(path: &Path, ids: &[u64], points: &[Vec<f64>]) -> csv::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["id", "x", "y"])?;
    for (id, p) in ids.iter().zip(points) {
        w.write_record([id.to_string(), p[0].to_string(), p[1].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_generations(path: &Path, rows: &[GenerationSummary]) -> csv::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["generation", "best_fitness", "median_fitness", "best_id"])?;
    for r in rows {
        w.write_record([
            r.generation.to_string(),
            r.best_fitness.to_string(),
            r.median_fitness.to_string(),
            r.best_id.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One column per trial (`GA_0`, ..., `DE_0`, ...), one row per generation;
/// cells past the end of an aborted trial are empty.
pub fn write_traces(path: &Path, traces: &[Trace]) -> csv::Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec![String::from("generation")];
    header.extend(traces.iter().map(|t| format!("{}_{}", t.algorithm.name(), t.trial)));
    w.write_record(&header)?;
    for (g, row) in ebg_core::analysis::trace_table(traces) {
        let mut cells = vec![g.to_string()];
        cells.extend(row.into_iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&cells)?;
    }
    w.flush()?;
    Ok(())
}
