//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines always reach the terminal.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use ebg_core::analysis::{curvature_features, levenshtein, mds_embed, sobol_indices, FdSteps};
use ebg_core::engine::{Origin, RunRecord};
use ebg_core::expr::{Expression, FunctionWhitelist};
use ebg_core::fitness::{pooled_rank_fitness, Algorithm, InnerConfigs};
use ebg_core::optim::operators::{binomial_cross, de_mutant, pm_mutate, sbx_children, sbx_spread};
use ebg_core::optim::{DeConfig, GaConfig, SearchSpace};
use ebg_core::seed;

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn expr(text: &str) -> Expression {
    Expression::parse(text, 5, &FunctionWhitelist::default()).expect("valid expression")
}

/// Uniform draws in [0, 1) from the shared generator.
struct Uniform(seed::StdRng, SearchSpace);

impl Uniform {
    fn new(s: u64) -> Self {
        Uniform(seed::rng(s), SearchSpace::new(1, 0.0, 1.0))
    }
    fn next(&mut self) -> f64 {
        self.1.sample_uniform(&mut self.0)[0]
    }
    fn vec(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| lo + (hi - lo) * self.next()).collect()
    }
}

fn fitness_floor() -> Check {
    let a1: Vec<f64> = (0..20).map(|i| i as f64 * 1e-3).collect();
    let a2: Vec<f64> = (0..20).map(|i| 1.0 + i as f64).collect();
    let r = pooled_rank_fitness(&a1, &a2, 10.0).map_err(|e| e.to_string())?;
    ensure((r.fitness - 210.0 / 820.0).abs() <= 1e-12, || {
        format!("got {}", r.fitness)
    })
}

fn fitness_hand_cases() -> Check {
    let f = |a: &[f64], b: &[f64]| pooled_rank_fitness(a, b, 10.0).unwrap().fitness;
    ensure(f(&[1.0, 2.0], &[3.0, 4.0]) == 0.3, || "T=2 case".into())?;
    let p = f(&[-0.5], &[1.0]);
    ensure((p - 16.0 / 3.0).abs() < 1e-15, || format!("penalty case gave {p}"))?;
    ensure(f(&[2.0; 4], &[2.0; 4]) == 0.5, || "all-ties case".into())?;
    let mut u = Uniform::new(2);
    for k in 0..10_000 {
        let t = 1 + k % 20;
        // a coarse grid makes ties common
        let a: Vec<f64> = u.vec(t, 0.0, 4.0).into_iter().map(f64::floor).collect();
        let b: Vec<f64> = u.vec(t, 0.0, 4.0).into_iter().map(f64::floor).collect();
        let r = pooled_rank_fitness(&a, &b, 0.0).unwrap().rank_term;
        let s = pooled_rank_fitness(&b, &a, 0.0).unwrap().rank_term;
        ensure((r + s - 1.0).abs() < 1e-12, || format!("r={r} s={s} for {a:?} {b:?}"))?;
    }
    Ok(())
}

const GA_PREFERRED: &str = "x[0]**2 + sin(x[1])*x[2] + abs(x[3] - x[4]) + sqrt(abs(x[0] - x[1])) + x[2]*x[3]/(1 + x[4]**2 + abs(sin(x[0])*sinh(x[1]))) + sinh(x[0])*cos(x[1])**2 + abs(x[2] - x[3])**2/(1 + abs(x[4])) + x[0]*x[1]*x[2]*x[3]*x[4]/(1 + abs(x[0]) + abs(x[1]) + abs(x[2]) + abs(x[3]) + abs(x[4])) + sin(x[0])*sin(x[1])*sin(x[2])*sin(x[3])*sin(x[4]) + abs(x[0] - x[1])**2/(1 + x[2]**2) + cos(x[0])*cos(x[1])*cos(x[2])*cos(x[3])*cos(x[4]) + x[3]*x[4]/(1 + abs(x[0]) + abs(x[1]) + abs(x[2]))";

const DE_PREFERRED: &str = "x[0]**2 + abs(x[1]*x[2]) + sqrt(abs(x[3])) - sin(x[4]) + sin(x[0]*x[1]) + cos(x[2]*x[3]) + x[0]/(1 + x[4]**2) + sinh(x[1]*x[2]*x[3]) + abs(x[0] - x[1] + x[2] - x[3] + x[4]) + sqrt(x[0]**2 + x[1]**2 + x[2]**2 + x[3]**2 + x[4]**2) + x[1]*sinh(x[0]*x[2]) + abs(x[2] - x[3])/sqrt(1 + x[4]**2)";

fn ga_native(x: &[f64]) -> f64 {
    let s: f64 = x.iter().map(|v| v.abs()).sum();
    x[0] * x[0]
        + x[1].sin() * x[2]
        + (x[3] - x[4]).abs()
        + (x[0] - x[1]).abs().sqrt()
        + x[2] * x[3] / (1.0 + x[4] * x[4] + (x[0].sin() * x[1].sinh()).abs())
        + x[0].sinh() * x[1].cos() * x[1].cos()
        + (x[2] - x[3]).abs().powi(2) / (1.0 + x[4].abs())
        + x[0] * x[1] * x[2] * x[3] * x[4] / (1.0 + s)
        + x.iter().map(|v| v.sin()).product::<f64>()
        + (x[0] - x[1]).abs().powi(2) / (1.0 + x[2] * x[2])
        + x.iter().map(|v| v.cos()).product::<f64>()
        + x[3] * x[4] / (1.0 + x[0].abs() + x[1].abs() + x[2].abs())
}

fn de_native(x: &[f64]) -> f64 {
    x[0] * x[0] + (x[1] * x[2]).abs() + x[3].abs().sqrt() - x[4].sin()
        + (x[0] * x[1]).sin()
        + (x[2] * x[3]).cos()
        + x[0] / (1.0 + x[4] * x[4])
        + (x[1] * x[2] * x[3]).sinh()
        + (x[0] - x[1] + x[2] - x[3] + x[4]).abs()
        + x.iter().map(|v| v * v).sum::<f64>().sqrt()
        + x[1] * (x[0] * x[2]).sinh()
        + (x[2] - x[3]).abs() / (1.0 + x[4] * x[4]).sqrt()
}

fn evaluator_oracle() -> Check {
    let space = SearchSpace::default();
    for (text, native) in [
        (GA_PREFERRED, ga_native as fn(&[f64]) -> f64),
        (DE_PREFERRED, de_native),
    ] {
        let e = expr(text);
        ensure(e.evaluate(&[0.0; 5]) == Ok(1.0), || format!("origin value of {text}"))?;
        let mut rng = seed::rng(8);
        for _ in 0..1000 {
            let x = space.sample_uniform(&mut rng);
            let (got, want) = (e.evaluate(&x).map_err(|e| format!("{e:?}"))?, native(&x));
            ensure((got - want).abs() <= 1e-12 * want.abs(), || {
                format!("{got} vs {want} at {x:?}")
            })?;
        }
    }
    Ok(())
}

fn operator_properties() -> Check {
    let mut u = Uniform::new(4);
    let space = SearchSpace::default();
    for _ in 0..10_000 {
        let (p1, p2) = (u.vec(5, -1.0, 1.0), u.vec(5, -1.0, 1.0));
        for j in 0..5 {
            let beta = sbx_spread(u.next(), 1.0 + 39.0 * u.next());
            let (c1, c2) = sbx_children(p1[j], p2[j], beta);
            ensure(((c1 + c2) - (p1[j] + p2[j])).abs() / 2.0 <= 1e-9, || {
                "SBX mean moved".into()
            })?;
        }
    }
    ensure(sbx_spread(0.5, 20.0) == 1.0, || "spread at u=0.5".into())?;
    let (c1, c2) = sbx_children(0.2, -0.7, sbx_spread(0.5, 20.0));
    ensure(c1 == 0.2 && c2 == -0.7, || format!("u=0.5 children {c1} {c2}"))?;
    let mut rng = seed::rng(9);
    for _ in 0..1000 {
        let x = space.sample_uniform(&mut rng);
        ensure(pm_mutate(&x, 20.0, 0.0, &space, &mut rng) == x, || {
            "PM at probability 0".into()
        })?;
        let (r1, r2) = (space.sample_uniform(&mut rng), space.sample_uniform(&mut rng));
        ensure(de_mutant(&r1, &r2, &r2, 0.7) == r1, || "DE mutant with r2 = r3".into())?;
        let m = space.sample_uniform(&mut rng);
        let child = binomial_cross(&x, &m, 0.0, &mut rng);
        let changed = child.iter().zip(&x).filter(|(c, t)| c != t).count();
        ensure(changed == 1, || format!("CR=0 changed {changed} genes"))?;
    }
    Ok(())
}

fn inner_sanity() -> Check {
    let sphere = expr("x[0]**2 + x[1]**2 + x[2]**2 + x[3]**2 + x[4]**2");
    let inner = InnerConfigs {
        ga: GaConfig {
            generations: 200,
            ..GaConfig::default()
        },
        de: DeConfig {
            generations: 200,
            ..DeConfig::default()
        },
        ..InnerConfigs::default()
    };
    for alg in [Algorithm::Ga, Algorithm::De] {
        let hits = (0..20u64)
            .filter(|&t| inner.run(alg, &sphere, seed::derive(&[5, t])).best_value <= 1e-2)
            .count();
        ensure(hits >= 18, || {
            format!("{} reached 1e-2 in {hits}/20 trials", alg.name())
        })?;
    }
    Ok(())
}

fn sobol_checks() -> Check {
    let space = SearchSpace::default();
    let run = |t: &str| sobol_indices(&expr(t), &space, 1024, 6).map_err(|e| e.to_string());
    let near = |v: f64, want: f64, tol: f64, what: &str| ensure((v - want).abs() <= tol, || format!("{what} = {v}"));
    let r = run("x[0]")?;
    near(r.first_order[0], 1.0, 0.02, "x0: S_0")?;
    let r = run("x[0] + x[1]")?;
    near(r.first_order[0], 0.5, 0.05, "x0+x1: S_0")?;
    near(r.first_order[1], 0.5, 0.05, "x0+x1: S_1")?;
    let r = run("x[0]*x[1]")?;
    for i in 0..2 {
        near(r.first_order[i], 0.0, 0.05, "x0*x1: S_i")?;
        near(r.total_order[i], 1.0, 0.05, "x0*x1: S_Ti")?;
    }
    Ok(())
}

fn curvature_check() -> Check {
    let e = expr("x[0]**2 + x[1]**2 + x[2]**2 + x[3]**2 + 100*x[4]**2");
    let c = curvature_features(&e, &SearchSpace::default(), 200, FdSteps::default(), 3).map_err(|e| e.to_string())?;
    let q = c.hessian_cond_lower_quartile;
    ensure((q / 100.0 - 1.0).abs() <= 0.01, || format!("lower quartile {q}"))
}

fn edit_distance_and_mds() -> Check {
    ensure(levenshtein("kitten", "sitting") == 3, || "kitten/sitting".into())?;
    let words = ["", "a", "ab", "ba", "abc", "cab", "abcabc", "bbbbbbbb"];
    for a in words {
        ensure(levenshtein(a, a) == 0, || format!("d({a},{a})"))?;
        for b in words {
            ensure(levenshtein(a, b) == levenshtein(b, a), || format!("symmetry {a} {b}"))?;
            for c in words {
                let ok = levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c);
                ensure(ok, || format!("triangle {a} {b} {c}"))?;
            }
        }
    }
    let mut u = Uniform::new(12);
    let n = 10;
    let pts: Vec<Vec<f64>> = (0..n).map(|_| u.vec(2, -5.0, 5.0)).collect();
    let dist = |a: &[f64], b: &[f64]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let d: Vec<f64> = (0..n * n).map(|k| dist(&pts[k / n], &pts[k % n])).collect();
    let emb = mds_embed(&d, n, 2).map_err(|e| e.to_string())?;
    for i in 0..n {
        for j in 0..n {
            let err = (dist(&emb[i], &emb[j]) - d[i * n + j]).abs();
            ensure(err <= 1e-6, || format!("MDS distance error {err}"))?;
        }
    }
    Ok(())
}

fn lineage_closed(record: &RunRecord) -> Check {
    let events: BTreeSet<u64> = record.lineage.iter().map(|e| e.child_id).collect();
    for b in &record.benchmarks {
        if b.origin == Origin::Seed {
            continue;
        }
        ensure(events.contains(&b.id), || {
            format!("benchmark {} has no lineage event", b.id)
        })?;
        ensure(b.parent_ids.iter().all(|p| *p < b.id), || {
            format!("benchmark {} has a later parent", b.id)
        })?;
    }
    for pop in &record.populations {
        ensure(pop.iter().all(|id| record.benchmark(*id).is_some()), || {
            "unknown survivor".into()
        })?;
    }
    Ok(())
}

fn replay_run(fixtures: &Path, out: &Path) -> Check {
    let env = |_: &str| None;
    let (config, transcript) = (fixtures.join("config.json"), fixtures.join("transcript.jsonl"));
    let args = [
        "ebg",
        "generate",
        "--config",
        config.to_str().unwrap(),
        "--replay",
        transcript.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let code = ebg::cli::run(args, &env, &mut stdout, &mut stderr);
    ensure(code == 0, || {
        format!("exit {code}: {}", String::from_utf8_lossy(&stderr))
    })
}

fn end_to_end_replay() -> Check {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    replay_run(&fixtures, &tmp.path().join("first"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    let (_, record) = ebg::io::load_run(&tmp.path().join("first")).map_err(|e| e.to_string())?;
    ensure(record.complete, || "run did not complete".into())?;
    let c = &record.config;
    ensure(
        c.population_size == 4 && c.max_generations == 3 && c.fitness.trials == 3,
        || "fixture settings changed".into(),
    )?;
    ensure(record.populations.len() == 3, || "missing generations".into())?;
    for w in record.best_per_generation.windows(2) {
        ensure(w[1].fitness <= w[0].fitness, || format!("best rose: {w:?}"))?;
    }
    lineage_closed(&record)?;
    replay_run(&fixtures, &tmp.path().join("second"))?;
    for g in 0..record.populations.len() {
        let name = ebg::io::population_file(g);
        let a = fs::read(tmp.path().join("first").join(&name)).map_err(|e| e.to_string())?;
        let b = fs::read(tmp.path().join("second").join(&name)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{name} differs between replays"))?;
    }
    Ok(())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("pooled-rank floor 210/820 for T=20", fitness_floor),
        ("hand-computed fitness cases and antisymmetry", fitness_hand_cases),
        (
            "evaluator matches native GA- and DE-preferred functions",
            evaluator_oracle,
        ),
        ("SBX, PM and DE operator properties", operator_properties),
        ("GA and DE solve the 5-D sphere", inner_sanity),
        ("Sobol indices of analytic functions", sobol_checks),
        ("Hessian condition number of a scaled sphere", curvature_check),
        ("Levenshtein distance and MDS reconstruction", edit_distance_and_mds),
        ("replay of the bundled transcript", end_to_end_replay),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match check() {
            Ok(()) => println!("PASS {}: {name} ({:.2?})", k + 1, start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {}: {name}: {why}", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
