//! Variation operators. The closed-form pieces (`sbx_spread`, `sbx_children`,
//! `pm_delta`, `de_mutant`, `binomial_cross_with`) are pure so they can be
//! checked against hand computations; the rng-driven wrappers only decide
//! which genes they touch and draw the uniforms.

use alloc::vec::Vec;

use rand::Rng;

use super::SearchSpace;

/// SBX spread factor β for a uniform draw `u` in [0, 1).
pub fn sbx_spread(u: f64, eta: f64) -> f64 {
    let exponent = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        libm::pow(2.0 * u, exponent)
    } else {
        libm::pow(1.0 / (2.0 * (1.0 - u)), exponent)
    }
}

/// Children of one gene for a given spread factor, before clipping.
/// Their mean equals the parents' mean.
pub fn sbx_children(p1: f64, p2: f64, beta: f64) -> (f64, f64) {
    let c1 = 0.5 * ((1.0 + beta) * p1 + (1.0 - beta) * p2);
    let c2 = 0.5 * ((1.0 - beta) * p1 + (1.0 + beta) * p2);
    (c1, c2)
}

/// Simulated binary crossover of two parents. Each gene is crossed with
/// probability 0.5, otherwise copied. Children are clipped to `space`.
pub fn sbx_pair<R: Rng + ?Sized>(
    p1: &[f64],
    p2: &[f64],
    eta: f64,
    space: &SearchSpace,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(p1.len(), p2.len(), "parents must have equal length");
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    for j in 0..p1.len() {
        if rng.random::<f64>() < 0.5 {
            let beta = sbx_spread(rng.random::<f64>(), eta);
            let (a, b) = sbx_children(p1[j], p2[j], beta);
            c1[j] = a;
            c2[j] = b;
        }
    }
    space.clip(&mut c1);
    space.clip(&mut c2);
    (c1, c2)
}

/// Polynomial-mutation perturbation for a uniform draw `u`, in units of the
/// box width. Zero at `u = 0.5`.
pub fn pm_delta(u: f64, eta: f64) -> f64 {
    let exponent = 1.0 / (eta + 1.0);
    if u < 0.5 {
        libm::pow(2.0 * u, exponent) - 1.0
    } else {
        1.0 - libm::pow(2.0 * (1.0 - u), exponent)
    }
}

/// Polynomial mutation: each gene mutates with `per_gene_probability`,
/// moving by `pm_delta(u) * (upper - lower)` and then clipped.
pub fn pm_mutate<R: Rng + ?Sized>(
    x: &[f64],
    eta: f64,
    per_gene_probability: f64,
    space: &SearchSpace,
    rng: &mut R,
) -> Vec<f64> {
    let mut y = x.to_vec();
    for gene in y.iter_mut() {
        if rng.random::<f64>() < per_gene_probability {
            let delta = pm_delta(rng.random::<f64>(), eta);
            *gene = (*gene + delta * space.width()).clamp(space.lower, space.upper);
        }
    }
    y
}

/// DE/rand/1 mutant `r1 + f * (r2 - r3)`, unclipped.
pub fn de_mutant(r1: &[f64], r2: &[f64], r3: &[f64], f: f64) -> Vec<f64> {
    assert!(
        r1.len() == r2.len() && r2.len() == r3.len(),
        "vectors must have equal length"
    );
    r1.iter().zip(r2).zip(r3).map(|((a, b), c)| a + f * (b - c)).collect()
}

/// Binomial crossover with explicit draws: gene `j` comes from the mutant
/// when `draws[j] < cr` or `j == forced`.
pub fn binomial_cross_with(target: &[f64], mutant: &[f64], cr: f64, draws: &[f64], forced: usize) -> Vec<f64> {
    assert_eq!(target.len(), mutant.len(), "vectors must have equal length");
    target
        .iter()
        .zip(mutant)
        .zip(draws)
        .enumerate()
        .map(|(j, ((t, m), u))| if *u < cr || j == forced { *m } else { *t })
        .collect()
}

/// Binomial crossover drawing the forced index first, then one uniform per
/// gene.
pub fn binomial_cross<R: Rng + ?Sized>(target: &[f64], mutant: &[f64], cr: f64, rng: &mut R) -> Vec<f64> {
    let forced = rng.random_range(0..target.len());
    let draws: Vec<f64> = (0..target.len()).map(|_| rng.random::<f64>()).collect();
    binomial_cross_with(target, mutant, cr, &draws, forced)
}
