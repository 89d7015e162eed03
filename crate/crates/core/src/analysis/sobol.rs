use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{Expression, Invalid};
use crate::optim::SearchSpace;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolResult {
    pub first_order: Vec<f64>,
    pub total_order: Vec<f64>,
    /// Standard error of each first-order estimate.
    pub first_order_se: Vec<f64>,
    /// Unnormalized first-order contributions `V_i = S_i * total_variance`.
    pub first_order_variance: Vec<f64>,
    pub total_variance: f64,
    pub base_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvalidSample {
    pub point: Vec<f64>,
    pub cause: Invalid,
}

impl fmt::Display for InvalidSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid evaluation ({}) at {:?}", self.cause, self.point)
    }
}

impl core::error::Error for InvalidSample {}

fn eval_all(expr: &Expression, rows: &[Vec<f64>]) -> Result<Vec<f64>, InvalidSample> {
    rows.iter()
        .map(|x| {
            expr.evaluate(x).map_err(|cause| InvalidSample {
                point: x.clone(),
                cause,
            })
        })
        .collect()
}

/// Variance-based sensitivity indices from the Saltelli sampling design.
///
/// Draws two independent uniform matrices `A` and `B` of `base_samples`
/// rows, plus one matrix per variable equal to `A` with that column taken
/// from `B`: `(D + 2) * base_samples` evaluations in all.
///
/// First-order indices are `mean(f_B (f_ABi - f_A)) / (mean(f_B^2) - f0^2)`
/// and total-order indices `mean((f_A - f_ABi)^2) / (2 V)`, where
/// `f0^2 = mean(f_A f_B)` and `V = (mean(f_A^2) + mean(f_B^2)) / 2 - f0^2`.
pub fn sobol_indices(
    expr: &Expression,
    space: &SearchSpace,
    base_samples: usize,
    seed: u64,
) -> Result<SobolResult, InvalidSample> {
    let d = space.dimension;
    let n = base_samples.max(1);
    let mut rng = seed::rng(seed);
    let a: Vec<Vec<f64>> = (0..n).map(|_| space.sample_uniform(&mut rng)).collect();
    let b: Vec<Vec<f64>> = (0..n).map(|_| space.sample_uniform(&mut rng)).collect();
    let fa = eval_all(expr, &a)?;
    let fb = eval_all(expr, &b)?;

    let cross = (0..n).map(|k| fa[k] * fb[k]).sum::<f64>() / n as f64;
    let mean_sq = |f: &[f64]| f.iter().map(|v| v * v).sum::<f64>() / n as f64;
    // mean(f_A f_B) estimates the squared mean without bias
    let var_b = mean_sq(&fb) - cross;
    let var = (mean_sq(&fa) + mean_sq(&fb)) / 2.0 - cross;

    let mut first = Vec::with_capacity(d);
    let mut total = Vec::with_capacity(d);
    let mut se = Vec::with_capacity(d);
    for i in 0..d {
        let ab: Vec<Vec<f64>> = a
            .iter()
            .zip(&b)
            .map(|(ra, rb)| {
                let mut row = ra.clone();
                row[i] = rb[i];
                row
            })
            .collect();
        let fab = eval_all(expr, &ab)?;
        let terms: Vec<f64> = (0..n).map(|k| fb[k] * (fab[k] - fa[k])).collect();
        let vi = terms.iter().sum::<f64>() / n as f64;
        let spread = terms.iter().map(|t| (t - vi) * (t - vi)).sum::<f64>() / n as f64;
        let vti = (0..n).map(|k| (fa[k] - fab[k]) * (fa[k] - fab[k])).sum::<f64>() / (2 * n) as f64;
        if var > 0.0 && var_b > 0.0 {
            first.push(vi / var_b);
            total.push(vti / var);
            se.push(libm::sqrt(spread / n as f64) / var_b);
        } else {
            first.push(0.0);
            total.push(0.0);
            se.push(0.0);
        }
    }
    let first_order_variance = first.iter().map(|s| s * var).collect();
    Ok(SobolResult {
        first_order: first,
        total_order: total,
        first_order_se: se,
        first_order_variance,
        total_variance: var,
        base_samples: n,
    })
}
