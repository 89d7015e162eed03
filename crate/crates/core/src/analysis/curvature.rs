use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::symmetric_eigen;
use crate::expr::Expression;
use crate::optim::SearchSpace;
use crate::seed;

/// Magnitudes below this count as zero when forming ratios.
const MIN_MAGNITUDE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSteps {
    pub gradient: f64,
    pub hessian: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps {
            gradient: 1e-5,
            hessian: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureFeatures {
    /// Median over points of `max_i |g_i| / min_i |g_i|`.
    pub grad_ratio_median: f64,
    /// Lower quartile over points of `max |λ| / min |λ|` of the FD Hessian.
    pub hessian_cond_lower_quartile: f64,
    pub sample_count: usize,
    pub fd_step: FdSteps,
    pub gradient_skipped: usize,
    pub hessian_skipped: usize,
    /// Points where some stencil evaluation was invalid.
    pub invalid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TooFewUsablePoints {
    pub feature: &'static str,
    pub usable: usize,
}

impl fmt::Display for TooFewUsablePoints {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "only {} usable points for {} (need at least 4)",
            self.usable, self.feature
        )
    }
}

impl core::error::Error for TooFewUsablePoints {}

/// Latin hypercube sample of `n` points in `[lower, upper]^d`.
pub fn latin_hypercube<R: Rng + ?Sized>(n: usize, d: usize, lower: f64, upper: f64, rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = alloc::vec![alloc::vec![0.0; d]; n];
    let width = upper - lower;
    for j in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        for k in (1..n).rev() {
            strata.swap(k, rng.random_range(0..=k));
        }
        for (p, s) in points.iter_mut().zip(strata) {
            p[j] = lower + width * (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    points
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

struct Fd<'a> {
    expr: &'a Expression,
}

impl Fd<'_> {
    fn at(&self, x: &[f64], moves: &[(usize, f64)]) -> Option<f64> {
        let mut y = x.to_vec();
        for &(i, h) in moves {
            y[i] += h;
        }
        self.expr.evaluate(&y).ok()
    }

    fn gradient(&self, x: &[f64], h: f64) -> Option<Vec<f64>> {
        (0..x.len())
            .map(|i| Some((self.at(x, &[(i, h)])? - self.at(x, &[(i, -h)])?) / (2.0 * h)))
            .collect()
    }

    fn hessian(&self, x: &[f64], h: f64) -> Option<Vec<f64>> {
        let d = x.len();
        let f0 = self.at(x, &[])?;
        let mut hess = alloc::vec![0.0; d * d];
        for i in 0..d {
            hess[i * d + i] = (self.at(x, &[(i, h)])? - 2.0 * f0 + self.at(x, &[(i, -h)])?) / (h * h);
            for j in (i + 1)..d {
                let v = (self.at(x, &[(i, h), (j, h)])?
                    - self.at(x, &[(i, h), (j, -h)])?
                    - self.at(x, &[(i, -h), (j, h)])?
                    + self.at(x, &[(i, -h), (j, -h)])?)
                    / (4.0 * h * h);
                hess[i * d + j] = v;
                hess[j * d + i] = v;
            }
        }
        Some(hess)
    }
}

fn magnitude_ratio(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (min, max) = values
        .map(libm::fabs)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    (min >= MIN_MAGNITUDE).then(|| max / min)
}

/// Curvature features from central finite differences at Latin-hypercube
/// points.
///
/// Points are drawn from the box shrunk by the larger step so every stencil
/// stays inside it. Points whose smallest gradient component or Hessian
/// eigenvalue magnitude is below 1e-12 are skipped for that feature.
pub fn curvature_features(
    expr: &Expression,
    space: &SearchSpace,
    sample_points: usize,
    steps: FdSteps,
    seed: u64,
) -> Result<CurvatureFeatures, TooFewUsablePoints> {
    let margin = steps.gradient.max(steps.hessian);
    let mut rng = seed::rng(seed);
    let points = latin_hypercube(
        sample_points,
        space.dimension,
        space.lower + margin,
        space.upper - margin,
        &mut rng,
    );
    let fd = Fd { expr };
    let mut ratios = Vec::new();
    let mut conds = Vec::new();
    let (mut gradient_skipped, mut hessian_skipped, mut invalid_points) = (0, 0, 0);
    for x in &points {
        let (Some(g), Some(h)) = (fd.gradient(x, steps.gradient), fd.hessian(x, steps.hessian)) else {
            invalid_points += 1;
            continue;
        };
        match magnitude_ratio(g.into_iter()) {
            Some(r) => ratios.push(r),
            None => gradient_skipped += 1,
        }
        let eig = symmetric_eigen(&h, space.dimension);
        match magnitude_ratio(eig.values.into_iter()) {
            Some(c) => conds.push(c),
            None => hessian_skipped += 1,
        }
    }
    if ratios.len() < 4 {
        return Err(TooFewUsablePoints {
            feature: "gradient ratio",
            usable: ratios.len(),
        });
    }
    if conds.len() < 4 {
        return Err(TooFewUsablePoints {
            feature: "Hessian condition number",
            usable: conds.len(),
        });
    }
    ratios.sort_by(f64::total_cmp);
    conds.sort_by(f64::total_cmp);
    Ok(CurvatureFeatures {
        grad_ratio_median: quantile_sorted(&ratios, 0.5),
        hessian_cond_lower_quartile: quantile_sorted(&conds, 0.25),
        sample_count: sample_points,
        fd_step: steps,
        gradient_skipped,
        hessian_skipped,
        invalid_points,
    })
}
