use alloc::vec::Vec;
use core::fmt;

use super::linalg::symmetric_eigen;

#[derive(Debug, Clone, PartialEq)]
pub enum MdsError {
    Shape { len: usize, n: usize },
    Asymmetric { i: usize, j: usize },
    Negative { i: usize, j: usize },
    NonZeroDiagonal { i: usize },
}

impl fmt::Display for MdsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MdsError::Shape { len, n } => write!(f, "distance matrix has {len} entries, expected {n}x{n}"),
            MdsError::Asymmetric { i, j } => write!(f, "distance matrix not symmetric at ({i}, {j})"),
            MdsError::Negative { i, j } => write!(f, "negative or non-finite distance at ({i}, {j})"),
            MdsError::NonZeroDiagonal { i } => write!(f, "nonzero self-distance at index {i}"),
        }
    }
}

impl core::error::Error for MdsError {}

/// Classical (Torgerson) MDS of a row-major `n x n` distance matrix into `k`
/// dimensions. Returns `n` points of length `k`.
///
/// Axes follow the eigenvalues of the double-centered matrix `-1/2 J D^2 J`
/// in decreasing order; axes with nonpositive eigenvalues collapse to zero.
/// Each axis is oriented so its largest-magnitude coordinate is positive.
pub fn mds_embed(distances: &[f64], n: usize, k: usize) -> Result<Vec<Vec<f64>>, MdsError> {
    if distances.len() != n * n {
        return Err(MdsError::Shape {
            len: distances.len(),
            n,
        });
    }
    for i in 0..n {
        if distances[i * n + i] != 0.0 {
            return Err(MdsError::NonZeroDiagonal { i });
        }
        for j in 0..n {
            let (a, b) = (distances[i * n + j], distances[j * n + i]);
            if !(a >= 0.0) || !a.is_finite() {
                return Err(MdsError::Negative { i, j });
            }
            if libm::fabs(a - b) > 1e-9 * f64::max(1.0, libm::fabs(a)) {
                return Err(MdsError::Asymmetric { i, j });
            }
        }
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let sq: Vec<f64> = distances.iter().map(|d| d * d).collect();
    let row_mean: Vec<f64> = (0..n)
        .map(|i| sq[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64)
        .collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut b = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] = -0.5 * (sq[i * n + j] - row_mean[i] - row_mean[j] + grand);
        }
    }

    let eig = symmetric_eigen(&b, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.values[b].total_cmp(&eig.values[a]));

    let mut points = alloc::vec![alloc::vec![0.0; k]; n];
    for (axis, &idx) in order.iter().take(k).enumerate() {
        let lambda = eig.values[idx];
        if lambda <= 1e-12 * f64::max(1.0, libm::fabs(eig.values[order[0]])) {
            continue;
        }
        let scale = libm::sqrt(lambda);
        let column = eig.vector(idx);
        let pivot = column
            .iter()
            .copied()
            .reduce(|a, b| if libm::fabs(b) > libm::fabs(a) { b } else { a })
            .unwrap_or(0.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (p, v) in points.iter_mut().zip(column) {
            p[axis] = sign * v * scale;
        }
    }
    Ok(points)
}
