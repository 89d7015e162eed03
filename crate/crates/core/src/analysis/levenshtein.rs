use alloc::vec::Vec;

/// Unit-cost edit distance between the character sequences of `a` and `b`.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    if b.is_empty() {
        return a.chars().count();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = (up + 1).min(row[j] + 1).min(diag + usize::from(ca != *cb));
            diag = up;
        }
    }
    row[b.len()]
}

/// Pairwise distances as a dense row-major `n x n` matrix.
pub fn distance_matrix<S: AsRef<str>>(texts: &[S]) -> Vec<f64> {
    let n = texts.len();
    let mut d = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = levenshtein(texts[i].as_ref(), texts[j].as_ref()) as f64;
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}
