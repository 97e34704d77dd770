//! External clustering evaluation: NMI and ARI over a contingency table.

use crate::error::{Error, Result};

/// Contingency table of two labelings over the same points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contingency {
    /// r x c counts, row-major.
    pub counts: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub n: u64,
}

impl Contingency {
    pub fn from_labels(truth: &[usize], pred: &[usize]) -> Result<Contingency> {
        if truth.len() != pred.len() {
            return Err(Error::Shape { expected: truth.len(), found: pred.len() });
        }
        if truth.is_empty() {
            return Err(Error::InvalidSpec("labels must be non-empty".into()));
        }
        // Dense ids in first-appearance order; inputs need not be dense.
        let mut tmap: Vec<usize> = Vec::new();
        let mut pmap: Vec<usize> = Vec::new();
        let dense = |map: &mut Vec<usize>, raw: usize| match map.iter().position(|&m| m == raw) {
            Some(i) => i,
            None => {
                map.push(raw);
                map.len() - 1
            }
        };
        let pairs: Vec<(usize, usize)> = truth
            .iter()
            .zip(pred)
            .map(|(&t, &p)| (dense(&mut tmap, t), dense(&mut pmap, p)))
            .collect();
        let (r, c) = (tmap.len(), pmap.len());
        let mut counts = vec![vec![0u64; c]; r];
        for (ti, pi) in pairs {
            counts[ti][pi] += 1;
        }
        let row_sums: Vec<u64> = counts.iter().map(|row| row.iter().sum()).collect();
        let col_sums: Vec<u64> = (0..c).map(|j| counts.iter().map(|row| row[j]).sum()).collect();
        let n = row_sums.iter().sum();
        Ok(Contingency { counts, row_sums, col_sums, n })
    }

    /// True when the two labelings are identical up to a relabeling: every
    /// row and every column holds exactly one non-zero cell.
    pub fn identical_up_to_relabeling(&self) -> bool {
        self.counts.iter().all(|row| row.iter().filter(|&&v| v > 0).count() == 1)
            && (0..self.col_sums.len())
                .all(|j| self.counts.iter().filter(|row| row[j] > 0).count() == 1)
    }
}

fn entropy(sums: &[u64], n: f64) -> f64 {
    sums.iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized Mutual Information with geometric-mean normalization:
/// `I(U; V) / sqrt(H(U) H(V))`, natural-log entropies. When either marginal
/// entropy is zero, returns 1 if the labelings agree up to relabeling,
/// else 0.
pub fn nmi(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let table = Contingency::from_labels(truth, pred)?;
    let n = table.n as f64;
    let hu = entropy(&table.row_sums, n);
    let hv = entropy(&table.col_sums, n);
    if hu == 0.0 || hv == 0.0 {
        return Ok(if table.identical_up_to_relabeling() { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &cell) in row.iter().enumerate() {
            if cell > 0 {
                let pij = cell as f64 / n;
                let pi = table.row_sums[i] as f64 / n;
                let pj = table.col_sums[j] as f64 / n;
                mi += pij * (pij / (pi * pj)).ln();
            }
        }
    }
    // Numerical guard: clamp into [0, 1].
    Ok((mi / (hu * hv).sqrt()).clamp(0.0, 1.0))
}

fn choose2(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Adjusted Rand Index (Hubert-Arabie). A zero denominator yields 1 when the
/// labelings agree up to relabeling, else 0.
pub fn ari(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let table = Contingency::from_labels(truth, pred)?;
    if table.n < 2 {
        return Err(Error::InvalidSpec("ARI needs at least 2 points".into()));
    }
    let index: f64 = table.counts.iter().flatten().map(|&v| choose2(v)).sum();
    let sum_rows: f64 = table.row_sums.iter().map(|&v| choose2(v)).sum();
    let sum_cols: f64 = table.col_sums.iter().map(|&v| choose2(v)).sum();
    let expected = sum_rows * sum_cols / choose2(table.n);
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(if table.identical_up_to_relabeling() { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}
