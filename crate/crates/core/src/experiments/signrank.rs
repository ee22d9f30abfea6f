//! One-sided Wilcoxon signed-rank test on paired run accuracies.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest number of non-zero differences handled by exact enumeration.
pub const EXACT_MAX_N: usize = 12;
const ZERO_TOL: f64 = 1e-12;

/// Average ranks of `|d|`, doubled so that ties stay integral.
fn doubled_ranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&i, &j| abs[i].total_cmp(&abs[j]));
    let mut ranks = vec![0u64; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && (abs[order[j + 1]] - abs[order[i]]).abs() <= ZERO_TOL * abs[order[i]].max(1.0) {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean; doubled that is i+j+2
        for &k in &order[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        i = j + 1;
    }
    ranks
}

/// Non-zero differences `a - b`.
fn differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 5 {
        return Err(Error::InsufficientData(format!("sign-rank test needs >= 5 pairs, got {}", a.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite value in paired samples".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).filter(|d| d.abs() > ZERO_TOL).collect())
}

/// p-value of `H1: a > b`. All-zero differences give `p = 1`.
///
/// Exact for up to [`EXACT_MAX_N`] non-zero differences, normal
/// approximation with tie and continuity correction above that.
pub fn signrank_test(a: &[f64], b: &[f64]) -> Result<f64> {
    let d = differences(a, b)?;
    if d.is_empty() {
        return Ok(1.0);
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let w: u64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| *r).sum();
    if d.len() <= EXACT_MAX_N {
        Ok(exact_upper_tail(&ranks, w))
    } else {
        Ok(normal_upper_tail(&ranks, w))
    }
}

/// `P(W >= w)` when every rank's sign is an independent fair coin.
pub fn exact_upper_tail(ranks: &[u64], w: u64) -> f64 {
    let total: u64 = ranks.iter().sum();
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let hits: f64 = counts[w as usize..].iter().sum();
    hits / 2f64.powi(ranks.len() as i32)
}

fn normal_upper_tail(ranks: &[u64], w: u64) -> f64 {
    let n = ranks.len() as f64;
    let w = w as f64 / 2.0;
    let mean = n * (n + 1.0) / 4.0;
    let mut var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    let mut sorted: Vec<u64> = ranks.to_vec();
    sorted.sort_unstable();
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
        let t = j as f64;
        var -= (t * t * t - t) / 48.0;
        i += j;
    }
    if var <= 0.0 {
        return if w > mean { 0.0 } else { 1.0 };
    }
    let z = (w - mean - 0.5) / var.sqrt();
    1.0 - Normal::new(0.0, 1.0).expect("unit normal").cdf(z)
}
