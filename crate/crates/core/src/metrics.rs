//! RMSE, R², Spearman ρ and Kendall τ.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

fn check_pair(pred: &[f64], truth: &[f64], min_len: usize) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(invalid(format!("length mismatch: {} predictions vs {} targets", pred.len(), truth.len())));
    }
    if pred.len() < min_len {
        return Err(invalid(format!("need at least {min_len} points, got {}", pred.len())));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 1)?;
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

pub fn r2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 2)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Domain("R² is undefined for a constant target".into()));
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p) * (t - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean(i+1..=j)
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// `1 − 6 Σ d² / (n(n²−1))` on average ranks.
pub fn spearman(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 2)?;
    let n = pred.len() as f64;
    let rp = average_ranks(pred);
    let rt = average_ranks(truth);
    let d2: f64 = rp.iter().zip(&rt).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `2/(n(n−1)) Σ_{i<j} sgn(yᵢ−yⱼ) sgn(ŷᵢ−ŷⱼ)`; ties contribute zero.
pub fn kendall(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 2)?;
    let n = pred.len();
    let mut s: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            s += (sgn(truth[i] - truth[j]) * sgn(pred[i] - pred[j])) as i64;
        }
    }
    Ok(2.0 * s as f64 / (n as f64 * (n as f64 - 1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub rmse: f64,
    pub r2: f64,
    pub spearman: f64,
    pub kendall: f64,
}

/// All four measures. R² is NaN when the target is constant.
pub fn evaluate(pred: &[f64], truth: &[f64]) -> Result<EvalReport> {
    check_pair(pred, truth, 2)?;
    Ok(EvalReport {
        n: pred.len(),
        rmse: rmse(pred, truth)?,
        r2: r2(pred, truth).unwrap_or(f64::NAN),
        spearman: spearman(pred, truth)?,
        kendall: kendall(pred, truth)?,
    })
}
