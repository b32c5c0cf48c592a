// SPDX-License-Identifier: Apache-2.0
//! Rank correlation between a predicted order and a reference order.

use crate::order::VarOrder;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("orders have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("rank correlation needs at least two elements")]
    TooShort,
}

fn check(a: &VarOrder, b: &VarOrder) -> Result<usize, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(MetricError::TooShort);
    }
    Ok(a.len())
}

/// Kendall's τ from concordant and discordant pair counts.
pub fn kendall_tau(predicted: &VarOrder, label: &VarOrder) -> Result<f64, MetricError> {
    let n = check(predicted, label)?;
    let pos = label.positions();
    // label rank of each predicted element, in predicted order
    let r: Vec<usize> = predicted.as_slice().iter().map(|&v| pos[v]).collect();
    let (mut c, mut d) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            if r[i] < r[j] {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    Ok((c - d) as f64 / (n * (n - 1) / 2) as f64)
}

/// Spearman's ρ from squared rank differences.
pub fn spearman_rho(predicted: &VarOrder, label: &VarOrder) -> Result<f64, MetricError> {
    let n = check(predicted, label)?;
    let (p, l) = (predicted.positions(), label.positions());
    let d2: i64 = p.iter().zip(&l).map(|(&a, &b)| (a as i64 - b as i64).pow(2)).sum();
    let n = n as f64;
    Ok(1.0 - 6.0 * d2 as f64 / (n * (n * n - 1.0)))
}
