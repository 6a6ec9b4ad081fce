//! Lagrangian dual of the joint power/transfer problem.
//!
//! Pricing each per-BS power constraint with `μ_i` separates the Lagrangian
//! into one scalar water-filling problem per MT and one linear term per
//! transfer. Within the dual domain (`μ ≥ 0`, `β_ij μ_j ≤ μ_i`) every
//! transfer term is maximized at zero, so
//!
//! ```text
//! f(μ) = Σ_k [ω_k log2(1 + a_k p_k(μ)) − c_k p_k(μ)] + Σ_i μ_i E_i,
//! p_k(μ) = (ω_k / (ln2 · c_k) − 1/a_k)⁺,   c_k = Σ_i b_ik μ_i.
//! ```

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channel::ZfGains;
use crate::energy::Efficiency;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub mu: Vec<f64>,
}

impl DualState {
    pub fn new(mu: Vec<f64>) -> Self {
        Self { mu }
    }

    /// Largest violation of `μ ≥ 0` and `β_ij μ_j − μ_i ≤ 0`, or zero.
    pub fn infeasibility(&self, beta: &Efficiency) -> f64 {
        let mu = &self.mu;
        let mut worst = mu.iter().map(|m| (-m).max(0.0)).fold(0.0, f64::max);
        for (i, j) in beta.active_pairs() {
            worst = worst.max(beta.get(i, j) * mu[j] - mu[i]);
        }
        worst
    }
}

/// Per-MT price `c_k = Σ_i b_ik μ_i`.
pub(crate) fn prices(gains: &ZfGains, mu: &[f64]) -> Vec<f64> {
    (0..gains.n_mt())
        .map(|k| (0..gains.n_bs()).map(|i| gains.b[(i, k)] * mu[i]).sum())
        .collect()
}

/// Maximizer of `ω log2(1 + a p) − c p` over `p ≥ 0`.
pub(crate) fn waterfill(weight: f64, a: f64, price: f64) -> f64 {
    (weight / (LN_2 * price) - 1.0 / a).max(0.0)
}

/// Closed-form power allocation for the given multipliers.
pub fn dual_power_alloc(gains: &ZfGains, mu: &DualState) -> Result<Vec<f64>> {
    if mu.mu.len() != gains.n_bs() {
        return Err(Error::InvalidDual(format!(
            "{} multipliers for {} BSs",
            mu.mu.len(),
            gains.n_bs()
        )));
    }
    if mu.mu.iter().any(|m| !(*m >= 0.0)) {
        return Err(Error::InvalidDual("multipliers must be nonnegative".into()));
    }
    let c = prices(gains, &mu.mu);
    if let Some(k) = c.iter().position(|&ck| !(ck > 0.0)) {
        return Err(Error::InvalidDual(format!(
            "MT {k} faces a zero power price; the dual is unbounded"
        )));
    }
    Ok((0..gains.n_mt())
        .map(|k| waterfill(gains.effective_weight(k), gains.a[k], c[k]))
        .collect())
}

/// `g_i = E_i − Σ_k b_ik p_k`, a subgradient of `f` at the multipliers that produced `p`.
pub fn dual_subgradient(gains: &ZfGains, budget: &[f64], p: &[f64]) -> Vec<f64> {
    gains
        .bs_power(p)
        .iter()
        .zip(budget)
        .map(|(used, e)| e - used)
        .collect()
}

/// Dual function value `f(μ)` inside the dual domain.
pub fn dual_value(gains: &ZfGains, budget: &[f64], mu: &DualState) -> Result<f64> {
    let p = dual_power_alloc(gains, mu)?;
    let c = prices(gains, &mu.mu);
    let lagrangian: f64 = (0..gains.n_mt())
        .map(|k| gains.effective_weight(k) * (gains.a[k] * p[k]).ln_1p() / LN_2 - c[k] * p[k])
        .sum();
    Ok(lagrangian + mu.mu.iter().zip(budget).map(|(m, e)| m * e).sum::<f64>())
}
