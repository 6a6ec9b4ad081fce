//! Independent verifiers for the solver: a brute-force grid search on tiny
//! instances, single-constraint water-filling, and a KKT residual.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;

use crate::channel::ZfGains;
use crate::energy::{Efficiency, EnergyState};
use crate::error::{Error, Result};
use crate::solver::Solution;

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// Objective of the best feasible grid point, a lower bound on the optimum.
    pub objective: f64,
    pub p: Vec<f64>,
    pub transfers: DMatrix<f64>,
    /// Grid spacing of the last round times a Lipschitz bound of the objective.
    pub step_bound: f64,
    pub evaluations: usize,
}

/// Exhaustive search over powers and transfers with iterative refinement.
///
/// The grid covers `p_1..p_{K−1}` and every transfer with `β_ij > 0`; the
/// last MT takes the largest power the remaining energy allows, so every
/// grid point is feasible. Each refinement round recentres a box five times
/// smaller on the incumbent.
pub fn grid_search_p1(
    gains: &ZfGains,
    es: &EnergyState,
    beta: &Efficiency,
    resolution: usize,
    refine_rounds: usize,
) -> Result<GridResult> {
    let n = gains.n_bs();
    let k_total = gains.n_mt();
    if k_total > 3 || n > 2 {
        return Err(Error::Unsupported(format!(
            "grid search needs K ≤ 3 and N ≤ 2, got K={k_total}, N={n}"
        )));
    }
    if es.n_bs() != n || beta.n() != n {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    if resolution < 2 {
        return Err(Error::InvalidInput("grid resolution must be at least 2".into()));
    }
    let eta = es.pa_eff();
    let budget = es.budget();
    let total: f64 = budget.iter().sum();
    let pairs = beta.active_pairs();

    // Coordinates: p_0..p_{K-2}, then one transfer per active pair.
    let n_p = k_total - 1;
    let dims = n_p + pairs.len();
    let mut hi = vec![0.0; dims];
    for (d, h) in hi.iter_mut().enumerate() {
        *h = if d < n_p {
            (0..n)
                .filter(|&i| gains.b[(i, d)] > 0.0)
                .map(|i| eta * total / gains.b[(i, d)])
                .fold(f64::INFINITY, f64::min)
        } else {
            total
        };
        if !h.is_finite() {
            *h = 0.0;
        }
    }

    let last = k_total - 1;
    let evaluate = |x: &[f64], p: &mut Vec<f64>| -> Option<f64> {
        let mut avail: Vec<f64> = budget.to_vec();
        for (v, &(from, to)) in pairs.iter().enumerate() {
            let e = x[n_p + v];
            avail[from] -= e;
            avail[to] += beta.get(from, to) * e;
        }
        for (i, a) in avail.iter_mut().enumerate() {
            *a *= eta;
            for k in 0..n_p {
                *a -= gains.b[(i, k)] * x[k];
            }
            if *a < 0.0 {
                return None;
            }
        }
        let mut p_last = f64::INFINITY;
        for (i, a) in avail.iter().enumerate() {
            let b = gains.b[(i, last)];
            if b > 0.0 {
                p_last = p_last.min(a / b);
            }
        }
        if !p_last.is_finite() {
            p_last = 0.0;
        }
        p.clear();
        p.extend_from_slice(&x[..n_p]);
        p.push(p_last);
        Some(
            p.iter()
                .enumerate()
                .map(|(k, &pk)| gains.effective_weight(k) * (gains.a[k] * pk).ln_1p())
                .sum::<f64>()
                / LN_2,
        )
    };

    let mut best_x = vec![0.0; dims];
    let mut scratch = Vec::with_capacity(k_total);
    let mut best_val = evaluate(&best_x, &mut scratch).unwrap_or(f64::NEG_INFINITY);
    let mut lo_box = vec![0.0; dims];
    let mut hi_box = hi.clone();
    let mut step = vec![0.0; dims];
    let mut evaluations = 1;
    let mut idx = vec![0usize; dims];
    let mut x = vec![0.0; dims];

    for round in 0..=refine_rounds {
        if round > 0 {
            for d in 0..dims {
                let half = (hi_box[d] - lo_box[d]) / 10.0;
                lo_box[d] = (best_x[d] - half).max(0.0);
                hi_box[d] = (best_x[d] + half).min(hi[d]);
            }
        }
        for d in 0..dims {
            step[d] = (hi_box[d] - lo_box[d]) / (resolution - 1) as f64;
        }
        idx.iter_mut().for_each(|v| *v = 0);
        loop {
            for d in 0..dims {
                x[d] = lo_box[d] + step[d] * idx[d] as f64;
            }
            evaluations += 1;
            if let Some(v) = evaluate(&x, &mut scratch) {
                if v > best_val {
                    best_val = v;
                    best_x.copy_from_slice(&x);
                }
            }
            // Odometer increment over the grid.
            let mut d = 0;
            while d < dims {
                idx[d] += 1;
                if idx[d] < resolution {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == dims {
                break;
            }
        }
    }

    let mut p = Vec::new();
    evaluate(&best_x, &mut p);
    let objective = gains.objective(&p);
    let mut transfers = DMatrix::zeros(n, n);
    for (v, &(from, to)) in pairs.iter().enumerate() {
        transfers[(from, to)] = best_x[n_p + v];
    }

    // Moving one coordinate by h changes the objective by at most
    // L_own·h plus the induced change of the last MT's power.
    let slope = |k: usize| gains.effective_weight(k) * gains.a[k] / LN_2;
    let min_b_last = (0..n)
        .map(|i| gains.b[(i, last)])
        .filter(|&b| b > 0.0)
        .fold(f64::INFINITY, f64::min);
    let mut step_bound = 0.0;
    for d in 0..dims {
        let own = if d < n_p { slope(d) } else { 0.0 };
        let coupling = if min_b_last.is_finite() {
            slope(last) * eta / min_b_last
        } else {
            0.0
        };
        step_bound += (own + coupling) * step[d];
    }

    Ok(GridResult {
        objective,
        p,
        transfers,
        step_bound,
        evaluations,
    })
}

/// Weighted water-filling under one constraint `Σ c_k p_k ≤ budget`.
///
/// `terms` holds `(ω_k, a_k, c_k)`. The water level is found by bisection
/// on the multiplier `ν`, with `p_k = (ω_k/(ln2·ν·c_k) − 1/a_k)⁺`.
pub fn waterfill_sum_power(terms: &[(f64, f64, f64)], budget: f64) -> Vec<f64> {
    if !(budget > 0.0) || terms.is_empty() {
        return vec![0.0; terms.len()];
    }
    let powers = |nu: f64| -> Vec<f64> {
        terms
            .iter()
            .map(|&(w, a, c)| (w / (LN_2 * nu * c) - 1.0 / a).max(0.0))
            .collect()
    };
    let spent = |p: &[f64]| -> f64 { p.iter().zip(terms).map(|(p, t)| p * t.2).sum() };
    // Above `hi` every MT is off.
    let mut hi = terms
        .iter()
        .map(|&(w, a, c)| w * a / (LN_2 * c))
        .fold(0.0, f64::max);
    let mut lo = hi;
    while spent(&powers(lo)) < budget {
        lo *= 0.5;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if spent(&powers(mid)) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // `hi` is feasible; hand the last round-off sliver to the active MTs.
    let mut p = powers(hi);
    let used = spent(&p);
    if used > 0.0 {
        let s = budget / used;
        p.iter_mut().for_each(|v| *v *= s);
    }
    p
}

/// Max-norm of the KKT violations of a candidate solution.
///
/// Energy quantities are measured relative to `max(1, max E_i)`, prices
/// relative to the largest finite multiplier, and products of the two
/// relative to both. Terms involving an infinite multiplier are skipped.
pub fn kkt_residual(solution: &Solution, gains: &ZfGains, es: &EnergyState, beta: &Efficiency) -> f64 {
    let n = gains.n_bs();
    let k_total = gains.n_mt();
    let eta = es.pa_eff();
    let budget = es.budget();
    let mu = &solution.mu.mu;
    let p = &solution.p;
    let tm = &solution.transfers;

    let e_scale = budget.iter().fold(1.0f64, |a, &v| a.max(v));
    let mu_scale = mu
        .iter()
        .filter(|m| m.is_finite())
        .fold(0.0f64, |a, &m| a.max(m.abs()));
    let mu_scale = if mu_scale > 0.0 { mu_scale } else { 1.0 };

    let used = gains.bs_power(p);
    let slack: Vec<f64> = (0..n)
        .map(|i| budget[i] + tm.net_draw(i) - used[i] / eta)
        .collect();

    let mut worst: f64 = 0.0;
    for i in 0..n {
        worst = worst.max((-slack[i]).max(0.0) / e_scale);
        if mu[i].is_finite() {
            worst = worst.max((-mu[i]).max(0.0) / mu_scale);
            worst = worst.max((mu[i] * slack[i]).abs() / (mu_scale * e_scale));
        }
    }
    for k in 0..k_total {
        worst = worst.max((-p[k]).max(0.0) / e_scale);
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let b = beta.get(i, j);
            let e = tm.e(i, j);
            worst = worst.max((-e).max(0.0) / e_scale);
            if !(mu[i].is_finite() && mu[j].is_finite()) {
                continue;
            }
            if b > 0.0 {
                let reduced = mu[i] - b * mu[j];
                worst = worst.max((-reduced).max(0.0) / mu_scale);
                worst = worst.max((e * reduced).abs() / (mu_scale * e_scale));
            } else if e > 0.0 {
                worst = worst.max(e / e_scale);
            }
        }
    }
    for k in 0..k_total {
        let c: f64 = (0..n)
            .filter(|&i| gains.b[(i, k)] > 0.0)
            .map(|i| gains.b[(i, k)] * mu[i] / eta)
            .sum();
        if !c.is_finite() {
            continue;
        }
        let marginal = gains.effective_weight(k) * gains.a[k] / (LN_2 * (1.0 + gains.a[k] * p[k]));
        let violation = if p[k] > 0.0 {
            (marginal - c).abs()
        } else {
            (marginal - c).max(0.0)
        };
        worst = worst.max(violation / mu_scale);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::TransferModel;
    use crate::solver::DualState;

    #[test]
    fn waterfill_examples() {
        assert_eq!(waterfill_sum_power(&[(1.0, 1.0, 1.0)], 0.0), vec![0.0]);
        let p = waterfill_sum_power(&[(1.0, 3.0, 2.0)], 5.0);
        assert!((p[0] - 2.5).abs() < 1e-12);
        let p = waterfill_sum_power(&[(1.0, 1.0, 1.0), (1.0, 2.0, 1.0)], 3.0);
        assert!((p[0] - 1.25).abs() < 1e-10 && (p[1] - 1.75).abs() < 1e-10);
    }

    #[test]
    fn waterfill_leaves_weak_users_off() {
        // Water level 1/(ln2 ν) = 1.5 for the strong user; the weak one needs 1/a = 10.
        let p = waterfill_sum_power(&[(1.0, 2.0, 1.0), (1.0, 0.1, 1.0)], 1.0);
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn grid_recovers_scalar_problem() {
        let g = ZfGains::from_coefficients(vec![1.0], DMatrix::from_element(1, 1, 1.0), vec![1.0]).unwrap();
        let es = EnergyState::from_budgets(vec![3.0]).unwrap();
        let r = grid_search_p1(&g, &es, &Efficiency::zero(1), 11, 0).unwrap();
        assert!((r.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn grid_guard() {
        let g = ZfGains::from_coefficients(vec![1.0; 4], DMatrix::from_element(1, 4, 1.0), vec![1.0; 4]).unwrap();
        let es = EnergyState::from_budgets(vec![3.0]).unwrap();
        assert!(matches!(
            grid_search_p1(&g, &es, &Efficiency::zero(1), 11, 0),
            Err(Error::Unsupported(_))
        ));
    }

    fn scalar_solution(p: f64, mu: f64) -> (Solution, ZfGains, EnergyState) {
        let g = ZfGains::from_coefficients(vec![1.0], DMatrix::from_element(1, 1, 1.0), vec![1.0]).unwrap();
        let es = EnergyState::from_budgets(vec![3.0]).unwrap();
        let sol = Solution {
            p: vec![p],
            transfers: TransferModel::idle(Efficiency::zero(1)),
            mu: DualState::new(vec![mu]),
            rates: g.rates(&[p]),
            objective: g.objective(&[p]),
            net_exchange: vec![p - 3.0],
            duality_gap: 0.0,
            iterations: 0,
        };
        (sol, g, es)
    }

    #[test]
    fn kkt_of_analytic_point() {
        let (sol, g, es) = scalar_solution(3.0, 1.0 / (4.0 * LN_2));
        assert!(kkt_residual(&sol, &g, &es, &Efficiency::zero(1)) <= 1e-10);
    }

    #[test]
    fn kkt_detects_perturbation() {
        let (sol, g, es) = scalar_solution(3.03, 1.0 / (4.0 * LN_2));
        assert!(kkt_residual(&sol, &g, &es, &Efficiency::zero(1)) >= 0.01 * 0.9);
    }

    #[test]
    fn kkt_of_zero_budget() {
        let g = ZfGains::from_coefficients(vec![1.0], DMatrix::from_element(1, 1, 1.0), vec![1.0]).unwrap();
        let es = EnergyState::from_budgets(vec![0.0]).unwrap();
        let sol = Solution {
            p: vec![0.0],
            transfers: TransferModel::idle(Efficiency::zero(1)),
            mu: DualState::new(vec![f64::INFINITY]),
            rates: vec![0.0],
            objective: 0.0,
            net_exchange: vec![0.0],
            duality_gap: 0.0,
            iterations: 0,
        };
        assert!(kkt_residual(&sol, &g, &es, &Efficiency::zero(1)) <= 1e-10);
    }
}
