//! Optimal joint power allocation and energy transfer.
//!
//! The dual is minimized with the ellipsoid method; primal powers follow in
//! closed form from the optimal multipliers, and transfers come from a small
//! LP over the resulting per-BS demand.

mod dual;
mod ellipsoid;
mod polish;
mod transfer;

use std::f64::consts::LN_2;

use nalgebra::DMatrix;

pub use dual::{dual_power_alloc, dual_subgradient, dual_value, DualState};
pub use transfer::{find_bidirectional, recover_transfers, reroute, Reroute};

use crate::channel::ZfGains;
use crate::energy::{max_demand_scale, Efficiency, EnergyState, TransferModel};
use crate::error::{Error, Result};
use ellipsoid::Cut;

/// Largest KKT residual at which refined multipliers replace the ellipsoid estimate.
const POLISH_ACCEPT: f64 = 1e-10;

/// Smallest pull-back factor accepted for refined multipliers.
const MIN_SCALE: f64 = 1.0 - 1e-3;
/// Relative duality gap at which an unpolished, pulled-back point is kept.
const GAP_ACCEPT: f64 = 1e-6;

/// Default certified duality gap.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Target gap between the best dual value and the ellipsoid lower bound.
    pub tol: f64,
    /// Cut budget; `None` means `5000·N²`.
    pub max_iter: Option<usize>,
    /// Center of the initial ellipsoid (all multipliers equal to this).
    pub mu0: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: None,
            mu0: 1.0,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub state: DualState,
    /// `f(μ)` at the returned multipliers.
    pub value: f64,
    /// Certified lower bound on the dual optimum.
    pub lower_bound: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub p: Vec<f64>,
    pub transfers: TransferModel,
    /// Optimal multipliers. A BS that can neither harvest nor receive energy
    /// has an unattained (infinite) price and is reported as `f64::INFINITY`.
    pub mu: DualState,
    pub rates: Vec<f64>,
    pub objective: f64,
    /// `δ_i = Σ_k b_ik p_k − E_i`: positive draws from the grid, negative injects.
    pub net_exchange: Vec<f64>,
    /// `f(μ) − objective`, nonnegative up to round-off.
    pub duality_gap: f64,
    pub iterations: usize,
}

impl Solution {
    /// Per-BS slack `η(E_i + inflow − outflow) − Σ_k b_ik p_k`.
    pub fn slack(&self, gains: &ZfGains, es: &EnergyState) -> Vec<f64> {
        let used = gains.bs_power(&self.p);
        (0..es.n_bs())
            .map(|i| crate::energy::available_power(es, &self.transfers, i) - used[i])
            .collect()
    }
}

fn check_dims(gains: &ZfGains, es: &EnergyState, beta: &Efficiency) -> Result<()> {
    gains.validate()?;
    if es.n_bs() != gains.n_bs() || beta.n() != gains.n_bs() {
        return Err(Error::InvalidInput(format!(
            "gains cover {} BSs, energy state {}, efficiencies {}",
            gains.n_bs(),
            es.n_bs(),
            beta.n()
        )));
    }
    Ok(())
}

/// Power fractions per unit of energy budget (folds the PA efficiency into `b`).
fn energy_gains(gains: &ZfGains, es: &EnergyState) -> ZfGains {
    let mut g = gains.clone();
    g.b /= es.pa_eff();
    g
}

/// Minimizes the dual over `{μ ≥ 0, β_ij μ_j ≤ μ_i}`.
///
/// Every BS must be able to obtain energy (own budget or an incoming link
/// from a BS that can); otherwise the dual infimum is not attained and the
/// run ends in [`Error::NonConvergence`].
pub fn solve_dual(
    gains: &ZfGains,
    es: &EnergyState,
    beta: &Efficiency,
    opts: &SolveOptions,
) -> Result<DualSolution> {
    check_dims(gains, es, beta)?;
    if !(opts.tol > 0.0) || !(opts.mu0 > 0.0) {
        return Err(Error::InvalidInput("tolerance and initial multiplier must be positive".into()));
    }
    let g = energy_gains(gains, es);
    dual_core(&g, es.budget(), beta, opts)
}

fn dual_core(
    g: &ZfGains,
    budget: &[f64],
    beta: &Efficiency,
    opts: &SolveOptions,
) -> Result<DualSolution> {
    let n = g.n_bs();
    let max_iter = opts.max_iter.unwrap_or(5000 * n * n);
    // Some optimal μ lies in [0, B]^N where B bounds the price above which
    // every MT served by a BS would switch off.
    let mut bound: f64 = 1.0;
    for i in 0..n {
        for k in 0..g.n_mt() {
            let b = g.b[(i, k)];
            if b > 0.0 {
                bound = bound.max(g.effective_weight(k) * g.a[k] / (LN_2 * b));
            }
        }
    }
    // BSs joined by lossless links in both directions (possibly via others)
    // must share one price; the ellipsoid runs over one multiplier per class.
    let class_of = lossless_classes(beta);
    let n_class = class_of.iter().max().map_or(0, |m| m + 1);
    let expand = |nu: &[f64]| -> Vec<f64> { class_of.iter().map(|&c| nu[c]).collect() };
    let collapse = |grad: Vec<f64>| -> Vec<f64> {
        let mut out = vec![0.0; n_class];
        for (i, v) in grad.into_iter().enumerate() {
            out[class_of[i]] += v;
        }
        out
    };

    let center = vec![opts.mu0; n_class];
    let radius = 2.0 * (n_class as f64).sqrt() * bound.max(opts.mu0);
    let pairs: Vec<(usize, usize)> = beta
        .active_pairs()
        .into_iter()
        .filter(|&(i, j)| class_of[i] != class_of[j])
        .collect();

    let run = ellipsoid::minimize(&center, radius, opts.tol, max_iter, |nu| {
        let mu = expand(nu);
        let mu = mu.as_slice();
        // Feasibility cuts: nonnegativity, then the transfer-price constraints,
        // then positivity of every MT's price.
        if let Some(i) = (0..n).filter(|&i| mu[i] < 0.0).min_by(|&a, &b| mu[a].total_cmp(&mu[b])) {
            let mut grad = vec![0.0; n];
            grad[i] = -1.0;
            return Cut::Feasibility(collapse(grad));
        }
        let worst = pairs
            .iter()
            .map(|&(i, j)| ((i, j), beta.get(i, j) * mu[j] - mu[i]))
            .filter(|(_, v)| *v > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some(((i, j), _)) = worst {
            let mut grad = vec![0.0; n];
            grad[j] += beta.get(i, j);
            grad[i] -= 1.0;
            return Cut::Feasibility(collapse(grad));
        }
        let c = dual::prices(g, mu);
        if let Some(k) = (0..g.n_mt()).find(|&k| !(c[k] > 0.0)) {
            return Cut::Feasibility(collapse((0..n).map(|i| -g.b[(i, k)]).collect()));
        }
        let state = DualState::new(mu.to_vec());
        let p = dual_power_alloc(g, &state).expect("prices checked positive");
        let value = dual_value(g, budget, &state).expect("prices checked positive");
        Cut::Objective {
            value,
            subgradient: collapse(dual_subgradient(g, budget, &p)),
        }
    });

    let Some(best) = run.best.as_deref().map(expand) else {
        return Err(Error::NonConvergence {
            iterations: run.iterations,
            gap: f64::INFINITY,
            best: DualState::new(expand(&center)),
        });
    };
    if run.gap() > opts.tol {
        return Err(Error::NonConvergence {
            iterations: run.iterations,
            gap: run.gap(),
            best: DualState::new(best),
        });
    }
    Ok(DualSolution {
        state: DualState::new(best),
        value: run.best_value,
        lower_bound: run.lower_bound,
        iterations: run.iterations,
    })
}

/// Class index per BS: two BSs share a class when each reaches the other
/// through links with `β = 1`.
fn lossless_classes(beta: &Efficiency) -> Vec<usize> {
    let n = beta.n();
    let mut reach = DMatrix::from_fn(n, n, |i, j| i == j || beta.get(i, j) >= 1.0);
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[(i, m)] && reach[(m, j)] {
                    reach[(i, j)] = true;
                }
            }
        }
    }
    let mut class_of = vec![usize::MAX; n];
    let mut next = 0;
    for i in 0..n {
        if class_of[i] != usize::MAX {
            continue;
        }
        for j in i..n {
            if reach[(i, j)] && reach[(j, i)] {
                class_of[j] = next;
            }
        }
        next += 1;
    }
    class_of
}

/// BSs that hold energy or can be reached from one through usable links.
fn energized(budget: &[f64], beta: &Efficiency) -> Vec<bool> {
    let n = budget.len();
    let mut alive: Vec<bool> = budget.iter().map(|&e| e > 0.0).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if j != i && !alive[j] && beta.get(i, j) > 0.0 {
                alive[j] = true;
                stack.push(j);
            }
        }
    }
    alive
}

/// `δ_i = Σ_k b_ik p_k / η − E_i`.
pub fn net_exchange(gains: &ZfGains, p_star: &[f64], es: &EnergyState) -> Vec<f64> {
    gains
        .bs_power(p_star)
        .iter()
        .zip(es.budget())
        .map(|(used, e)| used / es.pa_eff() - e)
        .collect()
}

/// Closed-form powers for `state`, pulled back onto the power region, and
/// the transfers that support them.
fn primal_from_dual(
    g: &ZfGains,
    budget: &[f64],
    beta: &Efficiency,
    state: &DualState,
    min_scale: f64,
) -> Result<(Vec<f64>, TransferModel)> {
    let mut p = dual_power_alloc(g, state)?;
    // Multipliers that are optimal only to within the tolerance can make the
    // powers overshoot the region by a hair.
    let demand = g.bs_power(&p);
    if demand.iter().any(|&d| d > 0.0) {
        let (t, _) = max_demand_scale(budget, beta, &demand)?;
        if t < min_scale {
            return Err(Error::Inconsistent(format!(
                "closed-form powers exceed the power region by a factor {:.6}",
                1.0 / t
            )));
        }
        if t < 1.0 {
            p.iter_mut().for_each(|v| *v *= t);
        }
    }
    let tm = recover_transfers(g, &p, budget, beta)?;
    Ok((p, tm))
}

/// Solves the joint weighted sum-rate problem.
pub fn solve_p1(
    gains: &ZfGains,
    es: &EnergyState,
    beta: &Efficiency,
    opts: &SolveOptions,
) -> Result<Solution> {
    check_dims(gains, es, beta)?;
    let g = energy_gains(gains, es);
    let n = g.n_bs();
    let k_total = g.n_mt();

    // A BS with no way to obtain energy pins every MT it would carry to zero power.
    let alive = energized(es.budget(), beta);
    let bs_keep: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    let mt_keep: Vec<usize> = (0..k_total)
        .filter(|&k| (0..n).all(|i| alive[i] || g.b[(i, k)] == 0.0))
        .collect();

    let mut p = vec![0.0; k_total];
    let mut mu: Vec<f64> = alive.iter().map(|&a| if a { 0.0 } else { f64::INFINITY }).collect();
    let mut e = DMatrix::zeros(n, n);
    let mut dual_val = 0.0;
    let mut iterations = 0;

    if !mt_keep.is_empty() {
        // Work in units of the largest budget; the problem is invariant
        // under E → E/s, a → a·s, which keeps the tolerances meaningful.
        let scale = bs_keep.iter().map(|&i| es.budget()[i]).fold(0.0f64, f64::max);
        let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
        let sub_budget: Vec<f64> = bs_keep.iter().map(|&i| es.budget()[i] / scale).collect();
        let b = DMatrix::from_fn(bs_keep.len(), mt_keep.len(), |r, c| g.b[(bs_keep[r], mt_keep[c])]);
        let a: Vec<f64> = mt_keep.iter().map(|&k| g.a[k] * scale).collect();
        // At low SNR the objective is tiny; dividing the weights by an upper
        // bound on it makes the absolute tolerance act relative to it.
        let total: f64 = sub_budget.iter().sum();
        let bound: f64 = (0..mt_keep.len())
            .map(|c| {
                let b_max = b.column(c).max();
                g.weights[mt_keep[c]] * g.band_share * (a[c] * total / b_max).ln_1p() / LN_2
            })
            .sum();
        let obj_scale = if bound > 0.0 && bound < 1.0 { bound } else { 1.0 };
        let sub = ZfGains {
            a,
            b,
            t_dir: Vec::new(),
            weights: mt_keep.iter().map(|&k| g.weights[k] / obj_scale).collect(),
            band_share: g.band_share,
        };
        let sub_beta = beta.restrict(&bs_keep);

        let mut dual = dual_core(&sub, &sub_budget, &sub_beta, opts).map_err(|e| match e {
            Error::NonConvergence { iterations, gap, best } => Error::NonConvergence {
                iterations,
                gap,
                best: DualState::new(best.mu.iter().map(|m| m * obj_scale / scale).collect()),
            },
            other => other,
        })?;
        // The ellipsoid estimate only seeds the refinement, so any pull-back is accepted here.
        let (_, seed_tm) = primal_from_dual(&sub, &sub_budget, &sub_beta, &dual.state, 0.0)?;
        let e0: Vec<f64> = sub_beta
            .active_pairs()
            .iter()
            .map(|&(i, j)| seed_tm.e(i, j))
            .collect();
        let refined = polish::polish(&sub, &sub_budget, &sub_beta, &dual.state.mu, &e0)
            .filter(|pol| pol.residual < POLISH_ACCEPT.max(pol.floor))
            .and_then(|pol| {
                let state = DualState::new(pol.mu);
                let value = dual_value(&sub, &sub_budget, &state).ok()?;
                if value > dual.value + 1e-9 * (1.0 + dual.value.abs()) {
                    return None;
                }
                let primal = primal_from_dual(&sub, &sub_budget, &sub_beta, &state, MIN_SCALE).ok()?;
                Some((state, value, primal))
            });
        let (sub_p, tm) = match refined {
            Some((state, value, primal)) => {
                dual.state = state;
                dual.value = value;
                primal
            }
            None => match primal_from_dual(&sub, &sub_budget, &sub_beta, &dual.state, MIN_SCALE) {
                Ok(primal) => primal,
                // A pulled-back point is still feasible; keep it if the dual
                // value certifies it.
                Err(err @ Error::Inconsistent(_)) => {
                    let (p, tm) = primal_from_dual(&sub, &sub_budget, &sub_beta, &dual.state, 0.0)?;
                    if dual.value - sub.objective(&p) > GAP_ACCEPT * (1.0 + dual.value.abs()) {
                        return Err(err);
                    }
                    (p, tm)
                }
                Err(err) => return Err(err),
            },
        };

        for (r, &k) in mt_keep.iter().enumerate() {
            p[k] = sub_p[r] * scale;
        }
        for (r, &i) in bs_keep.iter().enumerate() {
            mu[i] = dual.state.mu[r] * obj_scale / scale;
            for (c, &j) in bs_keep.iter().enumerate() {
                e[(i, j)] = tm.e(r, c) * scale;
            }
        }
        dual_val = dual.value * obj_scale;
        iterations = dual.iterations;
    }

    let transfers = TransferModel::new(beta.clone(), e)?;
    let rates = gains.rates(&p);
    let objective = gains.objective(&p);
    Ok(Solution {
        net_exchange: net_exchange(gains, &p, es),
        duality_gap: dual_val - objective,
        p,
        transfers,
        mu: DualState::new(mu),
        rates,
        objective,
        iterations,
    })
}
