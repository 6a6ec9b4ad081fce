//! Local refinement of near-optimal multipliers.
//!
//! The ellipsoid method certifies the dual value, but the dual is flat near
//! its minimum, so the multipliers (and hence the closed-form powers) are
//! only accurate to roughly the square root of the gap. A few semismooth
//! Newton steps on the KKT system, written with the complementarity
//! function `min(x, y)`, recover them to round-off.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use super::dual::{prices, waterfill};
use crate::channel::ZfGains;
use crate::energy::Efficiency;

const MAX_STEPS: usize = 60;
/// Relative distance to the switch-off price treated as being on it; the
/// wider band is tried when a step fails.
const KINK: f64 = 1e-6;
const WIDE_KINK: f64 = 1e-2;

pub(crate) struct Polished {
    pub mu: Vec<f64>,
    pub residual: f64,
    /// Residual reachable in floating point: powers are differences
    /// `w/(c ln 2) − 1/a`, which cancel badly when `a` is small.
    pub floor: f64,
}

struct System<'a> {
    g: &'a ZfGains,
    budget: &'a [f64],
    beta: &'a Efficiency,
    pairs: Vec<(usize, usize)>,
    /// Per-BS multiplier scale, so BSs whose prices differ by orders of
    /// magnitude are weighed alike.
    mu_scale: Vec<f64>,
    e_scale: f64,
}

impl System<'_> {
    fn dim(&self) -> usize {
        self.g.n_bs() + self.pairs.len()
    }

    /// Residual at `x = (μ, e)`, the residual of the linearized piece and
    /// its Jacobian; `None` if some price is not positive.
    fn eval(&self, x: &[f64], kink: f64) -> Option<Eval> {
        let n = self.g.n_bs();
        let k_total = self.g.n_mt();
        let mu = &x[..n];
        let e = &x[n..];
        let c = prices(self.g, mu);
        if c.iter().any(|&ck| !(ck > 0.0)) {
            return None;
        }
        let mut p = vec![0.0; k_total];
        let mut p_model = vec![0.0; k_total];
        let mut dp = vec![0.0; k_total];
        for k in 0..k_total {
            let w = self.g.effective_weight(k);
            p[k] = waterfill(w, self.g.a[k], c[k]);
            p_model[k] = p[k];
            // At the switch-off price both branches belong to the generalized
            // Jacobian; the active one keeps the system from going singular.
            if p[k] > 0.0 || c[k] * LN_2 <= (1.0 + kink) * w * self.g.a[k] {
                p_model[k] = w / (LN_2 * c[k]) - 1.0 / self.g.a[k];
                dp[k] = -w / (LN_2 * c[k] * c[k]);
            }
        }
        let dim = self.dim();
        let mut slack = DVector::from_column_slice(self.budget);
        for (v, &(from, to)) in self.pairs.iter().enumerate() {
            slack[from] -= e[v];
            slack[to] += self.beta.get(from, to) * e[v];
        }
        let mut slack_model = slack.clone();
        for i in 0..n {
            for k in 0..k_total {
                slack[i] -= self.g.b[(i, k)] * p[k];
            }
        }

        // A BS with unspent energy and every MT switched off has a flat row.
        // Linearizing the active branch of the MT closest to switching on
        // lets Newton move its price.
        for i in 0..n {
            let served = (0..k_total).filter(|&k| self.g.b[(i, k)] > 0.0);
            if slack[i] <= 1e-9 * self.e_scale || served.clone().any(|k| p[k] > 0.0) {
                continue;
            }
            let closest = served.min_by(|&k, &l| {
                let ratio = |k: usize| c[k] * LN_2 / (self.g.effective_weight(k) * self.g.a[k]);
                ratio(k).total_cmp(&ratio(l))
            });
            if let Some(k) = closest {
                let w = self.g.effective_weight(k);
                p_model[k] = w / (LN_2 * c[k]) - 1.0 / self.g.a[k];
                dp[k] = -w / (LN_2 * c[k] * c[k]);
            }
        }

        let mut ds = DMatrix::<f64>::zeros(n, dim);
        for i in 0..n {
            for k in 0..k_total {
                let b = self.g.b[(i, k)];
                if b == 0.0 {
                    continue;
                }
                slack_model[i] -= b * p_model[k];
                for l in 0..n {
                    ds[(i, l)] -= b * dp[k] * self.g.b[(l, k)];
                }
            }
        }
        for (v, &(from, to)) in self.pairs.iter().enumerate() {
            ds[(from, n + v)] -= 1.0;
            ds[(to, n + v)] += self.beta.get(from, to);
        }

        let mut f = DVector::<f64>::zeros(dim);
        let mut model = DVector::<f64>::zeros(dim);
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        let mut mu_branch = vec![false; n];
        for i in 0..n {
            let left = mu[i] / self.mu_scale[i];
            let right = slack[i] / self.e_scale;
            if left < right {
                f[i] = left;
                model[i] = left;
                mu_branch[i] = true;
                jac[(i, i)] = 1.0 / self.mu_scale[i];
            } else {
                f[i] = right;
                model[i] = slack_model[i] / self.e_scale;
                for col in 0..dim {
                    jac[(i, col)] = ds[(i, col)] / self.e_scale;
                }
            }
        }
        for (v, &(from, to)) in self.pairs.iter().enumerate() {
            let row = n + v;
            let left = e[v] / self.e_scale;
            let ms = self.mu_scale[from].max(self.mu_scale[to]);
            let right = (mu[from] - self.beta.get(from, to) * mu[to]) / ms;
            if left < right {
                f[row] = left;
                model[row] = left;
                jac[(row, n + v)] = 1.0 / self.e_scale;
            } else {
                f[row] = right;
                model[row] = right;
                jac[(row, from)] += 1.0 / ms;
                jac[(row, to)] -= self.beta.get(from, to) / ms;
            }
        }
        Some(Eval {
            f,
            model,
            jac,
            mu_branch,
        })
    }
}

struct Eval {
    f: DVector<f64>,
    model: DVector<f64>,
    jac: DMatrix<f64>,
    mu_branch: Vec<bool>,
}

/// Refines `(μ, e)` towards a KKT point. Returns `None` when Newton stalls
/// or lands outside the dual domain; the caller then keeps its own estimate.
pub(crate) fn polish(
    g: &ZfGains,
    budget: &[f64],
    beta: &Efficiency,
    mu0: &[f64],
    e0: &[f64],
) -> Option<Polished> {
    let n = g.n_bs();
    let pairs = beta.active_pairs();
    let mu_max = mu0.iter().fold(0.0f64, |a, &m| a.max(m));
    if !(mu_max > 0.0) || !mu_max.is_finite() {
        return None;
    }
    // Price at which every MT drawing from BS i would switch off.
    let mu_scale: Vec<f64> = (0..n)
        .map(|i| {
            let off = (0..g.n_mt())
                .filter(|&k| g.b[(i, k)] > 0.0)
                .map(|k| g.effective_weight(k) * g.a[k] / (LN_2 * g.b[(i, k)]))
                .fold(0.0f64, f64::max);
            if off > 0.0 && off.is_finite() {
                // A price near the switch-off level is firmly positive, so
                // the slack branch of the complementarity should win there.
                off / 100.0
            } else {
                mu_max
            }
        })
        .collect();
    let e_scale = budget.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if !(e_scale > 0.0) {
        return None;
    }
    let sys = System {
        g,
        budget,
        beta,
        pairs,
        mu_scale: mu_scale.clone(),
        e_scale,
    };
    let mut x: Vec<f64> = mu0.iter().chain(e0).copied().collect();
    let mut cur = sys.eval(&x, KINK)?;
    for _ in 0..MAX_STEPS {
        if cur.f.amax() < 1e-15 {
            break;
        }
        let next = newton_step(&sys, &x, &cur, mu_max).or_else(|| {
            let wide = sys.eval(&x, WIDE_KINK)?;
            newton_step(&sys, &x, &wide, mu_max)
        });
        match next {
            Some((nx, ne)) => {
                x = nx;
                cur = ne;
            }
            None => break,
        }
    }
    let residual = cur.f.amax();
    let mu: Vec<f64> = x[..n].to_vec();
    let e: Vec<f64> = x[n..].to_vec();
    let neg = 1e-12;
    if mu.iter().zip(&mu_scale).any(|(&m, &s)| m < -neg * s) || e.iter().any(|&v| v < -neg * e_scale) {
        return None;
    }
    let c = prices(g, &mu);
    let floor = (0..g.n_mt())
        .filter(|&k| waterfill(g.effective_weight(k), g.a[k], c[k]) > 0.0)
        .map(|k| g.b.column(k).max() / g.a[k])
        .fold(0.0f64, f64::max)
        * 64.0
        * f64::EPSILON
        / e_scale;
    Some(Polished {
        mu: mu.into_iter().map(|m| m.max(0.0)).collect(),
        residual,
        floor,
    })
}

/// One damped Newton step from `x`; `None` if no step length decreases `‖F‖²`.
fn newton_step(sys: &System, x: &[f64], cur: &Eval, mu_max: f64) -> Option<(Vec<f64>, Eval)> {
    let n = sys.g.n_bs();
    let dim = sys.dim();
    // Equilibrate rows and columns first; prices of different BSs can be
    // orders of magnitude apart and would otherwise fall below the cutoff.
    let col: Vec<f64> = (0..dim)
        .map(|j| if j < n { x[j].abs().max(1e-12 * mu_max) } else { sys.e_scale })
        .collect();
    let mut jac = cur.jac.clone();
    for (j, &cj) in col.iter().enumerate() {
        jac.column_mut(j).scale_mut(cj);
    }
    let mut rhs = -&cur.model;
    for i in 0..dim {
        let r = jac.row(i).amax();
        if r > 0.0 {
            jac.row_mut(i).scale_mut(1.0 / r);
            rhs[i] /= r;
        }
    }
    let svd = jac.svd(true, true);
    let cutoff = 1e-13 * svd.singular_values.max();
    let mut step = svd.solve(&rhs, cutoff).ok()?;
    for (j, &cj) in col.iter().enumerate() {
        step[j] *= cj;
    }
    let norm = cur.f.norm_squared();
    let mut t = 1.0;
    while t > 1e-10 {
        // Powers are convex in the prices, so a falling price that sets a
        // budget is moved along 1/μ, in which single-BS powers are linear.
        let trial: Vec<f64> = (0..dim)
            .map(|j| {
                let (xj, sj) = (x[j], t * step[j]);
                if j < n && !cur.mu_branch[j] && sj < 0.0 && xj > 0.0 {
                    xj * xj / (xj - sj)
                } else {
                    xj + sj
                }
            })
            .collect();
        if let Some(next) = sys.eval(&trial, KINK) {
            let tn = next.f.norm_squared();
            if tn < norm * (1.0 - 1e-4 * t) || tn == 0.0 {
                return Some((trial, next));
            }
        }
        t *= 0.8;
    }
    None
}
