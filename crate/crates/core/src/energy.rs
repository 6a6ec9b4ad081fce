//! Hybrid energy budgets and inter-BS energy transfer through the grid.
//!
//! BS `i` injects `e_ij` into the grid and BS `j` draws `β_ij·e_ij`; the
//! remaining `(1 − β_ij)·e_ij` is lost, so the net energy taken from the grid
//! is zero.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyState {
    re: Vec<f64>,
    grid: f64,
    circuit: f64,
    pa_eff: f64,
    budget: Vec<f64>,
}

impl EnergyState {
    /// `E_i = RE_i + G − P_C` with a constant grid draw `G ≥ P_C`.
    pub fn new(re: Vec<f64>, grid: f64, circuit: f64, pa_eff: f64) -> Result<Self> {
        if re.is_empty() {
            return Err(Error::InvalidInput("no base stations".into()));
        }
        if re.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidInput("renewable rates must be nonnegative".into()));
        }
        if !(grid >= 0.0 && circuit >= 0.0) {
            return Err(Error::InvalidInput("grid draw and circuit power must be nonnegative".into()));
        }
        if grid < circuit {
            return Err(Error::InvalidInput(format!(
                "grid draw {grid} is below the circuit power {circuit}"
            )));
        }
        if !(pa_eff > 0.0 && pa_eff <= 1.0) {
            return Err(Error::InvalidInput(format!("PA efficiency {pa_eff} not in (0, 1]")));
        }
        let budget = re.iter().map(|r| r + grid - circuit).collect();
        Ok(Self {
            re,
            grid,
            circuit,
            pa_eff,
            budget,
        })
    }

    /// Budgets given directly (`G = P_C`, `η = 1`).
    pub fn from_budgets(budgets: Vec<f64>) -> Result<Self> {
        Self::new(budgets, 0.0, 0.0, 1.0)
    }

    pub fn n_bs(&self) -> usize {
        self.budget.len()
    }

    pub fn budget(&self) -> &[f64] {
        &self.budget
    }

    pub fn renewable(&self) -> &[f64] {
        &self.re
    }

    pub fn grid(&self) -> f64 {
        self.grid
    }

    pub fn circuit(&self) -> f64 {
        self.circuit
    }

    pub fn pa_eff(&self) -> f64 {
        self.pa_eff
    }
}

/// Pairwise transfer efficiencies `β_ij`; the diagonal is unused and stored as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Efficiency {
    m: DMatrix<f64>,
}

impl Efficiency {
    pub fn uniform(n: usize, beta: f64) -> Result<Self> {
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { beta }))
    }

    pub fn zero(n: usize) -> Self {
        Self {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn from_matrix(mut m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || m.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "efficiency matrix must be square and nonempty, got {}×{}",
                m.nrows(),
                m.ncols()
            )));
        }
        for i in 0..n {
            m[(i, i)] = 0.0;
            for j in 0..n {
                let b = m[(i, j)];
                if !(0.0..=1.0).contains(&b) {
                    return Err(Error::InvalidInput(format!("β[{i}][{j}] = {b} not in [0, 1]")));
                }
            }
        }
        let eff = Self { m };
        if eff.strictly_interior() {
            for i in 0..n {
                for j in 0..n {
                    for r in 0..n {
                        if i == j || r == i || r == j {
                            continue;
                        }
                        if eff.get(i, j) <= eff.get(i, r) * eff.get(r, j) {
                            return Err(Error::InvalidInput(format!(
                                "relaying {i}→{r}→{j} is no lossier than the direct transfer"
                            )));
                        }
                    }
                }
            }
        }
        Ok(eff)
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// True when `0 < β_ij < 1` for every ordered pair.
    pub fn strictly_interior(&self) -> bool {
        let n = self.n();
        n > 1
            && (0..n).all(|i| {
                (0..n).all(|j| i == j || (self.get(i, j) > 0.0 && self.get(i, j) < 1.0))
            })
    }

    /// Ordered pairs with a usable (nonzero) efficiency.
    pub fn active_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && self.get(i, j) > 0.0)
            .collect()
    }

    pub fn restrict(&self, keep: &[usize]) -> Self {
        Self {
            m: DMatrix::from_fn(keep.len(), keep.len(), |a, b| self.m[(keep[a], keep[b])]),
        }
    }

    /// Efficiency used in the rerouting construction; a BS "relays to itself" losslessly.
    pub(crate) fn get_or_unit(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else {
            self.get(i, j)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferModel {
    pub beta: Efficiency,
    e: DMatrix<f64>,
}

impl TransferModel {
    pub fn new(beta: Efficiency, e: DMatrix<f64>) -> Result<Self> {
        let n = beta.n();
        if e.nrows() != n || e.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "transfer matrix is {}×{}, expected {n}×{n}",
                e.nrows(),
                e.ncols()
            )));
        }
        for i in 0..n {
            if e[(i, i)] != 0.0 {
                return Err(Error::InvalidInput(format!("self-transfer at BS {i}")));
            }
            for j in 0..n {
                if !(e[(i, j)] >= 0.0 && e[(i, j)].is_finite()) {
                    return Err(Error::InvalidInput(format!("e[{i}][{j}] = {} is negative", e[(i, j)])));
                }
            }
        }
        Ok(Self { beta, e })
    }

    /// No energy exchanged.
    pub fn idle(beta: Efficiency) -> Self {
        let n = beta.n();
        Self {
            beta,
            e: DMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.beta.n()
    }

    pub fn e(&self, i: usize, j: usize) -> f64 {
        self.e[(i, j)]
    }

    pub fn transfers(&self) -> &DMatrix<f64> {
        &self.e
    }

    /// Energy BS `i` receives, `Σ_j β_ji e_ji`.
    pub fn inflow(&self, i: usize) -> f64 {
        (0..self.n())
            .filter(|&j| j != i)
            .map(|j| self.beta.get(j, i) * self.e[(j, i)])
            .sum()
    }

    /// Energy BS `i` injects, `Σ_j e_ij`.
    pub fn outflow(&self, i: usize) -> f64 {
        (0..self.n()).filter(|&j| j != i).map(|j| self.e[(i, j)]).sum()
    }

    /// `inflow − outflow`: positive draws from the grid, negative injects.
    pub fn net_draw(&self, i: usize) -> f64 {
        self.inflow(i) - self.outflow(i)
    }
}

/// `η·(E_i + Σ_j β_ji e_ji − Σ_j e_ij)`; negative values flag an infeasible transfer pattern.
pub fn available_power(es: &EnergyState, tm: &TransferModel, i: usize) -> f64 {
    es.pa_eff * (es.budget[i] + tm.net_draw(i))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBalance {
    pub injected: f64,
    pub drawn: f64,
    pub lost: f64,
}

/// Totals injected into, drawn from, and lost in the grid.
pub fn grid_neutrality_check(tm: &TransferModel) -> GridBalance {
    let mut out = GridBalance {
        injected: 0.0,
        drawn: 0.0,
        lost: 0.0,
    };
    for (i, j) in (0..tm.n()).flat_map(|i| (0..tm.n()).map(move |j| (i, j))) {
        if i == j {
            continue;
        }
        let e = tm.e[(i, j)];
        let b = tm.beta.get(i, j);
        out.injected += e;
        out.drawn += b * e;
        out.lost += (1.0 - b) * e;
    }
    out
}

/// Frontier of the two-BS power region, ordered by increasing `P_1`.
///
/// The upper-left branch sends energy 1→2 (`e_21 = 0`), the lower-right
/// branch sends 2→1 (`e_12 = 0`); `samples` points are taken on each branch
/// and they share the no-transfer corner `(E_1, E_2)`.
pub fn power_region_boundary(
    budgets: &[f64],
    beta: &Efficiency,
    samples: usize,
) -> Result<Vec<[f64; 2]>> {
    if budgets.len() != 2 || beta.n() != 2 {
        return Err(Error::Unsupported(format!(
            "power region is drawn for two BSs, got {}",
            budgets.len()
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidInput("need at least two samples per branch".into()));
    }
    let (e1, e2) = (budgets[0], budgets[1]);
    if !(e1 >= 0.0 && e2 >= 0.0) {
        return Err(Error::InvalidInput("budgets must be nonnegative".into()));
    }
    let (b12, b21) = (beta.get(0, 1), beta.get(1, 0));
    let step = |s: usize| s as f64 / (samples - 1) as f64;
    let mut out = Vec::with_capacity(2 * samples - 1);
    for s in (0..samples).rev() {
        let sent = e1 * step(s);
        out.push([e1 - sent, e2 + b12 * sent]);
    }
    for s in 1..samples {
        let sent = e2 * step(s);
        out.push([e1 + b21 * sent, e2 - sent]);
    }
    Ok(out)
}

/// Largest `t ∈ [0, 1]` such that per-BS demands `t·demand` can be met by
/// some transfer pattern, together with that pattern (variables indexed by
/// [`Efficiency::active_pairs`]).
pub fn max_demand_scale(
    budget: &[f64],
    beta: &Efficiency,
    demand: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = budget.len();
    if demand.len() != n || beta.n() != n {
        return Err(Error::InvalidInput("dimension mismatch in demand check".into()));
    }
    let pairs = beta.active_pairs();
    // Variables: [t, e_pairs...]; maximize t.
    let mut cost = vec![0.0; 1 + pairs.len()];
    cost[0] = -1.0;
    let mut lp = LinearProgram::new(cost);
    for i in 0..n {
        let mut row = vec![0.0; 1 + pairs.len()];
        row[0] = demand[i];
        for (v, &(from, to)) in pairs.iter().enumerate() {
            if from == i {
                row[1 + v] += 1.0;
            }
            if to == i {
                row[1 + v] -= beta.get(from, to);
            }
        }
        lp.le(row, budget[i]);
    }
    let mut cap = vec![0.0; 1 + pairs.len()];
    cap[0] = 1.0;
    lp.le(cap, 1.0);
    match lp.solve(1e-12) {
        LpOutcome::Optimal { x, .. } => Ok((x[0].min(1.0), x[1..].to_vec())),
        other => Err(Error::Inconsistent(format!(
            "demand-scaling LP failed: {other:?}"
        ))),
    }
}

/// Whether the per-BS transmit powers `demand` lie in the power region.
pub fn region_contains(budget: &[f64], beta: &Efficiency, demand: &[f64], tol: f64) -> Result<bool> {
    if demand.iter().all(|d| *d <= 0.0) {
        return Ok(true);
    }
    let (t, _) = max_demand_scale(budget, beta, demand)?;
    Ok(t >= 1.0 - tol)
}
