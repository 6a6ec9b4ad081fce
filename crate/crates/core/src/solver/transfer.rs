//! Recovering energy transfers once the optimal powers are known.

use nalgebra::DMatrix;

use crate::channel::ZfGains;
use crate::energy::{Efficiency, TransferModel};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome};

/// Flows below this are treated as zero when classifying a BS as sender or receiver.
const FLOW_EPS: f64 = 1e-12;

/// Finds transfers that cover the per-BS demand `Σ_k b_ik p_k`.
///
/// Among all feasible patterns the one with the least total injection is
/// chosen (phase 1 establishes feasibility, phase 2 minimizes `Σ e_ij`).
/// Any remaining simultaneous send/receive at a BS is then cancelled by
/// rerouting through the direct link, so each BS either only sends or only
/// receives whenever relaying is lossier than direct transfer.
pub fn recover_transfers(
    gains: &ZfGains,
    p_star: &[f64],
    budget: &[f64],
    beta: &Efficiency,
) -> Result<TransferModel> {
    let demand = gains.bs_power(p_star);
    transfers_for_demand(&demand, budget, beta)
}

pub(crate) fn transfers_for_demand(
    demand: &[f64],
    budget: &[f64],
    beta: &Efficiency,
) -> Result<TransferModel> {
    let n = budget.len();
    if demand.len() != n || beta.n() != n {
        return Err(Error::InvalidInput("dimension mismatch in transfer recovery".into()));
    }
    let scale = budget
        .iter()
        .chain(demand)
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-9 * scale;
    if demand.iter().zip(budget).all(|(d, e)| d <= e) {
        return Ok(TransferModel::idle(beta.clone()));
    }
    let pairs = beta.active_pairs();
    if pairs.is_empty() {
        let worst = demand
            .iter()
            .zip(budget)
            .map(|(d, e)| d - e)
            .fold(0.0, f64::max);
        if worst > tol {
            return Err(Error::Inconsistent(format!(
                "demand exceeds a budget by {worst:.3e} and no transfers are possible"
            )));
        }
        return Ok(TransferModel::idle(beta.clone()));
    }
    let mut lp = LinearProgram::new(vec![1.0; pairs.len()]);
    for i in 0..n {
        let mut row = vec![0.0; pairs.len()];
        for (v, &(from, to)) in pairs.iter().enumerate() {
            if from == i {
                row[v] += 1.0;
            }
            if to == i {
                row[v] -= beta.get(from, to);
            }
        }
        lp.le(row, budget[i] - demand[i]);
    }
    let x = match lp.solve(tol) {
        LpOutcome::Optimal { x, .. } => x,
        LpOutcome::Infeasible { residual } => {
            return Err(Error::Inconsistent(format!(
                "no transfer pattern covers the demand (shortfall {residual:.3e})"
            )))
        }
        LpOutcome::Unbounded => {
            return Err(Error::Inconsistent("transfer LP is unbounded".into()))
        }
    };
    let mut e = DMatrix::zeros(n, n);
    for (v, &(from, to)) in pairs.iter().enumerate() {
        if x[v] > FLOW_EPS * scale {
            e[(from, to)] = x[v];
        }
    }
    cancel_bidirectional(&mut e, beta);
    TransferModel::new(beta.clone(), e)
}

/// Result of rerouting one `from → hub → to` chain onto the direct link `from → to`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reroute {
    pub transfers: DMatrix<f64>,
    /// Energy freed at the hub, `m·(1 − β_{from,hub} β_{hub,to} / β_{from,to})`.
    pub freed: f64,
}

/// Replaces part of the chain `from → hub → to` by the direct link.
///
/// The hub stops forwarding `m` units to `to`; `from` sends `to` directly
/// what it used to deliver through the hub, and cuts its transfer to the hub
/// by the same amount. `from` and `to` see no change in available power and
/// the hub keeps `freed ≥ 0` extra units. When `from == to` this is plain
/// cancellation of opposite flows on one link. With `redistribute`, the
/// hub then injects `freed/N` towards every other BS, which leaves every BS
/// with strictly more available power when `freed > 0`.
pub fn reroute(
    e: &DMatrix<f64>,
    beta: &Efficiency,
    hub: usize,
    from: usize,
    to: usize,
    redistribute: bool,
) -> Option<Reroute> {
    let n = beta.n();
    if hub == from || hub == to {
        return None;
    }
    let direct = beta.get_or_unit(from, to);
    let (b_in, b_out) = (beta.get(from, hub), beta.get(hub, to));
    if direct <= 0.0 || b_out <= 0.0 {
        return None;
    }
    let ratio = b_out / direct;
    let m = e[(hub, to)].min(e[(from, hub)] / ratio);
    if !(m > 0.0) {
        return None;
    }
    let mut t = e.clone();
    t[(hub, to)] -= m;
    t[(from, hub)] = (t[(from, hub)] - ratio * m).max(0.0);
    if from != to {
        t[(from, to)] += ratio * m;
    }
    let freed = m * (1.0 - b_in * b_out / direct);
    if redistribute && freed > 0.0 {
        for j in (0..n).filter(|&j| j != hub) {
            t[(hub, j)] += freed / n as f64;
        }
    }
    Some(Reroute { transfers: t, freed })
}

/// A BS that both receives and sends more than `eps`, with its largest
/// incoming and outgoing partners: `(hub, from, to)`.
pub fn find_bidirectional(e: &DMatrix<f64>, beta: &Efficiency, eps: f64) -> Option<(usize, usize, usize)> {
    let n = beta.n();
    for hub in 0..n {
        let from = (0..n)
            .filter(|&j| j != hub && e[(j, hub)] * beta.get(j, hub) > eps)
            .max_by(|&a, &b| e[(a, hub)].total_cmp(&e[(b, hub)]));
        let to = (0..n)
            .filter(|&j| j != hub && e[(hub, j)] > eps)
            .max_by(|&a, &b| e[(hub, a)].total_cmp(&e[(hub, b)]));
        if let (Some(from), Some(to)) = (from, to) {
            return Some((hub, from, to));
        }
    }
    None
}

/// Cancels simultaneous send/receive wherever rerouting frees energy or is neutral.
fn cancel_bidirectional(e: &mut DMatrix<f64>, beta: &Efficiency) {
    let n = beta.n();
    for _ in 0..4 * n * n {
        let Some((hub, from, to)) = find_bidirectional(e, beta, 0.0) else {
            return;
        };
        let direct = beta.get_or_unit(from, to);
        if direct + 1e-15 < beta.get(from, hub) * beta.get(hub, to) {
            // Relaying beats the direct link; the flow pattern is intentional.
            return;
        }
        match reroute(e, beta, hub, from, to, false) {
            Some(r) => {
                *e = r.transfers;
                // Clear round-off remnants of the exhausted link.
                for v in e.iter_mut() {
                    if *v < 1e-15 {
                        *v = 0.0;
                    }
                }
            }
            None => return,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{available_power, grid_neutrality_check, EnergyState};

    #[test]
    fn no_transfer_when_budgets_suffice() {
        let beta = Efficiency::uniform(2, 0.5).unwrap();
        let tm = transfers_for_demand(&[3.0, 4.0], &[5.0, 4.0], &beta).unwrap();
        assert_eq!(tm.transfers().iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn two_bs_hand_solved() {
        let beta = Efficiency::uniform(2, 0.5).unwrap();
        let tm = transfers_for_demand(&[12.0, 0.0], &[10.0, 4.0], &beta).unwrap();
        assert!((tm.e(1, 0) - 4.0).abs() < 1e-12);
        assert_eq!(tm.e(0, 1), 0.0);
        let g = grid_neutrality_check(&tm);
        assert!((g.injected - g.drawn - g.lost).abs() < 1e-12);
    }

    #[test]
    fn infeasible_demand_is_inconsistent() {
        let beta = Efficiency::uniform(2, 0.5).unwrap();
        assert!(matches!(
            transfers_for_demand(&[13.0, 0.0], &[10.0, 4.0], &beta),
            Err(Error::Inconsistent(_))
        ));
        assert!(matches!(
            transfers_for_demand(&[11.0, 0.0], &[10.0, 4.0], &Efficiency::zero(2)),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn cancellation_removes_opposite_flows() {
        let beta = Efficiency::uniform(2, 0.8).unwrap();
        let mut e = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 2.0, 0.0]);
        let es = EnergyState::from_budgets(vec![5.0, 5.0]).unwrap();
        let before = TransferModel::new(beta.clone(), e.clone()).unwrap();
        cancel_bidirectional(&mut e, &beta);
        let after = TransferModel::new(beta.clone(), e.clone()).unwrap();
        assert!(e[(0, 1)] == 0.0 || e[(1, 0)] == 0.0);
        for i in 0..2 {
            assert!(available_power(&es, &after, i) >= available_power(&es, &before, i) - 1e-12);
        }
    }
}
