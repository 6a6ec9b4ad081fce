//! Seeded instance generators shared by the integration tests.
#![allow(dead_code)]

use ecomp::channel::{draw_rayleigh, zf_gains, Association, ClusterChannel, ZfGains};
use ecomp::energy::{Efficiency, EnergyState};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub ch: ClusterChannel,
    pub gains: ZfGains,
    pub es: EnergyState,
    pub beta: Efficiency,
    pub weights: Vec<f64>,
}

impl Instance {
    /// Strongest-BS association from the drawn channel, `M` MTs per BS at most.
    pub fn association(&self) -> Association {
        Association::strongest(&self.ch.block_power(), self.ch.m_ant()).unwrap()
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random `N × N` efficiencies in `(lo, hi)` that keep every direct link
/// strictly better than any two-hop relay.
pub fn random_efficiency<R: Rng>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Efficiency {
    loop {
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.random_range(lo..hi) });
        if let Ok(eff) = Efficiency::from_matrix(m) {
            return eff;
        }
    }
}

/// Rayleigh channel with unit direct variances and cross variances uniform
/// on `[0.05, 1]`, MT `k` homed at BS `k mod N`, budgets uniform on `[0, e_max]`.
pub fn random_instance<R: Rng>(n: usize, m: usize, k: usize, beta: Efficiency, e_max: f64, rng: &mut R) -> Instance {
    let var = DMatrix::from_fn(n, k, |i, mt| if mt % n == i { 1.0 } else { rng.random_range(0.05..1.0) });
    let budgets: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..e_max)).collect();
    let weights = vec![1.0; k];
    loop {
        let ch = draw_rayleigh(n, m, k, &var, rng).unwrap();
        if let Ok(gains) = zf_gains(&ch, &weights) {
            return Instance {
                ch,
                gains,
                es: EnergyState::from_budgets(budgets).unwrap(),
                beta,
                weights,
            };
        }
    }
}

/// Instance family of the oracle comparison: N=2, M=1, K=2.
pub fn two_cell(seed: u64, beta: f64) -> Instance {
    let mut r = rng(seed);
    random_instance(2, 1, 2, Efficiency::uniform(2, beta).unwrap(), 30.0, &mut r)
}

/// Instance family of the KKT certification: N=3, M=2, K=4, `0 < β < 1` per link.
pub fn three_cell(seed: u64) -> Instance {
    let mut r = rng(seed);
    let beta = random_efficiency(3, 0.05, 0.95, &mut r);
    random_instance(3, 2, 4, beta, 30.0, &mut r)
}
