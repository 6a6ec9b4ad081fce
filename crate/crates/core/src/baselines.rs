//! Reference schemes that drop energy cooperation, communication
//! cooperation, or both. Each one reuses [`solve_p1`] on modified inputs.

use serde::{Deserialize, Serialize};

use crate::channel::{per_bs_zf_gains, zf_gains, Association, ClusterChannel, ZfGains};
use crate::energy::{Efficiency, EnergyState};
use crate::error::{Error, Result};
use crate::solver::{solve_p1, SolveOptions, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Joint transmission and energy cooperation.
    Joint,
    /// Joint transmission, no energy exchange.
    CommOnly,
    /// Per-BS transmission on orthogonal bands, with energy exchange.
    EnergyOnly,
    /// Per-BS transmission, no energy exchange.
    None,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [Self::Joint, Self::CommOnly, Self::EnergyOnly, Self::None];

    pub fn name(self) -> &'static str {
        match self {
            Self::Joint => "joint",
            Self::CommOnly => "comm_only",
            Self::EnergyOnly => "energy_only",
            Self::None => "none",
        }
    }

    pub fn needs_association(self) -> bool {
        matches!(self, Self::EnergyOnly | Self::None)
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scheme `{s}`")))
    }
}

/// A scheme together with the MT partition the per-BS schemes need.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeId {
    kind: SchemeKind,
    association: Option<Association>,
}

impl SchemeId {
    pub fn joint() -> Self {
        Self {
            kind: SchemeKind::Joint,
            association: None,
        }
    }

    pub fn comm_only() -> Self {
        Self {
            kind: SchemeKind::CommOnly,
            association: None,
        }
    }

    pub fn energy_only(association: Association) -> Self {
        Self {
            kind: SchemeKind::EnergyOnly,
            association: Some(association),
        }
    }

    pub fn none(association: Association) -> Self {
        Self {
            kind: SchemeKind::None,
            association: Some(association),
        }
    }

    pub fn new(kind: SchemeKind, association: Option<Association>) -> Result<Self> {
        if kind.needs_association() != association.is_some() {
            return Err(Error::InvalidInput(format!(
                "scheme {} {} an association",
                kind.name(),
                if kind.needs_association() { "requires" } else { "takes no" }
            )));
        }
        Ok(Self { kind, association })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn association(&self) -> Option<&Association> {
        self.association.as_ref()
    }
}

/// Joint transmission with every BS restricted to its own energy.
pub fn solve_comm_only(gains: &ZfGains, es: &EnergyState, opts: &SolveOptions) -> Result<Solution> {
    solve_p1(gains, es, &Efficiency::zero(gains.n_bs()), opts)
}

/// Per-BS zero-forcing over `1/N` bands with energy exchange.
pub fn solve_energy_only(
    ch: &ClusterChannel,
    association: &Association,
    es: &EnergyState,
    beta: &Efficiency,
    weights: &[f64],
    opts: &SolveOptions,
) -> Result<Solution> {
    let gains = per_bs_zf_gains(ch, association, weights)?;
    solve_p1(&gains, es, beta, opts)
}

/// Per-BS zero-forcing over `1/N` bands, each BS on its own energy.
pub fn solve_no_coop(
    ch: &ClusterChannel,
    association: &Association,
    es: &EnergyState,
    weights: &[f64],
    opts: &SolveOptions,
) -> Result<Solution> {
    solve_energy_only(ch, association, es, &Efficiency::zero(ch.n_bs()), weights, opts)
}

/// Dispatches on the scheme. The joint ZF gains are computed here unless
/// the caller passes them in (they are shared by the two joint schemes).
pub fn solve_scheme(
    scheme: &SchemeId,
    ch: &ClusterChannel,
    joint_gains: Option<&ZfGains>,
    es: &EnergyState,
    beta: &Efficiency,
    weights: &[f64],
    opts: &SolveOptions,
) -> Result<Solution> {
    let joint = |owned: &mut Option<ZfGains>| -> Result<ZfGains> {
        match joint_gains {
            Some(g) => Ok(g.clone()),
            None => {
                let g = zf_gains(ch, weights)?;
                *owned = Some(g.clone());
                Ok(g)
            }
        }
    };
    let mut cache = None;
    match (scheme.kind, scheme.association.as_ref()) {
        (SchemeKind::Joint, _) => solve_p1(&joint(&mut cache)?, es, beta, opts),
        (SchemeKind::CommOnly, _) => solve_comm_only(&joint(&mut cache)?, es, opts),
        (SchemeKind::EnergyOnly, Some(assoc)) => solve_energy_only(ch, assoc, es, beta, weights, opts),
        (SchemeKind::None, Some(assoc)) => solve_no_coop(ch, assoc, es, weights, opts),
        (kind, None) => Err(Error::InvalidInput(format!("scheme {} requires an association", kind.name()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::waterfill_sum_power;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn two_cell() -> ClusterChannel {
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.5, 0.2),
                Complex64::new(-0.3, 0.4),
                Complex64::new(0.9, -0.1),
            ],
        );
        ClusterChannel::new(2, 1, h).unwrap()
    }

    #[test]
    fn association_is_required_for_per_bs_schemes() {
        assert!(SchemeId::new(SchemeKind::EnergyOnly, None).is_err());
        assert!(SchemeId::new(SchemeKind::Joint, Some(Association::new(vec![0], 1).unwrap())).is_err());
        assert_eq!("comm_only".parse::<SchemeKind>().unwrap(), SchemeKind::CommOnly);
    }

    #[test]
    fn comm_only_is_zero_with_an_empty_bs() {
        let g = zf_gains(&two_cell(), &[1.0, 1.0]).unwrap();
        let es = EnergyState::from_budgets(vec![0.0, 7.0]).unwrap();
        let sol = solve_comm_only(&g, &es, &SolveOptions::default()).unwrap();
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn no_coop_decomposes_per_bs() {
        let ch = two_cell();
        let assoc = Association::new(vec![0, 1], 2).unwrap();
        let es = EnergyState::from_budgets(vec![2.0, 5.0]).unwrap();
        let sol = solve_no_coop(&ch, &assoc, &es, &[1.0, 1.0], &SolveOptions::default()).unwrap();
        // One MT per BS: it takes the whole budget, with gain |h_kk|².
        let gain0 = ch.block(0, 0)[0].norm_sqr();
        let gain1 = ch.block(1, 1)[0].norm_sqr();
        let expect = 0.5 * ((1.0 + gain0 * 2.0).log2() + (1.0 + gain1 * 5.0).log2());
        assert!((sol.objective - expect).abs() < 1e-8, "{} vs {expect}", sol.objective);
        assert_eq!(sol.transfers.transfers().iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn single_bs_energy_only_has_no_band_split() {
        let h = DMatrix::from_row_slice(2, 2, &[
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.5),
            Complex64::new(0.2, 0.0),
            Complex64::new(1.0, 0.0),
        ]);
        let ch = ClusterChannel::new(1, 2, h).unwrap();
        let assoc = Association::new(vec![0, 0], 1).unwrap();
        let es = EnergyState::from_budgets(vec![4.0]).unwrap();
        let sol = solve_energy_only(&ch, &assoc, &es, &Efficiency::zero(1), &[1.0, 1.0], &SolveOptions::default())
            .unwrap();
        let g = zf_gains(&ch, &[1.0, 1.0]).unwrap();
        let p = waterfill_sum_power(&[(1.0, g.a[0], 1.0), (1.0, g.a[1], 1.0)], 4.0);
        assert!((sol.objective - g.objective(&p)).abs() < 1e-8);
    }
}
