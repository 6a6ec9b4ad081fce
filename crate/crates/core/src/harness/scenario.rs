//! Declarative experiment description, read from TOML.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::baselines::SchemeKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    /// Channel draws per placement and sweep point.
    pub realizations: usize,
    /// MT placements per sweep point; only meaningful for geometric channels.
    #[serde(default = "one")]
    pub placements: usize,
    pub schemes: Vec<SchemeKind>,
    /// Uniform transfer efficiencies; one curve per value for the schemes that use β.
    #[serde(default)]
    pub betas: Vec<f64>,
    pub cluster: ClusterSpec,
    pub channel: ChannelSpec,
    pub energy: EnergySpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub n_bs: usize,
    pub m_ant: usize,
    pub n_mt: usize,
    /// Rate weights; all ones when absent.
    pub weights: Option<Vec<f64>>,
    /// Linear noise power per MT.
    pub noise: Option<f64>,
    /// Noise power per MT in dBm; alternative to `noise`.
    pub noise_dbm: Option<f64>,
    #[serde(default = "unit")]
    pub pa_eff: f64,
    /// Grid draw `G` and circuit power `P_C`; budgets become `E + G − P_C`.
    #[serde(default)]
    pub grid_power: f64,
    #[serde(default)]
    pub circuit_power: f64,
    /// Most MTs one BS serves in the per-BS schemes; defaults to `m_ant`.
    pub association_capacity: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    /// Fixed `N × K` variance matrix, given as rows per BS.
    Rayleigh { variances: Vec<Vec<f64>> },
    /// MT `k` has home BS `k mod N` with variance `direct`; every other
    /// variance is drawn uniformly from `[cross_min, cross_max]` per realization.
    RandomCross {
        #[serde(default = "unit")]
        direct: f64,
        #[serde(default)]
        cross_min: f64,
        #[serde(default = "unit")]
        cross_max: f64,
    },
    /// BSs on an equilateral triangle, MTs uniform over each BS's hexagon.
    Hexagonal {
        #[serde(default = "default_isd")]
        inter_bs_distance: f64,
        mts_per_cell: usize,
        #[serde(default = "default_c0")]
        pathloss_c0_db: f64,
        #[serde(default = "default_d0")]
        pathloss_d0: f64,
        #[serde(default = "default_exp")]
        pathloss_exp: f64,
        /// Closest an MT may be to its BS; defaults to `pathloss_d0`.
        min_distance: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergySpec {
    Constant { budgets: Vec<f64> },
    /// Two BSs: `E_1` sweeps over `first`, `E_2 = total − E_1`.
    Split { total: f64, first: Vec<f64> },
    /// Each `E_i` uniform on `[0, 2E/N]` per realization, where `E` is the
    /// average sum energy, swept in dB.
    UniformRandom { mean_sum_db: Vec<f64> },
    /// Budgets from a generation profile, one sweep point per slot (or per
    /// scale when `aggregate_slots` averages over the slots).
    Profile {
        /// CSV path relative to the scenario file; the built-in synthetic
        /// profile when absent.
        source: Option<PathBuf>,
        /// `[w_wind, w_solar]` per BS.
        mix: Vec<[f64; 2]>,
        /// Values of the scale `Ē` in dBW.
        scale_dbw: Vec<f64>,
        #[serde(default = "one")]
        slot_stride: usize,
        /// Half-open slot range; the whole profile when absent.
        slots: Option<[usize; 2]>,
        #[serde(default)]
        aggregate_slots: bool,
    },
}

fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn default_isd() -> f64 {
    1000.0
}
fn default_c0() -> f64 {
    -60.0
}
fn default_d0() -> f64 {
    10.0
}
fn default_exp() -> f64 {
    3.7
}

/// Stream-index widths used to derive per-sample RNG streams.
pub(crate) const MAX_REALIZATIONS: usize = 1 << 24;
pub(crate) const MAX_PLACEMENTS: usize = 1 << 12;
pub(crate) const MAX_SLOTS: usize = 1 << 20;

impl Scenario {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let mut scenario: Scenario = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::Parse {
                path: origin.to_path_buf(),
                line,
                msg: e.message().to_string(),
            }
        })?;
        if let EnergySpec::Profile { source: Some(src), .. } = &mut scenario.energy {
            if src.is_relative() {
                if let Some(dir) = origin.parent() {
                    *src = dir.join(&*src);
                }
            }
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn noise_power(&self) -> f64 {
        match (self.cluster.noise, self.cluster.noise_dbm) {
            (Some(v), _) => v,
            (None, Some(dbm)) => 10f64.powf((dbm - 30.0) / 10.0),
            (None, None) => 1.0,
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        self.cluster
            .weights
            .clone()
            .unwrap_or_else(|| vec![1.0; self.cluster.n_mt])
    }

    pub fn association_capacity(&self) -> usize {
        self.cluster.association_capacity.unwrap_or(self.cluster.m_ant)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        let c = &self.cluster;
        let (n, m, k) = (c.n_bs, c.m_ant, c.n_mt);
        if n == 0 || m == 0 || k == 0 {
            return fail("n_bs, m_ant and n_mt must be positive".into());
        }
        if k > n * m {
            return fail(format!("n_mt = {k} exceeds n_bs·m_ant = {}", n * m));
        }
        if self.realizations == 0 || self.realizations > MAX_REALIZATIONS {
            return fail(format!("realizations must be in 1..={MAX_REALIZATIONS}"));
        }
        if self.placements == 0 || self.placements > MAX_PLACEMENTS {
            return fail(format!("placements must be in 1..={MAX_PLACEMENTS}"));
        }
        if self.schemes.is_empty() {
            return fail("scheme list is empty".into());
        }
        let uses_beta = self
            .schemes
            .iter()
            .any(|s| matches!(s, SchemeKind::Joint | SchemeKind::EnergyOnly));
        if uses_beta && self.betas.is_empty() {
            return fail("joint and energy_only schemes need at least one beta".into());
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b >= 0.0 && **b <= 1.0)) {
            return fail(format!("beta {b} is outside [0, 1]"));
        }
        if let Some(w) = &c.weights {
            if w.len() != k || w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return fail(format!("weights must be {k} positive numbers"));
            }
        }
        if c.noise.is_some() && c.noise_dbm.is_some() {
            return fail("give either noise or noise_dbm, not both".into());
        }
        if !(self.noise_power() > 0.0 && self.noise_power().is_finite()) {
            return fail("noise power must be positive".into());
        }
        if !(c.pa_eff > 0.0 && c.pa_eff <= 1.0) {
            return fail(format!("pa_eff = {} is outside (0, 1]", c.pa_eff));
        }
        if !(c.grid_power >= c.circuit_power && c.circuit_power >= 0.0) {
            return fail("grid_power must cover circuit_power, both nonnegative".into());
        }
        if self.association_capacity() == 0 || self.association_capacity() > m {
            return fail(format!("association_capacity must be in 1..={m}"));
        }
        if self.schemes.iter().any(|s| s.needs_association()) && k > n * self.association_capacity() {
            return fail("per-BS schemes cannot place every MT within association_capacity".into());
        }

        match &self.channel {
            ChannelSpec::Rayleigh { variances } => {
                if variances.len() != n || variances.iter().any(|r| r.len() != k) {
                    return fail(format!("variances must be {n} rows of {k} values"));
                }
                if variances.iter().flatten().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return fail("variances must be positive".into());
                }
            }
            ChannelSpec::RandomCross {
                direct,
                cross_min,
                cross_max,
            } => {
                if !(*direct > 0.0 && *cross_min >= 0.0 && cross_min <= cross_max && cross_max.is_finite()) {
                    return fail("random_cross needs direct > 0 and 0 ≤ cross_min ≤ cross_max".into());
                }
            }
            ChannelSpec::Hexagonal {
                inter_bs_distance,
                mts_per_cell,
                pathloss_d0,
                pathloss_exp,
                min_distance,
                ..
            } => {
                if !(1..=3).contains(&n) {
                    return fail("the hexagonal layout holds one to three BSs".into());
                }
                if n * mts_per_cell != k {
                    return fail(format!("n_mt = {k} must equal n_bs·mts_per_cell = {}", n * mts_per_cell));
                }
                if !(*inter_bs_distance > 0.0 && *pathloss_d0 > 0.0 && *pathloss_exp > 0.0) {
                    return fail("distances and pathloss exponent must be positive".into());
                }
                let dmin = min_distance.unwrap_or(*pathloss_d0);
                if !(dmin > 0.0 && dmin < inter_bs_distance / 2.0) {
                    return fail("min_distance must be positive and below half the BS spacing".into());
                }
            }
        }

        match &self.energy {
            EnergySpec::Constant { budgets } => {
                if budgets.len() != n || budgets.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
                    return fail(format!("budgets must be {n} nonnegative numbers"));
                }
            }
            EnergySpec::Split { total, first } => {
                if n != 2 {
                    return fail("split energy needs exactly two BSs".into());
                }
                if first.is_empty() || first.windows(2).any(|w| !(w[1] > w[0])) {
                    return fail("split sweep values must be nonempty and increasing".into());
                }
                if first.iter().any(|e| !(*e >= 0.0 && e <= total)) {
                    return fail(format!("split sweep values must lie in [0, {total}]"));
                }
            }
            EnergySpec::UniformRandom { mean_sum_db } => {
                if mean_sum_db.is_empty() || mean_sum_db.windows(2).any(|w| !(w[1] > w[0])) {
                    return fail("mean_sum_db must be nonempty and increasing".into());
                }
            }
            EnergySpec::Profile {
                mix,
                scale_dbw,
                slot_stride,
                slots,
                ..
            } => {
                if mix.len() != n || mix.iter().flatten().any(|w| !(*w >= 0.0)) {
                    return fail(format!("mix must hold {n} nonnegative [wind, solar] pairs"));
                }
                if scale_dbw.is_empty() || scale_dbw.iter().any(|s| !s.is_finite()) {
                    return fail("scale_dbw must be nonempty".into());
                }
                if *slot_stride == 0 {
                    return fail("slot_stride must be positive".into());
                }
                if let Some([lo, hi]) = slots {
                    if lo >= hi || *hi > MAX_SLOTS {
                        return fail("slots must be an increasing range".into());
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG4: &str = r#"
name = "two-cell sweep"
seed = 1
realizations = 10
schemes = ["joint"]
betas = [0.0, 1.0]

[cluster]
n_bs = 2
m_ant = 1
n_mt = 2

[channel]
kind = "rayleigh"
variances = [[1.0, 0.5], [0.5, 1.0]]

[energy]
kind = "split"
total = 30.0
first = [0.0, 15.0, 30.0]
"#;

    #[test]
    fn parses_and_validates() {
        let s = Scenario::from_toml_str(FIG4, Path::new("x.toml")).unwrap();
        assert_eq!(s.cluster.n_bs, 2);
        assert_eq!(s.noise_power(), 1.0);
        assert_eq!(s.weights(), vec![1.0, 1.0]);
    }

    #[test]
    fn reports_line_of_bad_value() {
        let text = FIG4.replace("realizations = 10", "realizations = \"ten\"");
        match Scenario::from_toml_str(&text, Path::new("x.toml")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unordered_sweep_and_missing_beta() {
        let text = FIG4.replace("first = [0.0, 15.0, 30.0]", "first = [15.0, 0.0]");
        assert!(matches!(Scenario::from_toml_str(&text, Path::new("x")), Err(Error::Validation(_))));
        let text = FIG4.replace("betas = [0.0, 1.0]", "");
        assert!(matches!(Scenario::from_toml_str(&text, Path::new("x")), Err(Error::Validation(_))));
    }

    #[test]
    fn dbm_noise() {
        let text = FIG4.replace("n_mt = 2", "n_mt = 2\nnoise_dbm = -85.0");
        let s = Scenario::from_toml_str(&text, Path::new("x")).unwrap();
        assert!((s.noise_power() / 10f64.powf(-11.5) - 1.0).abs() < 1e-12);
    }
}
