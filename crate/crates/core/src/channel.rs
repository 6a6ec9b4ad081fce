//! Cluster channels and zero-forcing precoding gains.
//!
//! A cluster has `N` base stations with `M` antennas each and `K`
//! single-antenna mobile terminals. Row `k` of the channel matrix is the
//! concatenation `[h_1k … h_Nk]` of the per-BS channel vectors, so antenna
//! block `i` occupies columns `i·M .. (i+1)·M`.
//!
//! Cooperative zero-forcing projects `h_kᴴ` onto the null space of the
//! other terminals' channels. With `t_k` the unit-norm projected direction,
//! the effective gain is `a_k = ‖P_k h_kᴴ‖² / σ_k²` and BS `i` carries the
//! fraction `b_ik = ‖t_k[block i]‖²` of that terminal's power.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Smallest admissible `‖P_k h_kᴴ‖² / ‖h_k‖²` before an MT is declared degenerate.
pub const GAIN_FLOOR: f64 = 1e-12;

/// Smallest admissible per-block power fraction in cooperative ZF.
pub const BLOCK_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterChannel {
    n_bs: usize,
    m_ant: usize,
    h: DMatrix<Complex64>,
    noise_var: Vec<f64>,
}

impl ClusterChannel {
    /// Builds a channel from a `K × (M·N)` matrix. Noise variances default to one.
    pub fn new(n_bs: usize, m_ant: usize, h: DMatrix<Complex64>) -> Result<Self> {
        let n_mt = h.nrows();
        if n_bs == 0 || m_ant == 0 || n_mt == 0 {
            return Err(Error::Feasibility(format!(
                "need at least one BS, antenna and MT (N={n_bs}, M={m_ant}, K={n_mt})"
            )));
        }
        if h.ncols() != n_bs * m_ant {
            return Err(Error::Feasibility(format!(
                "channel has {} columns, expected M·N = {}",
                h.ncols(),
                n_bs * m_ant
            )));
        }
        if n_mt > n_bs * m_ant {
            return Err(Error::Feasibility(format!(
                "K = {n_mt} exceeds M·N = {}",
                n_bs * m_ant
            )));
        }
        for k in 0..n_mt {
            if h.row(k).iter().all(|c| c.norm_sqr() == 0.0) {
                return Err(Error::Degenerate {
                    mt: k,
                    reason: "channel row is identically zero".into(),
                });
            }
        }
        Ok(Self {
            n_bs,
            m_ant,
            h,
            noise_var: vec![1.0; n_mt],
        })
    }

    pub fn with_noise_var(mut self, noise_var: Vec<f64>) -> Result<Self> {
        if noise_var.len() != self.n_mt() {
            return Err(Error::InvalidInput(format!(
                "{} noise variances for {} MTs",
                noise_var.len(),
                self.n_mt()
            )));
        }
        if noise_var.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput("noise variances must be positive".into()));
        }
        self.noise_var = noise_var;
        Ok(self)
    }

    pub fn n_bs(&self) -> usize {
        self.n_bs
    }

    pub fn m_ant(&self) -> usize {
        self.m_ant
    }

    pub fn n_mt(&self) -> usize {
        self.h.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.h
    }

    pub fn noise_var(&self) -> &[f64] {
        &self.noise_var
    }

    /// `h_k` as a dense row.
    pub fn row(&self, k: usize) -> Vec<Complex64> {
        self.h.row(k).iter().copied().collect()
    }

    /// `h_ik`, the `M` antennas of BS `i` seen by MT `k`.
    pub fn block(&self, i: usize, k: usize) -> Vec<Complex64> {
        let m = self.m_ant;
        (0..m).map(|a| self.h[(k, i * m + a)]).collect()
    }

    /// Average channel power per (BS, MT) pair, `‖h_ik‖² / M`.
    pub fn block_power(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_bs, self.n_mt(), |i, k| {
            self.block(i, k).iter().map(|c| c.norm_sqr()).sum::<f64>() / self.m_ant as f64
        })
    }
}

/// Draws a Rayleigh-fading cluster channel from `rng`.
///
/// `variances` is `N × K`; every antenna of BS `i` sees MT `k` through an
/// independent CSCG coefficient of variance `variances[(i, k)]`.
pub fn draw_rayleigh<R: Rng + ?Sized>(
    n_bs: usize,
    m_ant: usize,
    n_mt: usize,
    variances: &DMatrix<f64>,
    rng: &mut R,
) -> Result<ClusterChannel> {
    if variances.nrows() != n_bs || variances.ncols() != n_mt {
        return Err(Error::Feasibility(format!(
            "variance matrix is {}×{}, expected {n_bs}×{n_mt}",
            variances.nrows(),
            variances.ncols()
        )));
    }
    if n_mt > n_bs * m_ant {
        return Err(Error::Feasibility(format!(
            "K = {n_mt} exceeds M·N = {}",
            n_bs * m_ant
        )));
    }
    if let Some(v) = variances.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "channel variances must be positive, got {v}"
        )));
    }
    let mut h = DMatrix::<Complex64>::zeros(n_mt, n_bs * m_ant);
    for k in 0..n_mt {
        for i in 0..n_bs {
            let scale = (variances[(i, k)] / 2.0).sqrt();
            for a in 0..m_ant {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                h[(k, i * m_ant + a)] = Complex64::new(scale * re, scale * im);
            }
        }
    }
    ClusterChannel::new(n_bs, m_ant, h)
}

/// Seeded variant of [`draw_rayleigh`]; identical seeds give identical channels.
pub fn generate_rayleigh(
    n_bs: usize,
    m_ant: usize,
    n_mt: usize,
    variances: &DMatrix<f64>,
    rng_seed: u64,
) -> Result<ClusterChannel> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    draw_rayleigh(n_bs, m_ant, n_mt, variances, &mut rng)
}

/// Node positions and the distance pathloss model `c0·(d/d0)^(-exp)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGeometry {
    pub bs_positions: Vec<[f64; 2]>,
    pub mt_positions: Vec<[f64; 2]>,
    /// Attenuation at the reference distance, in dB (negative for loss).
    pub pathloss_c0_db: f64,
    pub pathloss_d0: f64,
    pub pathloss_exp: f64,
}

impl ScenarioGeometry {
    pub fn distance(&self, i: usize, k: usize) -> f64 {
        let [bx, by] = self.bs_positions[i];
        let [mx, my] = self.mt_positions[k];
        (bx - mx).hypot(by - my)
    }

    /// `N × K` matrix of [`pathloss_variance`] values.
    pub fn variances(&self) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.bs_positions.len(), self.mt_positions.len());
        for i in 0..out.nrows() {
            for k in 0..out.ncols() {
                out[(i, k)] = pathloss_variance(self, i, k)?;
            }
        }
        Ok(out)
    }
}

/// Linear-scale channel variance between BS `i` and MT `k`.
pub fn pathloss_variance(geometry: &ScenarioGeometry, i: usize, k: usize) -> Result<f64> {
    if i >= geometry.bs_positions.len() || k >= geometry.mt_positions.len() {
        return Err(Error::InvalidInput(format!("pair (BS {i}, MT {k}) out of range")));
    }
    let d = geometry.distance(i, k);
    if !(d > 0.0) {
        return Err(Error::Domain(format!("BS {i} and MT {k} are co-located")));
    }
    if !(geometry.pathloss_d0 > 0.0) {
        return Err(Error::Domain("reference distance must be positive".into()));
    }
    let c0 = 10f64.powf(geometry.pathloss_c0_db / 10.0);
    Ok(c0 * (d / geometry.pathloss_d0).powf(-geometry.pathloss_exp))
}

/// Zero-forcing quantities consumed by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfGains {
    /// Effective SNR per unit power, `a_k`.
    pub a: Vec<f64>,
    /// `N × K` per-BS power fractions `b_ik`.
    pub b: DMatrix<f64>,
    /// Unit-norm precoder directions of length `M·N`.
    pub t_dir: Vec<DVector<Complex64>>,
    pub weights: Vec<f64>,
    /// Fraction of the band each terminal is served on (1 for joint
    /// transmission, `1/N` for orthogonal per-BS bands).
    pub band_share: f64,
}

impl ZfGains {
    /// Builds gains directly from coefficients, without precoder directions.
    pub fn from_coefficients(a: Vec<f64>, b: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        let gains = Self {
            a,
            b,
            t_dir: Vec::new(),
            weights,
            band_share: 1.0,
        };
        gains.validate()?;
        Ok(gains)
    }

    pub fn with_band_share(mut self, share: f64) -> Result<Self> {
        if !(share > 0.0 && share <= 1.0) {
            return Err(Error::InvalidInput(format!("band share {share} not in (0, 1]")));
        }
        self.band_share = share;
        Ok(self)
    }

    pub fn n_bs(&self) -> usize {
        self.b.nrows()
    }

    pub fn n_mt(&self) -> usize {
        self.a.len()
    }

    /// Weight seen by the optimizer once the band share is folded in.
    pub fn effective_weight(&self, k: usize) -> f64 {
        self.weights[k] * self.band_share
    }

    /// Per-MT rate `share·log2(1 + a_k p_k)`.
    pub fn rates(&self, p: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .zip(p)
            .map(|(a, p)| self.band_share * (a * p).ln_1p() / std::f64::consts::LN_2)
            .collect()
    }

    pub fn objective(&self, p: &[f64]) -> f64 {
        self.rates(p)
            .iter()
            .zip(&self.weights)
            .map(|(r, w)| r * w)
            .sum()
    }

    /// Transmit power drawn at each BS, `Σ_k b_ik p_k`.
    pub fn bs_power(&self, p: &[f64]) -> Vec<f64> {
        (0..self.n_bs())
            .map(|i| (0..self.n_mt()).map(|k| self.b[(i, k)] * p[k]).sum())
            .collect()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let k = self.a.len();
        if k == 0 || self.b.ncols() != k || self.weights.len() != k || self.b.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "inconsistent gain dimensions: a={}, b={}×{}, weights={}",
                k,
                self.b.nrows(),
                self.b.ncols(),
                self.weights.len()
            )));
        }
        if let Some(mt) = self.a.iter().position(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::Degenerate {
                mt,
                reason: format!("effective gain a = {}", self.a[mt]),
            });
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput("weights must be positive".into()));
        }
        if self.b.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(Error::InvalidInput("power fractions must be nonnegative".into()));
        }
        for mt in 0..k {
            if self.b.column(mt).iter().all(|b| *b == 0.0) {
                return Err(Error::Degenerate {
                    mt,
                    reason: "terminal draws power from no BS".into(),
                });
            }
        }
        Ok(())
    }
}

/// Projects `h^H` onto the orthogonal complement of the row space of `others`.
///
/// Returns the projected (unnormalized) column vector.
fn null_space_projection(
    others: &DMatrix<Complex64>,
    h: &[Complex64],
    mt: usize,
) -> Result<DVector<Complex64>> {
    let mut x = DVector::from_iterator(h.len(), h.iter().map(|c| c.conj()));
    if others.nrows() == 0 {
        return Ok(x);
    }
    let svd = others.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Degenerate {
            mt,
            reason: "SVD did not produce right singular vectors".into(),
        })?;
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * s_max)
        .count();
    if rank < others.nrows() {
        return Err(Error::Degenerate {
            mt,
            reason: format!(
                "interfering channels have rank {rank} < {}",
                others.nrows()
            ),
        });
    }
    for (j, s) in svd.singular_values.iter().enumerate() {
        if *s <= RANK_TOL * s_max {
            continue;
        }
        // Row j of Vᴴ is v_jᴴ; subtract v_j (v_jᴴ x).
        let row = v_t.row(j);
        let coef: Complex64 = row.iter().zip(x.iter()).map(|(r, xi)| r * xi).sum();
        for (xi, r) in x.iter_mut().zip(row.iter()) {
            *xi -= r.conj() * coef;
        }
    }
    Ok(x)
}

/// Cooperative zero-forcing gains for the whole cluster.
pub fn zf_gains(ch: &ClusterChannel, weights: &[f64]) -> Result<ZfGains> {
    let (n, m, k_total) = (ch.n_bs(), ch.m_ant(), ch.n_mt());
    if weights.len() != k_total {
        return Err(Error::InvalidInput(format!(
            "{} weights for {k_total} MTs",
            weights.len()
        )));
    }
    let h = ch.matrix();
    let mut a = Vec::with_capacity(k_total);
    let mut b = DMatrix::zeros(n, k_total);
    let mut t_dir = Vec::with_capacity(k_total);
    for k in 0..k_total {
        let others = h.clone().remove_row(k);
        let row = ch.row(k);
        let x = null_space_projection(&others, &row, k)?;
        let gain = x.norm_squared();
        let h_norm2: f64 = row.iter().map(|c| c.norm_sqr()).sum();
        if !(gain > GAIN_FLOOR * h_norm2) {
            return Err(Error::Degenerate {
                mt: k,
                reason: format!("projected gain {gain:.3e} vanishes against ‖h‖² = {h_norm2:.3e}"),
            });
        }
        let t = x.unscale(gain.sqrt());
        for i in 0..n {
            let frac: f64 = (0..m).map(|ant| t[i * m + ant].norm_sqr()).sum();
            if !(frac > BLOCK_FLOOR) {
                return Err(Error::Degenerate {
                    mt: k,
                    reason: format!("BS {i} carries a vanishing share {frac:.3e} of the precoder"),
                });
            }
            b[(i, k)] = frac;
        }
        a.push(gain / ch.noise_var()[k]);
        t_dir.push(t);
    }
    let gains = ZfGains {
        a,
        b,
        t_dir,
        weights: weights.to_vec(),
        band_share: 1.0,
    };
    gains.validate()?;
    Ok(gains)
}

/// Assignment of every MT to exactly one serving BS.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Association {
    serving: Vec<usize>,
    n_bs: usize,
}

impl Association {
    pub fn new(serving: Vec<usize>, n_bs: usize) -> Result<Self> {
        if let Some(&bad) = serving.iter().find(|&&i| i >= n_bs) {
            return Err(Error::InvalidInput(format!(
                "MT assigned to BS {bad}, cluster has {n_bs}"
            )));
        }
        Ok(Self { serving, n_bs })
    }

    /// Assigns MTs to the BS with the largest average channel power, visiting
    /// (BS, MT) pairs strongest first and skipping BSs that already serve
    /// `capacity` terminals. Ties go to the lowest BS index.
    pub fn strongest(avg_power: &DMatrix<f64>, capacity: usize) -> Result<Self> {
        let (n, k) = (avg_power.nrows(), avg_power.ncols());
        if k > n * capacity {
            return Err(Error::Feasibility(format!(
                "{k} MTs cannot be split over {n} BSs serving at most {capacity} each"
            )));
        }
        let mut pairs: Vec<(usize, usize)> =
            (0..k).flat_map(|mt| (0..n).map(move |bs| (bs, mt))).collect();
        pairs.sort_by(|&(i1, k1), &(i2, k2)| {
            avg_power[(i2, k2)]
                .total_cmp(&avg_power[(i1, k1)])
                .then(k1.cmp(&k2))
                .then(i1.cmp(&i2))
        });
        let mut serving = vec![usize::MAX; k];
        let mut load = vec![0usize; n];
        for (bs, mt) in pairs {
            if serving[mt] == usize::MAX && load[bs] < capacity {
                serving[mt] = bs;
                load[bs] += 1;
            }
        }
        Self::new(serving, n)
    }

    pub fn serving(&self, mt: usize) -> usize {
        self.serving[mt]
    }

    pub fn n_mt(&self) -> usize {
        self.serving.len()
    }

    pub fn n_bs(&self) -> usize {
        self.n_bs
    }

    /// MTs served by BS `i`, in increasing index order.
    pub fn users_of(&self, i: usize) -> Vec<usize> {
        (0..self.serving.len())
            .filter(|&k| self.serving[k] == i)
            .collect()
    }
}

/// Per-BS zero-forcing over orthogonal bands (no communication cooperation).
///
/// Each BS nulls interference only among its own users using its own `M`
/// antennas. `b` becomes the association indicator and every terminal gets
/// a `1/N` share of the band.
pub fn per_bs_zf_gains(
    ch: &ClusterChannel,
    association: &Association,
    weights: &[f64],
) -> Result<ZfGains> {
    let (n, m, k_total) = (ch.n_bs(), ch.m_ant(), ch.n_mt());
    if association.n_mt() != k_total || association.n_bs() != n {
        return Err(Error::InvalidInput(format!(
            "association covers {} MTs over {} BSs, channel has {k_total} over {n}",
            association.n_mt(),
            association.n_bs()
        )));
    }
    if weights.len() != k_total {
        return Err(Error::InvalidInput(format!(
            "{} weights for {k_total} MTs",
            weights.len()
        )));
    }
    let mut a = vec![0.0; k_total];
    let mut b = DMatrix::zeros(n, k_total);
    let mut t_dir = vec![DVector::zeros(n * m); k_total];
    for i in 0..n {
        let users = association.users_of(i);
        if users.len() > m {
            return Err(Error::Feasibility(format!(
                "BS {i} serves {} MTs with only {m} antennas",
                users.len()
            )));
        }
        for &k in &users {
            let others: Vec<usize> = users.iter().copied().filter(|&l| l != k).collect();
            let rows = DMatrix::from_fn(others.len(), m, |r, c| ch.matrix()[(others[r], i * m + c)]);
            let hk = ch.block(i, k);
            let x = null_space_projection(&rows, &hk, k)?;
            let gain = x.norm_squared();
            let h_norm2: f64 = hk.iter().map(|c| c.norm_sqr()).sum();
            if !(gain > GAIN_FLOOR * h_norm2) || h_norm2 == 0.0 {
                return Err(Error::Degenerate {
                    mt: k,
                    reason: format!("per-BS projected gain {gain:.3e} vanishes"),
                });
            }
            let t = x.unscale(gain.sqrt());
            for ant in 0..m {
                t_dir[k][i * m + ant] = t[ant];
            }
            a[k] = gain / ch.noise_var()[k];
            b[(i, k)] = 1.0;
        }
    }
    let gains = ZfGains {
        a,
        b,
        t_dir,
        weights: weights.to_vec(),
        band_share: 1.0 / n as f64,
    };
    gains.validate()?;
    Ok(gains)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_user_has_identity_projector() {
        let h = DMatrix::from_row_slice(1, 1, &[c(3.0, 4.0)]);
        let ch = ClusterChannel::new(1, 1, h).unwrap();
        let g = zf_gains(&ch, &[1.0]).unwrap();
        assert!((g.a[0] - 25.0).abs() < 1e-12);
        assert!((g.b[(0, 0)] - 1.0).abs() < 1e-15);
        let t = g.t_dir[0][0];
        assert!((t - c(3.0, -4.0) / 5.0).norm() < 1e-15);
    }

    #[test]
    fn orthogonal_rows_keep_full_gain() {
        let h = DMatrix::from_row_slice(2, 2, &[c(1.0, 1.0), c(1.0, 1.0), c(2.0, 0.0), c(-2.0, 0.0)]);
        let ch = ClusterChannel::new(2, 1, h).unwrap();
        let g = zf_gains(&ch, &[1.0, 1.0]).unwrap();
        assert!((g.a[0] - 4.0).abs() < 1e-12);
        assert!((g.a[1] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_channels_are_degenerate() {
        let h = DMatrix::from_row_slice(3, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0), c(0.0, 2.0), c(1.0, 1.0), c(0.5, 0.0)]);
        // K = 3 > M·N = 2 is rejected before any SVD.
        assert!(matches!(ClusterChannel::new(2, 1, h), Err(Error::Feasibility(_))));
        let h = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0), c(0.0, 2.0)]);
        let ch = ClusterChannel::new(2, 1, h).unwrap();
        assert!(matches!(zf_gains(&ch, &[1.0, 1.0]), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn zero_variance_is_rejected() {
        let v = DMatrix::from_element(1, 1, 0.0);
        assert!(generate_rayleigh(1, 1, 1, &v, 3).is_err());
    }

    #[test]
    fn seeded_draws_repeat() {
        let v = DMatrix::from_element(2, 2, 1.0);
        let a = generate_rayleigh(2, 1, 2, &v, 42).unwrap();
        let b = generate_rayleigh(2, 1, 2, &v, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn entry_variance_matches_request() {
        let v = DMatrix::from_element(2, 2, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 100_000 / 4;
        let mut acc = 0.0;
        for _ in 0..draws {
            let ch = draw_rayleigh(2, 1, 2, &v, &mut rng).unwrap();
            acc += ch.matrix().iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        let var = acc / (draws * 4) as f64;
        assert!((var - 1.0).abs() < 0.02, "sample variance {var}");
    }

    fn geometry(d: f64, exp: f64) -> ScenarioGeometry {
        ScenarioGeometry {
            bs_positions: vec![[0.0, 0.0]],
            mt_positions: vec![[d, 0.0]],
            pathloss_c0_db: -60.0,
            pathloss_d0: 10.0,
            pathloss_exp: exp,
        }
    }

    #[test]
    fn pathloss_reference_and_exponent() {
        let v = pathloss_variance(&geometry(10.0, 3.7), 0, 0).unwrap();
        assert!((v - 1e-6).abs() < 1e-18);
        let v = pathloss_variance(&geometry(100.0, 3.7), 0, 0).unwrap();
        assert!((v / (1e-6 * 10f64.powf(-3.7)) - 1.0).abs() < 1e-12);
        let v = pathloss_variance(&geometry(777.0, 0.0), 0, 0).unwrap();
        assert!((v - 1e-6).abs() < 1e-18);
        assert!(matches!(
            pathloss_variance(&geometry(0.0, 3.7), 0, 0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn per_bs_single_user_gain() {
        let v = DMatrix::from_element(2, 2, 1.0);
        let ch = generate_rayleigh(2, 1, 2, &v, 5).unwrap();
        let assoc = Association::new(vec![0, 1], 2).unwrap();
        let g = per_bs_zf_gains(&ch, &assoc, &[1.0, 1.0]).unwrap();
        for k in 0..2 {
            let expect = ch.block(k, k)[0].norm_sqr();
            assert!((g.a[k] - expect).abs() < 1e-12 * expect);
            assert_eq!(g.b[(k, k)], 1.0);
            assert_eq!(g.b[(1 - k, k)], 0.0);
        }
        assert_eq!(g.band_share, 0.5);
    }

    #[test]
    fn oversubscribed_bs_is_rejected() {
        let v = DMatrix::from_element(2, 3, 1.0);
        let ch = generate_rayleigh(2, 2, 3, &v, 5).unwrap();
        let assoc = Association::new(vec![0, 0, 0], 2).unwrap();
        assert!(matches!(
            per_bs_zf_gains(&ch, &assoc, &[1.0; 3]),
            Err(Error::Feasibility(_))
        ));
    }

    #[test]
    fn strongest_association_respects_capacity() {
        let p = DMatrix::from_row_slice(2, 3, &[5.0, 4.0, 3.0, 1.0, 1.0, 1.0]);
        let a = Association::strongest(&p, 2).unwrap();
        assert_eq!(a.users_of(0), vec![0, 1]);
        assert_eq!(a.users_of(1), vec![2]);
        let tie = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert_eq!(Association::strongest(&tie, 1).unwrap().serving(0), 0);
    }
}
