//! Monte-Carlo evaluation of a scenario.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::profile::{bs_budgets_at, EnergyProfile, ProfileMix};
use super::scenario::{ChannelSpec, EnergySpec, Scenario};
use crate::baselines::{solve_scheme, SchemeId, SchemeKind};
use crate::channel::{draw_rayleigh, zf_gains, Association, ScenarioGeometry};
use crate::energy::{Efficiency, EnergyState};
use crate::error::{Error, Result};
use crate::solver::SolveOptions;

/// Environment variable holding the worker count for [`run_scenario`].
pub const THREADS_ENV: &str = "ECOMP_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_key: String,
    pub slot: Option<usize>,
    pub scheme: SchemeKind,
    /// `None` for schemes without energy exchange.
    pub beta: Option<f64>,
    pub mean_rate: f64,
    pub stderr: f64,
    /// Samples that solved successfully.
    pub n: usize,
    /// Samples whose solve returned an error.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn find(&self, sweep_key: &str, scheme: SchemeKind, beta: Option<f64>) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_key == sweep_key && r.scheme == scheme && r.beta == beta)
    }
}

/// How a sweep point sets the BS budgets.
#[derive(Debug, Clone)]
enum PointEnergy {
    Fixed(Vec<f64>),
    /// Each budget uniform on `[0, hi]`, drawn per sample.
    Uniform { hi: f64 },
    /// Average over several profile slots, each with fixed budgets.
    Slots(Vec<(usize, Vec<f64>)>),
}

#[derive(Debug, Clone)]
struct Point {
    key: String,
    slot: Option<usize>,
    energy: PointEnergy,
}

/// One output column: a scheme at one β (or none).
#[derive(Debug, Clone, Copy)]
struct Column {
    scheme: SchemeKind,
    beta: Option<f64>,
}

fn dbw_to_watts(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn fmt_key(name: &str, v: f64) -> String {
    format!("{name}={}", super::emit::sig9(v))
}

fn points(scn: &Scenario, profile: Option<&EnergyProfile>) -> Result<Vec<Point>> {
    let n = scn.cluster.n_bs;
    Ok(match &scn.energy {
        EnergySpec::Constant { budgets } => vec![Point {
            key: "constant".into(),
            slot: None,
            energy: PointEnergy::Fixed(budgets.clone()),
        }],
        EnergySpec::Split { total, first } => first
            .iter()
            .map(|&e1| Point {
                key: fmt_key("E1", e1),
                slot: None,
                energy: PointEnergy::Fixed(vec![e1, total - e1]),
            })
            .collect(),
        EnergySpec::UniformRandom { mean_sum_db } => mean_sum_db
            .iter()
            .map(|&db| Point {
                key: fmt_key("E_db", db),
                slot: None,
                energy: PointEnergy::Uniform {
                    hi: 2.0 * dbw_to_watts(db) / n as f64,
                },
            })
            .collect(),
        EnergySpec::Profile {
            mix,
            scale_dbw,
            slot_stride,
            slots,
            aggregate_slots,
            ..
        } => {
            let profile = profile.ok_or_else(|| Error::InvalidInput("scenario needs an energy profile".into()))?;
            let [lo, hi] = slots.unwrap_or([0, profile.len()]);
            if hi > profile.len() {
                return Err(Error::Validation(format!(
                    "slot range ends at {hi} but the profile has {} samples",
                    profile.len()
                )));
            }
            let chosen: Vec<usize> = (lo..hi).step_by(*slot_stride).collect();
            let mut out = Vec::new();
            for &db in scale_dbw {
                let m = ProfileMix::new(mix.iter().map(|w| (w[0], w[1])).collect(), dbw_to_watts(db))?;
                let budgets = chosen
                    .iter()
                    .map(|&t| Ok((t, bs_budgets_at(profile, &m, t)?)))
                    .collect::<Result<Vec<_>>>()?;
                if *aggregate_slots {
                    out.push(Point {
                        key: fmt_key("Ebar_dbw", db),
                        slot: None,
                        energy: PointEnergy::Slots(budgets),
                    });
                } else {
                    out.extend(budgets.into_iter().map(|(t, b)| Point {
                        key: fmt_key("Ebar_dbw", db),
                        slot: Some(t),
                        energy: PointEnergy::Fixed(b),
                    }));
                }
            }
            out
        }
    })
}

fn columns(scn: &Scenario) -> Vec<Column> {
    let mut cols = Vec::new();
    for &scheme in &scn.schemes {
        match scheme {
            SchemeKind::Joint | SchemeKind::EnergyOnly => {
                cols.extend(scn.betas.iter().map(|&b| Column { scheme, beta: Some(b) }))
            }
            SchemeKind::CommOnly | SchemeKind::None => cols.push(Column { scheme, beta: None }),
        }
    }
    cols
}

const TAG_PLACEMENT: u64 = 1;
const TAG_CHANNEL: u64 = 2;
const TAG_ENERGY: u64 = 3;

/// Independent stream per (purpose, slot, placement, realization).
///
/// Draws do not depend on the sweep value, so every point of a sweep sees
/// the same channels and the curves are compared on common random numbers.
fn stream(seed: u64, tag: u64, slot: usize, placement: usize, realization: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 56) | ((slot as u64) << 36) | ((placement as u64) << 24) | realization as u64);
    rng
}

/// Uniform point in the hexagon of circumradius `r` centred at the origin,
/// with flat sides facing the x axis direction (apothem along 0°, 60°, 120°).
fn sample_hexagon<R: Rng>(rng: &mut R, r: f64, min_distance: f64) -> [f64; 2] {
    let apothem = r * (PI / 6.0).cos();
    loop {
        let x: f64 = rng.random_range(-apothem..apothem);
        let y: f64 = rng.random_range(-r..r);
        let inside = [0.0, PI / 3.0, 2.0 * PI / 3.0]
            .iter()
            .all(|&t: &f64| (x * t.cos() + y * t.sin()).abs() <= apothem);
        if inside && x.hypot(y) >= min_distance {
            return [x, y];
        }
    }
}

/// BS sites and MT drop for the hexagonal layout; MTs are listed cell by cell.
pub fn hexagonal_geometry<R: Rng>(
    rng: &mut R,
    n_bs: usize,
    inter_bs_distance: f64,
    mts_per_cell: usize,
    min_distance: f64,
    c0_db: f64,
    d0: f64,
    exp: f64,
) -> ScenarioGeometry {
    let d = inter_bs_distance;
    let sites = [[0.0, 0.0], [d, 0.0], [d / 2.0, d * 3f64.sqrt() / 2.0]];
    let bs_positions: Vec<[f64; 2]> = sites[..n_bs].to_vec();
    let r = d / 3f64.sqrt();
    let mut mt_positions = Vec::with_capacity(n_bs * mts_per_cell);
    for bs in &bs_positions {
        for _ in 0..mts_per_cell {
            let [x, y] = sample_hexagon(rng, r, min_distance);
            mt_positions.push([bs[0] + x, bs[1] + y]);
        }
    }
    ScenarioGeometry {
        bs_positions,
        mt_positions,
        pathloss_c0_db: c0_db,
        pathloss_d0: d0,
        pathloss_exp: exp,
    }
}

/// Channel variances for one placement, or `None` when they are drawn per realization.
fn placement_variances(scn: &Scenario, slot: usize, placement: usize) -> Result<Option<DMatrix<f64>>> {
    let (n, k) = (scn.cluster.n_bs, scn.cluster.n_mt);
    match &scn.channel {
        ChannelSpec::Rayleigh { variances } => Ok(Some(DMatrix::from_fn(n, k, |i, j| variances[i][j]))),
        ChannelSpec::RandomCross { .. } => Ok(None),
        ChannelSpec::Hexagonal {
            inter_bs_distance,
            mts_per_cell,
            pathloss_c0_db,
            pathloss_d0,
            pathloss_exp,
            min_distance,
        } => {
            let mut rng = stream(scn.seed, TAG_PLACEMENT, slot, placement, 0);
            let geom = hexagonal_geometry(
                &mut rng,
                n,
                *inter_bs_distance,
                *mts_per_cell,
                min_distance.unwrap_or(*pathloss_d0),
                *pathloss_c0_db,
                *pathloss_d0,
                *pathloss_exp,
            );
            geom.variances().map(Some)
        }
    }
}

struct Sample {
    slot: usize,
    placement: usize,
    realization: usize,
    budgets: Option<Vec<f64>>,
}

fn solve_sample(
    scn: &Scenario,
    s: &Sample,
    variances: Option<&DMatrix<f64>>,
    energy: &PointEnergy,
    cols: &[Column],
    opts: &SolveOptions,
) -> Vec<Result<f64>> {
    let fail_all = |e: Error| cols.iter().map(|_| Err(Error::InvalidInput(e.to_string()))).collect();
    let c = &scn.cluster;
    let (n, m, k) = (c.n_bs, c.m_ant, c.n_mt);
    let mut rng = stream(scn.seed, TAG_CHANNEL, s.slot, s.placement, s.realization);
    let var = match (variances, &scn.channel) {
        (Some(v), _) => v.clone(),
        (
            None,
            ChannelSpec::RandomCross {
                direct,
                cross_min,
                cross_max,
            },
        ) => DMatrix::from_fn(n, k, |i, j| {
            if j % n == i {
                *direct
            } else if cross_max > cross_min {
                rng.random_range(*cross_min..*cross_max)
            } else {
                *cross_max
            }
        }),
        (None, _) => unreachable!("only random_cross draws variances per realization"),
    };
    let ch = match draw_rayleigh(n, m, k, &var, &mut rng).and_then(|ch| ch.with_noise_var(vec![scn.noise_power(); k])) {
        Ok(ch) => ch,
        Err(e) => return fail_all(e),
    };

    let renewable = match (energy, &s.budgets) {
        (_, Some(b)) => b.clone(),
        (PointEnergy::Uniform { hi }, None) => {
            let mut erng = stream(scn.seed, TAG_ENERGY, s.slot, s.placement, s.realization);
            (0..n).map(|_| erng.random::<f64>() * hi).collect()
        }
        (PointEnergy::Fixed(b), None) => b.clone(),
        (PointEnergy::Slots(_), None) => unreachable!("slot samples carry their budgets"),
    };
    let es = match EnergyState::new(renewable, c.grid_power, c.circuit_power, c.pa_eff) {
        Ok(es) => es,
        Err(e) => return fail_all(e),
    };
    let weights = scn.weights();
    let joint = zf_gains(&ch, &weights);
    let assoc = if cols.iter().any(|col| col.scheme.needs_association()) {
        Some(Association::strongest(&var, scn.association_capacity()).map_err(|e| e.to_string()))
    } else {
        None
    };

    cols.iter()
        .map(|col| {
            let beta = Efficiency::uniform(n, col.beta.unwrap_or(0.0))?;
            let scheme = match col.scheme {
                SchemeKind::Joint => SchemeId::joint(),
                SchemeKind::CommOnly => SchemeId::comm_only(),
                SchemeKind::EnergyOnly => SchemeId::energy_only(assoc.clone().expect("association built").map_err(Error::InvalidInput)?),
                SchemeKind::None => SchemeId::none(assoc.clone().expect("association built").map_err(Error::InvalidInput)?),
            };
            let gains = match col.scheme {
                SchemeKind::Joint | SchemeKind::CommOnly => Some(joint.as_ref().map_err(|e| Error::InvalidInput(e.to_string()))?),
                _ => None,
            };
            solve_scheme(&scheme, &ch, gains, &es, &beta, &weights, opts).map(|sol| sol.objective)
        })
        .collect()
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let threads: usize = v
            .parse()
            .map_err(|_| Error::InvalidInput(format!("{THREADS_ENV}=`{v}` is not a thread count")))?;
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker threads: {e}")))
}

/// Runs every sweep point and aggregates per (point, scheme, β).
///
/// Solver failures are counted in the row rather than aborting the run.
/// The output depends only on the scenario (including its seed), not on
/// the number of worker threads.
pub fn run_scenario(scn: &Scenario, profile: Option<&EnergyProfile>) -> Result<ResultTable> {
    scn.validate()?;
    let pts = points(scn, profile)?;
    let cols = columns(scn);
    let opts = SolveOptions::default();
    let pool = thread_pool()?;
    let mut table = ResultTable::default();

    for pt in &pts {
        let slots: Vec<(usize, Option<Vec<f64>>)> = match (&pt.energy, pt.slot) {
            (PointEnergy::Slots(list), _) => list.iter().map(|(t, b)| (*t, Some(b.clone()))).collect(),
            (_, slot) => vec![(slot.unwrap_or(0), None)],
        };
        let mut samples = Vec::new();
        let mut variances = Vec::new();
        for (slot, budgets) in &slots {
            for placement in 0..scn.placements {
                variances.push(placement_variances(scn, *slot, placement)?);
                let vi = variances.len() - 1;
                for realization in 0..scn.realizations {
                    samples.push((
                        vi,
                        Sample {
                            slot: *slot,
                            placement,
                            realization,
                            budgets: budgets.clone(),
                        },
                    ));
                }
            }
        }
        let results: Vec<Vec<Result<f64>>> = pool.install(|| {
            samples
                .par_iter()
                .map(|(vi, s)| solve_sample(scn, s, variances[*vi].as_ref(), &pt.energy, &cols, &opts))
                .collect()
        });

        for (c, col) in cols.iter().enumerate() {
            let values: Vec<f64> = results.iter().filter_map(|r| r[c].as_ref().ok().copied()).collect();
            let failures = results.len() - values.len();
            let (mean, stderr) = mean_stderr(&values);
            table.rows.push(ResultRow {
                sweep_key: pt.key.clone(),
                slot: pt.slot,
                scheme: col.scheme,
                beta: col.beta,
                mean_rate: mean,
                stderr,
                n: values.len(),
                failures,
            });
        }
    }
    Ok(table)
}

/// Sample mean and standard error (`s/√n`, with `s` the unbiased deviation).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Loads the profile a scenario refers to: its CSV, or the synthetic one.
pub fn scenario_profile(scn: &Scenario) -> Result<Option<EnergyProfile>> {
    match &scn.energy {
        EnergySpec::Profile { source: Some(path), .. } => super::profile::load_profiles(path).map(Some),
        EnergySpec::Profile { source: None, .. } => Ok(Some(EnergyProfile::synthetic())),
        _ => Ok(None),
    }
}
