//! Renewable generation profiles and per-BS budgets derived from them.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Slots per day at 15-minute sampling.
pub const SLOTS_PER_DAY: usize = 96;

/// Wind and solar generation normalized to peak 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyProfile {
    pub timestamps: Vec<String>,
    pub wind: Vec<f64>,
    pub solar: Vec<f64>,
}

/// Per-BS weights on the wind and solar series, scaled by `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileMix {
    /// `(w_wind, w_solar)` per BS.
    pub weights: Vec<(f64, f64)>,
    pub scale: f64,
}

impl ProfileMix {
    pub fn new(weights: Vec<(f64, f64)>, scale: f64) -> Result<Self> {
        if weights.iter().any(|&(w, s)| !(w >= 0.0 && s >= 0.0)) {
            return Err(Error::Validation("profile mix weights must be nonnegative".into()));
        }
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::Validation(format!("profile scale {scale} must be nonnegative")));
        }
        Ok(Self { weights, scale })
    }
}

impl EnergyProfile {
    pub fn len(&self) -> usize {
        self.wind.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wind.is_empty()
    }

    /// Builds a profile from raw series, normalizing each to peak 1.
    pub fn from_series(timestamps: Vec<String>, wind: Vec<f64>, solar: Vec<f64>) -> Result<Self> {
        if wind.len() != solar.len() || timestamps.len() != wind.len() {
            return Err(Error::Validation("profile series differ in length".into()));
        }
        if wind.len() < 2 {
            return Err(Error::Validation(format!(
                "profile needs at least two samples, got {}",
                wind.len()
            )));
        }
        if let Some(v) = wind.iter().chain(&solar).find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Validation(format!("generation value {v} is negative or not finite")));
        }
        check_monotone(&timestamps)?;
        Ok(Self {
            timestamps,
            wind: normalize(wind),
            solar: normalize(solar),
        })
    }

    /// Deterministic four-day profile: half-sine solar lobes between 06:00
    /// and 18:00 with day-to-day amplitude changes, and wind from a smoothed
    /// random walk.
    pub fn synthetic() -> Self {
        let days = 4;
        let n = days * SLOTS_PER_DAY;
        let day_peak = [1.0, 0.75, 0.9, 0.6];
        let solar: Vec<f64> = (0..n)
            .map(|t| {
                let hour = (t % SLOTS_PER_DAY) as f64 / 4.0;
                if (6.0..18.0).contains(&hour) {
                    day_peak[t / SLOTS_PER_DAY] * (PI * (hour - 6.0) / 12.0).sin()
                } else {
                    0.0
                }
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(20131001);
        let mut level: f64 = 0.5;
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                level = (level + rng.random_range(-0.06..0.06)).clamp(0.15, 1.0);
                level
            })
            .collect();
        // Centered moving average over two hours.
        let half = 4;
        let wind: Vec<f64> = (0..n)
            .map(|t| {
                let lo = t.saturating_sub(half);
                let hi = (t + half + 1).min(n);
                raw[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            })
            .collect();

        let timestamps = (0..n)
            .map(|t| {
                let minutes = t * 15;
                format!(
                    "2013-10-{:02}T{:02}:{:02}",
                    1 + minutes / (24 * 60),
                    (minutes / 60) % 24,
                    minutes % 60
                )
            })
            .collect();
        Self {
            timestamps,
            wind: normalize(wind),
            solar: normalize(solar),
        }
    }
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let peak = v.iter().fold(0.0f64, |a, &b| a.max(b));
    if peak > 0.0 {
        v.into_iter().map(|x| x / peak).collect()
    } else {
        v
    }
}

/// Timestamps must strictly increase: numerically if every one parses as a
/// number, lexicographically otherwise (ISO-8601 text sorts correctly).
fn check_monotone(ts: &[String]) -> Result<()> {
    let numeric: Option<Vec<f64>> = ts.iter().map(|s| s.trim().parse::<f64>().ok()).collect();
    let bad = match numeric {
        Some(v) => v.windows(2).position(|w| !(w[1] > w[0])),
        None => ts.windows(2).position(|w| w[1].trim() <= w[0].trim()),
    };
    match bad {
        Some(i) => Err(Error::Validation(format!(
            "timestamps are not increasing at sample {} (`{}` after `{}`)",
            i + 1,
            ts[i + 1],
            ts[i]
        ))),
        None => Ok(()),
    }
}

/// Reads a CSV with a header containing `timestamp`, `wind` and `solar`
/// columns. Other columns are ignored.
pub fn load_profiles(path: &Path) -> Result<EnergyProfile> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("missing `{name}` column"),
            })
    };
    let (c_time, c_wind, c_solar) = (col("timestamp")?, col("wind")?, col("solar")?);

    let mut timestamps = Vec::new();
    let mut wind = Vec::new();
    let mut solar = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |c: usize, name: &str| -> Result<f64> {
            let raw = record.get(c).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("missing `{name}` value"),
            })?;
            raw.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("`{raw}` is not a number in column `{name}`"),
            })
        };
        wind.push(field(c_wind, "wind")?);
        solar.push(field(c_solar, "solar")?);
        timestamps.push(record.get(c_time).unwrap_or_default().to_string());
    }
    EnergyProfile::from_series(timestamps, wind, solar)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("{kind:?}"),
        },
    }
}

/// Writes the profile in the format [`load_profiles`] reads.
pub fn write_profile(profile: &EnergyProfile, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["timestamp", "wind", "solar"]).map_err(|e| csv_error(path, e))?;
    for t in 0..profile.len() {
        w.write_record([
            profile.timestamps[t].clone(),
            format!("{:.9}", profile.wind[t]),
            format!("{:.9}", profile.solar[t]),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `E_i(t) = scale·(w_wind,i·τ_w(t) + w_solar,i·τ_s(t))`.
pub fn bs_budgets_at(profile: &EnergyProfile, mix: &ProfileMix, slot: usize) -> Result<Vec<f64>> {
    if slot >= profile.len() {
        return Err(Error::InvalidInput(format!(
            "slot {slot} out of range for a {}-sample profile",
            profile.len()
        )));
    }
    Ok(mix
        .weights
        .iter()
        .map(|&(w, s)| mix.scale * (w * profile.wind[slot] + s * profile.solar[slot]))
        .collect())
}
