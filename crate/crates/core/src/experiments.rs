//! Scenario configuration, Monte Carlo sweeps and CSV output.
//!
//! Every drop `k` of a sweep uses the seed `derive_seed(seed, DROP, k)`, so
//! all schemes and all sweep values see the same channel realizations
//! (common random numbers). Sweeps over the element count resample the
//! surface links with the same per-drop seeds.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_channel_set, ArraySpec, Arrays, ChannelModel, NodeGeometry, PathLossModel};
use crate::error::{invalid, Error, Result};
use crate::irs::{AmplitudeModel, IrsModelParams};
use crate::numerics::db_to_power_ratio;
use crate::optimizer::{GaSettings, Problem};
use crate::power::PowerBudget;
use crate::schemes::{DropEvaluator, RateBreakdown, SchemeId};
use crate::seeding::{derive_seed, label};

/// Antenna counts. Terminals use linear arrays, the surface a square planar
/// array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayCounts {
    pub source: usize,
    pub relay: usize,
    pub destination: usize,
    pub irs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub geometry: NodeGeometry,
    pub arrays: ArrayCounts,
    pub path_count: usize,
    pub path_loss: PathLossModel,
    pub amplitude: AmplitudeModel,
    pub resolution_bits: u32,
    /// `P_S / P_max`.
    pub source_power_fraction: f64,
    /// `P_R / P_max`; unset means `1 - P_S / P_max`.
    pub relay_power_fraction: Option<f64>,
    pub p_max: f64,
    /// Transmit SNR `P_max / sigma^2` in dB.
    pub snr_db: f64,
    pub relay_power_levels: usize,
    pub ga: GaSettings,
    pub drops: usize,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        default_scenario()
    }
}

/// Reference deployment: source, relay, destination and surface at fixed
/// positions, 16/8/4 antennas, a 36-element surface with 2-bit phases,
/// transmit SNR of 10 dB.
pub fn default_scenario() -> Scenario {
    Scenario {
        geometry: NodeGeometry {
            source: [0.0, 0.0, 3.0],
            relay: [10.0, -10.0, 3.0],
            destination: [20.0, 0.0, 1.5],
            irs: [10.0, 20.0, 3.0],
        },
        arrays: ArrayCounts {
            source: 16,
            relay: 8,
            destination: 4,
            irs: 36,
        },
        path_count: 2,
        path_loss: PathLossModel {
            k0_db: 0.0,
            reference_distance: 10.0,
            exponent: 5.76,
        },
        amplitude: AmplitudeModel {
            a_min: 0.2,
            zeta: 0.43 * std::f64::consts::PI,
            nu: 1.6,
        },
        resolution_bits: 2,
        source_power_fraction: 0.5,
        relay_power_fraction: None,
        p_max: 1.0,
        snr_db: 10.0,
        relay_power_levels: 65,
        ga: GaSettings::default(),
        drops: 200,
        seed: 1,
    }
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fraction_ok = |f: f64| f > 0.0 && f <= 1.0;
        if !fraction_ok(self.source_power_fraction) {
            return Err(Error::Config("source_power_fraction must lie in (0, 1]".into()));
        }
        if let Some(f) = self.relay_power_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config("relay_power_fraction must lie in [0, 1]".into()));
            }
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::Config("p_max must be positive".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Config("snr_db must be finite".into()));
        }
        if self.drops == 0 {
            return Err(Error::Config("drops must be positive".into()));
        }
        self.channel_model().validate()?;
        self.irs_params()?;
        self.budget().validate()?;
        self.ga.validate()?;
        if self.relay_power_levels == 0 {
            return Err(Error::Config("relay_power_levels must be positive".into()));
        }
        Ok(())
    }

    pub fn channel_model(&self) -> ChannelModel {
        ChannelModel {
            geometry: self.geometry,
            arrays: Arrays {
                source: ArraySpec::ula(self.arrays.source),
                relay: ArraySpec::ula(self.arrays.relay),
                destination: ArraySpec::ula(self.arrays.destination),
                irs: ArraySpec::upa(self.arrays.irs),
            },
            path_count: self.path_count,
            path_loss: self.path_loss,
        }
    }

    pub fn irs_params(&self) -> Result<IrsModelParams> {
        IrsModelParams::new(self.amplitude, self.arrays.irs, self.resolution_bits)
    }

    pub fn noise_power(&self) -> f64 {
        self.p_max / db_to_power_ratio(self.snr_db)
    }

    pub fn budget(&self) -> PowerBudget {
        let relay_fraction = self
            .relay_power_fraction
            .unwrap_or(1.0 - self.source_power_fraction);
        PowerBudget {
            p_s: self.source_power_fraction * self.p_max,
            p_r: (relay_fraction * self.p_max).max(0.0),
            p_max: self.p_max,
            noise_power: self.noise_power(),
        }
    }

    pub fn drop_seed(&self, drop: usize) -> u64 {
        derive_seed(&[self.seed, label::DROP, drop as u64])
    }

    /// Rates of `schemes` on drop number `drop`.
    pub fn evaluate_drop(&self, drop: usize, schemes: &[SchemeId]) -> Result<Vec<RateBreakdown>> {
        let drop_seed = self.drop_seed(drop);
        let channels = sample_channel_set(&self.channel_model(), drop_seed)?;
        let problem = Problem::new(&channels, self.irs_params()?, self.budget(), self.relay_power_levels)?;
        let mut evaluator = DropEvaluator::new(problem, self.ga.clone(), drop_seed);
        schemes
            .iter()
            .map(|&s| evaluator.evaluate(s).map(|o| o.breakdown))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    ResolutionBits,
    SourcePowerFraction,
    IrsPositionY,
    IrsElementCount,
}

impl SweepVariable {
    pub const ALL: [SweepVariable; 4] = [
        SweepVariable::ResolutionBits,
        SweepVariable::SourcePowerFraction,
        SweepVariable::IrsPositionY,
        SweepVariable::IrsElementCount,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::ResolutionBits => "resolution_bits",
            SweepVariable::SourcePowerFraction => "source_power_fraction",
            SweepVariable::IrsPositionY => "irs_position_y",
            SweepVariable::IrsElementCount => "irs_element_count",
        }
    }

    /// Copy of `base` with this variable set to `value`.
    pub fn apply(self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = base.clone();
        let whole = |v: f64| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(invalid(format!("{} needs a nonnegative integer, got {v}", self.name())))
            }
        };
        match self {
            SweepVariable::ResolutionBits => s.resolution_bits = whole(value)?,
            SweepVariable::SourcePowerFraction => s.source_power_fraction = value,
            SweepVariable::IrsPositionY => s.geometry.irs[1] = value,
            SweepVariable::IrsElementCount => s.arrays.irs = whole(value)? as usize,
        }
        s.validate()?;
        Ok(s)
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepVariable::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| invalid(format!("unknown sweep variable '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeStats {
    pub scheme: SchemeId,
    pub mean_rate: f64,
    pub std_err: f64,
    pub drops: usize,
    /// Rate of every drop, in drop order.
    pub rates: Vec<f64>,
}

impl SchemeStats {
    pub fn from_rates(scheme: SchemeId, rates: Vec<f64>) -> Result<Self> {
        let n = rates.len();
        if n == 0 {
            return Err(invalid("statistics need at least one drop"));
        }
        let mean = rates.iter().sum::<f64>() / n as f64;
        let std_err = if n > 1 {
            let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            scheme,
            mean_rate: mean,
            std_err,
            drops: n,
            rates,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub schemes: Vec<SchemeStats>,
}

impl SweepPoint {
    pub fn stats(&self, scheme: SchemeId) -> Option<&SchemeStats> {
        self.schemes.iter().find(|s| s.scheme == scheme)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn point(&self, value: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.value == value)
    }
}

/// Monte Carlo sweep of `variable` over `values`.
///
/// Drops are spread over `workers` threads (`None` uses the global pool);
/// the result does not depend on the worker count.
pub fn run_sweep(
    scenario: &Scenario,
    variable: SweepVariable,
    values: &[f64],
    schemes: &[SchemeId],
    workers: Option<usize>,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(invalid("sweep needs at least one value"));
    }
    scenario.validate()?;
    let run = || {
        values
            .iter()
            .map(|&value| {
                let point = variable.apply(scenario, value)?;
                let per_drop: Vec<Vec<RateBreakdown>> = (0..point.drops)
                    .into_par_iter()
                    .map(|d| point.evaluate_drop(d, schemes))
                    .collect::<Result<_>>()?;
                let stats = schemes
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| {
                        let rates = per_drop.iter().map(|d| d[i].achievable_rate).collect();
                        SchemeStats::from_rates(s, rates)
                    })
                    .collect::<Result<_>>()?;
                Ok(SweepPoint {
                    value,
                    schemes: stats,
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    let points = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(SweepResult { variable, points })
}

pub const CSV_HEADER: [&str; 6] = ["sweep_var", "sweep_value", "scheme", "mean_rate_bits", "std_err", "drops"];

/// Writes one row per (sweep value, scheme) after the header.
pub fn emit_csv<W: Write>(result: &SweepResult, destination: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(destination);
    w.write_record(CSV_HEADER)?;
    for point in &result.points {
        for s in &point.schemes {
            w.write_record([
                result.variable.name().to_string(),
                point.value.to_string(),
                s.scheme.name().to_string(),
                s.mean_rate.to_string(),
                s.std_err.to_string(),
                s.drops.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    emit_csv(result, std::io::BufWriter::new(file))
}
