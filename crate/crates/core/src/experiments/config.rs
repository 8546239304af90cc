//! Campaign configuration. One TOML file drives every subcommand; fields
//! left out take the defaults of the analytical or protocol setup.
//!
//! Units follow the printed parameter tables: distances and radii in µm,
//! times in seconds, diffusion in m²/s, SNR in dB. `snr_db = inf` (or the
//! string `"inf"`) means no noise.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::channel::{PhysicalParams, RedrawPolicy, SamplingModel, TxConfig};
use crate::error::{Error, Result};
use crate::optimizer::{grid_from_range, OffsetCase, SweepParameter};
use crate::protocol::{ProtocolConfig, Schedule, ScheduleEvent};
use crate::scenario::{Scenario, MICRON};

/// Infinite SNR as the string "inf", finite values as numbers.
mod snr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v == f64::INFINITY {
            Repr::Text("inf".into())
        } else {
            Repr::Num(v)
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) if matches!(s.trim(), "inf" | "+inf" | "infinity") => Ok(f64::INFINITY),
            Repr::Text(s) => Err(E::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod list {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|&x| to_repr(x)).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
        }
    }
}

/// Network description in table units. List fields of length one are
/// broadcast to every TX.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// K. Defaults to 2 for the analytical commands and 4 for `protocol`.
    pub num_tx: Option<usize>,
    pub distances_um: Vec<f64>,
    pub rx_radius_um: f64,
    pub diffusion: f64,
    pub symbol_period: f64,
    pub isi_length: usize,
    #[serde(with = "snr")]
    pub snr_db: f64,
    pub n_tx_max: f64,
    /// Molecules per bit-1; every TX emits `n_tx_max` when unset.
    pub n_tx: Option<Vec<f64>>,
    /// Emission offsets in seconds; synchronized when unset.
    pub offsets: Option<Vec<f64>>,
    /// Sampling jitter window Δp in seconds.
    pub jitter: f64,
    pub redraw_policy: RedrawPolicy,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            num_tx: None,
            distances_um: vec![10.0],
            rx_radius_um: 1.0,
            diffusion: 1e-9,
            symbol_period: 1.0,
            isi_length: 1,
            snr_db: f64::INFINITY,
            n_tx_max: 1e6,
            n_tx: None,
            offsets: None,
            jitter: 0.0,
            redraw_policy: RedrawPolicy::PerSymbol,
        }
    }
}

fn broadcast(field: &str, v: &[f64], k: usize) -> Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; k]),
        n if n == k => Ok(v.to_vec()),
        n => Err(Error::config(
            format!("scenario.{field}"),
            format!("expected 1 or {k} values, got {n}"),
        )),
    }
}

impl ScenarioConfig {
    pub fn k(&self) -> usize {
        self.num_tx.unwrap_or(2)
    }

    /// SI scenario with the noise set from `snr_db`.
    pub fn build(&self) -> Result<Scenario> {
        let k = self.k();
        if k == 0 {
            return Err(Error::config("scenario.num_tx", "must be >= 1"));
        }
        if self.snr_db.is_nan() {
            return Err(Error::config("scenario.snr_db", "must be a number or inf"));
        }
        let distances = broadcast("distances_um", &self.distances_um, k)?;
        let emitted = match &self.n_tx {
            Some(v) => broadcast("n_tx", v, k)?,
            None => vec![self.n_tx_max; k],
        };
        let offsets = match &self.offsets {
            Some(v) => broadcast("offsets", v, k)?,
            None => vec![0.0; k],
        };
        let mut s = Scenario {
            physical: PhysicalParams {
                distances: distances.iter().map(|d| d * MICRON).collect(),
                rx_radius: self.rx_radius_um * MICRON,
                diffusion: self.diffusion,
                symbol_period: self.symbol_period,
                isi_length: self.isi_length,
                noise_mean: 0.0,
            },
            tx: TxConfig {
                offsets,
                emitted,
                budget: self.n_tx_max,
            },
            sampling: SamplingModel {
                jitter_width: self.jitter,
                redraw_policy: self.redraw_policy,
            },
        };
        s.validate()?;
        s.set_snr_db(self.snr_db);
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleRecipe {
    /// No changes, or the listed `events`.
    #[default]
    Custom,
    /// SNR 0 → 100 dB in three steps.
    SnrSteps,
    /// d_1 over 8, 10, 12 µm.
    DistanceSteps,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub recipe: ScheduleRecipe,
    pub events: Vec<ScheduleEvent>,
}

impl ScheduleConfig {
    pub fn build(&self, n_iter: usize) -> Result<Schedule> {
        match self.recipe {
            ScheduleRecipe::Custom => Ok(Schedule {
                events: self.events.clone(),
            }),
            _ if !self.events.is_empty() => Err(Error::config(
                "schedule.events",
                "explicit events need recipe = \"custom\"",
            )),
            ScheduleRecipe::SnrSteps => Ok(Schedule::snr_steps(n_iter)),
            ScheduleRecipe::DistanceSteps => Ok(Schedule::distance_steps(n_iter)),
        }
    }
}

/// Grids of the sweep subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Largest τ of the threshold scan; 1.5·(λ̃_1 + λ̃_2) when unset.
    pub max_tau: Option<u64>,
    /// N_TX,2 and ΔN_TX axes of the molecule-count heatmap.
    pub n_tx_2: Vec<f64>,
    pub delta_n_tx: Vec<f64>,
    /// Cells per axis of the offset heatmap.
    pub offset_cells: usize,
    /// What the MA comparison sweeps.
    pub parameter: SweepParameter,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub snr_step_db: f64,
    pub num_tx_grid: Vec<usize>,
    pub cases: Vec<OffsetCase>,
    /// Offset draws averaged in the random-offset case.
    pub random_samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let axis: Vec<f64> = (0..=20).map(|i| i as f64 * 5e4).collect();
        SweepConfig {
            max_tau: None,
            n_tx_2: axis.clone(),
            delta_n_tx: axis,
            offset_cells: 64,
            parameter: SweepParameter::SnrDb,
            snr_min_db: -50.0,
            snr_max_db: 30.0,
            snr_step_db: 5.0,
            num_tx_grid: vec![2, 3, 4, 5, 6],
            cases: OffsetCase::ALL.to_vec(),
            random_samples: crate::optimizer::DEFAULT_RANDOM_SAMPLES,
        }
    }
}

impl SweepConfig {
    pub fn grid(&self) -> Result<Vec<f64>> {
        match self.parameter {
            SweepParameter::SnrDb => grid_from_range(self.snr_min_db, self.snr_step_db, self.snr_max_db),
            SweepParameter::NumTx => Ok(self.num_tx_grid.iter().map(|&k| k as f64).collect()),
        }
    }
}

/// Emission offsets used in the agreement matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellOffsets {
    /// The `[scenario]` offsets (synchronized unless set).
    #[default]
    Scenario,
    /// t_off,i = (i-1)·T/K.
    Even,
}

/// Analytic-vs-simulation agreement matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub num_tx: Vec<usize>,
    pub isi_length: Vec<usize>,
    #[serde(with = "snr::list")]
    pub snr_db: Vec<f64>,
    pub offsets: Vec<CellOffsets>,
    /// Tallied slots per cell.
    pub symbols: u64,
    /// Fraction of cells that must agree for the suite to pass.
    pub required_fraction: f64,
    /// Also rerun the first cell with the simulated root threshold forced
    /// to 0 and require that the mismatch is flagged.
    pub negative_control: bool,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            num_tx: vec![2, 3, 4],
            isi_length: vec![0, 1],
            snr_db: vec![f64::INFINITY, 10.0],
            offsets: vec![CellOffsets::Scenario],
            symbols: 200_000,
            required_fraction: 0.95,
            negative_control: true,
        }
    }
}

impl ValidateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_tx.is_empty() || self.isi_length.is_empty() || self.snr_db.is_empty() || self.offsets.is_empty() {
            return Err(Error::config("validate", "every matrix axis needs at least one value"));
        }
        if self.num_tx.contains(&0) {
            return Err(Error::config("validate.num_tx", "K must be >= 1"));
        }
        if self.snr_db.iter().any(|v| v.is_nan()) {
            return Err(Error::config("validate.snr_db", "must be numbers or inf"));
        }
        if self.symbols == 0 {
            return Err(Error::config("validate.symbols", "symbol count must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.required_fraction) {
            return Err(Error::config("validate.required_fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub out: PathBuf,
    /// Frames with more bits than this are refused by the exact engine.
    pub enumeration_cap: usize,
    /// Protocol runs per ensemble (N_seed).
    pub n_seed: usize,
    pub scenario: ScenarioConfig,
    pub protocol: ProtocolConfig,
    pub schedule: ScheduleConfig,
    pub sweep: SweepConfig,
    pub validate: ValidateConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            seed: 1,
            workers: 0,
            out: PathBuf::from("out"),
            enumeration_cap: crate::analytic::DEFAULT_ENUMERATION_CAP,
            n_seed: 100,
            scenario: ScenarioConfig::default(),
            protocol: ProtocolConfig::default(),
            schedule: ScheduleConfig::default(),
            sweep: SweepConfig::default(),
            validate: ValidateConfig::default(),
        }
    }
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Fills the fields whose default depends on the command, so the
    /// copy embedded in the outputs is complete.
    pub fn resolve(&mut self, default_k: usize) {
        self.scenario.num_tx.get_or_insert(default_k);
    }
}
