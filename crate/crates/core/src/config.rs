//! Physical and training parameters, plus the TOML experiment file that
//! carries both.
//!
//! ```toml
//! [system]
//! num_aps = 50
//! num_users = 10
//!
//! [train]
//! iterations = 2000
//! input_transform = "log"
//! ```
//!
//! Every key is optional and defaults to the reference scenario (1.9 GHz,
//! 1 km square, 20 MHz, 100 mW pilot and data power). Unknown keys are
//! rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Thermal noise power spectral density, dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// AP layout used by grid placement: `cols` APs along x, `rows` along y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridLayout {
    pub cols: usize,
    pub rows: usize,
}

impl GridLayout {
    /// Nearest-to-square factorization of `m` with `cols >= rows`.
    pub fn nearest_square(m: usize) -> Self {
        let mut rows = (m as f64).sqrt().floor() as usize;
        while rows > 1 && !m.is_multiple_of(rows) {
            rows -= 1;
        }
        let rows = rows.max(1);
        GridLayout { cols: m / rows, rows }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub carrier_freq_hz: f64,
    pub area_side_m: f64,
    pub ap_height_m: f64,
    pub user_height_m: f64,
    pub d0_m: f64,
    pub d1_m: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub shadow_std_db: f64,
    pub pilot_power_mw: f64,
    pub data_power_mw: f64,
    pub coherence_samples: usize,
    pub pilot_length: usize,
    pub num_aps: usize,
    pub num_users: usize,
    pub ap_grid: Option<GridLayout>,
}

/// Normalized uplink SNRs (transmit power over receiver noise power, linear).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedSnr {
    pub data: f64,
    pub pilot: f64,
}

impl SystemConfig {
    /// Reference scenario with `m` APs and `k` users, orthogonal pilots
    /// (`pilot_length = k`) and a nearest-to-square AP grid.
    pub fn reference(m: usize, k: usize) -> Self {
        SystemConfig {
            carrier_freq_hz: 1.9e9,
            area_side_m: 1000.0,
            ap_height_m: 15.0,
            user_height_m: 1.65,
            d0_m: 10.0,
            d1_m: 50.0,
            bandwidth_hz: 20e6,
            noise_figure_db: 9.0,
            shadow_std_db: 8.0,
            pilot_power_mw: 100.0,
            data_power_mw: 100.0,
            coherence_samples: 200,
            pilot_length: k,
            num_aps: m,
            num_users: k,
            ap_grid: Some(GridLayout::nearest_square(m)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let positive = [
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("area_side_m", self.area_side_m),
            ("ap_height_m", self.ap_height_m),
            ("user_height_m", self.user_height_m),
            ("bandwidth_hz", self.bandwidth_hz),
            ("pilot_power_mw", self.pilot_power_mw),
            ("data_power_mw", self.data_power_mw),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return fail(format!("{name} must be positive and finite, got {value}"));
            }
        }
        if !(self.shadow_std_db.is_finite() && self.shadow_std_db >= 0.0) {
            return fail(format!("shadow_std_db must be non-negative, got {}", self.shadow_std_db));
        }
        if !self.noise_figure_db.is_finite() {
            return fail("noise_figure_db must be finite".into());
        }
        if !(0.0 < self.d0_m && self.d0_m < self.d1_m && self.d1_m < self.area_side_m) {
            return fail(format!(
                "need 0 < d0 < d1 < D, got d0={} d1={} D={}",
                self.d0_m, self.d1_m, self.area_side_m
            ));
        }
        if self.num_aps == 0 || self.num_users == 0 {
            return fail("num_aps and num_users must be at least 1".into());
        }
        if self.pilot_length == 0 || self.pilot_length >= self.coherence_samples {
            return fail(format!(
                "need 1 <= pilot_length < coherence_samples, got {} and {}",
                self.pilot_length, self.coherence_samples
            ));
        }
        if let Some(grid) = self.ap_grid {
            if grid.cols * grid.rows != self.num_aps {
                return fail(format!(
                    "ap_grid {}x{} does not hold {} APs",
                    grid.cols, grid.rows, self.num_aps
                ));
            }
        }
        Ok(())
    }

    /// Receiver noise power over the full bandwidth, dBm.
    pub fn noise_power_dbm(&self) -> f64 {
        THERMAL_NOISE_DBM_PER_HZ + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }

    pub fn normalized_snr(&self) -> NormalizedSnr {
        let noise_mw = 10f64.powf(self.noise_power_dbm() / 10.0);
        NormalizedSnr {
            data: self.data_power_mw / noise_mw,
            pilot: self.pilot_power_mw / noise_mw,
        }
    }

    /// Fraction of the bandwidth left for uplink data: `(1 - tau/tau_c) / 2`.
    pub fn overhead_factor(&self) -> f64 {
        (1.0 - self.pilot_length as f64 / self.coherence_samples as f64) / 2.0
    }

    /// SHA-256 over the canonical JSON encoding.
    pub fn digest(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).into()
    }
}

/// Whether the network standardizes raw linear gains or `beta` in dB.
///
/// Linear is the default: on the 30 x 5 reference setup it trains to a
/// test minimum rate around 0.87 bit/s/Hz, against roughly 0.65-0.70 in
/// the dB domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InputTransform {
    Log,
    #[default]
    Linear,
}

impl InputTransform {
    pub fn tag(self) -> &'static str {
        match self {
            InputTransform::Log => "log",
            InputTransform::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_every: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    pub input_transform: InputTransform,
    pub finetune_iterations: usize,
    pub finetune_learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 10_000,
            batch_size: 100,
            learning_rate: 0.01,
            validation_every: 50,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            input_transform: InputTransform::Linear,
            finetune_iterations: 100,
            finetune_learning_rate: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.validation_every == 0 || self.finetune_iterations == 0 {
            return Err(Error::Config(
                "batch_size, validation_every and finetune_iterations must be at least 1".into(),
            ));
        }
        for (name, lr) in [
            ("learning_rate", self.learning_rate),
            ("finetune_learning_rate", self.finetune_learning_rate),
        ] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {lr}")));
            }
        }
        if !(0.0..1.0).contains(&self.adam_beta1)
            || !(0.0..1.0).contains(&self.adam_beta2)
            || self.adam_epsilon <= 0.0
        {
            return Err(Error::Config("adam constants out of range".into()));
        }
        Ok(())
    }
}

/// On-disk shape of the `[system]` table. `pilot_length` and `ap_grid`
/// default from the user and AP counts.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SystemTable {
    carrier_freq_hz: Option<f64>,
    area_side_m: Option<f64>,
    ap_height_m: Option<f64>,
    user_height_m: Option<f64>,
    d0_m: Option<f64>,
    d1_m: Option<f64>,
    bandwidth_hz: Option<f64>,
    noise_figure_db: Option<f64>,
    shadow_std_db: Option<f64>,
    pilot_power_mw: Option<f64>,
    data_power_mw: Option<f64>,
    coherence_samples: Option<usize>,
    pilot_length: Option<usize>,
    num_aps: Option<usize>,
    num_users: Option<usize>,
    ap_grid: Option<GridLayout>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    system: SystemTable,
    train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: SystemConfig::reference(30, 5),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let s = file.system;
        let m = s.num_aps.unwrap_or(30);
        let k = s.num_users.unwrap_or(5);
        let base = SystemConfig::reference(m, k);
        let system = SystemConfig {
            carrier_freq_hz: s.carrier_freq_hz.unwrap_or(base.carrier_freq_hz),
            area_side_m: s.area_side_m.unwrap_or(base.area_side_m),
            ap_height_m: s.ap_height_m.unwrap_or(base.ap_height_m),
            user_height_m: s.user_height_m.unwrap_or(base.user_height_m),
            d0_m: s.d0_m.unwrap_or(base.d0_m),
            d1_m: s.d1_m.unwrap_or(base.d1_m),
            bandwidth_hz: s.bandwidth_hz.unwrap_or(base.bandwidth_hz),
            noise_figure_db: s.noise_figure_db.unwrap_or(base.noise_figure_db),
            shadow_std_db: s.shadow_std_db.unwrap_or(base.shadow_std_db),
            pilot_power_mw: s.pilot_power_mw.unwrap_or(base.pilot_power_mw),
            data_power_mw: s.data_power_mw.unwrap_or(base.data_power_mw),
            coherence_samples: s.coherence_samples.unwrap_or(base.coherence_samples),
            pilot_length: s.pilot_length.unwrap_or(k),
            num_aps: m,
            num_users: k,
            ap_grid: s.ap_grid.or(base.ap_grid),
        };
        system.validate()?;
        file.train.validate()?;
        Ok(ExperimentConfig {
            system,
            train: file.train,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(format!("config {}", path.display())),
            _ => e.into(),
        })?;
        Self::from_toml_str(&text)
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
