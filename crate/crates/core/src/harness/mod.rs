//! Monte-Carlo experiment driver.
//!
//! One trial is one subframe sent end to end through a fresh channel
//! realization. For every (guard scheme, SNR) point the sweep runs
//! `frames * 10` trials and averages MSE per trial and BER over all bits.
//! Every configured estimator sees the same received samples.

mod report;
mod settings;
mod trial;

use std::fmt;
use std::str::FromStr;

use crate::channel::PowerDelayProfile;
use crate::error::{Error, Result};
use crate::estimation::EstimatorKind;
use crate::grid::{lookup_grid_config, Bandwidth, GridConfig, PilotPattern};
use crate::mimo_link::{AntennaConfig, Constellation};
use crate::ofdm::GuardScheme;

pub use report::{emit_plots, read_csv, write_csv, BER_PLOT_FLOOR};
pub use settings::{parse_settings, parse_snr_list, ExperimentSettings};
pub use trial::{run_trial, EstimatorOutcome, PointSetup, Simulator, TrialOutcome, TrialSeeds};

/// How the nominal SNR sets the channel noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnrConvention {
    /// Post-DFT per-subcarrier SNR of the CP system equals the nominal value;
    /// ZP uses the same transmit power and pays the overlap-add noise penalty.
    #[default]
    Raw,
    /// Additionally charges CP for the energy spent on the prefix, lowering its
    /// effective SNR by `N / (N + L_g)`.
    EnergyNormalized,
}

impl SnrConvention {
    pub fn label(self) -> &'static str {
        match self {
            SnrConvention::Raw => "raw",
            SnrConvention::EnergyNormalized => "energy-normalized",
        }
    }
}

impl fmt::Display for SnrConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SnrConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "raw" => Ok(SnrConvention::Raw),
            "energy-normalized" | "energy-normalised" => Ok(SnrConvention::EnergyNormalized),
            other => Err(Error::Config(format!("unknown SNR convention '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub schemes: Vec<GuardScheme>,
    pub estimators: Vec<EstimatorKind>,
    /// Strictly increasing; `f64::INFINITY` means noiseless.
    pub snr_db: Vec<f64>,
    pub frames: usize,
    pub pdp: PowerDelayProfile,
    pub antennas: AntennaConfig,
    pub constellation: Constellation,
    /// Low-rank estimator order; defaults to the tap count.
    pub rank: Option<usize>,
    pub seed: u64,
    pub snr_convention: SnrConvention,
}

pub const DESK_FRAMES: usize = 20;
pub const FULL_SCALE_FRAMES: usize = 100;
pub const DEFAULT_TAPS: usize = 8;

impl Default for ExperimentConfig {
    /// 5 MHz, 2x2, QPSK, 8 uniform taps, guard 16, 20 frames, SNR 0:5:30 dB.
    fn default() -> Self {
        ExperimentConfig {
            grid: lookup_grid_config(Bandwidth::Mhz5),
            schemes: vec![GuardScheme::Cp, GuardScheme::Zp],
            estimators: EstimatorKind::ALL.to_vec(),
            snr_db: (0..=6).map(|i| 5.0 * i as f64).collect(),
            frames: DESK_FRAMES,
            pdp: PowerDelayProfile::uniform(DEFAULT_TAPS).expect("non-zero taps"),
            antennas: AntennaConfig::default(),
            constellation: Constellation::Qpsk,
            rank: None,
            seed: 42,
            snr_convention: SnrConvention::Raw,
        }
    }
}

impl ExperimentConfig {
    pub fn full_scale() -> Self {
        ExperimentConfig {
            frames: FULL_SCALE_FRAMES,
            ..Self::default()
        }
    }

    pub fn taps(&self) -> usize {
        self.pdp.taps()
    }

    pub fn rank(&self) -> usize {
        self.rank.unwrap_or(self.taps())
    }

    pub fn trials_per_point(&self) -> usize {
        self.frames * self.grid.subframes_per_frame()
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.frames == 0 {
            return Err(Error::Config("at least one frame is required".into()));
        }
        if self.schemes.is_empty() || self.estimators.is_empty() {
            return Err(Error::Config(
                "need at least one scheme and one estimator".into(),
            ));
        }
        let mut s = self.schemes.clone();
        s.sort();
        s.dedup();
        let mut e = self.estimators.clone();
        e.sort();
        e.dedup();
        if s.len() != self.schemes.len() || e.len() != self.estimators.len() {
            return Err(Error::Config("duplicate scheme or estimator".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Config("no SNR points".into()));
        }
        if self.snr_db.iter().any(|v| v.is_nan()) || self.snr_db.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(Error::Config(
                "SNR points must be strictly increasing".into(),
            ));
        }
        if self.taps() > self.grid.guard_len + 1 {
            return Err(Error::Config(format!(
                "{} channel taps exceed guard length {} + 1; guard removal would leave ISI",
                self.taps(),
                self.grid.guard_len
            )));
        }
        AntennaConfig::new(self.antennas.n_tx, self.antennas.n_rx)?;
        let pattern = PilotPattern::lte_default(self.antennas.n_tx)?;
        pattern.validate(&self.grid)?;
        let min_pilots = (0..pattern.ports())
            .flat_map(|p| (0..pattern.pilot_symbols.len()).map(move |i| (p, i)))
            .map(|(p, i)| pattern.subcarriers(p, i, &self.grid).len())
            .min()
            .unwrap_or(0);
        let rank = self.rank();
        if rank == 0 || rank > min_pilots {
            return Err(Error::Config(format!(
                "rank {rank} outside [1, {min_pilots}] pilot subcarriers"
            )));
        }
        Ok(())
    }

    /// Channel noise variance per complex sample for one scheme at one SNR.
    pub fn noise_variance(&self, scheme: GuardScheme, snr_db: f64) -> f64 {
        let base = 10f64.powf(-snr_db / 10.0);
        match (self.snr_convention, scheme) {
            (SnrConvention::EnergyNormalized, GuardScheme::Cp) => {
                let n = self.grid.fft_size as f64;
                base * (n + self.grid.guard_len as f64) / n
            }
            _ => base,
        }
    }

    /// Noise variance per subcarrier after guard removal and the DFT.
    pub fn effective_noise_variance(&self, scheme: GuardScheme, snr_db: f64) -> f64 {
        let sigma2 = self.noise_variance(scheme, snr_db);
        match scheme {
            GuardScheme::Cp => sigma2,
            GuardScheme::Zp => {
                let n = self.grid.fft_size as f64;
                sigma2 * (n + self.grid.guard_len as f64) / n
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub scheme: GuardScheme,
    pub estimator: EstimatorKind,
    pub snr_db: f64,
    pub mse_pilot: f64,
    pub mse_grid: f64,
    pub ber: f64,
    pub trials: usize,
    pub bit_count: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
}

impl SweepResult {
    /// Sort by (scheme, estimator, snr).
    pub fn sort(&mut self) {
        self.records.sort_by(|a, b| {
            (a.scheme, a.estimator)
                .cmp(&(b.scheme, b.estimator))
                .then(a.snr_db.total_cmp(&b.snr_db))
        });
    }

    pub fn get(
        &self,
        scheme: GuardScheme,
        estimator: EstimatorKind,
        snr_db: f64,
    ) -> Option<&SweepRecord> {
        self.records
            .iter()
            .find(|r| r.scheme == scheme && r.estimator == estimator && r.snr_db == snr_db)
    }

    /// Records of one (scheme, estimator) series, ordered by SNR.
    pub fn series(&self, scheme: GuardScheme, estimator: EstimatorKind) -> Vec<&SweepRecord> {
        let mut v: Vec<&SweepRecord> = self
            .records
            .iter()
            .filter(|r| r.scheme == scheme && r.estimator == estimator)
            .collect();
        v.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        v
    }

    /// Distinct (scheme, estimator) pairs in sorted order.
    pub fn series_keys(&self) -> Vec<(GuardScheme, EstimatorKind)> {
        let mut keys: Vec<_> = self
            .records
            .iter()
            .map(|r| (r.scheme, r.estimator))
            .collect();
        keys.sort();
        keys.dedup();
        keys
    }
}

/// Run every (scheme, SNR) point of `cfg`.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    Simulator::new(cfg.clone())?.sweep()
}

/// 64-bit finaliser from splitmix64.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a word sequence, used to derive per-trial seeds.
pub fn mix_seed(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6C74_6573_696D_u64, |h, &w| splitmix(h ^ splitmix(w)))
}
