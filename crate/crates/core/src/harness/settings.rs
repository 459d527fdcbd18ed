//! `key = value` experiment settings shared by the config file and the CLI.
//!
//! Keys mirror the long flag names of `ltesim simulate`. Later assignments win,
//! so flags applied after the file override it.

use std::collections::BTreeMap;
use std::path::PathBuf;

use super::{ExperimentConfig, SnrConvention, FULL_SCALE_FRAMES};
use crate::channel::PowerDelayProfile;
use crate::error::{Error, Result};
use crate::estimation::EstimatorKind;
use crate::grid::{Bandwidth, GridConfig};
use crate::mimo_link::{AntennaConfig, Constellation};
use crate::ofdm::GuardScheme;

pub const KEYS: &[&str] = &[
    "bandwidth",
    "schemes",
    "estimators",
    "snr-db",
    "frames",
    "full-scale",
    "taps",
    "rank",
    "seed",
    "snr-convention",
    "constellation",
    "guard-len",
    "out",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentSettings {
    values: BTreeMap<String, String>,
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_settings(text: &str) -> Result<ExperimentSettings> {
    let mut settings = ExperimentSettings::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected 'key = value', got '{raw}'",
                lineno + 1
            ))
        })?;
        settings.set(key.trim(), value.trim())?;
    }
    Ok(settings)
}

/// `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_snr_list(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse SNR list '{text}'"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| start + step * i as f64).collect())
    } else {
        text.split(',').map(num).collect()
    }
}

fn parse_list<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{s}' for {key}")))
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{s}' for {key}"))),
    }
}

impl ExperimentSettings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown setting '{key}'")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Apply `other` on top of `self`.
    pub fn merge(&mut self, other: &ExperimentSettings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.get("out").map(PathBuf::from)
    }

    /// Build and validate an experiment; unset keys take the desk-scale defaults.
    pub fn to_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(v) = self.get("bandwidth") {
            cfg.grid = GridConfig::for_bandwidth_mhz(v.parse::<Bandwidth>()?.mhz())?;
        }
        if let Some(v) = self.get("guard-len") {
            cfg.grid = cfg.grid.with_guard_len(parse_num("guard-len", v)?)?;
        }
        if let Some(v) = self.get("schemes") {
            cfg.schemes = parse_list::<GuardScheme>(v)?;
        }
        if let Some(v) = self.get("estimators") {
            cfg.estimators = parse_list::<EstimatorKind>(v)?;
        }
        if let Some(v) = self.get("snr-db") {
            cfg.snr_db = parse_snr_list(v)?;
        }
        if self
            .get("full-scale")
            .map(|v| parse_bool("full-scale", v))
            .transpose()?
            == Some(true)
        {
            cfg.frames = FULL_SCALE_FRAMES;
        }
        if let Some(v) = self.get("frames") {
            cfg.frames = parse_num("frames", v)?;
        }
        if let Some(v) = self.get("taps") {
            cfg.pdp = PowerDelayProfile::uniform(parse_num("taps", v)?)?;
        }
        if let Some(v) = self.get("rank") {
            cfg.rank = Some(parse_num("rank", v)?);
        }
        if let Some(v) = self.get("seed") {
            cfg.seed = parse_num("seed", v)?;
        }
        if let Some(v) = self.get("snr-convention") {
            cfg.snr_convention = v.parse::<SnrConvention>()?;
        }
        if let Some(v) = self.get("constellation") {
            cfg.constellation = v.parse::<Constellation>()?;
        }
        cfg.antennas = AntennaConfig::default();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Settings that reproduce `cfg`.
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        let join = |v: Vec<String>| v.join(",");
        let mut values = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            values.insert(k.to_string(), v);
        };
        put("bandwidth", cfg.grid.bandwidth.to_string());
        put("guard-len", cfg.grid.guard_len.to_string());
        put(
            "schemes",
            join(
                cfg.schemes
                    .iter()
                    .map(|s| s.label().to_ascii_lowercase())
                    .collect(),
            ),
        );
        put(
            "estimators",
            join(
                cfg.estimators
                    .iter()
                    .map(|e| e.label().to_ascii_lowercase())
                    .collect(),
            ),
        );
        put(
            "snr-db",
            join(cfg.snr_db.iter().map(|v| v.to_string()).collect()),
        );
        put("frames", cfg.frames.to_string());
        put("taps", cfg.taps().to_string());
        put("rank", cfg.rank().to_string());
        put("seed", cfg.seed.to_string());
        put("snr-convention", cfg.snr_convention.label().to_string());
        put(
            "constellation",
            cfg.constellation.to_string().to_ascii_lowercase(),
        );
        ExperimentSettings { values }
    }

    pub fn to_text(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_lists() {
        assert_eq!(
            parse_snr_list("0:5:30").unwrap(),
            vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
        );
        assert_eq!(parse_snr_list("0:2.5:5").unwrap(), vec![0.0, 2.5, 5.0]);
        assert_eq!(
            parse_snr_list("10, 20,inf").unwrap(),
            vec![10.0, 20.0, f64::INFINITY]
        );
        assert!(parse_snr_list("0:0:10").is_err());
        assert!(parse_snr_list("1:2").is_err());
        assert!(parse_snr_list("ten").is_err());
    }

    #[test]
    fn file_then_flags() {
        let mut s = parse_settings(
            "# desk run\nbandwidth = 1.25\nframes = 3   # short\ntaps = 5\nschemes = zp\nsnr-db = 0:10:20\n",
        )
        .unwrap();
        let mut flags = ExperimentSettings::default();
        flags.set("frames", "2").unwrap();
        s.merge(&flags);
        let cfg = s.to_config().unwrap();
        assert_eq!(cfg.grid.fft_size, 128);
        assert_eq!(cfg.grid.guard_len, 4);
        assert_eq!(cfg.frames, 2);
        assert_eq!(cfg.schemes, vec![GuardScheme::Zp]);
        assert_eq!(cfg.snr_db, vec![0.0, 10.0, 20.0]);
        assert_eq!(cfg.rank(), 5);
        // 1.25 MHz has a guard of 4 samples, too short for the default 8 taps
        assert!(parse_settings("bandwidth = 1.25")
            .unwrap()
            .to_config()
            .is_err());
    }

    #[test]
    fn defaults_and_errors() {
        let cfg = ExperimentSettings::default().to_config().unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert!(parse_settings("colour = red").is_err());
        assert!(parse_settings("frames 3").is_err());
        let mut s = ExperimentSettings::default();
        s.set("taps", "40").unwrap();
        assert!(matches!(s.to_config(), Err(Error::Config(_))));
        s.set("taps", "x").unwrap();
        assert!(s.to_config().is_err());
    }

    #[test]
    fn full_scale_flag() {
        let s = parse_settings("full-scale = true").unwrap();
        assert_eq!(s.to_config().unwrap().frames, 100);
    }

    #[test]
    fn round_trip_through_text() {
        let cfg = ExperimentConfig {
            frames: 7,
            seed: 99,
            snr_convention: SnrConvention::EnergyNormalized,
            estimators: vec![EstimatorKind::LrLmmse],
            ..Default::default()
        };
        let text = ExperimentSettings::from_config(&cfg).to_text();
        assert_eq!(
            parse_settings(&text).unwrap().to_config().unwrap(),
            ExperimentConfig {
                rank: Some(8),
                ..cfg
            }
        );
    }
}
