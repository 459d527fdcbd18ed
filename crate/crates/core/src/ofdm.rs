//! OFDM modulation with a unitary DFT and the two guard-interval schemes.
//!
//! With a cyclic prefix the receiver simply drops the guard. With zero padding
//! the receiver folds the trailing `L_g` samples back onto the head of the
//! symbol (overlap-add), which restores the circular-convolution structure as
//! long as the channel has at most `L_g + 1` taps.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{subcarrier_to_bin, GridConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GuardScheme {
    Cp,
    Zp,
}

impl GuardScheme {
    pub fn label(self) -> &'static str {
        match self {
            GuardScheme::Cp => "CP",
            GuardScheme::Zp => "ZP",
        }
    }
}

impl fmt::Display for GuardScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for GuardScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cp" => Ok(GuardScheme::Cp),
            "zp" => Ok(GuardScheme::Zp),
            other => Err(Error::Config(format!("unknown guard scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GuardConfig {
    pub scheme: GuardScheme,
    pub len: usize,
}

impl GuardConfig {
    pub fn new(scheme: GuardScheme, len: usize) -> Self {
        GuardConfig { scheme, len }
    }
}

/// Forward and inverse unitary DFT of a fixed size.
///
/// The FFT plans are shareable between threads; scratch buffers are allocated
/// per call.
#[derive(Clone)]
pub struct Ofdm {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for Ofdm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ofdm").field("n", &self.n).finish()
    }
}

impl Ofdm {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Ofdm {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::Shape(format!(
                "expected {} samples, got {len}",
                self.n
            )));
        }
        Ok(())
    }

    /// x[n] = 1/sqrt(N) * sum_k X[k] exp(+j 2 pi k n / N)
    pub fn modulate(&self, freq_bins: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(freq_bins.len())?;
        let mut buf = freq_bins.to_vec();
        self.inverse.process(&mut buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
        Ok(buf)
    }

    /// X[k] = 1/sqrt(N) * sum_n x[n] exp(-j 2 pi k n / N)
    pub fn demodulate(&self, samples: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(samples.len())?;
        let mut buf = samples.to_vec();
        self.forward.process(&mut buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
        Ok(buf)
    }

    /// Place occupied subcarriers on their FFT bins and modulate.
    pub fn modulate_occupied(
        &self,
        occupied: &[Complex64],
        cfg: &GridConfig,
    ) -> Result<Vec<Complex64>> {
        if occupied.len() != cfg.occupied_subcarriers {
            return Err(Error::Shape(format!(
                "expected {} occupied subcarriers, got {}",
                cfg.occupied_subcarriers,
                occupied.len()
            )));
        }
        let mut bins = vec![Complex64::new(0.0, 0.0); self.n];
        for (k, &v) in occupied.iter().enumerate() {
            bins[subcarrier_to_bin(k, cfg)?] = v;
        }
        self.modulate(&bins)
    }

    /// Demodulate and keep only the occupied subcarriers.
    pub fn demodulate_occupied(
        &self,
        samples: &[Complex64],
        cfg: &GridConfig,
    ) -> Result<Vec<Complex64>> {
        let bins = self.demodulate(samples)?;
        (0..cfg.occupied_subcarriers)
            .map(|k| Ok(bins[subcarrier_to_bin(k, cfg)?]))
            .collect()
    }
}

pub fn ofdm_modulate(freq_bins: &[Complex64]) -> Result<Vec<Complex64>> {
    Ofdm::new(freq_bins.len()).modulate(freq_bins)
}

pub fn ofdm_demodulate(samples: &[Complex64]) -> Result<Vec<Complex64>> {
    Ofdm::new(samples.len()).demodulate(samples)
}

/// CP: `[x[N-L..N], x]`. ZP: `[x, 0; L]`.
pub fn add_guard(x: &[Complex64], guard: GuardConfig) -> Result<Vec<Complex64>> {
    let n = x.len();
    if guard.len >= n {
        return Err(Error::Config(format!(
            "guard length {} must be shorter than the symbol ({n})",
            guard.len
        )));
    }
    let mut out = Vec::with_capacity(n + guard.len);
    match guard.scheme {
        GuardScheme::Cp => {
            out.extend_from_slice(&x[n - guard.len..]);
            out.extend_from_slice(x);
        }
        GuardScheme::Zp => {
            out.extend_from_slice(x);
            out.resize(n + guard.len, Complex64::new(0.0, 0.0));
        }
    }
    Ok(out)
}

/// CP: drop the first `L` samples. ZP: overlap-add the last `L` samples onto
/// the first `L`.
pub fn strip_guard(y: &[Complex64], n: usize, guard: GuardConfig) -> Result<Vec<Complex64>> {
    if y.len() != n + guard.len {
        return Err(Error::Shape(format!(
            "received symbol has {} samples, expected {}",
            y.len(),
            n + guard.len
        )));
    }
    if guard.len >= n {
        return Err(Error::Config(format!(
            "guard length {} must be shorter than the symbol ({n})",
            guard.len
        )));
    }
    Ok(match guard.scheme {
        GuardScheme::Cp => y[guard.len..].to_vec(),
        GuardScheme::Zp => {
            let mut out = y[..n].to_vec();
            for (o, tail) in out.iter_mut().zip(&y[n..]) {
                *o += tail;
            }
            out
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyFactors {
    /// Fraction of transmitted energy that lands in the useful part of the symbol.
    pub power_efficiency: f64,
    /// Post-receiver noise power relative to the channel noise power.
    pub noise_enhancement: f64,
}

pub fn efficiency_factors(cfg: &GridConfig, guard: GuardConfig) -> EfficiencyFactors {
    let n = cfg.fft_size as f64;
    let l = guard.len as f64;
    match guard.scheme {
        GuardScheme::Cp => EfficiencyFactors {
            power_efficiency: n / (n + l),
            noise_enhancement: 1.0,
        },
        GuardScheme::Zp => EfficiencyFactors {
            power_efficiency: 1.0,
            noise_enhancement: (n + l) / n,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lookup_grid_config, Bandwidth};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Direct O(N^2) DFT, sign -1 for forward.
    fn naive_dft(x: &[Complex64], sign: f64) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(c(0.0, 0.0), |acc, (m, v)| {
                    let ph = sign * 2.0 * std::f64::consts::PI * (k * m % n) as f64 / n as f64;
                    acc + v * Complex64::from_polar(1.0, ph)
                }) / (n as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn zero_in_zero_out() {
        let x = ofdm_modulate(&vec![c(0.0, 0.0); 16]).unwrap();
        assert!(x.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn impulse_gives_constant() {
        let n = 64;
        let mut bins = vec![c(0.0, 0.0); n];
        bins[0] = c((n as f64).sqrt(), 0.0);
        let x = ofdm_modulate(&bins).unwrap();
        assert!(x.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-12));
        let back = ofdm_demodulate(&vec![c(1.0, 0.0); n]).unwrap();
        assert!((back[0] - c(8.0, 0.0)).norm() < 1e-12);
        assert!(back[1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn matches_naive_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_vec(&mut rng, 24);
        assert!(max_err(&ofdm_modulate(&x).unwrap(), &naive_dft(&x, 1.0)) < 1e-12);
        assert!(max_err(&ofdm_demodulate(&x).unwrap(), &naive_dft(&x, -1.0)) < 1e-12);
    }

    #[test]
    fn parseval_and_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ofdm = Ofdm::new(512);
        for _ in 0..10 {
            let x = random_vec(&mut rng, 512);
            let t = ofdm.modulate(&x).unwrap();
            let ex: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let et: f64 = t.iter().map(|v| v.norm_sqr()).sum();
            assert!((ex - et).abs() / ex < 1e-12);
            assert!(max_err(&ofdm.demodulate(&t).unwrap(), &x) < 1e-12);
        }
    }

    #[test]
    fn demodulate_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_vec(&mut rng, 32);
        let y = random_vec(&mut rng, 32);
        let (a, b) = (c(0.3, -1.2), c(2.0, 0.5));
        let mix: Vec<_> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = ofdm_demodulate(&mix).unwrap();
        let dx = ofdm_demodulate(&x).unwrap();
        let dy = ofdm_demodulate(&y).unwrap();
        let rhs: Vec<_> = dx.iter().zip(&dy).map(|(p, q)| a * p + b * q).collect();
        assert!(max_err(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        let ofdm = Ofdm::new(8);
        assert!(matches!(
            ofdm.modulate(&[c(1.0, 0.0); 4]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            ofdm.demodulate(&[c(1.0, 0.0); 9]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn guard_definitions() {
        let x: Vec<_> = (1..=4).map(|v| c(v as f64, 0.0)).collect();
        let cp = add_guard(&x, GuardConfig::new(GuardScheme::Cp, 2)).unwrap();
        let re: Vec<f64> = cp.iter().map(|v| v.re).collect();
        assert_eq!(re, vec![3.0, 4.0, 1.0, 2.0, 3.0, 4.0]);
        let zp = add_guard(&x, GuardConfig::new(GuardScheme::Zp, 2)).unwrap();
        let re: Vec<f64> = zp.iter().map(|v| v.re).collect();
        assert_eq!(re, vec![1.0, 2.0, 3.0, 4.0, 0.0, 0.0]);
        for scheme in [GuardScheme::Cp, GuardScheme::Zp] {
            assert_eq!(add_guard(&x, GuardConfig::new(scheme, 0)).unwrap(), x);
            assert!(add_guard(&x, GuardConfig::new(scheme, 4)).is_err());
        }
    }

    #[test]
    fn strip_definitions() {
        let y: Vec<_> = (0..6).map(|v| c(v as f64, 0.0)).collect();
        let cp = strip_guard(&y, 4, GuardConfig::new(GuardScheme::Cp, 2)).unwrap();
        assert_eq!(cp, y[2..].to_vec());
        let zp = strip_guard(&y, 4, GuardConfig::new(GuardScheme::Zp, 2)).unwrap();
        let re: Vec<f64> = zp.iter().map(|v| v.re).collect();
        assert_eq!(re, vec![0.0 + 4.0, 1.0 + 5.0, 2.0, 3.0]);
        assert!(strip_guard(&y, 5, GuardConfig::new(GuardScheme::Zp, 2)).is_err());
    }

    #[test]
    fn efficiency() {
        let cfg = lookup_grid_config(Bandwidth::Mhz5);
        let f = efficiency_factors(&cfg, GuardConfig::new(GuardScheme::Cp, 16));
        assert!((f.power_efficiency - 512.0 / 528.0).abs() < 1e-15);
        assert!((f.power_efficiency - 0.9697).abs() < 1e-4);
        assert_eq!(f.noise_enhancement, 1.0);
        let f = efficiency_factors(&cfg, GuardConfig::new(GuardScheme::Zp, 16));
        assert_eq!(f.power_efficiency, 1.0);
        assert_eq!(f.noise_enhancement, 1.03125);
        for scheme in [GuardScheme::Cp, GuardScheme::Zp] {
            let f = efficiency_factors(&cfg, GuardConfig::new(scheme, 0));
            assert_eq!((f.power_efficiency, f.noise_enhancement), (1.0, 1.0));
        }
    }

    #[test]
    fn occupied_round_trip() {
        let cfg = lookup_grid_config(Bandwidth::Mhz1_25);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ofdm = Ofdm::new(cfg.fft_size);
        let x = random_vec(&mut rng, cfg.occupied_subcarriers);
        let t = ofdm.modulate_occupied(&x, &cfg).unwrap();
        assert!(max_err(&ofdm.demodulate_occupied(&t, &cfg).unwrap(), &x) < 1e-12);
        // DC bin stays empty
        assert!(ofdm.demodulate(&t).unwrap()[0].norm() < 1e-12);
    }
}
