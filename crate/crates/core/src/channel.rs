//! Sample-spaced Rayleigh FIR channels, convolution and AWGN.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{subcarrier_to_bin, GridConfig};

/// Expected power per tap. Sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile(Vec<f64>);

impl PowerDelayProfile {
    pub fn new(powers: Vec<f64>) -> Result<Self> {
        if powers.is_empty() {
            return Err(Error::Config(
                "power delay profile needs at least one tap".into(),
            ));
        }
        if powers.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config(
                "tap powers must be finite and non-negative".into(),
            ));
        }
        let total: f64 = powers.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "tap powers sum to {total}, expected 1"
            )));
        }
        Ok(PowerDelayProfile(powers))
    }

    pub fn uniform(taps: usize) -> Result<Self> {
        if taps == 0 {
            return Err(Error::Config("tap count must be at least 1".into()));
        }
        Ok(PowerDelayProfile(vec![1.0 / taps as f64; taps]))
    }

    pub fn taps(&self) -> usize {
        self.0.len()
    }

    pub fn powers(&self) -> &[f64] {
        &self.0
    }
}

/// Block-fading MIMO channel: `taps[rx][tx]` is the impulse response between
/// one antenna pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<Vec<Vec<Complex64>>>,
    pub pdp: PowerDelayProfile,
}

impl ChannelRealization {
    pub fn n_rx(&self) -> usize {
        self.taps.len()
    }

    pub fn n_tx(&self) -> usize {
        self.taps.first().map_or(0, Vec::len)
    }

    pub fn tap_count(&self) -> usize {
        self.pdp.taps()
    }
}

/// Circularly-symmetric complex Gaussian with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Independent taps `h_l ~ CN(0, p_l)` for every antenna pair.
pub fn draw_channel<R: Rng + ?Sized>(
    pdp: &PowerDelayProfile,
    n_tx: usize,
    n_rx: usize,
    rng: &mut R,
) -> ChannelRealization {
    let taps = (0..n_rx)
        .map(|_| {
            (0..n_tx)
                .map(|_| {
                    pdp.powers()
                        .iter()
                        .map(|&p| complex_gaussian(rng, p))
                        .collect()
                })
                .collect()
        })
        .collect();
    ChannelRealization {
        taps,
        pdp: pdp.clone(),
    }
}

/// Full linear convolution, length `x.len() + h.len() - 1`.
pub fn linear_convolve(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); x.len() + h.len() - 1];
    for (l, &tap) in h.iter().enumerate() {
        if tap == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (o, &v) in out[l..].iter_mut().zip(x) {
            *o += v * tap;
        }
    }
    out
}

/// `rx[r] = sum_t tx[t] * h[r][t]`, truncated to the input length.
///
/// The convolution tail past the end of the block belongs to the next block's
/// guard interval and is dropped.
pub fn apply_channel(
    tx: &[Vec<Complex64>],
    ch: &ChannelRealization,
) -> Result<Vec<Vec<Complex64>>> {
    if tx.len() != ch.n_tx() {
        return Err(Error::Shape(format!(
            "{} transmit streams for a channel with {} transmit antennas",
            tx.len(),
            ch.n_tx()
        )));
    }
    let len = tx.first().map_or(0, Vec::len);
    if tx.iter().any(|s| s.len() != len) {
        return Err(Error::Shape("transmit streams differ in length".into()));
    }
    Ok(ch
        .taps
        .iter()
        .map(|row| {
            let mut acc = vec![Complex64::new(0.0, 0.0); len];
            for (stream, h) in tx.iter().zip(row) {
                for (a, v) in acc.iter_mut().zip(linear_convolve(stream, h)) {
                    *a += v;
                }
            }
            acc
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Noise power per complex sample.
    pub variance: f64,
}

/// `y = x + w` with `w ~ CN(0, variance)` i.i.d.
pub fn add_awgn<R: Rng + ?Sized>(
    x: &[Complex64],
    noise: NoiseConfig,
    rng: &mut R,
) -> Vec<Complex64> {
    if noise.variance == 0.0 {
        return x.to_vec();
    }
    x.iter()
        .map(|v| v + complex_gaussian(rng, noise.variance))
        .collect()
}

/// Frequency response on all `N` FFT bins, indexed `[rx][tx][bin]`:
/// `H[k] = sum_l h_l exp(-j 2 pi k l / N)`.
pub fn true_cfr(ch: &ChannelRealization, cfg: &GridConfig) -> Vec<Vec<Vec<Complex64>>> {
    let n = cfg.fft_size;
    let twiddle: Vec<Complex64> = (0..n)
        .map(|m| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * m as f64 / n as f64))
        .collect();
    ch.taps
        .iter()
        .map(|row| {
            row.iter()
                .map(|h| {
                    (0..n)
                        .map(|k| {
                            h.iter()
                                .enumerate()
                                .map(|(l, tap)| tap * twiddle[(k * l) % n])
                                .sum()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Frequency response restricted to the occupied subcarriers, `[rx][tx][k]`.
pub fn true_cfr_occupied(
    ch: &ChannelRealization,
    cfg: &GridConfig,
) -> Result<Vec<Vec<Vec<Complex64>>>> {
    let bins: Vec<usize> = (0..cfg.occupied_subcarriers)
        .map(|k| subcarrier_to_bin(k, cfg))
        .collect::<Result<_>>()?;
    Ok(true_cfr(ch, cfg)
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|h| bins.iter().map(|&b| h[b]).collect())
                .collect()
        })
        .collect())
}

/// Tap dump, one row per tap: `rx,tx,tap,re,im`.
pub fn write_channel_csv<W: Write>(out: W, ch: &ChannelRealization) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rx", "tx", "tap", "re", "im"])?;
    for (r, row) in ch.taps.iter().enumerate() {
        for (t, h) in row.iter().enumerate() {
            for (l, tap) in h.iter().enumerate() {
                w.write_record([
                    r.to_string(),
                    t.to_string(),
                    l.to_string(),
                    format!("{:.16e}", tap.re),
                    format!("{:.16e}", tap.im),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
