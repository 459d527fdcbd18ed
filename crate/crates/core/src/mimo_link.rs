//! Bit mapping, spatial multiplexing and zero-forcing detection.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Condition number above which a channel matrix is treated as singular.
pub const ZF_MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AntennaConfig {
    pub n_tx: usize,
    pub n_rx: usize,
}

impl AntennaConfig {
    pub fn new(n_tx: usize, n_rx: usize) -> Result<Self> {
        if n_tx == 0 || n_rx == 0 {
            return Err(Error::Config("antenna counts must be at least 1".into()));
        }
        if n_rx < n_tx {
            return Err(Error::Config(format!(
                "zero-forcing needs at least as many receive ({n_rx}) as transmit ({n_tx}) antennas"
            )));
        }
        Ok(AntennaConfig { n_tx, n_rx })
    }
}

impl Default for AntennaConfig {
    fn default() -> Self {
        AntennaConfig { n_tx: 2, n_rx: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constellation {
    Qpsk,
    Qam16,
}

impl Constellation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
        }
    }

    /// Every constellation point, unit average energy.
    pub fn points(self) -> Vec<Complex64> {
        let bps = self.bits_per_symbol();
        (0..1u32 << bps)
            .map(|v| {
                let bits: Vec<u8> = (0..bps).map(|i| ((v >> (bps - 1 - i)) & 1) as u8).collect();
                map_bits(self, &bits).expect("whole symbol")[0]
            })
            .collect()
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constellation::Qpsk => "QPSK",
            Constellation::Qam16 => "16QAM",
        })
    }
}

impl FromStr for Constellation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Constellation::Qpsk),
            "qam16" | "16qam" | "16-qam" => Ok(Constellation::Qam16),
            other => Err(Error::Config(format!(
                "unsupported constellation '{other}'"
            ))),
        }
    }
}

/// Gray QPSK: (b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2).
pub fn qpsk_map(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % 2 != 0 {
        return Err(Error::Shape(format!(
            "QPSK needs an even bit count, got {}",
            bits.len()
        )));
    }
    let a = std::f64::consts::FRAC_1_SQRT_2;
    Ok(bits
        .chunks_exact(2)
        .map(|b| Complex64::new(a * (1.0 - 2.0 * b[0] as f64), a * (1.0 - 2.0 * b[1] as f64)))
        .collect())
}

/// Hard decisions; a component exactly on an axis decides 0.
pub fn qpsk_demap(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [(s.re < 0.0) as u8, (s.im < 0.0) as u8])
        .collect()
}

// Gray-coded 4-PAM level for two bits: 00 -> 3, 01 -> 1, 11 -> -1, 10 -> -3.
fn pam4_level(b0: u8, b1: u8) -> f64 {
    (1.0 - 2.0 * b0 as f64) * (2.0 + (1.0 - 2.0 * b1 as f64))
}

fn pam4_bits(v: f64) -> [u8; 2] {
    [(v < 0.0) as u8, (v.abs() < 2.0) as u8]
}

/// Gray 16-QAM, first bit pair on I, second on Q.
pub fn qam16_map(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % 4 != 0 {
        return Err(Error::Shape(format!(
            "16-QAM needs a multiple of 4 bits, got {}",
            bits.len()
        )));
    }
    let scale = 1.0 / 10f64.sqrt();
    Ok(bits
        .chunks_exact(4)
        .map(|b| {
            Complex64::new(
                pam4_level(b[0], b[1]) * scale,
                pam4_level(b[2], b[3]) * scale,
            )
        })
        .collect())
}

pub fn qam16_demap(symbols: &[Complex64]) -> Vec<u8> {
    let scale = 10f64.sqrt();
    symbols
        .iter()
        .flat_map(|s| {
            let [a, b] = pam4_bits(s.re * scale);
            let [c, d] = pam4_bits(s.im * scale);
            [a, b, c, d]
        })
        .collect()
}

pub fn map_bits(constellation: Constellation, bits: &[u8]) -> Result<Vec<Complex64>> {
    match constellation {
        Constellation::Qpsk => qpsk_map(bits),
        Constellation::Qam16 => qam16_map(bits),
    }
}

pub fn demap_symbols(constellation: Constellation, symbols: &[Complex64]) -> Vec<u8> {
    match constellation {
        Constellation::Qpsk => qpsk_demap(symbols),
        Constellation::Qam16 => qam16_demap(symbols),
    }
}

/// Zero-forcing detection of one subcarrier.
///
/// `h` is row-major `n_rx x n_tx`. Returns `None` when the channel estimate is
/// too ill-conditioned to invert (the caller erases the symbols).
pub fn zf_detect(y: &[Complex64], h: &[Complex64], n_tx: usize) -> Result<Option<Vec<Complex64>>> {
    let n_rx = y.len();
    if n_tx == 0 || h.len() != n_rx * n_tx {
        return Err(Error::Shape(format!(
            "channel matrix has {} entries, expected {n_rx} x {n_tx}",
            h.len()
        )));
    }
    if n_rx < n_tx {
        return Err(Error::Shape("fewer receive than transmit antennas".into()));
    }

    // normal equations G x = H^H y, G = H^H H
    let mut g = vec![Complex64::new(0.0, 0.0); n_tx * n_tx];
    let mut rhs = vec![Complex64::new(0.0, 0.0); n_tx];
    for r in 0..n_rx {
        let row = &h[r * n_tx..(r + 1) * n_tx];
        for i in 0..n_tx {
            rhs[i] += row[i].conj() * y[r];
            for j in 0..n_tx {
                g[i * n_tx + j] += row[i].conj() * row[j];
            }
        }
    }

    match n_tx {
        1 => {
            let g0 = g[0].re;
            if !(g0 > 0.0) {
                return Ok(None);
            }
            Ok(Some(vec![rhs[0] / g0]))
        }
        2 => {
            let (a, d) = (g[0].re, g[3].re);
            let b = g[1];
            // eigenvalues of the 2x2 Hermitian Gram matrix
            let mean = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
            let (hi, lo) = (mean + rad, mean - rad);
            if !(lo > 0.0) || hi / lo > ZF_MAX_CONDITION * ZF_MAX_CONDITION {
                return Ok(None);
            }
            let det = a * d - b.norm_sqr();
            let x0 = (rhs[0] * d - b * rhs[1]) / det;
            let x1 = (rhs[1] * a - g[2] * rhs[0]) / det;
            Ok(Some(vec![x0, x1]))
        }
        _ => {
            let gm = DMatrix::from_row_slice(n_tx, n_tx, &g);
            let eig = gm.clone().symmetric_eigenvalues();
            let hi = eig.max();
            let lo = eig.min();
            if !(lo > 0.0) || hi / lo > ZF_MAX_CONDITION * ZF_MAX_CONDITION {
                return Ok(None);
            }
            let sol = gm
                .cholesky()
                .map(|c| c.solve(&DVector::from_vec(rhs)))
                .ok_or_else(|| Error::Numerical("Gram matrix not positive definite".into()))?;
            Ok(Some(sol.iter().copied().collect()))
        }
    }
}

/// Fraction of differing bits.
pub fn ber(tx_bits: &[u8], rx_bits: &[u8]) -> Result<f64> {
    if tx_bits.len() != rx_bits.len() {
        return Err(Error::Shape(format!(
            "bit streams differ in length: {} vs {}",
            tx_bits.len(),
            rx_bits.len()
        )));
    }
    if tx_bits.is_empty() {
        return Err(Error::Shape("empty bit streams".into()));
    }
    Ok(bit_errors(tx_bits, rx_bits) as f64 / tx_bits.len() as f64)
}

pub fn bit_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}
