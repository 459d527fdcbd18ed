//! Pilot-aided channel estimation.
//!
//! The least-squares estimate divides each received pilot by the known pilot
//! symbol. The LMMSE estimate filters the LS vector with
//! `R (R + beta/SNR I)^-1`, where `R` is the frequency correlation of the
//! channel across the pilot subcarriers. The low-rank variant keeps only the
//! `p` dominant eigen-directions of `R`:
//!
//! ```text
//! H = U diag(l_1/(l_1 + beta/SNR), ..., l_p/(l_p + beta/SNR), 0, ...) U^H H_ls
//! ```
//!
//! `R` assumes a uniform power-delay profile over `L` sample-spaced taps, so
//! `r(dk) = 1/L * sum_l exp(-j 2 pi dk l / N)` and `R` has rank at most `L`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{subcarrier_frequency, subcarrier_to_bin, GridConfig};
use crate::mimo_link::Constellation;

#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    /// Received samples at the pilot cells.
    pub received: Vec<Complex64>,
    /// Transmitted pilot symbols.
    pub pilots: Vec<Complex64>,
    /// (symbol, subcarrier) of each pilot.
    pub positions: Vec<(usize, usize)>,
}

/// `H_ls[i] = Y_p[i] / X_p[i]`.
pub fn ls_estimate(obs: &PilotObservation) -> Result<Vec<Complex64>> {
    if obs.received.len() != obs.pilots.len() || obs.pilots.len() != obs.positions.len() {
        return Err(Error::Shape(format!(
            "pilot observation lengths disagree: {} received, {} pilots, {} positions",
            obs.received.len(),
            obs.pilots.len(),
            obs.positions.len()
        )));
    }
    obs.received
        .iter()
        .zip(&obs.pilots)
        .map(|(y, x)| {
            if x.norm_sqr() == 0.0 {
                Err(Error::Estimation("zero pilot symbol".into()))
            } else {
                Ok(y / x)
            }
        })
        .collect()
}

/// Correlation between two subcarriers `delta_k` bins apart.
pub fn freq_correlation(delta_k: i64, taps: usize, fft_size: usize) -> Complex64 {
    let n = fft_size as i64;
    let dk = delta_k.rem_euclid(n);
    let sum: Complex64 = (0..taps as i64)
        .map(|l| {
            let m = (dk * l) % n;
            Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * m as f64 / n as f64)
        })
        .sum();
    sum / taps as f64
}

/// Pilot-subcarrier correlation matrix with its eigendecomposition, eigenvalues
/// sorted in descending order.
#[derive(Debug, Clone)]
pub struct CorrelationModel {
    r: DMatrix<Complex64>,
    assumed_taps: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<Complex64>,
}

/// Build the model for pilots at the given FFT bins.
pub fn build_correlation(
    pilot_bins: &[usize],
    taps: usize,
    fft_size: usize,
) -> Result<CorrelationModel> {
    if taps == 0 {
        return Err(Error::Config("assumed tap count must be at least 1".into()));
    }
    if pilot_bins.is_empty() {
        return Err(Error::Config("no pilot subcarriers".into()));
    }
    let mut sorted = pilot_bins.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("pilot subcarriers must be distinct".into()));
    }
    let np = pilot_bins.len();
    let r = DMatrix::from_fn(np, np, |i, j| {
        freq_correlation(pilot_bins[i] as i64 - pilot_bins[j] as i64, taps, fft_size)
    });

    let eig = nalgebra::SymmetricEigen::try_new(r.clone(), 1e-14, 10_000)
        .ok_or_else(|| Error::Numerical("eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..np).collect();
    // stable: equal eigenvalues keep their original order
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    let eigenvectors = DMatrix::from_fn(np, np, |row, col| eig.eigenvectors[(row, order[col])]);
    Ok(CorrelationModel {
        r,
        assumed_taps: taps,
        eigenvalues,
        eigenvectors,
    })
}

impl CorrelationModel {
    /// Model for pilots given as occupied-subcarrier indices.
    pub fn for_subcarriers(subcarriers: &[usize], taps: usize, cfg: &GridConfig) -> Result<Self> {
        let bins: Vec<usize> = subcarriers
            .iter()
            .map(|&k| subcarrier_to_bin(k, cfg))
            .collect::<Result<_>>()?;
        build_correlation(&bins, taps, cfg.fft_size)
    }

    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn assumed_taps(&self) -> usize {
        self.assumed_taps
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.r
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.eigenvectors
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Ls,
    Lmmse,
    LrLmmse,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [
        EstimatorKind::Ls,
        EstimatorKind::Lmmse,
        EstimatorKind::LrLmmse,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Ls => "LS",
            EstimatorKind::Lmmse => "LMMSE",
            EstimatorKind::LrLmmse => "LrLMMSE",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "").as_str() {
            "ls" => Ok(EstimatorKind::Ls),
            "lmmse" => Ok(EstimatorKind::Lmmse),
            "lrlmmse" => Ok(EstimatorKind::LrLmmse),
            other => Err(Error::Config(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Linear across subcarriers, nearest pilot symbol in time.
    #[default]
    LinearFreqNearestTime,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub beta: f64,
    /// Linear average SNR per pilot.
    pub snr: f64,
    /// Retained eigen-directions (low-rank estimator only).
    pub rank: usize,
    pub interp: Interpolation,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind, beta: f64, snr: f64, rank: usize) -> Result<Self> {
        let cfg = EstimatorConfig {
            kind,
            beta,
            snr,
            rank,
            interp: Interpolation::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 1.0) {
            return Err(Error::Config(format!(
                "beta must be >= 1, got {}",
                self.beta
            )));
        }
        if !(self.snr > 0.0) {
            return Err(Error::Config(format!(
                "SNR must be positive, got {}",
                self.snr
            )));
        }
        if self.kind == EstimatorKind::LrLmmse && self.rank == 0 {
            return Err(Error::Config("rank must be at least 1".into()));
        }
        Ok(())
    }

    /// Regularisation term beta / SNR.
    pub fn alpha(&self) -> f64 {
        self.beta / self.snr
    }
}

/// `E|x|^2 * E|1/x|^2` over the constellation.
pub fn beta_for(constellation: Constellation) -> f64 {
    let pts = constellation.points();
    let n = pts.len() as f64;
    let energy = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / n;
    let inv = pts.iter().map(|p| 1.0 / p.norm_sqr()).sum::<f64>() / n;
    energy * inv
}

fn check_dims(h_ls: &[Complex64], model: &CorrelationModel) -> Result<()> {
    if h_ls.len() != model.size() {
        return Err(Error::Shape(format!(
            "{} LS estimates for a {}-pilot correlation model",
            h_ls.len(),
            model.size()
        )));
    }
    Ok(())
}

/// `R (R + beta/SNR I)^-1 h_ls`, via a Cholesky solve.
pub fn lmmse_estimate(
    h_ls: &[Complex64],
    model: &CorrelationModel,
    cfg: &EstimatorConfig,
) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    check_dims(h_ls, model)?;
    let np = model.size();
    let a = &model.r + DMatrix::<Complex64>::identity(np, np) * Complex64::from(cfg.alpha());
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Numerical("R + (beta/SNR) I is not positive definite".into()))?;
    let x = chol.solve(&DVector::from_column_slice(h_ls));
    Ok((&model.r * x).iter().copied().collect())
}

fn rank_weights(model: &CorrelationModel, alpha: f64, rank: usize) -> Vec<f64> {
    let top = model.eigenvalues[0].max(0.0);
    model
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if i >= rank {
                0.0
            } else if alpha == 0.0 {
                // noiseless limit: projector onto the range of R
                if l > 1e-10 * top {
                    1.0
                } else {
                    0.0
                }
            } else {
                let l = l.max(0.0);
                l / (l + alpha)
            }
        })
        .collect()
}

/// `U diag(delta_1..delta_p, 0..) U^H h_ls`.
pub fn lr_lmmse_estimate(
    h_ls: &[Complex64],
    model: &CorrelationModel,
    cfg: &EstimatorConfig,
) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    check_dims(h_ls, model)?;
    if cfg.rank == 0 || cfg.rank > model.size() {
        return Err(Error::Config(format!(
            "rank {} outside [1, {}]",
            cfg.rank,
            model.size()
        )));
    }
    let u = &model.eigenvectors;
    let mut coeffs = u.adjoint() * DVector::from_column_slice(h_ls);
    for (c, w) in coeffs
        .iter_mut()
        .zip(rank_weights(model, cfg.alpha(), cfg.rank))
    {
        *c *= w;
    }
    Ok((u * coeffs).iter().copied().collect())
}

/// An estimator with its pilot-domain filter precomputed, for repeated use at
/// one SNR.
#[derive(Debug, Clone)]
pub enum PilotFilter {
    Identity,
    Matrix(DMatrix<Complex64>),
}

impl PilotFilter {
    pub fn prepare(model: &CorrelationModel, cfg: &EstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        let np = model.size();
        match cfg.kind {
            EstimatorKind::Ls => Ok(PilotFilter::Identity),
            EstimatorKind::Lmmse if cfg.alpha() > 0.0 => {
                let a = &model.r
                    + DMatrix::<Complex64>::identity(np, np) * Complex64::from(cfg.alpha());
                let chol = a.cholesky().ok_or_else(|| {
                    Error::Numerical("R + (beta/SNR) I is not positive definite".into())
                })?;
                // (R + aI)^-1 R equals R (R + aI)^-1 since the two commute
                Ok(PilotFilter::Matrix(chol.solve(&model.r)))
            }
            EstimatorKind::Lmmse | EstimatorKind::LrLmmse => {
                let rank = if cfg.kind == EstimatorKind::Lmmse {
                    np
                } else {
                    cfg.rank
                };
                if rank == 0 || rank > np {
                    return Err(Error::Config(format!("rank {rank} outside [1, {np}]")));
                }
                let u = &model.eigenvectors;
                let w = rank_weights(model, cfg.alpha(), rank);
                let mut scaled = u.clone();
                for (j, wj) in w.iter().enumerate() {
                    scaled.column_mut(j).scale_mut(*wj);
                }
                Ok(PilotFilter::Matrix(scaled * u.adjoint()))
            }
        }
    }

    pub fn apply(&self, h_ls: &[Complex64]) -> Result<Vec<Complex64>> {
        match self {
            PilotFilter::Identity => Ok(h_ls.to_vec()),
            PilotFilter::Matrix(w) => {
                if w.ncols() != h_ls.len() {
                    return Err(Error::Shape(format!(
                        "{} LS estimates for a {}-pilot filter",
                        h_ls.len(),
                        w.ncols()
                    )));
                }
                Ok((w * DVector::from_column_slice(h_ls))
                    .iter()
                    .copied()
                    .collect())
            }
        }
    }
}

/// Channel estimates on one pilot-bearing OFDM symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSymbolEstimate {
    pub symbol: usize,
    /// Ascending occupied-subcarrier indices.
    pub subcarriers: Vec<usize>,
    pub values: Vec<Complex64>,
}

/// Full-grid estimate `[symbol][subcarrier]`: linear in frequency with the edge
/// values held, then each symbol copies the nearest pilot symbol (earlier on a
/// tie).
pub fn interpolate_grid(
    pilots: &[PilotSymbolEstimate],
    n_symbols: usize,
    cfg: &GridConfig,
) -> Result<Vec<Vec<Complex64>>> {
    if pilots.is_empty() {
        return Err(Error::Estimation(
            "no pilot symbols to interpolate from".into(),
        ));
    }
    let nu = cfg.occupied_subcarriers;
    let rows = pilots
        .iter()
        .map(|p| interpolate_frequency(p, nu, cfg))
        .collect::<Result<Vec<_>>>()?;

    Ok((0..n_symbols)
        .map(|s| {
            let nearest = pilots
                .iter()
                .enumerate()
                .min_by_key(|(_, p)| (p.symbol.abs_diff(s), p.symbol))
                .map(|(i, _)| i)
                .expect("non-empty");
            rows[nearest].clone()
        })
        .collect())
}

fn interpolate_frequency(
    p: &PilotSymbolEstimate,
    nu: usize,
    cfg: &GridConfig,
) -> Result<Vec<Complex64>> {
    if p.subcarriers.len() != p.values.len() {
        return Err(Error::Shape(
            "pilot subcarriers and values differ in length".into(),
        ));
    }
    if p.subcarriers.len() < 2 {
        return Err(Error::Estimation(format!(
            "symbol {} has {} pilots, need at least 2",
            p.symbol,
            p.subcarriers.len()
        )));
    }
    if p.subcarriers.windows(2).any(|w| w[0] >= w[1]) || *p.subcarriers.last().unwrap() >= nu {
        return Err(Error::Estimation(
            "pilot subcarriers must be ascending and in band".into(),
        ));
    }
    let freq: Vec<f64> = p
        .subcarriers
        .iter()
        .map(|&k| subcarrier_frequency(k, cfg) as f64)
        .collect();
    let last = freq.len() - 1;
    let mut seg = 0;
    Ok((0..nu)
        .map(|k| {
            let f = subcarrier_frequency(k, cfg) as f64;
            if f <= freq[0] {
                return p.values[0];
            }
            if f >= freq[last] {
                return p.values[last];
            }
            while freq[seg + 1] < f {
                seg += 1;
            }
            let t = (f - freq[seg]) / (freq[seg + 1] - freq[seg]);
            p.values[seg] * (1.0 - t) + p.values[seg + 1] * t
        })
        .collect())
}

/// Mean of `|est - truth|^2`.
pub fn mse(est: &[Complex64], truth: &[Complex64]) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::Shape(format!(
            "estimate has {} entries, truth has {}",
            est.len(),
            truth.len()
        )));
    }
    if est.is_empty() {
        return Err(Error::Shape("nothing to compare".into()));
    }
    Ok(squared_error(est, truth) / est.len() as f64)
}

pub fn squared_error(est: &[Complex64], truth: &[Complex64]) -> f64 {
    est.iter().zip(truth).map(|(a, b)| (a - b).norm_sqr()).sum()
}
