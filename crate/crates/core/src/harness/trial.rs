use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{mix_seed, ExperimentConfig, SweepRecord, SweepResult};
use crate::channel::{apply_channel, complex_gaussian, draw_channel, true_cfr_occupied};
use crate::error::{Error, Result};
use crate::estimation::{
    beta_for, interpolate_grid, ls_estimate, squared_error, CorrelationModel, EstimatorConfig,
    EstimatorKind, PilotFilter, PilotObservation, PilotSymbolEstimate,
};
use crate::grid::{
    data_cells, map_grid, pilot_positions, pilot_sequence, PilotPattern, SLOTS_PER_SUBFRAME,
};
use crate::mimo_link::{bit_errors, demap_symbols, map_bits, zf_detect};
use crate::ofdm::{add_guard, strip_guard, GuardConfig, GuardScheme, Ofdm};

const CHANNEL_TAG: u64 = 0x4348_414E;
const NOISE_TAG: u64 = 0x4E4F_4953;
const ERASURE_TAG: u64 = 0x4552_4153;

/// Random streams of one trial.
///
/// `channel` drives the channel realization and the payload bits, `noise` the
/// AWGN. The sweep shares `channel` across guard schemes and SNR points while
/// drawing independent noise for each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub channel: u64,
    pub noise: u64,
    /// Subframe within the radio frame, selects the reference-signal sequence.
    pub subframe: usize,
}

impl TrialSeeds {
    pub fn from_seed(seed: u64) -> Self {
        TrialSeeds {
            channel: mix_seed(&[seed, CHANNEL_TAG]),
            noise: mix_seed(&[seed, NOISE_TAG]),
            subframe: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOutcome {
    pub kind: EstimatorKind,
    pub sq_err_pilot: f64,
    pub pilot_cells: usize,
    pub sq_err_grid: f64,
    pub grid_cells: usize,
    pub bit_errors: u64,
    pub bits: u64,
    /// Detections skipped because the estimated channel was ill-conditioned.
    pub erasures: u64,
}

impl EstimatorOutcome {
    pub fn mse_pilot(&self) -> f64 {
        self.sq_err_pilot / self.pilot_cells as f64
    }

    pub fn mse_grid(&self) -> f64 {
        self.sq_err_grid / self.grid_cells as f64
    }

    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub estimators: Vec<EstimatorOutcome>,
}

impl TrialOutcome {
    pub fn get(&self, kind: EstimatorKind) -> Option<&EstimatorOutcome> {
        self.estimators.iter().find(|e| e.kind == kind)
    }
}

/// Reference signals of one port on one pilot symbol within a slot.
#[derive(Debug, Clone)]
struct PilotSet {
    port: usize,
    symbol_in_slot: usize,
    subcarriers: Vec<usize>,
    /// Offset of this symbol's pilots within the port's per-slot pilot stream.
    stream_offset: usize,
    model: usize,
}

/// Estimator filters for one (scheme, SNR) point.
#[derive(Debug, Clone)]
pub struct PointSetup {
    pub scheme: GuardScheme,
    pub snr_db: f64,
    pub noise_variance: f64,
    /// `filters[estimator][model]`
    filters: Vec<Vec<PilotFilter>>,
}

/// Precomputed geometry and correlation models for an experiment.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: ExperimentConfig,
    ofdm: Ofdm,
    pattern: PilotPattern,
    data_cells: Vec<(usize, usize)>,
    pilot_sets: Vec<PilotSet>,
    pilots_per_slot: usize,
    models: Vec<CorrelationModel>,
}

impl Simulator {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = &cfg.grid;
        let pattern = PilotPattern::lte_default(cfg.antennas.n_tx)?;
        let data_cells = data_cells(&pattern, grid);
        let pilots_per_slot = pilot_positions(0, 0, &pattern, grid).len();

        let mut model_keys: Vec<Vec<usize>> = Vec::new();
        let mut models = Vec::new();
        let mut pilot_sets = Vec::new();
        for port in 0..pattern.ports() {
            let positions = pilot_positions(0, port, &pattern, grid);
            let mut order: Vec<usize> = (0..pattern.pilot_symbols.len()).collect();
            order.sort_by_key(|&i| pattern.pilot_symbols[i]);
            for i in order {
                let symbol = pattern.pilot_symbols[i];
                let subcarriers = pattern.subcarriers(port, i, grid);
                let stream_offset = positions
                    .iter()
                    .position(|&(s, _)| s == symbol)
                    .expect("symbol has pilots");
                let model = match model_keys.iter().position(|k| *k == subcarriers) {
                    Some(m) => m,
                    None => {
                        models.push(CorrelationModel::for_subcarriers(
                            &subcarriers,
                            cfg.taps(),
                            grid,
                        )?);
                        model_keys.push(subcarriers.clone());
                        models.len() - 1
                    }
                };
                pilot_sets.push(PilotSet {
                    port,
                    symbol_in_slot: symbol,
                    subcarriers,
                    stream_offset,
                    model,
                });
            }
        }

        Ok(Simulator {
            ofdm: Ofdm::new(grid.fft_size),
            cfg,
            pattern,
            data_cells,
            pilot_sets,
            pilots_per_slot,
            models,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn models(&self) -> &[CorrelationModel] {
        &self.models
    }

    /// Build the estimator filters for one point. The estimators are told the
    /// true per-subcarrier SNR of the scheme.
    pub fn prepare_point(&self, scheme: GuardScheme, snr_db: f64) -> Result<PointSetup> {
        let noise_variance = self.cfg.noise_variance(scheme, snr_db);
        let eff = self.cfg.effective_noise_variance(scheme, snr_db);
        let snr = if eff > 0.0 { 1.0 / eff } else { f64::INFINITY };
        let beta = beta_for(self.cfg.constellation);
        let filters = self
            .cfg
            .estimators
            .iter()
            .map(|&kind| {
                let est = EstimatorConfig::new(kind, beta, snr, self.cfg.rank())?;
                self.models
                    .iter()
                    .map(|m| PilotFilter::prepare(m, &est))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PointSetup {
            scheme,
            snr_db,
            noise_variance,
            filters,
        })
    }

    /// Seeds for trial `trial` of a point. Channel and bits depend only on the
    /// trial index; noise depends on scheme, SNR index and trial.
    pub fn trial_seeds(&self, scheme: GuardScheme, snr_index: usize, trial: usize) -> TrialSeeds {
        let scheme_id = match scheme {
            GuardScheme::Cp => 1,
            GuardScheme::Zp => 2,
        };
        TrialSeeds {
            channel: mix_seed(&[self.cfg.seed, CHANNEL_TAG, trial as u64]),
            noise: mix_seed(&[
                self.cfg.seed,
                NOISE_TAG,
                scheme_id,
                snr_index as u64,
                trial as u64,
            ]),
            subframe: trial % self.cfg.grid.subframes_per_frame(),
        }
    }

    /// One subframe end to end.
    pub fn run_trial(&self, point: &PointSetup, seeds: TrialSeeds) -> Result<TrialOutcome> {
        let cfg = &self.cfg;
        let grid = &cfg.grid;
        let n = grid.fft_size;
        let nu = grid.occupied_subcarriers;
        let ns = grid.symbols_per_slot;
        let n_sym = grid.symbols_per_subframe();
        let (n_tx, n_rx) = (cfg.antennas.n_tx, cfg.antennas.n_rx);
        let guard = GuardConfig::new(point.scheme, grid.guard_len);
        let bps = cfg.constellation.bits_per_symbol();
        let data_per_slot = self.data_cells.len();

        let mut rng = ChaCha8Rng::seed_from_u64(seeds.channel);
        let ch = draw_channel(&cfg.pdp, n_tx, n_rx, &mut rng);
        let bits: Vec<Vec<u8>> = (0..n_tx)
            .map(|_| {
                (0..SLOTS_PER_SUBFRAME * data_per_slot * bps)
                    .map(|_| rng.random::<bool>() as u8)
                    .collect()
            })
            .collect();

        // reference signals, [port][slot]
        let pilots: Vec<Vec<Vec<Complex64>>> = (0..n_tx)
            .map(|port| {
                (0..SLOTS_PER_SUBFRAME)
                    .map(|s| {
                        pilot_sequence(
                            port,
                            seeds.subframe * SLOTS_PER_SUBFRAME + s,
                            self.pilots_per_slot,
                        )
                    })
                    .collect()
            })
            .collect();

        let mut tx = Vec::with_capacity(n_tx);
        for port in 0..n_tx {
            let syms = map_bits(cfg.constellation, &bits[port])?;
            let mut stream = Vec::with_capacity(n_sym * (n + grid.guard_len));
            for slot in 0..SLOTS_PER_SUBFRAME {
                let chunk = &syms[slot * data_per_slot..(slot + 1) * data_per_slot];
                let (rg, _) = map_grid(chunk, &pilots[port][slot], port, &self.pattern, grid)?;
                for s in 0..ns {
                    let x = self.ofdm.modulate_occupied(&rg.symbol(s), grid)?;
                    stream.extend(add_guard(&x, guard)?);
                }
            }
            tx.push(stream);
        }

        let mut noise_rng = ChaCha8Rng::seed_from_u64(seeds.noise);
        let rx: Vec<Vec<Complex64>> = apply_channel(&tx, &ch)?
            .iter()
            .map(|r| add_window_noise(r, n, guard, point.noise_variance, &mut noise_rng))
            .collect();

        // received[r][symbol][k]
        let win = n + grid.guard_len;
        let received = rx
            .iter()
            .map(|r| {
                r.chunks_exact(win)
                    .map(|w| {
                        self.ofdm
                            .demodulate_occupied(&strip_guard(w, n, guard)?, grid)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let truth = true_cfr_occupied(&ch, grid)?;

        // LS at every pilot symbol, shared by all estimators: ls[r][set][slot]
        let mut ls =
            vec![vec![Vec::with_capacity(SLOTS_PER_SUBFRAME); self.pilot_sets.len()]; n_rx];
        for (r, per_rx) in ls.iter_mut().enumerate() {
            for (set, out) in self.pilot_sets.iter().zip(per_rx.iter_mut()) {
                for slot in 0..SLOTS_PER_SUBFRAME {
                    let symbol = slot * ns + set.symbol_in_slot;
                    let np = set.subcarriers.len();
                    let obs = PilotObservation {
                        received: set
                            .subcarriers
                            .iter()
                            .map(|&k| received[r][symbol][k])
                            .collect(),
                        pilots: pilots[set.port][slot][set.stream_offset..set.stream_offset + np]
                            .to_vec(),
                        positions: set.subcarriers.iter().map(|&k| (symbol, k)).collect(),
                    };
                    out.push(ls_estimate(&obs)?);
                }
            }
        }

        let mut erasure_rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seeds.noise, ERASURE_TAG]));
        let mut outcomes = Vec::with_capacity(cfg.estimators.len());
        for (e_idx, &kind) in cfg.estimators.iter().enumerate() {
            let filters = &point.filters[e_idx];
            let mut sq_err_pilot = 0.0;
            let mut pilot_cells = 0;
            let mut sq_err_grid = 0.0;
            let mut grid_cells = 0;
            // est[r][t][symbol][k]
            let mut est = vec![Vec::with_capacity(n_tx); n_rx];
            for r in 0..n_rx {
                for t in 0..n_tx {
                    let mut per_symbol = Vec::new();
                    for (s_idx, set) in self
                        .pilot_sets
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| s.port == t)
                    {
                        let h_true: Vec<Complex64> =
                            set.subcarriers.iter().map(|&k| truth[r][t][k]).collect();
                        for slot in 0..SLOTS_PER_SUBFRAME {
                            let values = filters[set.model].apply(&ls[r][s_idx][slot])?;
                            sq_err_pilot += squared_error(&values, &h_true);
                            pilot_cells += values.len();
                            per_symbol.push(PilotSymbolEstimate {
                                symbol: slot * ns + set.symbol_in_slot,
                                subcarriers: set.subcarriers.clone(),
                                values,
                            });
                        }
                    }
                    let full = interpolate_grid(&per_symbol, n_sym, grid)?;
                    for row in &full {
                        sq_err_grid += squared_error(row, &truth[r][t]);
                        grid_cells += nu;
                    }
                    est[r].push(full);
                }
            }

            // zero-forcing on every data cell
            let mut detected = vec![Vec::with_capacity(SLOTS_PER_SUBFRAME * data_per_slot); n_tx];
            let mut erased = Vec::new();
            let mut y = vec![Complex64::new(0.0, 0.0); n_rx];
            let mut h = vec![Complex64::new(0.0, 0.0); n_rx * n_tx];
            for slot in 0..SLOTS_PER_SUBFRAME {
                for &(s, k) in &self.data_cells {
                    let symbol = slot * ns + s;
                    for r in 0..n_rx {
                        y[r] = received[r][symbol][k];
                        for t in 0..n_tx {
                            h[r * n_tx + t] = est[r][t][symbol][k];
                        }
                    }
                    let x = zf_detect(&y, &h, n_tx)?;
                    for t in 0..n_tx {
                        detected[t].push(x.as_ref().map_or(Complex64::new(0.0, 0.0), |x| x[t]));
                    }
                    if x.is_none() {
                        erased.push(detected[0].len() - 1);
                    }
                }
            }

            let mut errors = 0u64;
            let mut total = 0u64;
            for t in 0..n_tx {
                let mut rx_bits = demap_symbols(cfg.constellation, &detected[t]);
                // erased symbols get random bits
                for &i in &erased {
                    for b in &mut rx_bits[i * bps..(i + 1) * bps] {
                        *b = erasure_rng.random::<bool>() as u8;
                    }
                }
                errors += bit_errors(&bits[t], &rx_bits);
                total += bits[t].len() as u64;
            }
            let erasures = erased.len() as u64;

            outcomes.push(EstimatorOutcome {
                kind,
                sq_err_pilot,
                pilot_cells,
                sq_err_grid,
                grid_cells,
                bit_errors: errors,
                bits: total,
                erasures,
            });
        }
        Ok(TrialOutcome {
            estimators: outcomes,
        })
    }

    /// All trials of one point, in trial order. Runs on the current rayon pool.
    pub fn run_point(&self, scheme: GuardScheme, snr_index: usize) -> Result<Vec<TrialOutcome>> {
        let snr_db = *self
            .cfg
            .snr_db
            .get(snr_index)
            .ok_or_else(|| Error::Config(format!("no SNR point {snr_index}")))?;
        let point = self.prepare_point(scheme, snr_db)?;
        (0..self.cfg.trials_per_point())
            .into_par_iter()
            .map(|trial| {
                self.run_trial(&point, self.trial_seeds(scheme, snr_index, trial))
                    .map_err(|e| match e {
                        Error::Config(m) => Error::Config(m),
                        other => Error::Numerical(format!(
                            "{scheme} at {snr_db} dB, trial {trial}: {other}"
                        )),
                    })
            })
            .collect()
    }

    pub fn sweep(&self) -> Result<SweepResult> {
        let mut records = Vec::new();
        for &scheme in &self.cfg.schemes {
            for (snr_index, &snr_db) in self.cfg.snr_db.iter().enumerate() {
                let trials = self.run_point(scheme, snr_index)?;
                records.extend(aggregate(scheme, snr_db, &self.cfg.estimators, &trials));
            }
        }
        let mut result = SweepResult { records };
        result.sort();
        Ok(result)
    }
}

/// AWGN for a stream of `n + L` sample windows. Each window draws its `n`
/// body samples before its `L` guard samples, and the guard samples are placed
/// where the scheme discards (CP) or folds (ZP) them. The noise is i.i.d.
/// either way; the layout makes CP and ZP runs from one seed share the noise
/// that survives guard removal.
fn add_window_noise<R: Rng + ?Sized>(
    x: &[Complex64],
    n: usize,
    guard: GuardConfig,
    variance: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    if variance == 0.0 {
        return x.to_vec();
    }
    let l = guard.len;
    let mut out = x.to_vec();
    for w in out.chunks_mut(n + l) {
        let body_start = match guard.scheme {
            GuardScheme::Cp => l,
            GuardScheme::Zp => 0,
        };
        let guard_start = if body_start == 0 { n } else { 0 };
        for v in &mut w[body_start..body_start + n] {
            *v += complex_gaussian(rng, variance);
        }
        for v in &mut w[guard_start..guard_start + l] {
            *v += complex_gaussian(rng, variance);
        }
    }
    out
}

/// Per-trial MSE averaged in trial order; BER as total errors over total bits.
pub(super) fn aggregate(
    scheme: GuardScheme,
    snr_db: f64,
    estimators: &[EstimatorKind],
    trials: &[TrialOutcome],
) -> Vec<SweepRecord> {
    estimators
        .iter()
        .enumerate()
        .map(|(i, &kind)| {
            let mut mse_pilot = 0.0;
            let mut mse_grid = 0.0;
            let mut errors = 0u64;
            let mut bits = 0u64;
            for t in trials {
                let o = &t.estimators[i];
                mse_pilot += o.mse_pilot();
                mse_grid += o.mse_grid();
                errors += o.bit_errors;
                bits += o.bits;
            }
            let count = trials.len() as f64;
            SweepRecord {
                scheme,
                estimator: kind,
                snr_db,
                mse_pilot: mse_pilot / count,
                mse_grid: mse_grid / count,
                ber: errors as f64 / bits as f64,
                trials: trials.len(),
                bit_count: bits,
            }
        })
        .collect()
}

/// Run a single trial of `cfg` from scratch.
pub fn run_trial(
    cfg: &ExperimentConfig,
    scheme: GuardScheme,
    snr_db: f64,
    seeds: TrialSeeds,
) -> Result<TrialOutcome> {
    let sim = Simulator::new(cfg.clone())?;
    let point = sim.prepare_point(scheme, snr_db)?;
    sim.run_trial(&point, seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PowerDelayProfile;
    use crate::grid::GridConfig;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            grid: GridConfig::for_bandwidth_mhz(1.25).unwrap(),
            pdp: PowerDelayProfile::uniform(4).unwrap(),
            frames: 1,
            snr_db: vec![10.0, 20.0],
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_trial_is_exact_at_pilots() {
        let cfg = ExperimentConfig::default();
        for scheme in [GuardScheme::Cp, GuardScheme::Zp] {
            let out = run_trial(&cfg, scheme, f64::INFINITY, TrialSeeds::from_seed(3)).unwrap();
            for kind in [EstimatorKind::Ls, EstimatorKind::Lmmse] {
                let o = out.get(kind).unwrap();
                assert!(o.mse_pilot() < 1e-20, "{scheme} {kind:?} {}", o.mse_pilot());
            }
            // what remains is interpolation error between pilots
            for o in &out.estimators {
                assert!(o.mse_grid() < 1e-2);
                assert!(o.ber() < 1e-3, "{scheme} {:?} {}", o.kind, o.ber());
            }
        }
    }

    #[test]
    fn noiseless_flat_channel_is_error_free() {
        let cfg = ExperimentConfig {
            pdp: PowerDelayProfile::uniform(1).unwrap(),
            rank: Some(1),
            ..small()
        };
        for scheme in [GuardScheme::Cp, GuardScheme::Zp] {
            for seed in 0..5 {
                let out =
                    run_trial(&cfg, scheme, f64::INFINITY, TrialSeeds::from_seed(seed)).unwrap();
                for o in &out.estimators {
                    assert!(o.mse_grid() < 1e-20, "{scheme} {:?}", o.kind);
                    assert_eq!(o.bit_errors, 0, "{scheme} {:?}", o.kind);
                }
            }
        }
    }

    #[test]
    fn trials_are_reproducible() {
        let cfg = small();
        let a = run_trial(&cfg, GuardScheme::Zp, 5.0, TrialSeeds::from_seed(11)).unwrap();
        let b = run_trial(&cfg, GuardScheme::Zp, 5.0, TrialSeeds::from_seed(11)).unwrap();
        assert_eq!(a, b);
        let mut seeds = TrialSeeds::from_seed(11);
        seeds.noise ^= 1;
        let c = run_trial(&cfg, GuardScheme::Zp, 5.0, seeds).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ls_pilot_error_equals_noise_variance() {
        let cfg = ExperimentConfig {
            estimators: vec![EstimatorKind::Ls],
            ..small()
        };
        let sim = Simulator::new(cfg).unwrap();
        for (scheme, expected) in [
            (GuardScheme::Cp, 0.1),
            (GuardScheme::Zp, 0.1 * 132.0 / 128.0),
        ] {
            let point = sim.prepare_point(scheme, 10.0).unwrap();
            let (mut sq, mut cells) = (0.0, 0usize);
            for trial in 0..40 {
                let o = sim
                    .run_trial(&point, sim.trial_seeds(scheme, 0, trial))
                    .unwrap();
                sq += o.estimators[0].sq_err_pilot;
                cells += o.estimators[0].pilot_cells;
            }
            let mse = sq / cells as f64;
            assert!((mse / expected - 1.0).abs() < 0.05, "{scheme}: {mse}");
        }
    }

    #[test]
    fn channel_seed_shared_across_points() {
        let sim = Simulator::new(small()).unwrap();
        let a = sim.trial_seeds(GuardScheme::Cp, 0, 5);
        let b = sim.trial_seeds(GuardScheme::Zp, 1, 5);
        assert_eq!(a.channel, b.channel);
        assert_ne!(a.noise, b.noise);
        assert_ne!(a.channel, sim.trial_seeds(GuardScheme::Cp, 0, 6).channel);
        assert_eq!(a.subframe, 5);
    }

    #[test]
    fn sweep_shape() {
        let res = Simulator::new(small()).unwrap().sweep().unwrap();
        assert_eq!(res.records.len(), 2 * 3 * 2);
        let bits_per_trial = 2 * 2 * (7 * 72 - 2 * 2 * 12) * 2;
        for r in &res.records {
            assert_eq!(r.trials, 10);
            assert_eq!(r.bit_count, 10 * bits_per_trial as u64);
            assert!(r.ber < 0.5 && r.mse_grid > 0.0);
        }
        assert_eq!(res.series_keys().len(), 6);
    }

    #[test]
    fn window_noise_layout() {
        let n = 16;
        let x = vec![Complex64::new(0.0, 0.0); 3 * (n + 4)];
        let cp = add_window_noise(
            &x,
            n,
            GuardConfig::new(GuardScheme::Cp, 4),
            1.0,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        let zp = add_window_noise(
            &x,
            n,
            GuardConfig::new(GuardScheme::Zp, 4),
            1.0,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        for w in 0..3 {
            let base = w * (n + 4);
            assert_eq!(cp[base + 4..base + 4 + n], zp[base..base + n]);
            assert_eq!(cp[base..base + 4], zp[base + n..base + n + 4]);
        }
        let quiet = add_window_noise(
            &x,
            n,
            GuardConfig::new(GuardScheme::Zp, 4),
            0.0,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert_eq!(quiet, x);
    }
}
