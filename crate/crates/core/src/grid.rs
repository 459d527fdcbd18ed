//! Resource-grid geometry for an LTE-style downlink.
//!
//! A slot is `symbols_per_slot` OFDM symbols by `occupied_subcarriers`
//! subcarriers. Reference signals sit on symbols 0 and 4 of every slot with a
//! frequency spacing of 6; each antenna port leaves the cells used by the other
//! ports' reference signals empty so that pilots never interfere.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Channel bandwidths with a defined parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bandwidth {
    Mhz1_25,
    Mhz2_5,
    Mhz5,
    Mhz10,
    Mhz15,
    Mhz20,
}

impl Bandwidth {
    pub const ALL: [Bandwidth; 6] = [
        Bandwidth::Mhz1_25,
        Bandwidth::Mhz2_5,
        Bandwidth::Mhz5,
        Bandwidth::Mhz10,
        Bandwidth::Mhz15,
        Bandwidth::Mhz20,
    ];

    pub fn mhz(self) -> f64 {
        match self {
            Bandwidth::Mhz1_25 => 1.25,
            Bandwidth::Mhz2_5 => 2.5,
            Bandwidth::Mhz5 => 5.0,
            Bandwidth::Mhz10 => 10.0,
            Bandwidth::Mhz15 => 15.0,
            Bandwidth::Mhz20 => 20.0,
        }
    }

    pub fn from_mhz(mhz: f64) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|b| (b.mhz() - mhz).abs() < 1e-9)
            .ok_or_else(|| Error::Config(format!("unsupported bandwidth {mhz} MHz")))
    }
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mhz: f64 = s
            .trim()
            .trim_end_matches("MHz")
            .trim_end_matches("mhz")
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("cannot parse bandwidth '{s}'")))?;
        Self::from_mhz(mhz)
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mhz())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub bandwidth: Bandwidth,
    pub fft_size: usize,
    pub occupied_subcarriers: usize,
    pub prb_count: usize,
    pub sampling_rate_hz: f64,
    /// Guard interval length in samples (cyclic prefix or zero padding).
    pub guard_len: usize,
    pub symbols_per_slot: usize,
    pub slots_per_frame: usize,
}

pub const SUBCARRIERS_PER_PRB: usize = 12;
pub const SLOTS_PER_SUBFRAME: usize = 2;

/// Parameter set for one of the six standard bandwidths.
///
/// The 2.5 MHz entry carries 180 occupied subcarriers, i.e. 15 resource blocks.
/// The guard length defaults to `N / 32`, i.e. 16 samples at 5 MHz.
pub fn lookup_grid_config(bandwidth: Bandwidth) -> GridConfig {
    // (FFT size, occupied subcarriers)
    let (fft_size, occupied) = match bandwidth {
        Bandwidth::Mhz1_25 => (128, 72),
        Bandwidth::Mhz2_5 => (256, 180),
        Bandwidth::Mhz5 => (512, 300),
        Bandwidth::Mhz10 => (1024, 600),
        Bandwidth::Mhz15 => (1536, 900),
        Bandwidth::Mhz20 => (2048, 1200),
    };
    GridConfig {
        bandwidth,
        fft_size,
        occupied_subcarriers: occupied,
        prb_count: occupied / SUBCARRIERS_PER_PRB,
        sampling_rate_hz: 15_000.0 * fft_size as f64,
        guard_len: fft_size / 32,
        symbols_per_slot: 7,
        slots_per_frame: 20,
    }
}

impl GridConfig {
    pub fn for_bandwidth_mhz(mhz: f64) -> Result<Self> {
        Ok(lookup_grid_config(Bandwidth::from_mhz(mhz)?))
    }

    pub fn with_guard_len(mut self, guard_len: usize) -> Result<Self> {
        self.guard_len = guard_len;
        self.validate()?;
        Ok(self)
    }

    /// Unused bins below the occupied band (the lower band edge).
    pub fn left_virtual(&self) -> usize {
        (self.fft_size - self.occupied_subcarriers) / 2
    }

    /// Unused bins above the occupied band, not counting the DC bin.
    pub fn right_virtual(&self) -> usize {
        self.fft_size - self.occupied_subcarriers - self.left_virtual() - 1
    }

    pub fn symbols_per_subframe(&self) -> usize {
        self.symbols_per_slot * SLOTS_PER_SUBFRAME
    }

    pub fn subframes_per_frame(&self) -> usize {
        self.slots_per_frame / SLOTS_PER_SUBFRAME
    }

    pub fn validate(&self) -> Result<()> {
        if self.occupied_subcarriers != SUBCARRIERS_PER_PRB * self.prb_count {
            return Err(Error::Config(format!(
                "{} occupied subcarriers is not 12 x {} PRBs",
                self.occupied_subcarriers, self.prb_count
            )));
        }
        if self.guard_len >= self.fft_size {
            return Err(Error::Config(format!(
                "guard length {} must be shorter than the FFT size {}",
                self.guard_len, self.fft_size
            )));
        }
        if self.occupied_subcarriers + 1 > self.fft_size {
            return Err(Error::Config("occupied band does not fit the FFT".into()));
        }
        Ok(())
    }
}

/// Occupied subcarrier index to FFT bin. Subcarriers are centred on DC, which
/// is left empty.
pub fn subcarrier_to_bin(k: usize, cfg: &GridConfig) -> Result<usize> {
    let nu = cfg.occupied_subcarriers;
    if k >= nu {
        return Err(Error::Config(format!("subcarrier {k} outside [0, {nu})")));
    }
    let half = nu / 2;
    Ok(if k < half {
        cfg.fft_size - half + k
    } else {
        k - half + 1
    })
}

/// Signed frequency position of an occupied subcarrier in units of the
/// subcarrier spacing (negative below DC, DC itself is never occupied).
pub fn subcarrier_frequency(k: usize, cfg: &GridConfig) -> i64 {
    let half = (cfg.occupied_subcarriers / 2) as i64;
    let k = k as i64;
    if k < half {
        k - half
    } else {
        k - half + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Data,
    Pilot,
    Null,
}

impl CellKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Data => "DATA",
            CellKind::Pilot => "PILOT",
            CellKind::Null => "NULL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotPattern {
    /// Symbol indices within a slot that carry reference signals.
    pub pilot_symbols: Vec<usize>,
    pub freq_spacing: usize,
    /// `offsets[port][i]` is the first pilot subcarrier of `pilot_symbols[i]`.
    pub offsets: Vec<Vec<usize>>,
}

impl PilotPattern {
    /// Symbols 0 and 4, spacing 6, port 1 staggered by 3 against port 0.
    pub fn lte_default(ports: usize) -> Result<Self> {
        let all = [vec![0, 3], vec![3, 0]];
        if ports == 0 || ports > all.len() {
            return Err(Error::Config(format!(
                "default pilot pattern supports 1 or 2 antenna ports, got {ports}"
            )));
        }
        Ok(PilotPattern {
            pilot_symbols: vec![0, 4],
            freq_spacing: 6,
            offsets: all[..ports].to_vec(),
        })
    }

    pub fn ports(&self) -> usize {
        self.offsets.len()
    }

    pub fn validate(&self, cfg: &GridConfig) -> Result<()> {
        if self.freq_spacing == 0 {
            return Err(Error::Config("pilot spacing must be positive".into()));
        }
        for offs in &self.offsets {
            if offs.len() != self.pilot_symbols.len() {
                return Err(Error::Config(
                    "one offset per pilot symbol is required".into(),
                ));
            }
            if offs.iter().any(|&o| o >= cfg.occupied_subcarriers) {
                return Err(Error::Config(
                    "pilot offset outside the occupied band".into(),
                ));
            }
        }
        if self
            .pilot_symbols
            .iter()
            .any(|&s| s >= cfg.symbols_per_slot)
        {
            return Err(Error::Config("pilot symbol outside the slot".into()));
        }
        // ports must not share a pilot cell
        for i in 0..self.pilot_symbols.len() {
            for a in 0..self.ports() {
                for b in (a + 1)..self.ports() {
                    if self.offsets[a][i] % self.freq_spacing
                        == self.offsets[b][i] % self.freq_spacing
                    {
                        return Err(Error::Config(format!(
                            "ports {a} and {b} collide on pilot symbol {}",
                            self.pilot_symbols[i]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Pilot subcarriers of one pilot symbol (by position in `pilot_symbols`).
    pub fn subcarriers(&self, port: usize, pilot_idx: usize, cfg: &GridConfig) -> Vec<usize> {
        (self.offsets[port][pilot_idx]..cfg.occupied_subcarriers)
            .step_by(self.freq_spacing)
            .collect()
    }
}

/// Reference-signal cells of `port`, sorted by (symbol, subcarrier).
///
/// The pattern repeats every slot, so `_slot_index` does not affect the result.
pub fn pilot_positions(
    _slot_index: usize,
    port: usize,
    pattern: &PilotPattern,
    cfg: &GridConfig,
) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..pattern.pilot_symbols.len()).collect();
    order.sort_by_key(|&i| pattern.pilot_symbols[i]);
    order
        .into_iter()
        .flat_map(|i| {
            let sym = pattern.pilot_symbols[i];
            pattern
                .subcarriers(port, i, cfg)
                .into_iter()
                .map(move |k| (sym, k))
        })
        .collect()
}

/// Cell kinds seen by `port`, indexed `k * symbols_per_slot + symbol`.
pub fn cell_kinds(port: usize, pattern: &PilotPattern, cfg: &GridConfig) -> Vec<CellKind> {
    let ns = cfg.symbols_per_slot;
    let mut kinds = vec![CellKind::Data; cfg.occupied_subcarriers * ns];
    for other in 0..pattern.ports() {
        let kind = if other == port {
            CellKind::Pilot
        } else {
            CellKind::Null
        };
        for (s, k) in pilot_positions(0, other, pattern, cfg) {
            kinds[k * ns + s] = kind;
        }
    }
    kinds
}

/// Data cells in fill order (subcarrier-major), as (symbol, subcarrier).
/// The set is the same for every port.
pub fn data_cells(pattern: &PilotPattern, cfg: &GridConfig) -> Vec<(usize, usize)> {
    let ns = cfg.symbols_per_slot;
    cell_kinds(0, pattern, cfg)
        .iter()
        .enumerate()
        .filter(|(_, &kind)| kind == CellKind::Data)
        .map(|(idx, _)| (idx % ns, idx / ns))
        .collect()
}

/// One slot of one antenna port. Storage is subcarrier-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    pub port: usize,
    n_subcarriers: usize,
    n_symbols: usize,
    cells: Vec<Complex64>,
    kinds: Vec<CellKind>,
}

impl ResourceGrid {
    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn get(&self, subcarrier: usize, symbol: usize) -> Complex64 {
        self.cells[subcarrier * self.n_symbols + symbol]
    }

    pub fn kind(&self, subcarrier: usize, symbol: usize) -> CellKind {
        self.kinds[subcarrier * self.n_symbols + symbol]
    }

    /// All occupied subcarriers of one OFDM symbol.
    pub fn symbol(&self, symbol: usize) -> Vec<Complex64> {
        (0..self.n_subcarriers)
            .map(|k| self.get(k, symbol))
            .collect()
    }

    pub fn count(&self, kind: CellKind) -> usize {
        self.kinds.iter().filter(|&&c| c == kind).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapCounts {
    pub data_used: usize,
    pub pilots_used: usize,
}

/// Fill one slot for `port`: pilots in `pilot_positions` order, exact zeros on
/// the other ports' pilot cells, data in subcarrier-major order.
pub fn map_grid(
    data_syms: &[Complex64],
    pilot_syms: &[Complex64],
    port: usize,
    pattern: &PilotPattern,
    cfg: &GridConfig,
) -> Result<(ResourceGrid, MapCounts)> {
    if port >= pattern.ports() {
        return Err(Error::Config(format!(
            "port {port} not in pilot pattern with {} ports",
            pattern.ports()
        )));
    }
    let ns = cfg.symbols_per_slot;
    let kinds = cell_kinds(port, pattern, cfg);
    let positions = pilot_positions(0, port, pattern, cfg);
    if pilot_syms.len() != positions.len() {
        return Err(Error::Mapping(format!(
            "pilot stream has {} symbols, grid has {} pilot cells",
            pilot_syms.len(),
            positions.len()
        )));
    }
    let n_data = kinds.iter().filter(|&&c| c == CellKind::Data).count();
    if data_syms.len() < n_data {
        return Err(Error::Mapping(format!(
            "data stream underflow: {} symbols for {} cells",
            data_syms.len(),
            n_data
        )));
    }

    let mut cells = vec![Complex64::new(0.0, 0.0); kinds.len()];
    for (&(s, k), &p) in positions.iter().zip(pilot_syms) {
        cells[k * ns + s] = p;
    }
    let mut data = data_syms.iter();
    for (cell, kind) in cells.iter_mut().zip(&kinds) {
        if *kind == CellKind::Data {
            *cell = *data.next().expect("length checked above");
        }
    }
    Ok((
        ResourceGrid {
            port,
            n_subcarriers: cfg.occupied_subcarriers,
            n_symbols: ns,
            cells,
            kinds,
        },
        MapCounts {
            data_used: n_data,
            pilots_used: positions.len(),
        },
    ))
}

/// Inverse of [`map_grid`]: returns the (data, pilot) streams.
pub fn demap_grid(
    grid: &ResourceGrid,
    pattern: &PilotPattern,
    cfg: &GridConfig,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let pilots = pilot_positions(0, grid.port, pattern, cfg)
        .into_iter()
        .map(|(s, k)| grid.get(k, s))
        .collect();
    let data = grid
        .cells
        .iter()
        .zip(&grid.kinds)
        .filter(|(_, &kind)| kind == CellKind::Data)
        .map(|(c, _)| *c)
        .collect();
    (data, pilots)
}

/// Unit-modulus QPSK reference symbols for (port, slot), known to the receiver.
pub fn pilot_sequence(port: usize, slot: usize, len: usize) -> Vec<Complex64> {
    let seed = 0x5253_0000_0000_0000u64 ^ ((port as u64) << 32) ^ slot as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = std::f64::consts::FRAC_1_SQRT_2;
    (0..len)
        .map(|_| {
            let re = if rng.random::<bool>() { a } else { -a };
            let im = if rng.random::<bool>() { a } else { -a };
            Complex64::new(re, im)
        })
        .collect()
}

/// Debug dump, one row per cell: `slot,symbol,subcarrier,kind,re,im`.
pub fn write_grid_csv<W: Write>(out: W, slot: usize, grids: &[&ResourceGrid]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slot", "symbol", "subcarrier", "kind", "re", "im"])?;
    for grid in grids {
        for s in 0..grid.n_symbols {
            for k in 0..grid.n_subcarriers {
                let v = grid.get(k, s);
                w.write_record([
                    slot.to_string(),
                    s.to_string(),
                    k.to_string(),
                    grid.kind(k, s).as_str().to_string(),
                    format!("{:.16e}", v.re),
                    format!("{:.16e}", v.im),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
