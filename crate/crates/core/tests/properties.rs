use num_complex::Complex64;
use proptest::prelude::*;

use ltesim::channel::linear_convolve;
use ltesim::estimation::{
    build_correlation, lmmse_estimate, lr_lmmse_estimate, EstimatorConfig, EstimatorKind,
};
use ltesim::grid::{
    demap_grid, map_grid, pilot_positions, subcarrier_to_bin, Bandwidth, GridConfig, PilotPattern,
};
use ltesim::harness::mix_seed;
use ltesim::mimo_link::{demap_symbols, map_bits, zf_detect, Constellation};
use ltesim::ofdm::{
    add_guard, ofdm_demodulate, ofdm_modulate, strip_guard, GuardConfig, GuardScheme,
};

fn c64() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn cvec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(c64(), len)
}

fn bandwidth() -> impl Strategy<Value = Bandwidth> {
    prop::sample::select(Bandwidth::ALL.to_vec())
}

fn circular(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|m| {
            h.iter()
                .enumerate()
                .map(|(j, hj)| hj * x[(m + n - j) % n])
                .sum()
        })
        .collect()
}

fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn map_demap_round_trip(bw in bandwidth(), ports in 1usize..=2, seed in any::<u64>()) {
        let cfg = GridConfig::for_bandwidth_mhz(bw.mhz()).unwrap();
        let pattern = PilotPattern::lte_default(ports).unwrap();
        let mut state = seed;
        let mut next = || {
            state = mix_seed(&[state]);
            Complex64::new((state >> 11) as f64 / (1u64 << 53) as f64, (state & 0xFFFF) as f64)
        };
        for port in 0..ports {
            let n_pilots = pilot_positions(0, port, &pattern, &cfg).len();
            prop_assert_eq!(n_pilots, 2 * cfg.occupied_subcarriers.div_ceil(6));
            let pilots: Vec<_> = (0..n_pilots).map(|_| next()).collect();
            let n_data = cfg.occupied_subcarriers * cfg.symbols_per_slot - ports * n_pilots;
            let data: Vec<_> = (0..n_data).map(|_| next()).collect();
            let (grid, counts) = map_grid(&data, &pilots, port, &pattern, &cfg).unwrap();
            prop_assert_eq!(counts.data_used, n_data);
            let (d, p) = demap_grid(&grid, &pattern, &cfg);
            prop_assert_eq!(d, data);
            prop_assert_eq!(p, pilots);
        }
    }

    #[test]
    fn bins_are_injective_and_skip_dc(bw in bandwidth()) {
        let cfg = GridConfig::for_bandwidth_mhz(bw.mhz()).unwrap();
        let mut seen = vec![false; cfg.fft_size];
        for k in 0..cfg.occupied_subcarriers {
            let b = subcarrier_to_bin(k, &cfg).unwrap();
            prop_assert!(b != 0 && b < cfg.fft_size);
            prop_assert!(!seen[b]);
            seen[b] = true;
        }
        prop_assert!(subcarrier_to_bin(cfg.occupied_subcarriers, &cfg).is_err());
    }

    #[test]
    fn dft_is_unitary(x in cvec(64)) {
        let y = ofdm_modulate(&x).unwrap();
        let e_x: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let e_y: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((e_x - e_y).abs() < 1e-10 * e_x.max(1.0));
        prop_assert!(max_err(&ofdm_demodulate(&y).unwrap(), &x) < 1e-12);
    }

    #[test]
    fn guard_removal_gives_circular_convolution(
        x in cvec(64),
        h in prop::collection::vec(c64(), 1..=9),
        zp in any::<bool>(),
    ) {
        let scheme = if zp { GuardScheme::Zp } else { GuardScheme::Cp };
        let guard = GuardConfig::new(scheme, 8);
        let mut rx = linear_convolve(&add_guard(&x, guard).unwrap(), &h);
        rx.truncate(72);
        let y = strip_guard(&rx, 64, guard).unwrap();
        prop_assert!(max_err(&y, &circular(&x, &h)) < 1e-12);
    }

    #[test]
    fn zf_inverts_well_conditioned_channels(
        h in cvec(4),
        bits in prop::collection::vec(0u8..=1, 4),
    ) {
        // diagonal loading keeps the 2x2 matrix away from singular
        let mut h = h;
        h[0] += Complex64::new(2.0, 0.0);
        h[3] += Complex64::new(2.0, 0.0);
        let x = map_bits(Constellation::Qpsk, &bits).unwrap();
        let y: Vec<Complex64> = (0..2).map(|r| h[2 * r] * x[0] + h[2 * r + 1] * x[1]).collect();
        let est = zf_detect(&y, &h, 2).unwrap().unwrap();
        prop_assert!(max_err(&est, &x) < 1e-10);
        prop_assert_eq!(demap_symbols(Constellation::Qpsk, &est), bits);
    }

    #[test]
    fn qam16_round_trip(bits in prop::collection::vec(0u8..=1, 4..=64)) {
        let bits = &bits[..bits.len() / 4 * 4];
        let syms = map_bits(Constellation::Qam16, bits).unwrap();
        let energy = syms.iter().map(|s| s.norm_sqr()).sum::<f64>() / syms.len() as f64;
        prop_assert!(energy > 0.1 && energy < 1.9);
        prop_assert_eq!(demap_symbols(Constellation::Qam16, &syms), bits.to_vec());
    }

    #[test]
    fn full_rank_lowrank_matches_lmmse(h in cvec(12), snr_db in -5.0f64..30.0, taps in 1usize..=8) {
        let bins: Vec<usize> = (0..12).map(|i| (i * 6 + 3) % 128).collect();
        let model = build_correlation(&bins, taps, 128).unwrap();
        let snr = 10f64.powf(snr_db / 10.0);
        let full = EstimatorConfig::new(EstimatorKind::Lmmse, 1.0, snr, 12).unwrap();
        let lr = EstimatorConfig::new(EstimatorKind::LrLmmse, 1.0, snr, 12).unwrap();
        let a = lmmse_estimate(&h, &model, &full).unwrap();
        let b = lr_lmmse_estimate(&h, &model, &lr).unwrap();
        let scale = a.iter().map(|v| v.norm()).fold(1e-12, f64::max);
        prop_assert!(max_err(&a, &b) < 1e-9 * scale.max(1.0));
        // shrinkage never amplifies
        let na: f64 = a.iter().map(|v| v.norm_sqr()).sum();
        let nh: f64 = h.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!(na <= nh * (1.0 + 1e-9));
    }
}
