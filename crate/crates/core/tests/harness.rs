use std::process::Command;

use ltesim::channel::PowerDelayProfile;
use ltesim::estimation::EstimatorKind;
use ltesim::grid::GridConfig;
use ltesim::harness::{
    read_csv, write_csv, ExperimentConfig, Simulator, SnrConvention, SweepResult,
};
use ltesim::ofdm::GuardScheme;

fn small() -> ExperimentConfig {
    ExperimentConfig {
        grid: GridConfig::for_bandwidth_mhz(1.25).unwrap(),
        pdp: PowerDelayProfile::uniform(4).unwrap(),
        frames: 1,
        snr_db: vec![0.0, 10.0],
        ..Default::default()
    }
}

fn ls_pilot_mse(cfg: &ExperimentConfig, scheme: GuardScheme, snr_idx: usize) -> (f64, usize) {
    let sim = Simulator::new(cfg.clone()).unwrap();
    let (mut sq, mut n) = (0.0, 0);
    for t in sim.run_point(scheme, snr_idx).unwrap() {
        let o = t.get(EstimatorKind::Ls).unwrap();
        sq += o.sq_err_pilot;
        n += o.pilot_cells;
    }
    (sq / n as f64, n)
}

#[test]
fn one_frame_is_ten_trials() {
    let cfg = ExperimentConfig {
        schemes: vec![GuardScheme::Zp],
        estimators: vec![EstimatorKind::Lmmse],
        snr_db: vec![15.0],
        ..small()
    };
    let res = ltesim::harness::sweep(&cfg).unwrap();
    assert_eq!(res.records.len(), 1);
    assert_eq!(res.records[0].trials, 10);
    let full = ltesim::harness::sweep(&small()).unwrap();
    assert_eq!(full.records.len(), 2 * 3 * 2);
    for r in &full.records {
        assert!((0.0..=1.0).contains(&r.ber) && r.mse_pilot >= 0.0 && r.bit_count > 0);
    }
}

#[test]
fn raw_convention_sets_per_bin_snr() {
    // 0 dB: LS pilot error equals the per-bin noise power
    let cfg = ExperimentConfig {
        frames: 60,
        ..small()
    };
    let (mse, n) = ls_pilot_mse(&cfg, GuardScheme::Cp, 0);
    assert!(n >= 100_000, "{n}");
    assert!((mse - 1.0).abs() < 0.03, "{mse}");

    let en = ExperimentConfig {
        snr_convention: SnrConvention::EnergyNormalized,
        ..cfg.clone()
    };
    let (mse_en, _) = ls_pilot_mse(&en, GuardScheme::Cp, 0);
    let expected = (128.0 + 4.0) / 128.0;
    assert!(
        (mse_en / mse / expected - 1.0).abs() < 0.03,
        "{}",
        mse_en / mse
    );
    assert_eq!(
        en.effective_noise_variance(GuardScheme::Cp, 7.0)
            / cfg.effective_noise_variance(GuardScheme::Cp, 7.0),
        expected
    );
}

#[test]
fn zp_pays_the_fold_penalty() {
    let cfg = ExperimentConfig {
        frames: 10,
        ..small()
    };
    let (cp, _) = ls_pilot_mse(&cfg, GuardScheme::Cp, 1);
    let (zp, _) = ls_pilot_mse(&cfg, GuardScheme::Zp, 1);
    assert!(
        (zp / cp / (132.0 / 128.0) - 1.0).abs() < 0.03,
        "{}",
        zp / cp
    );
}

#[test]
fn aggregation_order_is_irrelevant() {
    let sim = Simulator::new(small()).unwrap();
    let trials = sim.run_point(GuardScheme::Cp, 0).unwrap();
    let fwd: f64 = trials.iter().map(|t| t.estimators[1].mse_grid()).sum();
    let rev: f64 = trials
        .iter()
        .rev()
        .map(|t| t.estimators[1].mse_grid())
        .sum();
    assert!((fwd - rev).abs() <= 1e-12 * fwd);
}

#[test]
fn csv_line_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    write_csv(&SweepResult::default(), &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
    assert!(read_csv(&path).unwrap().records.is_empty());

    let cfg = ExperimentConfig {
        schemes: vec![GuardScheme::Cp],
        estimators: vec![EstimatorKind::Ls],
        snr_db: vec![5.0],
        ..small()
    };
    let res = ltesim::harness::sweep(&cfg).unwrap();
    write_csv(&res, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
    assert_eq!(read_csv(&path).unwrap(), res);
}

fn ltesim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ltesim"))
}

#[test]
fn cli_simulate_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        "# tiny run\nbandwidth = 1.25\ntaps = 4\nframes = 5\nsnr-db = 0,10\nschemes = cp\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = ltesim()
        .args(["simulate", "--config"])
        .arg(&conf)
        .args(["--frames", "1", "--estimators", "ls,lrlmmse", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success());
    let res = read_csv(&out.join("sweep.csv")).unwrap();
    assert_eq!(res.records.len(), 4);
    assert!(res.records.iter().all(|r| r.trials == 10));
    let run = std::fs::read_to_string(out.join("run.txt")).unwrap();
    assert!(run.contains("frames = 1\n") && run.contains("taps = 4\n"));
    for f in ["ber.svg", "mse.svg"] {
        std::fs::remove_file(out.join(f)).unwrap();
    }

    let status = ltesim()
        .arg("plot")
        .arg(out.join("sweep.csv"))
        .output()
        .unwrap();
    assert!(status.status.success());
    assert!(out.join("ber.svg").exists() && out.join("mse.svg").exists());
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| {
        ltesim()
            .args(args)
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap()
            .status
            .code()
    };
    // 8 taps do not fit the 4-sample guard at 1.25 MHz
    assert_eq!(code(&["simulate", "--bandwidth", "1.25"]), Some(2));
    assert_eq!(code(&["simulate", "--bandwidth", "7"]), Some(2));
    assert_eq!(code(&["simulate", "--schemes", "xp"]), Some(2));
    assert_eq!(code(&["simulate", "--snr-db", "10,5"]), Some(2));
    let missing = ltesim()
        .args(["plot", "/nonexistent/sweep.csv"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(3));
}
