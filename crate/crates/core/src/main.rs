use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ltesim::harness::{
    emit_plots, parse_settings, read_csv, write_csv, ExperimentSettings, Simulator,
};
use ltesim::{Error, Result};

#[derive(Parser)]
#[command(name = "ltesim", version, about = "LTE downlink OFDM link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an SNR sweep and write sweep.csv, ber.svg and mse.svg.
    Simulate(SimulateArgs),
    /// Redraw the plots from an existing sweep CSV.
    Plot {
        csv: PathBuf,
        /// Output directory (defaults to the CSV's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Settings file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Channel bandwidth in MHz (1.25, 2.5, 5, 10, 15, 20).
    #[arg(long)]
    bandwidth: Option<String>,
    /// Guard schemes, e.g. `cp,zp`.
    #[arg(long)]
    schemes: Option<String>,
    /// Estimators, e.g. `ls,lmmse,lrlmmse`.
    #[arg(long)]
    estimators: Option<String>,
    /// `start:step:stop` or a comma list; `inf` is noiseless.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    #[arg(long)]
    frames: Option<usize>,
    /// Use 100 frames per SNR point.
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    taps: Option<usize>,
    /// Low-rank estimator order (default: taps).
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `raw` or `energy-normalized`.
    #[arg(long)]
    snr_convention: Option<String>,
    /// `qpsk` or `16qam`.
    #[arg(long)]
    constellation: Option<String>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SimulateArgs {
    fn settings(&self) -> Result<ExperimentSettings> {
        let mut s = match &self.config {
            Some(path) => parse_settings(
                &std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?,
            )?,
            None => ExperimentSettings::default(),
        };
        let mut flags = ExperimentSettings::default();
        let pairs: [(&str, Option<String>); 12] = [
            ("bandwidth", self.bandwidth.clone()),
            ("schemes", self.schemes.clone()),
            ("estimators", self.estimators.clone()),
            ("snr-db", self.snr_db.clone()),
            ("frames", self.frames.map(|v| v.to_string())),
            ("full-scale", self.full_scale.then(|| "true".to_string())),
            ("taps", self.taps.map(|v| v.to_string())),
            ("rank", self.rank.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("snr-convention", self.snr_convention.clone()),
            ("constellation", self.constellation.clone()),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                flags.set(key, &v)?;
            }
        }
        // an explicit --frames beats a full-scale setting from the file
        if self.full_scale && self.frames.is_none() && s.get("frames").is_some() {
            s.set("frames", "100")?;
        }
        s.merge(&flags);
        Ok(s)
    }
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let settings = args.settings()?;
    let cfg = settings.to_config()?;
    let out = settings
        .output_dir()
        .unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&out)?;

    let sim = Simulator::new(cfg.clone())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    eprintln!(
        "{} MHz, {} schemes x {} estimators x {} SNR points, {} trials per point ({})",
        cfg.grid.bandwidth,
        cfg.schemes.len(),
        cfg.estimators.len(),
        cfg.snr_db.len(),
        cfg.trials_per_point(),
        cfg.snr_convention
    );
    let start = Instant::now();
    let result = pool.install(|| sim.sweep())?;
    eprintln!("sweep finished in {:.1} s", start.elapsed().as_secs_f64());

    let csv_path = out.join("sweep.csv");
    write_csv(&result, &csv_path)?;
    let plots = emit_plots(&result, &out)?;
    let mut record = ExperimentSettings::from_config(&cfg).to_text();
    record.push_str(&format!(
        "# trials per point = {}\n",
        cfg.trials_per_point()
    ));
    std::fs::write(out.join("run.txt"), record)?;

    println!("{}", csv_path.display());
    for p in plots {
        println!("{}", p.display());
    }
    Ok(())
}

fn plot(csv: &Path, out: Option<&Path>) -> Result<()> {
    let result = read_csv(csv)?;
    if result.records.is_empty() {
        return Err(Error::Config(format!("{} has no records", csv.display())));
    }
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => csv.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    for p in emit_plots(&result, &dir)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Plot { csv, out } => plot(csv, out.as_deref()),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
