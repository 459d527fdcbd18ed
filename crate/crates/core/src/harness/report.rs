//! Sweep CSV output and SVG plots.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::{SweepRecord, SweepResult};
use crate::error::{Error, Result};

/// Zero BER is drawn at this level on the log axis.
pub const BER_PLOT_FLOOR: f64 = 1e-7;

const HEADER: [&str; 8] = [
    "scheme",
    "estimator",
    "snr_db",
    "mse_pilot",
    "mse_grid",
    "ber",
    "trials",
    "bit_count",
];

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write one row per (scheme, estimator, snr), sorted.
pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut sorted = result.clone();
    sorted.sort();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for r in &sorted.records {
        w.write_record([
            r.scheme.label().to_string(),
            r.estimator.label().to_string(),
            fmt_f64(r.snr_db),
            fmt_f64(r.mse_pilot),
            fmt_f64(r.mse_grid),
            fmt_f64(r.ber),
            r.trials.to_string(),
            r.bit_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<SweepResult> {
    let mut rd = csv::Reader::from_path(path)?;
    let headers = rd.headers()?.clone();
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Config(format!(
            "{}: unexpected CSV header '{}'",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let bad =
            |field: &str| Error::Config(format!("{}: row {}: bad {field}", path.display(), i + 1));
        let f = |idx: usize, name: &str| -> Result<f64> {
            row[idx].trim().parse().map_err(|_| bad(name))
        };
        records.push(SweepRecord {
            scheme: row[0].parse()?,
            estimator: row[1].parse()?,
            snr_db: f(2, "snr_db")?,
            mse_pilot: f(3, "mse_pilot")?,
            mse_grid: f(4, "mse_grid")?,
            ber: f(5, "ber")?,
            trials: row[6].trim().parse().map_err(|_| bad("trials"))?,
            bit_count: row[7].trim().parse().map_err(|_| bad("bit_count"))?,
        });
    }
    Ok(SweepResult { records })
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn log_plot(path: &Path, caption: &str, y_label: &str, series: &[Series]) -> Result<()> {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 1e-3, 1.0);
    }
    if x0 == x1 {
        x1 = x0 + 1.0;
    }
    let y_lo = 10f64.powf(y0.log10().floor());
    let y_hi = 10f64.powf(y1.log10().ceil()).max(y_lo * 10.0);

    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(caption, ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(45)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, (y_lo..y_hi).log_scale())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("SNR (dB)")
        .y_desc(y_label)
        .y_label_formatter(&|v| format!("{v:.0e}"))
        .draw()
        .map_err(plot_err)?;
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(
                s.points.iter().copied(),
                color.stroke_width(2),
            ))
            .map_err(plot_err)?
            .label(s.label.as_str())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
            });
        chart
            .draw_series(s.points.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .position(SeriesLabelPosition::UpperRight)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Write `ber.svg` and `mse.svg` into `dir`; one line per (scheme, estimator).
pub fn emit_plots(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut clamped = false;
    let mut ber = Vec::new();
    let mut mse = Vec::new();
    for (scheme, est) in result.series_keys() {
        let label = format!("{}-{}", scheme.label(), est.label());
        let recs: Vec<_> = result
            .series(scheme, est)
            .into_iter()
            .filter(|r| r.snr_db.is_finite())
            .collect();
        ber.push(Series {
            label: label.clone(),
            points: recs
                .iter()
                .map(|r| {
                    if r.ber < BER_PLOT_FLOOR {
                        clamped = true;
                    }
                    (r.snr_db, r.ber.max(BER_PLOT_FLOOR))
                })
                .collect(),
        });
        mse.push(Series {
            label,
            points: recs
                .iter()
                .filter(|r| r.mse_grid > 0.0)
                .map(|r| (r.snr_db, r.mse_grid))
                .collect(),
        });
    }
    let ber_caption = if clamped {
        format!("BER vs SNR (zero BER drawn at {BER_PLOT_FLOOR:.0e})")
    } else {
        "BER vs SNR".to_string()
    };
    let ber_path = dir.join("ber.svg");
    let mse_path = dir.join("mse.svg");
    log_plot(&ber_path, &ber_caption, "BER", &ber)?;
    log_plot(&mse_path, "Channel estimate MSE vs SNR", "MSE", &mse)?;
    Ok(vec![ber_path, mse_path])
}
