//! CSV tables, SVG plots and JSON documents for a scenario run.
//!
//! Table schemas:
//!
//! | file | columns |
//! |------|---------|
//! | `trajectory.csv` | `t`, one column per state component |
//! | `delay_sweep.csv` | `delays, rank, hankel_rank, max_error, mean_error` |
//! | `window_sweep.csv` | `train_periods, samples, rank, max_error, mean_error` |
//! | `prediction_error.csv` | `t, epsilon` |
//! | `prediction_period_means.csv` | `period, mean_epsilon` |
//! | `modes.csv` | `re_lambda, im_lambda, modulus, frequency, growth_rate, period, amplitude, real_mode` |
//! | `spectrum_<c>.csv` | `frequency, truth, reconstruction` |
//! | `crossings.csv` | `plane, time, x, y, z, vx, vy, vz, direction` |

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::plot::{Plot, Series};
use super::{DelaySweepRow, ExperimentConfig, ExperimentReport, PredictionResult, ScenarioData, WindowSweepRow};
use crate::dmd::DmdModel;
use crate::error::Result;
use crate::spectral::{self, csv_err, fmt, SpectralSummary};
use crate::validation;

fn create(dir: &Path, name: &str, written: &mut Vec<String>) -> Result<BufWriter<File>> {
    written.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Serialize rows with a header taken from the field names.
pub fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Samples of the scenario data with their epochs.
pub fn write_trajectory_csv<W: Write>(w: W, data: &ScenarioData, count: usize) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((0..data.state_dim()).map(|r| data.label(r)));
    out.write_record(&header).map_err(csv_err)?;
    for c in 0..count.min(data.len()) {
        let mut row = vec![fmt(c as f64 * data.dt)];
        row.extend((0..data.state_dim()).map(|r| fmt(data.data[(r, c)])));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_prediction_csv<W: Write>(w: W, p: &PredictionResult) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "epsilon"]).map_err(csv_err)?;
    for (i, e) in p.errors.per_sample.iter().enumerate() {
        out.write_record([fmt((p.start + i) as f64 * p.dt), fmt(*e)]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_period_means_csv<W: Write>(w: W, p: &PredictionResult) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["period", "mean_epsilon"]).map_err(csv_err)?;
    for (i, e) in p.period_means.iter().enumerate() {
        out.write_record([(i + 1).to_string(), fmt(*e)]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn delay_sweep_plot(rows: &[DelaySweepRow]) -> (Plot, Plot) {
    let err = Plot::new("Training error vs delays", "delays l", "max epsilon")
        .log_y()
        .with(Series::line("max", rows.iter().map(|r| (r.delays as f64, r.max_error)).collect()))
        .with(Series::line("mean", rows.iter().map(|r| (r.delays as f64, r.mean_error)).collect()));
    let rank = Plot::new("Reduced rank vs delays", "delays l", "rank")
        .with(Series::line("rank", rows.iter().map(|r| (r.delays as f64, r.rank as f64)).collect()));
    (err, rank)
}

pub fn window_sweep_plot(rows: &[WindowSweepRow]) -> Plot {
    Plot::new("Training error vs window", "training periods", "epsilon")
        .log_y()
        .with(Series::line("max", rows.iter().map(|r| (r.train_periods as f64, r.max_error)).collect()))
        .with(Series::line("mean", rows.iter().map(|r| (r.train_periods as f64, r.mean_error)).collect()))
}

pub fn prediction_plot(p: &PredictionResult, period: f64) -> Plot {
    let pts = p
        .errors
        .per_sample
        .iter()
        .enumerate()
        .map(|(i, &e)| ((p.start + i) as f64 * p.dt / period, e))
        .collect();
    Plot::new("Prediction error", "time (periods)", "epsilon").log_y().with(Series::line("epsilon", pts))
}

pub fn eigenvalue_plot(model: &DmdModel) -> Plot {
    let mut p = Plot::new("DMD eigenvalues", "Re", "Im")
        .with(Series::markers("eigenvalues", model.eigenvalues.iter().map(|l| (l.re, l.im)).collect()));
    p.unit_circle = true;
    p
}

pub fn spectrum_plot(name: &str, truth: &spectral::Spectrum, rec: &spectral::Spectrum) -> Plot {
    let pts = |s: &spectral::Spectrum| s.frequencies.iter().copied().zip(s.amplitudes.iter().copied()).collect();
    Plot::new(&format!("FFT of {name}"), "frequency (1/TU)", "amplitude")
        .log_y()
        .with(Series::line("data", pts(truth)))
        .with(Series::line("DMD", pts(rec)))
}

fn projection_plots(data: &ScenarioData, model: &DmdModel, count: usize) -> Result<Vec<(String, Plot)>> {
    let times: Vec<f64> = (0..count).map(|k| k as f64 * data.dt).collect();
    let est = model.reconstruct_matrix(&times)?;
    let mut out = Vec::new();
    for (a, b) in [(0usize, 1usize), (1, 2), (0, 2)] {
        let name = format!("{}{}", data.label(a), data.label(b));
        let truth = (0..count).map(|c| (data.data[(a, c)], data.data[(b, c)])).collect();
        let pred = (0..count).map(|c| (est[(a, c)], est[(b, c)])).collect();
        let p = Plot::new(&format!("{}-{} projection", data.label(a), data.label(b)), &data.label(a), &data.label(b))
            .with(Series::line("data", truth))
            .with(Series::markers("DMD", pred));
        out.push((name, p));
    }
    Ok(out)
}

fn write_svg(dir: &Path, name: &str, plot: &Plot, written: &mut Vec<String>) -> Result<()> {
    let mut f = create(dir, name, written)?;
    f.write_all(plot.to_svg().as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn write_modes(dir: &Path, summary: &SpectralSummary, written: &mut Vec<String>) -> Result<()> {
    summary.write_csv(create(dir, "modes.csv", written)?)
}

/// Write every artifact of a run; returns the file names written.
pub fn write_all(
    dir: &Path,
    config: &ExperimentConfig,
    data: &ScenarioData,
    model: &DmdModel,
    report: &ExperimentReport,
) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut w = Vec::new();
    create(dir, "config.json", &mut w)?.write_all(config.to_json()?.as_bytes())?;
    create(dir, "model.json", &mut w)?.write_all(model.to_json()?.as_bytes())?;
    let train = data.window_samples(config.train_periods);
    let horizon = data.window_samples(config.train_periods + config.predict_periods).min(data.len());
    write_trajectory_csv(create(dir, "trajectory.csv", &mut w)?, data, horizon)?;
    write_rows(create(dir, "delay_sweep.csv", &mut w)?, &report.delay_sweep)?;
    write_rows(create(dir, "window_sweep.csv", &mut w)?, &report.window_sweep)?;
    write_prediction_csv(create(dir, "prediction_error.csv", &mut w)?, &report.prediction)?;
    write_period_means_csv(create(dir, "prediction_period_means.csv", &mut w)?, &report.prediction)?;
    write_modes(dir, &report.spectrum, &mut w)?;
    for s in &report.spectra {
        spectral::write_spectra_csv(
            create(dir, &format!("spectrum_{}.csv", s.component), &mut w)?,
            &[("truth", &s.truth), ("reconstruction", &s.reconstruction)],
        )?;
        write_svg(dir, &format!("spectrum_{}.svg", s.component), &spectrum_plot(&s.component, &s.truth, &s.reconstruction), &mut w)?;
    }
    if let Some(c) = &report.crossings {
        validation::write_crossings_csv(create(dir, "crossings.csv", &mut w)?, &c.events)?;
    }
    let (err, rank) = delay_sweep_plot(&report.delay_sweep);
    write_svg(dir, "delay_sweep.svg", &err, &mut w)?;
    write_svg(dir, "rank_vs_delay.svg", &rank, &mut w)?;
    write_svg(dir, "window_sweep.svg", &window_sweep_plot(&report.window_sweep), &mut w)?;
    write_svg(dir, "prediction_error.svg", &prediction_plot(&report.prediction, data.reference_period), &mut w)?;
    write_svg(dir, "eigenvalues.svg", &eigenvalue_plot(model), &mut w)?;
    if data.state_dim() == 6 {
        for (name, p) in projection_plots(data, model, train)? {
            write_svg(dir, &format!("projection_{name}.svg"), &p, &mut w)?;
        }
    }
    w.push("report.json".to_string());
    let mut full = report.clone();
    full.outputs = w.clone();
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&full)?)?;
    Ok(w)
}
