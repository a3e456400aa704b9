//! Mode frequencies, fundamental period and stability from a fitted model,
//! and FFT spectra of sampled data.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cr3bp::Trajectory;
use crate::dmd::{eigen_power, DmdModel};
use crate::error::{Error, Result};

/// Modes with `|Im ln λ|` below this are treated as real.
pub const DEFAULT_FREQ_TOL: f64 = 1e-8;
/// Allowed excess of `|λ|` over one for a stable verdict.
pub const DEFAULT_STAB_TOL: f64 = 1e-6;
/// Modes weaker than this fraction of the strongest are ignored when picking
/// the fundamental frequency.
pub const AMPLITUDE_FLOOR: f64 = 1e-6;

/// One real mode or one conjugate pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    /// Index of the eigenvalue in the model (the member with `Im >= 0`).
    pub index: usize,
    pub eigenvalue: Complex64,
    /// Angular frequency (rad/TU).
    pub frequency: f64,
    /// Growth rate (1/TU).
    pub growth_rate: f64,
    /// `2π / frequency`; absent for real modes.
    pub period: Option<f64>,
    /// `|b| ‖z‖` of a single member of the pair.
    pub amplitude_norm: f64,
    pub is_real: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub modes: Vec<ModeRecord>,
    pub fundamental_period: Option<f64>,
    pub fundamental_frequency: Option<f64>,
    pub stable: bool,
    /// Number of conjugate frequency pairs.
    pub dominant_count: usize,
    pub real_count: usize,
    pub max_modulus: f64,
}

impl SpectralSummary {
    /// Fundamental period, or an error when the model has no oscillatory mode.
    pub fn period(&self) -> Result<f64> {
        self.fundamental_period.ok_or(Error::NoOscillatoryMode)
    }

    /// Write the mode table as CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "re_lambda",
            "im_lambda",
            "modulus",
            "frequency",
            "growth_rate",
            "period",
            "amplitude",
            "real_mode",
        ])
        .map_err(csv_err)?;
        for m in &self.modes {
            out.write_record([
                fmt(m.eigenvalue.re),
                fmt(m.eigenvalue.im),
                fmt(m.eigenvalue.norm()),
                fmt(m.frequency),
                fmt(m.growth_rate),
                m.period.map(fmt).unwrap_or_default(),
                fmt(m.amplitude_norm),
                m.is_real.to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn column_norm(model: &DmdModel, j: usize) -> f64 {
    (0..model.modes.nrows()).map(|i| model.modes[(i, j)].norm_sqr()).sum::<f64>().sqrt()
}

/// Collapse conjugate pairs into mode records and derive period and stability.
///
/// Eigenvalues with `Im ln λ < -freq_tol` are taken to be the conjugate
/// partners of retained records and are skipped.
pub fn summarize(model: &DmdModel, freq_tol: f64, stab_tol: f64) -> Result<SpectralSummary> {
    let mut modes = Vec::new();
    for (j, &l) in model.eigenvalues.iter().enumerate() {
        let ln = l.ln();
        if ln.im < -freq_tol {
            continue;
        }
        let is_real = ln.im.abs() < freq_tol;
        let frequency = ln.im.abs() / model.dt;
        modes.push(ModeRecord {
            index: j,
            eigenvalue: l,
            frequency,
            growth_rate: ln.re / model.dt,
            period: if is_real { None } else { Some(2.0 * PI / frequency) },
            amplitude_norm: model.amplitudes[j].norm() * column_norm(model, j),
            is_real,
        });
    }
    modes.sort_by(|a, b| a.frequency.total_cmp(&b.frequency).then(a.index.cmp(&b.index)));
    let max_amp = modes.iter().map(|m| m.amplitude_norm).fold(0.0, f64::max);
    let fundamental = modes
        .iter()
        .filter(|m| !m.is_real && m.amplitude_norm >= AMPLITUDE_FLOOR * max_amp)
        .map(|m| m.frequency)
        .fold(None, |acc: Option<f64>, f| Some(acc.map_or(f, |a| a.min(f))));
    let max_modulus = model.eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let dominant_count = modes.iter().filter(|m| !m.is_real).count();
    Ok(SpectralSummary {
        real_count: modes.len() - dominant_count,
        dominant_count,
        fundamental_frequency: fundamental,
        fundamental_period: fundamental.map(|f| 2.0 * PI / f),
        stable: max_modulus <= 1.0 + stab_tol,
        max_modulus,
        modes,
    })
}

/// Base-state prediction rebuilt from collapsed records: real modes once,
/// pairs as twice the real part of one member.
pub fn collapsed_prediction(model: &DmdModel, summary: &SpectralSummary, t: f64) -> Vec<f64> {
    let p = t / model.dt;
    let mut out = vec![0.0; model.state_dim];
    for m in &summary.modes {
        let c = eigen_power(model.eigenvalues[m.index], p) * model.amplitudes[m.index];
        let w = if m.is_real { 1.0 } else { 2.0 };
        for (i, o) in out.iter_mut().enumerate() {
            *o += w * (model.modes[(i, m.index)] * c).re;
        }
    }
    out
}

/// One-sided amplitude spectrum on a uniform frequency grid (cycles/TU).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Grid spacing `1 / (N dt)`.
    pub resolution: f64,
}

impl Spectrum {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_spectra_csv(w, &[("amplitude", self)])
    }

    /// Indices of the `k` largest local maxima (endpoints count when they
    /// exceed their single neighbour), strongest first.
    pub fn peaks(&self, k: usize) -> Vec<usize> {
        let a = &self.amplitudes;
        let n = a.len();
        let mut idx: Vec<usize> = (0..n)
            .filter(|&i| {
                let left = i == 0 || a[i] > a[i - 1];
                let right = i + 1 == n || a[i] >= a[i + 1];
                left && right && a[i] > 0.0
            })
            .collect();
        idx.sort_by(|&i, &j| a[j].total_cmp(&a[i]).then(i.cmp(&j)));
        idx.truncate(k);
        idx
    }
}

/// Several spectra on one grid as CSV columns.
pub fn write_spectra_csv<W: Write>(w: W, columns: &[(&str, &Spectrum)]) -> Result<()> {
    let Some((_, first)) = columns.first() else {
        return Ok(());
    };
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["frequency".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    out.write_record(&header).map_err(csv_err)?;
    for i in 0..first.frequencies.len() {
        let mut row = vec![fmt(first.frequencies[i])];
        row.extend(columns.iter().map(|(_, s)| fmt(s.amplitudes.get(i).copied().unwrap_or(f64::NAN))));
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// One-sided amplitude spectrum of a real signal sampled every `dt`.
///
/// With `pad_to = Some(n)` the signal is zero-padded to `n` points.
pub fn fft_signal(signal: &[f64], dt: f64, pad_to: Option<usize>) -> Result<Spectrum> {
    let n0 = signal.len();
    if n0 < 2 {
        return Err(Error::SignalTooShort(n0));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {dt}")));
    }
    let n = pad_to.unwrap_or(n0).max(n0);
    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let resolution = 1.0 / (n as f64 * dt);
    let mut freqs = Vec::with_capacity(half + 1);
    let mut amps = Vec::with_capacity(half + 1);
    for (k, z) in buf.iter().enumerate().take(half + 1) {
        let scale = if k == 0 || (n % 2 == 0 && k == half) { 1.0 } else { 2.0 };
        freqs.push(k as f64 * resolution);
        amps.push(scale * z.norm() / n0 as f64);
    }
    Ok(Spectrum { frequencies: freqs, amplitudes: amps, resolution })
}

/// Spectrum of one state component (`0..6` in `x, y, z, vx, vy, vz` order).
pub fn fft_spectrum(traj: &Trajectory, component: usize, pad_to: Option<usize>) -> Result<Spectrum> {
    if component >= 6 {
        return Err(Error::InvalidArgument(format!("component index {component} out of range")));
    }
    fft_signal(&traj.component(component), traj.dt, pad_to)
}

/// Greedy pairing of the top peaks of two spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMatch {
    pub peaks_a: Vec<f64>,
    pub peaks_b: Vec<f64>,
    /// `(frequency in a, frequency in b)` pairs.
    pub pairs: Vec<(f64, f64)>,
    pub max_discrepancy: f64,
    /// Largest discrepancy in units of the grid resolution.
    pub max_discrepancy_bins: f64,
    pub unmatched_a: Vec<f64>,
    pub unmatched_b: Vec<f64>,
}

/// Pair the `peak_count` strongest peaks of each spectrum, closest pairs first.
pub fn compare_spectra(a: &Spectrum, b: &Spectrum, peak_count: usize) -> Result<SpectrumMatch> {
    let same_grid = a.frequencies.len() == b.frequencies.len()
        && (a.resolution - b.resolution).abs() <= 1e-12 * a.resolution.abs().max(b.resolution.abs());
    if !same_grid {
        return Err(Error::GridMismatch(format!(
            "{} bins at {:e} vs {} bins at {:e}",
            a.frequencies.len(),
            a.resolution,
            b.frequencies.len(),
            b.resolution
        )));
    }
    let pa = a.peaks(peak_count);
    let pb = b.peaks(peak_count);
    let mut cand: Vec<(usize, usize, usize)> = Vec::new();
    for (i, &ia) in pa.iter().enumerate() {
        for (j, &jb) in pb.iter().enumerate() {
            cand.push((ia.abs_diff(jb), i, j));
        }
    }
    cand.sort();
    let mut used_a = vec![false; pa.len()];
    let mut used_b = vec![false; pb.len()];
    let mut pairs = Vec::new();
    let mut worst_bins = 0usize;
    for (d, i, j) in cand {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        worst_bins = worst_bins.max(d);
        pairs.push((a.frequencies[pa[i]], b.frequencies[pb[j]]));
    }
    let freq = |s: &Spectrum, idx: &[usize], used: &[bool], want: bool| -> Vec<f64> {
        idx.iter().zip(used).filter(|(_, &u)| u == want).map(|(&k, _)| s.frequencies[k]).collect()
    };
    Ok(SpectrumMatch {
        peaks_a: pa.iter().map(|&k| a.frequencies[k]).collect(),
        peaks_b: pb.iter().map(|&k| b.frequencies[k]).collect(),
        pairs,
        max_discrepancy: worst_bins as f64 * a.resolution,
        max_discrepancy_bins: worst_bins as f64,
        unmatched_a: freq(a, &pa, &used_a, false),
        unmatched_b: freq(b, &pb, &used_b, false),
    })
}
