//! Fourier-series / autoregressive view of periodic signals.
//!
//! A periodic sequence with `M` frequency pairs obeys a linear recurrence of
//! order `l >= 2M` whose companion matrix has the eigenvalues `e^{jω}`. This
//! module builds those objects directly from the frequencies so they can be
//! compared against what DMD recovers from data.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Frequencies closer than this (rad/sample) are merged.
pub const FREQ_DEDUP_TOL: f64 = 1e-12;

/// Sum of complex exponentials `x(k) = Σ a_m e^{j ω_m k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSignal {
    /// Frequencies in `[-π, π)` (rad/sample).
    pub frequencies: Vec<f64>,
    pub coefficients: Vec<Complex64>,
    /// Samples per period.
    pub length: usize,
}

impl HarmonicSignal {
    pub fn new(frequencies: Vec<f64>, coefficients: Vec<Complex64>, length: usize) -> Result<Self> {
        if frequencies.len() != coefficients.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} frequencies but {} coefficients",
                frequencies.len(),
                coefficients.len()
            )));
        }
        if let Some(w) = frequencies.iter().find(|w| !(-PI..PI).contains(*w)) {
            return Err(Error::InvalidArgument(format!("frequency {w} outside [-pi, pi)")));
        }
        Ok(Self { frequencies, coefficients, length })
    }

    /// Value at sample `k` (complex; real for conjugate-symmetric coefficients).
    pub fn sample(&self, k: f64) -> Complex64 {
        self.frequencies
            .iter()
            .zip(&self.coefficients)
            .map(|(&w, &a)| a * Complex64::from_polar(1.0, w * k))
            .sum()
    }

    /// Real part of the first `count` samples.
    pub fn samples(&self, count: usize) -> Vec<f64> {
        (0..count).map(|k| self.sample(k as f64).re).collect()
    }

    /// Frequencies whose coefficient magnitude exceeds `tol`.
    pub fn active_frequencies(&self, tol: f64) -> Vec<f64> {
        self.frequencies
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, a)| a.norm() > tol)
            .map(|(&w, _)| w)
            .collect()
    }
}

/// Wrap an angle into `[-π, π)`.
pub fn wrap_angle(w: f64) -> f64 {
    let r = (w + PI).rem_euclid(2.0 * PI) - PI;
    if r >= PI {
        -PI
    } else {
        r
    }
}

/// Fourier coefficients of one period of samples at the `N` canonical
/// frequencies `2πm/N`, normalised so that `x(k) = Σ a_m e^{j ω_m k}`.
pub fn fourier_coefficients(signal: &[f64]) -> Result<HarmonicSignal> {
    let n = signal.len();
    if n == 0 {
        return Err(Error::EmptySignal);
    }
    let mut freqs = Vec::with_capacity(n);
    let mut coefs = Vec::with_capacity(n);
    for m in 0..n {
        let w = wrap_angle(2.0 * PI * m as f64 / n as f64);
        let mut a = Complex64::new(0.0, 0.0);
        for (k, &x) in signal.iter().enumerate() {
            // Reduce the phase index modulo n to keep the angle small.
            let phase = -2.0 * PI * ((m * k) % n) as f64 / n as f64;
            a += x * Complex64::from_polar(1.0, phase);
        }
        freqs.push(w);
        coefs.push(a / n as f64);
    }
    HarmonicSignal::new(freqs, coefs, n)
}

/// Autoregressive coefficients: `x(k + l) = Σ_i α_i x(k + i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArModel {
    pub alphas: Vec<Complex64>,
    pub order: usize,
}

impl ArModel {
    /// One-step prediction from the last `order` samples (oldest first).
    pub fn predict_next(&self, history: &[f64]) -> Result<f64> {
        if history.len() != self.order {
            return Err(Error::DimensionMismatch(format!(
                "AR model of order {} given {} samples",
                self.order,
                history.len()
            )));
        }
        let v: Complex64 = self.alphas.iter().zip(history).map(|(a, &x)| a * x).sum();
        Ok(v.re)
    }
}

/// Remove frequencies within [`FREQ_DEDUP_TOL`] of an earlier one (on the circle).
pub fn dedup_frequencies(freqs: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(freqs.len());
    for &w in freqs {
        let dup = out.iter().any(|&u| {
            let d = wrap_angle(w - u).abs();
            d < FREQ_DEDUP_TOL
        });
        if !dup {
            out.push(w);
        }
    }
    out
}

/// Vandermonde matrix with rows `[1, e^{jω}, …, e^{jω(l-1)}]`.
pub fn vandermonde(freqs: &[f64], l: usize) -> CMat {
    Mat::from_fn(freqs.len(), l, |m, i| Complex64::from_polar(1.0, freqs[m] * i as f64))
}

/// Least-squares AR coefficients `ᾱ = V† Y` with `Y_m = e^{jω_m l}`.
///
/// The diagonal factor `D^k` multiplying both `V` and `Y` in the
/// time-shifted form cancels, so the shift-free system is solved directly.
pub fn ar_parameters(freqs: &[f64], order: usize) -> Result<ArModel> {
    let f = dedup_frequencies(freqs);
    if order == 0 {
        return Err(Error::InvalidArgument("AR order must be at least 1".into()));
    }
    if order < f.len() {
        return Err(Error::InvalidArgument(format!(
            "order {order} cannot represent {} distinct exponentials",
            f.len()
        )));
    }
    if order > f.len() {
        log::debug!("AR order {order} exceeds {} exponentials; taking the minimum-norm solution", f.len());
    }
    let v = vandermonde(&f, order);
    let y: Vec<Complex64> = f.iter().map(|&w| Complex64::from_polar(1.0, w * order as f64)).collect();
    let rcond = linalg::default_rcond(v.nrows(), v.ncols());
    let alphas = linalg::pinv_solve(v.as_ref(), &y, rcond)?;
    Ok(ArModel { alphas, order })
}

/// Companion matrix: ones on the subdiagonal, `ᾱ` in the last column.
pub fn companion_matrix(model: &ArModel) -> CMat {
    let l = model.order;
    Mat::from_fn(l, l, |i, j| {
        if j == l - 1 {
            model.alphas[i]
        } else if i == j + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

pub fn companion_eigenvalues(model: &ArModel) -> Result<Vec<Complex64>> {
    linalg::eigenvalues_complex(companion_matrix(model).as_ref())
}

/// `V† D V` for the Vandermonde matrix of `freqs` at order `l` and
/// `D = diag(e^{jω})`.
pub fn vandermonde_similarity(freqs: &[f64], l: usize) -> Result<CMat> {
    let f = dedup_frequencies(freqs);
    let v = vandermonde(&f, l);
    let dv = Mat::from_fn(f.len(), l, |m, i| Complex64::from_polar(1.0, f[m]) * v[(m, i)]);
    let rcond = linalg::default_rcond(v.nrows(), v.ncols());
    let mut out = Mat::zeros(l, l);
    for j in 0..l {
        let col: Vec<Complex64> = (0..f.len()).map(|m| dv[(m, j)]).collect();
        let x = linalg::pinv_solve(v.as_ref(), &col, rcond)?;
        for i in 0..l {
            out[(i, j)] = x[i];
        }
    }
    Ok(out)
}
