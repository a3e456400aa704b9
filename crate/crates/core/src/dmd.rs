//! Exact dynamic mode decomposition with SVD truncation.

use faer::{Mat, MatRef};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cr3bp::{StateVector, Trajectory};
use crate::embedding;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Threshold on `|Im| / |Re|` of an assembled prediction at integer steps.
pub const IMAG_RESIDUE_TOL: f64 = 1e-8;

/// SVD truncation rule: keep singular values at or above `rel_tol * s_max`,
/// optionally capped at a hard rank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    pub rel_tol: f64,
    #[serde(default)]
    pub rank: Option<usize>,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { rel_tol: 1e-10, rank: None }
    }
}

impl Truncation {
    pub fn relative(rel_tol: f64) -> Self {
        Self { rel_tol, rank: None }
    }

    pub fn rank(rank: usize) -> Self {
        Self { rel_tol: 0.0, rank: Some(rank) }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol >= 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("truncation tolerance {} is invalid", self.rel_tol)));
        }
        if self.rank == Some(0) {
            return Err(Error::InvalidArgument("truncation rank must be positive".into()));
        }
        if self.rel_tol == 0.0 && self.rank.is_none() {
            return Err(Error::InvalidArgument("truncation needs a tolerance or a rank".into()));
        }
        Ok(())
    }

    /// Retained rank for descending singular values `s`.
    pub fn select(&self, s: &[f64]) -> usize {
        let smax = s.first().copied().unwrap_or(0.0);
        let by_tol = s.iter().filter(|&&v| v > 0.0 && v >= self.rel_tol * smax).count();
        match self.rank {
            Some(r) => r.min(by_tol),
            None => by_tol,
        }
    }
}

/// Fitted DMD surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct DmdModel {
    /// Reduced operator `Ũᵀ X_{k+1} Ṽ Σ̃⁻¹` (r × r).
    pub a_reduced: Mat<f64>,
    pub eigenvalues: Vec<Complex64>,
    /// Exact modes `X_{k+1} Ṽ Σ̃⁻¹ W`, one column per eigenvalue.
    pub modes: CMat,
    pub amplitudes: Vec<Complex64>,
    pub rank: usize,
    /// Sampling interval (TU).
    pub dt: f64,
    /// Dimension of the base (un-delayed) state.
    pub state_dim: usize,
    pub delay_dim: usize,
    /// Singular values of the training matrix before truncation.
    pub singular_values: Vec<f64>,
}

/// Fit exact DMD to a snapshot pair.
///
/// `state_dim` and `delay_dim` describe the row layout of the lifted state
/// (`rows = state_dim * delay_dim`); plain snapshots use `delay_dim = 1`.
pub fn fit(
    pair: &embedding::SnapshotPair,
    truncation: Truncation,
    dt: f64,
    state_dim: usize,
    delay_dim: usize,
) -> Result<DmdModel> {
    truncation.validate()?;
    let x = pair.x.as_ref();
    let xp = pair.xp.as_ref();
    if x.nrows() != xp.nrows() || x.ncols() != xp.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "X is {}x{} but X' is {}x{}",
            x.nrows(),
            x.ncols(),
            xp.nrows(),
            xp.ncols()
        )));
    }
    if state_dim == 0 || state_dim * delay_dim != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows do not split into {} delays of dimension {}",
            x.nrows(),
            delay_dim,
            state_dim
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {dt}")));
    }
    let d = linalg::svd(x)?;
    let r = truncation.select(&d.s);
    if r == 0 {
        return Err(Error::DegenerateSvd);
    }
    let u = d.u.subcols(0, r);
    let v = d.v.subcols(0, r);
    // B = X' Ṽ Σ̃⁻¹
    let mut b = xp * v;
    for j in 0..r {
        let inv = 1.0 / d.s[j];
        for i in 0..b.nrows() {
            b[(i, j)] *= inv;
        }
    }
    let a_reduced = u.transpose() * &b;
    let (eigenvalues, w) = linalg::eigen_real(a_reduced.as_ref())?;
    let modes = linalg::to_complex(b.as_ref()) * &w;
    let x0: Vec<Complex64> = (0..x.nrows()).map(|i| Complex64::new(x[(i, 0)], 0.0)).collect();
    let rcond = linalg::default_rcond(modes.nrows(), modes.ncols());
    let mut amplitudes = linalg::pinv_solve(modes.as_ref(), &x0, rcond)?;
    symmetrize_amplitudes(&eigenvalues, &mut amplitudes);
    Ok(DmdModel {
        a_reduced,
        eigenvalues,
        modes,
        amplitudes,
        rank: r,
        dt,
        state_dim,
        delay_dim,
        singular_values: d.s,
    })
}

/// Partner index of each eigenvalue under complex conjugation; real
/// eigenvalues map to themselves.
pub fn conjugate_partners(eigenvalues: &[Complex64]) -> Vec<Option<usize>> {
    let mut partner = vec![None; eigenvalues.len()];
    for (i, li) in eigenvalues.iter().enumerate() {
        if li.im == 0.0 {
            partner[i] = Some(i);
            continue;
        }
        if li.im < 0.0 || partner[i].is_some() {
            continue;
        }
        let target = li.conj();
        let best = eigenvalues
            .iter()
            .enumerate()
            .filter(|&(j, lj)| lj.im < 0.0 && partner[j].is_none())
            .min_by(|a, b| (a.1 - target).norm().total_cmp(&(b.1 - target).norm()));
        if let Some((j, lj)) = best {
            if (lj - target).norm() <= 1e-12 * li.norm().max(1.0) {
                partner[i] = Some(j);
                partner[j] = Some(i);
            }
        }
    }
    partner
}

/// Project amplitudes onto the conjugate-symmetric set: paired modes get
/// conjugate amplitudes and real modes real ones.
fn symmetrize_amplitudes(eigenvalues: &[Complex64], b: &mut [Complex64]) {
    for (i, p) in conjugate_partners(eigenvalues).into_iter().enumerate() {
        match p {
            Some(j) if j == i => b[i].im = 0.0,
            Some(j) if j > i => {
                let avg = (b[i] + b[j].conj()) * 0.5;
                b[i] = avg;
                b[j] = avg.conj();
            }
            _ => {}
        }
    }
}

/// Hankel DMD on `m` consecutive samples (columns of `data`) with `l` delays.
pub fn fit_hankel(data: MatRef<'_, f64>, l: usize, truncation: Truncation, dt: f64) -> Result<DmdModel> {
    let pair = embedding::hankel_pair(data, l)?;
    fit(&pair, truncation, dt, data.nrows(), l)
}

/// Hankel DMD on samples `start..start + count` of a trajectory.
pub fn fit_trajectory(
    traj: &Trajectory,
    start: usize,
    count: usize,
    l: usize,
    truncation: Truncation,
) -> Result<DmdModel> {
    let w = traj.window(start, count)?;
    fit_hankel(w.to_matrix().as_ref(), l, truncation, traj.dt)
}

/// `λ^p` on the principal branch: `|λ|^p e^{i p arg λ}`.
pub fn eigen_power(lambda: Complex64, p: f64) -> Complex64 {
    if p == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let r = lambda.norm();
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::from_polar(r.powf(p), lambda.arg() * p)
}

impl DmdModel {
    fn check_imag(&self, re: &[f64], im: &[f64], p: f64) -> Result<()> {
        if (p - p.round()).abs() > 1e-9 {
            // Negative real eigenvalues legitimately leave an imaginary part
            // at fractional powers.
            return Ok(());
        }
        let nr = re.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ni = im.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ni > IMAG_RESIDUE_TOL * nr.max(f64::MIN_POSITIVE) && ni > 1e-300 {
            return Err(Error::Decomposition(format!(
                "prediction has imaginary residue {ni:e} against norm {nr:e}; conjugate pairing is broken"
            )));
        }
        Ok(())
    }

    /// Full lifted prediction `Z Λ^{t/Δk} b` (complex).
    pub fn predict_lifted(&self, t: f64) -> Vec<Complex64> {
        let p = t / self.dt;
        let coef: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .zip(&self.amplitudes)
            .map(|(&l, &b)| eigen_power(l, p) * b)
            .collect();
        (0..self.modes.nrows())
            .map(|i| (0..self.rank).map(|j| self.modes[(i, j)] * coef[j]).sum())
            .collect()
    }

    /// Base-state prediction (first `state_dim` rows) at time `t` after the
    /// first training sample.
    pub fn predict_vec(&self, t: f64) -> Result<Vec<f64>> {
        let p = t / self.dt;
        let coef: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .zip(&self.amplitudes)
            .map(|(&l, &b)| eigen_power(l, p) * b)
            .collect();
        let mut re = vec![0.0; self.state_dim];
        let mut im = vec![0.0; self.state_dim];
        for i in 0..self.state_dim {
            let v: Complex64 = (0..self.rank).map(|j| self.modes[(i, j)] * coef[j]).sum();
            re[i] = v.re;
            im[i] = v.im;
        }
        self.check_imag(&re, &im, p)?;
        Ok(re)
    }

    /// Predicted spacecraft state; requires a six-dimensional base state.
    pub fn predict(&self, t: f64) -> Result<StateVector> {
        if self.state_dim != 6 {
            return Err(Error::DimensionMismatch(format!(
                "model state dimension is {}, not 6",
                self.state_dim
            )));
        }
        let v = self.predict_vec(t)?;
        Ok(StateVector::from_array([v[0], v[1], v[2], v[3], v[4], v[5]]))
    }

    /// Predictions at arbitrary times as a `state_dim × times.len()` matrix.
    pub fn reconstruct_matrix(&self, times: &[f64]) -> Result<Mat<f64>> {
        self.warn_growth(times);
        let mut out = Mat::zeros(self.state_dim, times.len());
        for (c, &t) in times.iter().enumerate() {
            let v = self.predict_vec(t)?;
            for (r, x) in v.into_iter().enumerate() {
                out[(r, c)] = x;
            }
        }
        Ok(out)
    }

    /// Predictions on the grid `t0 + i*dt`, `i < count`, as a trajectory.
    pub fn reconstruct(&self, t0: f64, count: usize) -> Result<Trajectory> {
        let times: Vec<f64> = (0..count).map(|i| t0 + i as f64 * self.dt).collect();
        let m = self.reconstruct_matrix(&times)?;
        Trajectory::from_matrix(m.as_ref(), self.dt, t0)
    }

    fn warn_growth(&self, times: &[f64]) {
        let tmax = times.iter().copied().fold(0.0, f64::max);
        let rho = self.spectral_radius();
        if rho > 1.0 + 1e-6 && tmax > 0.0 {
            let factor = rho.powf(tmax / self.dt);
            if factor > 1e3 {
                log::warn!("eigenvalue modulus {rho} amplifies predictions by {factor:e} over the horizon");
            }
        }
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max)
    }

    pub fn to_document(&self) -> ModelDocument {
        let c = |z: &Complex64| [z.re, z.im];
        ModelDocument {
            rank: self.rank,
            dt: self.dt,
            state_dim: self.state_dim,
            delay_dim: self.delay_dim,
            eigenvalues: self.eigenvalues.iter().map(c).collect(),
            amplitudes: self.amplitudes.iter().map(c).collect(),
            modes: (0..self.modes.nrows())
                .map(|i| (0..self.modes.ncols()).map(|j| c(&self.modes[(i, j)])).collect())
                .collect(),
            a_reduced: (0..self.rank)
                .map(|i| (0..self.rank).map(|j| self.a_reduced[(i, j)]).collect())
                .collect(),
            singular_values: self.singular_values.clone(),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let r = doc.rank;
        let rows = doc.state_dim * doc.delay_dim;
        let bad = |what: &str| Error::DimensionMismatch(format!("model document: {what}"));
        if doc.eigenvalues.len() != r || doc.amplitudes.len() != r {
            return Err(bad("eigenvalue/amplitude count differs from rank"));
        }
        if doc.modes.len() != rows || doc.modes.iter().any(|row| row.len() != r) {
            return Err(bad("mode matrix shape"));
        }
        if doc.a_reduced.len() != r || doc.a_reduced.iter().any(|row| row.len() != r) {
            return Err(bad("reduced operator shape"));
        }
        let c = |p: &[f64; 2]| Complex64::new(p[0], p[1]);
        Ok(DmdModel {
            a_reduced: Mat::from_fn(r, r, |i, j| doc.a_reduced[i][j]),
            eigenvalues: doc.eigenvalues.iter().map(c).collect(),
            modes: Mat::from_fn(rows, r, |i, j| c(&doc.modes[i][j])),
            amplitudes: doc.amplitudes.iter().map(c).collect(),
            rank: r,
            dt: doc.dt,
            state_dim: doc.state_dim,
            delay_dim: doc.delay_dim,
            singular_values: doc.singular_values.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(s)?)
    }
}

/// JSON form of a [`DmdModel`]. Complex numbers are `[re, im]` pairs and
/// matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub rank: usize,
    pub dt: f64,
    pub state_dim: usize,
    pub delay_dim: usize,
    pub eigenvalues: Vec<[f64; 2]>,
    pub amplitudes: Vec<[f64; 2]>,
    pub modes: Vec<Vec<[f64; 2]>>,
    pub a_reduced: Vec<Vec<f64>>,
    #[serde(default)]
    pub singular_values: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_data() -> embedding::SnapshotPair {
        let mut x = Mat::zeros(2, 10);
        let mut xp = Mat::zeros(2, 10);
        let (mut a, mut b) = (1.0, 2.0);
        for k in 0..10 {
            x[(0, k)] = a;
            x[(1, k)] = b;
            a *= 0.9;
            b *= 0.5;
            xp[(0, k)] = a;
            xp[(1, k)] = b;
        }
        embedding::SnapshotPair { x, xp }
    }

    #[test]
    fn diagonal_operator_eigenvalues() {
        let m = fit(&diag_data(), Truncation::default(), 1.0, 2, 1).unwrap();
        let expect = [Complex64::new(0.9, 0.0), Complex64::new(0.5, 0.0)];
        assert!(linalg::max_pairing_distance(&m.eigenvalues, &expect) < 1e-10);
        let p = m.predict_vec(1.0).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-10 && (p[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_signal_has_unit_eigenvalue() {
        let x = Mat::from_fn(3, 5, |i, _| (i + 1) as f64);
        let pair = embedding::SnapshotPair { x: x.clone(), xp: x };
        let m = fit(&pair, Truncation::default(), 0.1, 3, 1).unwrap();
        assert_eq!(m.rank, 1);
        assert!((m.eigenvalues[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let z = &m.modes;
        let ratio = z[(1, 0)] / z[(0, 0)];
        assert!((ratio - Complex64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_data_is_degenerate() {
        let x = Mat::<f64>::zeros(2, 4);
        let pair = embedding::SnapshotPair { x: x.clone(), xp: x };
        assert!(matches!(fit(&pair, Truncation::default(), 1.0, 2, 1), Err(Error::DegenerateSvd)));
    }

    #[test]
    fn shape_mismatch() {
        let pair = embedding::SnapshotPair { x: Mat::zeros(2, 4), xp: Mat::zeros(2, 3) };
        assert!(matches!(
            fit(&pair, Truncation::default(), 1.0, 2, 1),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn hard_rank_caps_truncation() {
        let m = fit(&diag_data(), Truncation { rel_tol: 1e-10, rank: Some(1) }, 1.0, 2, 1).unwrap();
        assert_eq!(m.rank, 1);
        assert_eq!(m.eigenvalues.len(), 1);
    }

    #[test]
    fn principal_branch_power() {
        let l = Complex64::from_polar(0.9, 3.0);
        let h = eigen_power(l, 0.5);
        assert!((h * h - l).norm() < 1e-14);
        assert!((h.arg() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn json_round_trip() {
        let m = fit(&diag_data(), Truncation::default(), 0.25, 2, 1).unwrap();
        let back = DmdModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn empty_grid_reconstruction() {
        let m = fit(&diag_data(), Truncation::default(), 1.0, 2, 1).unwrap();
        assert_eq!(m.reconstruct_matrix(&[]).unwrap().ncols(), 0);
    }
}
