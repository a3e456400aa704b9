//! Normalised prediction error and period estimation from coordinate-plane
//! crossings.

use std::io::Write;

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::cr3bp::{StateVector, Trajectory};
use crate::error::{Error, Result};
use crate::spectral::{csv_err, fmt};

/// Default time tolerance for crossing refinement (TU).
pub const DEFAULT_REFINE_TOL: f64 = 1e-9;
/// A plane-normal coordinate that never exceeds this (LU) is degenerate.
pub const CROSSING_TOL: f64 = 1e-10;

/// Denominator used in the normalised error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Largest absolute entry of the whole truth window.
    #[default]
    GlobalMax,
    /// Largest Euclidean norm of a truth sample.
    MaxSampleNorm,
}

/// Per-sample error with its maximum and mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub per_sample: Vec<f64>,
    pub max: f64,
    pub mean: f64,
}

impl ErrorSeries {
    fn from_values(per_sample: Vec<f64>) -> Self {
        let max = per_sample.iter().copied().fold(0.0, f64::max);
        let mean = if per_sample.is_empty() {
            0.0
        } else {
            per_sample.iter().sum::<f64>() / per_sample.len() as f64
        };
        Self { per_sample, max, mean }
    }

    /// Means over consecutive bins of `bin` samples (a trailing partial bin is dropped).
    pub fn bin_means(&self, bin: usize) -> Vec<f64> {
        if bin == 0 {
            return Vec::new();
        }
        self.per_sample.chunks_exact(bin).map(|c| c.iter().sum::<f64>() / bin as f64).collect()
    }
}

/// `ε(k) = ‖x̂(k) − x(k)‖₂ / scale(truth)` over columns of two data matrices.
pub fn normalized_error_matrix(
    estimate: MatRef<'_, f64>,
    truth: MatRef<'_, f64>,
    norm: Normalization,
) -> Result<ErrorSeries> {
    if estimate.nrows() != truth.nrows() || estimate.ncols() != truth.ncols() {
        return Err(Error::GridMismatch(format!(
            "estimate is {}x{}, truth is {}x{}",
            estimate.nrows(),
            estimate.ncols(),
            truth.nrows(),
            truth.ncols()
        )));
    }
    let (rows, cols) = (truth.nrows(), truth.ncols());
    let col_norm = |m: MatRef<'_, f64>, c: usize| (0..rows).map(|r| m[(r, c)].powi(2)).sum::<f64>().sqrt();
    let scale = match norm {
        Normalization::GlobalMax => (0..cols)
            .flat_map(|c| (0..rows).map(move |r| (r, c)))
            .map(|(r, c)| truth[(r, c)].abs())
            .fold(0.0, f64::max),
        Normalization::MaxSampleNorm => (0..cols).map(|c| col_norm(truth, c)).fold(0.0, f64::max),
    };
    if cols > 0 && scale == 0.0 {
        return Err(Error::ZeroTruth);
    }
    let per_sample = (0..cols)
        .map(|c| (0..rows).map(|r| (estimate[(r, c)] - truth[(r, c)]).powi(2)).sum::<f64>().sqrt() / scale)
        .collect();
    Ok(ErrorSeries::from_values(per_sample))
}

fn same_grid(a: &Trajectory, b: &Trajectory) -> Result<()> {
    let tol = 1e-12 * a.dt.abs().max(b.dt.abs());
    if a.len() != b.len() || (a.dt - b.dt).abs() > tol || (a.t0 - b.t0).abs() > tol.max(1e-12) {
        return Err(Error::GridMismatch(format!(
            "{} samples from t0={} every {} vs {} samples from t0={} every {}",
            a.len(),
            a.t0,
            a.dt,
            b.len(),
            b.t0,
            b.dt
        )));
    }
    Ok(())
}

/// Normalised error of an estimated trajectory against the truth on the same grid.
pub fn normalized_error(estimate: &Trajectory, truth: &Trajectory) -> Result<ErrorSeries> {
    normalized_error_with(estimate, truth, Normalization::GlobalMax)
}

pub fn normalized_error_with(
    estimate: &Trajectory,
    truth: &Trajectory,
    norm: Normalization,
) -> Result<ErrorSeries> {
    same_grid(estimate, truth)?;
    normalized_error_matrix(estimate.to_matrix().as_ref(), truth.to_matrix().as_ref(), norm)
}

/// Coordinate plane, named by the two axes it contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Plane {
    /// z = 0
    XY,
    /// x = 0
    YZ,
    /// y = 0
    ZX,
}

impl Plane {
    /// Index of the plane-normal coordinate.
    pub fn normal_index(self) -> usize {
        match self {
            Plane::XY => 2,
            Plane::YZ => 0,
            Plane::ZX => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Plane::XY => "XY",
            Plane::YZ => "YZ",
            Plane::ZX => "ZX",
        }
    }
}

impl std::str::FromStr for Plane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "XY" => Ok(Plane::XY),
            "YZ" => Ok(Plane::YZ),
            "ZX" | "XZ" => Ok(Plane::ZX),
            _ => Err(Error::InvalidArgument(format!("unknown plane {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub plane: Plane,
    pub time: f64,
    pub state: StateVector,
    /// Sign of the plane-normal velocity (+1 or -1).
    pub direction: i8,
}

/// Cubic Hermite interpolation of position (and its derivative for velocity)
/// between two samples `h` apart, at fraction `s`.
fn hermite(a: &StateVector, b: &StateVector, h: f64, s: f64) -> StateVector {
    let (pa, pb) = (a.position(), b.position());
    let (va, vb) = (a.velocity(), b.velocity());
    let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
    let h10 = s.powi(3) - 2.0 * s * s + s;
    let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
    let h11 = s.powi(3) - s * s;
    let d00 = 6.0 * s * s - 6.0 * s;
    let d10 = 3.0 * s * s - 4.0 * s + 1.0;
    let d01 = -6.0 * s * s + 6.0 * s;
    let d11 = 3.0 * s * s - 2.0 * s;
    let p: [f64; 3] =
        std::array::from_fn(|i| h00 * pa[i] + h10 * h * va[i] + h01 * pb[i] + h11 * h * vb[i]);
    let v: [f64; 3] =
        std::array::from_fn(|i| (d00 * pa[i] + d01 * pb[i]) / h + d10 * va[i] + d11 * vb[i]);
    StateVector::new(p[0], p[1], p[2], v[0], v[1], v[2])
}

/// Locate sign changes of the plane-normal coordinate between consecutive
/// samples and refine each on the cubic Hermite interpolant.
///
/// Refinement bisects until the bracket is below `refine_tol`, then takes a
/// secant step inside the final bracket.
pub fn detect_crossings(traj: &Trajectory, plane: Plane, refine_tol: f64) -> Result<Vec<CrossingEvent>> {
    if !(refine_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("refine tolerance must be positive, got {refine_tol}")));
    }
    let k = plane.normal_index();
    if traj.samples.iter().all(|s| s.component(k).abs() < CROSSING_TOL) {
        return Err(Error::DegeneratePlane(plane.name()));
    }
    let h = traj.dt;
    let mut events = Vec::new();
    for i in 0..traj.len().saturating_sub(1) {
        let (a, b) = (&traj.samples[i], &traj.samples[i + 1]);
        let (fa, fb) = (a.component(k), b.component(k));
        let crosses = (fa < 0.0 && fb >= 0.0) || (fa > 0.0 && fb <= 0.0);
        if !crosses {
            continue;
        }
        let f = |s: f64| hermite(a, b, h, s).component(k);
        let (mut lo, mut hi, mut flo, mut fhi) = (0.0, 1.0, fa, fb);
        let s_tol = refine_tol / h;
        while hi - lo > s_tol {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                flo = 0.0;
                fhi = 0.0;
                break;
            }
            if (fm < 0.0) == (flo < 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
                fhi = fm;
            }
        }
        let s = if fhi != flo { (lo - flo * (hi - lo) / (fhi - flo)).clamp(lo, hi) } else { lo };
        let state = hermite(a, b, h, s);
        let rate = state.velocity()[k];
        let direction = if rate != 0.0 { rate.signum() as i8 } else if fb > fa { 1 } else { -1 };
        events.push(CrossingEvent { plane, time: traj.time(i) + s * h, state, direction });
    }
    Ok(events)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodEstimate {
    pub period: f64,
    /// Largest deviation of an individual gap from the mean.
    pub dispersion: f64,
    pub gaps: usize,
}

/// Mean gap between successive crossings in the same direction.
pub fn period_from_crossings(events: &[CrossingEvent]) -> Result<PeriodEstimate> {
    if events.len() < 3 {
        return Err(Error::InsufficientEvents { needed: 3, found: events.len() });
    }
    if events.iter().any(|e| e.plane != events[0].plane) {
        return Err(Error::InvalidArgument("crossing events come from different planes".into()));
    }
    let mut gaps = Vec::new();
    for dir in [-1i8, 1] {
        let t: Vec<f64> = events.iter().filter(|e| e.direction == dir).map(|e| e.time).collect();
        gaps.extend(t.windows(2).map(|w| w[1] - w[0]));
    }
    if gaps.is_empty() {
        return Err(Error::InsufficientEvents { needed: 3, found: events.len() });
    }
    let period = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let dispersion = gaps.iter().map(|g| (g - period).abs()).fold(0.0, f64::max);
    Ok(PeriodEstimate { period, dispersion, gaps: gaps.len() })
}

/// Crossing table as CSV.
pub fn write_crossings_csv<W: Write>(w: W, events: &[CrossingEvent]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["plane", "time", "x", "y", "z", "vx", "vy", "vz", "direction"])
        .map_err(csv_err)?;
    for e in events {
        let mut row = vec![e.plane.name().to_string(), fmt(e.time)];
        row.extend(e.state.to_array().iter().map(|&v| fmt(v)));
        row.push(e.direction.to_string());
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(t: f64, d: i8) -> CrossingEvent {
        CrossingEvent { plane: Plane::XY, time: t, state: StateVector::default(), direction: d }
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let tr = Trajectory::new(vec![StateVector::new(1.0, 2.0, 3.0, 0.1, 0.2, 0.3); 4], 0.1, 0.0).unwrap();
        let e = normalized_error(&tr, &tr).unwrap();
        assert!(e.per_sample.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_example() {
        let truth = Trajectory::new(vec![StateVector::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0)], 1.0, 0.0).unwrap();
        let est = Trajectory::new(vec![StateVector::new(1.1, 0.0, 0.0, 0.0, 0.0, 0.0)], 1.0, 0.0).unwrap();
        let e = normalized_error(&est, &truth).unwrap();
        assert!((e.per_sample[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_truth_and_mismatch() {
        let zero = Trajectory::new(vec![StateVector::default(); 2], 1.0, 0.0).unwrap();
        assert!(matches!(normalized_error(&zero, &zero), Err(Error::ZeroTruth)));
        let other = Trajectory::new(vec![StateVector::default(); 3], 1.0, 0.0).unwrap();
        assert!(matches!(normalized_error(&zero, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn period_from_uniform_events() {
        let ev: Vec<_> = (0..4).map(|i| event(i as f64, 1)).collect();
        let p = period_from_crossings(&ev).unwrap();
        assert_eq!(p.period, 1.0);
        assert_eq!(p.dispersion, 0.0);
    }

    #[test]
    fn alternating_directions_use_same_direction_gaps() {
        let ev = [event(0.0, 1), event(0.5, -1), event(1.0, 1), event(1.5, -1)];
        assert_eq!(period_from_crossings(&ev).unwrap().period, 1.0);
    }

    #[test]
    fn too_few_events() {
        assert!(matches!(
            period_from_crossings(&[event(0.0, 1), event(1.0, 1)]),
            Err(Error::InsufficientEvents { .. })
        ));
    }

    #[test]
    fn no_events_above_plane() {
        let s: Vec<_> = (0..20).map(|i| StateVector::new(0.0, 0.0, 0.02 + 0.001 * i as f64, 0.0, 0.0, 0.001)).collect();
        let tr = Trajectory::new(s, 1.0, 0.0).unwrap();
        assert!(detect_crossings(&tr, Plane::XY, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn planar_orbit_is_degenerate_for_xy() {
        let s: Vec<_> = (0..20).map(|i| StateVector::new((i as f64).cos(), (i as f64).sin(), 0.0, 0.0, 0.0, 0.0)).collect();
        let tr = Trajectory::new(s, 1.0, 0.0).unwrap();
        assert!(matches!(detect_crossings(&tr, Plane::XY, 1e-9), Err(Error::DegeneratePlane("XY"))));
    }
}
