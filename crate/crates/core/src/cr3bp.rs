//! Earth–Moon circular restricted three-body dynamics in the rotating,
//! nondimensional frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{Dop853, Tolerances};

/// States closer than this to either primary are rejected (LU).
pub const MIN_RADIUS: f64 = 1e-6;

/// Default integrator tolerance (relative and absolute).
pub const DEFAULT_TOL: f64 = 1e-12;

/// Physical constants of the Earth–Moon system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConstants {
    /// Mass ratio m_Moon / (m_Earth + m_Moon).
    pub mu: f64,
    /// Kilometres per length unit.
    pub length_unit: f64,
    /// Seconds per time unit.
    pub time_unit: f64,
    /// Lunar radius in kilometres.
    pub moon_radius: f64,
}

impl Default for SystemConstants {
    fn default() -> Self {
        Self {
            mu: 1.2150e-2,
            length_unit: 389_703.0,
            time_unit: 382_981.0,
            moon_radius: 1737.1,
        }
    }
}

impl SystemConstants {
    /// Earth–Moon values with a different mass ratio.
    pub fn with_mu(mu: f64) -> Self {
        Self { mu, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu < 0.5) {
            return Err(Error::InvalidArgument(format!("mass ratio {} outside [0, 1/2)", self.mu)));
        }
        for (name, v) in [
            ("length_unit", self.length_unit),
            ("time_unit", self.time_unit),
            ("moon_radius", self.moon_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Position of the larger primary.
    pub fn earth(&self) -> [f64; 3] {
        [-self.mu, 0.0, 0.0]
    }

    /// Position of the smaller primary.
    pub fn moon(&self) -> [f64; 3] {
        [1.0 - self.mu, 0.0, 0.0]
    }
}

/// Position (LU) and velocity (LU/TU) in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
}

impl StateVector {
    pub fn new(x: f64, y: f64, z: f64, vx: f64, vy: f64, vz: f64) -> Self {
        Self { x, y, z, vx, vy, vz }
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.y, self.z, self.vx, self.vy, self.vz]
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn velocity(&self) -> [f64; 3] {
        [self.vx, self.vy, self.vz]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Component by index in `x, y, z, vx, vy, vz` order.
    pub fn component(&self, i: usize) -> f64 {
        self.to_array()[i]
    }
}

/// Uniformly sampled sequence of states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<StateVector>,
    /// Sampling interval (TU).
    pub dt: f64,
    /// Epoch of the first sample (TU).
    pub t0: f64,
}

impl Trajectory {
    pub fn new(samples: Vec<StateVector>, dt: f64, t0: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {dt}")));
        }
        Ok(Self { samples, dt, t0 })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Epoch of sample `i`, computed as a multiple of `dt`.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Time series of one state component.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.component(i)).collect()
    }

    /// Samples `start..start + count` as a new trajectory.
    pub fn window(&self, start: usize, count: usize) -> Result<Trajectory> {
        if start + count > self.len() {
            return Err(Error::WindowOutOfRange { start, count, len: self.len() });
        }
        Ok(Trajectory {
            samples: self.samples[start..start + count].to_vec(),
            dt: self.dt,
            t0: self.time(start),
        })
    }

    /// Column-per-sample data matrix (6 × len).
    pub fn to_matrix(&self) -> faer::Mat<f64> {
        faer::Mat::from_fn(6, self.len(), |r, c| self.samples[c].component(r))
    }

    /// Build a trajectory from the first six rows of a data matrix.
    pub fn from_matrix(m: faer::MatRef<'_, f64>, dt: f64, t0: f64) -> Result<Self> {
        if m.nrows() < 6 {
            return Err(Error::DimensionMismatch(format!(
                "need 6 rows for a state trajectory, got {}",
                m.nrows()
            )));
        }
        let samples = (0..m.ncols())
            .map(|c| StateVector::from_array(std::array::from_fn(|r| m[(r, c)])))
            .collect();
        Trajectory::new(samples, dt, t0)
    }
}

fn distances(pos: [f64; 3], c: &SystemConstants) -> Result<(f64, f64)> {
    let [x, y, z] = pos;
    let r1 = ((x + c.mu).powi(2) + y * y + z * z).sqrt();
    let r2 = ((x - 1.0 + c.mu).powi(2) + y * y + z * z).sqrt();
    // A massless primary (mu = 0) exerts no force and cannot be hit.
    let r2_guarded = if c.mu > 0.0 { r2 } else { f64::INFINITY };
    if !(r1 > MIN_RADIUS && r2_guarded > MIN_RADIUS) {
        return Err(Error::SingularPosition { r1, r2, min_radius: MIN_RADIUS });
    }
    Ok((r1, r2))
}

/// Effective (augmented) potential U.
pub fn effective_potential(pos: [f64; 3], c: &SystemConstants) -> Result<f64> {
    let (r1, r2) = distances(pos, c)?;
    let [x, y, _] = pos;
    let mut u = 0.5 * (x * x + y * y) + (1.0 - c.mu) / r1;
    if c.mu > 0.0 {
        u += c.mu / r2;
    }
    Ok(u)
}

/// Gradient of the effective potential.
pub fn potential_gradient(pos: [f64; 3], c: &SystemConstants) -> Result<[f64; 3]> {
    let (r1, r2) = distances(pos, c)?;
    let [x, y, z] = pos;
    let k1 = (1.0 - c.mu) / (r1 * r1 * r1);
    let k2 = if c.mu > 0.0 { c.mu / (r2 * r2 * r2) } else { 0.0 };
    Ok([
        x - k1 * (x + c.mu) - k2 * (x - 1.0 + c.mu),
        y - k1 * y - k2 * y,
        -k1 * z - k2 * z,
    ])
}

/// Hessian of the effective potential.
pub fn potential_hessian(pos: [f64; 3], c: &SystemConstants) -> Result<[[f64; 3]; 3]> {
    let (r1, r2) = distances(pos, c)?;
    let [x, y, z] = pos;
    let d1 = [x + c.mu, y, z];
    let d2 = [x - 1.0 + c.mu, y, z];
    let m1 = 1.0 - c.mu;
    let m2 = if c.mu > 0.0 { c.mu } else { 0.0 };
    let mut h = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            let t1 = m1 * (3.0 * d1[i] * d1[j] / r1.powi(5) - delta / r1.powi(3));
            let t2 = if m2 > 0.0 {
                m2 * (3.0 * d2[i] * d2[j] / r2.powi(5) - delta / r2.powi(3))
            } else {
                0.0
            };
            h[i][j] = t1 + t2;
        }
    }
    h[0][0] += 1.0;
    h[1][1] += 1.0;
    Ok(h)
}

fn eom_array(s: &[f64; 6], c: &SystemConstants) -> Result<[f64; 6]> {
    let g = potential_gradient([s[0], s[1], s[2]], c)?;
    Ok([s[3], s[4], s[5], 2.0 * s[4] + g[0], -2.0 * s[3] + g[1], g[2]])
}

/// Time derivative of the state.
pub fn eom(state: &StateVector, c: &SystemConstants) -> Result<[f64; 6]> {
    eom_array(&state.to_array(), c)
}

/// Jacobi integral C = 2U - v².
pub fn jacobi_constant(state: &StateVector, c: &SystemConstants) -> Result<f64> {
    let u = effective_potential(state.position(), c)?;
    let v2 = state.vx * state.vx + state.vy * state.vy + state.vz * state.vz;
    Ok(2.0 * u - v2)
}

fn check_state(state: &StateVector) -> Result<()> {
    if !state.is_finite() {
        return Err(Error::InvalidArgument(format!("state has non-finite components: {state:?}")));
    }
    Ok(())
}

/// Integrate from `state0` at t = 0 and sample at `0, dt, 2dt, …` up to `t_final`.
///
/// Grid epochs are `i * dt`; the last sample is the largest such epoch not
/// exceeding `t_final` (with a relative slack of 1e-9 samples).
pub fn propagate(
    state0: &StateVector,
    c: &SystemConstants,
    t_final: f64,
    dt: f64,
    tol: f64,
) -> Result<Trajectory> {
    check_state(state0)?;
    c.validate()?;
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_final must be non-negative, got {t_final}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    // Reject a singular start even when no step is taken.
    eom(state0, c)?;
    let n = (t_final / dt + 1e-9).floor() as usize;
    let mut samples = Vec::with_capacity(n + 1);
    samples.push(*state0);
    if n == 0 {
        return Trajectory::new(samples, dt, 0.0);
    }
    let t_last = n as f64 * dt;
    let cc = *c;
    let rhs = move |_t: f64, y: &[f64; 6], dy: &mut [f64; 6]| -> Result<()> {
        *dy = eom_array(y, &cc)?;
        Ok(())
    };
    let mut solver = Dop853::new(rhs, 0.0, state0.to_array(), t_last, Tolerances::uniform(tol))?;
    for i in 1..=n {
        let tg = if i == n { t_last } else { i as f64 * dt };
        while solver.t() < tg {
            solver.step(t_last)?;
        }
        let y = if solver.t() == tg { *solver.y() } else { solver.interpolate(tg) };
        samples.push(StateVector::from_array(y));
    }
    Trajectory::new(samples, dt, 0.0)
}

/// Integrate a single state to time `t` (may be negative).
pub fn flow(state0: &StateVector, c: &SystemConstants, t: f64, tol: f64) -> Result<StateVector> {
    check_state(state0)?;
    let cc = *c;
    let rhs = move |_t: f64, y: &[f64; 6], dy: &mut [f64; 6]| -> Result<()> {
        *dy = eom_array(y, &cc)?;
        Ok(())
    };
    let y = crate::integrator::integrate(rhs, 0.0, state0.to_array(), t, Tolerances::uniform(tol))?;
    Ok(StateVector::from_array(y))
}

fn variational_rhs(s: &[f64; 42], c: &SystemConstants) -> Result<[f64; 42]> {
    let pos = [s[0], s[1], s[2]];
    let f = eom_array(&[s[0], s[1], s[2], s[3], s[4], s[5]], c)?;
    let h = potential_hessian(pos, c)?;
    let mut out = [0.0; 42];
    out[..6].copy_from_slice(&f);
    // dPhi/dt = A Phi, A = [[0, I], [H, Omega]], Phi stored row-major.
    let phi = |i: usize, j: usize| s[6 + 6 * i + j];
    for j in 0..6 {
        for i in 0..3 {
            out[6 + 6 * i + j] = phi(3 + i, j);
        }
        let hp: [f64; 3] = std::array::from_fn(|i| (0..3).map(|k| h[i][k] * phi(k, j)).sum());
        out[6 + 6 * 3 + j] = hp[0] + 2.0 * phi(4, j);
        out[6 + 6 * 4 + j] = hp[1] - 2.0 * phi(3, j);
        out[6 + 6 * 5 + j] = hp[2];
    }
    Ok(out)
}

/// Options for [`correct_periodic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionOptions {
    pub tol: f64,
    /// Convergence threshold on the perpendicular-crossing velocity residual.
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Crossings earlier than this (TU) are ignored when locating the half period.
    pub min_half_period: f64,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, residual_tol: 1e-11, max_iterations: 40, min_half_period: 1e-3 }
    }
}

/// Result of a periodic-orbit correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub state: StateVector,
    pub period: f64,
    pub iterations: usize,
    pub residual: f64,
}

struct HalfCrossing {
    t: f64,
    y: [f64; 42],
}

fn half_period_crossing(
    state: &StateVector,
    c: &SystemConstants,
    opts: &CorrectionOptions,
    horizon: f64,
) -> Result<HalfCrossing> {
    let mut y0 = [0.0; 42];
    y0[..6].copy_from_slice(&state.to_array());
    for i in 0..6 {
        y0[6 + 7 * i] = 1.0;
    }
    let cc = *c;
    let rhs = move |_t: f64, y: &[f64; 42], dy: &mut [f64; 42]| -> Result<()> {
        *dy = variational_rhs(y, &cc)?;
        Ok(())
    };
    let mut solver = Dop853::new(rhs, 0.0, y0, horizon, Tolerances::uniform(opts.tol))?;
    let mut prev_sign = 0.0;
    while solver.t() < horizon {
        solver.step(horizon)?;
        let (a, b) = solver.last_step();
        let yb = solver.y()[1];
        if b <= opts.min_half_period || prev_sign == 0.0 {
            if yb != 0.0 {
                prev_sign = yb.signum();
            }
            continue;
        }
        if yb * prev_sign <= 0.0 {
            // Root of y inside the last step: bisection then secant on the dense output.
            let (mut lo, mut hi) = (a.max(opts.min_half_period), b);
            let f = |t: f64| solver.interpolate(t)[1];
            let mut flo = f(lo);
            if flo * prev_sign <= 0.0 {
                lo = a;
                flo = f(lo);
            }
            for _ in 0..200 {
                if hi - lo < 1e-14 * hi.abs().max(1.0) {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm * flo > 0.0 {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            let fhi = f(hi);
            let t = if fhi != flo { lo - flo * (hi - lo) / (fhi - flo) } else { hi };
            let t = t.clamp(lo, hi);
            return Ok(HalfCrossing { t, y: solver.interpolate(t) });
        }
        prev_sign = yb.signum();
    }
    Err(Error::InsufficientEvents { needed: 1, found: 0 })
}

/// Refine a symmetric periodic orbit that starts perpendicular to the
/// y = 0 plane.
///
/// The initial x is held fixed. For spatial orbits z and ẏ are adjusted so
/// that ẋ and ż vanish at the next y = 0 crossing; planar orbits (z = ż = 0)
/// adjust ẏ only. The y, ẋ, ż components of the guess are set to zero.
pub fn correct_periodic(
    guess: &StateVector,
    c: &SystemConstants,
    opts: &CorrectionOptions,
) -> Result<PeriodicOrbit> {
    check_state(guess)?;
    c.validate()?;
    let planar = guess.z.abs() < 1e-12 && guess.vz.abs() < 1e-12;
    let mut s = StateVector::new(guess.x, 0.0, if planar { 0.0 } else { guess.z }, 0.0, guess.vy, 0.0);
    // Generous horizon: the half period of any orbit studied here is well below this.
    let horizon = 50.0;
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iterations {
        let hc = half_period_crossing(&s, c, opts, horizon)?;
        let y = &hc.y;
        let state_half = [y[0], y[1], y[2], y[3], y[4], y[5]];
        let d = eom_array(&state_half, c)?;
        residual = if planar { y[3].abs() } else { y[3].abs().max(y[5].abs()) };
        if residual < opts.residual_tol {
            return Ok(PeriodicOrbit { state: s, period: 2.0 * hc.t, iterations: it, residual });
        }
        let phi = |i: usize, j: usize| y[6 + 6 * i + j];
        let ydot = d[1];
        if planar {
            let m = phi(3, 4) - d[3] / ydot * phi(1, 4);
            s.vy -= y[3] / m;
        } else {
            let m00 = phi(3, 2) - d[3] / ydot * phi(1, 2);
            let m01 = phi(3, 4) - d[3] / ydot * phi(1, 4);
            let m10 = phi(5, 2) - d[5] / ydot * phi(1, 2);
            let m11 = phi(5, 4) - d[5] / ydot * phi(1, 4);
            let det = m00 * m11 - m01 * m10;
            if det == 0.0 || !det.is_finite() {
                return Err(Error::CorrectionFailed { iterations: it, residual });
            }
            let dz = (-y[3] * m11 + y[5] * m01) / det;
            let dvy = (-y[5] * m00 + y[3] * m10) / det;
            s.z += dz;
            s.vy += dvy;
        }
        if !s.is_finite() {
            return Err(Error::CorrectionFailed { iterations: it, residual });
        }
    }
    Err(Error::CorrectionFailed { iterations: opts.max_iterations, residual })
}

/// Monodromy matrix (row-major) of the flow over `[0, t]`.
pub fn state_transition(state: &StateVector, c: &SystemConstants, t: f64, tol: f64) -> Result<[[f64; 6]; 6]> {
    let mut y0 = [0.0; 42];
    y0[..6].copy_from_slice(&state.to_array());
    for i in 0..6 {
        y0[6 + 7 * i] = 1.0;
    }
    let cc = *c;
    let rhs = move |_t: f64, y: &[f64; 42], dy: &mut [f64; 42]| -> Result<()> {
        *dy = variational_rhs(y, &cc)?;
        Ok(())
    };
    let y = crate::integrator::integrate(rhs, 0.0, y0, t, Tolerances::uniform(tol))?;
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| y[6 + 6 * i + j])))
}
