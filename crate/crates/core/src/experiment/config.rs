use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cr3bp::{StateVector, SystemConstants, DEFAULT_TOL};
use crate::dmd::Truncation;
use crate::embedding::DEFAULT_RANK_TOL;
use crate::error::{Error, Result};
use crate::spectral::{DEFAULT_FREQ_TOL, DEFAULT_STAB_TOL};
use crate::validation::{Normalization, Plane, DEFAULT_REFINE_TOL};

/// Where the training and truth data come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    /// Propagated CR3BP orbit.
    Orbit {
        name: String,
        initial_state: StateVector,
        #[serde(default)]
        constants: SystemConstants,
        /// Run a symmetric differential correction on `initial_state` first.
        #[serde(default = "yes")]
        refine_initial_state: bool,
    },
    /// Scalar sum of cosines `mean + Σ a cos(ω t + φ)`.
    Harmonic {
        /// Period used to size windows (TU).
        period: f64,
        components: Vec<HarmonicComponent>,
        #[serde(default)]
        mean: f64,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicComponent {
    /// Angular frequency (rad/TU).
    pub frequency: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Sampling interval, given directly or as samples per reference period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Sampling {
    Interval(f64),
    SamplesPerPeriod(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayRange {
    pub start: usize,
    pub end: usize,
    #[serde(default = "one")]
    pub step: usize,
}

fn one() -> usize {
    1
}

impl DelayRange {
    pub fn values(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step.max(1)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub integrator: f64,
    pub rank: f64,
    pub frequency: f64,
    pub stability: f64,
    pub crossing_refine: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            integrator: DEFAULT_TOL,
            rank: DEFAULT_RANK_TOL,
            frequency: DEFAULT_FREQ_TOL,
            stability: DEFAULT_STAB_TOL,
            crossing_refine: DEFAULT_REFINE_TOL,
        }
    }
}

/// Exploratory propagation used to measure the reference period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSettings {
    pub dt: f64,
    pub horizon: f64,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        Self { dt: 1e-3, horizon: 20.0 }
    }
}

/// One scenario: data source, sampling, windows, sweeps and tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub source: Source,
    pub sampling: Sampling,
    /// Training window in reference periods.
    pub train_periods: usize,
    /// Prediction horizon in reference periods after the training window.
    pub predict_periods: usize,
    /// Delay count used for the window sweep, prediction and spectra.
    pub delays: usize,
    pub delay_range: DelayRange,
    /// Training windows (in periods) for the window sweep.
    pub window_periods: Vec<usize>,
    /// Upper delay bound for the rank-saturation search; defaults to the
    /// largest delay the training window supports.
    #[serde(default)]
    pub saturation_max_delay: Option<usize>,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub reference: ReferenceSettings,
    #[serde(default = "default_plane")]
    pub crossing_plane: Plane,
    #[serde(default)]
    pub normalization: Normalization,
    /// Zero-pad FFTs to this many points.
    #[serde(default)]
    pub fft_padding: Option<usize>,
    #[serde(default = "default_peaks")]
    pub peak_count: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_plane() -> Plane {
    Plane::ZX
}

fn default_peaks() -> usize {
    5
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_json(&s).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        match &self.source {
            Source::Orbit { initial_state, constants, .. } => {
                if !initial_state.is_finite() {
                    return fail("initial state must be finite".into());
                }
                constants.validate().map_err(|e| Error::Config(e.to_string()))?;
            }
            Source::Harmonic { period, components, mean } => {
                if !(*period > 0.0) {
                    return fail(format!("harmonic period must be positive, got {period}"));
                }
                if components.is_empty() && *mean == 0.0 {
                    return fail("harmonic source is identically zero".into());
                }
            }
        }
        match self.sampling {
            Sampling::Interval(dt) if !(dt > 0.0 && dt.is_finite()) => {
                return fail(format!("sampling interval must be positive, got {dt}"));
            }
            Sampling::SamplesPerPeriod(0) => return fail("samples per period must be positive".into()),
            _ => {}
        }
        if self.train_periods < 1 {
            return fail("training window must span at least one period".into());
        }
        if self.delays == 0 {
            return fail("delay count must be positive".into());
        }
        if self.delay_range.start == 0 || self.delay_range.start > self.delay_range.end {
            return fail(format!(
                "delay range [{}, {}] is empty or starts at zero",
                self.delay_range.start, self.delay_range.end
            ));
        }
        if let Some(w) = self.window_periods.iter().find(|&&w| w < 1) {
            return fail(format!("window of {w} periods is shorter than one period"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("integrator", t.integrator),
            ("rank", t.rank),
            ("frequency", t.frequency),
            ("stability", t.stability),
            ("crossing_refine", t.crossing_refine),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} tolerance must be positive, got {v}"));
            }
        }
        if !(self.reference.dt > 0.0 && self.reference.horizon > 0.0) {
            return fail("reference propagation needs positive dt and horizon".into());
        }
        if self.peak_count == 0 {
            return fail("peak count must be positive".into());
        }
        Ok(())
    }

    /// Largest training window (in periods) any stage needs.
    pub fn max_train_periods(&self) -> usize {
        self.window_periods.iter().copied().chain([self.train_periods]).max().unwrap_or(1)
    }
}
