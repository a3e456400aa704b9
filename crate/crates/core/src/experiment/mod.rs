//! Config-driven experiment pipeline: reference data, delay and window
//! sweeps, long-horizon prediction, spectra and crossing-period checks.

pub mod config;
pub mod output;
pub mod plot;

use std::path::Path;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::cr3bp::{self, CorrectionOptions, PeriodicOrbit, StateVector, SystemConstants, Trajectory};
use crate::dmd::{self, DmdModel, Truncation};
use crate::embedding::{self, DelayRank};
use crate::error::{Error, Result};
use crate::spectral::{self, SpectralSummary, SpectrumMatch};
use crate::validation::{self, ErrorSeries, Normalization, PeriodEstimate, Plane};

pub use config::{DelayRange, ExperimentConfig, HarmonicComponent, ReferenceSettings, Sampling, Source, Tolerances};

/// Environment variable that overrides the output directory.
pub const OUTPUT_DIR_ENV: &str = "CISLUNAR_DMD_OUTPUT_DIR";

pub const INTEGRATOR_NAME: &str = "DOP853 (adaptive 8th order, 7th-order dense output)";

const STATE_LABELS: [&str; 6] = ["x", "y", "z", "vx", "vy", "vz"];

/// Uniformly sampled data for one scenario, starting at t = 0.
#[derive(Debug, Clone)]
pub struct ScenarioData {
    /// One row per state component, one column per sample.
    pub data: Mat<f64>,
    pub dt: f64,
    pub reference_period: f64,
    pub reference_crossings: Option<PeriodEstimate>,
    pub initial_state: Option<StateVector>,
    pub corrected: Option<PeriodicOrbit>,
    pub constants: Option<SystemConstants>,
}

impl ScenarioData {
    pub fn state_dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    /// Samples per reference period (not necessarily an integer).
    pub fn samples_per_period(&self) -> f64 {
        self.reference_period / self.dt
    }

    /// Number of samples spanning `periods` whole periods, endpoints included.
    pub fn window_samples(&self, periods: usize) -> usize {
        (periods as f64 * self.samples_per_period()).round() as usize + 1
    }

    pub fn window(&self, start: usize, count: usize) -> Result<MatRef<'_, f64>> {
        if start + count > self.len() {
            return Err(Error::WindowOutOfRange { start, count, len: self.len() });
        }
        Ok(self.data.as_ref().subcols(start, count))
    }

    pub fn label(&self, row: usize) -> String {
        if self.state_dim() == 6 {
            STATE_LABELS[row].to_string()
        } else {
            format!("s{row}")
        }
    }

    /// The data as a state trajectory (orbit scenarios only).
    pub fn trajectory(&self, start: usize, count: usize) -> Result<Trajectory> {
        let w = self.window(start, count)?;
        Trajectory::from_matrix(w, self.dt, start as f64 * self.dt)
    }
}

fn sampling_interval(sampling: Sampling, period: f64) -> f64 {
    match sampling {
        Sampling::Interval(dt) => dt,
        Sampling::SamplesPerPeriod(n) => period / n as f64,
    }
}

/// Starting state after optional correction.
pub fn initial_state(config: &ExperimentConfig) -> Result<(StateVector, Option<PeriodicOrbit>)> {
    match &config.source {
        Source::Orbit { initial_state, constants, refine_initial_state, .. } => {
            if *refine_initial_state {
                let opts = CorrectionOptions { tol: config.tolerances.integrator, ..Default::default() };
                let po = cr3bp::correct_periodic(initial_state, constants, &opts)?;
                Ok((po.state, Some(po)))
            } else {
                Ok((*initial_state, None))
            }
        }
        Source::Harmonic { .. } => Err(Error::Config("harmonic scenarios have no initial state".into())),
    }
}

/// Period from same-direction crossings of a finely sampled exploratory run.
pub fn reference_period(
    state: &StateVector,
    constants: &SystemConstants,
    config: &ExperimentConfig,
) -> Result<PeriodEstimate> {
    let r = &config.reference;
    let tr = cr3bp::propagate(state, constants, r.horizon, r.dt, config.tolerances.integrator)?;
    let events = validation::detect_crossings(&tr, config.crossing_plane, config.tolerances.crossing_refine)?;
    validation::period_from_crossings(&events)
}

/// Generate the reference data covering `periods` periods from t = 0.
pub fn prepare_periods(config: &ExperimentConfig, periods: usize) -> Result<ScenarioData> {
    config.validate()?;
    match &config.source {
        Source::Orbit { constants, .. } => {
            let (state, corrected) = initial_state(config)?;
            let estimate = reference_period(&state, constants, config)?;
            let period = estimate.period;
            let dt = sampling_interval(config.sampling, period);
            let count = (periods as f64 * period / dt).round() as usize + 1;
            let t_final = (count - 1) as f64 * dt;
            let tr = cr3bp::propagate(&state, constants, t_final, dt, config.tolerances.integrator)?;
            Ok(ScenarioData {
                data: tr.to_matrix(),
                dt,
                reference_period: period,
                reference_crossings: Some(estimate),
                initial_state: Some(state),
                corrected,
                constants: Some(*constants),
            })
        }
        Source::Harmonic { period, components, mean } => {
            let dt = sampling_interval(config.sampling, *period);
            let count = (periods as f64 * period / dt).round() as usize + 1;
            let data = Mat::from_fn(1, count, |_, k| {
                let t = k as f64 * dt;
                mean + components
                    .iter()
                    .map(|c| c.amplitude * (c.frequency * t + c.phase).cos())
                    .sum::<f64>()
            });
            Ok(ScenarioData {
                data,
                dt,
                reference_period: *period,
                reference_crossings: None,
                initial_state: None,
                corrected: None,
                constants: None,
            })
        }
    }
}

/// Data long enough for every stage of [`run_scenario`].
pub fn prepare(config: &ExperimentConfig) -> Result<ScenarioData> {
    prepare_periods(config, config.max_train_periods() + config.predict_periods)
}

/// Fit Hankel DMD with `delays` delays on the first `periods` periods.
pub fn fit_model(config: &ExperimentConfig, data: &ScenarioData, periods: usize, delays: usize) -> Result<DmdModel> {
    let m = data.window_samples(periods);
    dmd::fit_hankel(data.window(0, m)?, delays, config.truncation, data.dt)
}

/// Error of the model reconstruction over the samples of `truth`, starting at t = 0.
pub fn training_error(model: &DmdModel, truth: MatRef<'_, f64>, norm: Normalization) -> Result<ErrorSeries> {
    let times: Vec<f64> = (0..truth.ncols()).map(|k| k as f64 * model.dt).collect();
    let est = model.reconstruct_matrix(&times)?;
    validation::normalized_error_matrix(est.as_ref(), truth, norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySweepRow {
    pub delays: usize,
    /// Retained rank of the fitted model.
    pub rank: usize,
    /// Numerical rank of the training Hankel matrix at the rank tolerance.
    pub hankel_rank: usize,
    pub max_error: f64,
    pub mean_error: f64,
}

/// Fit and reconstruct the training window (no extrapolation) for each delay count.
pub fn sweep_delays(config: &ExperimentConfig, data: &ScenarioData, delays: &[usize]) -> Result<Vec<DelaySweepRow>> {
    let m = data.window_samples(config.train_periods);
    let truth = data.window(0, m)?;
    delays
        .iter()
        .map(|&l| {
            let model = dmd::fit_hankel(truth, l, config.truncation, data.dt)?;
            let err = training_error(&model, truth, config.normalization)?;
            log::info!("delays {l}: rank {} max error {:e}", model.rank, err.max);
            Ok(DelaySweepRow {
                delays: l,
                rank: model.rank,
                hankel_rank: crate::linalg::numerical_rank(&model.singular_values, config.tolerances.rank),
                max_error: err.max,
                mean_error: err.mean,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSweepRow {
    pub train_periods: usize,
    pub samples: usize,
    pub rank: usize,
    pub max_error: f64,
    pub mean_error: f64,
}

/// Training error for each window length at the configured delay count.
pub fn sweep_window(config: &ExperimentConfig, data: &ScenarioData, windows: &[usize]) -> Result<Vec<WindowSweepRow>> {
    windows
        .iter()
        .map(|&w| {
            if w < 1 {
                return Err(Error::InvalidArgument(format!("window of {w} periods is shorter than one period")));
            }
            let m = data.window_samples(w);
            let truth = data.window(0, m)?;
            let model = dmd::fit_hankel(truth, config.delays, config.truncation, data.dt)?;
            let err = training_error(&model, truth, config.normalization)?;
            Ok(WindowSweepRow { train_periods: w, samples: m, rank: model.rank, max_error: err.max, mean_error: err.mean })
        })
        .collect()
}

/// Error of a model beyond its training window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    /// Index of the first predicted sample.
    pub start: usize,
    pub dt: f64,
    pub errors: ErrorSeries,
    /// Mean error over each whole period of the horizon.
    pub period_means: Vec<f64>,
}

impl PredictionResult {
    /// Whether every period mean is at least the previous one.
    pub fn nondecreasing(&self) -> bool {
        self.period_means.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Predict `predict_periods` periods past the training window of a model
/// trained on the first `config.train_periods` periods.
pub fn predict_horizon(config: &ExperimentConfig, data: &ScenarioData, model: &DmdModel) -> Result<PredictionResult> {
    let start = data.window_samples(config.train_periods);
    let end = data.window_samples(config.train_periods + config.predict_periods);
    let count = end - start;
    let bin = data.samples_per_period().round() as usize;
    if config.predict_periods == 0 || count == 0 {
        return Ok(PredictionResult {
            start,
            dt: data.dt,
            errors: ErrorSeries { per_sample: Vec::new(), max: 0.0, mean: 0.0 },
            period_means: Vec::new(),
        });
    }
    let truth = data.window(start, count)?;
    let times: Vec<f64> = (start..end).map(|k| k as f64 * data.dt).collect();
    let est = model.reconstruct_matrix(&times)?;
    let errors = validation::normalized_error_matrix(est.as_ref(), truth, config.normalization)?;
    let period_means = errors.bin_means(bin.max(1));
    Ok(PredictionResult { start, dt: data.dt, errors, period_means })
}

/// Delay selection by rank on the training window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayAnalysis {
    /// First delay count with a row-rank-deficient embedding.
    pub first_deficient: Option<DelayRank>,
    /// Smallest delay count that reaches the saturated rank.
    pub saturation: DelayRank,
    /// Upper bound of the saturation search.
    pub max_delay: usize,
    pub rank_tol: f64,
}

/// Largest `l` for which `m` samples leave more Hankel columns than rows.
pub fn max_valid_delay(state_dim: usize, m: usize) -> usize {
    let mut l = (m + 1) / (state_dim + 1);
    while l > 0 && m - l + 1 <= state_dim * l {
        l -= 1;
    }
    l
}

pub fn analyze_delays(config: &ExperimentConfig, data: &ScenarioData) -> Result<DelayAnalysis> {
    let m = data.window_samples(config.train_periods);
    let w = data.window(0, m)?;
    let l_valid = max_valid_delay(data.state_dim(), m);
    let l_max = config.saturation_max_delay.map_or(l_valid, |l| l.min(l_valid));
    if l_max == 0 {
        return Err(Error::WindowTooShort { delays: 1, rows: data.state_dim(), cols: m });
    }
    let tol = config.tolerances.rank;
    let first_deficient = match embedding::min_delay_by_rank(w, tol, l_max) {
        Ok(r) => Some(r),
        Err(Error::DelayLimitExceeded { .. }) | Err(Error::WindowTooShort { .. }) => None,
        Err(e) => return Err(e),
    };
    let saturation = embedding::saturation_delay(w, 1, l_max, tol)?;
    Ok(DelayAnalysis { first_deficient, saturation, max_delay: l_max, rank_tol: tol })
}

/// FFT peak agreement between data and reconstruction for one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpectrum {
    pub component: String,
    pub truth: spectral::Spectrum,
    pub reconstruction: spectral::Spectrum,
    pub matched: SpectrumMatch,
}

pub fn compare_training_spectra(
    config: &ExperimentConfig,
    data: &ScenarioData,
    model: &DmdModel,
) -> Result<Vec<ComponentSpectrum>> {
    let m = data.window_samples(config.train_periods);
    let truth = data.window(0, m)?;
    let times: Vec<f64> = (0..m).map(|k| k as f64 * data.dt).collect();
    let est = model.reconstruct_matrix(&times)?;
    (0..data.state_dim())
        .map(|r| {
            let a: Vec<f64> = (0..m).map(|c| truth[(r, c)]).collect();
            let b: Vec<f64> = (0..m).map(|c| est[(r, c)]).collect();
            let sa = spectral::fft_signal(&a, data.dt, config.fft_padding)?;
            let sb = spectral::fft_signal(&b, data.dt, config.fft_padding)?;
            let matched = spectral::compare_spectra(&sa, &sb, config.peak_count)?;
            Ok(ComponentSpectrum { component: data.label(r), truth: sa, reconstruction: sb, matched })
        })
        .collect()
}

/// Same-direction crossing period of the training data against the DMD
/// fundamental period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingComparison {
    pub plane: Plane,
    pub events: Vec<validation::CrossingEvent>,
    pub crossing_period: PeriodEstimate,
    pub dmd_period: Option<f64>,
    pub relative_difference: Option<f64>,
}

pub fn compare_crossing_period(
    config: &ExperimentConfig,
    data: &ScenarioData,
    summary: &SpectralSummary,
) -> Result<CrossingComparison> {
    let m = data.window_samples(config.train_periods);
    let tr = data.trajectory(0, m)?;
    let events = validation::detect_crossings(&tr, config.crossing_plane, config.tolerances.crossing_refine)?;
    let crossing_period = validation::period_from_crossings(&events)?;
    let dmd_period = summary.fundamental_period;
    Ok(CrossingComparison {
        plane: config.crossing_plane,
        events,
        relative_difference: dmd_period.map(|p| (p - crossing_period.period).abs() / crossing_period.period),
        crossing_period,
        dmd_period,
    })
}

/// Settings needed to interpret the numbers in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub package_version: String,
    pub integrator: String,
    pub integrator_tol: f64,
    pub rank_tol: f64,
    pub truncation: Truncation,
    pub dt: f64,
    pub samples_per_period: f64,
    pub reference_period: f64,
    pub reference_crossings: Option<PeriodEstimate>,
    pub initial_state: Option<StateVector>,
    pub corrected_orbit: Option<PeriodicOrbit>,
    pub constants: Option<SystemConstants>,
    pub frequency_tol: f64,
    pub stability_tol: f64,
    pub crossing_refine_tol: f64,
    pub normalization: Normalization,
}

impl Provenance {
    pub fn new(config: &ExperimentConfig, data: &ScenarioData) -> Self {
        Self {
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            integrator: INTEGRATOR_NAME.to_string(),
            integrator_tol: config.tolerances.integrator,
            rank_tol: config.tolerances.rank,
            truncation: config.truncation,
            dt: data.dt,
            samples_per_period: data.samples_per_period(),
            reference_period: data.reference_period,
            reference_crossings: data.reference_crossings,
            initial_state: data.initial_state,
            corrected_orbit: data.corrected,
            constants: data.constants,
            frequency_tol: config.tolerances.frequency,
            stability_tol: config.tolerances.stability,
            crossing_refine_tol: config.tolerances.crossing_refine,
            normalization: config.normalization,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub provenance: Provenance,
    pub delay_sweep: Vec<DelaySweepRow>,
    pub delay_analysis: DelayAnalysis,
    pub window_sweep: Vec<WindowSweepRow>,
    pub training_error: ErrorSeries,
    pub prediction: PredictionResult,
    pub spectrum: SpectralSummary,
    pub spectra: Vec<ComponentSpectrum>,
    pub crossings: Option<CrossingComparison>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

/// Run every stage of a scenario and, when `out_dir` is given, write the
/// tables, plots, model and report there.
pub fn run_scenario(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentReport> {
    let data = prepare(config)?;
    run_with_data(config, &data, out_dir)
}

pub fn run_with_data(config: &ExperimentConfig, data: &ScenarioData, out_dir: Option<&Path>) -> Result<ExperimentReport> {
    log::info!("{}: {} samples at dt = {} (period {})", config.name, data.len(), data.dt, data.reference_period);
    let delay_sweep = sweep_delays(config, data, &config.delay_range.values())?;
    let delay_analysis = analyze_delays(config, data)?;
    let window_sweep = sweep_window(config, data, &config.window_periods)?;
    let model = fit_model(config, data, config.train_periods, config.delays)?;
    let m = data.window_samples(config.train_periods);
    let training_error = training_error(&model, data.window(0, m)?, config.normalization)?;
    let prediction = predict_horizon(config, data, &model)?;
    let spectrum = spectral::summarize(&model, config.tolerances.frequency, config.tolerances.stability)?;
    let spectra = compare_training_spectra(config, data, &model)?;
    let crossings = match config.source {
        Source::Orbit { .. } => Some(compare_crossing_period(config, data, &spectrum)?),
        Source::Harmonic { .. } => None,
    };
    let mut report = ExperimentReport {
        name: config.name.clone(),
        provenance: Provenance::new(config, data),
        delay_sweep,
        delay_analysis,
        window_sweep,
        training_error,
        prediction,
        spectrum,
        spectra,
        crossings,
        outputs: Vec::new(),
    };
    if let Some(dir) = out_dir {
        report.outputs = output::write_all(dir, config, data, &model, &report)?;
    }
    Ok(report)
}
