use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use cislunar_dmd::dmd::{DmdModel, Truncation};
use cislunar_dmd::experiment::{self, output, DelayRange, ExperimentConfig, Sampling, ScenarioData, Source, OUTPUT_DIR_ENV};
use cislunar_dmd::validation::{self, Plane};
use cislunar_dmd::{spectral, Error};

const BUILTIN: [(&str, &str); 4] = [
    ("l1_halo", include_str!("../../../scenarios/l1_halo.json")),
    ("butterfly", include_str!("../../../scenarios/butterfly.json")),
    ("resonant_2_1", include_str!("../../../scenarios/resonant_2_1.json")),
    ("synthetic_two_tone", include_str!("../../../scenarios/synthetic_two_tone.json")),
];

/// Hankel DMD experiments on CR3BP periodic orbits.
#[derive(Parser, Debug)]
#[command(name = "cislunar-dmd", version, about)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Propagate the scenario orbit and write the sampled trajectory.
    Propagate(Common),
    /// Fit a Hankel DMD model on the training window and save it.
    Fit(Common),
    /// Training error and rank against the number of delays.
    SweepDelays {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        from: Option<usize>,
        #[arg(long)]
        to: Option<usize>,
        #[arg(long)]
        step: Option<usize>,
        /// Also run the rank-saturation search.
        #[arg(long)]
        saturation: bool,
    },
    /// Training error against the training window length.
    SweepWindow {
        #[command(flatten)]
        common: Common,
        /// Window lengths in periods, comma separated.
        #[arg(long, value_delimiter = ',')]
        windows: Vec<usize>,
    },
    /// Prediction error over the horizon after the training window.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Use a saved model instead of fitting one.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Mode table, eigenvalue plot and FFT comparison.
    Spectrum(Common),
    /// Plane crossings of the training data and the period they imply.
    Crossings(Common),
    /// Run every stage of a scenario and write all tables and plots.
    Reproduce(Common),
    /// List the built-in scenarios.
    Scenarios,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file, or the name of a built-in scenario.
    scenario: String,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Sampling interval (TU).
    #[arg(long, conflicts_with = "samples_per_period")]
    dt: Option<f64>,
    #[arg(long)]
    samples_per_period: Option<usize>,
    #[arg(long)]
    train_periods: Option<usize>,
    #[arg(long)]
    predict_periods: Option<usize>,
    #[arg(long)]
    delays: Option<usize>,
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long)]
    integrator_tol: Option<f64>,
    /// Relative singular-value cutoff for the DMD truncation.
    #[arg(long)]
    truncation_tol: Option<f64>,
    /// Hard cap on the DMD rank.
    #[arg(long)]
    truncation_rank: Option<usize>,
    /// Crossing plane: XY, YZ or ZX.
    #[arg(long)]
    plane: Option<Plane>,
}

impl Common {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut c = match BUILTIN.iter().find(|(n, _)| *n == self.scenario) {
            Some((_, text)) => ExperimentConfig::from_json(text)?,
            None => ExperimentConfig::load(Path::new(&self.scenario))
                .with_context(|| format!("loading scenario {}", self.scenario))?,
        };
        if let Some(dt) = self.dt {
            c.sampling = Sampling::Interval(dt);
        }
        if let Some(n) = self.samples_per_period {
            c.sampling = Sampling::SamplesPerPeriod(n);
        }
        if let Some(v) = self.train_periods {
            c.train_periods = v;
        }
        if let Some(v) = self.predict_periods {
            c.predict_periods = v;
        }
        if let Some(v) = self.delays {
            c.delays = v;
        }
        if let Some(v) = self.rank_tol {
            c.tolerances.rank = v;
        }
        if let Some(v) = self.integrator_tol {
            c.tolerances.integrator = v;
        }
        if let Some(v) = self.truncation_tol {
            c.truncation.rel_tol = v;
        }
        if self.truncation_rank.is_some() {
            c.truncation = Truncation { rank: self.truncation_rank, ..c.truncation };
        }
        if let Some(p) = self.plane {
            c.crossing_plane = p;
        }
        c.validate()?;
        Ok(c)
    }

    fn out_dir(&self, config: &ExperimentConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("output").join(&config.name))
    }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_text(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    let mut f = create(dir, name)?;
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn prepared(common: &Common, periods: impl Fn(&ExperimentConfig) -> usize) -> anyhow::Result<(ExperimentConfig, ScenarioData, PathBuf)> {
    let config = common.load()?;
    let data = experiment::prepare_periods(&config, periods(&config))?;
    let dir = common.out_dir(&config);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok((config, data, dir))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Scenarios => {
            for (name, _) in BUILTIN {
                println!("{name}");
            }
        }
        Command::Propagate(common) => {
            let (_, data, dir) = prepared(&common, |c| c.train_periods + c.predict_periods)?;
            output::write_trajectory_csv(create(&dir, "trajectory.csv")?, &data, data.len())?;
            println!("period {:.12} TU, dt {:.12} TU, {} samples", data.reference_period, data.dt, data.len());
            if let Some(po) = &data.corrected {
                println!("corrected in {} iterations, residual {:.3e}", po.iterations, po.residual);
            }
            println!("wrote {}", dir.join("trajectory.csv").display());
        }
        Command::Fit(common) => {
            let (c, data, dir) = prepared(&common, |c| c.train_periods)?;
            let model = experiment::fit_model(&c, &data, c.train_periods, c.delays)?;
            write_text(&dir, "model.json", &model.to_json()?)?;
            let s = spectral::summarize(&model, c.tolerances.frequency, c.tolerances.stability)?;
            println!("rank {} at {} delays", model.rank, model.delay_dim);
            println!("spectral radius {:.15}", s.max_modulus);
            match s.fundamental_period {
                Some(p) => println!("fundamental period {p:.12} TU (reference {:.12})", data.reference_period),
                None => println!("no oscillatory mode"),
            }
            println!("wrote {}", dir.join("model.json").display());
        }
        Command::SweepDelays { common, from, to, step, saturation } => {
            let (mut c, data, dir) = prepared(&common, |c| c.train_periods)?;
            c.delay_range = DelayRange {
                start: from.unwrap_or(c.delay_range.start),
                end: to.unwrap_or(c.delay_range.end),
                step: step.unwrap_or(c.delay_range.step),
            };
            c.validate()?;
            let rows = experiment::sweep_delays(&c, &data, &c.delay_range.values())?;
            output::write_rows(create(&dir, "delay_sweep.csv")?, &rows)?;
            let (err, rank) = output::delay_sweep_plot(&rows);
            write_text(&dir, "delay_sweep.svg", &err.to_svg())?;
            write_text(&dir, "rank_vs_delay.svg", &rank.to_svg())?;
            println!("{:>8} {:>6} {:>12} {:>12}", "delays", "rank", "max eps", "mean eps");
            for r in &rows {
                println!("{:>8} {:>6} {:>12.4e} {:>12.4e}", r.delays, r.rank, r.max_error, r.mean_error);
            }
            if saturation {
                let a = experiment::analyze_delays(&c, &data)?;
                write_text(&dir, "delay_analysis.json", &serde_json::to_string_pretty(&a)?)?;
                println!(
                    "rank saturates at {} from {} delays (search up to {})",
                    a.saturation.rank, a.saturation.delays, a.max_delay
                );
            }
        }
        Command::SweepWindow { common, windows } => {
            let (c, data, dir) = prepared(&common, |c| windows.iter().copied().max().unwrap_or(c.max_train_periods()))?;
            let windows = if windows.is_empty() { c.window_periods.clone() } else { windows };
            let rows = experiment::sweep_window(&c, &data, &windows)?;
            output::write_rows(create(&dir, "window_sweep.csv")?, &rows)?;
            write_text(&dir, "window_sweep.svg", &output::window_sweep_plot(&rows).to_svg())?;
            println!("{:>8} {:>8} {:>6} {:>12}", "periods", "samples", "rank", "max eps");
            for r in &rows {
                println!("{:>8} {:>8} {:>6} {:>12.4e}", r.train_periods, r.samples, r.rank, r.max_error);
            }
        }
        Command::Predict { common, model } => {
            let (c, data, dir) = prepared(&common, |c| c.train_periods + c.predict_periods)?;
            let model = match model {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    let m = DmdModel::from_json(&text)?;
                    if (m.dt - data.dt).abs() > 1e-12 * data.dt || m.state_dim != data.state_dim() {
                        bail!(Error::InvalidArgument(format!(
                            "model (dt {}, state dimension {}) does not match the scenario (dt {}, state dimension {})",
                            m.dt,
                            m.state_dim,
                            data.dt,
                            data.state_dim()
                        )));
                    }
                    m
                }
                None => experiment::fit_model(&c, &data, c.train_periods, c.delays)?,
            };
            let p = experiment::predict_horizon(&c, &data, &model)?;
            output::write_prediction_csv(create(&dir, "prediction_error.csv")?, &p)?;
            output::write_period_means_csv(create(&dir, "prediction_period_means.csv")?, &p)?;
            write_text(&dir, "prediction_error.svg", &output::prediction_plot(&p, data.reference_period).to_svg())?;
            println!("max eps {:.4e}, mean eps {:.4e} over {} periods", p.errors.max, p.errors.mean, p.period_means.len());
            println!("period means nondecreasing: {}", p.nondecreasing());
        }
        Command::Spectrum(common) => {
            let (c, data, dir) = prepared(&common, |c| c.train_periods)?;
            let model = experiment::fit_model(&c, &data, c.train_periods, c.delays)?;
            let s = spectral::summarize(&model, c.tolerances.frequency, c.tolerances.stability)?;
            s.write_csv(create(&dir, "modes.csv")?)?;
            write_text(&dir, "eigenvalues.svg", &output::eigenvalue_plot(&model).to_svg())?;
            for cs in experiment::compare_training_spectra(&c, &data, &model)? {
                spectral::write_spectra_csv(
                    create(&dir, &format!("spectrum_{}.csv", cs.component))?,
                    &[("truth", &cs.truth), ("reconstruction", &cs.reconstruction)],
                )?;
                let plot = output::spectrum_plot(&cs.component, &cs.truth, &cs.reconstruction);
                write_text(&dir, &format!("spectrum_{}.svg", cs.component), &plot.to_svg())?;
                println!(
                    "{:>3}: top-{} peaks differ by at most {} bins",
                    cs.component, c.peak_count, cs.matched.max_discrepancy_bins
                );
            }
            println!(
                "{} modes ({} oscillatory pairs, {} real), stable: {}",
                model.rank, s.dominant_count, s.real_count, s.stable
            );
            if let Some(p) = s.fundamental_period {
                println!("fundamental period {p:.12} TU");
            }
        }
        Command::Crossings(common) => {
            let c = common.load()?;
            if !matches!(c.source, Source::Orbit { .. }) {
                bail!(Error::Config(format!("{} is not an orbit scenario; crossings need a state trajectory", c.name)));
            }
            let (c, data, dir) = prepared(&common, |c| c.train_periods)?;
            let m = data.window_samples(c.train_periods);
            let tr = data.trajectory(0, m)?;
            let events = validation::detect_crossings(&tr, c.crossing_plane, c.tolerances.crossing_refine)?;
            validation::write_crossings_csv(create(&dir, "crossings.csv")?, &events)?;
            let est = validation::period_from_crossings(&events)?;
            println!(
                "{} crossings of {}, period {:.12} TU (dispersion {:.3e})",
                events.len(),
                c.crossing_plane.name(),
                est.period,
                est.dispersion
            );
        }
        Command::Reproduce(common) => {
            let c = common.load()?;
            let dir = common.out_dir(&c);
            let r = experiment::run_scenario(&c, Some(&dir))?;
            println!("{}: {} files in {}", r.name, r.outputs.len(), dir.display());
            println!(
                "rank saturates at {} from {} delays",
                r.delay_analysis.saturation.rank, r.delay_analysis.saturation.delays
            );
            println!("training max eps {:.4e}", r.training_error.max);
            println!("prediction max eps {:.4e}", r.prediction.errors.max);
            println!("stable: {} (spectral radius {:.15})", r.spectrum.stable, r.spectrum.max_modulus);
            if let Some(x) = &r.crossings {
                println!(
                    "crossing period {:.12}, DMD period {}",
                    x.crossing_period.period,
                    x.dmd_period.map_or("none".into(), |p| format!("{p:.12}"))
                );
            }
        }
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    e.chain()
        .find_map(|c| c.downcast_ref::<Error>())
        .map_or(1, |e| e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
