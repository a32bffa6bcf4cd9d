//! Command-line front end.
//!
//! Each subcommand reads a JSON config, validates it completely, computes,
//! and writes a self-describing result: CSV tables carry `#` header lines
//! with the tool version and the fully resolved config, JSON reports embed
//! the same under `"config"`. Exit codes: 0 success, 1 failure writing
//! output, 2 invalid or unreadable config or arguments, 3 infeasible
//! computation.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::deer::ensemble::ensemble_montecarlo_stream;
use crate::deer::{deer_rabi, deer_spectrum, ensemble_signal, DeerSignal, DrivePulse, EnsembleCoupling, Estimator, SpinBath};
use crate::fit::chi2::{chi2_surface, uncertainty_intervals};
use crate::sensing::{accumulate_nc2, detectability_radius, threshold_depth};
use crate::spin::transition_spectrum_with;
use crate::table::fmt_f64;

use config::{
    DeerRabiConfig, DeerSettings, DeerShared, DeerSpectrumConfig, EprConfig, FitConfig, Mode, SweepAxis,
    VolumeConfig,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "nvdeer", version, about = "NV-center DEER simulation and EPR fitting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct DeerArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Overrides the config's seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's mode (default single).
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// DEER signal versus drive detuning or frequency.
    DeerSpectrum(DeerArgs),
    /// DEER signal versus drive pulse length.
    DeerRabi(DeerArgs),
    /// EPR transition lines of a spin system.
    Epr(CommonArgs),
    /// χ² grid fit of field magnitude and angle to observed peaks.
    Fit(CommonArgs),
    /// Sensing-volume report.
    Volume(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::DeerSpectrum(a) | Command::DeerRabi(a) => &a.common,
            Command::Epr(a) | Command::Fit(a) | Command::Volume(a) => a,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::DeerSpectrum(_) => "deer-spectrum",
            Command::DeerRabi(_) => "deer-rabi",
            Command::Epr(_) => "epr",
            Command::Fit(_) => "fit",
            Command::Volume(_) => "volume",
        }
    }
}

/// Parses `args` (program name first), runs, reports errors on stderr and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("nvdeer {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    let common = command.common();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", common.config.display())))?;
    pool.install(|| match command {
        Command::DeerSpectrum(a) => {
            let cfg = parse::<DeerSpectrumConfig>(&text, &a.common.config)?;
            let out = cmd_deer_spectrum(cfg, a.mode, a.seed)?;
            emit(common.out.as_deref(), &out)
        }
        Command::DeerRabi(a) => {
            let cfg = parse::<DeerRabiConfig>(&text, &a.common.config)?;
            let out = cmd_deer_rabi(cfg, a.mode, a.seed)?;
            emit(common.out.as_deref(), &out)
        }
        Command::Epr(_) => {
            let out = cmd_epr(parse(&text, &common.config)?)?;
            emit(common.out.as_deref(), &out)
        }
        Command::Fit(_) => {
            let out_path = common
                .out
                .as_deref()
                .ok_or_else(|| CliError::Config("fit needs --out (the minima report goes next to it)".into()))?;
            let (csv, report) = cmd_fit(parse(&text, &common.config)?)?;
            emit(Some(out_path), &csv)?;
            emit(Some(&minima_path(out_path)), &report)
        }
        Command::Volume(_) => {
            let out = cmd_volume(parse(&text, &common.config)?)?;
            emit(common.out.as_deref(), &out)
        }
    })
}

/// `<out>.minima.json` next to the fit grid.
pub fn minima_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".minima.json");
    PathBuf::from(name)
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, contents).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn csv_header<C: Serialize>(command: &str, config: &C) -> Result<String, CliError> {
    let echo = serde_json::to_string(config).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(format!("# nvdeer {VERSION} {command}\n# config: {echo}\n"))
}

fn json_report<C: Serialize, R: Serialize>(command: &str, config: &C, result: &R) -> Result<String, CliError> {
    let doc = json!({
        "tool": "nvdeer",
        "version": VERSION,
        "command": command,
        "config": config,
        "result": result,
    });
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Evaluates one sweep point in either mode.
struct DeerEvaluator {
    mode: Mode,
    c: f64,
    echo: crate::deer::EchoConfig,
    estimator: Estimator,
    n_c2: EnsembleCoupling,
    bath: Option<SpinBath>,
}

impl DeerEvaluator {
    fn new(shared: &DeerShared<'_>) -> Result<Self, CliError> {
        let mode = shared.mode();
        let echo = shared.echo()?;
        let estimator = shared.estimator()?;
        let (c, n_c2, bath) = match mode {
            Mode::Single => {
                if shared.n_c2.is_some() || shared.bath_size.is_some() {
                    return Err(CliError::Config("`n_c2`/`bath_size` only apply in ensemble mode".into()));
                }
                (shared.prefactor()?, EnsembleCoupling::new(0.0)?, None)
            }
            Mode::Ensemble => {
                if shared.c.is_some() || shared.target.is_some() {
                    return Err(CliError::Config("`c`/`target` only apply in single mode".into()));
                }
                let n_c2 = EnsembleCoupling::new(shared.n_c2()?)?;
                let bath = match (estimator, shared.bath_size) {
                    (Estimator::MonteCarlo { .. }, Some(n)) if n > 0 => Some(SpinBath::uniform(n, n_c2)),
                    (Estimator::MonteCarlo { .. }, _) => {
                        return Err(CliError::Config(
                            "ensemble Monte Carlo needs a positive `bath_size`".into(),
                        ))
                    }
                    (Estimator::Quadrature(_), Some(_)) => {
                        return Err(CliError::Config(
                            "`bath_size` needs the monte_carlo estimator".into(),
                        ))
                    }
                    (Estimator::Quadrature(_), None) => None,
                };
                (0.0, n_c2, bath)
            }
        };
        Ok(DeerEvaluator {
            mode,
            c,
            echo,
            estimator,
            n_c2,
            bath,
        })
    }

    /// Ensemble points in parallel; single-mode sweeps use the library's
    /// parallel drivers.
    fn ensemble(&self, pulses: &[DrivePulse]) -> Result<Vec<DeerSignal>, CliError> {
        let seed = match self.estimator {
            Estimator::MonteCarlo { seed, .. } => seed,
            Estimator::Quadrature(_) => 0,
        };
        pulses
            .par_iter()
            .enumerate()
            .map(|(i, p)| match (&self.bath, self.estimator) {
                (Some(bath), Estimator::MonteCarlo { n_samples, .. }) => {
                    Ok(ensemble_montecarlo_stream(bath, &self.echo, p, n_samples, seed, i as u64)?)
                }
                _ => Ok(ensemble_signal(self.n_c2, p)),
            })
            .collect()
    }

    fn tolerance(&self) -> f64 {
        match self.estimator {
            Estimator::Quadrature(q) => q.tolerance,
            Estimator::MonteCarlo { .. } => f64::INFINITY,
        }
    }
}

fn write_rows(out: &mut String, axis: &[f64], signals: &[DeerSignal], tolerance: f64) {
    for (x, s) in axis.iter().zip(signals) {
        let flag = u8::from(!s.converged || s.est_error > tolerance);
        let _ = writeln!(out, "{},{},{},{flag}", fmt_f64(*x), fmt_f64(s.value), fmt_f64(s.est_error));
    }
}

pub fn cmd_deer_spectrum(mut cfg: DeerSpectrumConfig, mode: Option<Mode>, seed: Option<u64>) -> Result<String, CliError> {
    cfg.resolve(mode, seed);
    let eval = DeerEvaluator::new(&cfg.shared())?;
    let base = cfg.base_pulse()?;
    let (column, axis, detunings) = match cfg.axis()? {
        SweepAxis::Detuning(d) => ("detuning_MHz", d.clone(), d),
        SweepAxis::Frequency(f, res) => {
            let d = f.iter().map(|x| x - res).collect();
            ("freq_MHz", f, d)
        }
    };
    let signals: Vec<DeerSignal> = match eval.mode {
        Mode::Single => deer_spectrum(eval.c, &eval.echo, base.rabi_freq, base.length, &detunings, &eval.estimator)?
            .into_iter()
            .map(|(_, s)| s)
            .collect(),
        Mode::Ensemble => {
            let pulses = detunings
                .iter()
                .map(|&d| base.with_detuning(d))
                .collect::<crate::Result<Vec<_>>>()?;
            eval.ensemble(&pulses)?
        }
    };
    let mut out = csv_header("deer-spectrum", &cfg)?;
    let _ = writeln!(out, "{column},signal,est_error,flag");
    write_rows(&mut out, &axis, &signals, eval.tolerance());
    Ok(out)
}

pub fn cmd_deer_rabi(mut cfg: DeerRabiConfig, mode: Option<Mode>, seed: Option<u64>) -> Result<String, CliError> {
    cfg.resolve(mode, seed);
    let eval = DeerEvaluator::new(&cfg.shared())?;
    let lengths = cfg.pulse_length_us.values("pulse_length_us")?;
    let signals: Vec<DeerSignal> = match eval.mode {
        Mode::Single => deer_rabi(eval.c, &eval.echo, cfg.rabi_mhz, cfg.detuning_mhz, &lengths, &eval.estimator)?
            .into_iter()
            .map(|(_, s)| s)
            .collect(),
        Mode::Ensemble => {
            let pulses = lengths
                .iter()
                .map(|&t| DrivePulse::new(cfg.rabi_mhz, cfg.detuning_mhz, t))
                .collect::<crate::Result<Vec<_>>>()?;
            eval.ensemble(&pulses)?
        }
    };
    let mut out = csv_header("deer-rabi", &cfg)?;
    out.push_str("t_p_us,signal,est_error,flag\n");
    write_rows(&mut out, &lengths, &signals, eval.tolerance());
    Ok(out)
}

pub fn cmd_epr(cfg: EprConfig) -> Result<String, CliError> {
    let sys = cfg.system.build()?;
    let field = cfg.field.build()?;
    let spectrum = transition_spectrum_with(&sys, &field, &cfg.options()?)?;
    let mut out = csv_header("epr", &cfg)?;
    out.push_str("frequency_MHz,intensity\n");
    match &cfg.broadening {
        None => {
            for l in &spectrum.lines {
                let _ = writeln!(out, "{},{}", fmt_f64(l.frequency_mhz), fmt_f64(l.intensity));
            }
        }
        Some(b) => {
            let grid = b.frequency_mhz.values("broadening.frequency_mhz")?;
            let curve = spectrum.broadened(b.fwhm_mhz, &grid)?;
            for (f, v) in grid.iter().zip(curve) {
                let _ = writeln!(out, "{},{}", fmt_f64(*f), fmt_f64(v));
            }
        }
    }
    Ok(out)
}

/// Returns the grid CSV and the JSON minima report.
pub fn cmd_fit(cfg: FitConfig) -> Result<(String, String), CliError> {
    let sys = cfg.system.build()?;
    let peaks = cfg.peaks()?;
    let opts = cfg.options()?;
    let b = cfg.b_grid_g.values("b_grid_g")?;
    if b[0] < 0.0 {
        return Err(CliError::Config("b_grid_g values must be non-negative".into()));
    }
    let theta: Vec<f64> = cfg
        .theta_grid_deg
        .values("theta_grid_deg")?
        .iter()
        .map(|d| d.to_radians())
        .collect();
    let grid = chi2_surface(&sys, &peaks, &b, &theta, &opts)?;
    if grid.minima.is_empty() {
        return Err(CliError::Infeasible(
            "no feasible fit: every grid cell has fewer matchable lines than observed peaks".into(),
        ));
    }
    let mut csv = csv_header("fit", &cfg)?;
    let mut body = Vec::new();
    grid.write_csv(&mut body).map_err(|source| CliError::Io {
        path: PathBuf::from("<buffer>"),
        source,
    })?;
    csv.push_str(&String::from_utf8_lossy(&body));

    let minima = grid
        .minima
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let iv = uncertainty_intervals(&grid, i)?;
            Ok(json!({
                "b_g": m.b,
                "theta_deg": m.theta.to_degrees(),
                "chi2": m.chi2,
                "b_interval_g": [iv.b.lower, iv.b.upper],
                "b_interval_open": [iv.b.lower_open, iv.b.upper_open],
                "theta_interval_deg": [iv.theta.lower.to_degrees(), iv.theta.upper.to_degrees()],
                "theta_interval_open": [iv.theta.lower_open, iv.theta.upper_open],
            }))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let report = json_report("fit", &cfg, &json!({ "minima": minima }))?;
    Ok((csv, report))
}

pub fn cmd_volume(cfg: VolumeConfig) -> Result<String, CliError> {
    let geom = cfg.geometry()?;
    let model = cfg.model()?;
    let nc2 = accumulate_nc2(&geom, &model)?;
    let depth = threshold_depth(geom.spin_density, geom.film_thickness, &model)
        .map_err(|e| CliError::Infeasible(e.to_string()))?;
    let radius = detectability_radius(&geom, &model, cfg.signal_fraction)?;
    let detectable = nc2 >= model.threshold;
    let result = json!({
        "kappa_nm3": model.kappa,
        "kappa_length_nm": model.kappa.cbrt(),
        "spin_density_nm3": geom.spin_density,
        "nc2": nc2,
        "detectable": detectable,
        "threshold_depth_nm": depth,
        "sensing_radius": radius,
    });
    json_report("volume", &cfg, &result)
}
