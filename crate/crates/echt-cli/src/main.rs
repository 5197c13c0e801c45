//! `echt` — command-line harness for the endpoint-corrected Hilbert phase
//! estimator: calibration reports, per-sample estimation, parameter sweeps,
//! Monte Carlo noise tables, the swept-tone replication table, drift
//! tracking and a relative-overhead benchmark.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 degenerate design,
//! 4 I/O error.

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use echt_core::calibration::{
    calibration_report, compute_endpoint_gains, noise_gain, optimal_calibration, NoiseModel,
};
use echt_core::engine::{EchtConfig, EchtProcessor, EchtStream, FilterChoice};
use echt_core::experiments::{
    chirp_replication, drift_experiment, mc_sigma_table, relative_overhead,
    ChirpReplicationParams, DriftParams, McTableParams, SweepPanel, SweepParams,
};
use echt_core::filter::BandpassSpec;
use echt_core::tracker::{TrackedEstimator, TrackerConfig};
use echt_core::EchtError;

const EXIT_CONFIG: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
    fn io(message: impl Into<String>) -> Self {
        Self { code: EXIT_IO, message: message.into() }
    }
}

impl From<EchtError> for CliError {
    fn from(e: EchtError) -> Self {
        let code = match &e {
            EchtError::InvalidArgument(_) | EchtError::Unsupported(_) => EXIT_CONFIG,
            EchtError::DegenerateDesign(_) | EchtError::NonConvergence(_) | EchtError::NoPeak(_) => {
                EXIT_DEGENERATE
            }
            EchtError::Io(_) => EXIT_IO,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "echt", version, about = "Causal instantaneous-phase estimation with endpoint correction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand: a JSON configuration file plus
/// individual overrides applied on top of it.
#[derive(Args, Clone, Debug)]
struct Overrides {
    /// JSON file holding a full estimator configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target tone frequency in Hz.
    #[arg(long)]
    f0: Option<f64>,
    /// Sampling rate in Hz.
    #[arg(long)]
    fs: Option<f64>,
    /// Window length in samples (also used as the DFT length).
    #[arg(long)]
    n: Option<usize>,
    /// Bandpass filter order.
    #[arg(long)]
    order: Option<usize>,
    /// Passband edges as "low,high" in Hz.
    #[arg(long, value_parser = parse_band)]
    band: Option<(f64, f64)>,
    /// Master seed for anything randomised.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected \"low,high\"".into());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| "bad low edge")?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| "bad high edge")?;
    Ok((lo, hi))
}

impl Overrides {
    /// Resolve the estimator configuration: JSON file if given, otherwise
    /// the default single-tone design, with flag overrides applied on top.
    fn build_config(&self) -> CliResult<EchtConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
                serde_json::from_str::<EchtConfig>(&text)
                    .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
            }
            None => EchtConfig::single_tone(
                self.f0.unwrap_or(10.0),
                self.fs.unwrap_or(256.0),
            ),
        };
        if let Some(f0) = self.f0 {
            config.centre_frequency = f0;
        }
        if let Some(fs) = self.fs {
            config.sampling_rate = fs;
        }
        if let Some(n) = self.n {
            config.window_length = n;
            config.dft_length = n;
        }
        if self.order.is_some() || self.band.is_some() {
            let (mut order, mut lo, mut hi) = match &config.filter {
                FilterChoice::Bandpass(spec) => (spec.order, spec.l_freq, spec.h_freq),
                FilterChoice::Identity => {
                    (2, 0.7 * config.centre_frequency, 1.3 * config.centre_frequency)
                }
            };
            if let Some(o) = self.order {
                order = o;
            }
            if let Some((l, h)) = self.band {
                lo = l;
                hi = h;
            }
            config.filter = FilterChoice::Bandpass(BandpassSpec::butterworth(
                order,
                lo,
                hi,
                config.sampling_rate,
            ));
        }
        for warning in config.validate().map_err(CliError::from)? {
            eprintln!("warning: {warning}");
        }
        Ok(config)
    }

    fn writer(&self) -> CliResult<Box<dyn Write>> {
        match &self.out {
            Some(path) => {
                let file = std::fs::File::create(path)
                    .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
                Ok(Box::new(std::io::BufWriter::new(file)))
            }
            None => Ok(Box::new(std::io::stdout().lock())),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form endpoint gains, calibration factor and noise figures as
    /// a JSON report.
    Calibrate {
        #[command(flatten)]
        overrides: Overrides,
        /// Input SNR for a noise-aware calibration; omit for noiseless.
        #[arg(long)]
        snr: Option<f64>,
    },
    /// Stream a recorded signal and write per-sample phase estimates.
    Estimate {
        #[command(flatten)]
        overrides: Overrides,
        /// Input file: `.bin` (little-endian f64) or text with one value
        /// per line.
        #[arg(long)]
        input: PathBuf,
        /// Re-estimate the carrier frequency while streaming.
        #[arg(long)]
        tracked: bool,
    },
    /// Error-vs-parameter curves for the raw and calibrated estimators.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        /// Panels to run: bandwidth, order, detuning, snr, family,
        /// window-cycles (or a..f), comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        panel: Vec<String>,
    },
    /// Monte Carlo phase standard deviation vs SNR, against the simple and
    /// exact closed forms.
    McTable {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
    },
    /// Phase/amplitude error table on a slow frequency sweep with
    /// re-centred filters.
    ChirpReplication {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        duration: Option<f64>,
        /// Evaluate every k-th window.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Fixed vs frequency-tracked estimation on a drifting tone.
    TrackDrift {
        #[command(flatten)]
        overrides: Overrides,
        /// Total frequency change over the run, Hz (signed).
        #[arg(long, allow_hyphen_values = true)]
        drift: Option<f64>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Per-window wall time against a plain DFT Hilbert transform.
    Bench {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_delimiter = ',', default_values_t = [256usize, 1024, 16384])]
        windows: Vec<usize>,
    },
}

fn manifest_line(command: &str, params: &serde_json::Value) -> String {
    let manifest = json!({
        "tool": "echt",
        "version": env!("CARGO_PKG_VERSION"),
        "schema": 1,
        "command": command,
        "params": params,
    });
    format!("# manifest: {manifest}")
}

fn main() -> ExitCode {
    if let Ok(value) = std::env::var("ECHT_THREADS") {
        match value.parse::<usize>() {
            Ok(k) if k > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            _ => {
                eprintln!("error: ECHT_THREADS must be a positive integer, got '{value}'");
                return ExitCode::from(EXIT_CONFIG);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Calibrate { overrides, snr } => cmd_calibrate(&overrides, snr),
        Command::Estimate { overrides, input, tracked } => {
            cmd_estimate(&overrides, &input, tracked)
        }
        Command::Sweep { overrides, panel } => cmd_sweep(&overrides, &panel),
        Command::McTable { overrides, trials } => cmd_mc_table(&overrides, trials),
        Command::ChirpReplication { overrides, duration, stride } => {
            cmd_chirp(&overrides, duration, stride)
        }
        Command::TrackDrift { overrides, drift, duration } => {
            cmd_track_drift(&overrides, drift, duration)
        }
        Command::Bench { overrides, windows } => cmd_bench(&overrides, &windows),
    }
}

fn cmd_calibrate(overrides: &Overrides, snr: Option<f64>) -> CliResult<()> {
    let config = overrides.build_config()?;
    let gains = compute_endpoint_gains(&config)?;
    let g_noise = noise_gain(&config)?;
    let noise_model = match snr {
        Some(s) if s > 0.0 => Some(NoiseModel::from_parts(&config, &gains, 1.0 / s)?),
        Some(s) => return Err(CliError::config(format!("--snr must be positive, got {s}"))),
        None => None,
    };
    let cal = optimal_calibration(&gains, noise_model.as_ref())?;
    let report = calibration_report(&gains, &cal, g_noise, overrides.seed);
    let mut out = overrides.writer()?;
    serde_json::to_writer_pretty(&mut out, &report)
        .map_err(|e| CliError::io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn read_signal(path: &Path) -> CliResult<Vec<f64>> {
    if path.extension().and_then(|e| e.to_str()) == Some("bin") {
        return Ok(echt_core::siglab::load_binary(path)?);
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) => samples.push(v),
            // Tolerate one non-numeric header row.
            Err(_) if lineno == 0 => continue,
            Err(_) => {
                return Err(CliError::io(format!(
                    "{}:{}: '{field}' is not a number",
                    path.display(),
                    lineno + 1
                )));
            }
        }
    }
    if samples.is_empty() {
        return Err(CliError::io(format!("{}: no samples found", path.display())));
    }
    Ok(samples)
}

fn cmd_estimate(overrides: &Overrides, input: &Path, tracked: bool) -> CliResult<()> {
    let mut config = overrides.build_config()?;
    let samples = read_signal(input)?;
    let mut out = overrides.writer()?;
    let params = json!({
        "input": input.display().to_string(),
        "tracked": tracked,
        "config": &config,
        "seed": overrides.seed,
    });
    writeln!(out, "{}", manifest_line("estimate", &params))?;
    writeln!(out, "index,phase_deg,amplitude,f0_hz_active")?;
    if tracked {
        let mut estimator =
            TrackedEstimator::new(config, TrackerConfig::default(), true)?;
        for (i, &v) in samples.iter().enumerate() {
            if let Some(est) = estimator.push(v) {
                writeln!(
                    out,
                    "{i},{:.6},{:.6},{:.4}",
                    est.phase.to_degrees(),
                    est.amplitude,
                    estimator.current_f0()
                )?;
            }
        }
    } else {
        let gains = compute_endpoint_gains(&config)?;
        config.calibration = Some(optimal_calibration(&gains, None)?);
        let f0 = config.centre_frequency;
        let mut stream = EchtStream::from_processor(EchtProcessor::new(config)?);
        for (i, &v) in samples.iter().enumerate() {
            if let Some(est) = stream.push(v) {
                writeln!(
                    out,
                    "{i},{:.6},{:.6},{:.4}",
                    est.phase.to_degrees(),
                    est.amplitude,
                    f0
                )?;
            }
        }
    }
    Ok(())
}

fn cmd_sweep(overrides: &Overrides, panel_names: &[String]) -> CliResult<()> {
    let panels: Vec<SweepPanel> = panel_names
        .iter()
        .map(|p| SweepPanel::parse(p))
        .collect::<Result<_, _>>()
        .map_err(CliError::from)?;
    let params = SweepParams {
        f0: overrides.f0.unwrap_or(10.0),
        sampling_rate: overrides.fs.unwrap_or(256.0),
        seed: overrides.seed,
        ..SweepParams::default()
    };
    // Panels run in the worker pool; results are written in request order.
    let results: Vec<_> = panels
        .par_iter()
        .map(|&p| echt_core::experiments::sweep(p, &params))
        .collect();
    let mut out = overrides.writer()?;
    for (panel, result) in panels.iter().zip(results) {
        let rows = result?;
        let meta = json!({ "panel": panel, "f0": params.f0, "fs": params.sampling_rate,
            "phi0_points": params.phi0_points, "noise_trials": params.noise_trials,
            "seed": params.seed });
        writeln!(out, "{}", manifest_line("sweep", &meta))?;
        writeln!(out, "axis_value,label,echt_mean_deg,echt_std_deg,cecht_mean_deg,cecht_std_deg,seed")?;
        for r in rows {
            writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{}",
                r.axis_value, r.label, r.echt_mean_deg, r.echt_std_deg, r.cecht_mean_deg,
                r.cecht_std_deg, r.seed
            )?;
        }
    }
    Ok(())
}

fn cmd_mc_table(overrides: &Overrides, trials: usize) -> CliResult<()> {
    let params = McTableParams { trials, seed: overrides.seed, ..McTableParams::default() };
    let rows = mc_sigma_table(&params)?;
    let mut out = overrides.writer()?;
    let meta = serde_json::to_value(&params).map_err(|e| CliError::io(e.to_string()))?;
    writeln!(out, "{}", manifest_line("mc-table", &meta))?;
    writeln!(out, "snr,mc_sigma_deg,simple_sigma_deg,exact_sigma_deg,residual_mse")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.6e}",
            r.snr, r.mc_sigma_deg, r.simple_sigma_deg, r.exact_sigma_deg, r.residual_mse
        )?;
    }
    Ok(())
}

fn cmd_chirp(
    overrides: &Overrides,
    duration: Option<f64>,
    stride: Option<usize>,
) -> CliResult<()> {
    let mut params = ChirpReplicationParams { seed: overrides.seed, ..Default::default() };
    if let Some(d) = duration {
        params.duration_s = d;
    }
    if let Some(s) = stride {
        params.stride = s;
    }
    if let Some(n) = overrides.n {
        params.window_length = n;
    }
    if let Some(order) = overrides.order {
        params.filter_order = order;
    }
    if let Some(fs) = overrides.fs {
        params.sampling_rate = fs;
    }
    let result = chirp_replication(&params)?;
    let mut out = overrides.writer()?;
    let meta = serde_json::to_value(&params).map_err(|e| CliError::io(e.to_string()))?;
    writeln!(out, "{}", manifest_line("chirp-replication", &meta))?;
    writeln!(
        out,
        "estimator,phase_mean_deg,phase_std_deg,phase_max_deg,amp_mean_pct,amp_std_pct,amp_max_pct"
    )?;
    for (name, row) in [("echt", &result.echt), ("cecht", &result.cecht)] {
        writeln!(
            out,
            "{name},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            row.phase_mean_deg, row.phase_std_deg, row.phase_max_deg, row.amp_mean_pct,
            row.amp_std_pct, row.amp_max_pct
        )?;
    }
    Ok(())
}

fn cmd_track_drift(
    overrides: &Overrides,
    drift: Option<f64>,
    duration: Option<f64>,
) -> CliResult<()> {
    let mut params = DriftParams { seed: overrides.seed, ..Default::default() };
    if let Some(d) = drift {
        params.drift_hz = d;
    }
    if let Some(d) = duration {
        params.duration_s = d;
    }
    if let Some(f0) = overrides.f0 {
        params.f0 = f0;
    }
    if let Some(fs) = overrides.fs {
        params.sampling_rate = fs;
    }
    if let Some(n) = overrides.n {
        params.window_length = n;
    }
    if let Some(order) = overrides.order {
        params.filter_order = order;
    }
    let result = drift_experiment(&params)?;
    let mut out = overrides.writer()?;
    let meta = serde_json::to_value(&params).map_err(|e| CliError::io(e.to_string()))?;
    writeln!(out, "{}", manifest_line("track-drift", &meta))?;
    writeln!(
        out,
        "condition,mean_abs_deg,circular_mean_deg,circular_std_deg,max_abs_deg,plv,pli,n"
    )?;
    for c in &result.conditions {
        let s = &c.stats;
        writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4},{:.6},{:.6},{}",
            c.name,
            s.mean_abs.to_degrees(),
            s.circular_mean.to_degrees(),
            s.circular_std.to_degrees(),
            s.max_abs.to_degrees(),
            s.plv,
            s.pli,
            s.n
        )?;
    }
    writeln!(out, "# tracker events: {}", result.events.len())?;
    for e in &result.events {
        writeln!(
            out,
            "# t={:.1}s f0={:.4}Hz retuned={} alpha={:.3}deg",
            e.time_s, e.f0_hz, e.retuned, e.alpha_deg
        )?;
    }
    Ok(())
}

fn cmd_bench(overrides: &Overrides, windows: &[usize]) -> CliResult<()> {
    let rows = relative_overhead(windows)?;
    let mut out = overrides.writer()?;
    let meta = json!({ "windows": windows });
    writeln!(out, "{}", manifest_line("bench", &meta))?;
    writeln!(out, "window_length,plain_hilbert_us,echt_full_us,echt_endpoint_us,overhead_ratio")?;
    for r in &rows {
        writeln!(
            out,
            "{},{:.3},{:.3},{:.3},{:.3}",
            r.window_length, r.plain_hilbert_us, r.echt_full_us, r.echt_endpoint_us,
            r.overhead_ratio
        )?;
    }
    writeln!(
        out,
        "# absolute times are machine specific; the overhead ratio is the portable figure"
    )?;
    Ok(())
}
