//! Reproducible experiment drivers shared by the CLI and the acceptance
//! suite: the chirp-replication error table, the Monte Carlo phase-sigma
//! table, single-tone parameter sweeps, the drift-tracking comparison and a
//! relative-overhead benchmark.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::calibration::{
    compute_endpoint_gains, endpoint_gain_f, endpoint_gains_at, endpoint_gains_from_response,
    optimal_calibration, NoiseModel,
};
use crate::engine::{EchtConfig, EchtProcessor, EchtStream, FilterChoice};
use crate::error::{EchtError, Result};
use crate::filter::{BandpassSpec, FilterFamily};
use crate::siglab::{synthesize, SignalKind, SignalSpec};
use crate::stats::{summarize_errors, wrap, ErrorStats};
use crate::tracker::{TrackedEstimator, TrackerConfig, TrackerEvent};

fn derived_seed(seed: u64, index: u64) -> u64 {
    // SplitMix64 step: decorrelates per-trial streams from one master seed.
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Chirp replication.
// ---------------------------------------------------------------------------

/// Parameters of the swept-tone error-table experiment. A slow 2 -> 3 Hz
/// sweep at Fs = 256 with N = 256 windows; the bandpass is re-centred on the
/// instantaneous frequency from a fixed grid of pre-designed filters, and
/// the calibration is evaluated analytically per window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChirpReplicationParams {
    pub sampling_rate: f64,
    pub window_length: usize,
    pub f_start: f64,
    pub f_end: f64,
    pub duration_s: f64,
    pub filter_order: usize,
    pub band_ratios: (f64, f64),
    /// Number of pre-designed filters spanning [f_start, f_end].
    pub filter_grid: usize,
    /// Evaluate every `stride`-th window (1 = per sample).
    pub stride: usize,
    pub seed: u64,
}

impl Default for ChirpReplicationParams {
    fn default() -> Self {
        Self {
            sampling_rate: 256.0,
            window_length: 256,
            f_start: 2.0,
            f_end: 3.0,
            duration_s: 180.0,
            filter_order: 2,
            band_ratios: (0.75, 1.25),
            filter_grid: 101,
            stride: 1,
            seed: 0,
        }
    }
}

/// One row of an error table: phase error in degrees, amplitude error in
/// percent of the true amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub phase_mean_deg: f64,
    pub phase_std_deg: f64,
    pub phase_max_deg: f64,
    pub amp_mean_pct: f64,
    pub amp_std_pct: f64,
    pub amp_max_pct: f64,
}

fn error_row(phase_abs: &[f64], amp_abs: &[f64]) -> ErrorRow {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let std = |v: &[f64], m: f64| {
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let max = |v: &[f64]| v.iter().cloned().fold(0.0f64, f64::max);
    let (pm, am) = (mean(phase_abs), mean(amp_abs));
    ErrorRow {
        phase_mean_deg: pm,
        phase_std_deg: std(phase_abs, pm),
        phase_max_deg: max(phase_abs),
        amp_mean_pct: am,
        amp_std_pct: std(amp_abs, am),
        amp_max_pct: max(amp_abs),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChirpReplicationResult {
    pub echt: ErrorRow,
    pub cecht: ErrorRow,
    pub windows: usize,
}

pub fn chirp_replication(params: &ChirpReplicationParams) -> Result<ChirpReplicationResult> {
    if params.filter_grid < 2 || params.stride == 0 {
        return Err(EchtError::InvalidArgument(
            "filter grid needs at least 2 points and a positive stride".into(),
        ));
    }
    let fs = params.sampling_rate;
    let n = params.window_length;
    let spec = SignalSpec {
        kind: SignalKind::LinearChirp { f_start: params.f_start, f_end: params.f_end },
        amplitude: 1.0,
        initial_phase: 0.0,
        duration_s: params.duration_s,
        sampling_rate: fs,
        snr_in: None,
        seed: params.seed,
    };
    let (x, truth) = synthesize(&spec)?;
    if x.len() < n {
        return Err(EchtError::InvalidArgument("signal shorter than one window".into()));
    }

    // Pre-design the filter grid and cache each effective response.
    let (rl, rh) = params.band_ratios;
    let mut processors = Vec::with_capacity(params.filter_grid);
    for g in 0..params.filter_grid {
        let centre = params.f_start
            + (params.f_end - params.f_start) * g as f64 / (params.filter_grid - 1) as f64;
        let config = EchtConfig {
            window_length: n,
            dft_length: n,
            sampling_rate: fs,
            centre_frequency: centre,
            filter: FilterChoice::Bandpass(BandpassSpec::butterworth(
                params.filter_order,
                rl * centre,
                rh * centre,
                fs,
            )),
            calibration: None,
        };
        processors.push(EchtProcessor::new(config)?);
    }
    let grid_centre = |g: usize| {
        params.f_start + (params.f_end - params.f_start) * g as f64 / (params.filter_grid - 1) as f64
    };
    let nearest_grid = |f: f64| -> usize {
        let t = (f - params.f_start) / (params.f_end - params.f_start);
        ((t * (params.filter_grid - 1) as f64).round() as isize)
            .clamp(0, params.filter_grid as isize - 1) as usize
    };
    let _ = grid_centre;

    let mut echt_phase = Vec::new();
    let mut echt_amp = Vec::new();
    let mut cecht_phase = Vec::new();
    let mut cecht_amp = Vec::new();
    let mut window = vec![0.0; n];
    let mut end = n - 1;
    while end < x.len() {
        window.copy_from_slice(&x[end + 1 - n..=end]);
        let f_inst = spec.kind.frequency_at(end as f64 / fs, params.duration_s);
        let proc = &processors[nearest_grid(f_inst)];
        let z = proc.endpoint_raw(&window)?;
        // Analytic calibration of the selected filter, evaluated at the
        // actual instantaneous frequency (not the grid centre).
        let omega = 2.0 * PI * f_inst / fs;
        let (g_plus, g_minus) = endpoint_gains_from_response(proc.effective_response(), n, omega);
        let denom = g_plus.norm_sqr() + g_minus.norm_sqr();
        if denom < 1e-24 {
            return Err(EchtError::DegenerateDesign("filter grid removes the chirp".into()));
        }
        let c = g_plus.conj() / denom;
        let zc = c * z;
        let theta = truth.theta[end];
        echt_phase.push(wrap(z.arg() - theta).abs().to_degrees());
        echt_amp.push((z.norm() - 1.0).abs() * 100.0);
        cecht_phase.push(wrap(zc.arg() - theta).abs().to_degrees());
        cecht_amp.push((zc.norm() - 1.0).abs() * 100.0);
        end += params.stride;
    }
    Ok(ChirpReplicationResult {
        echt: error_row(&echt_phase, &echt_amp),
        cecht: error_row(&cecht_phase, &cecht_amp),
        windows: echt_phase.len(),
    })
}

// ---------------------------------------------------------------------------
// Monte Carlo phase-sigma table.
// ---------------------------------------------------------------------------

/// Reference configuration for the noise table: a design with SNR gain
/// G_SNR ~ 10.9 and negligible leakage, so the residual MSE is essentially
/// 1/SNR_out.
pub fn mc_reference_config() -> EchtConfig {
    EchtConfig {
        window_length: 51,
        dft_length: 51,
        sampling_rate: 256.0,
        centre_frequency: 10.0,
        filter: FilterChoice::Bandpass(BandpassSpec::butterworth(2, 7.3, 12.7, 256.0)),
        calibration: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McTableParams {
    pub trials: usize,
    pub snrs: Vec<f64>,
    pub seed: u64,
}

impl Default for McTableParams {
    fn default() -> Self {
        Self { trials: 100_000, snrs: vec![0.1, 1.0, 10.0, 100.0], seed: 20_240_613 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub snr: f64,
    pub residual_mse: f64,
    pub mc_sigma_deg: f64,
    pub exact_sigma_deg: f64,
    pub simple_sigma_deg: f64,
}

pub fn mc_sigma_table(params: &McTableParams) -> Result<Vec<McRow>> {
    if params.trials < 10_000 {
        return Err(EchtError::InvalidArgument("need at least 1e4 trials".into()));
    }
    let config = mc_reference_config();
    let proc = EchtProcessor::new(config.clone())?;
    let gains = compute_endpoint_gains(&config)?;
    let cal = optimal_calibration(&gains, None)?; // deterministic C_det
    let ell = cal.residual_mse;
    let noise_unit = NoiseModel::for_config(&config, 1.0)?;
    let g_snr = noise_unit.snr_gain;
    let n = config.window_length;
    let omega0 = config.omega0();
    let true_endpoint_phase = |phi0: f64| omega0 * (n as f64 - 1.0) + phi0;

    let mut rows = Vec::with_capacity(params.snrs.len());
    for (row_idx, &snr) in params.snrs.iter().enumerate() {
        let sigma_eta = (1.0 / snr).sqrt();
        let mut sum_sq = 0.0;
        let mut window = vec![0.0; n];
        for trial in 0..params.trials {
            // Per-row stride independent of the trial count, so doubling
            // `trials` extends each row's sample rather than reseeding it.
            let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(
                params.seed,
                (row_idx as u64) << 40 | trial as u64,
            ));
            let phi0 = rng.gen_range(-PI..PI);
            let normal = rand_distr::Normal::new(0.0, sigma_eta).unwrap();
            for (m, w) in window.iter_mut().enumerate() {
                *w = (omega0 * m as f64 + phi0).cos() + rng.sample(normal);
            }
            let z = cal.c * proc.endpoint_raw(&window)?;
            let err = wrap(z.arg() - true_endpoint_phase(phi0));
            sum_sq += err * err;
        }
        let j = ell + (1.0 - ell) / (g_snr * snr);
        rows.push(McRow {
            snr,
            residual_mse: j,
            mc_sigma_deg: (sum_sq / params.trials as f64).sqrt().to_degrees(),
            exact_sigma_deg: crate::calibration::phase_sigma_exact(j)?.to_degrees(),
            simple_sigma_deg: crate::calibration::phase_sigma_simple(j).to_degrees(),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Single-tone parameter sweeps.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepPanel {
    Bandwidth,
    Order,
    Detuning,
    Snr,
    Family,
    WindowCycles,
}

impl SweepPanel {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "a" | "bandwidth" => Ok(Self::Bandwidth),
            "b" | "order" => Ok(Self::Order),
            "c" | "detuning" => Ok(Self::Detuning),
            "d" | "snr" => Ok(Self::Snr),
            "e" | "family" => Ok(Self::Family),
            "f" | "window-cycles" | "window_cycles" => Ok(Self::WindowCycles),
            other => Err(EchtError::InvalidArgument(format!("unknown sweep panel '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub label: String,
    pub echt_mean_deg: f64,
    pub echt_std_deg: f64,
    pub cecht_mean_deg: f64,
    pub cecht_std_deg: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub f0: f64,
    pub sampling_rate: f64,
    pub phi0_points: usize,
    pub noise_trials: usize,
    pub seed: u64,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self { f0: 10.0, sampling_rate: 256.0, phi0_points: 360, noise_trials: 2000, seed: 7 }
    }
}

/// Bias magnitude and dispersion of the signed phase error (degrees) over a
/// uniform phi0 grid for the raw and calibrated estimators, from the
/// deterministic gain formula. The mean is |mean signed error| so that it
/// isolates the removable bias; the phi0-dependent ripple shows up in the
/// std column.
fn signed_error_stats(errors_deg: &[f64]) -> (f64, f64) {
    let n = errors_deg.len() as f64;
    let mean = errors_deg.iter().sum::<f64>() / n;
    let var = errors_deg.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean.abs(), var.sqrt())
}

fn phi0_grid_errors(
    gains: &crate::calibration::EndpointGains,
    c: Complex64,
    points: usize,
) -> (f64, f64, f64, f64) {
    let mut raw = Vec::with_capacity(points);
    let mut cal = Vec::with_capacity(points);
    for i in 0..points {
        let phi0 = -PI + 2.0 * PI * i as f64 / points as f64;
        let f = endpoint_gain_f(gains, phi0);
        raw.push(f.arg().to_degrees());
        cal.push((c * f).arg().to_degrees());
    }
    let (rm, rs) = signed_error_stats(&raw);
    let (cm, cs) = signed_error_stats(&cal);
    (rm, rs, cm, cs)
}

fn sweep_row_from_config(
    config: &EchtConfig,
    axis_value: f64,
    label: &str,
    points: usize,
    seed: u64,
) -> Result<SweepRow> {
    let gains = compute_endpoint_gains(config)?;
    let cal = optimal_calibration(&gains, None)?;
    let (em, es, cm, cs) = phi0_grid_errors(&gains, cal.c, points);
    Ok(SweepRow {
        axis_value,
        label: label.to_string(),
        echt_mean_deg: em,
        echt_std_deg: es,
        cecht_mean_deg: cm,
        cecht_std_deg: cs,
        seed,
    })
}

pub fn sweep(panel: SweepPanel, params: &SweepParams) -> Result<Vec<SweepRow>> {
    let (f0, fs) = (params.f0, params.sampling_rate);
    let points = params.phi0_points;
    let mut rows = Vec::new();
    match panel {
        SweepPanel::Bandwidth => {
            for i in 0..19 {
                let rel = 0.1 + 0.05 * i as f64;
                let mut config = EchtConfig::single_tone(f0, fs);
                config.filter = FilterChoice::Bandpass(BandpassSpec::butterworth(
                    2,
                    f0 * (1.0 - rel / 2.0),
                    f0 * (1.0 + rel / 2.0),
                    fs,
                ));
                rows.push(sweep_row_from_config(&config, rel, "", points, params.seed)?);
            }
        }
        SweepPanel::Order => {
            for order in 1..=8usize {
                let mut config = EchtConfig::single_tone(f0, fs);
                config.filter = FilterChoice::Bandpass(BandpassSpec::butterworth(
                    order,
                    0.7 * f0,
                    1.3 * f0,
                    fs,
                ));
                rows.push(sweep_row_from_config(&config, order as f64, "", points, params.seed)?);
            }
        }
        SweepPanel::Detuning => {
            let config = EchtConfig::single_tone(f0, fs);
            let gains0 = compute_endpoint_gains(&config)?;
            let c0 = optimal_calibration(&gains0, None)?.c;
            // +/-2% relative detuning: within this range the bias follows
            // the group-delay law and calibration at the assumed centre
            // still helps; far beyond it the raw bias self-cancels.
            for i in 0..21 {
                let d = -0.02 + 0.002 * i as f64;
                let omega = config.omega0() * (1.0 + d);
                let gains = endpoint_gains_at(&config, omega)?;
                let (em, es, cm, cs) = phi0_grid_errors(&gains, c0, points);
                rows.push(SweepRow {
                    axis_value: d,
                    label: String::new(),
                    echt_mean_deg: em,
                    echt_std_deg: es,
                    cecht_mean_deg: cm,
                    cecht_std_deg: cs,
                    seed: params.seed,
                });
            }
        }
        SweepPanel::Snr => {
            let config = EchtConfig::single_tone(f0, fs);
            let proc = EchtProcessor::new(config.clone())?;
            let gains = compute_endpoint_gains(&config)?;
            let c = optimal_calibration(&gains, None)?.c;
            let n = config.window_length;
            let omega0 = config.omega0();
            for (si, &snr) in [0.5f64, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0].iter().enumerate() {
                let sigma_eta = (1.0 / snr).sqrt();
                let mut raw = Vec::with_capacity(params.noise_trials);
                let mut cal = Vec::with_capacity(params.noise_trials);
                let mut window = vec![0.0; n];
                for trial in 0..params.noise_trials {
                    let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(
                        params.seed,
                        (1_000_000 + si * params.noise_trials + trial) as u64,
                    ));
                    let phi0 = rng.gen_range(-PI..PI);
                    let normal = rand_distr::Normal::new(0.0, sigma_eta).unwrap();
                    for (m, w) in window.iter_mut().enumerate() {
                        *w = (omega0 * m as f64 + phi0).cos() + rng.sample(normal);
                    }
                    let z = proc.endpoint_raw(&window)?;
                    let truth = omega0 * (n as f64 - 1.0) + phi0;
                    raw.push(wrap(z.arg() - truth).to_degrees());
                    cal.push(wrap((c * z).arg() - truth).to_degrees());
                }
                let (rm, rs) = signed_error_stats(&raw);
                let (cm, cs) = signed_error_stats(&cal);
                rows.push(SweepRow {
                    axis_value: snr,
                    label: String::new(),
                    echt_mean_deg: rm,
                    echt_std_deg: rs,
                    cecht_mean_deg: cm,
                    cecht_std_deg: cs,
                    seed: params.seed,
                });
            }
        }
        SweepPanel::Family => {
            for (i, family) in
                [FilterFamily::Butterworth, FilterFamily::Chebyshev1, FilterFamily::Chebyshev2]
                    .iter()
                    .enumerate()
            {
                let mut config = EchtConfig::single_tone(f0, fs);
                config.filter = FilterChoice::Bandpass(BandpassSpec {
                    family: *family,
                    order: 2,
                    l_freq: 0.7 * f0,
                    h_freq: 1.3 * f0,
                    sampling_rate: fs,
                    passband_ripple_db: Some(1.0),
                    stopband_atten_db: Some(30.0),
                });
                rows.push(sweep_row_from_config(
                    &config,
                    i as f64,
                    family.name(),
                    points,
                    params.seed,
                )?);
            }
        }
        SweepPanel::WindowCycles => {
            for i in 0..11 {
                let cycles = 1.5 + 0.25 * i as f64;
                let n = (cycles * fs / f0).round() as usize;
                let mut config = EchtConfig::single_tone(f0, fs);
                config.window_length = n;
                config.dft_length = n;
                rows.push(sweep_row_from_config(&config, cycles, "", points, params.seed)?);
            }
        }
    }
    Ok(rows)
}

/// A broad grid of valid designs (varying f0, order, bandwidth and window
/// cycles) used by bound-checking suites.
pub fn design_sweep_configs() -> Vec<EchtConfig> {
    let fs = 256.0;
    let mut configs = Vec::new();
    for &f0 in &[5.0f64, 8.0, 10.0, 16.0] {
        for order in [1usize, 2, 3, 4] {
            for &rel in &[0.3f64, 0.5, 0.7, 1.0] {
                for &cycles in &[1.8f64, 2.1, 2.6, 3.2] {
                    let n = (cycles * fs / f0).round() as usize;
                    let config = EchtConfig {
                        window_length: n,
                        dft_length: n,
                        sampling_rate: fs,
                        centre_frequency: f0,
                        filter: FilterChoice::Bandpass(BandpassSpec::butterworth(
                            order,
                            f0 * (1.0 - rel / 2.0),
                            f0 * (1.0 + rel / 2.0),
                            fs,
                        )),
                        calibration: None,
                    };
                    if config.validate().is_ok() {
                        configs.push(config);
                    }
                }
            }
        }
    }
    configs
}

// ---------------------------------------------------------------------------
// Drift tracking.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    pub f0: f64,
    pub sampling_rate: f64,
    pub window_length: usize,
    pub filter_order: usize,
    pub band_ratios: (f64, f64),
    /// Total linear frequency change over the duration (signed).
    pub drift_hz: f64,
    pub duration_s: f64,
    pub snr_in: Option<f64>,
    pub seed: u64,
    pub tracker: TrackerConfig,
}

impl Default for DriftParams {
    fn default() -> Self {
        Self {
            f0: 10.0,
            sampling_rate: 256.0,
            window_length: 256,
            filter_order: 2,
            band_ratios: (0.75, 1.25),
            drift_hz: -0.3,
            duration_s: 120.0,
            snr_in: None,
            seed: 11,
            tracker: TrackerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftCondition {
    pub name: String,
    pub stats: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftResult {
    /// fixed_echt, fixed_cecht, tracked_echt, tracked_cecht.
    pub conditions: Vec<DriftCondition>,
    pub events: Vec<TrackerEvent>,
}

impl DriftResult {
    pub fn condition(&self, name: &str) -> Option<&ErrorStats> {
        self.conditions.iter().find(|c| c.name == name).map(|c| &c.stats)
    }
}

pub fn drift_experiment(params: &DriftParams) -> Result<DriftResult> {
    let fs = params.sampling_rate;
    let spec = SignalSpec {
        kind: SignalKind::DriftingTone { f0: params.f0, drift_hz: params.drift_hz },
        amplitude: 1.0,
        initial_phase: 0.0,
        duration_s: params.duration_s,
        sampling_rate: fs,
        snr_in: params.snr_in,
        seed: params.seed,
    };
    let (x, truth) = synthesize(&spec)?;
    let base = EchtConfig {
        window_length: params.window_length,
        dft_length: params.window_length,
        sampling_rate: fs,
        centre_frequency: params.f0,
        filter: FilterChoice::Bandpass(BandpassSpec::butterworth(
            params.filter_order,
            params.band_ratios.0 * params.f0,
            params.band_ratios.1 * params.f0,
            fs,
        )),
        calibration: None,
    };
    let gains = compute_endpoint_gains(&base)?;
    let c_fixed = optimal_calibration(&gains, None)?.c;

    let fixed = EchtProcessor::new(base.clone())?;
    let mut fixed_stream = EchtStream::from_processor(fixed);
    let mut tracked_raw = TrackedEstimator::new(base.clone(), params.tracker, false)?;
    let mut tracked_cal = TrackedEstimator::new(base, params.tracker, true)?;

    let mut e_fixed_raw = Vec::new();
    let mut e_fixed_cal = Vec::new();
    let mut e_tracked_raw = Vec::new();
    let mut e_tracked_cal = Vec::new();
    for (i, &v) in x.iter().enumerate() {
        let theta = truth.theta[i];
        if let Some(est) = fixed_stream.push(v) {
            e_fixed_raw.push(wrap(est.phase - theta));
            let zc = c_fixed * est.analytic;
            e_fixed_cal.push(wrap(zc.im.atan2(zc.re) - theta));
        }
        if let Some(est) = tracked_raw.push(v) {
            e_tracked_raw.push(wrap(est.phase - theta));
        }
        if let Some(est) = tracked_cal.push(v) {
            e_tracked_cal.push(wrap(est.phase - theta));
        }
    }
    let conditions = vec![
        DriftCondition { name: "fixed_echt".into(), stats: summarize_errors(&e_fixed_raw)? },
        DriftCondition { name: "fixed_cecht".into(), stats: summarize_errors(&e_fixed_cal)? },
        DriftCondition { name: "tracked_echt".into(), stats: summarize_errors(&e_tracked_raw)? },
        DriftCondition { name: "tracked_cecht".into(), stats: summarize_errors(&e_tracked_cal)? },
    ];
    Ok(DriftResult { conditions, events: tracked_cal.events().to_vec() })
}

// ---------------------------------------------------------------------------
// Relative-overhead benchmark.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub window_length: usize,
    pub plain_hilbert_us: f64,
    pub echt_full_us: f64,
    pub echt_endpoint_us: f64,
    /// echt_full / plain_hilbert.
    pub overhead_ratio: f64,
}

fn time_per_call<F: FnMut()>(mut f: F, reps: usize) -> f64 {
    // Warm up, then take the median of 5 batches.
    f();
    let mut batches = Vec::with_capacity(5);
    for _ in 0..5 {
        let t0 = std::time::Instant::now();
        for _ in 0..reps {
            f();
        }
        batches.push(t0.elapsed().as_secs_f64() / reps as f64 * 1e6);
    }
    batches.sort_by(|a, b| a.partial_cmp(b).unwrap());
    batches[2]
}

/// Wall-time comparison of the plain DFT Hilbert transform (analytic mask
/// only, full inverse) against the filtered transform and its endpoint-only
/// path, per window.
pub fn relative_overhead(window_lengths: &[usize]) -> Result<Vec<BenchRow>> {
    let fs = 256.0;
    let mut rows = Vec::new();
    for &n in window_lengths {
        if n < 32 {
            return Err(EchtError::InvalidArgument("benchmark windows must be >= 32".into()));
        }
        // Keep ~16 cycles in every window regardless of N.
        let f0 = (16.0 * fs / n as f64).clamp(0.5, 100.0);
        let plain_config = EchtConfig {
            window_length: n,
            dft_length: n,
            sampling_rate: fs,
            centre_frequency: f0,
            filter: FilterChoice::Identity,
            calibration: None,
        };
        let mut echt_config = plain_config.clone();
        echt_config.filter =
            FilterChoice::Bandpass(BandpassSpec::butterworth(2, 0.7 * f0, 1.3 * f0, fs));
        let plain = EchtProcessor::new(plain_config)?;
        let echt = EchtProcessor::new(echt_config)?;
        let x: Vec<f64> = (0..n).map(|m| (2.0 * PI * f0 * m as f64 / fs).cos()).collect();
        let reps = (1 << 21) / n;
        let t_plain = time_per_call(
            || {
                std::hint::black_box(plain.transform_window(std::hint::black_box(&x)).unwrap());
            },
            reps,
        );
        let t_full = time_per_call(
            || {
                std::hint::black_box(echt.transform_window(std::hint::black_box(&x)).unwrap());
            },
            reps,
        );
        let t_endpoint = time_per_call(
            || {
                std::hint::black_box(echt.endpoint_raw(std::hint::black_box(&x)).unwrap());
            },
            reps,
        );
        rows.push(BenchRow {
            window_length: n,
            plain_hilbert_us: t_plain,
            echt_full_us: t_full,
            echt_endpoint_us: t_endpoint,
            overhead_ratio: t_full / t_plain,
        });
    }
    Ok(rows)
}
