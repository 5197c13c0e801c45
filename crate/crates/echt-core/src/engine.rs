//! The endpoint-corrected Hilbert transform itself: per-window transform,
//! endpoint-only evaluation, and a streaming per-sample estimator.
//!
//! Pipeline per window: L-point DFT -> analytic mask -> bandpass response
//! evaluated at the exact bin frequencies -> inverse DFT. The streaming path
//! evaluates only the last sample of the inverse transform.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::calibration::CalibrationFactor;
use crate::error::{EchtError, Result};
use crate::filter::{design_bandpass, BandpassSpec, DigitalFilter};
use crate::spectral::{analytic_mask, FrequencyGrid};

/// Which filter the analytic spectrum is multiplied by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterChoice {
    /// H = 1 on every bin (plain DFT Hilbert transform). Useful for
    /// diagnostics and as the baseline in benchmarks.
    Identity,
    Bandpass(BandpassSpec),
}

/// Complete configuration of one estimator instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchtConfig {
    pub window_length: usize,
    pub dft_length: usize,
    pub sampling_rate: f64,
    pub centre_frequency: f64,
    pub filter: FilterChoice,
    #[serde(default)]
    pub calibration: Option<CalibrationFactor>,
}

impl EchtConfig {
    /// Default single-tone configuration: N = round(2.1 Fs / f0), L = N,
    /// second-order Butterworth over [0.7 f0, 1.3 f0].
    pub fn single_tone(f0: f64, fs: f64) -> Self {
        let n = (2.1 * fs / f0).round() as usize;
        Self {
            window_length: n,
            dft_length: n,
            sampling_rate: fs,
            centre_frequency: f0,
            filter: FilterChoice::Bandpass(BandpassSpec::butterworth(2, 0.7 * f0, 1.3 * f0, fs)),
            calibration: None,
        }
    }

    pub fn omega0(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.centre_frequency / self.sampling_rate
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.dft_length, self.sampling_rate)
    }

    /// Validate the configuration. Returns advisory warnings (e.g. a window
    /// shorter than two cycles of f0) without rejecting them.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.window_length < 2 {
            return Err(EchtError::InvalidArgument(
                "window length must be at least 2 samples".into(),
            ));
        }
        if self.dft_length < self.window_length {
            return Err(EchtError::InvalidArgument(format!(
                "DFT length {} is shorter than the window length {}",
                self.dft_length, self.window_length
            )));
        }
        if !(self.sampling_rate > 0.0) {
            return Err(EchtError::InvalidArgument("sampling rate must be positive".into()));
        }
        let nyquist = self.sampling_rate / 2.0;
        if !(0.0 < self.centre_frequency && self.centre_frequency < nyquist) {
            return Err(EchtError::InvalidArgument(format!(
                "centre frequency {} must lie in (0, Fs/2)",
                self.centre_frequency
            )));
        }
        if let FilterChoice::Bandpass(spec) = &self.filter {
            spec.validate()?;
            if (spec.sampling_rate - self.sampling_rate).abs() > 1e-12 * self.sampling_rate {
                return Err(EchtError::InvalidArgument(
                    "filter and estimator sampling rates disagree".into(),
                ));
            }
            if !(spec.l_freq < self.centre_frequency && self.centre_frequency < spec.h_freq) {
                return Err(EchtError::InvalidArgument(format!(
                    "centre frequency {} is outside the passband [{}, {}]",
                    self.centre_frequency, spec.l_freq, spec.h_freq
                )));
            }
        }
        let mut warnings = Vec::new();
        let cycles = self.window_length as f64 * self.centre_frequency / self.sampling_rate;
        if cycles < 2.0 {
            warnings.push(format!(
                "window covers only {cycles:.2} cycles of the centre frequency; \
                 at least 2 are recommended"
            ));
        }
        Ok(warnings)
    }

    pub fn design_filter(&self) -> Result<DigitalFilter> {
        match &self.filter {
            FilterChoice::Identity => Ok(DigitalFilter::identity()),
            FilterChoice::Bandpass(spec) => design_bandpass(spec),
        }
    }

    /// H_eff(k) = m(k) H(e^{j omega_k}) on the configured grid.
    pub fn effective_response(&self) -> Result<Vec<Complex64>> {
        let grid = self.grid()?;
        let filter = self.design_filter()?;
        let mask = analytic_mask(self.dft_length)?;
        Ok(filter
            .frequency_response(&grid)
            .into_iter()
            .zip(&mask.weights)
            .map(|(h, &m)| h * m)
            .collect())
    }
}

/// One per-sample output of the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate {
    pub sample_index: u64,
    pub analytic: Complex64,
    /// arctan2(Im z, Re z), wrapped to (-pi, pi].
    pub phase: f64,
    pub amplitude: f64,
    pub calibrated: bool,
}

impl PhaseEstimate {
    fn from_analytic(sample_index: u64, z: Complex64, calibrated: bool) -> Self {
        Self { sample_index, analytic: z, phase: z.im.atan2(z.re), amplitude: z.norm(), calibrated }
    }
}

/// A configured transform with all per-window constants precomputed.
pub struct EchtProcessor {
    config: EchtConfig,
    h_eff: Vec<Complex64>,
    /// H_eff(k) e^{j omega_k (N-1)} / L: dot this with X(k) for the endpoint.
    endpoint_weights: Vec<Complex64>,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
}

impl EchtProcessor {
    pub fn new(config: EchtConfig) -> Result<Self> {
        config.validate()?;
        let h_eff = config.effective_response()?;
        let grid = config.grid()?;
        let n = config.window_length;
        let l = config.dft_length;
        let endpoint_weights = h_eff
            .iter()
            .enumerate()
            .map(|(k, h)| h * Complex64::from_polar(1.0, grid.omega(k) * (n as f64 - 1.0)) / l as f64)
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            config,
            h_eff,
            endpoint_weights,
            fft_forward: planner.plan_fft_forward(l),
            fft_inverse: planner.plan_fft_inverse(l),
        })
    }

    pub fn config(&self) -> &EchtConfig {
        &self.config
    }

    pub fn effective_response(&self) -> &[Complex64] {
        &self.h_eff
    }

    fn check_window(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.window_length {
            return Err(EchtError::InvalidArgument(format!(
                "window has {} samples, config expects {}",
                x.len(),
                self.config.window_length
            )));
        }
        Ok(())
    }

    fn spectrum_of(&self, x: &[f64]) -> Vec<Complex64> {
        let l = self.config.dft_length;
        let mut buf: Vec<Complex64> = Vec::with_capacity(l);
        buf.extend(x.iter().map(|&v| Complex64::new(v, 0.0)));
        buf.resize(l, Complex64::new(0.0, 0.0));
        self.fft_forward.process(&mut buf);
        buf
    }

    /// Full analytic window: inverse DFT of H_eff(k) X(k), first N samples.
    pub fn transform_window(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        self.check_window(x)?;
        let mut buf = self.spectrum_of(x);
        for (b, h) in buf.iter_mut().zip(&self.h_eff) {
            *b *= h;
        }
        self.fft_inverse.process(&mut buf);
        let scale = 1.0 / self.config.dft_length as f64;
        buf.truncate(self.config.window_length);
        for v in &mut buf {
            *v *= scale;
        }
        Ok(buf)
    }

    /// Uncalibrated endpoint z(N-1), evaluated without materialising the full
    /// inverse transform.
    pub fn endpoint_raw(&self, x: &[f64]) -> Result<Complex64> {
        self.check_window(x)?;
        let spectrum = self.spectrum_of(x);
        Ok(spectrum.iter().zip(&self.endpoint_weights).map(|(z, w)| z * w).sum())
    }

    /// Endpoint with the configured calibration factor applied (if any).
    pub fn endpoint(&self, x: &[f64]) -> Result<Complex64> {
        let z = self.endpoint_raw(x)?;
        Ok(match &self.config.calibration {
            Some(cal) => cal.c * z,
            None => z,
        })
    }

    pub fn estimate(&self, x: &[f64], sample_index: u64) -> Result<PhaseEstimate> {
        let z = self.endpoint(x)?;
        Ok(PhaseEstimate::from_analytic(sample_index, z, self.config.calibration.is_some()))
    }
}

/// One-shot per-window transform. Prefer [`EchtProcessor`] when calling
/// repeatedly with the same configuration.
pub fn echt_window(x: &[f64], config: &EchtConfig) -> Result<Vec<Complex64>> {
    EchtProcessor::new(config.clone())?.transform_window(x)
}

/// One-shot endpoint evaluation (calibration applied when configured).
pub fn echt_endpoint(x: &[f64], config: &EchtConfig) -> Result<Complex64> {
    EchtProcessor::new(config.clone())?.endpoint(x)
}

/// Method-2 phase readout arctan2(Im z_end, x(N-1)).
///
/// Provided purely as a diagnostic: with a non-ideal effective gain the
/// tangent is warped to tan(theta2) = F_R tan(psi) + F_I, which makes the
/// error phase-dependent. Method 1 (arg of the endpoint) is the estimator.
pub fn phase_method2_diagnostic(x: &[f64], config: &EchtConfig) -> Result<f64> {
    let proc = EchtProcessor::new(config.clone())?;
    let z = proc.endpoint_raw(x)?;
    Ok(z.im.atan2(x[x.len() - 1]))
}

/// Streaming per-sample estimator: push one sample, get the estimate for the
/// window ending at that sample (after an N-sample warm-up).
pub struct EchtStream {
    proc: EchtProcessor,
    ring: Vec<f64>,
    head: usize,
    filled: usize,
    scratch: Vec<f64>,
    accepted: u64,
    dropped: u64,
}

impl EchtStream {
    pub fn new(config: EchtConfig) -> Result<Self> {
        let proc = EchtProcessor::new(config)?;
        let n = proc.config.window_length;
        Ok(Self {
            proc,
            ring: vec![0.0; n],
            head: 0,
            filled: 0,
            scratch: vec![0.0; n],
            accepted: 0,
            dropped: 0,
        })
    }

    pub fn from_processor(proc: EchtProcessor) -> Self {
        let n = proc.config.window_length;
        Self {
            proc,
            ring: vec![0.0; n],
            head: 0,
            filled: 0,
            scratch: vec![0.0; n],
            accepted: 0,
            dropped: 0,
        }
    }

    pub fn config(&self) -> &EchtConfig {
        self.proc.config()
    }

    pub fn processor(&self) -> &EchtProcessor {
        &self.proc
    }

    /// Number of non-finite samples rejected so far.
    pub fn dropped_samples(&self) -> u64 {
        self.dropped
    }

    /// Index that will be assigned to the next accepted sample.
    pub fn next_sample_index(&self) -> u64 {
        self.accepted
    }

    /// Replace the processor (filter + calibration) between samples. The
    /// sample history is kept, so the next estimate already uses the new
    /// configuration on the existing window.
    pub fn swap_processor(&mut self, proc: EchtProcessor) -> Result<()> {
        if proc.config.window_length != self.ring.len() {
            return Err(EchtError::InvalidArgument(
                "cannot swap in a processor with a different window length".into(),
            ));
        }
        self.proc = proc;
        Ok(())
    }

    /// Copy the current window, oldest sample first.
    fn window_into_scratch(&mut self) {
        let n = self.ring.len();
        for i in 0..n {
            self.scratch[i] = self.ring[(self.head + i) % n];
        }
    }

    pub fn push(&mut self, sample: f64) -> Option<PhaseEstimate> {
        if !sample.is_finite() {
            self.dropped += 1;
            return None;
        }
        let n = self.ring.len();
        self.ring[(self.head + self.filled.min(n)) % n] = sample;
        if self.filled < n {
            self.filled += 1;
        } else {
            self.head = (self.head + 1) % n;
        }
        let index = self.accepted;
        self.accepted += 1;
        if self.filled < n {
            return None;
        }
        self.window_into_scratch();
        // Same code path as the batch endpoint, so stream and batch agree
        // bit for bit.
        self.proc.estimate(&self.scratch, index).ok()
    }
}
