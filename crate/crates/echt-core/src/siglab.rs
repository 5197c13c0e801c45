//! Synthetic signal generation with exact reference phase, noise injection,
//! and the acausal offline reference pipeline (zero-phase bandpass plus
//! full-length analytic signal).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::error::{EchtError, Result};
use crate::filter::{design_bandpass, BandpassSpec};
use crate::spectral::{analytic_mask, dft_forward, idft};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Tone { f0: f64 },
    LinearChirp { f_start: f64, f_end: f64 },
    /// Tone whose frequency drifts linearly from f0 to f0 + drift_hz over
    /// the full duration.
    DriftingTone { f0: f64, drift_hz: f64 },
}

impl SignalKind {
    /// Instantaneous frequency at time t (seconds) for total duration T.
    pub fn frequency_at(&self, t: f64, duration: f64) -> f64 {
        match *self {
            SignalKind::Tone { f0 } => f0,
            SignalKind::LinearChirp { f_start, f_end } => {
                f_start + (f_end - f_start) * (t / duration)
            }
            SignalKind::DriftingTone { f0, drift_hz } => f0 + drift_hz * (t / duration),
        }
    }

    fn frequency_range(&self, duration: f64) -> (f64, f64) {
        let (a, b) = (self.frequency_at(0.0, duration), self.frequency_at(duration, duration));
        (a.min(b), a.max(b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub amplitude: f64,
    pub initial_phase: f64,
    pub duration_s: f64,
    pub sampling_rate: f64,
    /// Input SNR = A^2 / sigma_eta^2 (analytic-amplitude convention);
    /// `None` means noiseless.
    #[serde(default)]
    pub snr_in: Option<f64>,
    pub seed: u64,
}

impl SignalSpec {
    pub fn tone(f0: f64, fs: f64, duration_s: f64) -> Self {
        Self {
            kind: SignalKind::Tone { f0 },
            amplitude: 1.0,
            initial_phase: 0.0,
            duration_s,
            sampling_rate: fs,
            snr_in: None,
            seed: 0,
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sampling_rate).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate > 0.0) || !(self.duration_s > 0.0) {
            return Err(EchtError::InvalidArgument(
                "sampling rate and duration must be positive".into(),
            ));
        }
        let (lo, hi) = self.kind.frequency_range(self.duration_s);
        if !(lo > 0.0 && hi < self.sampling_rate / 2.0) {
            return Err(EchtError::InvalidArgument(format!(
                "instantaneous frequency range [{lo}, {hi}] leaves (0, Fs/2)"
            )));
        }
        if let Some(snr) = self.snr_in {
            if !(snr > 0.0) {
                return Err(EchtError::InvalidArgument("snr_in must be positive".into()));
            }
        }
        Ok(())
    }

    /// Input-noise variance implied by the requested SNR.
    pub fn noise_variance(&self) -> Option<f64> {
        self.snr_in.map(|snr| self.amplitude * self.amplitude / snr)
    }
}

/// Ground-truth phase/amplitude attached to a generated or processed signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMethod {
    AnalyticFormula,
    OfflineHilbert,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePhase {
    pub theta: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub method: ReferenceMethod,
}

/// Generate the samples and the exact reference phase from the generator's
/// own phase accumulator theta(n) = phi0 + (2 pi / Fs) sum_{m<n} f(m/Fs).
pub fn synthesize(spec: &SignalSpec) -> Result<(Vec<f64>, ReferencePhase)> {
    spec.validate()?;
    let n = spec.sample_count();
    let fs = spec.sampling_rate;
    let mut theta = Vec::with_capacity(n);
    let mut phase = spec.initial_phase;
    for m in 0..n {
        theta.push(phase);
        phase += 2.0 * PI * spec.kind.frequency_at(m as f64 / fs, spec.duration_s) / fs;
    }
    let mut x: Vec<f64> = theta.iter().map(|&t| spec.amplitude * t.cos()).collect();
    if let Some(var) = spec.noise_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = rand_distr::Normal::new(0.0, var.sqrt())
            .map_err(|e| EchtError::InvalidArgument(e.to_string()))?;
        for v in &mut x {
            *v += rng.sample(normal);
        }
    }
    let reference = ReferencePhase {
        theta,
        amplitude: vec![spec.amplitude; n],
        method: ReferenceMethod::AnalyticFormula,
    };
    Ok((x, reference))
}

/// Acausal offline reference: forward-backward (zero-phase) Butterworth
/// bandpass over [ratio_lo, ratio_hi] * f0, then the full-length analytic
/// signal via the DFT method.
pub fn offline_reference(
    x: &[f64],
    f0: f64,
    band_ratios: (f64, f64),
    order: usize,
    fs: f64,
) -> Result<ReferencePhase> {
    let min_len = (8.0 * fs / f0).ceil() as usize;
    if x.len() < min_len {
        return Err(EchtError::InvalidArgument(format!(
            "offline reference needs at least 8 cycles of f0 ({min_len} samples), got {}",
            x.len()
        )));
    }
    let spec = BandpassSpec::butterworth(order, band_ratios.0 * f0, band_ratios.1 * f0, fs);
    let filter = design_bandpass(&spec)?;
    // Zero-phase filtering: filter, reverse, filter, reverse.
    let forward = filter.filter_sequence(x);
    let mut reversed: Vec<f64> = forward.into_iter().rev().collect();
    reversed = filter.filter_sequence(&reversed);
    let filtered: Vec<f64> = reversed.into_iter().rev().collect();

    let mut spectrum = dft_forward(&filtered, filtered.len())?;
    let mask = analytic_mask(filtered.len())?;
    for (b, &m) in spectrum.bins.iter_mut().zip(&mask.weights) {
        *b *= m;
    }
    let analytic = idft(&spectrum);
    Ok(ReferencePhase {
        theta: analytic.iter().map(|z| z.arg()).collect(),
        amplitude: analytic.iter().map(|z| z.norm()).collect(),
        method: ReferenceMethod::OfflineHilbert,
    })
}

/// Persist a signal as CSV rows (t_s, x).
pub fn save_csv<W: Write>(mut out: W, x: &[f64], fs: f64) -> Result<()> {
    writeln!(out, "t_s,x")?;
    for (i, v) in x.iter().enumerate() {
        writeln!(out, "{},{v}", i as f64 / fs)?;
    }
    Ok(())
}

/// Sidecar metadata for raw little-endian f64 signal files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinarySidecar {
    pub fs_hz: f64,
    pub n: usize,
    pub kind: String,
    pub seed: u64,
}

/// Persist a signal as raw little-endian f64 plus a JSON sidecar.
pub fn save_binary(path: &std::path::Path, x: &[f64], sidecar: &BinarySidecar) -> Result<()> {
    let mut bytes = Vec::with_capacity(x.len() * 8);
    for v in x {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    let sidecar_path = path.with_extension("json");
    std::fs::write(sidecar_path, serde_json::to_string_pretty(sidecar).unwrap())?;
    Ok(())
}

/// Load a raw little-endian f64 signal file.
pub fn load_binary(path: &std::path::Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(EchtError::Io(format!(
            "{} has {} bytes, not a multiple of 8",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}
