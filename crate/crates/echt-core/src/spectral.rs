//! DFT machinery shared by the whole crate: frequency grids, forward
//! transforms, the Dirichlet kernel, the analytic mask and endpoint-only
//! inverse synthesis.
//!
//! All bin frequencies are carried as exact `f64` values; nothing in this
//! module ever rounds a frequency to the nearest bin.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{EchtError, Result};

/// The L-point DFT grid for a given sampling rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub dft_length: usize,
    pub sampling_rate: f64,
}

impl FrequencyGrid {
    pub fn new(dft_length: usize, sampling_rate: f64) -> Result<Self> {
        if dft_length < 2 {
            return Err(EchtError::InvalidArgument(format!(
                "DFT length must be at least 2, got {dft_length}"
            )));
        }
        if !(sampling_rate > 0.0) {
            return Err(EchtError::InvalidArgument(format!(
                "sampling rate must be positive, got {sampling_rate}"
            )));
        }
        Ok(Self { dft_length, sampling_rate })
    }

    /// Bin angular frequency omega_k = 2 pi k / L in radians/sample.
    pub fn omega(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.dft_length as f64
    }

    /// Bin frequency f_k = k Fs / L in Hz, exact (never rounded).
    pub fn freq_hz(&self, k: usize) -> f64 {
        k as f64 * self.sampling_rate / self.dft_length as f64
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.dft_length).map(|k| self.omega(k)).collect()
    }
}

/// Complex DFT coefficients X(k), k = 0..L-1.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Largest relative violation of the conjugate symmetry X(L-k) = X(k)*
    /// expected for real input.
    pub fn conjugate_symmetry_error(&self) -> f64 {
        let l = self.bins.len();
        let scale = self.bins.iter().map(|b| b.norm()).fold(0.0, f64::max).max(1e-300);
        let mut worst = 0.0f64;
        for k in 1..l {
            let err = (self.bins[l - k] - self.bins[k].conj()).norm() / scale;
            worst = worst.max(err);
        }
        worst
    }
}

/// Per-bin analytic-signal weights: 1 at DC (and Nyquist for even L),
/// 2 on positive-frequency bins, 0 on negative-frequency bins.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticMask {
    pub weights: Vec<f64>,
}

/// L-point DFT of `x` zero-padded to length `L`.
pub fn dft_forward(x: &[f64], dft_length: usize) -> Result<Spectrum> {
    let n = x.len();
    if n < 2 {
        return Err(EchtError::InvalidArgument(format!(
            "input must have at least 2 samples, got {n}"
        )));
    }
    if dft_length < n {
        return Err(EchtError::InvalidArgument(format!(
            "DFT length {dft_length} is shorter than the input length {n}"
        )));
    }
    let mut buf: Vec<Complex64> = Vec::with_capacity(dft_length);
    buf.extend(x.iter().map(|&v| Complex64::new(v, 0.0)));
    buf.resize(dft_length, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(dft_length).process(&mut buf);
    Ok(Spectrum { bins: buf })
}

/// Full inverse DFT (including the 1/L normalisation).
pub fn idft(spectrum: &Spectrum) -> Vec<Complex64> {
    let l = spectrum.len();
    let mut buf = spectrum.bins.clone();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(l).process(&mut buf);
    let scale = 1.0 / l as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Dirichlet kernel D_N(omega) = sum_{n=0}^{N-1} e^{j omega n}.
///
/// Uses the closed form e^{j omega (N-1)/2} sin(N omega/2)/sin(omega/2) and
/// switches to the L'Hopital limit when omega is within ~1e-9 of a multiple
/// of 2 pi, where the ratio of sines suffers catastrophic cancellation.
pub fn dirichlet_kernel(omega: f64, n: usize) -> Complex64 {
    let nf = n as f64;
    let half = 0.5 * omega;
    let s = half.sin();
    let envelope = Complex64::from_polar(1.0, half * (nf - 1.0));
    if s.abs() < 1e-9 {
        // Limit of sin(N w/2)/sin(w/2) as w -> 2 pi m; equals N at the pole.
        envelope * (nf * (nf * half).cos() / half.cos())
    } else {
        envelope * ((nf * half).sin() / s)
    }
}

/// The analytic-signal mask m(k) for an L-point spectrum.
pub fn analytic_mask(dft_length: usize) -> Result<AnalyticMask> {
    if dft_length < 2 {
        return Err(EchtError::InvalidArgument(format!(
            "mask length must be at least 2, got {dft_length}"
        )));
    }
    let l = dft_length;
    let mut weights = vec![0.0; l];
    weights[0] = 1.0;
    if l % 2 == 0 {
        weights[l / 2] = 1.0;
    }
    // Positive-frequency bins 1..=ceil(L/2)-1 are doubled.
    for w in weights.iter_mut().take(l.div_ceil(2)).skip(1) {
        *w = 2.0;
    }
    Ok(AnalyticMask { weights })
}

/// Evaluate the inverse DFT of `spectrum` at the single index `n`:
/// (1/L) sum_k Z(k) e^{j n omega_k}.
pub fn endpoint_synthesis(spectrum: &Spectrum, n: usize) -> Result<Complex64> {
    let l = spectrum.len();
    if n >= l {
        return Err(EchtError::InvalidArgument(format!(
            "synthesis index {n} out of range for spectrum length {l}"
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let step = 2.0 * PI * n as f64 / l as f64;
    for (k, z) in spectrum.bins.iter().enumerate() {
        acc += z * Complex64::from_polar(1.0, step * k as f64);
    }
    Ok(acc / l as f64)
}
