//! Causal IIR bandpass design (analog prototype -> band transform ->
//! bilinear transform -> second-order sections) and exact evaluation of the
//! response on DFT grids.
//!
//! The response is always evaluated at the exact bin frequency omega_k;
//! rounding a bin frequency to a "nice" value before evaluation is precisely
//! the bug this module exists to avoid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{EchtError, Result};
use crate::spectral::FrequencyGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterFamily {
    Butterworth,
    Chebyshev1,
    Chebyshev2,
    Elliptic,
    Bessel,
}

impl FilterFamily {
    pub fn name(&self) -> &'static str {
        match self {
            FilterFamily::Butterworth => "butterworth",
            FilterFamily::Chebyshev1 => "chebyshev1",
            FilterFamily::Chebyshev2 => "chebyshev2",
            FilterFamily::Elliptic => "elliptic",
            FilterFamily::Bessel => "bessel",
        }
    }
}

/// Bandpass design request.
///
/// Band-edge conventions per family: Butterworth edges are the -3 dB points;
/// Chebyshev I edges are the passband-ripple edges (|H| = 1/sqrt(1+eps^2));
/// Chebyshev II edges are the stopband edges (|H| = the design attenuation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandpassSpec {
    pub family: FilterFamily,
    pub order: usize,
    pub l_freq: f64,
    pub h_freq: f64,
    pub sampling_rate: f64,
    /// Passband ripple in dB (Chebyshev I / elliptic). Default 1.0.
    #[serde(default)]
    pub passband_ripple_db: Option<f64>,
    /// Stopband attenuation in dB (Chebyshev II / elliptic). Default 30.0.
    #[serde(default)]
    pub stopband_atten_db: Option<f64>,
}

impl BandpassSpec {
    pub fn butterworth(order: usize, l_freq: f64, h_freq: f64, sampling_rate: f64) -> Self {
        Self {
            family: FilterFamily::Butterworth,
            order,
            l_freq,
            h_freq,
            sampling_rate,
            passband_ripple_db: None,
            stopband_atten_db: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(EchtError::InvalidArgument("filter order must be at least 1".into()));
        }
        let nyquist = self.sampling_rate / 2.0;
        if !(0.0 < self.l_freq && self.l_freq < self.h_freq && self.h_freq < nyquist) {
            return Err(EchtError::InvalidArgument(format!(
                "band edges must satisfy 0 < l_freq < h_freq < Fs/2, got [{}, {}] at Fs = {}",
                self.l_freq, self.h_freq, self.sampling_rate
            )));
        }
        Ok(())
    }
}

/// One biquad: b0 + b1 z^-1 + b2 z^-2 over a0 + a1 z^-1 + a2 z^-2 (a0 = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sos {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Sos {
    pub fn response_at(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (self.a[0] + self.a[1] * z1 + self.a[2] * z2)
    }
}

/// A designed filter: cascade of second-order sections plus an overall gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitalFilter {
    pub sections: Vec<Sos>,
    pub gain: f64,
}

impl DigitalFilter {
    /// An all-pass identity filter (H = 1).
    pub fn identity() -> Self {
        Self { sections: Vec::new(), gain: 1.0 }
    }

    pub fn response_at(&self, omega: f64) -> Complex64 {
        let mut h = Complex64::new(self.gain, 0.0);
        for s in &self.sections {
            h *= s.response_at(omega);
        }
        h
    }

    /// H(e^{j omega_k}) on every bin of the grid, exact bin frequencies.
    pub fn frequency_response(&self, grid: &FrequencyGrid) -> Vec<Complex64> {
        (0..grid.dft_length).map(|k| self.response_at(grid.omega(k))).collect()
    }

    /// Run the cascade over a sequence (direct form II transposed per section).
    pub fn filter_sequence(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = x.iter().map(|&v| v * self.gain).collect();
        for s in &self.sections {
            let (mut w1, mut w2) = (0.0f64, 0.0f64);
            for v in &mut y {
                let input = *v;
                let out = s.b[0] * input + w1;
                w1 = s.b[1] * input - s.a[1] * out + w2;
                w2 = s.b[2] * input - s.a[2] * out;
                *v = out;
            }
        }
        y
    }

    /// Serialisable coefficient export.
    pub fn export(&self, spec: &BandpassSpec) -> FilterJson {
        let mut sections: Vec<[f64; 6]> = self
            .sections
            .iter()
            .map(|s| [s.b[0], s.b[1], s.b[2], s.a[0], s.a[1], s.a[2]])
            .collect();
        if let Some(first) = sections.first_mut() {
            for b in &mut first[..3] {
                *b *= self.gain;
            }
        } else {
            sections.push([self.gain, 0.0, 0.0, 1.0, 0.0, 0.0]);
        }
        FilterJson {
            family: spec.family.name().to_string(),
            order: spec.order,
            band_hz: [spec.l_freq, spec.h_freq],
            sections,
        }
    }
}

/// JSON coefficient schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterJson {
    pub family: String,
    pub order: usize,
    pub band_hz: [f64; 2],
    pub sections: Vec<[f64; 6]>,
}

// ---------------------------------------------------------------------------
// Analog prototypes (zeros, poles, gain), unit passband edge.
// ---------------------------------------------------------------------------

struct Zpk {
    z: Vec<Complex64>,
    p: Vec<Complex64>,
    k: f64,
}

fn odd_index_grid(n: usize) -> Vec<f64> {
    // -n+1, -n+3, ..., n-1
    (0..n).map(|i| (2.0 * i as f64) - (n as f64 - 1.0)).collect()
}

fn butterworth_prototype(n: usize) -> Zpk {
    let p = odd_index_grid(n)
        .into_iter()
        .map(|m| -Complex64::from_polar(1.0, PI * m / (2.0 * n as f64)))
        .collect();
    Zpk { z: Vec::new(), p, k: 1.0 }
}

fn chebyshev1_prototype(n: usize, ripple_db: f64) -> Zpk {
    let eps = (10f64.powf(0.1 * ripple_db) - 1.0).sqrt();
    let mu = (1.0 / eps).asinh() / n as f64;
    let p: Vec<Complex64> = odd_index_grid(n)
        .into_iter()
        .map(|m| {
            let theta = PI * m / (2.0 * n as f64);
            -Complex64::new(mu.sinh() * theta.cos(), mu.cosh() * theta.sin())
        })
        .collect();
    let mut k = p.iter().fold(Complex64::new(1.0, 0.0), |acc, &pi| acc * (-pi)).re;
    if n % 2 == 0 {
        k /= (1.0 + eps * eps).sqrt();
    }
    Zpk { z: Vec::new(), p, k }
}

fn chebyshev2_prototype(n: usize, atten_db: f64) -> Zpk {
    let de = 1.0 / (10f64.powf(0.1 * atten_db) - 1.0).sqrt();
    let mu = (1.0 / de).asinh() / n as f64;
    let zero_grid: Vec<f64> = if n % 2 == 1 {
        odd_index_grid(n).into_iter().filter(|m| m.abs() > 0.5).collect()
    } else {
        odd_index_grid(n)
    };
    let z: Vec<Complex64> = zero_grid
        .into_iter()
        .map(|m| Complex64::new(0.0, 1.0 / (PI * m / (2.0 * n as f64)).sin()))
        .collect();
    let p: Vec<Complex64> = odd_index_grid(n)
        .into_iter()
        .map(|m| {
            let u = -Complex64::from_polar(1.0, PI * m / (2.0 * n as f64));
            let scaled = Complex64::new(mu.sinh() * u.re, mu.cosh() * u.im);
            scaled.inv()
        })
        .collect();
    let num = p.iter().fold(Complex64::new(1.0, 0.0), |acc, &pi| acc * (-pi));
    let den = z.iter().fold(Complex64::new(1.0, 0.0), |acc, &zi| acc * (-zi));
    Zpk { z, p, k: (num / den).re }
}

// ---------------------------------------------------------------------------
// Transforms.
// ---------------------------------------------------------------------------

/// Lowpass prototype -> bandpass with centre wo and width bw (analog).
fn lowpass_to_bandpass(proto: Zpk, wo: f64, bw: f64) -> Zpk {
    let degree = proto.p.len() - proto.z.len();
    let split = |roots: &[Complex64]| -> Vec<Complex64> {
        let mut out = Vec::with_capacity(2 * roots.len());
        for &r in roots {
            let s = r * (bw / 2.0);
            let disc = (s * s - wo * wo).sqrt();
            out.push(s + disc);
            out.push(s - disc);
        }
        out
    };
    let mut z = split(&proto.z);
    z.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(degree));
    let p = split(&proto.p);
    let k = proto.k * bw.powi(degree as i32);
    Zpk { z, p, k }
}

/// Bilinear transform s -> (2/T)(z-1)/(z+1) with fs2 = 2/T.
fn bilinear(analog: Zpk, fs2: f64) -> Zpk {
    let degree = analog.p.len() - analog.z.len();
    let map = |roots: &[Complex64]| -> Vec<Complex64> {
        roots.iter().map(|&r| (fs2 + r) / (fs2 - r)).collect()
    };
    let mut z = map(&analog.z);
    z.extend(std::iter::repeat(Complex64::new(-1.0, 0.0)).take(degree));
    let p = map(&analog.p);
    let num = analog.z.iter().fold(Complex64::new(1.0, 0.0), |acc, &r| acc * (fs2 - r));
    let den = analog.p.iter().fold(Complex64::new(1.0, 0.0), |acc, &r| acc * (fs2 - r));
    let k = analog.k * (num / den).re;
    Zpk { z, p, k }
}

// ---------------------------------------------------------------------------
// Root pairing into second-order sections.
// ---------------------------------------------------------------------------

fn is_real(c: Complex64) -> bool {
    c.im.abs() <= 1e-12 * (1.0 + c.norm())
}

/// Split roots into conjugate-pair representatives (positive imaginary part)
/// and real roots.
fn partition_roots(roots: &[Complex64]) -> (Vec<Complex64>, Vec<f64>) {
    let mut pairs = Vec::new();
    let mut reals = Vec::new();
    for &r in roots {
        if is_real(r) {
            reals.push(r.re);
        } else if r.im > 0.0 {
            pairs.push(r);
        }
    }
    (pairs, reals)
}

fn poly_from_pair(r1: Complex64, r2: Complex64) -> [f64; 3] {
    [1.0, -(r1 + r2).re, (r1 * r2).re]
}

fn zpk_to_sos(zpk: &Zpk) -> Vec<Sos> {
    let (mut zero_pairs, mut zero_reals) = partition_roots(&zpk.z);
    let (mut pole_pairs, mut pole_reals) = partition_roots(&zpk.p);
    // Closest-to-unit-circle pole groups first; they get the nearest zeros,
    // which keeps section peak gains tame.
    pole_pairs.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
    pole_reals.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());

    let mut sections = Vec::new();
    let mut take_nearest_zero_pair = |p: Complex64| -> Option<[f64; 3]> {
        // Prefer a conjugate zero pair; otherwise combine two (or one) reals.
        if !zero_pairs.is_empty() {
            let (idx, _) = zero_pairs
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| (*a - p).norm().partial_cmp(&(*b - p).norm()).unwrap())?;
            let z = zero_pairs.swap_remove(idx);
            Some(poly_from_pair(z, z.conj()))
        } else if zero_reals.len() >= 2 {
            let (idx, _) = zero_reals
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (Complex64::new(**a, 0.0) - p)
                        .norm()
                        .partial_cmp(&(Complex64::new(**b, 0.0) - p).norm())
                        .unwrap()
                })?;
            let z1 = zero_reals.swap_remove(idx);
            // The far real zero is paired here too, so late sections are not
            // left with a stack of identical real zeros.
            let (idx2, _) = zero_reals
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| (**a - z1).abs().partial_cmp(&(**b - z1).abs()).unwrap())?;
            let z2 = zero_reals.swap_remove(idx2);
            Some([1.0, -(z1 + z2), z1 * z2])
        } else if let Some(z1) = zero_reals.pop() {
            Some([1.0, -z1, 0.0])
        } else {
            None
        }
    };

    for p in pole_pairs.drain(..) {
        let a = poly_from_pair(p, p.conj());
        let b = take_nearest_zero_pair(p).unwrap_or([1.0, 0.0, 0.0]);
        sections.push(Sos { b, a });
    }
    while !pole_reals.is_empty() {
        let p1 = pole_reals.remove(0);
        let a = match pole_reals.pop() {
            Some(p2) => [1.0, -(p1 + p2), p1 * p2],
            None => [1.0, -p1, 0.0],
        };
        let b = take_nearest_zero_pair(Complex64::new(p1, 0.0)).unwrap_or([1.0, 0.0, 0.0]);
        sections.push(Sos { b, a });
    }
    sections
}

/// Design a causal IIR bandpass filter realised as second-order sections.
pub fn design_bandpass(spec: &BandpassSpec) -> Result<DigitalFilter> {
    spec.validate()?;
    let proto = match spec.family {
        FilterFamily::Butterworth => butterworth_prototype(spec.order),
        FilterFamily::Chebyshev1 => {
            chebyshev1_prototype(spec.order, spec.passband_ripple_db.unwrap_or(1.0))
        }
        FilterFamily::Chebyshev2 => {
            chebyshev2_prototype(spec.order, spec.stopband_atten_db.unwrap_or(30.0))
        }
        FilterFamily::Elliptic | FilterFamily::Bessel => {
            return Err(EchtError::Unsupported(format!(
                "{} bandpass design is not implemented; use butterworth or a Chebyshev family",
                spec.family.name()
            )));
        }
    };

    // Pre-warp the band edges so the bilinear transform lands them exactly.
    let fs2 = 4.0;
    let warp = |f: f64| fs2 * (PI * f / spec.sampling_rate).tan();
    let (w1, w2) = (warp(spec.l_freq), warp(spec.h_freq));
    let analog = lowpass_to_bandpass(proto, (w1 * w2).sqrt(), w2 - w1);
    let digital = bilinear(analog, fs2);

    for &p in &digital.p {
        if p.norm() >= 1.0 - 1e-9 {
            return Err(EchtError::DegenerateDesign(format!(
                "pole magnitude {:.12} is not strictly inside the unit circle; \
                 the requested band is too narrow for double precision",
                p.norm()
            )));
        }
    }

    Ok(DigitalFilter { sections: zpk_to_sos(&digital), gain: digital.k })
}
