//! Closed-form endpoint error analysis and the MSE-optimal scalar
//! calibration.
//!
//! For a single tone x(n) = cos(omega0 n + phi0) the endpoint of the
//! transform factorises as z_end = z_true * F(phi0) with
//! F = G+ + G- e^{-2j phi0}. G+ is the deterministic main gain, G- the
//! negative-frequency leakage; arg G+ is the constant phase bias and
//! r = |G-|/|G+| bounds the phi0-dependent ripple by arcsin r.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::collections::hash_map::DefaultHasher;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};

use crate::engine::{EchtConfig, EchtProcessor};
use crate::error::{EchtError, Result};
use crate::spectral::dirichlet_kernel;

/// Deterministic characterisation of one endpoint operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointGains {
    pub g_plus: Complex64,
    pub g_minus: Complex64,
    /// alpha = arg G+ (constant phase bias, radians).
    pub alpha: f64,
    /// beta = arg G- (radians).
    pub beta: f64,
    /// Leakage ratio r = |G-|/|G+|.
    pub r: f64,
    /// delta = beta - alpha (radians).
    pub delta: f64,
    /// Endpoint group delay tau_g = -d(arg G+)/d(omega), in samples.
    pub group_delay: f64,
    /// Hash of the generating configuration, for cache validation.
    pub config_fingerprint: u64,
}

impl EndpointGains {
    /// Upper bound on the phase ripple after bias removal: arcsin r.
    pub fn phase_ripple_bound(&self) -> f64 {
        if self.r <= 1.0 {
            self.r.asin()
        } else {
            PI / 2.0
        }
    }
}

/// Hash of the parts of the configuration that determine the gains.
pub fn config_fingerprint(config: &EchtConfig) -> u64 {
    let mut stripped = config.clone();
    stripped.calibration = None;
    let json = serde_json::to_string(&stripped).expect("config serialises");
    let mut hasher = DefaultHasher::new();
    json.hash(&mut hasher);
    hasher.finish()
}

/// G+ and G- at probe frequency `omega` for a fixed effective response:
/// G(+/-) = e^{-j omega (N-1)} / (2L) * sum_k H_eff(k) D_N(+/-omega - omega_k)
/// e^{j omega_k (N-1)}.
fn gains_at(h_eff: &[Complex64], n: usize, omega: f64) -> (Complex64, Complex64) {
    let l = h_eff.len();
    let nm1 = n as f64 - 1.0;
    let mut plus = Complex64::new(0.0, 0.0);
    let mut minus = Complex64::new(0.0, 0.0);
    for (k, h) in h_eff.iter().enumerate() {
        let omega_k = 2.0 * PI * k as f64 / l as f64;
        let phasor = h * Complex64::from_polar(1.0, omega_k * nm1);
        plus += phasor * dirichlet_kernel(omega - omega_k, n);
        minus += phasor * dirichlet_kernel(-omega - omega_k, n);
    }
    let scale = Complex64::from_polar(1.0, -omega * nm1) / (2.0 * l as f64);
    (scale * plus, scale * minus)
}

/// (G+, G-) for a pre-computed effective response, skipping group-delay
/// estimation. Cheap enough for per-window re-evaluation in sweeps.
pub fn endpoint_gains_from_response(
    h_eff: &[Complex64],
    n: usize,
    omega: f64,
) -> (Complex64, Complex64) {
    gains_at(h_eff, n, omega)
}

/// Unwrapped-phase slope of G+ by central differences with step halving.
fn group_delay_from(h_eff: &[Complex64], n: usize, omega: f64) -> Result<f64> {
    let alpha_at = |w: f64| gains_at(h_eff, n, w).0.arg();
    let alpha0 = alpha_at(omega);
    let mut delta = 2.0 * PI * 1e-4;
    if omega - delta <= 0.0 || omega + delta >= PI {
        return Err(EchtError::InvalidArgument(format!(
            "probe frequency {omega} too close to 0 or pi for the finite-difference step"
        )));
    }
    let slope = |d: f64| {
        // Differences stay far below pi for any sane design, so wrapping
        // relative to the centre value unwraps them.
        let hi = crate::stats::wrap(alpha_at(omega + d) - alpha0);
        let lo = crate::stats::wrap(alpha_at(omega - d) - alpha0);
        -(hi - lo) / (2.0 * d)
    };
    let mut tau = slope(delta);
    for _ in 0..4 {
        delta /= 2.0;
        let refined = slope(delta);
        if (refined - tau).abs() <= 0.005 * refined.abs().max(1e-9) {
            return Ok(refined);
        }
        tau = refined;
    }
    Err(EchtError::NonConvergence(
        "group-delay step halving did not settle within 0.5% after 4 refinements".into(),
    ))
}

/// Compute the endpoint gains of a configuration at its centre frequency.
pub fn compute_endpoint_gains(config: &EchtConfig) -> Result<EndpointGains> {
    let h_eff = config.effective_response()?;
    endpoint_gains_with_response(config, &h_eff, config.omega0())
}

/// Endpoint gains of a fixed design probed at an arbitrary tone frequency
/// `omega` (radians/sample). Used for detuning analysis and retuning.
pub fn endpoint_gains_at(config: &EchtConfig, omega: f64) -> Result<EndpointGains> {
    let h_eff = config.effective_response()?;
    endpoint_gains_with_response(config, &h_eff, omega)
}

fn endpoint_gains_with_response(
    config: &EchtConfig,
    h_eff: &[Complex64],
    omega: f64,
) -> Result<EndpointGains> {
    config.validate()?;
    let n = config.window_length;
    let (g_plus, g_minus) = gains_at(h_eff, n, omega);
    if g_plus.norm() < 1e-12 {
        return Err(EchtError::DegenerateDesign(
            "|G+| < 1e-12: the filter removes the target tone".into(),
        ));
    }
    let alpha = g_plus.arg();
    let beta = g_minus.arg();
    Ok(EndpointGains {
        g_plus,
        g_minus,
        alpha,
        beta,
        r: g_minus.norm() / g_plus.norm(),
        delta: crate::stats::wrap(beta - alpha),
        group_delay: group_delay_from(h_eff, n, omega)?,
        config_fingerprint: config_fingerprint(config),
    })
}

/// Endpoint group delay tau_g = -d alpha/d omega at probe frequency `omega`.
pub fn endpoint_group_delay(config: &EchtConfig, omega: f64) -> Result<f64> {
    let h_eff = config.effective_response()?;
    group_delay_from(&h_eff, config.window_length, omega)
}

/// Effective gain F(phi0) = G+ + G- e^{-2j phi0}.
pub fn endpoint_gain_f(gains: &EndpointGains, phi0: f64) -> Complex64 {
    gains.g_plus + gains.g_minus * Complex64::from_polar(1.0, -2.0 * phi0)
}

/// Where a calibration factor came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationProvenance {
    /// Closed form from G+/G-, no noise term.
    AnalyticNoiseless,
    /// Closed form with the endpoint noise variance in the denominator.
    NoiseAware,
    /// Least-squares fit from measured (true, estimated) endpoint pairs.
    Empirical,
    /// Supplied by the caller; residual MSE unknown.
    External,
}

/// The complex scalar applied to the raw endpoint, with its residual MSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFactor {
    pub c: Complex64,
    /// J = E|C z_end - z_true|^2 for a unit tone; in [0, 1].
    pub residual_mse: f64,
    pub provenance: CalibrationProvenance,
    /// Endpoint noise variance used, when provenance is noise-aware.
    pub noise_variance: Option<f64>,
}

impl CalibrationFactor {
    /// Wrap an externally supplied scalar. The residual MSE is unknown and
    /// recorded as NaN; such factors are for applying, not for reporting.
    pub fn external(c: Complex64) -> Self {
        Self {
            c,
            residual_mse: f64::NAN,
            provenance: CalibrationProvenance::External,
            noise_variance: None,
        }
    }
}

/// Input/output noise bookkeeping for one design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// sigma_eta^2 of the white input noise.
    pub input_noise_variance: f64,
    /// G_noise = sum_n |h_n|^2 over the endpoint impulse response.
    pub noise_gain: f64,
    /// sigma_W^2 = G_noise * sigma_eta^2 at the endpoint.
    pub endpoint_noise_variance: f64,
    /// G_SNR = (|G+|^2 + |G-|^2) / G_noise; SNR_out = G_SNR * SNR_in.
    pub snr_gain: f64,
}

impl NoiseModel {
    pub fn for_config(config: &EchtConfig, input_noise_variance: f64) -> Result<Self> {
        let gains = compute_endpoint_gains(config)?;
        Self::from_parts(config, &gains, input_noise_variance)
    }

    pub fn from_parts(
        config: &EchtConfig,
        gains: &EndpointGains,
        input_noise_variance: f64,
    ) -> Result<Self> {
        if !(input_noise_variance >= 0.0) {
            return Err(EchtError::InvalidArgument("noise variance must be non-negative".into()));
        }
        let g_noise = noise_gain(config)?;
        let signal_gain = gains.g_plus.norm_sqr() + gains.g_minus.norm_sqr();
        Ok(Self {
            input_noise_variance,
            noise_gain: g_noise,
            endpoint_noise_variance: g_noise * input_noise_variance,
            snr_gain: signal_gain / g_noise,
        })
    }
}

/// G_noise: energy of the endpoint impulse response, obtained by driving the
/// full window transform with a unit impulse at each of the N positions.
pub fn noise_gain(config: &EchtConfig) -> Result<f64> {
    let proc = EchtProcessor::new(config.clone())?;
    let n = config.window_length;
    let mut x = vec![0.0; n];
    let mut total = 0.0;
    for i in 0..n {
        x[i] = 1.0;
        total += proc.endpoint_raw(&x)?.norm_sqr();
        x[i] = 0.0;
    }
    Ok(total)
}

/// Single-tone MSE-optimal scalar calibration (Wiener solution).
///
/// Without a noise model: C = G+* / (|G+|^2 + |G-|^2), J = ell.
/// With one: the endpoint noise variance joins the denominator and
/// J = ell + (1 - ell) / SNR_out.
pub fn optimal_calibration(
    gains: &EndpointGains,
    noise: Option<&NoiseModel>,
) -> Result<CalibrationFactor> {
    let signal_gain = gains.g_plus.norm_sqr() + gains.g_minus.norm_sqr();
    if signal_gain <= 0.0 {
        return Err(EchtError::DegenerateDesign("zero endpoint signal gain".into()));
    }
    let ell = gains.g_minus.norm_sqr() / signal_gain;
    match noise {
        None => Ok(CalibrationFactor {
            c: gains.g_plus.conj() / signal_gain,
            residual_mse: ell,
            provenance: CalibrationProvenance::AnalyticNoiseless,
            noise_variance: None,
        }),
        Some(model) => {
            let sigma_w2 = model.endpoint_noise_variance;
            let snr_out = signal_gain / sigma_w2;
            Ok(CalibrationFactor {
                c: gains.g_plus.conj() / (signal_gain + sigma_w2),
                residual_mse: ell + (1.0 - ell) / snr_out,
                provenance: CalibrationProvenance::NoiseAware,
                noise_variance: Some(sigma_w2),
            })
        }
    }
}

/// Second-order population moments of (true endpoint Z, estimate Zhat).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationMoments {
    /// E[Zhat* Z]
    pub cross: Complex64,
    /// E[|Zhat|^2]
    pub estimate_power: f64,
    /// E[|Z|^2]
    pub true_power: f64,
}

/// General scalar Wiener calibration from population moments:
/// C = E[Zhat* Z] / E[|Zhat|^2], J = E[|Z|^2] (1 - |rho|^2).
pub fn general_optimal_calibration(moments: &PopulationMoments) -> Result<CalibrationFactor> {
    if !(moments.estimate_power > 0.0) {
        return Err(EchtError::InvalidArgument(
            "E[|Zhat|^2] must be positive for the Wiener solution".into(),
        ));
    }
    let c = moments.cross / moments.estimate_power;
    let rho_sq = if moments.true_power > 0.0 {
        moments.cross.norm_sqr() / (moments.estimate_power * moments.true_power)
    } else {
        0.0
    };
    Ok(CalibrationFactor {
        c,
        residual_mse: moments.true_power * (1.0 - rho_sq),
        provenance: CalibrationProvenance::External,
        noise_variance: None,
    })
}

/// Empirical calibration from M measured pairs (Z_i, Zhat_i):
/// C_M = sum Zhat_i* Z_i / sum |Zhat_i|^2. Converges to the Wiener solution
/// at the usual 1/sqrt(M) rate.
pub fn empirical_calibration(pairs: &[(Complex64, Complex64)]) -> Result<CalibrationFactor> {
    if pairs.is_empty() {
        return Err(EchtError::InvalidArgument("need at least one calibration pair".into()));
    }
    let mut cross = Complex64::new(0.0, 0.0);
    let mut est_power = 0.0;
    let mut true_power = 0.0;
    for (z, zhat) in pairs {
        cross += zhat.conj() * z;
        est_power += zhat.norm_sqr();
        true_power += z.norm_sqr();
    }
    if est_power <= 0.0 {
        return Err(EchtError::InvalidArgument("all estimates are zero".into()));
    }
    let m = pairs.len() as f64;
    let moments = PopulationMoments {
        cross: cross / m,
        estimate_power: est_power / m,
        true_power: true_power / m,
    };
    let mut cal = general_optimal_calibration(&moments)?;
    cal.provenance = CalibrationProvenance::Empirical;
    Ok(cal)
}

/// Mean absolute phase and amplitude errors over the phi0 ensemble, by
/// uniform quadrature on (-pi, pi] (4096 points by default; the integrands
/// are band-limited trigonometric expressions, for which the uniform rule is
/// spectrally accurate).
pub fn phi0_mean_errors(gains: &EndpointGains, c: Option<Complex64>, points: usize) -> (f64, f64) {
    let c = c.unwrap_or(Complex64::new(1.0, 0.0));
    let mut phase_sum = 0.0;
    let mut amp_sum = 0.0;
    for i in 0..points {
        let phi0 = -PI + 2.0 * PI * (i as f64 + 0.5) / points as f64;
        let f = c * endpoint_gain_f(gains, phi0);
        phase_sum += f.arg().abs();
        amp_sum += (f.norm() - 1.0).abs();
    }
    (phase_sum / points as f64, amp_sum / points as f64)
}

// ---------------------------------------------------------------------------
// Phase-error distribution for a circular Gaussian residual.
// ---------------------------------------------------------------------------

/// Stable form of the endpoint phase-error density for residual power J:
/// p(phi) = (1/2pi) [ e^{-1/J} + sqrt(pi/J) cos(phi) e^{-sin^2(phi)/J}
///                    erfc(-cos(phi)/sqrt(J)) ].
pub fn phase_error_pdf(phi: f64, j: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    let base = (-1.0 / j).exp();
    let bulk = (PI / j).sqrt() * c * (-s * s / j).exp() * erfc(-c / j.sqrt());
    (base + bulk) / (2.0 * PI)
}

/// Small-error phase standard deviation sqrt(J/2), radians.
pub fn phase_sigma_simple(j: f64) -> f64 {
    (j / 2.0).sqrt()
}

fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    if depth == 0 {
        return Err(EchtError::NonConvergence(
            "adaptive Simpson refinement exceeded the depth limit".into(),
        ));
    }
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        Ok(left + right + delta / 15.0)
    } else {
        let l = adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?;
        let r = adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?;
        Ok(l + r)
    }
}

/// Integrate f over [a, b] with adaptive Simpson refinement.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_simpson(&f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Exact phase standard deviation: sqrt of the second moment of the wrapped
/// phase-error density over (-pi, pi], radians. Tends to sqrt(J/2) for small
/// J and to pi/sqrt(3) (uniform phase) as J -> infinity.
pub fn phase_sigma_exact(j: f64) -> Result<f64> {
    if !(j > 0.0) {
        return Err(EchtError::InvalidArgument("J must be positive".into()));
    }
    // Symmetric density: integrate phi^2 p(phi) on [0, pi] and double.
    // For small J the density is a near-Gaussian spike of width sqrt(J/2);
    // a single adaptive pass over [0, pi] can terminate before any probe
    // lands on the spike, so split the domain into geometrically growing
    // segments scaled by that width.
    let scale = (j / 2.0).sqrt().min(PI);
    let mut edges = vec![0.0];
    let mut e = scale;
    while e < PI {
        edges.push(e);
        e *= 2.0;
    }
    edges.push(PI);
    let mut second_moment = 0.0;
    for pair in edges.windows(2) {
        second_moment += integrate_adaptive(
            |phi| phi * phi * phase_error_pdf(phi, j),
            pair[0],
            pair[1],
            1e-9 / (edges.len() - 1) as f64,
        )?;
    }
    Ok((2.0 * second_moment).sqrt())
}

// ---------------------------------------------------------------------------
// Reporting.
// ---------------------------------------------------------------------------

/// JSON calibration report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    #[serde(rename = "G_plus")]
    pub g_plus: [f64; 2],
    #[serde(rename = "G_minus")]
    pub g_minus: [f64; 2],
    pub r: f64,
    pub alpha_rad: f64,
    pub delta_rad: f64,
    pub tau_g_samples: f64,
    #[serde(rename = "C")]
    pub c: [f64; 2],
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "G_noise")]
    pub g_noise: f64,
    pub provenance: CalibrationProvenance,
    pub seed: u64,
}

pub fn calibration_report(
    gains: &EndpointGains,
    cal: &CalibrationFactor,
    g_noise: f64,
    seed: u64,
) -> CalibrationReport {
    CalibrationReport {
        g_plus: [gains.g_plus.re, gains.g_plus.im],
        g_minus: [gains.g_minus.re, gains.g_minus.im],
        r: gains.r,
        alpha_rad: gains.alpha,
        delta_rad: gains.delta,
        tau_g_samples: gains.group_delay,
        c: [cal.c.re, cal.c.im],
        j: cal.residual_mse,
        g_noise,
        provenance: cal.provenance,
        seed,
    }
}
