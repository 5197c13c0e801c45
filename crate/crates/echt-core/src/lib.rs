//! Causal per-sample instantaneous-phase estimation from an
//! endpoint-corrected Hilbert transform, with closed-form endpoint-error
//! analysis, MSE-optimal scalar calibration, a white-noise error model,
//! circular statistics, frequency tracking and a synthetic-signal lab.
//!
//! Pipeline: take the most recent N samples, DFT, apply the one-sided
//! analytic mask together with a bandpass frequency response evaluated at
//! the exact DFT bin frequencies, inverse DFT, and keep the final sample of
//! the analytic result. The phase and amplitude of that endpoint are the
//! causal estimates for "now". The endpoint's systematic error is a
//! closed-form function of two complex gains (G+, G-), which yields both
//! hard error bounds and a scalar calibration factor that minimises the
//! mean-square endpoint error.

pub mod calibration;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod filter;
pub mod siglab;
pub mod spectral;
pub mod stats;
pub mod tracker;

pub use calibration::{
    calibration_report, compute_endpoint_gains, empirical_calibration, endpoint_gain_f,
    endpoint_gains_at, general_optimal_calibration, noise_gain, optimal_calibration,
    phase_error_pdf, phase_sigma_exact, phase_sigma_simple, CalibrationFactor,
    CalibrationProvenance, CalibrationReport, EndpointGains, NoiseModel, PopulationMoments,
};
pub use engine::{
    echt_endpoint, echt_window, EchtConfig, EchtProcessor, EchtStream, FilterChoice, PhaseEstimate,
};
pub use error::{EchtError, Result};
pub use filter::{BandpassSpec, DigitalFilter, FilterFamily, FilterJson, Sos};
pub use siglab::{
    load_binary, offline_reference, save_binary, save_csv, synthesize, ReferenceMethod,
    ReferencePhase, SignalKind, SignalSpec,
};
pub use spectral::{
    analytic_mask, dft_forward, dirichlet_kernel, AnalyticMask, FrequencyGrid, Spectrum,
};
pub use stats::{paired_circular_permutation_test, summarize_errors, wrap, ErrorStats};
pub use tracker::{estimate_f0, TrackedEstimator, TrackerConfig, TrackerEvent};
