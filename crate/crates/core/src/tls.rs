//! Interleaved Stark-swept TLS spectroscopy with a co-running averaged
//! jump detector, including impact-driven TLS scrambling and optional
//! single-TLS thermal diffusion.
//!
//! Each iteration emits one swept spectrum (one survival bit per sweep
//! step) and one averaged Ramsey detector value P(MR=1). Impacts jump the
//! qubit's offset charge (scaled by the spatial charge response) and, when
//! `scramble_fraction > 0`, resample that fraction of the TLS frequencies
//! uniformly in the sweep window.

use alloc::vec::Vec;

use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::chip::{ImpactEvent, QubitSite};
use crate::error::Error;
use crate::rng::{stream, StreamPurpose};
use crate::sim::{apply_meas_error, ramsey_prob, SimConfig};
use crate::Result;

const SECONDS_PER_HOUR: f64 = 3600.0;
/// Ramsey shots per iteration (and sweep steps per spectrum in the
/// reference configuration).
pub const DETECTOR_SHOTS_PER_ITERATION: usize = 251;

/// One TLS line: frequency offset from the unshifted qubit, linewidth
/// (FWHM), and dip depth (survival reduction at line center).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TlsLine {
    pub offset_hz: f64,
    pub linewidth_hz: f64,
    pub depth: f64,
}

/// Parameters of the interleaved spectroscopy experiment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TlsConfig {
    /// Sweep steps per spectrum.
    pub n_steps: usize,
    /// Half-range of the swept Stark shift, Hz (sweep covers +/- this).
    pub shift_range_hz: f64,
    /// Magnitude of the fixed Stark-tone detuning, Hz; the negative-shift
    /// half of the sweep uses the opposite sign.
    pub stark_detuning_hz: f64,
    /// Qubit anharmonicity, Hz (negative for a transmon).
    pub anharmonicity_hz: f64,
    pub tls_list: Vec<TlsLine>,
    /// Iterations of the interleaved sequence per run.
    pub n_iterations: usize,
    /// Fraction of TLSs whose frequency is resampled at each impact.
    pub scramble_fraction: f64,
    /// Random-walk step (Hz per iteration) of the first TLS, modeling
    /// thermal diffusion; None disables it.
    pub diffusing_tls: Option<f64>,
    /// Duration of the Stark probe, seconds.
    pub probe_duration_s: f64,
    /// Wall time of one iteration (spectroscopy + detector block), seconds.
    pub iteration_period_s: f64,
}

impl Default for TlsConfig {
    fn default() -> Self {
        TlsConfig {
            n_steps: 251,
            shift_range_hz: 20e6,
            stark_detuning_hz: 50e6,
            anharmonicity_hz: -300e6,
            tls_list: Vec::new(),
            n_iterations: 10_000,
            scramble_fraction: 0.5,
            diffusing_tls: None,
            probe_duration_s: 50e-6,
            iteration_period_s: 0.024,
        }
    }
}

impl TlsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(Error::invalid("n_steps must be >= 2"));
        }
        if !(self.shift_range_hz > 0.0) || !(self.probe_duration_s > 0.0) {
            return Err(Error::invalid("shift_range_hz and probe_duration_s must be positive"));
        }
        if !(self.iteration_period_s > 0.0) {
            return Err(Error::invalid("iteration_period_s must be positive"));
        }
        if !(0.0..=1.0).contains(&self.scramble_fraction) {
            return Err(Error::invalid("scramble_fraction must be in [0, 1]"));
        }
        for tls in &self.tls_list {
            if !(0.0..=1.0).contains(&tls.depth) {
                return Err(Error::invalid("TLS depth must be in [0, 1]"));
            }
            if !(tls.linewidth_hz > 0.0) {
                return Err(Error::invalid("TLS linewidth must be positive"));
            }
        }
        if self.n_iterations == 0 {
            return Err(Error::invalid("n_iterations must be positive"));
        }
        Ok(())
    }
}

/// AC-Stark shift of the qubit frequency:
/// `alpha * Omega^2 / (2 Delta (alpha + Delta))`.
pub fn stark_shift(omega_s_hz: f64, delta_s_hz: f64, alpha_hz: f64) -> Result<f64> {
    if delta_s_hz == 0.0 || alpha_hz + delta_s_hz == 0.0 {
        return Err(Error::invalid("resonant Stark detuning (singular denominator)"));
    }
    Ok(alpha_hz * omega_s_hz * omega_s_hz / (2.0 * delta_s_hz * (alpha_hz + delta_s_hz)))
}

/// Per-step qubit frequency shifts of the sweep.
///
/// The tone amplitude ramps linearly, so the shift axis has quadratic
/// spacing; the first half of the sweep uses detuning `-|Delta_s|`
/// (negative shifts), the second `+|Delta_s|`.
pub fn sweep_shifts(config: &TlsConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let alpha = config.anharmonicity_hz;
    let mut shifts = Vec::with_capacity(config.n_steps);
    for s in 0..config.n_steps {
        let u = 2.0 * s as f64 / (config.n_steps - 1) as f64 - 1.0;
        let delta = if u < 0.0 { -config.stark_detuning_hz } else { config.stark_detuning_hz };
        // amplitude at which the shift magnitude reaches shift_range
        let omega_max =
            libm::sqrt((config.shift_range_hz * 2.0 * delta * (alpha + delta) / alpha).abs());
        shifts.push(stark_shift(u.abs() * omega_max, delta, alpha)?);
    }
    Ok(shifts)
}

/// Output of one interleaved spectroscopy run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectrumSeries {
    pub n_steps: usize,
    pub n_iterations: usize,
    /// Qubit frequency shift at each sweep step, Hz.
    pub shifts_hz: Vec<f64>,
    /// MS survival bits, iteration-major: `frames[i * n_steps + s]`.
    pub frames: Vec<u8>,
    /// Averaged Ramsey outcome P(MR=1) per iteration.
    pub detector_probs: Vec<f64>,
    /// Iterations at which TLS scrambling occurred; absent for real data.
    pub ground_truth_scrambles: Option<Vec<usize>>,
}

impl SpectrumSeries {
    pub fn frame(&self, iteration: usize) -> &[u8] {
        &self.frames[iteration * self.n_steps..(iteration + 1) * self.n_steps]
    }
}

/// Simulate one qubit's interleaved TLS spectroscopy + jump detector run.
///
/// `impacts` must be sorted by time; times map to iterations via
/// `iteration_period_s`. Every impact jumps the offset charge by the
/// spatial charge response at the qubit, and scrambles the configured
/// fraction of TLS lines.
pub fn simulate_tls_series(
    tls: &TlsConfig,
    sim: &SimConfig,
    qubit: QubitSite,
    impacts: &[ImpactEvent],
) -> Result<SpectrumSeries> {
    tls.validate()?;
    sim.validate()?;
    if impacts.windows(2).any(|w| w[1].time < w[0].time) {
        return Err(Error::UnsortedImpacts);
    }
    let shifts = sweep_shifts(tls)?;
    let e = sim.meas_error;
    let baseline_survival = libm::exp(-tls.probe_duration_s / sim.baseline_t1_s);

    let mut rng_spec = stream(sim.seed, StreamPurpose::TlsSpectrum, qubit.id);
    let mut rng_det = stream(sim.seed, StreamPurpose::TlsDetector, qubit.id);
    let mut rng_scr = stream(sim.seed, StreamPurpose::TlsScramble, qubit.id);

    let mut lines = tls.tls_list.clone();
    let mut n_g0: f64 = rng_det.random();
    let sigma_step = libm::sqrt(
        sim.diffusion_var_per_hour / SECONDS_PER_HOUR * tls.iteration_period_s,
    );

    // (iteration, signed charge jump) per impact
    let mut jumps: Vec<(usize, f64)> = Vec::with_capacity(impacts.len());
    for ev in impacts {
        let response = ev.charge_response((qubit.x_mm, qubit.y_mm), sim.sigma_spatial_mm)?;
        let sign = if rng_scr.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
        let iter = (ev.time / tls.iteration_period_s) as usize;
        if iter < tls.n_iterations {
            jumps.push((iter, sign * response));
        }
    }

    let n_scramble =
        libm::round(tls.scramble_fraction * tls.tls_list.len() as f64) as usize;
    let mut frames = Vec::with_capacity(tls.n_iterations * tls.n_steps);
    let mut detector_probs = Vec::with_capacity(tls.n_iterations);
    let mut scrambles = Vec::new();
    let mut next_jump = 0;

    for iteration in 0..tls.n_iterations {
        if iteration > 0 && sigma_step > 0.0 {
            let g: f64 = StandardNormal.sample(&mut rng_det);
            n_g0 += sigma_step * g;
        }
        while next_jump < jumps.len() && jumps[next_jump].0 == iteration {
            n_g0 += jumps[next_jump].1;
            next_jump += 1;
            if n_scramble > 0 && !lines.is_empty() {
                for idx in index_sample(&mut rng_scr, lines.len(), n_scramble.min(lines.len())) {
                    lines[idx].offset_hz =
                        (rng_scr.random::<f64>() * 2.0 - 1.0) * tls.shift_range_hz;
                }
                scrambles.push(iteration);
            }
        }
        if let Some(step_hz) = tls.diffusing_tls {
            if !lines.is_empty() {
                let g: f64 = StandardNormal.sample(&mut rng_scr);
                lines[0].offset_hz += step_hz * g;
            }
        }

        // swept spectrum: survival loses a Lorentzian factor per TLS
        for &shift in &shifts {
            let mut p = baseline_survival;
            for line in &lines {
                let half = line.linewidth_hz / 2.0;
                let det = shift - line.offset_hz;
                let lorentz = half * half / (det * det + half * half);
                p *= libm::pow(1.0 - line.depth, lorentz);
            }
            let p_obs = apply_meas_error(p, e);
            frames.push((rng_spec.random::<f64>() < p_obs) as u8);
        }

        // averaged jump detector block
        let p1 = ramsey_prob(crate::chip::OffsetCharge::wrap(n_g0)?, sim);
        let p1_obs = apply_meas_error(p1, e);
        let mut ones = 0usize;
        for _ in 0..DETECTOR_SHOTS_PER_ITERATION {
            ones += (rng_det.random::<f64>() < p1_obs) as usize;
        }
        detector_probs.push(ones as f64 / DETECTOR_SHOTS_PER_ITERATION as f64);
    }

    Ok(SpectrumSeries {
        n_steps: tls.n_steps,
        n_iterations: tls.n_iterations,
        shifts_hz: shifts,
        frames,
        detector_probs,
        ground_truth_scrambles: Some(scrambles),
    })
}
