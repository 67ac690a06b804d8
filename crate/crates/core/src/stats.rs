//! Statistical analyses over detections: trigger-aligned T1-dip
//! aggregation, inter-jump delay histogram with its finite-duration
//! Poisson fit, coincidence-vs-distance Gaussian fit, chip-area
//! normalized impact rates, and windowed Pearson-r scrambling
//! classification.

use alloc::vec;
use alloc::vec::Vec;

use crate::chip::ChipLayout;
use crate::detector::MultiQubitJump;
use crate::error::Error;
use crate::fit::{gaussian_smooth, nelder_mead};
use crate::Result;

// ---------------------------------------------------------------------------
// Trigger-aligned T1 dip
// ---------------------------------------------------------------------------

/// Accumulates M0 shots around trigger times, across events and runs.
///
/// Offset 0 is the trigger repetition itself (the first post-step point,
/// which is where the simulator places the transient dip). Windows are
/// truncated at run edges.
#[derive(Debug, Clone)]
pub struct DipAccumulator {
    window: usize,
    sums: Vec<f64>,
    counts: Vec<u64>,
    n_events: usize,
}

impl DipAccumulator {
    pub fn new(window: usize) -> Self {
        DipAccumulator {
            window,
            sums: vec![0.0; 2 * window + 1],
            counts: vec![0; 2 * window + 1],
            n_events: 0,
        }
    }

    /// Add one single-qubit detection: the qubit's M0 stream and the
    /// trigger repetition index.
    pub fn add_event(&mut self, m0: &[u8], trigger: usize) {
        let w = self.window as i64;
        let t = trigger as i64;
        for off in -w..=w {
            let idx = t + off;
            if idx >= 0 && (idx as usize) < m0.len() {
                let slot = (off + w) as usize;
                self.sums[slot] += m0[idx as usize] as f64;
                self.counts[slot] += 1;
            }
        }
        self.n_events += 1;
    }

    pub fn n_events(&self) -> usize {
        self.n_events
    }

    /// Fold another accumulator with the same window into this one.
    pub fn merge(&mut self, other: &DipAccumulator) -> Result<()> {
        if other.window != self.window {
            return Err(Error::MisalignedSeries { left: self.window, right: other.window });
        }
        for (s, o) in self.sums.iter_mut().zip(&other.sums) {
            *s += o;
        }
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.n_events += other.n_events;
        Ok(())
    }

    /// Average across events and compute the background z-scores.
    pub fn finalize(&self, smoothing_sigma: f64) -> Result<DipProfile> {
        if self.n_events == 0 {
            return Err(Error::NoDetections);
        }
        let w = self.window;
        let mean: Vec<f64> = self
            .sums
            .iter()
            .zip(&self.counts)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
            .collect();
        // background statistics exclude only the post-trigger point itself
        let bg: Vec<f64> = mean
            .iter()
            .enumerate()
            .filter(|&(i, v)| i != w && v.is_finite())
            .map(|(_, &v)| v)
            .collect();
        if bg.len() < 2 {
            return Err(Error::InsufficientData("dip window too small for background"));
        }
        let bg_mean = bg.iter().sum::<f64>() / bg.len() as f64;
        let bg_var =
            bg.iter().map(|v| (v - bg_mean) * (v - bg_mean)).sum::<f64>() / (bg.len() - 1) as f64;
        let bg_sigma = libm::sqrt(bg_var);
        let z: Vec<f64> = mean.iter().map(|&v| (v - bg_mean) / bg_sigma).collect();
        Ok(DipProfile {
            window: w,
            mean: mean.clone(),
            smoothed: gaussian_smooth(&mean, smoothing_sigma),
            counts: self.counts.clone(),
            background_mean: bg_mean,
            background_sigma: bg_sigma,
            z,
            n_events: self.n_events,
        })
    }
}

/// Trigger-aligned mean P(M0=1) and its significance profile.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DipProfile {
    pub window: usize,
    /// Mean P(M0=1) per offset in `[-window, window]`.
    pub mean: Vec<f64>,
    /// Gaussian-smoothed mean (reporting only; never used for z-scores).
    pub smoothed: Vec<f64>,
    pub counts: Vec<u64>,
    pub background_mean: f64,
    pub background_sigma: f64,
    /// Per-offset z-score against the background.
    pub z: Vec<f64>,
    pub n_events: usize,
}

impl DipProfile {
    /// z-score of the post-trigger point (offset 0).
    pub fn post_trigger_z(&self) -> f64 {
        self.z[self.window]
    }

    /// Most negative z within `half_span` points of the trigger.
    pub fn min_z_near_trigger(&self, half_span: usize) -> f64 {
        let lo = self.window - half_span.min(self.window);
        let hi = (self.window + half_span).min(self.z.len() - 1);
        self.z[lo..=hi].iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

// ---------------------------------------------------------------------------
// Inter-jump delay histogram and modified Poisson fit
// ---------------------------------------------------------------------------

/// Left-closed histogram of inter-jump delays; the first bin includes
/// the zero delays of simultaneous triggers.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DelayHistogram {
    pub bin_width_s: f64,
    pub counts: Vec<u64>,
    pub n_delays: usize,
}

/// Pool consecutive-trigger delays per run and histogram them.
///
/// `per_run_triggers` holds all single-qubit trigger times (seconds) of
/// each run, not necessarily sorted. `t_max` bounds the histogram range.
pub fn delay_histogram(
    per_run_triggers: &[Vec<f64>],
    bin_width_s: f64,
    t_max_s: f64,
) -> Result<DelayHistogram> {
    if !(bin_width_s > 0.0) || !(t_max_s > bin_width_s) {
        return Err(Error::invalid("bin width must be positive and smaller than t_max"));
    }
    let n_bins = libm::ceil(t_max_s / bin_width_s) as usize;
    let mut counts = vec![0u64; n_bins];
    let mut n_delays = 0;
    for run in per_run_triggers {
        let mut times = run.clone();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in times.windows(2) {
            let delta = pair[1] - pair[0];
            let bin = ((delta / bin_width_s) as usize).min(n_bins - 1);
            counts[bin] += 1;
            n_delays += 1;
        }
    }
    Ok(DelayHistogram { bin_width_s, counts, n_delays })
}

/// Fitted inter-jump delay model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DelayFit {
    pub tau_jump_s: f64,
    pub p_coinc: f64,
    pub run_duration_s: f64,
    pub bin_width_s: f64,
    /// Poisson-weighted sum of squared residuals of the fit.
    pub weighted_sse: f64,
}

/// Normalization constant of the finite-duration exponential density
/// `N exp(-delta/tau) (1 - delta/T)` so it integrates to one on `[0, T]`.
pub fn delay_pdf_norm(tau: f64, t_total: f64) -> f64 {
    let e = libm::exp(-t_total / tau);
    1.0 / (tau - tau * tau * (1.0 - e) / t_total)
}

/// Continuous part of the delay density at `delta` (point mass excluded).
pub fn delay_pdf(delta: f64, tau: f64, p_coinc: f64, t_total: f64) -> f64 {
    if !(0.0..=t_total).contains(&delta) {
        return 0.0;
    }
    (1.0 - p_coinc) * delay_pdf_norm(tau, t_total) * libm::exp(-delta / tau)
        * (1.0 - delta / t_total)
}

/// Integral of the continuous density over `[a, b]` (closed form).
fn delay_pdf_integral(a: f64, b: f64, tau: f64, t_total: f64) -> f64 {
    let ea = libm::exp(-a / tau);
    let eb = libm::exp(-b / tau);
    let plain = tau * (ea - eb);
    let weighted = tau * ((a + tau) * ea - (b + tau) * eb);
    delay_pdf_norm(tau, t_total) * (plain - weighted / t_total)
}

/// Expected probability mass of bin `i`, point mass included in bin 0.
pub fn delay_bin_probability(
    bin: usize,
    bin_width: f64,
    tau: f64,
    p_coinc: f64,
    t_total: f64,
) -> f64 {
    let a = bin as f64 * bin_width;
    let b = ((bin + 1) as f64 * bin_width).min(t_total);
    if a >= t_total {
        return 0.0;
    }
    let cont = (1.0 - p_coinc) * delay_pdf_integral(a, b, tau, t_total);
    if bin == 0 {
        cont + p_coinc
    } else {
        cont
    }
}

/// Least-squares fit of `(tau_jump, p_coinc)` to a delay histogram, with
/// Poisson-weighted residuals on bin counts.
pub fn fit_modified_poisson(hist: &DelayHistogram, t_total_s: f64) -> Result<DelayFit> {
    if hist.n_delays == 0 {
        return Err(Error::InsufficientData("empty delay histogram"));
    }
    let occupied = hist.counts.iter().filter(|&&c| c > 0).count();
    if hist.counts.len() < 2 || occupied < 2 {
        return Err(Error::DegenerateFit("delay histogram has a single bin"));
    }
    let n = hist.n_delays as f64;
    let bw = hist.bin_width_s;

    // moment-based starting point: mean delay beyond the first bin
    let mut tail_sum = 0.0;
    let mut tail_n = 0.0;
    for (i, &c) in hist.counts.iter().enumerate().skip(1) {
        tail_sum += (i as f64 + 0.5) * bw * c as f64;
        tail_n += c as f64;
    }
    let tau0 = if tail_n > 0.0 { (tail_sum / tail_n).max(bw) } else { bw };
    let first_frac = hist.counts[0] as f64 / n;
    let p0 = first_frac.clamp(0.02, 0.9);

    let objective = |x: &[f64]| {
        let tau = libm::exp(x[0]);
        let p_coinc = 1.0 / (1.0 + libm::exp(-x[1]));
        let mut sse = 0.0;
        for (i, &c) in hist.counts.iter().enumerate() {
            let expected = n * delay_bin_probability(i, bw, tau, p_coinc, t_total_s);
            let weight = 1.0 / (c as f64).max(1.0);
            let resid = c as f64 - expected;
            sse += weight * resid * resid;
        }
        sse
    };
    let x0 = [libm::log(tau0), libm::log(p0 / (1.0 - p0))];
    let (x, sse) = nelder_mead(objective, &x0, &[0.7, 0.7], 600);
    Ok(DelayFit {
        tau_jump_s: libm::exp(x[0]),
        p_coinc: 1.0 / (1.0 + libm::exp(-x[1])),
        run_duration_s: t_total_s,
        bin_width_s: bw,
        weighted_sse: sse,
    })
}

// ---------------------------------------------------------------------------
// Coincidence rate vs distance
// ---------------------------------------------------------------------------

/// Simultaneous-jump rate of one qubit pair.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairRate {
    pub qubit_a: u32,
    pub qubit_b: u32,
    pub distance_mm: f64,
    pub coincidences: u64,
    pub rate_per_hour: f64,
}

/// Gaussian falloff fit of coincidence rate vs pair distance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DistanceFit {
    pub pairs: Vec<PairRate>,
    /// Rate at zero separation, events per hour.
    pub amplitude_per_hour: f64,
    pub sigma_mm: f64,
    /// Fewer than two distinct distances carry coincidences.
    pub under_determined: bool,
    /// The fitted sigma ran away (flat data); its value is unreliable.
    pub diverged: bool,
}

/// Per-pair coincidence rates and a Gaussian falloff fit
/// `A exp(-d^2 / (2 sigma^2))`, Poisson-weighted on counts.
///
/// `excluded` qubits are dropped from the pair enumeration.
pub fn coincidence_vs_distance(
    clusters: &[MultiQubitJump],
    layout: &ChipLayout,
    detector_time_hours: f64,
    excluded: &[u32],
) -> Result<DistanceFit> {
    if !(detector_time_hours > 0.0) {
        return Err(Error::invalid("detector_time_hours must be positive"));
    }
    if !clusters.iter().any(|c| c.is_multi_qubit()) {
        return Err(Error::NoDetections);
    }
    let ids: Vec<u32> = layout
        .active_ids()
        .iter()
        .copied()
        .filter(|id| !excluded.contains(id))
        .collect();
    let mut pairs = Vec::new();
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            let coincidences = clusters
                .iter()
                .filter(|c| c.is_multi_qubit() && c.contains_qubit(a) && c.contains_qubit(b))
                .count() as u64;
            pairs.push(PairRate {
                qubit_a: a,
                qubit_b: b,
                distance_mm: layout.distance(a, b)?,
                coincidences,
                rate_per_hour: coincidences as f64 / detector_time_hours,
            });
        }
    }

    let mut hot_distances: Vec<f64> =
        pairs.iter().filter(|p| p.coincidences > 0).map(|p| p.distance_mm).collect();
    hot_distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
    hot_distances.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let under_determined = hot_distances.len() < 2;

    let d_max = pairs.iter().map(|p| p.distance_mm).fold(0.0, f64::max);
    let total: u64 = pairs.iter().map(|p| p.coincidences).sum();
    let amp0 = (total as f64 / detector_time_hours).max(1.0 / detector_time_hours);
    let sigma0 = (d_max / 3.0).max(0.1);

    let objective = |x: &[f64]| {
        let amp = libm::exp(x[0]);
        let sigma = libm::exp(x[1]);
        let mut sse = 0.0;
        for p in &pairs {
            let model = amp
                * libm::exp(-p.distance_mm * p.distance_mm / (2.0 * sigma * sigma))
                * detector_time_hours;
            let weight = 1.0 / (p.coincidences as f64).max(1.0);
            let resid = p.coincidences as f64 - model;
            sse += weight * resid * resid;
        }
        sse
    };
    let (x, _) = nelder_mead(objective, &[libm::log(amp0), libm::log(sigma0)], &[0.8, 0.6], 500);
    let amplitude = libm::exp(x[0]);
    let sigma = libm::exp(x[1]);
    let diverged = sigma > 10.0 * d_max;
    Ok(DistanceFit {
        pairs,
        amplitude_per_hour: amplitude,
        sigma_mm: sigma,
        under_determined,
        diverged,
    })
}

// ---------------------------------------------------------------------------
// Normalized impact rate
// ---------------------------------------------------------------------------

/// Impact rate normalized by chip area, events / (s * mm^2).
pub fn normalized_rate(tau_jump_s: f64, chip_area_mm2: f64) -> Result<f64> {
    if !(tau_jump_s > 0.0) || !(chip_area_mm2 > 0.0) {
        return Err(Error::invalid("tau and area must be positive"));
    }
    Ok(1.0 / (tau_jump_s * chip_area_mm2))
}

// ---------------------------------------------------------------------------
// Windowed Pearson correlation and scrambling classification
// ---------------------------------------------------------------------------

/// Pearson correlation between the mean spectra of the `window`
/// iterations before and after each time step.
///
/// `frames` is iteration-major with `n_steps` stride (bits or
/// probabilities). Entries where either window would leave the series, or
/// where a window has zero variance, are `None`.
pub fn pearson_window_r(
    frames: &[u8],
    n_steps: usize,
    n_iterations: usize,
    window: usize,
) -> Result<Vec<Option<f64>>> {
    if n_steps == 0 || frames.len() != n_steps * n_iterations {
        return Err(Error::MisalignedSeries { left: frames.len(), right: n_steps * n_iterations });
    }
    if window == 0 || 2 * window > n_iterations {
        return Err(Error::invalid("window must fit twice into the series"));
    }
    let frame = |i: usize| &frames[i * n_steps..(i + 1) * n_steps];
    let mut r = vec![None; n_iterations];
    // sliding per-step sums of the before and after windows
    let mut before = vec![0.0f64; n_steps];
    let mut after = vec![0.0f64; n_steps];
    for i in 0..window {
        for (s, &b) in before.iter_mut().zip(frame(i)) {
            *s += b as f64;
        }
        for (s, &b) in after.iter_mut().zip(frame(window + i)) {
            *s += b as f64;
        }
    }
    for t in window..=n_iterations - window {
        if t > window {
            // advance both windows by one iteration
            let leave_before = frame(t - window - 1);
            let cross = frame(t - 1);
            let enter_after = frame(t + window - 1);
            for s in 0..n_steps {
                before[s] += cross[s] as f64 - leave_before[s] as f64;
                after[s] += enter_after[s] as f64 - cross[s] as f64;
            }
        }
        if t == n_iterations {
            break;
        }
        r[t] = pearson(&before, &after);
    }
    Ok(r)
}

/// Standard normalized Pearson estimator; `None` for zero variance.
fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// One contiguous run of below-threshold correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelationDip {
    pub start: usize,
    pub end: usize,
    /// Iteration of the deepest point.
    pub argmin: usize,
    pub min_r: f64,
}

/// Scrambling classification result.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScrambleReport {
    pub dips: Vec<CorrelationDip>,
    /// (dip argmin iteration, coincident multi-qubit jump iteration)
    pub scrambling_events: Vec<(usize, usize)>,
    /// Fraction of defined r values below the threshold.
    pub frac_time_below: f64,
    /// Fraction of multi-qubit jumps with a coincident dip.
    pub frac_jumps_with_dip: f64,
}

/// Declare scrambling where an r dip coincides (within one window) with a
/// multi-qubit jump.
///
/// `jump_iterations` are the trigger iterations of multi-qubit jumps on
/// the averaged-detector time base; all must lie inside the series.
pub fn classify_scrambling(
    r: &[Option<f64>],
    jump_iterations: &[usize],
    r_threshold: f64,
    window: usize,
) -> Result<ScrambleReport> {
    if let Some(&bad) = jump_iterations.iter().find(|&&j| j >= r.len()) {
        return Err(Error::MisalignedSeries { left: r.len(), right: bad });
    }
    let mut dips: Vec<CorrelationDip> = Vec::new();
    let mut open: Option<CorrelationDip> = None;
    let mut below = 0usize;
    let mut defined = 0usize;
    for (i, val) in r.iter().enumerate() {
        let flagged = match val {
            Some(v) => {
                defined += 1;
                if *v < r_threshold {
                    below += 1;
                    true
                } else {
                    false
                }
            }
            None => false,
        };
        if flagged {
            let v = val.unwrap();
            match open.as_mut() {
                Some(dip) => {
                    dip.end = i;
                    if v < dip.min_r {
                        dip.min_r = v;
                        dip.argmin = i;
                    }
                }
                None => open = Some(CorrelationDip { start: i, end: i, argmin: i, min_r: v }),
            }
        } else if let Some(dip) = open.take() {
            dips.push(dip);
        }
    }
    if let Some(dip) = open {
        dips.push(dip);
    }

    let mut scrambling_events = Vec::new();
    let mut jumps_with_dip = 0usize;
    for &jump in jump_iterations {
        if let Some(dip) = dips.iter().find(|d| d.argmin.abs_diff(jump) <= window) {
            jumps_with_dip += 1;
            scrambling_events.push((dip.argmin, jump));
        }
    }
    Ok(ScrambleReport {
        dips,
        scrambling_events,
        frac_time_below: if defined > 0 { below as f64 / defined as f64 } else { 0.0 },
        frac_jumps_with_dip: if jump_iterations.is_empty() {
            0.0
        } else {
            jumps_with_dip as f64 / jump_iterations.len() as f64
        },
    })
}
