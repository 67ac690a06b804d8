//! Matched-filter jump detection: step-template cross-correlation, median
//! normalization, thresholded peak search with a refractory period, and
//! chain-clustering of single-qubit triggers into multi-qubit jumps.
//!
//! The template is the piecewise step
//! `-1` for `-w..-1`, `0` at the center, `+1` for `1..w` (in samples).
//! A step in the trace turns into a peak in the absolute correlation, so
//! step detection reduces to peak detection. The correlation is evaluated
//! only where the template fully overlaps the trace; output indices in the
//! overhang collar are excluded from the peak search. With an ideal step,
//! the peak lands on the first post-step sample, which is what
//! `t_trigger` means everywhere downstream.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::Result;

/// Tuning knobs for the detection pipeline. Time-valued fields are in
/// seconds and are converted to sample counts with the sample period of
/// the trace being analyzed.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectorParams {
    /// Half-width of the step template, seconds (default 25 ms).
    pub template_half_width_s: f64,
    /// Detection threshold on the median-normalized jump signal.
    pub threshold: f64,
    /// Minimum separation between triggers on the same qubit, seconds.
    pub min_separation_s: f64,
    /// Maximum gap between consecutive triggers inside one cluster, seconds.
    pub cluster_gap_s: f64,
    /// Template length for the averaged-trace variant, in iterations.
    pub averaged_template_len: usize,
    /// Threshold for the averaged-trace variant.
    pub averaged_threshold: f64,
    /// Qubits excluded from detection and rate analyses.
    pub excluded_qubits: Vec<u32>,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            template_half_width_s: 0.025,
            threshold: 14.0,
            min_separation_s: 0.050,
            cluster_gap_s: 0.010,
            averaged_template_len: 200,
            averaged_threshold: 8.0,
            excluded_qubits: Vec::new(),
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.template_half_width_s > 0.0) {
            return Err(Error::invalid("template_half_width_s must be positive"));
        }
        if !(self.threshold > 0.0) || !(self.averaged_threshold > 0.0) {
            return Err(Error::invalid("thresholds must be positive"));
        }
        if !(self.min_separation_s > 0.0) || !(self.cluster_gap_s > 0.0) {
            return Err(Error::invalid("separations must be positive"));
        }
        if self.averaged_template_len < 2 {
            return Err(Error::invalid("averaged_template_len must be >= 2"));
        }
        Ok(())
    }

    /// Template half-width in samples for a trace with the given period.
    pub fn half_width_samples(&self, sample_period_s: f64) -> usize {
        (libm::round(self.template_half_width_s / sample_period_s) as usize).max(1)
    }

    pub fn min_separation_samples(&self, sample_period_s: f64) -> usize {
        (libm::round(self.min_separation_s / sample_period_s) as usize).max(1)
    }
}

/// A single-qubit trigger.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JumpDetection {
    pub qubit_id: u32,
    /// Sample index of the first post-step point.
    pub t_trigger: usize,
    /// Median-normalized jump-signal value at the peak.
    pub peak_value: f64,
}

/// A chain-cluster of triggers across qubits. Two or more members make a
/// multi-qubit jump; a singleton is an isolated single-qubit jump.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultiQubitJump {
    pub members: Vec<JumpDetection>,
    /// Earliest member trigger, seconds.
    pub start_s: f64,
    /// Latest member trigger, seconds.
    pub end_s: f64,
}

impl MultiQubitJump {
    pub fn is_multi_qubit(&self) -> bool {
        self.members.len() >= 2
    }

    pub fn contains_qubit(&self, id: u32) -> bool {
        self.members.iter().any(|d| d.qubit_id == id)
    }
}

/// Absolute matched-filter correlation, valid region only.
///
/// `values[j]` corresponds to trace index `j + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSignal {
    pub values: Vec<f64>,
    pub offset: usize,
    /// Set by [`normalize_by_median`] when the median was zero and the
    /// signal was zeroed out instead of divided.
    pub degenerate: bool,
}

/// Slide the step template along `trace` and take the absolute value.
///
/// Running sums make this O(n); for a 0/1 trace the sums are exact.
pub fn jump_signal(trace: &[f64], half_width: usize) -> Result<JumpSignal> {
    let w = half_width;
    let template_len = 2 * w + 1;
    if trace.len() < template_len {
        return Err(Error::TraceTooShort { trace_len: trace.len(), template_len });
    }
    let n_valid = trace.len() - 2 * w;
    let mut values = Vec::with_capacity(n_valid);
    // first center is i = w: leading = sum trace[w+1 ..= 2w], trailing = sum trace[0 ..= w-1]
    let mut leading: f64 = trace[w + 1..=2 * w].iter().sum();
    let mut trailing: f64 = trace[..w].iter().sum();
    for i in w..trace.len() - w {
        values.push((leading - trailing).abs());
        if i + 1 + w < trace.len() {
            leading += trace[i + 1 + w] - trace[i + 1];
            trailing += trace[i] - trace[i - w];
        }
    }
    Ok(JumpSignal { values, offset: w, degenerate: false })
}

/// Divide the signal by its median so a threshold reads as an SNR.
///
/// An all-zero (or majority-zero) signal has median zero; it is zeroed and
/// flagged degenerate instead of divided.
pub fn normalize_by_median(signal: &mut JumpSignal) {
    let median = median_of(&signal.values);
    if median > 0.0 {
        for v in &mut signal.values {
            *v /= median;
        }
    } else {
        for v in &mut signal.values {
            *v = 0.0;
        }
        signal.degenerate = true;
    }
}

fn median_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("jump signal values are finite"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Thresholded peak search with a refractory period.
///
/// Local maxima take the rightmost point of a plateau, which for an ideal
/// step is the first post-step sample. Conflicting peaks closer than
/// `min_separation` keep the larger one (ties keep the earlier).
pub fn find_triggers(
    signal: &JumpSignal,
    qubit_id: u32,
    threshold: f64,
    min_separation: usize,
) -> Vec<JumpDetection> {
    let v = &signal.values;
    if signal.degenerate || v.is_empty() {
        return Vec::new();
    }
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for j in 0..v.len() {
        let left_ok = j == 0 || v[j] >= v[j - 1];
        let right_ok = j + 1 == v.len() || v[j] > v[j + 1];
        if left_ok && right_ok && v[j] >= threshold {
            candidates.push((j, v[j]));
        }
    }
    // larger peaks claim their refractory window first; ties go to the earlier
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut kept: Vec<(usize, f64)> = Vec::new();
    for (j, val) in candidates {
        if kept.iter().all(|&(k, _)| j.abs_diff(k) >= min_separation) {
            kept.push((j, val));
        }
    }
    kept.sort_by_key(|&(j, _)| j);
    kept.into_iter()
        .map(|(j, val)| JumpDetection {
            qubit_id,
            t_trigger: j + signal.offset,
            peak_value: val,
        })
        .collect()
}

/// Full single-qubit pipeline on a raw 0/1 shot trace.
pub fn detect_trace(
    trace: &[f64],
    qubit_id: u32,
    params: &DetectorParams,
    sample_period_s: f64,
) -> Result<Vec<JumpDetection>> {
    params.validate()?;
    let mut signal = jump_signal(trace, params.half_width_samples(sample_period_s))?;
    normalize_by_median(&mut signal);
    Ok(find_triggers(
        &signal,
        qubit_id,
        params.threshold,
        params.min_separation_samples(sample_period_s),
    ))
}

/// Averaged-trace variant for interleaved spectroscopy: same pipeline on
/// per-iteration `P(MR=1)` with a longer template and a lower threshold.
/// Trigger resolution is one iteration. The refractory period is one
/// template length.
pub fn averaged_detect(
    detector_probs: &[f64],
    qubit_id: u32,
    params: &DetectorParams,
) -> Result<Vec<JumpDetection>> {
    params.validate()?;
    let half = (params.averaged_template_len / 2).max(1);
    let mut signal = jump_signal(detector_probs, half)?;
    normalize_by_median(&mut signal);
    Ok(find_triggers(
        &signal,
        qubit_id,
        params.averaged_threshold,
        params.averaged_template_len,
    ))
}

/// Chain-cluster detections from all qubits of one run.
///
/// Detections are sorted by trigger time; a gap of less than
/// `cluster_gap_s` chains two detections into the same cluster. Chaining
/// is transitive, so a run of short gaps yields one long cluster.
pub fn cluster_jumps(
    detections: &[JumpDetection],
    params: &DetectorParams,
    sample_period_s: f64,
) -> Vec<MultiQubitJump> {
    let mut sorted: Vec<JumpDetection> = detections.to_vec();
    sorted.sort_by(|a, b| a.t_trigger.cmp(&b.t_trigger).then(a.qubit_id.cmp(&b.qubit_id)));
    let mut clusters: Vec<MultiQubitJump> = Vec::new();
    for det in sorted {
        let t = det.t_trigger as f64 * sample_period_s;
        match clusters.last_mut() {
            Some(cluster) if t - cluster.end_s < params.cluster_gap_s => {
                cluster.end_s = t;
                cluster.members.push(det);
            }
            _ => clusters.push(MultiQubitJump { members: vec![det], start_s: t, end_s: t }),
        }
    }
    clusters
}
