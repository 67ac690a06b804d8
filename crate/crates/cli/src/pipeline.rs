//! End-to-end analysis pipelines: simulate, detect, and aggregate
//! statistics over many runs without keeping more than one run's shot
//! data in memory per worker.

use anyhow::{anyhow, bail, Context, Result};
use qrad_core::chip::ChipLayout;
use qrad_core::detector::{
    averaged_detect, cluster_jumps, detect_trace, DetectorParams, JumpDetection, MultiQubitJump,
};
use qrad_core::sim::{simulate_run, RunRecord, SimConfig};
use qrad_core::stats::{
    classify_scrambling, coincidence_vs_distance, delay_histogram, fit_modified_poisson,
    normalized_rate, pearson_window_r, DelayFit, DelayHistogram, DipAccumulator, DipProfile,
    DistanceFit, ScrambleReport,
};
use qrad_core::tls::SpectrumSeries;
use rayon::prelude::*;
use serde::Serialize;

/// Default half-window of the trigger-aligned T1 dip profile, samples.
pub const DIP_WINDOW: usize = 25;
/// Reporting smoothing of the dip profile, samples.
pub const DIP_SMOOTHING_SIGMA: f64 = 10.0;
/// Delay histogram bin width for full-length runs, seconds.
pub const DELAY_BIN_S: f64 = 2.0;

/// Bin width scaled so short runs still resolve their delay range
/// (2 s bins assume the standard 44 s run, i.e. 22 bins).
pub fn delay_bin_width(run_duration_s: f64) -> f64 {
    DELAY_BIN_S.min(run_duration_s / 22.0)
}
/// Correlation threshold below which spectra count as decorrelated.
pub const SCRAMBLE_R_THRESHOLD: f64 = 0.4;

/// Build a rayon pool with the requested worker count (0 = all cores).
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")
}

/// Simulate `n_runs` independent runs; run `i` uses `seed + i`.
pub fn simulate_runs(
    config: &SimConfig,
    layout: &ChipLayout,
    n_runs: usize,
    workers: usize,
) -> Result<Vec<RunRecord>> {
    let pool = worker_pool(workers)?;
    pool.install(|| {
        (0..n_runs)
            .into_par_iter()
            .map(|i| {
                let run_config = SimConfig { seed: config.seed + i as u64, ..config.clone() };
                simulate_run(&run_config, layout).map_err(|e| anyhow!("run {i}: {e}"))
            })
            .collect()
    })
}

/// Matched-filter detection over every non-excluded qubit of one run,
/// returning clustered jumps.
pub fn detect_run(record: &RunRecord, params: &DetectorParams) -> Result<Vec<MultiQubitJump>> {
    let period = record.config.rep_period_s;
    let mut detections: Vec<JumpDetection> = Vec::new();
    for (qi, &qubit) in record.qubit_ids.iter().enumerate() {
        if params.excluded_qubits.contains(&qubit) {
            continue;
        }
        let trace: Vec<f64> = record.m1[qi].iter().map(|&b| b as f64).collect();
        detections.extend(detect_trace(&trace, qubit, params, period)?);
    }
    Ok(cluster_jumps(&detections, params, period))
}

/// Per-run summary kept after the shot data is dropped.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub clusters: Vec<MultiQubitJump>,
    pub dip: DipAccumulator,
    /// All single-qubit trigger times, seconds.
    pub trigger_times_s: Vec<f64>,
    /// Trigger minus nearest true impact repetition, when ground truth
    /// is available.
    pub trigger_offsets_reps: Vec<i64>,
    pub n_true_impacts: usize,
}

/// Simulate, detect, and summarize one run; shot data never escapes.
pub fn summarize_run(
    config: &SimConfig,
    layout: &ChipLayout,
    params: &DetectorParams,
    dip_window: usize,
) -> Result<RunSummary> {
    let record = simulate_run(config, layout)?;
    summarize_record(&record, params, dip_window)
}

/// Detection and summary for an already materialized run.
pub fn summarize_record(
    record: &RunRecord,
    params: &DetectorParams,
    dip_window: usize,
) -> Result<RunSummary> {
    let clusters = detect_run(record, params)?;
    let period = record.config.rep_period_s;
    let truth_reps: Vec<i64> = record
        .ground_truth
        .iter()
        .flatten()
        .map(|ev| (ev.time / period) as i64)
        .collect();
    let mut dip = DipAccumulator::new(dip_window);
    let mut trigger_times_s = Vec::new();
    let mut trigger_offsets_reps = Vec::new();
    for cluster in &clusters {
        for det in &cluster.members {
            trigger_times_s.push(det.t_trigger as f64 * period);
            if let Some(offset) = truth_reps
                .iter()
                .map(|&t| det.t_trigger as i64 - t)
                .min_by_key(|d| d.abs())
            {
                trigger_offsets_reps.push(offset);
            }
            if let Some(qi) = record.qubit_index(det.qubit_id) {
                dip.add_event(&record.m0[qi], det.t_trigger);
            }
        }
    }
    Ok(RunSummary {
        clusters,
        dip,
        trigger_times_s,
        trigger_offsets_reps,
        n_true_impacts: record.ground_truth.as_ref().map_or(0, Vec::len),
    })
}

/// Full multi-run replication report.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicationReport {
    pub n_runs: usize,
    pub detector_hours: f64,
    pub n_triggers: usize,
    pub n_true_impacts: usize,
    /// Median absolute trigger-vs-truth offset, repetition steps; absent
    /// without ground truth.
    pub mad_steps: Option<f64>,
    pub dip: DipProfile,
    pub histogram: DelayHistogram,
    pub delay_fit: DelayFit,
    pub distance_fit: DistanceFit,
    /// Impact rate per second per square millimeter of bounding box.
    pub rate_per_s_mm2: f64,
    pub chip_area_mm2: f64,
}

/// Per-run clusters alongside the aggregate report, for downstream use.
pub struct Replication {
    pub report: ReplicationReport,
    pub clusters_per_run: Vec<Vec<MultiQubitJump>>,
    pub dip_accumulator: DipAccumulator,
}

/// Simulate `n_runs` runs and push each through the whole analysis
/// chain: detection, dip aggregation, delay fit, distance fit, and the
/// area-normalized rate.
pub fn replicate(
    config: &SimConfig,
    layout: &ChipLayout,
    params: &DetectorParams,
    n_runs: usize,
    workers: usize,
    area_mm2: Option<f64>,
) -> Result<Replication> {
    if n_runs == 0 {
        bail!("n_runs must be positive");
    }
    let pool = worker_pool(workers)?;
    let summaries: Vec<RunSummary> = pool.install(|| {
        (0..n_runs)
            .into_par_iter()
            .map(|i| {
                let run_config = SimConfig { seed: config.seed + i as u64, ..config.clone() };
                summarize_run(&run_config, layout, params, DIP_WINDOW)
                    .map_err(|e| anyhow!("run {i}: {e}"))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut dip_acc = DipAccumulator::new(DIP_WINDOW);
    let mut per_run_triggers = Vec::with_capacity(n_runs);
    let mut clusters_per_run = Vec::with_capacity(n_runs);
    let mut n_true_impacts = 0;
    let mut offsets: Vec<i64> = Vec::new();
    for s in summaries {
        dip_acc.merge(&s.dip)?;
        per_run_triggers.push(s.trigger_times_s);
        clusters_per_run.push(s.clusters);
        n_true_impacts += s.n_true_impacts;
        offsets.extend(s.trigger_offsets_reps);
    }
    let mad_steps = median_abs(&offsets);
    let n_triggers: usize = per_run_triggers.iter().map(Vec::len).sum();

    let dip = dip_acc.finalize(DIP_SMOOTHING_SIGMA)?;
    let histogram = delay_histogram(
        &per_run_triggers,
        delay_bin_width(config.run_duration_s),
        config.run_duration_s,
    )?;
    let delay_fit = fit_modified_poisson(&histogram, config.run_duration_s)?;

    let detector_hours = n_runs as f64 * config.run_duration_s / 3600.0;
    let all_clusters: Vec<MultiQubitJump> =
        clusters_per_run.iter().flatten().cloned().collect();
    let distance_fit = coincidence_vs_distance(
        &all_clusters,
        layout,
        detector_hours,
        &params.excluded_qubits,
    )?;

    let chip_area_mm2 = area_mm2.unwrap_or_else(|| {
        let (x0, y0, x1, y1) = layout.bounding_box();
        (x1 - x0) * (y1 - y0)
    });
    let rate_per_s_mm2 = normalized_rate(delay_fit.tau_jump_s, chip_area_mm2)?;

    Ok(Replication {
        report: ReplicationReport {
            n_runs,
            detector_hours,
            n_triggers,
            n_true_impacts,
            mad_steps,
            dip,
            histogram,
            delay_fit,
            distance_fit,
            rate_per_s_mm2,
            chip_area_mm2,
        },
        clusters_per_run,
        dip_accumulator: dip_acc,
    })
}

fn median_abs(offsets: &[i64]) -> Option<f64> {
    if offsets.is_empty() {
        return None;
    }
    let mut abs: Vec<i64> = offsets.iter().map(|d| d.abs()).collect();
    abs.sort_unstable();
    let n = abs.len();
    Some(if n % 2 == 1 {
        abs[n / 2] as f64
    } else {
        (abs[n / 2 - 1] + abs[n / 2]) as f64 / 2.0
    })
}

/// One point of a detection-threshold sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdPoint {
    pub threshold: f64,
    pub n_triggers: usize,
    pub tau_jump_s: f64,
}

/// Re-run detection and the delay fit at each threshold on one shared
/// set of simulated runs.
pub fn sweep_thresholds(
    config: &SimConfig,
    layout: &ChipLayout,
    params: &DetectorParams,
    thresholds: &[f64],
    n_runs: usize,
    workers: usize,
) -> Result<Vec<ThresholdPoint>> {
    if thresholds.is_empty() {
        bail!("no thresholds given");
    }
    let pool = worker_pool(workers)?;
    // per run, per threshold: trigger times
    let per_run: Vec<Vec<Vec<f64>>> = pool.install(|| {
        (0..n_runs)
            .into_par_iter()
            .map(|i| {
                let run_config = SimConfig { seed: config.seed + i as u64, ..config.clone() };
                let record = simulate_run(&run_config, layout)?;
                let mut by_threshold = Vec::with_capacity(thresholds.len());
                for &threshold in thresholds {
                    let p = DetectorParams { threshold, ..params.clone() };
                    let clusters = detect_run(&record, &p)?;
                    by_threshold.push(
                        clusters
                            .iter()
                            .flat_map(|c| &c.members)
                            .map(|d| d.t_trigger as f64 * record.config.rep_period_s)
                            .collect::<Vec<f64>>(),
                    );
                }
                Ok(by_threshold)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut points = Vec::with_capacity(thresholds.len());
    for (ti, &threshold) in thresholds.iter().enumerate() {
        let triggers: Vec<Vec<f64>> = per_run.iter().map(|r| r[ti].clone()).collect();
        let n_triggers = triggers.iter().map(Vec::len).sum();
        let histogram =
            delay_histogram(&triggers, delay_bin_width(config.run_duration_s), config.run_duration_s)?;
        let fit = fit_modified_poisson(&histogram, config.run_duration_s)?;
        points.push(ThresholdPoint { threshold, n_triggers, tau_jump_s: fit.tau_jump_s });
    }
    Ok(points)
}

/// Scrambling analysis of a spectroscopy series.
#[derive(Debug, Clone, Serialize)]
pub struct ScrambleAnalysis {
    pub report: ScrambleReport,
    /// Windowed before/after correlation per iteration.
    pub r: Vec<Option<f64>>,
    /// Trigger iterations of charge jumps on the interleaved detector.
    pub jump_iterations: Vec<usize>,
}

/// Detect charge jumps on the interleaved detector stream, compute the
/// windowed spectrum correlation, and match dips to jumps.
pub fn analyze_scrambling(
    series: &SpectrumSeries,
    params: &DetectorParams,
    window: usize,
) -> Result<ScrambleAnalysis> {
    let detections = averaged_detect(&series.detector_probs, 0, params)?;
    let jump_iterations: Vec<usize> = detections.iter().map(|d| d.t_trigger).collect();
    let r = pearson_window_r(&series.frames, series.n_steps, series.n_iterations, window)?;
    let report = classify_scrambling(&r, &jump_iterations, SCRAMBLE_R_THRESHOLD, window)?;
    Ok(ScrambleAnalysis { report, r, jump_iterations })
}
