//! Plain `key = value` configuration files.
//!
//! Keys are namespaced by component: `sim.*`, `detector.*`, `tls.*`.
//! Lines starting with `#` are comments. Unknown keys are rejected so
//! typos fail loudly.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use qrad_core::detector::DetectorParams;
use qrad_core::sim::SimConfig;
use qrad_core::tls::{TlsConfig, TlsLine};

#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    pub sim: SimConfig,
    pub detector: DetectorParams,
    pub tls: TlsConfig,
    /// Number of independent runs for multi-run commands.
    pub n_runs: usize,
}

impl FileConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.detector.validate()?;
        self.tls.validate()?;
        Ok(())
    }
}

pub fn load(path: &Path) -> Result<FileConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn parse(text: &str) -> Result<FileConfig> {
    let mut cfg = FileConfig { n_runs: 1, ..FileConfig::default() };
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected key = value", lineno + 1))?;
        apply(&mut cfg, key.trim(), value.trim())
            .with_context(|| format!("line {}", lineno + 1))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply(cfg: &mut FileConfig, key: &str, value: &str) -> Result<()> {
    let f = || -> Result<f64> { value.parse().with_context(|| format!("bad number {value:?}")) };
    let u = || -> Result<usize> { value.parse().with_context(|| format!("bad integer {value:?}")) };
    match key {
        "n_runs" => cfg.n_runs = u()?,
        "sim.run_duration_s" => cfg.sim.run_duration_s = f()?,
        "sim.n_reps" => cfg.sim.n_reps = u()?,
        "sim.rep_period_s" => cfg.sim.rep_period_s = f()?,
        "sim.t_ramsey_s" => cfg.sim.t_ramsey_s = f()?,
        "sim.t1_delay_s" => cfg.sim.t1_delay_s = f()?,
        "sim.eps_ef_hz" => cfg.sim.eps_ef_hz = f()?,
        "sim.t2_ef_s" => cfg.sim.t2_ef_s = f()?,
        "sim.meas_error" => cfg.sim.meas_error = f()?,
        "sim.impact_rate_hz" => cfg.sim.impact_rate_hz = f()?,
        "sim.sigma_spatial_mm" => cfg.sim.sigma_spatial_mm = f()?,
        "sim.peak_dng" => cfg.sim.peak_dng = f()?,
        "sim.diffusion_var_per_hour" => cfg.sim.diffusion_var_per_hour = f()?,
        "sim.baseline_t1_s" => cfg.sim.baseline_t1_s = f()?,
        "sim.dip_t1_s" => cfg.sim.dip_t1_s = f()?,
        "sim.dip_enabled" => cfg.sim.dip_enabled = parse_bool(value)?,
        "sim.seed" => cfg.sim.seed = value.parse().context("bad seed")?,
        "detector.template_half_width_s" => cfg.detector.template_half_width_s = f()?,
        "detector.threshold" => cfg.detector.threshold = f()?,
        "detector.min_separation_s" => cfg.detector.min_separation_s = f()?,
        "detector.cluster_gap_s" => cfg.detector.cluster_gap_s = f()?,
        "detector.averaged_template_len" => cfg.detector.averaged_template_len = u()?,
        "detector.averaged_threshold" => cfg.detector.averaged_threshold = f()?,
        "detector.excluded_qubits" => {
            cfg.detector.excluded_qubits = parse_id_list(value)?;
        }
        "tls.n_steps" => cfg.tls.n_steps = u()?,
        "tls.shift_range_hz" => cfg.tls.shift_range_hz = f()?,
        "tls.stark_detuning_hz" => cfg.tls.stark_detuning_hz = f()?,
        "tls.anharmonicity_hz" => cfg.tls.anharmonicity_hz = f()?,
        "tls.n_iterations" => cfg.tls.n_iterations = u()?,
        "tls.scramble_fraction" => cfg.tls.scramble_fraction = f()?,
        "tls.diffusing_tls_hz" => {
            cfg.tls.diffusing_tls = if value == "none" { None } else { Some(f()?) };
        }
        "tls.probe_duration_s" => cfg.tls.probe_duration_s = f()?,
        "tls.iteration_period_s" => cfg.tls.iteration_period_s = f()?,
        // one line per TLS: offset_hz linewidth_hz depth
        "tls.line" => {
            let parts: Vec<&str> = value.split_whitespace().collect();
            if parts.len() != 3 {
                bail!("tls.line expects `offset_hz linewidth_hz depth`");
            }
            cfg.tls.tls_list.push(TlsLine {
                offset_hz: parts[0].parse().context("bad offset_hz")?,
                linewidth_hz: parts[1].parse().context("bad linewidth_hz")?,
                depth: parts[2].parse().context("bad depth")?,
            });
        }
        other => bail!("unknown key {other:?}"),
    }
    Ok(())
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => bail!("bad boolean {other:?}"),
    }
}

fn parse_id_list(value: &str) -> Result<Vec<u32>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().with_context(|| format!("bad qubit id {s:?}")))
        .collect()
}
