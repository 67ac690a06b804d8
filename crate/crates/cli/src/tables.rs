//! Plain CSV tables for external plotting, one writer per analysis.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use qrad_core::stats::{
    delay_bin_probability, DelayFit, DelayHistogram, DipProfile, DistanceFit,
};

use crate::pipeline::{ScrambleAnalysis, ThresholdPoint};

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Trigger-aligned dip profile, one row per repetition offset.
pub fn write_dip_csv(profile: &DipProfile, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "offset_reps,mean,smoothed,count,z")?;
    let window = profile.window as i64;
    for (i, offset) in (-window..=window).enumerate() {
        writeln!(
            w,
            "{offset},{},{},{},{}",
            profile.mean[i], profile.smoothed[i], profile.counts[i], profile.z[i]
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Inter-jump delay histogram with the fitted expectation per bin.
pub fn write_delay_csv(hist: &DelayHistogram, fit: &DelayFit, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "bin_left_s,count,fit_expected")?;
    for (bin, &count) in hist.counts.iter().enumerate() {
        let expected = hist.n_delays as f64
            * delay_bin_probability(
                bin,
                hist.bin_width_s,
                fit.tau_jump_s,
                fit.p_coinc,
                fit.run_duration_s,
            );
        writeln!(w, "{},{count},{expected}", bin as f64 * hist.bin_width_s)?;
    }
    w.flush()?;
    Ok(())
}

/// Coincidence rate per qubit pair with the fitted falloff evaluated at
/// each distance.
pub fn write_distance_csv(fit: &DistanceFit, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "qubit_a,qubit_b,distance_mm,coincidences,rate_per_hour,fit_rate_per_hour")?;
    for pair in &fit.pairs {
        let model = fit.amplitude_per_hour
            * (-pair.distance_mm * pair.distance_mm / (2.0 * fit.sigma_mm * fit.sigma_mm)).exp();
        writeln!(
            w,
            "{},{},{},{},{},{model}",
            pair.qubit_a, pair.qubit_b, pair.distance_mm, pair.coincidences, pair.rate_per_hour
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Delay-fit parameters per detection threshold.
pub fn write_threshold_csv(points: &[ThresholdPoint], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "threshold,n_triggers,tau_jump_s")?;
    for p in points {
        writeln!(w, "{},{},{}", p.threshold, p.n_triggers, p.tau_jump_s)?;
    }
    w.flush()?;
    Ok(())
}

/// Windowed spectrum correlation per iteration; `r` is empty where the
/// window does not fit.
pub fn write_scramble_csv(analysis: &ScrambleAnalysis, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "iteration,r,is_jump")?;
    for (i, r) in analysis.r.iter().enumerate() {
        let r_text = r.map(|v| v.to_string()).unwrap_or_default();
        let is_jump = analysis.jump_iterations.contains(&i) as u8;
        writeln!(w, "{i},{r_text},{is_jump}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use qrad_core::stats::PairRate;

    #[test]
    fn delay_table_expected_sums_to_n_delays() {
        let hist = DelayHistogram { bin_width_s: 2.0, counts: vec![10, 5, 2], n_delays: 17 };
        let fit = DelayFit {
            tau_jump_s: 3.0,
            p_coinc: 0.2,
            run_duration_s: 6.0,
            bin_width_s: 2.0,
            weighted_sse: 0.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("delays.csv");
        write_delay_csv(&hist, &fit, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let total: f64 = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
            .sum();
        assert!((total - 17.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn distance_table_has_model_column() {
        let fit = DistanceFit {
            pairs: vec![PairRate {
                qubit_a: 0,
                qubit_b: 2,
                distance_mm: 0.0,
                coincidences: 4,
                rate_per_hour: 2.0,
            }],
            amplitude_per_hour: 2.0,
            sigma_mm: 1.0,
            under_determined: false,
            diverged: false,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("distance.csv");
        write_distance_csv(&fit, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",2"), "{text}");
    }
}
