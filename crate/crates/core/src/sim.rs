//! Seeded Monte-Carlo generator of jump-detector runs: Poisson impacts,
//! offset-charge diffusion and jumps, and Ramsey/T1 shot outcomes.
//!
//! Everything is driven by named per-(qubit, purpose) random streams
//! derived from the master seed, so the same `(config, layout)` always
//! produces a bit-identical [`RunRecord`] and per-qubit generation can be
//! reordered or parallelized freely.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::chip::{ChipLayout, ImpactEvent, OffsetCharge};
use crate::error::Error;
use crate::rng::{stream, StreamPurpose};
use crate::Result;

const SECONDS_PER_HOUR: f64 = 3600.0;

/// All simulation parameters for one jump-detector run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    /// Run duration, seconds.
    pub run_duration_s: f64,
    /// Repetitions of the detector sequence per run.
    pub n_reps: usize,
    /// Time per repetition, seconds.
    pub rep_period_s: f64,
    /// Ramsey idle time on the ef transition, seconds.
    pub t_ramsey_s: f64,
    /// Fixed delay of the interleaved T1 measurement, seconds.
    pub t1_delay_s: f64,
    /// ef charge dispersion, Hz (the quoted epsilon_ef / 2 pi).
    pub eps_ef_hz: f64,
    /// ef-subspace coherence time, seconds.
    pub t2_ef_s: f64,
    /// Symmetric measurement bit-flip probability, applied to M0 and M1.
    pub meas_error: f64,
    /// Mean impact rate, events per second.
    pub impact_rate_hz: f64,
    /// Spatial falloff of the charge response, millimeters.
    pub sigma_spatial_mm: f64,
    /// Offset-charge step at the impact epicenter.
    pub peak_dng: f64,
    /// Offset-charge diffusion variance per hour.
    pub diffusion_var_per_hour: f64,
    /// Baseline qubit T1, seconds.
    pub baseline_t1_s: f64,
    /// Transient T1 at the impact epicenter, seconds.
    pub dip_t1_s: f64,
    /// When false, impacts still jump the offset charge but leave T1
    /// untouched (null model for the dip analysis).
    pub dip_enabled: bool,
    /// Master seed for all random streams.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            run_duration_s: 44.0,
            n_reps: 1_000_000,
            rep_period_s: 44e-6,
            t_ramsey_s: 2e-6,
            t1_delay_s: 40e-6,
            eps_ef_hz: 800e3,
            t2_ef_s: 50e-6,
            meas_error: 0.015,
            impact_rate_hz: 0.1,
            sigma_spatial_mm: 1.5,
            peak_dng: 0.1,
            diffusion_var_per_hour: 0.1,
            baseline_t1_s: 100e-6,
            dip_t1_s: 1e-6,
            dip_enabled: true,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.run_duration_s, "run_duration_s"),
            (self.rep_period_s, "rep_period_s"),
            (self.t_ramsey_s, "t_ramsey_s"),
            (self.t1_delay_s, "t1_delay_s"),
            (self.eps_ef_hz, "eps_ef_hz"),
            (self.t2_ef_s, "t2_ef_s"),
            (self.sigma_spatial_mm, "sigma_spatial_mm"),
            (self.baseline_t1_s, "baseline_t1_s"),
            (self.dip_t1_s, "dip_t1_s"),
        ];
        for (v, name) in positive {
            if !(v > 0.0) {
                return Err(Error::invalid(format_args!("{name} must be positive")));
            }
        }
        if self.n_reps == 0 {
            return Err(Error::invalid("n_reps must be positive"));
        }
        if !(0.0..=0.5).contains(&self.meas_error) {
            return Err(Error::invalid("meas_error must be in [0, 0.5]"));
        }
        if !(self.impact_rate_hz >= 0.0) {
            return Err(Error::invalid("impact_rate_hz must be non-negative"));
        }
        if !(self.diffusion_var_per_hour >= 0.0) {
            return Err(Error::invalid("diffusion_var_per_hour must be non-negative"));
        }
        if !(self.peak_dng >= 0.0) {
            return Err(Error::invalid("peak_dng must be non-negative"));
        }
        Ok(())
    }
}

/// One detector run: per-qubit binary shot streams plus ground truth.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunRecord {
    pub config: SimConfig,
    /// Active qubit ids, in the order of the shot arrays.
    pub qubit_ids: Vec<u32>,
    /// Fixed-delay T1 outcomes, one bit per repetition per qubit.
    pub m0: Vec<Vec<u8>>,
    /// Ramsey outcomes, one bit per repetition per qubit.
    pub m1: Vec<Vec<u8>>,
    /// Simulated impacts; absent for ingested external data.
    pub ground_truth: Option<Vec<ImpactEvent>>,
}

impl RunRecord {
    pub fn qubit_index(&self, id: u32) -> Option<usize> {
        self.qubit_ids.iter().position(|&q| q == id)
    }
}

/// Draw impact times from a Poisson process of the configured rate over
/// `[0, T]`, with locations uniform over the layout bounding box.
pub fn generate_impacts(config: &SimConfig, layout: &ChipLayout) -> Result<Vec<ImpactEvent>> {
    config.validate()?;
    let mut rng = stream(config.seed, StreamPurpose::Impacts, 0);
    let mut events = Vec::new();
    if config.impact_rate_hz == 0.0 {
        return Ok(events);
    }
    let (x0, y0, x1, y1) = layout.bounding_box();
    let mut t = 0.0;
    loop {
        let u: f64 = rng.random();
        t += -libm::log(1.0 - u) / config.impact_rate_hz;
        if t > config.run_duration_s {
            break;
        }
        let x: f64 = rng.random();
        let y: f64 = rng.random();
        events.push(ImpactEvent {
            time: t,
            x_mm: x0 + x * (x1 - x0),
            y_mm: y0 + y * (y1 - y0),
            peak_charge: config.peak_dng,
            t1_epicenter: config.dip_t1_s,
        });
    }
    Ok(events)
}

/// Ramsey outcome probability before measurement error:
/// `(1 + exp(-T_R/T2) cos(2 pi eps cos(2 pi n_g0) T_R / 2)) / 2`.
pub fn ramsey_prob(n_g0: OffsetCharge, config: &SimConfig) -> f64 {
    let contrast = libm::exp(-config.t_ramsey_s / config.t2_ef_s);
    let phase = core::f64::consts::TAU * config.eps_ef_hz * config.t_ramsey_s / 2.0
        * libm::cos(core::f64::consts::TAU * n_g0.value());
    0.5 * (1.0 + contrast * libm::cos(phase))
}

/// Fixed-delay T1 survival probability before measurement error.
pub fn t1_prob(t1_current_s: f64, config: &SimConfig) -> Result<f64> {
    if !(t1_current_s > 0.0) {
        return Err(Error::invalid("t1 must be positive"));
    }
    Ok(libm::exp(-config.t1_delay_s / t1_current_s))
}

/// Observed probability after a symmetric bit-flip error `e`.
pub fn apply_meas_error(p: f64, e: f64) -> f64 {
    (1.0 - e) * p + e * (1.0 - p)
}

/// Incremental per-qubit offset-charge trajectory: uniform start, Gaussian
/// random walk, and signed jumps at impact repetitions.
struct ChargeWalker {
    rng: ChaCha8Rng,
    value: f64,
    sigma_step: f64,
    /// (repetition, signed jump magnitude), sorted by repetition.
    jumps: Vec<(usize, f64)>,
    next_jump: usize,
    rep: usize,
}

impl ChargeWalker {
    fn new(config: &SimConfig, qubit_pos: (f64, f64), qubit_id: u32, impacts: &[ImpactEvent]) -> Result<Self> {
        if impacts.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(Error::UnsortedImpacts);
        }
        let mut rng = stream(config.seed, StreamPurpose::Charge, qubit_id);
        let value: f64 = rng.random();
        // signs are drawn up front, one fair coin per impact, so the
        // diffusion stream does not shift when impacts are added
        let mut jumps = Vec::with_capacity(impacts.len());
        for ev in impacts {
            let response = ev.charge_response(qubit_pos, config.sigma_spatial_mm)?;
            let sign = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
            let rep = (ev.time / config.rep_period_s) as usize;
            if rep < config.n_reps {
                jumps.push((rep, sign * response));
            }
        }
        let sigma_step =
            libm::sqrt(config.diffusion_var_per_hour / SECONDS_PER_HOUR * config.rep_period_s);
        Ok(ChargeWalker { rng, value, sigma_step, jumps, next_jump: 0, rep: 0 })
    }

    /// Offset charge for the next repetition. The jump of an impact in
    /// repetition `r` is already included in the value for `r`.
    #[inline]
    fn next(&mut self) -> f64 {
        if self.rep > 0 && self.sigma_step > 0.0 {
            let g: f64 = StandardNormal.sample(&mut self.rng);
            self.value += self.sigma_step * g;
        }
        while self.next_jump < self.jumps.len() && self.jumps[self.next_jump].0 == self.rep {
            self.value += self.jumps[self.next_jump].1;
            self.next_jump += 1;
        }
        self.rep += 1;
        self.value
    }
}

/// Materialized per-qubit offset-charge trajectories (one wrapped value
/// per repetition), for the active qubits in layout order.
pub fn simulate_charge_traces(
    config: &SimConfig,
    layout: &ChipLayout,
    impacts: &[ImpactEvent],
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let mut traces = Vec::new();
    for site in layout.active_sites() {
        let mut walker = ChargeWalker::new(config, (site.x_mm, site.y_mm), site.id, impacts)?;
        let mut trace = Vec::with_capacity(config.n_reps);
        for _ in 0..config.n_reps {
            let v = walker.next();
            trace.push(OffsetCharge::wrap(v)?.value());
        }
        traces.push(trace);
    }
    Ok(traces)
}

/// Generate one full detector run, impacts included.
pub fn simulate_run(config: &SimConfig, layout: &ChipLayout) -> Result<RunRecord> {
    let impacts = generate_impacts(config, layout)?;
    simulate_run_with_impacts(config, layout, impacts)
}

/// Same as [`simulate_run`] with caller-supplied impacts (sorted by time).
pub fn simulate_run_with_impacts(
    config: &SimConfig,
    layout: &ChipLayout,
    impacts: Vec<ImpactEvent>,
) -> Result<RunRecord> {
    config.validate()?;
    let contrast = libm::exp(-config.t_ramsey_s / config.t2_ef_s);
    let phase_amp = core::f64::consts::TAU * config.eps_ef_hz * config.t_ramsey_s / 2.0;
    let e = config.meas_error;
    let p0_base = apply_meas_error(t1_prob(config.baseline_t1_s, config)?, e);
    let base_rate = 1.0 / config.baseline_t1_s;
    let dip_excess_rate = 1.0 / config.dip_t1_s - base_rate;

    let mut qubit_ids = Vec::new();
    let mut m0_all = Vec::new();
    let mut m1_all = Vec::new();
    for site in layout.active_sites() {
        let pos = (site.x_mm, site.y_mm);
        let mut walker = ChargeWalker::new(config, pos, site.id, &impacts)?;
        // transient T1 dips: one repetition each, additive in loss rate
        // (coincident impacts in one repetition sum their excess rates)
        let mut dips: Vec<(usize, f64)> = Vec::new();
        if config.dip_enabled {
            for ev in &impacts {
                let rep = (ev.time / config.rep_period_s) as usize;
                if rep >= config.n_reps {
                    continue;
                }
                let dx = pos.0 - ev.x_mm;
                let dy = pos.1 - ev.y_mm;
                let d2 = dx * dx + dy * dy;
                let g = libm::exp(-d2 / (2.0 * config.sigma_spatial_mm * config.sigma_spatial_mm));
                match dips.iter_mut().find(|(r, _)| *r == rep) {
                    Some(entry) => entry.1 += dip_excess_rate * g,
                    None => dips.push((rep, dip_excess_rate * g)),
                }
            }
            dips.sort_by_key(|&(r, _)| r);
            for (_, excess) in &mut dips {
                let p = libm::exp(-config.t1_delay_s * (base_rate + *excess));
                *excess = apply_meas_error(p, e);
            }
        }

        let mut rng_m0 = stream(config.seed, StreamPurpose::ShotsM0, site.id);
        let mut rng_m1 = stream(config.seed, StreamPurpose::ShotsM1, site.id);
        let mut m0 = Vec::with_capacity(config.n_reps);
        let mut m1 = Vec::with_capacity(config.n_reps);
        let mut dip_iter = dips.iter().peekable();
        for rep in 0..config.n_reps {
            let n = walker.next();
            let p1 = 0.5
                * (1.0 + contrast * libm::cos(phase_amp * libm::cos(core::f64::consts::TAU * n)));
            let p1_obs = apply_meas_error(p1, e);
            m1.push((rng_m1.random::<f64>() < p1_obs) as u8);
            let p0 = match dip_iter.peek() {
                Some(&&(r, p)) if r == rep => {
                    dip_iter.next();
                    p
                }
                _ => p0_base,
            };
            m0.push((rng_m0.random::<f64>() < p0) as u8);
        }
        qubit_ids.push(site.id);
        m0_all.push(m0);
        m1_all.push(m1);
    }

    Ok(RunRecord {
        config: config.clone(),
        qubit_ids,
        m0: m0_all,
        m1: m1_all,
        ground_truth: Some(impacts),
    })
}
