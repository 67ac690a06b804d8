//! Command-line front end: simulation, detection, and the analysis
//! subcommands.
//!
//! Exit codes: 0 success, 2 bad usage or configuration, 3 IO or file
//! format error, 4 analysis failure (insufficient or degenerate data).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qrad::config::{self, FileConfig};
use qrad::layout::{default_layout, read_layout};
use qrad::pipeline;
use qrad::records::{self, Encoding};
use qrad::tables;
use qrad_core::chip::ChipLayout;
use qrad_core::sim::generate_impacts;
use qrad_core::tls::simulate_tls_series;

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_ANALYSIS: u8 = 4;

#[derive(Parser)]
#[command(name = "qrad", version, about = "Charge-jump simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Layout CSV; the built-in 27-qubit layout when omitted.
    #[arg(long)]
    layout: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate detector runs and write them to disk.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output path stem; run i goes to `<out><i>.*`.
        #[arg(long)]
        out: PathBuf,
        /// Number of independent runs; overrides the config file.
        #[arg(long)]
        runs: Option<usize>,
        /// Shots encoding.
        #[arg(long, value_enum, default_value_t = EncodingArg::Binary)]
        encoding: EncodingArg,
    },
    /// Simulate an interleaved TLS spectroscopy series.
    SimulateTls {
        #[command(flatten)]
        common: Common,
        /// Output path stem.
        #[arg(long)]
        out: PathBuf,
        /// Probed qubit id; the first active qubit when omitted.
        #[arg(long)]
        qubit: Option<u32>,
    },
    /// Convert an externally produced shots CSV into a stored run.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Shots CSV with the `rep_index,qubit_id,m0,m1` schema.
        input: PathBuf,
        /// Output path stem for the converted run.
        #[arg(long)]
        out: PathBuf,
        /// Shots encoding of the converted run.
        #[arg(long, value_enum, default_value_t = EncodingArg::Binary)]
        encoding: EncodingArg,
    },
    /// Run jump detection over stored runs.
    Detect {
        #[command(flatten)]
        common: Common,
        /// Run path stems or manifest files, in run order.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Detection threshold; overrides the config file.
        #[arg(long)]
        threshold: Option<f64>,
        /// Detections CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Statistical analyses over detections or spectra.
    Analyze {
        #[command(subcommand)]
        what: Analysis,
    },
    /// Self-contained replication: simulate, detect, and run every
    /// analysis, writing a JSON report.
    ReplicateAppendix {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        /// Substrate area for rate normalization; bounding-box area when
        /// omitted.
        #[arg(long)]
        area_mm2: Option<f64>,
    },
    /// Delay fits across a set of detection thresholds.
    SweepThreshold {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        /// Comma-separated thresholds.
        #[arg(long, value_delimiter = ',', default_value = "8,12,14,16")]
        thresholds: Vec<f64>,
        /// Also write the sweep as a CSV table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Analysis {
    /// Trigger-aligned T1 dip profile from runs + detections.
    Dip {
        #[arg(long)]
        detections: PathBuf,
        /// Run path stems, in the run order of the detections file.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the profile as a CSV table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Inter-jump delay histogram and its fit.
    Delays {
        #[arg(long)]
        detections: PathBuf,
        /// Run duration, seconds.
        #[arg(long, default_value_t = 44.0)]
        duration_s: f64,
        /// Repetition period, seconds.
        #[arg(long, default_value_t = 44e-6)]
        rep_period_s: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the histogram with the fitted expectation as a
        /// CSV table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Coincidence rate vs qubit-pair distance.
    Distance {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Total detector time, hours.
        #[arg(long)]
        hours: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the per-pair rates as a CSV table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Area-normalized impact rate from a fitted time between impacts.
    Rate {
        /// Mean time between impacts, seconds.
        #[arg(long)]
        tau_s: f64,
        #[arg(long)]
        area_mm2: f64,
    },
    /// TLS-scrambling classification of a spectroscopy series.
    Scramble {
        /// Spectroscopy series path stem.
        input: PathBuf,
        /// Correlation window, iterations.
        #[arg(long, default_value_t = 100)]
        window: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the correlation trace as a CSV table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Csv,
    Binary,
}

impl From<EncodingArg> for Encoding {
    fn from(e: EncodingArg) -> Encoding {
        match e {
            EncodingArg::Csv => Encoding::Csv,
            EncodingArg::Binary => Encoding::Binary,
        }
    }
}

struct Failure {
    code: u8,
    err: anyhow::Error,
}

type CmdResult = std::result::Result<(), Failure>;

trait Classify<T> {
    fn or_exit(self, code: u8) -> std::result::Result<T, Failure>;
}

impl<T> Classify<T> for Result<T> {
    fn or_exit(self, code: u8) -> std::result::Result<T, Failure> {
        self.map_err(|err| Failure { code, err })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn load_common(common: &Common) -> std::result::Result<(FileConfig, ChipLayout), Failure> {
    let mut cfg = match &common.config {
        Some(path) => config::load(path).or_exit(EXIT_USAGE)?,
        None => FileConfig { n_runs: 1, ..FileConfig::default() },
    };
    if let Some(seed) = common.seed {
        cfg.sim.seed = seed;
    }
    let layout = match &common.layout {
        Some(path) => read_layout(path).or_exit(EXIT_IO)?,
        None => default_layout(),
    };
    Ok((cfg, layout))
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> CmdResult {
    let text = serde_json::to_string_pretty(value)
        .context("serializing report")
        .or_exit(EXIT_IO)?;
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .or_exit(EXIT_IO),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Simulate { common, out, runs, encoding } => {
            let (cfg, layout) = load_common(&common)?;
            let n_runs = runs.unwrap_or(cfg.n_runs);
            let records = pipeline::simulate_runs(&cfg.sim, &layout, n_runs, common.workers)
                .or_exit(EXIT_ANALYSIS)?;
            for (i, record) in records.iter().enumerate() {
                let stem = numbered_stem(&out, i);
                records::write_run(record, &stem, encoding.into()).or_exit(EXIT_IO)?;
            }
            eprintln!("wrote {n_runs} runs to {}*", out.display());
            Ok(())
        }
        Command::SimulateTls { common, out, qubit } => {
            let (mut cfg, layout) = load_common(&common)?;
            let qubit_id = qubit
                .or_else(|| layout.active_ids().first().copied())
                .context("layout has no active qubits")
                .or_exit(EXIT_USAGE)?;
            let site = *layout
                .qubits()
                .iter()
                .find(|q| q.id == qubit_id)
                .with_context(|| format!("unknown qubit {qubit_id}"))
                .or_exit(EXIT_USAGE)?;
            // impacts over the wall time of the whole series
            cfg.sim.run_duration_s =
                cfg.tls.n_iterations as f64 * cfg.tls.iteration_period_s;
            let impacts =
                generate_impacts(&cfg.sim, &layout).map_err(Into::into).or_exit(EXIT_ANALYSIS)?;
            let series = simulate_tls_series(&cfg.tls, &cfg.sim, site, &impacts)
                .map_err(Into::into)
                .or_exit(EXIT_ANALYSIS)?;
            records::write_spectrum(&series, &cfg.tls, &out).or_exit(EXIT_IO)?;
            eprintln!(
                "wrote {} iterations x {} steps to {}.*",
                series.n_iterations,
                series.n_steps,
                out.display()
            );
            Ok(())
        }
        Command::Ingest { common, input, out, encoding } => {
            let (cfg, _) = load_common(&common)?;
            let record = records::ingest_external(&input, &cfg.sim).or_exit(EXIT_IO)?;
            records::write_run(&record, &out, encoding.into()).or_exit(EXIT_IO)?;
            eprintln!(
                "ingested {} qubits x {} reps -> {}.*",
                record.qubit_ids.len(),
                record.m0.first().map_or(0, Vec::len),
                out.display()
            );
            Ok(())
        }
        Command::Detect { common, inputs, threshold, out } => {
            let (mut cfg, _) = load_common(&common)?;
            if let Some(t) = threshold {
                cfg.detector.threshold = t;
            }
            let mut clusters_per_run = Vec::with_capacity(inputs.len());
            let mut period = cfg.sim.rep_period_s;
            for input in &inputs {
                let record = records::read_run(input).or_exit(EXIT_IO)?;
                period = record.config.rep_period_s;
                clusters_per_run.push(
                    pipeline::detect_run(&record, &cfg.detector).or_exit(EXIT_ANALYSIS)?,
                );
            }
            records::write_detections(&clusters_per_run, period, &out).or_exit(EXIT_IO)?;
            let n: usize =
                clusters_per_run.iter().flatten().map(|c| c.members.len()).sum();
            eprintln!("{n} triggers in {} runs -> {}", inputs.len(), out.display());
            Ok(())
        }
        Command::Analyze { what } => run_analysis(what),
        Command::ReplicateAppendix { common, out, runs, area_mm2 } => {
            let (cfg, layout) = load_common(&common)?;
            let n_runs = runs.unwrap_or(cfg.n_runs);
            let rep = pipeline::replicate(
                &cfg.sim,
                &layout,
                &cfg.detector,
                n_runs,
                common.workers,
                area_mm2,
            )
            .or_exit(EXIT_ANALYSIS)?;
            eprintln!(
                "{} triggers / {} impacts; MAD {:?} steps, tau {:.1} s, p_coinc {:.2}, dip z {:.1}, sigma {:.2} mm",
                rep.report.n_triggers,
                rep.report.n_true_impacts,
                rep.report.mad_steps,
                rep.report.delay_fit.tau_jump_s,
                rep.report.delay_fit.p_coinc,
                rep.report.dip.post_trigger_z(),
                rep.report.distance_fit.sigma_mm,
            );
            write_json(&rep.report, Some(&out))
        }
        Command::SweepThreshold { common, out, runs, thresholds, csv } => {
            let (cfg, layout) = load_common(&common)?;
            let n_runs = runs.unwrap_or(cfg.n_runs);
            let points = pipeline::sweep_thresholds(
                &cfg.sim,
                &layout,
                &cfg.detector,
                &thresholds,
                n_runs,
                common.workers,
            )
            .or_exit(EXIT_ANALYSIS)?;
            if let Some(path) = &csv {
                tables::write_threshold_csv(&points, path).or_exit(EXIT_IO)?;
            }
            write_json(&points, out.as_deref())
        }
    }
}

fn run_analysis(what: Analysis) -> CmdResult {
    match what {
        Analysis::Dip { detections, runs, out, csv } => {
            let clusters = records::read_detections(&detections).or_exit(EXIT_IO)?;
            let mut acc = qrad_core::stats::DipAccumulator::new(pipeline::DIP_WINDOW);
            for (run_id, stem) in runs.iter().enumerate() {
                let record = records::read_run(stem).or_exit(EXIT_IO)?;
                let empty = Vec::new();
                let run_clusters = clusters.get(run_id).unwrap_or(&empty);
                for cluster in run_clusters {
                    for det in &cluster.members {
                        if let Some(qi) = record.qubit_index(det.qubit_id) {
                            acc.add_event(&record.m0[qi], det.t_trigger);
                        }
                    }
                }
            }
            let profile = acc
                .finalize(pipeline::DIP_SMOOTHING_SIGMA)
                .map_err(Into::into)
                .or_exit(EXIT_ANALYSIS)?;
            if let Some(path) = &csv {
                tables::write_dip_csv(&profile, path).or_exit(EXIT_IO)?;
            }
            write_json(&profile, out.as_deref())
        }
        Analysis::Delays { detections, duration_s, rep_period_s, out, csv } => {
            let clusters = records::read_detections(&detections).or_exit(EXIT_IO)?;
            let per_run: Vec<Vec<f64>> = clusters
                .iter()
                .map(|run| {
                    run.iter()
                        .flat_map(|c| &c.members)
                        .map(|d| d.t_trigger as f64 * rep_period_s)
                        .collect()
                })
                .collect();
            let hist =
                qrad_core::stats::delay_histogram(
                    &per_run,
                    pipeline::delay_bin_width(duration_s),
                    duration_s,
                )
                    .map_err(Into::into)
                    .or_exit(EXIT_USAGE)?;
            let fit = qrad_core::stats::fit_modified_poisson(&hist, duration_s)
                .map_err(Into::into)
                .or_exit(EXIT_ANALYSIS)?;
            if let Some(path) = &csv {
                tables::write_delay_csv(&hist, &fit, path).or_exit(EXIT_IO)?;
            }
            write_json(&fit, out.as_deref())
        }
        Analysis::Distance { detections, layout, hours, out, csv } => {
            let clusters = records::read_detections(&detections).or_exit(EXIT_IO)?;
            let layout = match layout {
                Some(path) => read_layout(&path).or_exit(EXIT_IO)?,
                None => default_layout(),
            };
            let all: Vec<_> = clusters.into_iter().flatten().collect();
            let fit = qrad_core::stats::coincidence_vs_distance(&all, &layout, hours, &[])
                .map_err(Into::into)
                .or_exit(EXIT_ANALYSIS)?;
            if let Some(path) = &csv {
                tables::write_distance_csv(&fit, path).or_exit(EXIT_IO)?;
            }
            write_json(&fit, out.as_deref())
        }
        Analysis::Rate { tau_s, area_mm2 } => {
            let rate = qrad_core::stats::normalized_rate(tau_s, area_mm2)
                .map_err(Into::into)
                .or_exit(EXIT_USAGE)?;
            println!("{rate}");
            Ok(())
        }
        Analysis::Scramble { input, window, out, csv } => {
            let (series, _) = records::read_spectrum(&input).or_exit(EXIT_IO)?;
            let analysis = pipeline::analyze_scrambling(
                &series,
                &qrad_core::detector::DetectorParams::default(),
                window,
            )
            .or_exit(EXIT_ANALYSIS)?;
            if let Some(path) = &csv {
                tables::write_scramble_csv(&analysis, path).or_exit(EXIT_IO)?;
            }
            write_json(&analysis, out.as_deref())
        }
    }
}

fn numbered_stem(out: &Path, i: usize) -> PathBuf {
    let name = out.file_name().and_then(|n| n.to_str()).unwrap_or("run");
    out.with_file_name(format!("{name}{i}"))
}
