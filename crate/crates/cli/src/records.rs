//! On-disk formats for runs, detections, and spectroscopy series.
//!
//! A run is stored as a JSON manifest (`<stem>.manifest.json`) next to a
//! shots file in one of two encodings: a plain CSV
//! (`rep_index,qubit_id,m0,m1`) or a packed binary stream with magic
//! `QRL1`. See `docs/formats.md` for the byte-level layout.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use qrad_core::chip::ImpactEvent;
use qrad_core::detector::{JumpDetection, MultiQubitJump};
use qrad_core::sim::{RunRecord, SimConfig};
use qrad_core::tls::{SpectrumSeries, TlsConfig};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;
pub const BINARY_MAGIC: &[u8; 4] = b"QRL1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Csv,
    Binary,
}

/// Sidecar metadata for one stored run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    /// Unix seconds; honors `SOURCE_DATE_EPOCH` for reproducible output.
    pub created_at_unix: u64,
    pub encoding: Encoding,
    pub shots_file: String,
    pub n_reps: usize,
    pub qubit_ids: Vec<u32>,
    pub config: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<ImpactEvent>>,
}

fn created_at() -> u64 {
    if let Ok(s) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(v) = s.parse() {
            return v;
        }
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn manifest_path(stem: &Path) -> PathBuf {
    stem.with_extension("manifest.json")
}

fn shots_path(stem: &Path, encoding: Encoding) -> PathBuf {
    match encoding {
        Encoding::Csv => stem.with_extension("shots.csv"),
        Encoding::Binary => stem.with_extension("shots.qrl"),
    }
}

/// Write a run as manifest + shots file under the given path stem.
pub fn write_run(record: &RunRecord, stem: &Path, encoding: Encoding) -> Result<PathBuf> {
    let shots = shots_path(stem, encoding);
    let shots_name = shots
        .file_name()
        .and_then(|n| n.to_str())
        .context("output stem has no file name")?
        .to_owned();
    let n_reps = record.m0.first().map_or(0, Vec::len);
    let manifest = RunManifest {
        format_version: FORMAT_VERSION,
        created_at_unix: created_at(),
        encoding,
        shots_file: shots_name,
        n_reps,
        qubit_ids: record.qubit_ids.clone(),
        config: record.config.clone(),
        ground_truth: record.ground_truth.clone(),
    };
    let manifest_file = manifest_path(stem);
    fs::write(&manifest_file, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", manifest_file.display()))?;

    let file = File::create(&shots)
        .with_context(|| format!("writing {}", shots.display()))?;
    let mut w = BufWriter::new(file);
    match encoding {
        Encoding::Csv => {
            writeln!(w, "rep_index,qubit_id,m0,m1")?;
            for rep in 0..n_reps {
                for (qi, &qubit) in record.qubit_ids.iter().enumerate() {
                    writeln!(w, "{rep},{qubit},{},{}", record.m0[qi][rep], record.m1[qi][rep])?;
                }
            }
        }
        Encoding::Binary => {
            w.write_all(BINARY_MAGIC)?;
            w.write_all(&(record.qubit_ids.len() as u32).to_le_bytes())?;
            w.write_all(&(n_reps as u64).to_le_bytes())?;
            for qi in 0..record.qubit_ids.len() {
                write_bits(&mut w, &record.m0[qi])?;
                write_bits(&mut w, &record.m1[qi])?;
            }
        }
    }
    w.flush()?;
    Ok(manifest_file)
}

fn write_bits<W: Write>(w: &mut W, bits: &[u8]) -> std::io::Result<()> {
    for chunk in bits.chunks(8) {
        let mut byte = 0u8;
        for (i, &b) in chunk.iter().enumerate() {
            byte |= (b & 1) << i;
        }
        w.write_all(&[byte])?;
    }
    Ok(())
}

fn read_bits<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>> {
    let n_bytes = n.div_ceil(8);
    let mut buf = vec![0u8; n_bytes];
    r.read_exact(&mut buf).context("truncated binary shots file")?;
    let mut bits = Vec::with_capacity(n);
    for i in 0..n {
        bits.push((buf[i / 8] >> (i % 8)) & 1);
    }
    Ok(bits)
}

/// Read a run back from its manifest path (or path stem).
pub fn read_run(path: &Path) -> Result<RunRecord> {
    let manifest_file = if path.extension().is_some_and(|e| e == "json") {
        path.to_path_buf()
    } else {
        manifest_path(path)
    };
    let text = fs::read_to_string(&manifest_file)
        .with_context(|| format!("reading {}", manifest_file.display()))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", manifest_file.display()))?;
    if manifest.format_version != FORMAT_VERSION {
        bail!(
            "{}: unsupported format_version {}",
            manifest_file.display(),
            manifest.format_version
        );
    }
    let shots = manifest_file
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&manifest.shots_file);
    let n_qubits = manifest.qubit_ids.len();
    let (m0, m1) = match manifest.encoding {
        Encoding::Csv => read_shots_csv(&shots, &manifest.qubit_ids, manifest.n_reps)?,
        Encoding::Binary => {
            let file =
                File::open(&shots).with_context(|| format!("reading {}", shots.display()))?;
            let mut r = BufReader::new(file);
            let mut header = [0u8; 16];
            r.read_exact(&mut header).context("truncated binary header")?;
            if &header[..4] != BINARY_MAGIC {
                bail!("{}: bad magic", shots.display());
            }
            let nq = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
            let nr = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
            if nq != n_qubits || nr != manifest.n_reps {
                bail!(
                    "{}: header ({nq} qubits, {nr} reps) disagrees with manifest ({n_qubits}, {})",
                    shots.display(),
                    manifest.n_reps
                );
            }
            let mut m0 = Vec::with_capacity(nq);
            let mut m1 = Vec::with_capacity(nq);
            for _ in 0..nq {
                m0.push(read_bits(&mut r, nr)?);
                m1.push(read_bits(&mut r, nr)?);
            }
            (m0, m1)
        }
    };
    Ok(RunRecord {
        config: manifest.config,
        qubit_ids: manifest.qubit_ids,
        m0,
        m1,
        ground_truth: manifest.ground_truth,
    })
}

fn read_shots_csv(
    path: &Path,
    qubit_ids: &[u32],
    n_reps: usize,
) -> Result<(Vec<Vec<u8>>, Vec<Vec<u8>>)> {
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut m0 = vec![vec![0u8; n_reps]; qubit_ids.len()];
    let mut m1 = vec![vec![0u8; n_reps]; qubit_ids.len()];
    let mut seen = vec![vec![false; n_reps]; qubit_ids.len()];
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("rep_index")) {
            continue;
        }
        let row = parse_shot_row(line)
            .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
        let qi = qubit_ids
            .iter()
            .position(|&q| q == row.qubit_id)
            .with_context(|| {
                format!("{}:{}: unknown qubit {}", path.display(), lineno + 1, row.qubit_id)
            })?;
        if row.rep >= n_reps {
            bail!("{}:{}: rep_index {} out of range", path.display(), lineno + 1, row.rep);
        }
        m0[qi][row.rep] = row.m0;
        m1[qi][row.rep] = row.m1;
        seen[qi][row.rep] = true;
    }
    for (qi, rows) in seen.iter().enumerate() {
        if let Some(rep) = rows.iter().position(|&s| !s) {
            bail!("{}: missing row for qubit {} rep {rep}", path.display(), qubit_ids[qi]);
        }
    }
    Ok((m0, m1))
}

struct ShotRow {
    rep: usize,
    qubit_id: u32,
    m0: u8,
    m1: u8,
}

fn parse_shot_row(line: &str) -> Result<ShotRow> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != 4 {
        bail!("expected 4 fields, found {}", f.len());
    }
    let bit = |s: &str, what: &str| -> Result<u8> {
        match s {
            "0" => Ok(0),
            "1" => Ok(1),
            other => bail!("bad {what} bit {other:?}"),
        }
    };
    Ok(ShotRow {
        rep: f[0].parse().context("bad rep_index")?,
        qubit_id: f[1].parse().context("bad qubit_id")?,
        m0: bit(f[2], "m0")?,
        m1: bit(f[3], "m1")?,
    })
}

/// Build a run record from an externally produced shots CSV.
///
/// The file must use the same `rep_index,qubit_id,m0,m1` schema; the
/// qubit set and repetition count are inferred from the data, which must
/// be rectangular. `config` supplies the timing the file itself cannot
/// carry.
pub fn ingest_external(path: &Path, config: &SimConfig) -> Result<RunRecord> {
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut qubit_ids: Vec<u32> = Vec::new();
    let mut rows: Vec<ShotRow> = Vec::new();
    let mut max_rep = 0usize;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("rep_index")) {
            continue;
        }
        let row = parse_shot_row(line)
            .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
        if !qubit_ids.contains(&row.qubit_id) {
            qubit_ids.push(row.qubit_id);
        }
        max_rep = max_rep.max(row.rep);
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: no shot rows", path.display());
    }
    let n_reps = max_rep + 1;
    if rows.len() != n_reps * qubit_ids.len() {
        bail!(
            "{}: expected {} rows for {} qubits x {} reps, found {}",
            path.display(),
            n_reps * qubit_ids.len(),
            qubit_ids.len(),
            n_reps,
            rows.len()
        );
    }
    let mut m0 = vec![vec![0u8; n_reps]; qubit_ids.len()];
    let mut m1 = vec![vec![0u8; n_reps]; qubit_ids.len()];
    for row in rows {
        let qi = qubit_ids.iter().position(|&q| q == row.qubit_id).unwrap();
        m0[qi][row.rep] = row.m0;
        m1[qi][row.rep] = row.m1;
    }
    Ok(RunRecord {
        config: config.clone(),
        qubit_ids,
        m0,
        m1,
        ground_truth: None,
    })
}

// ---------------------------------------------------------------------------
// Detections
// ---------------------------------------------------------------------------

/// Write clustered detections as a CSV with one row per cluster member.
pub fn write_detections(
    clusters_per_run: &[Vec<MultiQubitJump>],
    sample_period_s: f64,
    path: &Path,
) -> Result<()> {
    let file = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "run_id,qubit_id,t_trigger_index,t_trigger_seconds,peak_value,cluster_id")?;
    for (run_id, clusters) in clusters_per_run.iter().enumerate() {
        for (cluster_id, cluster) in clusters.iter().enumerate() {
            for det in &cluster.members {
                writeln!(
                    w,
                    "{run_id},{},{},{},{},{cluster_id}",
                    det.qubit_id,
                    det.t_trigger,
                    det.t_trigger as f64 * sample_period_s,
                    det.peak_value,
                )?;
            }
        }
    }
    w.flush().map_err(Into::into)
}

/// Read a detections CSV back into per-run clusters.
pub fn read_detections(path: &Path) -> Result<Vec<Vec<MultiQubitJump>>> {
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    // (run_id, cluster_id) -> members and time span
    let mut runs: Vec<Vec<MultiQubitJump>> = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("run_id")) {
            continue;
        }
        let err = || format!("{}:{}", path.display(), lineno + 1);
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 6 {
            bail!("{}: expected 6 fields, found {}", err(), f.len());
        }
        let run_id: usize = f[0].parse().with_context(err)?;
        let qubit_id: u32 = f[1].parse().with_context(err)?;
        let t_trigger: usize = f[2].parse().with_context(err)?;
        let t_seconds: f64 = f[3].parse().with_context(err)?;
        let peak_value: f64 = f[4].parse().with_context(err)?;
        let cluster_id: usize = f[5].parse().with_context(err)?;
        if runs.len() <= run_id {
            runs.resize_with(run_id + 1, Vec::new);
        }
        let clusters = &mut runs[run_id];
        if clusters.len() <= cluster_id {
            clusters.resize_with(cluster_id + 1, || MultiQubitJump {
                members: Vec::new(),
                start_s: f64::INFINITY,
                end_s: f64::NEG_INFINITY,
            });
        }
        let cluster = &mut clusters[cluster_id];
        cluster.members.push(JumpDetection { qubit_id, t_trigger, peak_value });
        cluster.start_s = cluster.start_s.min(t_seconds);
        cluster.end_s = cluster.end_s.max(t_seconds);
    }
    Ok(runs)
}

// ---------------------------------------------------------------------------
// Spectroscopy series
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumManifest {
    pub format_version: u32,
    pub created_at_unix: u64,
    pub n_steps: usize,
    pub n_iterations: usize,
    pub config: TlsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_scrambles: Option<Vec<usize>>,
}

/// Write a spectroscopy series under a path stem: manifest JSON, the
/// sweep axis, the per-iteration spectrum bits, and the interleaved
/// detector probabilities.
pub fn write_spectrum(series: &SpectrumSeries, config: &TlsConfig, stem: &Path) -> Result<()> {
    let manifest = SpectrumManifest {
        format_version: FORMAT_VERSION,
        created_at_unix: created_at(),
        n_steps: series.n_steps,
        n_iterations: series.n_iterations,
        config: config.clone(),
        ground_truth_scrambles: series.ground_truth_scrambles.clone(),
    };
    fs::write(
        stem.with_extension("spectrum.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;

    let mut shifts = String::from("step_index,shift_hz\n");
    for (i, s) in series.shifts_hz.iter().enumerate() {
        shifts.push_str(&format!("{i},{s}\n"));
    }
    fs::write(stem.with_extension("shifts.csv"), shifts)?;

    let file = File::create(stem.with_extension("frames.csv"))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "iteration,step_index,bit")?;
    for it in 0..series.n_iterations {
        for (step, &bit) in series.frame(it).iter().enumerate() {
            writeln!(w, "{it},{step},{bit}")?;
        }
    }
    w.flush()?;

    let mut det = String::from("iteration,p_mr\n");
    for (it, p) in series.detector_probs.iter().enumerate() {
        det.push_str(&format!("{it},{p}\n"));
    }
    fs::write(stem.with_extension("detector.csv"), det)?;
    Ok(())
}

/// Read a spectroscopy series back from its path stem.
pub fn read_spectrum(stem: &Path) -> Result<(SpectrumSeries, TlsConfig)> {
    let manifest_file = stem.with_extension("spectrum.json");
    let text = fs::read_to_string(&manifest_file)
        .with_context(|| format!("reading {}", manifest_file.display()))?;
    let manifest: SpectrumManifest = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", manifest_file.display()))?;

    let shifts_file = stem.with_extension("shifts.csv");
    let mut shifts_hz = vec![0.0; manifest.n_steps];
    for (lineno, line) in fs::read_to_string(&shifts_file)?.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let (i, s) = line
            .split_once(',')
            .with_context(|| format!("{}:{}", shifts_file.display(), lineno + 1))?;
        let idx: usize = i.trim().parse()?;
        shifts_hz[idx] = s.trim().parse()?;
    }

    let frames_file = stem.with_extension("frames.csv");
    let mut frames = vec![0u8; manifest.n_steps * manifest.n_iterations];
    let file = File::open(&frames_file)
        .with_context(|| format!("reading {}", frames_file.display()))?;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let err = || format!("{}:{}", frames_file.display(), lineno + 1);
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            bail!("{}: expected 3 fields", err());
        }
        let it: usize = f[0].parse().with_context(err)?;
        let step: usize = f[1].parse().with_context(err)?;
        let bit: u8 = f[2].parse().with_context(err)?;
        frames[it * manifest.n_steps + step] = bit;
    }

    let det_file = stem.with_extension("detector.csv");
    let mut detector_probs = vec![0.0; manifest.n_iterations];
    for (lineno, line) in fs::read_to_string(&det_file)?.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let (i, p) = line
            .split_once(',')
            .with_context(|| format!("{}:{}", det_file.display(), lineno + 1))?;
        detector_probs[i.trim().parse::<usize>()?] = p.trim().parse()?;
    }

    Ok((
        SpectrumSeries {
            n_steps: manifest.n_steps,
            n_iterations: manifest.n_iterations,
            shifts_hz,
            frames,
            detector_probs,
            ground_truth_scrambles: manifest.ground_truth_scrambles,
        },
        manifest.config,
    ))
}
