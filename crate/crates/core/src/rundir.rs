//! On-disk layout of datasets and run directories.
//!
//! A dataset directory holds `dataset.csv` (and `noise.json` once noise has
//! been injected). A run directory holds:
//!
//! ```text
//! run.json              manifest: config snapshot + hash, seeds, dataset
//!                       fingerprint, noise report, timestamps
//! iter_<i>/epochs.csv   epoch,id,correct,loss for every tracked epoch
//! iter_<i>/fkl.csv      id,fkl (empty fkl = never learned)
//! iter_<i>/summary.json sizes, halt reason, accuracy curves
//! kept.txt              final training set, curriculum order
//! removed.csv           id,iteration for every removed example
//! final_model.bin       last iteration's classifier, flat f64 dump
//! retrained_model.bin   only when the config retrained on the kept set
//! ```
//!
//! Everything except `run.json` (which carries timestamps) is byte-stable
//! across reruns with identical inputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, write_csv, Dataset};
use crate::engine::{HaltReason, IterationResult, LateStopConfig, RunResult};
use crate::error::{Error, Result};
use crate::nn::{NetworkSpec, Parameters};
use crate::noise::{NoiseReport, NoiseSpec};
use crate::tracker::{EpochRow, FkLRecord, PredictionLog};

pub const DATASET_FILE: &str = "dataset.csv";
pub const NOISE_FILE: &str = "noise.json";
pub const MANIFEST_FILE: &str = "run.json";
pub const KEPT_FILE: &str = "kept.txt";
pub const REMOVED_FILE: &str = "removed.csv";
pub const MODEL_FILE: &str = "final_model.bin";
pub const RETRAINED_MODEL_FILE: &str = "retrained_model.bin";
pub const HOLDOUT_FILE: &str = "holdout.txt";

const MODEL_MAGIC: [u8; 4] = *b"LSNN";
const MODEL_VERSION: u32 = 1;

/// 64-bit FNV-1a over raw bytes; used for content fingerprints.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn fingerprint_bytes(bytes: &[u8]) -> String {
    format!("fnv1a64:{:016x}", fnv1a64(bytes))
}

pub fn fingerprint_file(path: &Path) -> Result<String> {
    Ok(fingerprint_bytes(&fs::read(path)?))
}

/// Content hash of a config snapshot: the fingerprint of its canonical
/// (serde field order) JSON serialization.
pub fn config_hash(cfg: &LateStopConfig) -> Result<String> {
    Ok(fingerprint_bytes(serde_json::to_string(cfg)?.as_bytes()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: String,
    pub fingerprint: String,
    pub examples: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub has_clean_labels: bool,
}

impl DatasetInfo {
    pub fn describe(ds: &Dataset, path: &Path) -> Result<Self> {
        Ok(DatasetInfo {
            path: path.display().to_string(),
            fingerprint: fingerprint_file(path)?,
            examples: ds.len(),
            feature_dim: ds.feature_dim(),
            num_classes: ds.num_classes,
            has_clean_labels: ds.clean_labels.is_some(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoldoutInfo {
    pub fraction: f64,
    pub holdout_size: usize,
    pub train_size: usize,
}

/// Reproducibility manifest stored as `run.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub created_unix: u64,
    pub finished_unix: u64,
    pub master_seed: u64,
    /// Seed each iteration derived from the master seed.
    pub iteration_seeds: Vec<u64>,
    pub config: LateStopConfig,
    pub config_hash: String,
    pub dataset: DatasetInfo,
    pub test_dataset: Option<DatasetInfo>,
    pub noise_report: Option<NoiseReport>,
    pub holdout: HoldoutInfo,
    pub layer_widths: Vec<usize>,
    pub iterations_run: usize,
}

/// Noise provenance stored next to a noisy dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSidecar {
    pub spec: NoiseSpec,
    pub report: NoiseReport,
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Creates `dir` (parents included) and requires it to be empty, so stale
/// artifacts from an earlier run can never leak into a new one.
pub fn create_empty_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    if fs::read_dir(dir)?.next().is_some() {
        return Err(Error::Input(format!(
            "output directory {} is not empty",
            dir.display()
        )));
    }
    Ok(())
}

/// Writes a dataset directory: `dataset.csv` plus an optional noise sidecar.
pub fn save_dataset_dir(ds: &Dataset, dir: &Path, noise: Option<&NoiseSidecar>) -> Result<()> {
    create_empty_dir(dir)?;
    write_csv(ds, &dir.join(DATASET_FILE))?;
    if let Some(sidecar) = noise {
        write_json_pretty(&dir.join(NOISE_FILE), sidecar)?;
    }
    Ok(())
}

pub fn dataset_csv_path(dir: &Path) -> PathBuf {
    dir.join(DATASET_FILE)
}

pub fn load_dataset_dir(dir: &Path) -> Result<Dataset> {
    load_csv(&dataset_csv_path(dir))
}

pub fn load_noise_sidecar(dir: &Path) -> Result<Option<NoiseSidecar>> {
    let path = dir.join(NOISE_FILE);
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&fs::read_to_string(path)?)?))
}

/// Flat parameter dump with a 16-byte header: 4-byte magic, u32 version,
/// u64 parameter count, then little-endian f64 values.
pub fn write_model(path: &Path, params: &Parameters) -> Result<()> {
    let flat = params.flatten();
    let mut bytes = Vec::with_capacity(16 + flat.len() * 8);
    bytes.extend_from_slice(&MODEL_MAGIC);
    bytes.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(flat.len() as u64).to_le_bytes());
    for v in flat {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &bytes)
}

pub fn load_model(path: &Path, spec: &NetworkSpec) -> Result<Parameters> {
    let bytes = fs::read(path)?;
    let fmt_err = |offset: usize, message: String| Error::Format {
        path: path.display().to_string(),
        locus: format!("0x{offset:x}"),
        message,
    };
    if bytes.len() < 16 {
        return Err(fmt_err(
            0,
            "model file shorter than its 16-byte header".into(),
        ));
    }
    if bytes[0..4] != MODEL_MAGIC {
        return Err(fmt_err(0, format!("bad magic {:?}", &bytes[0..4])));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != MODEL_VERSION {
        return Err(fmt_err(4, format!("unsupported model version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    if bytes.len() != 16 + count * 8 {
        return Err(fmt_err(
            16,
            format!(
                "expected {count} parameters ({} bytes), file has {}",
                16 + count * 8,
                bytes.len()
            ),
        ));
    }
    let flat: Vec<f64> = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Parameters::unflatten(spec, &flat)
}

/// Per-iteration summary stored as `iter_<i>/summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: u32,
    pub training_set_size: usize,
    pub learned_set_size: usize,
    pub epochs_trained: u32,
    pub tracked_epochs: u32,
    pub halt_reason: HaltReason,
    pub noise_rate: Option<f64>,
    pub train_accuracy: Vec<f64>,
    pub test_accuracy: Option<Vec<f64>>,
}

fn iteration_dir(dir: &Path, iteration: u32) -> PathBuf {
    dir.join(format!("iter_{iteration}"))
}

fn write_epochs_csv(path: &Path, log: &PredictionLog) -> Result<()> {
    let mut out = String::from("epoch,id,correct,loss\n");
    for (e, row) in log.epochs.iter().enumerate() {
        let epoch = e + 1;
        for (i, &id) in log.ids.iter().enumerate() {
            out.push_str(&format!(
                "{epoch},{id},{},{}\n",
                u8::from(row.correct[i]),
                row.loss[i]
            ));
        }
    }
    write_atomic(path, out.as_bytes())
}

fn write_fkl_csv(path: &Path, record: &FkLRecord) -> Result<()> {
    let mut rows: Vec<(u64, Option<u32>)> = record
        .ids
        .iter()
        .copied()
        .zip(record.first_learned.iter().copied())
        .collect();
    rows.sort_unstable_by_key(|&(id, _)| id);
    let mut out = String::from("id,fkl\n");
    for (id, fkl) in rows {
        match fkl {
            Some(e) => out.push_str(&format!("{id},{e}\n")),
            None => out.push_str(&format!("{id},\n")),
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Persists a finished run. The manifest is written last so a complete
/// `run.json` implies a complete directory.
pub fn write_run_dir(dir: &Path, run: &RunResult, manifest: &RunManifest) -> Result<()> {
    for it in &run.iterations {
        let idir = iteration_dir(dir, it.iteration);
        fs::create_dir_all(&idir)?;
        write_epochs_csv(&idir.join("epochs.csv"), &it.log)?;
        write_fkl_csv(&idir.join("fkl.csv"), &it.record)?;
        write_json_pretty(
            &idir.join("summary.json"),
            &IterationSummary {
                iteration: it.iteration,
                training_set_size: it.log.ids.len(),
                learned_set_size: it.size,
                epochs_trained: it.epochs_trained,
                tracked_epochs: it.tracked_epochs,
                halt_reason: it.halt_reason,
                noise_rate: it.noise_rate,
                train_accuracy: it.train_accuracy.clone(),
                test_accuracy: it.test_accuracy.clone(),
            },
        )?;
    }

    let mut kept = String::new();
    for id in &run.kept {
        kept.push_str(&format!("{id}\n"));
    }
    write_atomic(&dir.join(KEPT_FILE), kept.as_bytes())?;

    let mut removed = run.removed.clone();
    removed.sort_unstable_by_key(|&(id, iter)| (iter, id));
    let mut removed_csv = String::from("id,iteration\n");
    for (id, iter) in removed {
        removed_csv.push_str(&format!("{id},{iter}\n"));
    }
    write_atomic(&dir.join(REMOVED_FILE), removed_csv.as_bytes())?;

    write_model(&dir.join(MODEL_FILE), &run.final_params)?;
    if let Some(retrained) = &run.retrained_params {
        write_model(&dir.join(RETRAINED_MODEL_FILE), retrained)?;
    }

    write_json_pretty(&dir.join(MANIFEST_FILE), manifest)
}

/// Writes the ids held out before training, one per line.
pub fn write_holdout_ids(dir: &Path, ids: &[u64]) -> Result<()> {
    let mut out = String::new();
    for id in ids {
        out.push_str(&format!("{id}\n"));
    }
    write_atomic(&dir.join(HOLDOUT_FILE), out.as_bytes())
}

pub fn load_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Input(format!("{} is not a run directory ({e})", dir.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        locus: line.to_string(),
        message: message.into(),
    }
}

fn load_epochs_csv(path: &Path) -> Result<PredictionLog> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "epoch,id,correct,loss")) => {}
        _ => {
            return Err(parse_err(
                path,
                1,
                "bad header, expected `epoch,id,correct,loss`",
            ))
        }
    }
    let mut ids: Vec<u64> = Vec::new();
    let mut epochs: Vec<EpochRow> = Vec::new();
    let mut current_epoch = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let mut parts = line.split(',');
        let mut next = |what: &str| {
            parts
                .next()
                .ok_or_else(|| parse_err(path, line_no, format!("missing {what}")))
        };
        let epoch: usize = next("epoch")?
            .parse()
            .map_err(|e| parse_err(path, line_no, format!("bad epoch: {e}")))?;
        let id: u64 = next("id")?
            .parse()
            .map_err(|e| parse_err(path, line_no, format!("bad id: {e}")))?;
        let correct = match next("correct")? {
            "0" => false,
            "1" => true,
            other => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("bad correct bit `{other}`"),
                ))
            }
        };
        let loss: f64 = next("loss")?
            .parse()
            .map_err(|e| parse_err(path, line_no, format!("bad loss: {e}")))?;
        if epoch != current_epoch {
            if epoch != current_epoch + 1 {
                return Err(parse_err(path, line_no, format!("epoch jumped to {epoch}")));
            }
            current_epoch = epoch;
            epochs.push(EpochRow {
                correct: Vec::new(),
                loss: Vec::new(),
            });
        }
        if current_epoch == 1 {
            ids.push(id);
        }
        let row = epochs.last_mut().expect("epoch row exists");
        row.correct.push(correct);
        row.loss.push(loss);
    }
    for (e, row) in epochs.iter().enumerate() {
        if row.correct.len() != ids.len() {
            return Err(parse_err(
                path,
                0,
                format!(
                    "epoch {} covers {} of {} examples",
                    e + 1,
                    row.correct.len(),
                    ids.len()
                ),
            ));
        }
    }
    Ok(PredictionLog { ids, epochs })
}

fn load_fkl_csv(path: &Path, k: u32) -> Result<FkLRecord> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "id,fkl")) => {}
        _ => return Err(parse_err(path, 1, "bad header, expected `id,fkl`")),
    }
    let mut ids = Vec::new();
    let mut first_learned = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let (id_str, fkl_str) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, line_no, "expected `id,fkl`"))?;
        ids.push(
            id_str
                .parse::<u64>()
                .map_err(|e| parse_err(path, line_no, format!("bad id: {e}")))?,
        );
        first_learned.push(if fkl_str.is_empty() {
            None
        } else {
            Some(
                fkl_str
                    .parse::<u32>()
                    .map_err(|e| parse_err(path, line_no, format!("bad fkl: {e}")))?,
            )
        });
    }
    Ok(FkLRecord {
        k,
        ids,
        first_learned,
    })
}

fn load_id_lines(path: &Path) -> Result<Vec<u64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .map(|(idx, line)| {
            line.trim()
                .parse::<u64>()
                .map_err(|e| parse_err(path, idx + 1, format!("bad id: {e}")))
        })
        .collect()
}

fn load_removed_csv(path: &Path) -> Result<Vec<(u64, u32)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "id,iteration")) => {}
        _ => return Err(parse_err(path, 1, "bad header, expected `id,iteration`")),
    }
    lines
        .map(|(idx, line)| {
            let line_no = idx + 1;
            let (id_str, iter_str) = line
                .split_once(',')
                .ok_or_else(|| parse_err(path, line_no, "expected `id,iteration`"))?;
            Ok((
                id_str
                    .parse::<u64>()
                    .map_err(|e| parse_err(path, line_no, format!("bad id: {e}")))?,
                iter_str
                    .parse::<u32>()
                    .map_err(|e| parse_err(path, line_no, format!("bad iteration: {e}")))?,
            ))
        })
        .collect()
}

/// Reconstructs a run from its directory. The returned result is
/// equivalent to the in-memory one for every evaluation purpose (rankings,
/// retention, curves, model reload).
pub fn load_run_dir(dir: &Path) -> Result<(RunManifest, RunResult)> {
    let manifest = load_manifest(dir)?;
    let network = NetworkSpec::new(manifest.layer_widths.clone(), manifest.config.activation)?;
    let mut iterations = Vec::with_capacity(manifest.iterations_run);
    for i in 1..=manifest.iterations_run as u32 {
        let idir = iteration_dir(dir, i);
        let summary: IterationSummary =
            serde_json::from_str(&fs::read_to_string(idir.join("summary.json"))?)?;
        let log = load_epochs_csv(&idir.join("epochs.csv"))?;
        let record = load_fkl_csv(&idir.join("fkl.csv"), manifest.config.k)?;
        iterations.push(IterationResult {
            iteration: i,
            fkl_set: record.learned_order(),
            size: summary.learned_set_size,
            epochs_trained: summary.epochs_trained,
            tracked_epochs: summary.tracked_epochs,
            halt_reason: summary.halt_reason,
            noise_rate: summary.noise_rate,
            train_accuracy: summary.train_accuracy,
            test_accuracy: summary.test_accuracy,
            record,
            log,
        });
    }
    let kept = load_id_lines(&dir.join(KEPT_FILE))?;
    let removed = load_removed_csv(&dir.join(REMOVED_FILE))?;
    let final_params = load_model(&dir.join(MODEL_FILE), &network)?;
    let retrained_path = dir.join(RETRAINED_MODEL_FILE);
    let retrained_params = if retrained_path.exists() {
        Some(load_model(&retrained_path, &network)?)
    } else {
        None
    };
    Ok((
        manifest.clone(),
        RunResult {
            config: manifest.config,
            network,
            iterations,
            kept,
            removed,
            final_params,
            retrained_params,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, ClusterLayout, ClusterSpec, SyntheticSpec};
    use crate::engine;
    use crate::noise::{inject_symmetric, NoiseSpec};

    fn small_run() -> (Dataset, RunResult) {
        let ds = generate_synthetic(&SyntheticSpec {
            num_classes: 2,
            examples_per_class: 40,
            feature_dim: 2,
            layout: ClusterLayout::Explicit(vec![
                vec![ClusterSpec {
                    weight: 1.0,
                    mean: vec![-3.0, 0.0],
                    spread: 1.0,
                }],
                vec![ClusterSpec {
                    weight: 1.0,
                    mean: vec![3.0, 0.0],
                    spread: 1.0,
                }],
            ]),
            seed: 1,
        })
        .unwrap();
        let (noisy, _) = inject_symmetric(&ds, &NoiseSpec::symmetric(0.2, 2)).unwrap();
        let mut cfg = LateStopConfig::new(20.0, 40.0, 3);
        cfg.hidden_widths = vec![6];
        cfg.t_max = 30;
        cfg.warmup_epochs = 2;
        cfg.batch_size = 16;
        let run = engine::run(&cfg, &noisy, None).unwrap();
        (noisy, run)
    }

    fn manifest_for(run: &RunResult, ds: &Dataset, csv: &Path) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: 0,
            finished_unix: 0,
            master_seed: run.config.master_seed,
            iteration_seeds: Vec::new(),
            config: run.config.clone(),
            config_hash: config_hash(&run.config).unwrap(),
            dataset: DatasetInfo::describe(ds, csv).unwrap(),
            test_dataset: None,
            noise_report: None,
            holdout: HoldoutInfo {
                fraction: 0.0,
                holdout_size: 0,
                train_size: ds.len(),
            },
            layer_widths: run.network.layer_widths.clone(),
            iterations_run: run.iterations.len(),
        }
    }

    #[test]
    fn run_dir_round_trip_preserves_everything_evaluation_needs() {
        let (ds, run) = small_run();
        let tmp = tempfile::tempdir().unwrap();
        let csv = tmp.path().join("dataset.csv");
        write_csv(&ds, &csv).unwrap();
        let rundir = tmp.path().join("run");
        create_empty_dir(&rundir).unwrap();
        let manifest = manifest_for(&run, &ds, &csv);
        write_run_dir(&rundir, &run, &manifest).unwrap();

        let (loaded_manifest, loaded) = load_run_dir(&rundir).unwrap();
        assert_eq!(loaded_manifest.config, run.config);
        assert_eq!(loaded.kept, run.kept);
        {
            let mut a = loaded.removed.clone();
            let mut b = run.removed.clone();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b);
        }
        assert_eq!(loaded.final_params, run.final_params);
        assert_eq!(loaded.iterations.len(), run.iterations.len());
        for (l, r) in loaded.iterations.iter().zip(&run.iterations) {
            assert_eq!(l.size, r.size);
            assert_eq!(l.halt_reason, r.halt_reason);
            assert_eq!(l.fkl_set, r.fkl_set);
            // Losses round-trip exactly through shortest-repr formatting.
            assert_eq!(l.log.epochs.len(), r.log.epochs.len());
            for (le, re) in l.log.epochs.iter().zip(&r.log.epochs) {
                assert_eq!(le.loss, re.loss);
                assert_eq!(le.correct, re.correct);
            }
            // Same first-learned map (row order differs; compare by id).
            let mut lhs: Vec<(u64, Option<u32>)> = l
                .record
                .ids
                .iter()
                .copied()
                .zip(l.record.first_learned.iter().copied())
                .collect();
            let mut rhs: Vec<(u64, Option<u32>)> = r
                .record
                .ids
                .iter()
                .copied()
                .zip(r.record.first_learned.iter().copied())
                .collect();
            lhs.sort_unstable();
            rhs.sort_unstable();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn reruns_write_identical_bytes() {
        let (ds, run) = small_run();
        let tmp = tempfile::tempdir().unwrap();
        let csv = tmp.path().join("dataset.csv");
        write_csv(&ds, &csv).unwrap();
        let manifest = manifest_for(&run, &ds, &csv);
        let dir_a = tmp.path().join("a");
        let dir_b = tmp.path().join("b");
        create_empty_dir(&dir_a).unwrap();
        create_empty_dir(&dir_b).unwrap();
        write_run_dir(&dir_a, &run, &manifest).unwrap();
        write_run_dir(&dir_b, &run, &manifest).unwrap();
        for rel in [
            "kept.txt",
            "removed.csv",
            "iter_1/epochs.csv",
            "iter_1/fkl.csv",
            "iter_1/summary.json",
            "final_model.bin",
        ] {
            let a = fs::read(dir_a.join(rel)).unwrap();
            let b = fs::read(dir_b.join(rel)).unwrap();
            assert_eq!(a, b, "{rel} differs");
        }
    }

    #[test]
    fn model_file_round_trips_and_validates() {
        let (_, run) = small_run();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("model.bin");
        write_model(&path, &run.final_params).unwrap();
        let loaded = load_model(&path, &run.network).unwrap();
        assert_eq!(loaded, run.final_params);

        // Truncated file is a format error.
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(
            load_model(&path, &run.network),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn config_hash_is_stable_and_input_sensitive() {
        let cfg = LateStopConfig::new(10.0, 40.0, 1);
        let h1 = config_hash(&cfg).unwrap();
        let h2 = config_hash(&cfg).unwrap();
        assert_eq!(h1, h2);
        let mut other = cfg.clone();
        other.k = 4;
        assert_ne!(h1, config_hash(&other).unwrap());
    }

    #[test]
    fn create_empty_dir_rejects_leftovers() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("out");
        create_empty_dir(&dir).unwrap();
        fs::write(dir.join("stale"), b"x").unwrap();
        assert!(create_empty_dir(&dir).is_err());
    }
}
