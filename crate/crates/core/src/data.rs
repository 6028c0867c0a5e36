//! Dataset representation, synthetic generation, CSV/IDX ingestion, and
//! the holdout split.
//!
//! Example ids are assigned once at creation and survive every subset
//! operation, so selection results can always be traced back to the
//! original examples. Ground-truth labels ride along for evaluation only;
//! training-side code gets a [`TrainView`] that physically lacks them.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_stream, RngState};

/// A labeled dataset. `given_labels` are what training sees and may be
/// noisy; `clean_labels`, when present, are ground truth reserved for
/// evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<u64>,
    pub features: Matrix,
    pub given_labels: Vec<usize>,
    pub clean_labels: Option<Vec<usize>>,
    pub num_classes: usize,
}

/// What the training and selection code is allowed to see: no ground
/// truth, just features and the given (possibly noisy) labels.
#[derive(Debug, Clone)]
pub struct TrainView {
    pub ids: Vec<u64>,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(
        ids: Vec<u64>,
        features: Matrix,
        given_labels: Vec<usize>,
        clean_labels: Option<Vec<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = features.rows();
        if ids.len() != n || given_labels.len() != n {
            return Err(Error::Input(format!(
                "inconsistent dataset lengths: {} ids, {} labels, {} feature rows",
                ids.len(),
                given_labels.len(),
                n
            )));
        }
        if let Some(clean) = &clean_labels {
            if clean.len() != n {
                return Err(Error::Input(format!(
                    "{} clean labels for {n} examples",
                    clean.len()
                )));
            }
            if let Some(&bad) = clean.iter().find(|&&l| l >= num_classes) {
                return Err(Error::Input(format!(
                    "clean label {bad} out of range for {num_classes} classes"
                )));
            }
        }
        if let Some(&bad) = given_labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Input(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if !features.is_finite() {
            return Err(Error::Input("non-finite feature value".into()));
        }
        let mut seen = ids.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Input("duplicate example ids".into()));
        }
        Ok(Dataset {
            ids,
            features,
            given_labels,
            clean_labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Row index of each id.
    pub fn id_index(&self) -> HashMap<u64, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect()
    }

    /// Subset containing exactly `ids`, in the given order. Unknown ids
    /// are an input error.
    pub fn subset(&self, ids: &[u64]) -> Result<Dataset> {
        let index = self.id_index();
        let rows: Vec<usize> = ids
            .iter()
            .map(|id| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Input(format!("unknown example id {id}")))
            })
            .collect::<Result<_>>()?;
        Ok(Dataset {
            ids: ids.to_vec(),
            features: self.features.gather_rows(&rows),
            given_labels: rows.iter().map(|&r| self.given_labels[r]).collect(),
            clean_labels: self
                .clean_labels
                .as_ref()
                .map(|c| rows.iter().map(|&r| c[r]).collect()),
            num_classes: self.num_classes,
        })
    }

    /// The ground-truth-free view used by training and selection.
    pub fn train_view(&self) -> TrainView {
        TrainView {
            ids: self.ids.clone(),
            features: self.features.clone(),
            labels: self.given_labels.clone(),
            num_classes: self.num_classes,
        }
    }

    /// Fraction of examples whose given label disagrees with ground truth.
    pub fn noise_rate(&self) -> Result<f64> {
        let clean = self.clean_labels.as_ref().ok_or_else(|| {
            Error::Eval("noise rate needs ground-truth labels, dataset has none".into())
        })?;
        if self.is_empty() {
            return Ok(0.0);
        }
        let flipped = self
            .given_labels
            .iter()
            .zip(clean)
            .filter(|(g, c)| g != c)
            .count();
        Ok(flipped as f64 / self.len() as f64)
    }
}

impl TrainView {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Restricts the view to `ids`, preserving the given order.
    pub fn subset(&self, ids: &[u64]) -> Result<TrainView> {
        let index: HashMap<u64, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        let rows: Vec<usize> = ids
            .iter()
            .map(|id| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Input(format!("unknown example id {id}")))
            })
            .collect::<Result<_>>()?;
        Ok(TrainView {
            ids: ids.to_vec(),
            features: self.features.gather_rows(&rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            num_classes: self.num_classes,
        })
    }
}

/// One Gaussian cluster of a class.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    /// Sampling weight within the class; weights of a class sum to 1.
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Per-dimension standard deviation; must be positive.
    pub spread: f64,
}

/// How cluster centers are laid out.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ClusterLayout {
    /// Fully explicit cluster list per class.
    Explicit(Vec<Vec<ClusterSpec>>),
    /// Cluster means drawn uniformly from [-separation, separation]^d
    /// using the dataset seed; `weights` is shared by every class and
    /// allows rare subpopulations.
    Auto {
        clusters_per_class: usize,
        weights: Vec<f64>,
        separation: f64,
        spread: f64,
    },
}

/// Specification of a synthetic Gaussian-mixture dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub examples_per_class: usize,
    pub feature_dim: usize,
    pub layout: ClusterLayout,
    pub seed: u64,
}

impl SyntheticSpec {
    fn resolve_clusters(&self) -> Result<Vec<Vec<ClusterSpec>>> {
        let clusters = match &self.layout {
            ClusterLayout::Explicit(classes) => classes.clone(),
            ClusterLayout::Auto {
                clusters_per_class,
                weights,
                separation,
                spread,
            } => {
                if *clusters_per_class == 0 || weights.len() != *clusters_per_class {
                    return Err(Error::Config(format!(
                        "auto layout needs one weight per cluster: {} weights for {} clusters",
                        weights.len(),
                        clusters_per_class
                    )));
                }
                if !(separation.is_finite() && *separation > 0.0) {
                    return Err(Error::Config(format!(
                        "separation must be positive, got {separation}"
                    )));
                }
                let mut rng = RngState::new(derive_stream(self.seed, 0x6d65616e)); // mean stream
                (0..self.num_classes)
                    .map(|_| {
                        weights
                            .iter()
                            .map(|&weight| ClusterSpec {
                                weight,
                                mean: (0..self.feature_dim)
                                    .map(|_| rng.next_range_f64(-separation, *separation))
                                    .collect(),
                                spread: *spread,
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        if clusters.len() != self.num_classes {
            return Err(Error::Config(format!(
                "{} cluster groups for {} classes",
                clusters.len(),
                self.num_classes
            )));
        }
        for (c, class) in clusters.iter().enumerate() {
            if class.is_empty() {
                return Err(Error::Config(format!("class {c} has no clusters")));
            }
            let total: f64 = class.iter().map(|cl| cl.weight).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "class {c} cluster weights sum to {total}, expected 1"
                )));
            }
            for cl in class {
                if !(cl.spread.is_finite() && cl.spread > 0.0) {
                    return Err(Error::Config(format!(
                        "class {c} has non-positive spread {}",
                        cl.spread
                    )));
                }
                if cl.weight < 0.0 {
                    return Err(Error::Config(format!(
                        "class {c} has negative cluster weight"
                    )));
                }
                if cl.mean.len() != self.feature_dim {
                    return Err(Error::Config(format!(
                        "class {c} cluster mean has {} dims, expected {}",
                        cl.mean.len(),
                        self.feature_dim
                    )));
                }
            }
        }
        Ok(clusters)
    }
}

/// Generates a Gaussian-mixture dataset. Clean labels equal given labels
/// (no noise yet); class sizes match the spec exactly.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.num_classes == 0 || spec.examples_per_class == 0 || spec.feature_dim == 0 {
        return Err(Error::Config(format!(
            "degenerate synthetic spec: {} classes x {} examples, dim {}",
            spec.num_classes, spec.examples_per_class, spec.feature_dim
        )));
    }
    let clusters = spec.resolve_clusters()?;
    let n = spec.num_classes * spec.examples_per_class;
    let mut rng = RngState::new(derive_stream(spec.seed, 0x73616d70)); // sample stream
    let mut data = Vec::with_capacity(n * spec.feature_dim);
    let mut labels = Vec::with_capacity(n);
    for (class, class_clusters) in clusters.iter().enumerate() {
        for _ in 0..spec.examples_per_class {
            let u = rng.next_f64();
            let mut acc = 0.0;
            let mut chosen = class_clusters.len() - 1;
            for (ci, cl) in class_clusters.iter().enumerate() {
                acc += cl.weight;
                if u < acc {
                    chosen = ci;
                    break;
                }
            }
            let cl = &class_clusters[chosen];
            for d in 0..spec.feature_dim {
                data.push(cl.mean[d] + cl.spread * rng.next_normal());
            }
            labels.push(class);
        }
    }
    let features = Matrix::from_vec(n, spec.feature_dim, data)?;
    Dataset::new(
        (0..n as u64).collect(),
        features,
        labels.clone(),
        Some(labels),
        spec.num_classes,
    )
}

/// Holdout split specification.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of examples moved to the holdout, in [0, 1).
    pub holdout_fraction: f64,
    pub seed: u64,
}

/// Splits `ds` into (train, holdout). The holdout keeps its noisy given
/// labels; both halves stay in original id order.
pub fn split_holdout(ds: &Dataset, split: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&split.holdout_fraction) {
        return Err(Error::Config(format!(
            "holdout fraction must be in [0,1), got {}",
            split.holdout_fraction
        )));
    }
    let n = ds.len();
    let holdout_size = (split.holdout_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = RngState::new(derive_stream(split.seed, 0x73706c69)); // split stream
    rng.shuffle(&mut order);
    let mut is_holdout = vec![false; n];
    for &row in order.iter().take(holdout_size) {
        is_holdout[row] = true;
    }
    let holdout_ids: Vec<u64> = ds
        .ids
        .iter()
        .zip(&is_holdout)
        .filter_map(|(&id, &h)| h.then_some(id))
        .collect();
    let train_ids: Vec<u64> = ds
        .ids
        .iter()
        .zip(&is_holdout)
        .filter_map(|(&id, &h)| (!h).then_some(id))
        .collect();
    Ok((ds.subset(&train_ids)?, ds.subset(&holdout_ids)?))
}

/// Writes the canonical CSV form: header then one row per example,
/// `id,label[,clean_label],f0..fD`. Floats use the shortest
/// representation that round-trips exactly.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let dim = ds.feature_dim();
    out.push_str("id,label");
    if ds.clean_labels.is_some() {
        out.push_str(",clean_label");
    }
    for d in 0..dim {
        out.push_str(&format!(",f{d}"));
    }
    out.push('\n');
    for i in 0..ds.len() {
        out.push_str(&format!("{},{}", ds.ids[i], ds.given_labels[i]));
        if let Some(clean) = &ds.clean_labels {
            out.push_str(&format!(",{}", clean[i]));
        }
        for &v in ds.features.row(i) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    let mut f = File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

fn format_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        locus: line.to_string(),
        message: message.into(),
    }
}

/// Loads the canonical CSV form written by [`write_csv`]. The header
/// decides whether a clean-label column is present; the class count is
/// the largest label seen plus one.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| format_err(path, 0, format!("cannot open: {e}")))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| format_err(path, 1, "empty file, expected a header row"))?;
    let header = header.map_err(|e| format_err(path, 1, e.to_string()))?;
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.len() < 3 || cols[0] != "id" || cols[1] != "label" {
        return Err(format_err(
            path,
            1,
            format!("bad header `{header}`, expected `id,label[,clean_label],f0..`"),
        ));
    }
    let has_clean = cols[2] == "clean_label";
    let feature_start = if has_clean { 3 } else { 2 };
    let dim = cols.len() - feature_start;
    if dim == 0 {
        return Err(format_err(path, 1, "header declares no feature columns"));
    }

    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut clean = Vec::new();
    let mut data = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| format_err(path, line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != cols.len() {
            return Err(format_err(
                path,
                line_no,
                format!("{} fields, expected {}", fields.len(), cols.len()),
            ));
        }
        ids.push(
            fields[0]
                .parse::<u64>()
                .map_err(|e| format_err(path, line_no, format!("bad id `{}`: {e}", fields[0])))?,
        );
        labels.push(
            fields[1].parse::<usize>().map_err(|e| {
                format_err(path, line_no, format!("bad label `{}`: {e}", fields[1]))
            })?,
        );
        if has_clean {
            clean.push(fields[2].parse::<usize>().map_err(|e| {
                format_err(
                    path,
                    line_no,
                    format!("bad clean label `{}`: {e}", fields[2]),
                )
            })?);
        }
        for f in &fields[feature_start..] {
            let v = f
                .parse::<f64>()
                .map_err(|e| format_err(path, line_no, format!("bad feature `{f}`: {e}")))?;
            if !v.is_finite() {
                return Err(format_err(
                    path,
                    line_no,
                    format!("non-finite feature `{f}`"),
                ));
            }
            data.push(v);
        }
    }
    let num_classes = labels
        .iter()
        .chain(clean.iter())
        .max()
        .map_or(0, |&m| m + 1)
        .max(1);
    let features = Matrix::from_vec(ids.len(), dim, data)?;
    Dataset::new(
        ids,
        features,
        labels,
        has_clean.then_some(clean),
        num_classes,
    )
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(reader: &mut impl Read, path: &Path, offset: &mut usize) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf).map_err(|e| Error::Format {
        path: path.display().to_string(),
        locus: format!("0x{:x}", *offset),
        message: format!("truncated read: {e}"),
    })?;
    *offset += 4;
    Ok(u32::from_be_bytes(buf))
}

/// Loads an IDX image/label file pair (the de-facto digit-dataset binary
/// layout: big-endian magic and dimensions, then raw bytes). Pixel bytes
/// are normalized to [0, 1]; the labels are trusted as ground truth, so
/// `clean_labels` is populated alongside `given_labels`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let bad_magic = |path: &Path, got: u32, want: u32| Error::Format {
        path: path.display().to_string(),
        locus: "0x0".into(),
        message: format!("bad magic number 0x{got:08x}, expected 0x{want:08x}"),
    };

    let mut img = BufReader::new(File::open(images_path)?);
    let mut off = 0usize;
    let magic = read_u32_be(&mut img, images_path, &mut off)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(bad_magic(images_path, magic, IDX_IMAGES_MAGIC));
    }
    let count = read_u32_be(&mut img, images_path, &mut off)? as usize;
    let rows = read_u32_be(&mut img, images_path, &mut off)? as usize;
    let cols = read_u32_be(&mut img, images_path, &mut off)? as usize;
    let dim = rows * cols;
    let mut pixels = vec![0u8; count * dim];
    img.read_exact(&mut pixels).map_err(|e| Error::Format {
        path: images_path.display().to_string(),
        locus: format!("0x{off:x}"),
        message: format!("truncated pixel data: {e}"),
    })?;

    let mut lab = BufReader::new(File::open(labels_path)?);
    let mut loff = 0usize;
    let magic = read_u32_be(&mut lab, labels_path, &mut loff)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(bad_magic(labels_path, magic, IDX_LABELS_MAGIC));
    }
    let label_count = read_u32_be(&mut lab, labels_path, &mut loff)? as usize;
    if label_count != count {
        return Err(Error::Format {
            path: labels_path.display().to_string(),
            locus: format!("0x{loff:x}"),
            message: format!("{label_count} labels for {count} images"),
        });
    }
    let mut raw_labels = vec![0u8; count];
    lab.read_exact(&mut raw_labels).map_err(|e| Error::Format {
        path: labels_path.display().to_string(),
        locus: format!("0x{loff:x}"),
        message: format!("truncated label data: {e}"),
    })?;

    let features = Matrix::from_vec(
        count,
        dim,
        pixels.iter().map(|&b| b as f64 / 255.0).collect(),
    )?;
    let labels: Vec<usize> = raw_labels.iter().map(|&b| b as usize).collect();
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1).max(1);
    Dataset::new(
        (0..count as u64).collect(),
        features,
        labels.clone(),
        Some(labels),
        num_classes,
    )
}
