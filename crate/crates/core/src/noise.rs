//! Label-noise injection with ground-truth bookkeeping.
//!
//! Both generators draw from a per-example RNG stream keyed by example id,
//! so the result is independent of iteration order and safe to parallelize
//! without losing determinism. Injection never touches features or the
//! preserved clean labels.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_stream, RngState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Symmetric,
    InstanceDependent,
}

/// Noise injection settings. `rate` is the expected mislabeled fraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rate: f64,
    pub seed: u64,
    /// Standard deviation of the per-instance flip probability used by the
    /// instance-dependent generator.
    #[serde(default = "default_instance_sd")]
    pub instance_sd: f64,
}

fn default_instance_sd() -> f64 {
    0.1
}

impl NoiseSpec {
    pub fn symmetric(rate: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Symmetric,
            rate,
            seed,
            instance_sd: default_instance_sd(),
        }
    }

    pub fn instance_dependent(rate: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::InstanceDependent,
            rate,
            seed,
            instance_sd: default_instance_sd(),
        }
    }

    fn validate(&self, ds: &Dataset) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::Config(format!(
                "noise rate must be in [0,1], got {}",
                self.rate
            )));
        }
        if self.rate > 0.0 && ds.num_classes < 2 {
            return Err(Error::Config(
                "cannot flip labels in a dataset with fewer than 2 classes".into(),
            ));
        }
        if self.kind == NoiseKind::InstanceDependent {
            if ds.feature_dim() < 1 {
                return Err(Error::Config(
                    "instance-dependent noise needs at least one feature".into(),
                ));
            }
            if !(self.instance_sd.is_finite() && self.instance_sd > 0.0) {
                return Err(Error::Config(format!(
                    "instance noise sd must be positive, got {}",
                    self.instance_sd
                )));
            }
        }
        Ok(())
    }
}

/// Bookkeeping of one injection.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NoiseReport {
    pub num_flipped: usize,
    /// num_flipped / dataset size.
    pub realized_rate: f64,
    /// `per_class_flip_counts[clean][given]` counts flipped examples; the
    /// diagonal is always zero because a flip always changes the label.
    pub per_class_flip_counts: Vec<Vec<u64>>,
}

fn example_stream_root(seed: u64) -> u64 {
    derive_stream(seed, 0x6578_6d70) // example-stream namespace
}

/// Prepares the output dataset: the incoming given labels are treated as
/// clean if no clean labels exist yet.
fn with_truth(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    if out.clean_labels.is_none() {
        out.clean_labels = Some(out.given_labels.clone());
    }
    out
}

/// Symmetric noise: each example independently, with probability `rate`,
/// has its label replaced by a uniform draw over the other
/// `num_classes - 1` classes. A flip always changes the label, so `rate`
/// equals the expected mislabeled fraction.
pub fn inject_symmetric(ds: &Dataset, spec: &NoiseSpec) -> Result<(Dataset, NoiseReport)> {
    spec.validate(ds)?;
    let mut out = with_truth(ds);
    let classes = out.num_classes;
    let mut counts = vec![vec![0u64; classes]; classes];
    let mut flipped = 0usize;
    let root = example_stream_root(spec.seed);
    for i in 0..out.len() {
        let mut rng = RngState::new(derive_stream(root, out.ids[i]));
        if rng.next_f64() >= spec.rate {
            continue;
        }
        let clean = out.given_labels[i];
        let draw = rng.next_index(classes - 1);
        let dest = if draw >= clean { draw + 1 } else { draw };
        out.given_labels[i] = dest;
        counts[clean][dest] += 1;
        flipped += 1;
    }
    let realized = if out.is_empty() {
        0.0
    } else {
        flipped as f64 / out.len() as f64
    };
    Ok((
        out,
        NoiseReport {
            num_flipped: flipped,
            realized_rate: realized,
            per_class_flip_counts: counts,
        },
    ))
}

/// Probability of each destination class for one instance under the
/// instance-dependent generator: the feature vector is projected through a
/// per-class random matrix and softmaxed over the non-true classes. The
/// true class always gets probability zero.
pub fn destination_distribution(
    features: &[f64],
    clean_label: usize,
    projection: &Matrix,
) -> Vec<f64> {
    let classes = projection.cols();
    let mut scores = vec![0.0; classes];
    for (d, &x) in features.iter().enumerate() {
        let row = projection.row(d);
        for (s, &w) in scores.iter_mut().zip(row) {
            *s += x * w;
        }
    }
    let max = scores
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != clean_label)
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut probs = vec![0.0; classes];
    let mut total = 0.0;
    for c in 0..classes {
        if c == clean_label {
            continue;
        }
        let e = (scores[c] - max).exp();
        probs[c] = e;
        total += e;
    }
    for p in &mut probs {
        *p /= total;
    }
    probs
}

/// The per-class random projection used by the instance-dependent
/// generator, derived from the injection seed.
pub fn instance_projection(seed: u64, feature_dim: usize, classes: usize) -> Matrix {
    let mut rng = RngState::new(derive_stream(seed, 0x7072_6f6a)); // projection namespace
    let data: Vec<f64> = (0..feature_dim * classes)
        .map(|_| rng.next_normal())
        .collect();
    Matrix::from_vec(feature_dim, classes, data).expect("shape is consistent by construction")
}

/// Instance-dependent noise: each example draws a flip probability from
/// Normal(rate, instance_sd) truncated to [0, 1] and, when flipped, picks
/// its destination from [`destination_distribution`]. Rate 0 is defined as
/// zero flips.
pub fn inject_instance_dependent(ds: &Dataset, spec: &NoiseSpec) -> Result<(Dataset, NoiseReport)> {
    spec.validate(ds)?;
    let mut out = with_truth(ds);
    let classes = out.num_classes;
    let mut counts = vec![vec![0u64; classes]; classes];
    let mut flipped = 0usize;
    if spec.rate > 0.0 {
        let projection = instance_projection(spec.seed, out.feature_dim(), classes);
        let root = example_stream_root(spec.seed);
        for i in 0..out.len() {
            let mut rng = RngState::new(derive_stream(root, out.ids[i]));
            let flip_prob = rng.next_truncated_unit_normal(spec.rate, spec.instance_sd);
            if rng.next_f64() >= flip_prob {
                continue;
            }
            let clean = out.given_labels[i];
            let probs = destination_distribution(out.features.row(i), clean, &projection);
            let u = rng.next_f64();
            let mut acc = 0.0;
            let mut dest = if clean == 0 { 1 } else { 0 };
            for (c, &p) in probs.iter().enumerate() {
                if c == clean {
                    continue;
                }
                acc += p;
                if u < acc {
                    dest = c;
                    break;
                }
            }
            out.given_labels[i] = dest;
            counts[clean][dest] += 1;
            flipped += 1;
        }
    }
    let realized = if out.is_empty() {
        0.0
    } else {
        flipped as f64 / out.len() as f64
    };
    Ok((
        out,
        NoiseReport {
            num_flipped: flipped,
            realized_rate: realized,
            per_class_flip_counts: counts,
        },
    ))
}

/// Dispatches on the spec kind.
pub fn inject(ds: &Dataset, spec: &NoiseSpec) -> Result<(Dataset, NoiseReport)> {
    match spec.kind {
        NoiseKind::Symmetric => inject_symmetric(ds, spec),
        NoiseKind::InstanceDependent => inject_instance_dependent(ds, spec),
    }
}

/// Fraction of examples whose given label disagrees with ground truth.
pub fn measure_noise_rate(ds: &Dataset) -> Result<f64> {
    ds.noise_rate()
}
