//! The iterative late-stopping orchestrator.
//!
//! Each iteration trains a freshly initialized classifier on the current
//! training set, watches per-example learning dynamics after every epoch,
//! and halts once enough examples have been consistently learned; the
//! examples that met the consecutive-correct criterion become the next,
//! smaller training set, ordered from earliest learned to latest. The
//! outer loop stops once the removal budget exceeds the declared noise
//! rate (or, in noise-target mode, once the planned cumulative removal
//! covers the requested noise reduction).
//!
//! Selection never sees ground-truth labels: the orchestrator works on a
//! [`TrainView`], which physically lacks them.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{split_holdout, Dataset, SplitSpec, TrainView};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{
    batch_losses, forward, init_parameters, loss_and_grad, predict, sgd_step, Activation,
    NetworkSpec, OptimizerState, Parameters,
};
use crate::rng::{derive_stream, RngState};
use crate::tracker::{FkLRecord, FkLTracker, PredictionLog};

/// Stream tags for seeds derived from the master seed. Iteration seeds use
/// the iteration index directly (1..=i_max), so tags sit far above 2^32.
const SPLIT_STREAM: u64 = 0x73_706c_6974; // "split"
const RETRAIN_STREAM: u64 = 0x72_6574_7261_696e; // "retrain"

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OuterStopKind {
    /// Stop once `m * i` exceeds the noise rate `n` (the removal budget).
    #[default]
    Budget,
    /// Stop once the cumulative planned removal `1 - (1 - m/100)^i`
    /// covers the requested reduction from the initial noise rate to
    /// `noise_target_percent`.
    NoiseTarget,
}

/// Full configuration of a run. Serialized as flat JSON; unknown keys are
/// a hard error so hyperparameter typos cannot pass silently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LateStopConfig {
    /// Iteration rate m%: fraction of the current set scheduled for
    /// removal per iteration, in (0, 100].
    pub m_percent: f64,
    /// Noise rate n% used by the outer stopping rule, in [0, 100).
    pub n_percent: f64,
    /// Consecutive correct epochs required to call an example learned.
    #[serde(default = "default_k")]
    pub k: u32,
    /// Maximum epochs per iteration, including warm-up.
    #[serde(default = "default_t_max")]
    pub t_max: u32,
    /// Maximum number of iterations.
    #[serde(default = "default_i_max")]
    pub i_max: u32,
    /// Leading epochs that train normally but are excluded from the
    /// consecutive-correct bookkeeping.
    #[serde(default = "default_warmup")]
    pub warmup_epochs: u32,
    #[serde(default)]
    pub outer_stop: OuterStopKind,
    /// Target noise percentage for noise-target mode; must be unset in
    /// budget mode.
    #[serde(default)]
    pub noise_target_percent: Option<f64>,
    /// Budget mode stops on `m*i > n` when true, `m*i >= n` when false.
    #[serde(default = "default_true")]
    pub strict_comparison: bool,
    #[serde(default = "default_hidden")]
    pub hidden_widths: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    /// Clamped to the current training-set size.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Optional step decay: multiply the learning rate by
    /// `lr_decay_factor` every `lr_decay_every` epochs within an iteration.
    #[serde(default)]
    pub lr_decay_every: Option<u32>,
    #[serde(default = "default_lr_decay_factor")]
    pub lr_decay_factor: f64,
    /// Fraction of the input data reserved as a (noisy) holdout before
    /// training; used by [`split_for_run`].
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    pub master_seed: u64,
    /// Retrain a fresh classifier on the final kept set after the loop.
    #[serde(default)]
    pub retrain_final: bool,
    /// Epoch budget for retraining (and for baseline comparisons);
    /// defaults to `t_max`.
    #[serde(default)]
    pub retrain_epochs: Option<u32>,
    /// Trailing-epoch window for the loss ranking; defaults to
    /// `min(k, tracked epochs)`.
    #[serde(default)]
    pub loss_rank_window: Option<u32>,
}

fn default_k() -> u32 {
    3
}
fn default_t_max() -> u32 {
    200
}
fn default_i_max() -> u32 {
    100
}
fn default_warmup() -> u32 {
    5
}
fn default_true() -> bool {
    true
}
fn default_hidden() -> Vec<usize> {
    vec![32, 16]
}
fn default_learning_rate() -> f64 {
    0.02
}
fn default_momentum() -> f64 {
    0.9
}
fn default_weight_decay() -> f64 {
    5e-4
}
fn default_batch_size() -> usize {
    128
}
fn default_lr_decay_factor() -> f64 {
    0.1
}
fn default_holdout() -> f64 {
    0.1
}

impl LateStopConfig {
    /// A minimal valid configuration; callers override what they need.
    pub fn new(m_percent: f64, n_percent: f64, master_seed: u64) -> Self {
        LateStopConfig {
            m_percent,
            n_percent,
            k: default_k(),
            t_max: default_t_max(),
            i_max: default_i_max(),
            warmup_epochs: default_warmup(),
            outer_stop: OuterStopKind::Budget,
            noise_target_percent: None,
            strict_comparison: true,
            hidden_widths: default_hidden(),
            activation: Activation::Relu,
            learning_rate: default_learning_rate(),
            momentum: default_momentum(),
            weight_decay: default_weight_decay(),
            batch_size: default_batch_size(),
            lr_decay_every: None,
            lr_decay_factor: default_lr_decay_factor(),
            holdout_fraction: default_holdout(),
            master_seed,
            retrain_final: false,
            retrain_epochs: None,
            loss_rank_window: None,
        }
    }

    /// Strict JSON load: unknown keys fail.
    pub fn from_json_str(json: &str) -> Result<Self> {
        let cfg: LateStopConfig =
            serde_json::from_str(json).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Config(msg));
        if !(self.m_percent > 0.0 && self.m_percent <= 100.0) {
            return err(format!(
                "m_percent must be in (0, 100], got {}",
                self.m_percent
            ));
        }
        if !(self.n_percent >= 0.0 && self.n_percent < 100.0) {
            return err(format!(
                "n_percent must be in [0, 100), got {}",
                self.n_percent
            ));
        }
        if self.k == 0 {
            return err("k must be at least 1".into());
        }
        if self.i_max == 0 {
            return err("i_max must be at least 1".into());
        }
        if self.t_max < self.k + self.warmup_epochs {
            return err(format!(
                "t_max ({}) must be at least k + warmup_epochs ({})",
                self.t_max,
                self.k + self.warmup_epochs
            ));
        }
        if self.hidden_widths.contains(&0) {
            return err("hidden layer widths must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return err(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return err(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return err(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            ));
        }
        if self.batch_size == 0 {
            return err("batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return err(format!(
                "holdout_fraction must be in [0, 1), got {}",
                self.holdout_fraction
            ));
        }
        match (self.outer_stop, self.noise_target_percent) {
            (OuterStopKind::Budget, Some(_)) => {
                return err("noise_target_percent is set but outer_stop is \"budget\"; \
                     set outer_stop to \"noise_target\" or drop the key"
                    .into());
            }
            (OuterStopKind::NoiseTarget, None) => {
                return err("outer_stop \"noise_target\" requires noise_target_percent".into());
            }
            (OuterStopKind::NoiseTarget, Some(t)) => {
                if !(t >= 0.0 && t < self.n_percent) {
                    return err(format!(
                        "noise_target_percent must be in [0, n_percent), got {t} with n_percent {}",
                        self.n_percent
                    ));
                }
            }
            (OuterStopKind::Budget, None) => {}
        }
        if let Some(every) = self.lr_decay_every {
            if every == 0 {
                return err("lr_decay_every must be at least 1".into());
            }
            if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
                return err(format!(
                    "lr_decay_factor must be in (0, 1], got {}",
                    self.lr_decay_factor
                ));
            }
        }
        if let Some(w) = self.loss_rank_window {
            if w == 0 {
                return err("loss_rank_window must be at least 1".into());
            }
        }
        if self.retrain_epochs == Some(0) {
            return err("retrain_epochs must be at least 1".into());
        }
        Ok(())
    }

    /// Full layer widths for a dataset with the given dimensions.
    pub fn network_for(&self, feature_dim: usize, num_classes: usize) -> Result<NetworkSpec> {
        let mut widths = Vec::with_capacity(self.hidden_widths.len() + 2);
        widths.push(feature_dim);
        widths.extend_from_slice(&self.hidden_widths);
        widths.push(num_classes);
        NetworkSpec::new(widths, self.activation)
    }

    /// Trailing-epoch window for the loss ranking of a log with
    /// `tracked_epochs` entries.
    pub fn loss_window(&self, tracked_epochs: usize) -> usize {
        let w = self
            .loss_rank_window
            .map(|w| w as usize)
            .unwrap_or(self.k as usize);
        w.min(tracked_epochs).max(1)
    }
}

/// Why an iteration's inner loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    /// The learned-example count crossed the shrink threshold.
    Threshold,
    /// The epoch budget ran out first; the partial learned set is used and
    /// never-learned examples are dropped as latest learners.
    TMaxExhausted,
}

/// Everything produced by one iteration.
#[derive(Debug, Clone)]
pub struct IterationResult {
    pub iteration: u32,
    /// Examples that met the criterion, ascending by (learned epoch, id);
    /// this is the next iteration's training set.
    pub fkl_set: Vec<u64>,
    /// Size of `fkl_set`.
    pub size: usize,
    /// Total epochs trained this iteration, including warm-up.
    pub epochs_trained: u32,
    /// Epochs fed to the tracker (excludes warm-up).
    pub tracked_epochs: u32,
    pub halt_reason: HaltReason,
    /// Ground-truth noise rate of this iteration's training set; filled in
    /// by evaluation code after the run, never read during it.
    pub noise_rate: Option<f64>,
    /// Training-set accuracy after each epoch (includes warm-up epochs).
    pub train_accuracy: Vec<f64>,
    /// Test-set accuracy after each epoch, when a test set was supplied.
    pub test_accuracy: Option<Vec<f64>>,
    pub record: FkLRecord,
    pub log: PredictionLog,
}

/// Result of a whole run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: LateStopConfig,
    pub network: NetworkSpec,
    pub iterations: Vec<IterationResult>,
    /// Final training set, in curriculum order (earliest learned first).
    pub kept: Vec<u64>,
    /// Every removed id with the iteration that removed it.
    pub removed: Vec<(u64, u32)>,
    /// The classifier from the last iteration.
    pub final_params: Parameters,
    /// Present when the config asked for a fresh classifier trained on the
    /// kept set.
    pub retrained_params: Option<Parameters>,
}

impl RunResult {
    /// Training-set ids of iteration `i` (1-based): the run input for
    /// iteration 1, afterwards the previous iteration's learned set.
    pub fn iteration_ids(&self, iteration: u32) -> Option<&[u64]> {
        let idx = iteration.checked_sub(1)? as usize;
        self.iterations.get(idx).map(|it| it.log.ids.as_slice())
    }
}

/// Progress callbacks emitted during a run.
#[derive(Debug, Clone, Copy)]
pub enum RunEvent {
    EpochDone {
        iteration: u32,
        epoch: u32,
        train_accuracy: f64,
        learned_count: usize,
    },
    IterationDone {
        iteration: u32,
        size: usize,
        epochs_trained: u32,
        halt_reason: HaltReason,
    },
}

/// Inner halting rule: true once the learned-example count exceeds
/// `previous size * (1 - m%)`. Strict comparison; the count lands at epoch
/// granularity, so it may overshoot the threshold slightly.
pub fn inner_halt(learned: usize, previous_size: usize, m_percent: f64) -> bool {
    learned as f64 > previous_size as f64 * (1.0 - m_percent / 100.0)
}

/// Outer stopping rule after iteration `i`.
pub fn outer_stop(
    i: u32,
    m_percent: f64,
    n_percent: f64,
    mode: OuterStopKind,
    noise_target_percent: Option<f64>,
    strict: bool,
) -> bool {
    match mode {
        OuterStopKind::Budget => {
            let removal = m_percent * i as f64;
            if strict {
                removal > n_percent
            } else {
                removal >= n_percent
            }
        }
        OuterStopKind::NoiseTarget => {
            let target = noise_target_percent.unwrap_or(0.0);
            let planned = 1.0 - (1.0 - m_percent / 100.0).powi(i as i32);
            planned >= (n_percent - target) / 100.0
        }
    }
}

/// Seed for iteration `i`, mixed from the master seed. Deterministic and
/// collision-free across iterations.
pub fn derive_iteration_seed(master_seed: u64, iteration: u32) -> u64 {
    derive_stream(master_seed, iteration as u64)
}

/// The holdout split a run performs before training, derived from the
/// master seed so the whole pipeline replays from one number.
pub fn split_for_run(cfg: &LateStopConfig, ds: &Dataset) -> Result<(Dataset, Dataset)> {
    split_holdout(
        ds,
        &SplitSpec {
            holdout_fraction: cfg.holdout_fraction,
            seed: derive_stream(cfg.master_seed, SPLIT_STREAM),
        },
    )
}

fn epoch_learning_rate(cfg: &LateStopConfig, epoch: u32) -> f64 {
    match cfg.lr_decay_every {
        Some(every) => cfg.learning_rate * cfg.lr_decay_factor.powi(((epoch - 1) / every) as i32),
        None => cfg.learning_rate,
    }
}

fn train_one_epoch(
    spec: &NetworkSpec,
    params: &mut Parameters,
    opt: &mut OptimizerState,
    view: &TrainView,
    rng: &mut RngState,
    batch_size: usize,
) -> Result<()> {
    let mut order: Vec<usize> = (0..view.len()).collect();
    rng.shuffle(&mut order);
    for chunk in order.chunks(batch_size) {
        let batch = view.features.gather_rows(chunk);
        let labels: Vec<usize> = chunk.iter().map(|&r| view.labels[r]).collect();
        let (_, grad) = loss_and_grad(spec, params, &batch, &labels)?;
        sgd_step(params, &grad, opt)?;
    }
    Ok(())
}

/// Post-epoch evaluation pass over the full set, fixed order: correctness
/// bit and cross-entropy loss per example, plus the accuracy.
fn evaluate_on_view(
    spec: &NetworkSpec,
    params: &Parameters,
    view: &TrainView,
) -> Result<(Vec<bool>, Vec<f64>, f64)> {
    let logits = forward(spec, params, &view.features)?;
    let preds = predict(&logits);
    let losses = batch_losses(&logits, &view.labels)?;
    let correct: Vec<bool> = preds
        .iter()
        .zip(&view.labels)
        .map(|(p, l)| p == l)
        .collect();
    let hits = correct.iter().filter(|&&c| c).count();
    let accuracy = if correct.is_empty() {
        0.0
    } else {
        hits as f64 / correct.len() as f64
    };
    Ok((correct, losses, accuracy))
}

fn accuracy_against(
    spec: &NetworkSpec,
    params: &Parameters,
    features: &Matrix,
    labels: &[usize],
) -> Result<f64> {
    let logits = forward(spec, params, features)?;
    let preds = predict(&logits);
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(if labels.is_empty() {
        0.0
    } else {
        hits as f64 / labels.len() as f64
    })
}

/// Plain training loop: fresh classifier on `view` for `epochs` epochs,
/// using the config's trainer settings. Used for the final retrain and for
/// cross-entropy baselines.
pub fn train_classifier(
    cfg: &LateStopConfig,
    view: &TrainView,
    epochs: u32,
    seed: u64,
) -> Result<(NetworkSpec, Parameters)> {
    if view.is_empty() {
        return Err(Error::Input("cannot train on an empty dataset".into()));
    }
    let network = cfg.network_for(view.features.cols(), view.num_classes)?;
    let mut params = init_parameters(&network, &mut RngState::new(derive_stream(seed, 0)))?;
    let mut opt = OptimizerState::new(&params, cfg.learning_rate, cfg.momentum, cfg.weight_decay)?;
    let batch = cfg.batch_size.min(view.len());
    for t in 1..=epochs {
        opt.learning_rate = epoch_learning_rate(cfg, t);
        let mut rng = RngState::new(derive_stream(seed, t as u64));
        train_one_epoch(&network, &mut params, &mut opt, view, &mut rng, batch)?;
    }
    Ok((network, params))
}

/// Runs the full iterative procedure on `train` (already holdout-split).
/// `test`, when given, is only used to record per-epoch test accuracy.
pub fn run(cfg: &LateStopConfig, train: &Dataset, test: Option<&Dataset>) -> Result<RunResult> {
    run_with_progress(cfg, train, test, |_| {})
}

pub fn run_with_progress(
    cfg: &LateStopConfig,
    train: &Dataset,
    test: Option<&Dataset>,
    mut on_event: impl FnMut(RunEvent),
) -> Result<RunResult> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    let network = cfg.network_for(train.feature_dim(), train.num_classes)?;
    let full_view = train.train_view();
    let test_eval: Option<(&Matrix, Vec<usize>)> = test.map(|t| {
        let labels = t
            .clean_labels
            .clone()
            .unwrap_or_else(|| t.given_labels.clone());
        (&t.features, labels)
    });

    let mut current_ids = full_view.ids.clone();
    let mut previous_size = current_ids.len();
    let mut removed: Vec<(u64, u32)> = Vec::new();
    let mut iterations: Vec<IterationResult> = Vec::new();
    let mut final_params: Option<Parameters> = None;

    for i in 1..=cfg.i_max {
        let iter_seed = derive_iteration_seed(cfg.master_seed, i);
        let view = full_view.subset(&current_ids)?;
        let mut params =
            init_parameters(&network, &mut RngState::new(derive_stream(iter_seed, 0)))?;
        let mut opt =
            OptimizerState::new(&params, cfg.learning_rate, cfg.momentum, cfg.weight_decay)?;
        let mut tracker = FkLTracker::new(view.ids.clone(), cfg.k)?;
        let batch = cfg.batch_size.min(view.len());
        let mut train_curve = Vec::new();
        let mut test_curve = test_eval.as_ref().map(|_| Vec::new());
        let mut halt_reason = HaltReason::TMaxExhausted;
        let mut epochs_trained = cfg.t_max;

        for t in 1..=cfg.t_max {
            opt.learning_rate = epoch_learning_rate(cfg, t);
            let mut epoch_rng = RngState::new(derive_stream(iter_seed, t as u64));
            train_one_epoch(
                &network,
                &mut params,
                &mut opt,
                &view,
                &mut epoch_rng,
                batch,
            )
            .map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("iteration {i}, epoch {t}: {msg}")),
                other => other,
            })?;
            let (correct, losses, accuracy) = evaluate_on_view(&network, &params, &view)?;
            train_curve.push(accuracy);
            if let (Some(curve), Some((features, labels))) = (&mut test_curve, &test_eval) {
                curve.push(accuracy_against(&network, &params, features, labels)?);
            }
            if t > cfg.warmup_epochs {
                tracker.update_epoch(&correct, &losses)?;
                if inner_halt(tracker.learned_count(), previous_size, cfg.m_percent) {
                    halt_reason = HaltReason::Threshold;
                    epochs_trained = t;
                    on_event(RunEvent::EpochDone {
                        iteration: i,
                        epoch: t,
                        train_accuracy: accuracy,
                        learned_count: tracker.learned_count(),
                    });
                    break;
                }
            }
            on_event(RunEvent::EpochDone {
                iteration: i,
                epoch: t,
                train_accuracy: accuracy,
                learned_count: tracker.learned_count(),
            });
        }

        let (record, log) = tracker.into_parts();
        let fkl_set = record.learned_order();
        if fkl_set.is_empty() {
            return Err(Error::Run(format!(
                "iteration {i}: no example was predicted as its given label for {} consecutive \
                 epochs within {} epochs ({} warm-up); raise t_max, lower k, or adjust the trainer",
                cfg.k, cfg.t_max, cfg.warmup_epochs
            )));
        }

        let kept_now: HashSet<u64> = fkl_set.iter().copied().collect();
        for &id in &current_ids {
            if !kept_now.contains(&id) {
                removed.push((id, i));
            }
        }

        let size = fkl_set.len();
        on_event(RunEvent::IterationDone {
            iteration: i,
            size,
            epochs_trained,
            halt_reason,
        });
        iterations.push(IterationResult {
            iteration: i,
            fkl_set: fkl_set.clone(),
            size,
            epochs_trained,
            tracked_epochs: log.num_epochs() as u32,
            halt_reason,
            noise_rate: None,
            train_accuracy: train_curve,
            test_accuracy: test_curve,
            record,
            log,
        });

        final_params = Some(params);
        previous_size = size;
        current_ids = fkl_set;

        if outer_stop(
            i,
            cfg.m_percent,
            cfg.n_percent,
            cfg.outer_stop,
            cfg.noise_target_percent,
            cfg.strict_comparison,
        ) {
            break;
        }
    }

    let final_params = final_params.expect("i_max >= 1 guarantees at least one iteration");
    let retrained_params = if cfg.retrain_final {
        let kept_view = full_view.subset(&current_ids)?;
        let epochs = cfg.retrain_epochs.unwrap_or(cfg.t_max);
        let seed = derive_stream(cfg.master_seed, RETRAIN_STREAM);
        Some(train_classifier(cfg, &kept_view, epochs, seed)?.1)
    } else {
        None
    };

    Ok(RunResult {
        config: cfg.clone(),
        network,
        iterations,
        kept: current_ids,
        removed,
        final_params,
        retrained_params,
    })
}
