//! Read-only measurement of finished runs: label precision by rank range,
//! clean-example retention, per-iteration noise-rate curves, rank-shift
//! analysis of falsely retained examples, test accuracy, and the
//! iteration-rate sweep. Everything here may read ground-truth labels;
//! nothing here feeds back into selection.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::engine::{self, LateStopConfig, RunResult};
use crate::error::{Error, Result};
use crate::nn::{forward, predict, NetworkSpec, Parameters};
use crate::tracker::{rank_by_fkl, rank_by_loss, RankCriterion, Ranking};

/// Which side of a ranking a precision query scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionMode {
    /// Head slices [0, hi): how many of the earliest-ranked are truly clean.
    CleanHead,
    /// Tail slices [lo, N): how many of the latest-ranked are truly mislabeled.
    MislabeledTail,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrecisionRow {
    /// Rank positions scored, as finally applied (head ranges start at 0,
    /// tail ranges end at N).
    pub lo: usize,
    pub hi: usize,
    pub matching: usize,
    pub precision: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrecisionTable {
    pub criterion: RankCriterion,
    pub mode: PrecisionMode,
    pub rows: Vec<PrecisionRow>,
}

/// Is each id truly clean? Input error for ids the dataset does not hold.
fn clean_flags(ranking: &Ranking, ds: &Dataset) -> Result<Vec<bool>> {
    let clean = ds.clean_labels.as_ref().ok_or_else(|| {
        Error::Eval("label precision needs ground-truth labels, dataset has none".into())
    })?;
    let index = ds.id_index();
    ranking
        .ids
        .iter()
        .map(|id| {
            let &row = index
                .get(id)
                .ok_or_else(|| Error::Input(format!("ranked id {id} not in dataset")))?;
            Ok(ds.given_labels[row] == clean[row])
        })
        .collect()
}

/// Scores rank ranges against ground truth. In head mode each range
/// `(lo, hi)` is widened to `[0, hi)`; in tail mode to `[lo, N)` — the
/// shapes used for selecting clean and mislabeled examples respectively.
pub fn label_precision(
    ranking: &Ranking,
    ds: &Dataset,
    ranges: &[(usize, usize)],
    mode: PrecisionMode,
) -> Result<PrecisionTable> {
    let flags = clean_flags(ranking, ds)?;
    let n = flags.len();
    let mut rows = Vec::with_capacity(ranges.len());
    for &(lo, hi) in ranges {
        let (lo, hi) = match mode {
            PrecisionMode::CleanHead => (0, hi),
            PrecisionMode::MislabeledTail => (lo, n),
        };
        if lo >= hi || hi > n {
            return Err(Error::Input(format!(
                "rank range [{lo}, {hi}) invalid for {n} ranked ids"
            )));
        }
        let matching = flags[lo..hi]
            .iter()
            .filter(|&&clean| match mode {
                PrecisionMode::CleanHead => clean,
                PrecisionMode::MislabeledTail => !clean,
            })
            .count();
        rows.push(PrecisionRow {
            lo,
            hi,
            matching,
            precision: matching as f64 / (hi - lo) as f64,
        });
    }
    Ok(PrecisionTable {
        criterion: ranking.criterion,
        mode,
        rows,
    })
}

/// Decile grid over `n` ranked positions (the desk-scale default).
pub fn decile_ranges(n: usize) -> Vec<(usize, usize)> {
    (0..10)
        .map(|d| (n * d / 10, n * (d + 1) / 10))
        .filter(|(lo, hi)| hi > lo)
        .collect()
}

/// A list of `[lo, hi)` rank ranges.
pub type RangeList = Vec<(usize, usize)>;

/// The absolute rank cuts used with 45,000 ranked examples: head ranges
/// for clean selection, tail ranges for mislabeled selection.
pub fn reference_ranges_45k() -> (RangeList, RangeList) {
    (
        vec![(0, 10_000), (0, 15_000), (0, 25_000)],
        vec![(30_000, 45_000), (35_000, 45_000), (40_000, 45_000)],
    )
}

/// Clean/mislabeled inventory of a finished run's kept set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub total_clean_in_original: usize,
    pub clean_kept: usize,
    pub mislabeled_kept: usize,
    pub clean_removed: usize,
}

pub fn retention(run: &RunResult, original: &Dataset) -> Result<RetentionReport> {
    let clean = original.clean_labels.as_ref().ok_or_else(|| {
        Error::Eval("retention needs ground-truth labels, dataset has none".into())
    })?;
    let kept: HashSet<u64> = run.kept.iter().copied().collect();
    let mut total_clean = 0usize;
    let mut clean_kept = 0usize;
    let mut mislabeled_kept = 0usize;
    for (row, &id) in original.ids.iter().enumerate() {
        let is_clean = original.given_labels[row] == clean[row];
        if is_clean {
            total_clean += 1;
        }
        if kept.contains(&id) {
            if is_clean {
                clean_kept += 1;
            } else {
                mislabeled_kept += 1;
            }
        }
    }
    Ok(RetentionReport {
        total_clean_in_original: total_clean,
        clean_kept,
        mislabeled_kept,
        clean_removed: total_clean - clean_kept,
    })
}

/// Ground-truth noise rate of each iteration's training set, in iteration
/// order. The first value equals the realized injection rate of the run's
/// input set.
pub fn noise_curve(run: &RunResult, original: &Dataset) -> Result<Vec<f64>> {
    run.iterations
        .iter()
        .map(|it| original.subset(&it.log.ids)?.noise_rate())
        .collect()
}

/// Fills each iteration's `noise_rate` field from ground truth. Run after
/// the run completes; selection never reads these.
pub fn annotate_noise_rates(run: &mut RunResult, original: &Dataset) -> Result<()> {
    let rates = noise_curve(run, original)?;
    for (it, rate) in run.iterations.iter_mut().zip(rates) {
        it.noise_rate = Some(rate);
    }
    Ok(())
}

/// Kept examples whose given label disagrees with ground truth, ascending
/// by id — the operational definition of "falsely retained".
pub fn falsely_retained_ids(run: &RunResult, original: &Dataset) -> Result<Vec<u64>> {
    let clean = original
        .clean_labels
        .as_ref()
        .ok_or_else(|| Error::Eval("falsely-retained analysis needs ground-truth labels".into()))?;
    let index = original.id_index();
    let mut out: Vec<u64> = run
        .kept
        .iter()
        .filter_map(|&id| {
            let &row = index.get(&id)?;
            (original.given_labels[row] != clean[row]).then_some(id)
        })
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Ranking of one iteration under the first-learned-epoch criterion.
/// Iteration 1 ranks the full training population.
pub fn fkl_ranking(run: &RunResult, iteration: u32) -> Result<Ranking> {
    let it = run
        .iterations
        .get(
            iteration
                .checked_sub(1)
                .ok_or_else(|| Error::Input("iterations are numbered from 1".into()))?
                as usize,
        )
        .ok_or_else(|| {
            Error::Input(format!(
                "iteration {iteration} not in run ({} iterations)",
                run.iterations.len()
            ))
        })?;
    Ok(rank_by_fkl(&it.record))
}

/// Ranking of one iteration by trailing mean loss at the halt epoch.
pub fn loss_ranking(run: &RunResult, iteration: u32) -> Result<Ranking> {
    let it = run
        .iterations
        .get(
            iteration
                .checked_sub(1)
                .ok_or_else(|| Error::Input("iterations are numbered from 1".into()))?
                as usize,
        )
        .ok_or_else(|| {
            Error::Input(format!(
                "iteration {iteration} not in run ({} iterations)",
                run.iterations.len()
            ))
        })?;
    let window = run.config.loss_window(it.log.num_epochs());
    rank_by_loss(&it.log, window)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankShiftRow {
    pub id: u64,
    pub fkl_rank_before: usize,
    pub fkl_rank_after: usize,
    pub loss_rank_before: usize,
    pub loss_rank_after: usize,
}

/// Average-rank comparison of a fixed id set between a run on the noisy
/// data and a run on the same data with those labels corrected.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankShiftReport {
    pub rows: Vec<RankShiftRow>,
    pub avg_fkl_rank_before: Option<f64>,
    pub avg_fkl_rank_after: Option<f64>,
    pub avg_loss_rank_before: Option<f64>,
    pub avg_loss_rank_after: Option<f64>,
    pub fkl_change_percent: Option<f64>,
    pub loss_change_percent: Option<f64>,
}

fn rank_of(positions: &HashMap<u64, usize>, id: u64) -> Result<usize> {
    positions
        .get(&id)
        .copied()
        .ok_or_else(|| Error::Input(format!("id {id} is not ranked in both runs")))
}

/// Compares the average rank of `ids` (under both criteria, over each
/// run's first-iteration population) before and after fixing their labels.
pub fn rank_shift(
    run_before: &RunResult,
    run_after: &RunResult,
    ids: &[u64],
) -> Result<RankShiftReport> {
    let fkl_before = fkl_ranking(run_before, 1)?.positions();
    let fkl_after = fkl_ranking(run_after, 1)?.positions();
    let loss_before = loss_ranking(run_before, 1)?.positions();
    let loss_after = loss_ranking(run_after, 1)?.positions();

    let mut rows = Vec::with_capacity(ids.len());
    for &id in ids {
        rows.push(RankShiftRow {
            id,
            fkl_rank_before: rank_of(&fkl_before, id)?,
            fkl_rank_after: rank_of(&fkl_after, id)?,
            loss_rank_before: rank_of(&loss_before, id)?,
            loss_rank_after: rank_of(&loss_after, id)?,
        });
    }

    let mean = |extract: fn(&RankShiftRow) -> usize| -> Option<f64> {
        (!rows.is_empty())
            .then(|| rows.iter().map(|r| extract(r) as f64).sum::<f64>() / rows.len() as f64)
    };
    let avg_fkl_before = mean(|r| r.fkl_rank_before);
    let avg_fkl_after = mean(|r| r.fkl_rank_after);
    let avg_loss_before = mean(|r| r.loss_rank_before);
    let avg_loss_after = mean(|r| r.loss_rank_after);
    let change = |before: Option<f64>, after: Option<f64>| -> Option<f64> {
        match (before, after) {
            (Some(b), Some(a)) if b > 0.0 => Some((a - b) / b * 100.0),
            _ => None,
        }
    };
    Ok(RankShiftReport {
        rows,
        avg_fkl_rank_before: avg_fkl_before,
        avg_fkl_rank_after: avg_fkl_after,
        avg_loss_rank_before: avg_loss_before,
        avg_loss_rank_after: avg_loss_after,
        fkl_change_percent: change(avg_fkl_before, avg_fkl_after),
        loss_change_percent: change(avg_loss_before, avg_loss_after),
    })
}

/// Fraction of test examples the classifier gets right. Ground-truth
/// labels are used when present, otherwise the given labels.
pub fn test_accuracy(network: &NetworkSpec, params: &Parameters, test: &Dataset) -> Result<f64> {
    let labels = test.clean_labels.as_ref().unwrap_or(&test.given_labels);
    let logits = forward(network, params, &test.features)?;
    let preds = predict(&logits);
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(if labels.is_empty() {
        0.0
    } else {
        hits as f64 / labels.len() as f64
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub master_seed: u64,
    pub iterations: usize,
    pub kept: usize,
    pub final_noise_rate: Option<f64>,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub m_percent: f64,
    pub cells: Vec<SweepCell>,
    pub mean_noise_rate: Option<f64>,
    pub mean_test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

fn mean_of(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Runs the full pipeline (holdout split + iterative cleaning) once per
/// (m, seed) pair. The seed list is identical across m values, so rows are
/// directly comparable. Test accuracy is measured on the retrained
/// classifier when the config retrains, otherwise on the last iteration's.
pub fn m_sweep(
    base: &LateStopConfig,
    m_values: &[f64],
    num_seeds: u32,
    data: &Dataset,
    test: Option<&Dataset>,
) -> Result<SweepTable> {
    if m_values.is_empty() {
        return Err(Error::Config("sweep needs at least one m value".into()));
    }
    if num_seeds == 0 {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    let mut rows = Vec::with_capacity(m_values.len());
    for &m in m_values {
        let mut cells = Vec::with_capacity(num_seeds as usize);
        for s in 0..num_seeds as u64 {
            let mut cfg = base.clone();
            cfg.m_percent = m;
            cfg.master_seed = base.master_seed.wrapping_add(s);
            cfg.validate()?;
            let (train, _holdout) = engine::split_for_run(&cfg, data)?;
            let result = engine::run(&cfg, &train, None)?;
            let final_noise_rate = if train.clean_labels.is_some() {
                Some(train.subset(&result.kept)?.noise_rate()?)
            } else {
                None
            };
            let accuracy = match test {
                Some(t) => {
                    let params = result
                        .retrained_params
                        .as_ref()
                        .unwrap_or(&result.final_params);
                    Some(test_accuracy(&result.network, params, t)?)
                }
                None => None,
            };
            cells.push(SweepCell {
                master_seed: cfg.master_seed,
                iterations: result.iterations.len(),
                kept: result.kept.len(),
                final_noise_rate,
                test_accuracy: accuracy,
            });
        }
        let noise: Vec<f64> = cells.iter().filter_map(|c| c.final_noise_rate).collect();
        let acc: Vec<f64> = cells.iter().filter_map(|c| c.test_accuracy).collect();
        rows.push(SweepRow {
            m_percent: m,
            cells,
            mean_noise_rate: mean_of(&noise),
            mean_test_accuracy: mean_of(&acc),
        });
    }
    Ok(SweepTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, ClusterLayout, ClusterSpec, SyntheticSpec};
    use crate::nn::init_parameters;
    use crate::noise::{inject_symmetric, NoiseSpec};
    use crate::rng::RngState;

    fn blobs(per_class: usize, separation: f64, spread: f64, seed: u64) -> Dataset {
        generate_synthetic(&SyntheticSpec {
            num_classes: 2,
            examples_per_class: per_class,
            feature_dim: 2,
            layout: ClusterLayout::Explicit(vec![
                vec![ClusterSpec {
                    weight: 1.0,
                    mean: vec![-separation, 0.0],
                    spread,
                }],
                vec![ClusterSpec {
                    weight: 1.0,
                    mean: vec![separation, 0.0],
                    spread,
                }],
            ]),
            seed,
        })
        .unwrap()
    }

    fn fast_config(m: f64, n: f64, seed: u64) -> LateStopConfig {
        let mut cfg = LateStopConfig::new(m, n, seed);
        cfg.hidden_widths = vec![8];
        cfg.t_max = 40;
        cfg.warmup_epochs = 2;
        cfg.batch_size = 32;
        cfg
    }

    /// Dataset with known clean/mislabeled ids plus an oracle ranking that
    /// puts every clean example first.
    fn labeled_fixture(n: usize, noise: f64, seed: u64) -> (Dataset, Ranking) {
        let ds = blobs(n / 2, 3.0, 1.0, seed);
        let (noisy, _) = inject_symmetric(&ds, &NoiseSpec::symmetric(noise, seed + 1)).unwrap();
        let clean = noisy.clean_labels.as_ref().unwrap();
        let mut ids: Vec<u64> = noisy
            .ids
            .iter()
            .enumerate()
            .filter(|&(row, _)| noisy.given_labels[row] == clean[row])
            .map(|(_, &id)| id)
            .collect();
        ids.extend(
            noisy
                .ids
                .iter()
                .enumerate()
                .filter(|&(row, _)| noisy.given_labels[row] != clean[row])
                .map(|(_, &id)| id),
        );
        (
            noisy,
            Ranking {
                criterion: RankCriterion::Fkl,
                ids,
            },
        )
    }

    #[test]
    fn oracle_ranking_scores_perfectly() {
        let (ds, oracle) = labeled_fixture(200, 0.3, 1);
        let n = oracle.len();
        let table = label_precision(
            &oracle,
            &ds,
            &[(0, n / 4), (0, n / 2)],
            PrecisionMode::CleanHead,
        )
        .unwrap();
        for row in &table.rows {
            assert_eq!(row.precision, 1.0, "range [{}, {})", row.lo, row.hi);
        }
        let table = label_precision(
            &oracle,
            &ds,
            &[(n - n / 5, n)],
            PrecisionMode::MislabeledTail,
        )
        .unwrap();
        assert_eq!(table.rows[0].precision, 1.0);
    }

    #[test]
    fn random_ranking_matches_hypergeometric_expectation() {
        let (ds, _) = labeled_fixture(1000, 0.4, 2);
        let clean = ds.clean_labels.as_ref().unwrap();
        let k_clean = ds
            .given_labels
            .iter()
            .zip(clean)
            .filter(|(g, c)| g == c)
            .count();
        let mut ids = ds.ids.clone();
        RngState::new(99).shuffle(&mut ids);
        let ranking = Ranking {
            criterion: RankCriterion::Loss,
            ids,
        };
        let n = ranking.len();
        let h = 300;
        let table = label_precision(&ranking, &ds, &[(0, h)], PrecisionMode::CleanHead).unwrap();
        let p = k_clean as f64 / n as f64;
        let sd_count = (h as f64 * p * (1.0 - p) * (n - h) as f64 / (n - 1) as f64).sqrt();
        let bound = 3.0 * sd_count / h as f64;
        assert!(
            (table.rows[0].precision - p).abs() <= bound,
            "precision {} vs clean fraction {p} (3-sigma {bound})",
            table.rows[0].precision
        );
    }

    #[test]
    fn full_range_precision_equals_global_fractions() {
        let (ds, oracle) = labeled_fixture(400, 0.35, 3);
        let n = oracle.len();
        let clean_frac = 1.0 - ds.noise_rate().unwrap();
        let head = label_precision(&oracle, &ds, &[(0, n)], PrecisionMode::CleanHead).unwrap();
        assert!((head.rows[0].precision - clean_frac).abs() < 1e-12);
        let tail = label_precision(&oracle, &ds, &[(0, n)], PrecisionMode::MislabeledTail).unwrap();
        assert!((tail.rows[0].precision - (1.0 - clean_frac)).abs() < 1e-12);
    }

    #[test]
    fn precision_rejects_bad_ranges_and_missing_truth() {
        let (ds, oracle) = labeled_fixture(100, 0.2, 4);
        assert!(label_precision(&oracle, &ds, &[(0, 101)], PrecisionMode::CleanHead).is_err());
        let mut no_truth = ds.clone();
        no_truth.clean_labels = None;
        assert!(matches!(
            label_precision(&oracle, &no_truth, &[(0, 10)], PrecisionMode::CleanHead),
            Err(Error::Eval(_))
        ));
    }

    #[test]
    fn decile_grid_partitions() {
        let ranges = decile_ranges(45);
        assert_eq!(ranges.len(), 10);
        assert_eq!(ranges[0].0, 0);
        assert_eq!(ranges[9].1, 45);
        for w in ranges.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
    }

    #[test]
    fn retention_counts_are_consistent() {
        let ds = blobs(60, 3.0, 1.1, 5);
        let (noisy, _) = inject_symmetric(&ds, &NoiseSpec::symmetric(0.3, 6)).unwrap();
        let cfg = fast_config(15.0, 30.0, 7);
        let result = engine::run(&cfg, &noisy, None).unwrap();
        let report = retention(&result, &noisy).unwrap();

        // Independent recount straight from the kept list.
        let kept: HashSet<u64> = result.kept.iter().copied().collect();
        let clean = noisy.clean_labels.as_ref().unwrap();
        let mut clean_kept = 0;
        let mut mislabeled_kept = 0;
        for (row, id) in noisy.ids.iter().enumerate() {
            if kept.contains(id) {
                if noisy.given_labels[row] == clean[row] {
                    clean_kept += 1;
                } else {
                    mislabeled_kept += 1;
                }
            }
        }
        assert_eq!(report.clean_kept, clean_kept);
        assert_eq!(report.mislabeled_kept, mislabeled_kept);
        assert_eq!(
            report.clean_kept + report.clean_removed,
            report.total_clean_in_original
        );
        assert_eq!(
            report.clean_kept + report.mislabeled_kept,
            result.kept.len()
        );
    }

    #[test]
    fn retention_trivial_cases() {
        // Nothing removed: run a clean separable set with a huge m so one
        // iteration keeps (almost) everything; if all examples learn
        // simultaneously nothing is removed at all.
        let ds = blobs(30, 6.0, 0.4, 8);
        let mut cfg = fast_config(99.0, 1.0, 9);
        cfg.k = 1;
        let result = engine::run(&cfg, &ds, None).unwrap();
        let report = retention(&result, &ds).unwrap();
        assert_eq!(report.total_clean_in_original, 60);
        assert_eq!(report.mislabeled_kept, 0);
        assert_eq!(report.clean_kept, result.kept.len());
    }

    #[test]
    fn noise_curve_starts_at_realized_rate_and_is_zero_on_clean_data() {
        let ds = blobs(80, 3.0, 1.0, 10);
        let (noisy, report) = inject_symmetric(&ds, &NoiseSpec::symmetric(0.3, 11)).unwrap();
        let cfg = fast_config(20.0, 40.0, 12);
        let mut result = engine::run(&cfg, &noisy, None).unwrap();
        let curve = noise_curve(&result, &noisy).unwrap();
        assert_eq!(curve.len(), result.iterations.len());
        assert_eq!(curve[0], report.realized_rate);
        annotate_noise_rates(&mut result, &noisy).unwrap();
        assert_eq!(result.iterations[0].noise_rate, Some(report.realized_rate));

        let clean_result = engine::run(&cfg, &ds, None).unwrap();
        for rate in noise_curve(&clean_result, &ds).unwrap() {
            assert_eq!(rate, 0.0);
        }
    }

    #[test]
    fn rank_shift_empty_and_identical_cases() {
        let ds = blobs(40, 3.0, 1.0, 13);
        let (noisy, _) = inject_symmetric(&ds, &NoiseSpec::symmetric(0.25, 14)).unwrap();
        let cfg = fast_config(25.0, 25.0, 15);
        let result = engine::run(&cfg, &noisy, None).unwrap();

        let empty = rank_shift(&result, &result, &[]).unwrap();
        assert!(empty.rows.is_empty());
        assert!(empty.avg_fkl_rank_before.is_none());

        let ids = falsely_retained_ids(&result, &noisy).unwrap();
        let same = rank_shift(&result, &result, &ids).unwrap();
        if !ids.is_empty() {
            assert_eq!(same.fkl_change_percent, Some(0.0));
            assert_eq!(same.loss_change_percent, Some(0.0));
        }

        assert!(rank_shift(&result, &result, &[u64::MAX]).is_err());
    }

    #[test]
    fn constant_predictor_accuracy_is_one_over_c() {
        let ds = blobs(50, 3.0, 1.0, 16); // balanced two-class set
        let cfg = fast_config(10.0, 10.0, 17);
        let network = cfg.network_for(ds.feature_dim(), ds.num_classes).unwrap();
        let params =
            Parameters::zeros_like(&init_parameters(&network, &mut RngState::new(0)).unwrap());
        // All-zero logits predict class 0 everywhere.
        let acc = test_accuracy(&network, &params, &ds).unwrap();
        assert_eq!(acc, 0.5);
    }

    #[test]
    fn memorized_training_set_scores_perfectly() {
        let ds = blobs(20, 6.0, 0.4, 18);
        let cfg = fast_config(10.0, 10.0, 19);
        let (network, params) = engine::train_classifier(&cfg, &ds.train_view(), 60, 123).unwrap();
        let acc = test_accuracy(&network, &params, &ds).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn accuracy_agrees_with_confusion_matrix_trace() {
        let ds = blobs(40, 2.0, 1.5, 20);
        let cfg = fast_config(10.0, 10.0, 21);
        let network = cfg.network_for(ds.feature_dim(), ds.num_classes).unwrap();
        let params = init_parameters(&network, &mut RngState::new(5)).unwrap();
        let acc = test_accuracy(&network, &params, &ds).unwrap();

        let logits = forward(&network, &params, &ds.features).unwrap();
        let preds = predict(&logits);
        let labels = ds.clean_labels.as_ref().unwrap();
        let mut confusion = [[0usize; 2]; 2];
        for (p, &l) in preds.iter().zip(labels) {
            confusion[l][*p] += 1;
        }
        let trace = confusion[0][0] + confusion[1][1];
        assert_eq!(acc, trace as f64 / ds.len() as f64);
    }

    #[test]
    fn singleton_sweep_equals_direct_run() {
        let ds = blobs(60, 3.0, 1.1, 22);
        let (noisy, _) = inject_symmetric(&ds, &NoiseSpec::symmetric(0.2, 23)).unwrap();
        let cfg = fast_config(20.0, 30.0, 24);
        let table = m_sweep(&cfg, &[20.0], 1, &noisy, None).unwrap();
        assert_eq!(table.rows.len(), 1);
        let cell = &table.rows[0].cells[0];
        assert_eq!(cell.master_seed, cfg.master_seed);

        let (train, _) = engine::split_for_run(&cfg, &noisy).unwrap();
        let direct = engine::run(&cfg, &train, None).unwrap();
        assert_eq!(cell.kept, direct.kept.len());
        assert_eq!(cell.iterations, direct.iterations.len());
        assert_eq!(
            cell.final_noise_rate,
            Some(train.subset(&direct.kept).unwrap().noise_rate().unwrap())
        );
    }

    #[test]
    fn sweep_rows_are_reproducible_per_seed() {
        let ds = blobs(40, 3.0, 1.0, 25);
        let (noisy, _) = inject_symmetric(&ds, &NoiseSpec::symmetric(0.2, 26)).unwrap();
        let cfg = fast_config(25.0, 25.0, 27);
        let a = m_sweep(&cfg, &[25.0, 50.0], 2, &noisy, None).unwrap();
        let b = m_sweep(&cfg, &[25.0, 50.0], 2, &noisy, None).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            for (ca, cb) in ra.cells.iter().zip(&rb.cells) {
                assert_eq!(ca.kept, cb.kept);
                assert_eq!(ca.final_noise_rate, cb.final_noise_rate);
            }
        }
        // Identical seed lists across m rows.
        let seeds_a: Vec<u64> = a.rows[0].cells.iter().map(|c| c.master_seed).collect();
        let seeds_b: Vec<u64> = a.rows[1].cells.iter().map(|c| c.master_seed).collect();
        assert_eq!(seeds_a, seeds_b);
    }
}
