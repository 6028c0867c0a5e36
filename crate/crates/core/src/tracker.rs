//! Per-example learning-dynamics tracking.
//!
//! After every tracked epoch the trainer reports, for each example, whether
//! the classifier currently predicts its given label and the example's
//! cross-entropy loss. The tracker maintains consecutive-correct run
//! lengths online and records, per example, the first epoch at which the
//! run length reached `k` — the epoch the example was first consistently
//! learned. Examples that never reach it stay unset and rank as
//! latest-learned.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Per-epoch, per-example correctness bits and losses, aligned with a
/// fixed id list. Epochs are contiguous from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionLog {
    pub ids: Vec<u64>,
    pub epochs: Vec<EpochRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub correct: Vec<bool>,
    pub loss: Vec<f64>,
}

impl PredictionLog {
    pub fn num_epochs(&self) -> usize {
        self.epochs.len()
    }
}

/// Current consecutive-correct run length per tracked example; resets to
/// zero on any incorrect epoch.
#[derive(Debug, Clone)]
pub struct RunCounters {
    pub run_length: Vec<u32>,
}

/// First-consistently-learned epoch per tracked example. Once set, a value
/// never changes; if set it is always >= k.
#[derive(Debug, Clone, PartialEq)]
pub struct FkLRecord {
    pub k: u32,
    pub ids: Vec<u64>,
    pub first_learned: Vec<Option<u32>>,
}

impl FkLRecord {
    pub fn count_set(&self) -> usize {
        self.first_learned.iter().filter(|f| f.is_some()).count()
    }

    /// Ids with a set value, ascending by (epoch, id) — the curriculum
    /// order used to build the next training set.
    pub fn learned_order(&self) -> Vec<u64> {
        let mut learned: Vec<(u32, u64)> = self
            .ids
            .iter()
            .zip(&self.first_learned)
            .filter_map(|(&id, f)| f.map(|e| (e, id)))
            .collect();
        learned.sort_unstable();
        learned.into_iter().map(|(_, id)| id).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankCriterion {
    Fkl,
    Loss,
}

/// A total order over the tracked ids under one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub criterion: RankCriterion,
    pub ids: Vec<u64>,
}

impl Ranking {
    /// Rank position of every id (0 = first / most confidently clean).
    pub fn positions(&self) -> HashMap<u64, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Online tracker over a fixed id population.
#[derive(Debug, Clone)]
pub struct FkLTracker {
    counters: RunCounters,
    record: FkLRecord,
    log: PredictionLog,
}

impl FkLTracker {
    pub fn new(ids: Vec<u64>, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let n = ids.len();
        Ok(FkLTracker {
            counters: RunCounters {
                run_length: vec![0; n],
            },
            record: FkLRecord {
                k,
                ids: ids.clone(),
                first_learned: vec![None; n],
            },
            log: PredictionLog {
                ids,
                epochs: Vec::new(),
            },
        })
    }

    pub fn ids(&self) -> &[u64] {
        &self.log.ids
    }

    pub fn record(&self) -> &FkLRecord {
        &self.record
    }

    pub fn log(&self) -> &PredictionLog {
        &self.log
    }

    pub fn into_parts(self) -> (FkLRecord, PredictionLog) {
        (self.record, self.log)
    }

    /// Number of examples whose first-learned epoch is set.
    pub fn learned_count(&self) -> usize {
        self.record.count_set()
    }

    /// Feeds the next epoch's predictions (aligned with `ids()`), advances
    /// the run counters, and returns the ids that reached k consecutive
    /// correct epochs for the first time this epoch, ascending.
    pub fn update_epoch(&mut self, correct: &[bool], loss: &[f64]) -> Result<Vec<u64>> {
        let n = self.log.ids.len();
        if correct.len() != n || loss.len() != n {
            return Err(Error::Internal(format!(
                "epoch predictions cover {} / {} examples, tracker has {n}",
                correct.len(),
                loss.len()
            )));
        }
        let epoch = self.log.epochs.len() as u32 + 1;
        let mut newly = Vec::new();
        for (i, &hit) in correct.iter().enumerate() {
            if hit {
                self.counters.run_length[i] += 1;
                if self.counters.run_length[i] == self.record.k
                    && self.record.first_learned[i].is_none()
                {
                    self.record.first_learned[i] = Some(epoch);
                    newly.push(self.log.ids[i]);
                }
            } else {
                self.counters.run_length[i] = 0;
            }
        }
        self.log.epochs.push(EpochRow {
            correct: correct.to_vec(),
            loss: loss.to_vec(),
        });
        newly.sort_unstable();
        Ok(newly)
    }
}

/// Ranks ids ascending by first-learned epoch. Unset values sort after
/// every set value (latest learned = most suspect); ties break by id.
pub fn rank_by_fkl(record: &FkLRecord) -> Ranking {
    let mut keyed: Vec<(u32, u64)> = record
        .ids
        .iter()
        .zip(&record.first_learned)
        .map(|(&id, f)| (f.unwrap_or(u32::MAX), id))
        .collect();
    keyed.sort_unstable();
    Ranking {
        criterion: RankCriterion::Fkl,
        ids: keyed.into_iter().map(|(_, id)| id).collect(),
    }
}

/// Ranks ids ascending by mean loss over the final `window` epochs; ties
/// break by id.
pub fn rank_by_loss(log: &PredictionLog, window: usize) -> Result<Ranking> {
    if window == 0 {
        return Err(Error::Config(
            "loss ranking window must be at least 1".into(),
        ));
    }
    if log.num_epochs() < window {
        return Err(Error::Config(format!(
            "loss ranking window {window} exceeds the {} logged epochs",
            log.num_epochs()
        )));
    }
    let tail = &log.epochs[log.num_epochs() - window..];
    let mut keyed: Vec<(f64, u64)> = log
        .ids
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            let mean = tail.iter().map(|row| row.loss[i]).sum::<f64>() / window as f64;
            (mean, id)
        })
        .collect();
    keyed.sort_by(|a, b| a.partial_cmp(b).expect("losses are finite"));
    Ok(Ranking {
        criterion: RankCriterion::Loss,
        ids: keyed.into_iter().map(|(_, id)| id).collect(),
    })
}

/// Ids occupying rank positions [lo, hi).
pub fn slice_precision_inputs(ranking: &Ranking, lo: usize, hi: usize) -> Result<Vec<u64>> {
    if lo >= hi || hi > ranking.len() {
        return Err(Error::Input(format!(
            "rank range [{lo}, {hi}) invalid for {} ranked ids",
            ranking.len()
        )));
    }
    Ok(ranking.ids[lo..hi].to_vec())
}
