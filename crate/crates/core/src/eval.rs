//! Precision@k and micro-averaged recall, plus the end-to-end experiment.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{read_records, tokenize, Dataset, Record};
use crate::error::{Error, Result};
use crate::model::Hyperparameters;
use crate::predictor::{Ensemble, Prediction, DEFAULT_K_PRIME, DEFAULT_LEARNERS, DEFAULT_SUBSAMPLE};
use crate::trainer::TrainConfig;

/// `|top-k(predicted) ∩ gold| / k`; the denominator stays `k` when fewer
/// than `k` predictions exist.
pub fn precision_at_k(predicted: &[u32], gold: &[u32], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = predicted.iter().take(k).filter(|t| gold.contains(t)).count();
    hits as f64 / k as f64
}

/// `Σ_d |pred_d ∩ gold_d| / Σ_d |gold_d|`, or 0 when there is no gold tag.
pub fn overall_recall(predicted: &[Vec<u32>], gold: &[Vec<u32>]) -> f64 {
    let (hits, total) = predicted.iter().zip(gold).fold((0usize, 0usize), |(h, t), (p, g)| {
        (h + p.iter().filter(|x| g.contains(x)).count(), t + g.len())
    });
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    #[serde(rename = "precision")]
    pub precision_at: BTreeMap<usize, f64>,
    pub overall_recall: f64,
    pub n_test: usize,
    /// Fraction of gold tags present in the tag dictionary.
    pub tag_coverage: f64,
    #[serde(skip)]
    pub recall_k: usize,
}

impl MetricsReport {
    pub fn precision(&self, k: usize) -> f64 {
        self.precision_at.get(&k).copied().unwrap_or(0.0)
    }
}

/// Gold tag ids of `record`, and how many of its tags are unknown.
fn gold_ids(ensemble: &Ensemble, record: &Record) -> (Vec<u32>, usize) {
    let dict = &ensemble.learners[0].tagdict;
    let mut ids = Vec::new();
    let mut unknown = 0;
    for t in &record.tags {
        match dict.id(t) {
            Some(id) if !ids.contains(&id) => ids.push(id),
            Some(_) => {}
            None => unknown += 1,
        }
    }
    (ids, unknown)
}

/// Ranked predictions for every record; documents without any known word
/// get an empty prediction.
pub fn predict_records(ensemble: &Ensemble, records: &[Record], k: usize) -> Result<Vec<Prediction>> {
    records
        .par_iter()
        .map(|r| match ensemble.predict(&tokenize(&r.text), k) {
            Ok(p) => Ok(p),
            Err(Error::EmptyDocument) => Ok(Prediction::default()),
            Err(e) => Err(e),
        })
        .collect()
}

/// Scores ensemble predictions on `records` for `k = 1..=k_max`, with
/// overall recall at `recall_k`.
pub fn evaluate(ensemble: &Ensemble, records: &[Record], k_max: usize, recall_k: usize) -> Result<MetricsReport> {
    let predictions = predict_records(ensemble, records, k_max.max(recall_k))?;
    Ok(score(ensemble, records, &predictions, k_max, recall_k))
}

fn score(ensemble: &Ensemble, records: &[Record], predictions: &[Prediction], k_max: usize, recall_k: usize) -> MetricsReport {
    let n = records.len();
    let mut precision_at = BTreeMap::new();
    let golds: Vec<(Vec<u32>, usize)> = records.iter().map(|r| gold_ids(ensemble, r)).collect();
    let ranked: Vec<Vec<u32>> = predictions.iter().map(|p| p.tags().collect()).collect();
    for k in 1..=k_max {
        let sum: f64 = ranked.iter().zip(&golds).map(|(p, (g, _))| precision_at_k(p, g, k)).sum();
        precision_at.insert(k, if n == 0 { 0.0 } else { sum / n as f64 });
    }
    let top: Vec<Vec<u32>> = ranked.iter().map(|p| p.iter().take(recall_k).copied().collect()).collect();
    let known: usize = golds.iter().map(|(g, _)| g.len()).sum();
    let unknown: usize = golds.iter().map(|(_, u)| *u).sum();
    let hits_fraction = overall_recall(&top, &golds.iter().map(|(g, _)| g.clone()).collect::<Vec<_>>());
    let total = known + unknown;
    // Unknown gold tags stay in the denominator as unreachable misses.
    let overall_recall = if total == 0 { 0.0 } else { hits_fraction * known as f64 / total as f64 };
    MetricsReport {
        precision_at,
        overall_recall,
        n_test: n,
        tag_coverage: if total == 0 { 1.0 } else { known as f64 / total as f64 },
        recall_k,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub hyper: Hyperparameters,
    pub learners: usize,
    pub subsample: f64,
    pub k_prime: usize,
    pub k_max: usize,
    pub recall_k: usize,
    pub train: TrainConfig,
    /// Learner counts and `k'` values for the optional sweep table.
    pub sweep_learners: Vec<usize>,
    pub sweep_k_prime: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            hyper: Hyperparameters::default(),
            learners: DEFAULT_LEARNERS,
            subsample: DEFAULT_SUBSAMPLE,
            k_prime: DEFAULT_K_PRIME,
            k_max: 5,
            recall_k: 5,
            train: TrainConfig::default(),
            sweep_learners: Vec::new(),
            sweep_k_prime: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub learners: usize,
    pub k_prime: usize,
    pub precision: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub metrics: MetricsReport,
    pub sweep: Vec<SweepRow>,
    pub ensemble: Ensemble,
}

/// Trains an ensemble on `train`, predicts `test` and scores it. When a
/// sweep is requested, the ensemble is trained with the largest learner
/// count needed and its prefixes are scored for each `(b, k')` pair.
pub fn run_experiment_records(train: &[Record], test: &[Record], config: &ExperimentConfig) -> Result<ExperimentOutput> {
    if config.k_max == 0 || config.recall_k == 0 {
        return Err(Error::InvalidConfig("k_max and recall_k must be at least 1".into()));
    }
    let dataset = Dataset::from_records(train, config.hyper.min_count)?;
    let b_max = config.sweep_learners.iter().copied().chain([config.learners]).max().unwrap_or(config.learners);
    let full = Ensemble::train(&dataset, &config.hyper, b_max, config.subsample, config.k_prime, &config.train, |_, _| {})?;
    let ensemble = full.prefix(config.learners);
    let metrics = evaluate(&ensemble, test, config.k_max, config.recall_k)?;

    let mut sweep = Vec::new();
    let k_primes = if config.sweep_k_prime.is_empty() { vec![config.k_prime] } else { config.sweep_k_prime.clone() };
    for &b in &config.sweep_learners {
        for &kp in &k_primes {
            let mut sub = full.prefix(b);
            sub.k_prime = kp;
            let m = evaluate(&sub, test, config.k_max, config.recall_k)?;
            sweep.push(SweepRow { learners: b, k_prime: kp, precision: m.precision_at });
        }
    }
    Ok(ExperimentOutput { metrics, sweep, ensemble })
}

pub fn run_experiment(train_path: impl AsRef<Path>, test_path: impl AsRef<Path>, config: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_experiment_records(&read_records(train_path)?, &read_records(test_path)?, config)
}
