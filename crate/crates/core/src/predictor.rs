//! Tag prediction by exact cosine k-NN over tag embeddings, and bagged
//! ensembles of independently trained models.

use std::collections::BTreeMap;
use std::path::Path;

use num_traits::Float;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{Dataset, TaggedDocument};
use crate::error::{Error, Result};
use crate::format;
use crate::inference::infer_document;
use crate::math::{cosine, norm};
use crate::matrix::Matrix;
use crate::model::{Hyperparameters, Model};
use crate::trainer::{self, LossReport, TrainConfig};

pub const DEFAULT_LEARNERS: usize = 15;
pub const DEFAULT_SUBSAMPLE: f64 = 0.5;
pub const DEFAULT_K_PRIME: usize = 5;

/// Tags ordered by descending score, ties by ascending tag id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Prediction {
    pub entries: Vec<(u32, f64)>,
}

impl Prediction {
    /// Top `k` of `scores`; non-finite and `-inf` scores are never selected.
    pub fn top_k(scores: impl IntoIterator<Item = (u32, f64)>, k: usize) -> Self {
        let mut entries: Vec<(u32, f64)> = scores.into_iter().filter(|(_, s)| s.is_finite()).collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        entries.truncate(k);
        Prediction { entries }
    }

    pub fn tags(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|(t, _)| *t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn truncated(&self, k: usize) -> Self {
        Prediction { entries: self.entries[..k.min(self.entries.len())].to_vec() }
    }
}

/// Cosine similarity of `d` with every tag column; zero columns get `-inf`.
pub fn tag_similarities<F: Float>(d: &[F], tags: &Matrix<F>) -> Vec<f64> {
    (0..tags.cols())
        .map(|t| cosine(d, tags.col(t)).unwrap_or(f64::NEG_INFINITY))
        .collect()
}

/// The `k` tags whose embeddings are most cosine-similar to `d`.
pub fn predict_knn<F: Float>(d: &[F], tags: &Matrix<F>, k: usize) -> Result<Prediction> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if norm(d) == 0.0 {
        return Err(Error::ZeroVector);
    }
    let sims = tag_similarities(d, tags);
    Ok(Prediction::top_k(sims.into_iter().enumerate().map(|(t, s)| (t as u32, s)), k))
}

/// A single learner's view of a document: its `k'` nearest tags.
pub trait TagSelector {
    fn select(&self, tokens: &[String], k: usize) -> Result<Prediction>;
}

impl TagSelector for Model {
    fn select(&self, tokens: &[String], k: usize) -> Result<Prediction> {
        let d = infer_document(self, tokens)?;
        predict_knn(&d, &self.params.tags, k)
    }
}

/// Sums each tag's scores over the selections that contain it, in selection
/// order, and keeps the top `k`. Only selected tags are candidates.
pub fn aggregate(selections: &[Prediction], k: usize) -> Prediction {
    let mut totals: BTreeMap<u32, f64> = BTreeMap::new();
    for sel in selections {
        for &(tag, score) in &sel.entries {
            *totals.entry(tag).or_insert(0.0) += score;
        }
    }
    Prediction::top_k(totals, k)
}

/// Bagged prediction: each learner selects its top `k_prime` tags for the
/// document, then selections are combined by [`aggregate`]. Learners that
/// see no in-vocabulary token are skipped; if all do, the result is
/// [`Error::EmptyDocument`].
pub fn predict_bagged<L: TagSelector + Sync>(learners: &[L], tokens: &[String], k_prime: usize, k: usize) -> Result<Prediction> {
    if k == 0 || k_prime == 0 {
        return Err(Error::InvalidConfig("k and k' must be at least 1".into()));
    }
    let results: Vec<Result<Prediction>> = learners.par_iter().map(|l| l.select(tokens, k_prime)).collect();
    let mut selections = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(p) => selections.push(p),
            Err(Error::EmptyDocument) => {}
            Err(e) => return Err(e),
        }
    }
    if selections.is_empty() {
        return Err(Error::EmptyDocument);
    }
    Ok(aggregate(&selections, k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub learners: Vec<Model>,
    pub k_prime: usize,
}

/// Documents `ids` re-indexed to positions `0..ids.len()`.
fn subset(dataset: &Dataset, ids: &[usize]) -> Dataset {
    let documents = ids
        .iter()
        .enumerate()
        .map(|(pos, &i)| TaggedDocument { doc_id: pos, ..dataset.documents[i].clone() })
        .collect();
    Dataset {
        documents,
        vocabulary: dataset.vocabulary.clone(),
        tag_dictionary: dataset.tag_dictionary.clone(),
        ids: ids.iter().map(|&i| dataset.ids[i].clone()).collect(),
    }
}

/// Indices of the documents learner `j` trains on: a uniform sample without
/// replacement of `⌈fraction·n⌉` documents, in original order.
pub fn learner_sample(seed: u64, n: usize, fraction: f64) -> Vec<usize> {
    let size = ((fraction * n as f64).ceil() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut ids = index::sample(&mut rng, n, size).into_vec();
    ids.sort_unstable();
    ids
}

impl Ensemble {
    /// Trains `b` learners, learner `j` with seed `hyper.seed ^ j` on its own
    /// subsample. All learners share the dataset's vocabulary and tags.
    pub fn train(
        dataset: &Dataset,
        hyper: &Hyperparameters,
        b: usize,
        fraction: f64,
        k_prime: usize,
        config: &TrainConfig,
        on_report: impl Fn(usize, &LossReport) + Sync,
    ) -> Result<Self> {
        if b == 0 {
            return Err(Error::InvalidConfig("at least one learner is required".into()));
        }
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidConfig("subsample fraction must be in (0, 1]".into()));
        }
        if k_prime == 0 {
            return Err(Error::InvalidConfig("k' must be at least 1".into()));
        }
        hyper.validate()?;
        let learners = (0..b)
            .into_par_iter()
            .map(|j| {
                let seed = hyper.seed ^ j as u64;
                let part = subset(dataset, &learner_sample(seed, dataset.len(), fraction));
                let h = Hyperparameters { seed, ..hyper.clone() };
                let mut model = Model::new(dataset.vocabulary.clone(), dataset.tag_dictionary.clone(), part.len(), h)?;
                trainer::train_with_progress(&mut model, &part, config, |r| on_report(j, r))?;
                Ok(model)
            })
            .collect::<Result<Vec<Model>>>()?;
        Ensemble::new(learners, k_prime)
    }

    pub fn new(learners: Vec<Model>, k_prime: usize) -> Result<Self> {
        let first = learners.first().ok_or_else(|| Error::InvalidConfig("ensemble needs a learner".into()))?;
        let shape = (first.dim(), first.num_words(), first.num_tags());
        if learners.iter().any(|m| (m.dim(), m.num_words(), m.num_tags()) != shape) {
            return Err(Error::InvalidConfig("learners disagree on dimension, vocabulary or tag set".into()));
        }
        if k_prime == 0 {
            return Err(Error::InvalidConfig("k' must be at least 1".into()));
        }
        Ok(Ensemble { learners, k_prime })
    }

    pub fn len(&self) -> usize {
        self.learners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.learners.is_empty()
    }

    /// The ensemble formed by the first `b` learners.
    pub fn prefix(&self, b: usize) -> Ensemble {
        Ensemble { learners: self.learners[..b.min(self.len())].to_vec(), k_prime: self.k_prime }
    }

    pub fn predict(&self, tokens: &[String], k: usize) -> Result<Prediction> {
        predict_bagged(&self.learners, tokens, self.k_prime, k)
    }

    pub fn tag_name(&self, id: u32) -> Option<&str> {
        self.learners[0].tagdict.tag(id)
    }

    pub fn add_tags<S: AsRef<str> + Sync>(&mut self, tags: &[S]) -> Result<()> {
        // Validate on one learner first so a duplicate leaves all untouched.
        let mut probe = self.learners[0].tagdict.clone();
        let mut seen = std::collections::HashSet::new();
        for t in tags {
            if probe.id(t.as_ref()).is_some() || !seen.insert(t.as_ref()) {
                return Err(Error::DuplicateTag(t.as_ref().to_owned()));
            }
            probe.push(t.as_ref().to_owned());
        }
        for m in &mut self.learners {
            m.add_tags(tags)?;
        }
        Ok(())
    }

    pub fn add_words(&mut self, counts: &[(String, u64)]) -> Result<usize> {
        let mut added = 0;
        for m in &mut self.learners {
            added = m.add_words(counts)?;
        }
        Ok(added)
    }

    /// Feeds one chunk of new documents to every learner.
    pub fn train_incremental(&mut self, docs: &[TaggedDocument], config: &TrainConfig) -> Result<Vec<LossReport>> {
        self.learners
            .par_iter_mut()
            .map(|m| trainer::train_incremental(m, docs, config))
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        format::encode_ensemble(&self.learners, self.k_prime)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (learners, k_prime) = format::decode_ensemble(bytes)?;
        Ensemble::new(learners, k_prime).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ensemble::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::Rng;

    use super::*;

    #[test]
    fn knn_on_standard_basis() {
        let t = Matrix::from_columns(3, vec![1.0f64, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let p = predict_knn(&[1.0, 0.0, 0.0], &t, 1).unwrap();
        assert_eq!(p.entries, vec![(0, 1.0)]);
        assert!(matches!(predict_knn(&[0.0, 0.0, 0.0], &t, 1), Err(Error::ZeroVector)));
    }

    #[test]
    fn knn_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = Matrix::from_columns(4, (0..4 * 20).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>());
        let d: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d10: Vec<f64> = d.iter().map(|x| x * 10.0).collect();
        let a = predict_knn(&d, &t, 5).unwrap();
        let b = predict_knn(&d10, &t, 5).unwrap();
        assert_eq!(a.tags().collect::<Vec<_>>(), b.tags().collect::<Vec<_>>());
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert!((x.1 - y.1).abs() < 1e-12);
        }
    }

    #[test]
    fn knn_matches_brute_force_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let t = Matrix::from_columns(6, (0..6 * 50).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>());
            let d: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut all: Vec<(u32, f64)> = (0..50)
                .map(|c| {
                    let col = t.col(c);
                    let dotp: f64 = col.iter().zip(&d).map(|(a, b)| a * b).sum();
                    let n1: f64 = col.iter().map(|a| a * a).sum::<f64>().sqrt();
                    let n2: f64 = d.iter().map(|a| a * a).sum::<f64>().sqrt();
                    (c as u32, dotp / (n1 * n2))
                })
                .collect();
            all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            let p = predict_knn(&d, &t, 10).unwrap();
            for (got, want) in p.entries.iter().zip(&all[..10]) {
                assert_eq!(got.0, want.0);
                assert!((got.1 - want.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_columns_are_never_selected() {
        let t = Matrix::from_columns(2, vec![0.0f32, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let p = predict_knn(&[1.0f32, 1.0], &t, 3).unwrap();
        assert_eq!(p.tags().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn ties_break_by_tag_id() {
        let p = Prediction::top_k([(3, 0.5), (1, 0.5), (2, 0.9), (0, 0.5)], 3);
        assert_eq!(p.tags().collect::<Vec<_>>(), vec![2, 0, 1]);
    }

    #[test]
    fn aggregation_hand_example() {
        // learner 1: {A:0.9, B:0.5}; learner 2: {A:0.8, C:0.7}
        let (a, b, c) = (0, 1, 2);
        let sel = [
            Prediction { entries: vec![(a, 0.9), (b, 0.5)] },
            Prediction { entries: vec![(a, 0.8), (c, 0.7)] },
        ];
        let p = aggregate(&sel, 2);
        assert_eq!(p.tags().collect::<Vec<_>>(), vec![a, c]);
        assert!((p.entries[0].1 - 1.7).abs() < 1e-12);
        assert!((p.entries[1].1 - 0.7).abs() < 1e-12);
    }

    struct Fixed(Vec<f64>);

    impl TagSelector for Fixed {
        fn select(&self, _tokens: &[String], k: usize) -> Result<Prediction> {
            Ok(Prediction::top_k(self.0.iter().enumerate().map(|(t, &s)| (t as u32, s)), k))
        }
    }

    proptest! {
        #[test]
        fn aggregated_size_and_bound(
            tables in proptest::collection::vec(proptest::collection::vec(-4i32..=4, 8), 1..6),
            k_prime in 1usize..5,
            k in 1usize..10,
        ) {
            let learners: Vec<Fixed> = tables.iter().map(|t| Fixed(t.iter().map(|&x| x as f64 / 4.0).collect())).collect();
            let p = predict_bagged(&learners, &[], k_prime, k).unwrap();
            let mut union = std::collections::BTreeSet::new();
            for l in &learners {
                union.extend(l.select(&[], k_prime).unwrap().tags());
            }
            prop_assert_eq!(p.len(), k.min(union.len()));
            for &(_, s) in &p.entries {
                prop_assert!(s <= learners.len() as f64);
            }
        }
    }

    #[test]
    fn single_learner_bagging_is_truncated_knn() {
        let learner = Fixed(vec![0.1, 0.7, -0.2, 0.7, 0.3]);
        let p = predict_bagged(std::slice::from_ref(&learner), &[], 4, 2).unwrap();
        assert_eq!(p, learner.select(&[], 4).unwrap().truncated(2));
    }

    #[test]
    fn learner_samples_are_reproducible_and_distinct() {
        let a = learner_sample(7, 100, 0.5);
        assert_eq!(a.len(), 50);
        assert_eq!(a, learner_sample(7, 100, 0.5));
        assert_ne!(a, learner_sample(6, 100, 0.5));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(learner_sample(3, 9, 1.0), (0..9).collect::<Vec<_>>());
        assert_eq!(learner_sample(3, 9, 0.5).len(), 5);
    }
}
