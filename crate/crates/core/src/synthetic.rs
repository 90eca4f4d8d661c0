//! Planted-cluster corpus: every cluster has its own disjoint vocabulary and
//! one tag, so each document's tag is recoverable from its words alone.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Record;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedClusters {
    pub clusters: usize,
    /// Index of the first cluster; lets a later corpus add clusters whose
    /// words and tags do not collide with an earlier one.
    pub first_cluster: usize,
    pub words_per_cluster: usize,
    pub train_per_cluster: usize,
    pub test_per_cluster: usize,
    pub doc_len: usize,
    /// Fraction of training documents whose tag is replaced by a different
    /// cluster's tag.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for PlantedClusters {
    fn default() -> Self {
        PlantedClusters {
            clusters: 5,
            first_cluster: 0,
            words_per_cluster: 50,
            train_per_cluster: 200,
            test_per_cluster: 50,
            doc_len: 30,
            label_noise: 0.0,
            seed: 42,
        }
    }
}

pub fn cluster_tag(cluster: usize) -> String {
    format!("topic{cluster}")
}

pub fn cluster_word(cluster: usize, i: usize) -> String {
    format!("c{cluster}w{i}")
}

impl PlantedClusters {
    /// Returns `(train, test)` records, each shuffled.
    pub fn generate(&self) -> (Vec<Record>, Vec<Record>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let make = |split: &str, per_cluster: usize, rng: &mut ChaCha8Rng| {
            let mut docs = Vec::with_capacity(per_cluster * self.clusters);
            for g in self.first_cluster..self.first_cluster + self.clusters {
                for n in 0..per_cluster {
                    let words: Vec<String> = (0..self.doc_len)
                        .map(|_| cluster_word(g, rng.gen_range(0..self.words_per_cluster)))
                        .collect();
                    docs.push(Record { id: format!("{split}-{g}-{n}"), text: words.join(" "), tags: vec![cluster_tag(g)] });
                }
            }
            docs.shuffle(rng);
            docs
        };
        let mut train = make("train", self.train_per_cluster, &mut rng);
        let test = make("test", self.test_per_cluster, &mut rng);

        if self.label_noise > 0.0 && self.clusters > 1 {
            let noisy = ((self.label_noise * train.len() as f64).round() as usize).min(train.len());
            for i in index::sample(&mut rng, train.len(), noisy) {
                let current = &train[i].tags[0];
                let others: Vec<String> = (self.first_cluster..self.first_cluster + self.clusters)
                    .map(cluster_tag)
                    .filter(|t| t != current)
                    .collect();
                train[i].tags = vec![others[rng.gen_range(0..others.len())].clone()];
            }
        }
        (train, test)
    }
}
