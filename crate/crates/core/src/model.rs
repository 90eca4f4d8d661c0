//! Learnable parameters, hyperparameters and the composite model.

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{TagDictionary, TaggedDocument, Vocabulary};
use crate::error::{Error, Result};
use crate::hsoftmax::HuffmanTree;
use crate::matrix::Matrix;

/// How context word vectors are combined with the document vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CombineMode {
    Sum,
    Mean,
}

/// Whether the tag term is applied at every word position or once per
/// document per pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TagUpdateMode {
    PerPosition,
    PerDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Embedding dimension.
    pub dim: usize,
    /// Context window radius.
    pub window: usize,
    /// Weight of the tag term.
    pub alpha: f64,
    /// Negative tags drawn per positive tag.
    pub negatives: usize,
    pub epochs: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Constant learning rate for incremental chunks.
    pub lr_incremental: f64,
    pub min_count: u64,
    pub seed: u64,
    pub combine: CombineMode,
    pub tag_updates: TagUpdateMode,
    /// Passes over a new document during inference.
    pub infer_steps: usize,
    pub lr_infer: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            dim: 100,
            window: 8,
            alpha: 1.0,
            negatives: 1,
            epochs: 20,
            lr_initial: 0.025,
            lr_final: 1e-4,
            lr_incremental: 0.005,
            min_count: crate::corpus::DEFAULT_MIN_COUNT,
            seed: 42,
            combine: CombineMode::Mean,
            tag_updates: TagUpdateMode::PerPosition,
            infer_steps: 20,
            lr_infer: 0.025,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be finite and non-negative");
        }
        if !(self.lr_final > 0.0 && self.lr_initial >= self.lr_final && self.lr_initial.is_finite()) {
            return bad("learning rates must satisfy lr_initial >= lr_final > 0");
        }
        if !(self.lr_incremental > 0.0 && self.lr_infer > 0.0) {
            return bad("incremental and inference learning rates must be positive");
        }
        if self.min_count == 0 {
            return bad("min_count must be at least 1");
        }
        Ok(())
    }

    /// Half-width of the uniform initialization interval.
    pub fn init_bound(&self) -> f32 {
        0.5 / self.dim as f32
    }
}

/// Word (`W`), document (`D`), tag (`T`) and hierarchical-softmax (`H`)
/// parameter blocks, each `dim × count`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrices<F> {
    pub words: Matrix<F>,
    pub docs: Matrix<F>,
    pub tags: Matrix<F>,
    pub nodes: Matrix<F>,
}

impl<F: Float> EmbeddingMatrices<F> {
    pub fn dim(&self) -> usize {
        self.words.dim()
    }

    pub fn all_finite(&self) -> bool {
        self.words.all_finite() && self.docs.all_finite() && self.tags.all_finite() && self.nodes.all_finite()
    }

    pub fn cast<G: Float>(&self) -> EmbeddingMatrices<G> {
        EmbeddingMatrices {
            words: self.words.cast(),
            docs: self.docs.cast(),
            tags: self.tags.cast(),
            nodes: self.nodes.cast(),
        }
    }
}

pub(crate) fn uniform_matrix(rng: &mut ChaCha8Rng, dim: usize, cols: usize, bound: f32) -> Matrix<f32> {
    let data = (0..dim * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    Matrix::from_columns(dim, data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub hyper: Hyperparameters,
    pub vocab: Vocabulary,
    pub tagdict: TagDictionary,
    pub tree: HuffmanTree,
    pub params: EmbeddingMatrices<f32>,
    pub rng: ChaCha8Rng,
}

impl Model {
    /// Fresh model with `W`, `D`, `T` drawn uniformly from `±0.5/K` in that
    /// order, and `H` zero.
    pub fn new(vocab: Vocabulary, tagdict: TagDictionary, num_docs: usize, hyper: Hyperparameters) -> Result<Self> {
        hyper.validate()?;
        if vocab.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        if tagdict.is_empty() {
            return Err(Error::InvalidConfig("tag dictionary is empty".into()));
        }
        let tree = HuffmanTree::build(vocab.counts())?;
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let k = hyper.dim;
        let bound = hyper.init_bound();
        let words = uniform_matrix(&mut rng, k, vocab.len(), bound);
        let docs = uniform_matrix(&mut rng, k, num_docs, bound);
        let tags = uniform_matrix(&mut rng, k, tagdict.len(), bound);
        let nodes = Matrix::zeros(k, tree.num_internal());
        Ok(Model {
            hyper,
            vocab,
            tagdict,
            tree,
            params: EmbeddingMatrices { words, docs, tags, nodes },
            rng,
        })
    }

    pub fn dim(&self) -> usize {
        self.hyper.dim
    }

    pub fn num_words(&self) -> usize {
        self.vocab.len()
    }

    pub fn num_tags(&self) -> usize {
        self.tagdict.len()
    }

    /// Number of document columns trained so far.
    pub fn trained_docs(&self) -> usize {
        self.params.docs.cols()
    }

    /// Checks that every matrix agrees with the vocabulary, tag dictionary
    /// and tree it is bound to.
    pub fn check_consistency(&self) -> Result<()> {
        let k = self.hyper.dim;
        let p = &self.params;
        let ok = p.words.dim() == k
            && p.docs.dim() == k
            && p.tags.dim() == k
            && p.nodes.dim() == k
            && p.words.cols() == self.vocab.len()
            && p.tags.cols() == self.tagdict.len()
            && self.tree.num_leaves() == self.vocab.len()
            && p.nodes.cols() == self.tree.num_internal();
        if ok {
            Ok(())
        } else {
            Err(Error::Format("matrix dimensions disagree with vocabulary, tags or tree".into()))
        }
    }

    /// Appends tags with freshly initialized embeddings. Existing columns are
    /// left untouched.
    pub fn add_tags<S: AsRef<str>>(&mut self, new_tags: &[S]) -> Result<Vec<u32>> {
        let mut seen = std::collections::HashSet::new();
        for tag in new_tags {
            let tag = tag.as_ref();
            if self.tagdict.id(tag).is_some() || !seen.insert(tag) {
                return Err(Error::DuplicateTag(tag.to_owned()));
            }
        }
        let bound = self.hyper.init_bound();
        let k = self.hyper.dim;
        let mut ids = Vec::with_capacity(new_tags.len());
        for tag in new_tags {
            let col: Vec<f32> = (0..k).map(|_| self.rng.gen_range(-bound..=bound)).collect();
            self.params.tags.push_col(&col);
            ids.push(self.tagdict.push(tag.as_ref().to_owned()));
        }
        Ok(ids)
    }

    /// Grows the vocabulary with words not yet known. New words get fresh
    /// `W` columns and hang off a new tree root; existing `H` columns keep
    /// their meaning. Returns the number of words added.
    pub fn add_words(&mut self, counts: &[(String, u64)]) -> Result<usize> {
        let mut fresh: Vec<(String, u64)> = Vec::new();
        for (word, count) in counts {
            if *count == 0 || self.vocab.id(word).is_some() || fresh.iter().any(|(w, _)| w == word) {
                continue;
            }
            fresh.push((word.clone(), *count));
        }
        if fresh.is_empty() {
            return Ok(0);
        }
        fresh.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let new_counts: Vec<u64> = fresh.iter().map(|(_, c)| *c).collect();
        let tree = self.tree.graft(&new_counts)?;
        let bound = self.hyper.init_bound();
        let k = self.hyper.dim;
        for (word, count) in &fresh {
            let col: Vec<f32> = (0..k).map(|_| self.rng.gen_range(-bound..=bound)).collect();
            self.params.words.push_col(&col);
            self.vocab.push(word.clone(), *count);
        }
        let zeros = vec![0.0f32; k];
        while self.params.nodes.cols() < tree.num_internal() {
            self.params.nodes.push_col(&zeros);
        }
        self.tree = tree;
        Ok(fresh.len())
    }

    /// Appends `n` freshly initialized document columns and returns the
    /// first new column index.
    pub(crate) fn add_document_columns(&mut self, n: usize) -> usize {
        let first = self.params.docs.cols();
        let bound = self.hyper.init_bound();
        let k = self.hyper.dim;
        for _ in 0..n {
            let col: Vec<f32> = (0..k).map(|_| self.rng.gen_range(-bound..=bound)).collect();
            self.params.docs.push_col(&col);
        }
        first
    }

    /// Encodes tokens and tag strings, rejecting tags the model does not know.
    pub fn encode_strict<S: AsRef<str>, T: AsRef<str>>(
        &self,
        doc_id: usize,
        tokens: &[S],
        tags: &[T],
    ) -> Result<TaggedDocument> {
        if let Some(t) = tags.iter().find(|t| self.tagdict.id(t.as_ref()).is_none()) {
            return Err(Error::UnknownTag(t.as_ref().to_owned()));
        }
        Ok(crate::corpus::encode_document(doc_id, tokens, tags, &self.vocab, &self.tagdict).0)
    }
}
