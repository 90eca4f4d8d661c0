//! Stochastic gradient descent on the joint objective: hierarchical-softmax
//! prediction of each word from its composite context (document vector plus
//! context words), and negative-sampling attraction of the document vector
//! to each of its tags.
//!
//! Each word position is one SGD step. All gradients of a step are taken at
//! the parameters as they were before the step, then applied together.

use std::sync::atomic::{AtomicUsize, Ordering};

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{window_bounds, Dataset, TaggedDocument};
use crate::error::{Error, Result};
use crate::hsoftmax::{HuffmanTree, PathStep};
use crate::math::{axpy, dot, from_f64, log_sigmoid, to_f64};
use crate::matrix::Matrix;
use crate::model::{CombineMode, EmbeddingMatrices, Hyperparameters, Model, TagUpdateMode};

pub use crate::math::sigmoid;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainConfig {
    /// Worker threads. More than one enables lock-free shared updates,
    /// which gives up bit-exact reproducibility.
    pub workers: usize,
    /// Shuffle document order at every epoch.
    pub shuffle: bool,
    /// Documents between intermediate reports; 0 reports once per epoch.
    pub report_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { workers: 1, shuffle: true, report_every: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub epoch: usize,
    #[serde(rename = "docs")]
    pub docs_seen: usize,
    /// Mean word-prediction loss per position since the previous report.
    #[serde(rename = "hs_loss")]
    pub mean_hs_loss: f64,
    /// Mean α-weighted tag loss per position since the previous report.
    #[serde(rename = "tag_loss")]
    pub mean_tag_loss: f64,
    #[serde(rename = "lr")]
    pub lr_current: f64,
}

impl LossReport {
    pub fn mean_total(&self) -> f64 {
        self.mean_hs_loss + self.mean_tag_loss
    }
}

/// Linear decay from `initial` to `last` over `total` positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRate {
    pub initial: f64,
    pub last: f64,
    pub total: usize,
}

impl LearningRate {
    pub fn constant(lr: f64) -> Self {
        LearningRate { initial: lr, last: lr, total: 1 }
    }

    pub fn at(&self, position: usize) -> f64 {
        if self.total == 0 {
            return self.initial;
        }
        let frac = (position as f64 / self.total as f64).min(1.0);
        self.initial - (self.initial - self.last) * frac
    }
}

/// Composite context feature: the document vector plus the sum (or mean)
/// of the context word vectors around position `i`.
pub fn composite_context<F: Float>(
    doc: &TaggedDocument,
    i: usize,
    doc_vec: &[F],
    words: &Matrix<F>,
    window: usize,
    mode: CombineMode,
) -> Vec<F> {
    let mut out = vec![F::zero(); doc_vec.len()];
    let (start, end) = window_bounds(doc.words.len(), i, window);
    let ctx: Vec<u32> = (start..end).filter(|&j| j != i).map(|j| doc.words[j]).collect();
    fill_composite(doc_vec, words, &ctx, mode, &mut out);
    out
}

/// Returns the scale applied to each context vector.
fn fill_composite<F: Float>(doc_vec: &[F], words: &Matrix<F>, ctx: &[u32], mode: CombineMode, out: &mut [F]) -> F {
    out.fill(F::zero());
    for &w in ctx {
        axpy(F::one(), words.col(w as usize), out);
    }
    let scale = match mode {
        CombineMode::Mean if !ctx.is_empty() => F::one() / from_f64(ctx.len() as f64),
        _ => F::one(),
    };
    for (o, &d) in out.iter_mut().zip(doc_vec) {
        *o = d + *o * scale;
    }
    scale
}

/// Per-node coefficients `c` with `∂loss/∂h_node = c · g`; returns the loss.
fn hs_coefficients<F: Float>(g: &[F], path: &[PathStep], nodes: &Matrix<F>, out: &mut Vec<(u32, F)>) -> f64 {
    out.clear();
    let mut loss = 0.0;
    for step in path {
        let sign = f64::from(step.sign);
        let x = sign * to_f64(dot(g, nodes.col(step.node as usize)));
        loss -= log_sigmoid(x);
        out.push((step.node, from_f64(-(1.0 - sigmoid(x)) * sign)));
    }
    loss
}

/// One hierarchical-softmax step for feature `g` and target `word`.
///
/// Returns the loss and its gradient with respect to `g`, both at the
/// pre-update `H`; the path columns of `H` are then updated in place.
pub fn hs_step<F: Float>(g: &[F], word: usize, tree: &HuffmanTree, nodes: &mut Matrix<F>, lr: f64) -> Result<(f64, Vec<F>)> {
    let path = tree.path(word)?;
    let mut coefs = Vec::with_capacity(path.len());
    let loss = hs_coefficients(g, path, nodes, &mut coefs);
    let mut grad_g = vec![F::zero(); g.len()];
    for &(node, c) in &coefs {
        axpy(c, nodes.col(node as usize), &mut grad_g);
    }
    let lr: F = from_f64(lr);
    for &(node, c) in &coefs {
        axpy(-lr * c, g, nodes.col_mut(node as usize));
    }
    Ok((loss, grad_g))
}

/// Appends `(tag, c)` pairs with `∂loss/∂t = c · d` and returns the
/// α-weighted loss of one positive tag against its negatives.
fn tag_coefficients<F: Float>(d: &[F], pos: u32, negs: &[u32], tags: &Matrix<F>, alpha: f64, out: &mut Vec<(u32, F)>) -> f64 {
    let x = to_f64(dot(d, tags.col(pos as usize)));
    let mut loss = -log_sigmoid(x);
    out.push((pos, from_f64(-(1.0 - sigmoid(x)) * alpha)));
    for &n in negs {
        let x = to_f64(dot(d, tags.col(n as usize)));
        loss -= log_sigmoid(-x);
        out.push((n, from_f64(sigmoid(x) * alpha)));
    }
    alpha * loss
}

/// Negative-sampling step for document vector `d` and one positive tag.
///
/// Returns the α-weighted loss at the pre-update parameters, then moves the
/// positive tag toward `d`, the negatives away from it, and `d` along its
/// gradient.
pub fn tag_step<F: Float>(d: &mut [F], pos: u32, negs: &[u32], tags: &mut Matrix<F>, alpha: f64, lr: f64) -> f64 {
    let mut coefs = Vec::with_capacity(negs.len() + 1);
    let loss = tag_coefficients(d, pos, negs, tags, alpha, &mut coefs);
    let mut grad_d = vec![F::zero(); d.len()];
    for &(t, c) in &coefs {
        axpy(c, tags.col(t as usize), &mut grad_d);
    }
    let lr: F = from_f64(lr);
    for &(t, c) in &coefs {
        axpy(-lr * c, d, tags.col_mut(t as usize));
    }
    axpy(-lr, &grad_d, d);
    loss
}

/// `r` tag ids drawn uniformly from `[0, m)`, redrawing any hit on `exclude`.
pub fn sample_negatives<R: Rng + ?Sized>(rng: &mut R, m: usize, r: usize, exclude: u32) -> Result<Vec<u32>> {
    let mut out = Vec::with_capacity(r);
    fill_negatives(rng, m, r, exclude, &mut out)?;
    Ok(out)
}

fn fill_negatives<R: Rng + ?Sized>(rng: &mut R, m: usize, r: usize, exclude: u32, out: &mut Vec<u32>) -> Result<()> {
    if m < 2 {
        return Err(Error::DegenerateTagSet);
    }
    for _ in 0..r {
        loop {
            let t = rng.gen_range(0..m as u32);
            if t != exclude {
                out.push(t);
                break;
            }
        }
    }
    Ok(())
}

/// Gradient of one position's loss, kept in factored form.
///
/// With `g` the composite feature and `d` the document vector (both before
/// the step): `∂/∂h = c·g` for each `(node, c)` in `hs`, `∂/∂t = c·d` for each
/// `(tag, c)` in `tags`, `∂/∂w = context_scale · grad_g` for each context
/// occurrence, and `∂/∂d = grad_d`.
#[derive(Debug, Clone, Default)]
pub struct PositionGradient<F> {
    pub hs_loss: f64,
    pub tag_loss: f64,
    pub g: Vec<F>,
    pub d: Vec<F>,
    pub context: Vec<u32>,
    pub context_scale: F,
    pub hs: Vec<(u32, F)>,
    pub tags: Vec<(u32, F)>,
    pub grad_g: Vec<F>,
    pub grad_d: Vec<F>,
}

impl<F: Float> PositionGradient<F> {
    pub fn new(dim: usize) -> Self {
        PositionGradient {
            hs_loss: 0.0,
            tag_loss: 0.0,
            g: vec![F::zero(); dim],
            d: vec![F::zero(); dim],
            context: Vec::new(),
            context_scale: F::one(),
            hs: Vec::new(),
            tags: Vec::new(),
            grad_g: vec![F::zero(); dim],
            grad_d: vec![F::zero(); dim],
        }
    }

    /// Evaluates loss and gradient at position `i` of `doc` (document column
    /// `doc_col`). `negatives` holds `r` ids per entry of `tag_terms`, in order;
    /// an empty `tag_terms` leaves out the tag part.
    #[allow(clippy::too_many_arguments)]
    pub fn compute(
        &mut self,
        params: &EmbeddingMatrices<F>,
        tree: &HuffmanTree,
        hyper: &Hyperparameters,
        doc: &TaggedDocument,
        doc_col: usize,
        i: usize,
        tag_terms: &[u32],
        negatives: &[u32],
    ) {
        self.compute_hs(&params.words, &params.nodes, tree, hyper, &doc.words, params.docs.col(doc_col), i);

        self.tags.clear();
        self.tag_loss = self.tag_part(params, hyper, tag_terms, negatives);
        self.grad_d.copy_from_slice(&self.grad_g);
        for &(t, c) in &self.tags {
            axpy(c, params.tags.col(t as usize), &mut self.grad_d);
        }
    }

    /// Word-prediction part only: fills `g`, `d`, `context`, `hs`, `hs_loss`
    /// and `grad_g` for position `i` of `words` with document vector `doc_vec`.
    #[allow(clippy::too_many_arguments)]
    pub fn compute_hs(
        &mut self,
        word_vecs: &Matrix<F>,
        nodes: &Matrix<F>,
        tree: &HuffmanTree,
        hyper: &Hyperparameters,
        words: &[u32],
        doc_vec: &[F],
        i: usize,
    ) {
        let (start, end) = window_bounds(words.len(), i, hyper.window);
        self.context.clear();
        self.context.extend((start..end).filter(|&j| j != i).map(|j| words[j]));
        self.d.copy_from_slice(doc_vec);
        self.context_scale = fill_composite(&self.d, word_vecs, &self.context, hyper.combine, &mut self.g);

        let path = tree.path_unchecked(words[i] as usize);
        self.hs_loss = hs_coefficients(&self.g, path, nodes, &mut self.hs);
        self.grad_g.fill(F::zero());
        for &(node, c) in &self.hs {
            axpy(c, nodes.col(node as usize), &mut self.grad_g);
        }
    }

    fn tag_part(&mut self, params: &EmbeddingMatrices<F>, hyper: &Hyperparameters, tag_terms: &[u32], negatives: &[u32]) -> f64 {
        let r = hyper.negatives;
        tag_terms
            .iter()
            .enumerate()
            .map(|(k, &pos)| {
                let negs = &negatives[k * r..(k + 1) * r];
                tag_coefficients(&self.d, pos, negs, &params.tags, hyper.alpha, &mut self.tags)
            })
            .sum()
    }

    /// Evaluates only the tag part for document column `doc_col`.
    pub fn compute_tags_only(
        &mut self,
        params: &EmbeddingMatrices<F>,
        hyper: &Hyperparameters,
        doc_col: usize,
        tag_terms: &[u32],
        negatives: &[u32],
    ) {
        self.d.copy_from_slice(params.docs.col(doc_col));
        self.context.clear();
        self.hs.clear();
        self.hs_loss = 0.0;
        self.grad_g.fill(F::zero());
        self.tags.clear();
        self.tag_loss = self.tag_part(params, hyper, tag_terms, negatives);
        self.grad_d.fill(F::zero());
        for &(t, c) in &self.tags {
            axpy(c, params.tags.col(t as usize), &mut self.grad_d);
        }
    }

    /// `θ ← θ − lr · ∂loss/∂θ` for every parameter the position touches.
    pub fn apply(&self, params: &mut EmbeddingMatrices<F>, doc_col: usize, lr: f64) {
        let lr: F = from_f64(lr);
        axpy(-lr, &self.grad_d, params.docs.col_mut(doc_col));
        let step = -lr * self.context_scale;
        for &w in &self.context {
            axpy(step, &self.grad_g, params.words.col_mut(w as usize));
        }
        for &(node, c) in &self.hs {
            axpy(-lr * c, &self.g, params.nodes.col_mut(node as usize));
        }
        for &(t, c) in &self.tags {
            axpy(-lr * c, &self.d, params.tags.col_mut(t as usize));
        }
    }

    /// Adds the dense gradient into `grad`, which must have the shape of the
    /// parameters.
    pub fn accumulate(&self, grad: &mut EmbeddingMatrices<F>, doc_col: usize) {
        axpy(F::one(), &self.grad_d, grad.docs.col_mut(doc_col));
        for &w in &self.context {
            axpy(self.context_scale, &self.grad_g, grad.words.col_mut(w as usize));
        }
        for &(node, c) in &self.hs {
            axpy(c, &self.g, grad.nodes.col_mut(node as usize));
        }
        for &(t, c) in &self.tags {
            axpy(c, &self.d, grad.tags.col_mut(t as usize));
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DocumentLoss {
    pub hs: f64,
    pub tag: f64,
    pub positions: usize,
}

impl DocumentLoss {
    pub fn total(&self) -> f64 {
        self.hs + self.tag
    }

    fn add(&mut self, other: DocumentLoss) {
        self.hs += other.hs;
        self.tag += other.tag;
        self.positions += other.positions;
    }
}

/// Reusable buffers for [`train_document`].
#[derive(Debug, Clone)]
pub struct Scratch<F> {
    grad: PositionGradient<F>,
    negatives: Vec<u32>,
}

impl<F: Float> Scratch<F> {
    pub fn new(dim: usize) -> Self {
        Scratch { grad: PositionGradient::new(dim), negatives: Vec::new() }
    }
}

/// One SGD pass over a document, whose vector is column `doc_col` of `D`.
///
/// `lr_at` maps the number of positions already processed in this document
/// to a learning rate. Negatives are drawn position by position, `r` per tag
/// in the document's tag order.
#[allow(clippy::too_many_arguments)]
pub fn train_document<F: Float, R: Rng + ?Sized>(
    params: &mut EmbeddingMatrices<F>,
    tree: &HuffmanTree,
    hyper: &Hyperparameters,
    doc: &TaggedDocument,
    doc_col: usize,
    lr_at: impl Fn(usize) -> f64,
    rng: &mut R,
    scratch: &mut Scratch<F>,
) -> Result<DocumentLoss> {
    let mut loss = DocumentLoss::default();
    if doc.words.is_empty() {
        return Ok(loss);
    }
    let m = params.tags.cols();
    let per_position = hyper.tag_updates == TagUpdateMode::PerPosition;
    let no_tags: &[u32] = &[];
    for i in 0..doc.words.len() {
        let tag_terms = if per_position { doc.tags.as_slice() } else { no_tags };
        scratch.negatives.clear();
        for &t in tag_terms {
            fill_negatives(rng, m, hyper.negatives, t, &mut scratch.negatives)?;
        }
        let lr = lr_at(i);
        scratch.grad.compute(params, tree, hyper, doc, doc_col, i, tag_terms, &scratch.negatives);
        scratch.grad.apply(params, doc_col, lr);
        loss.hs += scratch.grad.hs_loss;
        loss.tag += scratch.grad.tag_loss;
        loss.positions += 1;
    }
    if !per_position && !doc.tags.is_empty() {
        scratch.negatives.clear();
        for &t in &doc.tags {
            fill_negatives(rng, m, hyper.negatives, t, &mut scratch.negatives)?;
        }
        scratch.grad.compute_tags_only(params, hyper, doc_col, &doc.tags, &scratch.negatives);
        scratch.grad.apply(params, doc_col, lr_at(doc.words.len()));
        loss.tag += scratch.grad.tag_loss;
    }
    Ok(loss)
}

fn check_documents<'a>(model: &Model, docs: impl IntoIterator<Item = &'a TaggedDocument>) -> Result<()> {
    let v = model.num_words();
    let m = model.num_tags();
    for doc in docs {
        if let Some(&w) = doc.words.iter().find(|&&w| w as usize >= v) {
            return Err(Error::IndexOutOfRange { index: w as usize, len: v });
        }
        if let Some(&t) = doc.tags.iter().find(|&&t| t as usize >= m) {
            return Err(Error::UnknownTag(format!("#{t}")));
        }
        if !doc.tags.is_empty() && m < 2 {
            return Err(Error::DegenerateTagSet);
        }
    }
    Ok(())
}

#[derive(Default)]
struct Window {
    hs: f64,
    tag: f64,
    positions: usize,
}

impl Window {
    fn add(&mut self, l: DocumentLoss) {
        self.hs += l.hs;
        self.tag += l.tag;
        self.positions += l.positions;
    }

    fn take(&mut self, epoch: usize, docs_seen: usize, lr: f64) -> LossReport {
        let n = self.positions.max(1) as f64;
        let report = LossReport { epoch, docs_seen, mean_hs_loss: self.hs / n, mean_tag_loss: self.tag / n, lr_current: lr };
        *self = Window::default();
        report
    }
}

/// Trains on `dataset` for `hyper.epochs` passes with a linearly decaying
/// learning rate, calling `on_report` as reports are produced.
pub fn train_with_progress(
    model: &mut Model,
    dataset: &Dataset,
    config: &TrainConfig,
    mut on_report: impl FnMut(&LossReport),
) -> Result<Vec<LossReport>> {
    if config.workers == 0 {
        return Err(Error::InvalidConfig("workers must be at least 1".into()));
    }
    check_documents(model, &dataset.documents)?;
    if let Some(doc) = dataset.documents.iter().find(|d| d.doc_id >= model.trained_docs()) {
        return Err(Error::IndexOutOfRange { index: doc.doc_id, len: model.trained_docs() });
    }
    let per_epoch: usize = dataset.documents.iter().map(TaggedDocument::len).sum();
    let schedule = LearningRate {
        initial: model.hyper.lr_initial,
        last: model.hyper.lr_final,
        total: per_epoch * model.hyper.epochs,
    };
    let docs: Vec<(usize, &TaggedDocument)> = dataset.documents.iter().map(|d| (d.doc_id, d)).collect();
    let mut reports = Vec::new();
    let mut emit = |r: LossReport| {
        on_report(&r);
        reports.push(r);
    };
    let mut position = 0usize;
    let mut docs_seen = 0usize;
    for epoch in 1..=model.hyper.epochs {
        run_epoch(model, &docs, config, epoch, &mut position, &mut docs_seen, |p| schedule.at(p), &mut emit)?;
    }
    Ok(reports)
}

pub fn train(model: &mut Model, dataset: &Dataset, config: &TrainConfig) -> Result<Vec<LossReport>> {
    train_with_progress(model, dataset, config, |_| {})
}

#[allow(clippy::too_many_arguments)]
fn run_epoch(
    model: &mut Model,
    docs: &[(usize, &TaggedDocument)],
    config: &TrainConfig,
    epoch: usize,
    position: &mut usize,
    docs_seen: &mut usize,
    lr_at: impl Fn(usize) -> f64 + Sync,
    emit: &mut impl FnMut(LossReport),
) -> Result<DocumentLoss> {
    let mut order: Vec<usize> = (0..docs.len()).collect();
    if config.shuffle {
        order.shuffle(&mut model.rng);
    }
    let epoch_loss = if config.workers > 1 {
        let loss = hogwild::run(model, docs, &order, config.workers, position, &lr_at)?;
        *docs_seen += docs.len();
        let mut w = Window::default();
        w.add(loss);
        emit(w.take(epoch, *docs_seen, lr_at(*position)));
        loss
    } else {
        let Model { params, tree, hyper, rng, .. } = model;
        let mut scratch = Scratch::new(hyper.dim);
        let mut window = Window::default();
        let mut epoch_loss = DocumentLoss::default();
        let mut since_report = 0usize;
        for &idx in &order {
            let (col, doc) = docs[idx];
            let start = *position;
            let loss = train_document(params, tree, hyper, doc, col, |i| lr_at(start + i), rng, &mut scratch)?;
            *position += doc.len();
            *docs_seen += 1;
            since_report += 1;
            window.add(loss);
            epoch_loss.add(loss);
            if config.report_every > 0 && since_report == config.report_every {
                emit(window.take(epoch, *docs_seen, lr_at(*position)));
                since_report = 0;
            }
        }
        if since_report > 0 || config.report_every == 0 {
            emit(window.take(epoch, *docs_seen, lr_at(*position)));
        }
        epoch_loss
    };
    if !model.params.all_finite() {
        return Err(Error::NaNDetected { epoch });
    }
    Ok(epoch_loss)
}

/// Continues training on a chunk of new documents. Each document gets a
/// fresh `D` column; `W`, `T` and `H` carry on from their current values.
/// The chunk is passed over `hyper.epochs` times at the constant
/// incremental learning rate. Document ids in `docs` are ignored.
pub fn train_incremental(model: &mut Model, docs: &[TaggedDocument], config: &TrainConfig) -> Result<LossReport> {
    if config.workers == 0 {
        return Err(Error::InvalidConfig("workers must be at least 1".into()));
    }
    check_documents(model, docs)?;
    let first = model.add_document_columns(docs.len());
    let cols: Vec<(usize, &TaggedDocument)> = docs.iter().enumerate().map(|(i, d)| (first + i, d)).collect();
    let lr = model.hyper.lr_incremental;
    let mut total = DocumentLoss::default();
    let mut position = 0usize;
    let mut docs_seen = 0usize;
    let passes = model.hyper.epochs;
    let quiet = TrainConfig { report_every: 0, ..config.clone() };
    for epoch in 1..=passes {
        let loss = run_epoch(model, &cols, &quiet, epoch, &mut position, &mut docs_seen, |_| lr, &mut |_| {})?;
        total.add(loss);
    }
    let n = total.positions.max(1) as f64;
    Ok(LossReport {
        epoch: passes,
        docs_seen,
        mean_hs_loss: total.hs / n,
        mean_tag_loss: total.tag / n,
        lr_current: lr,
    })
}

/// Lock-free multi-worker epochs. Workers share the parameter matrices
/// without synchronization; concurrent updates to the same column may
/// interleave, so results depend on scheduling.
mod hogwild {
    use super::*;

    struct Shared(*mut EmbeddingMatrices<f32>);

    // SAFETY: workers only read and write f32 entries of matrices whose
    // allocations stay fixed for the duration of the scope. Interleaved
    // updates to one column are accepted as in lock-free SGD.
    unsafe impl Send for Shared {}
    unsafe impl Sync for Shared {}

    pub(super) fn run(
        model: &mut Model,
        docs: &[(usize, &TaggedDocument)],
        order: &[usize],
        workers: usize,
        position: &mut usize,
        lr_at: &(impl Fn(usize) -> f64 + Sync),
    ) -> Result<DocumentLoss> {
        let seeds: Vec<u64> = (0..workers).map(|_| model.rng.gen()).collect();
        let counter = AtomicUsize::new(*position);
        let shared = Shared(&mut model.params);
        let tree = &model.tree;
        let hyper = &model.hyper;
        let results: Vec<Result<DocumentLoss>> = std::thread::scope(|s| {
            let handles: Vec<_> = seeds
                .iter()
                .enumerate()
                .map(|(w, &seed)| {
                    let shared = &shared;
                    let counter = &counter;
                    s.spawn(move || {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        let mut scratch = Scratch::new(hyper.dim);
                        let mut total = DocumentLoss::default();
                        for &idx in order.iter().skip(w).step_by(workers) {
                            let (col, doc) = docs[idx];
                            let start = counter.fetch_add(doc.len(), Ordering::Relaxed);
                            // SAFETY: see `Shared`.
                            let params = unsafe { &mut *shared.0 };
                            let loss = train_document(params, tree, hyper, doc, col, |i| lr_at(start + i), &mut rng, &mut scratch)?;
                            total.add(loss);
                        }
                        Ok(total)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        *position = counter.into_inner();
        let mut total = DocumentLoss::default();
        for r in results {
            total.add(r?);
        }
        Ok(total)
    }
}
