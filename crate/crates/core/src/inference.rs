//! Embedding unseen documents: gradient descent on the word-prediction loss
//! with respect to a fresh document vector, every model matrix frozen.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::encode_tokens;
use crate::error::{Error, Result};
use crate::math::{axpy, from_f64};
use crate::model::Model;
use crate::trainer::PositionGradient;

/// FNV-1a over the encoded word ids; stable across platforms.
fn hash_words(words: &[u32]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for w in words {
        for b in w.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Total word-prediction loss of `words` given document vector `doc_vec`.
pub fn document_objective(model: &Model, words: &[u32], doc_vec: &[f32]) -> f64 {
    let mut grad = PositionGradient::<f32>::new(model.dim());
    (0..words.len())
        .map(|i| {
            position_gradient(model, words, doc_vec, i, &mut grad);
            grad.hs_loss
        })
        .sum()
}

fn position_gradient(model: &Model, words: &[u32], doc_vec: &[f32], i: usize, grad: &mut PositionGradient<f32>) {
    let p = &model.params;
    grad.compute_hs(&p.words, &p.nodes, &model.tree, &model.hyper, words, doc_vec, i);
}

/// Infers a vector for `tokens`; out-of-vocabulary tokens are ignored.
pub fn infer_document<S: AsRef<str>>(model: &Model, tokens: &[S]) -> Result<Vec<f32>> {
    infer_words(model, &encode_tokens(tokens, &model.vocab), model.hyper.infer_steps, model.hyper.lr_infer)
}

/// Infers a vector for already encoded `words` with `steps` passes at a
/// constant learning rate. The starting vector is drawn like a trained
/// document column from an RNG keyed by the model seed and the words.
pub fn infer_words(model: &Model, words: &[u32], steps: usize, lr: f64) -> Result<Vec<f32>> {
    if words.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.hyper.seed ^ hash_words(words));
    let bound = model.hyper.init_bound();
    let mut d: Vec<f32> = (0..model.dim()).map(|_| rng.gen_range(-bound..=bound)).collect();
    let step: f32 = from_f64(-lr);
    let mut grad = PositionGradient::<f32>::new(model.dim());
    for _ in 0..steps {
        for i in 0..words.len() {
            position_gradient(model, words, &d, i, &mut grad);
            axpy(step, &grad.grad_g, &mut d);
        }
    }
    Ok(d)
}
