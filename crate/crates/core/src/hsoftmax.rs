//! Huffman-coded binary tree for hierarchical softmax.
//!
//! Every word is a leaf; each internal node owns one column of the
//! hierarchical-softmax matrix `H`. A word's probability given a feature
//! vector `g` is the product of `σ(sign · ⟨g, h_node⟩)` along its
//! root-to-leaf path, with `+1` for a left branch and `-1` for a right one.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::math::{dot, log_sigmoid, to_f64};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathStep {
    /// Column of `H` belonging to the internal node.
    pub node: u32,
    /// `+1` for the left child, `-1` for the right child.
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTree {
    paths: Vec<Vec<PathStep>>,
    num_internal: usize,
}

/// Builds paths for `counts`; internal node ids start at `node_offset`.
fn huffman_paths(counts: &[u64], node_offset: u32) -> Vec<Vec<PathStep>> {
    let n = counts.len();
    if n == 1 {
        return vec![Vec::new()];
    }
    // Node ids: leaves 0..n, internal nodes n.. in merge order.
    let mut parent: Vec<(u32, i8)> = vec![(u32::MAX, 0); 2 * n - 1];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        counts.iter().enumerate().map(|(i, &c)| Reverse((c, i))).collect();
    let mut next = n;
    while heap.len() > 1 {
        let Reverse((c1, left)) = heap.pop().expect("heap has two entries");
        let Reverse((c2, right)) = heap.pop().expect("heap has two entries");
        let internal = (next - n) as u32 + node_offset;
        parent[left] = (internal, 1);
        parent[right] = (internal, -1);
        heap.push(Reverse((c1.saturating_add(c2), next)));
        next += 1;
    }
    let root = next - 1;
    (0..n)
        .map(|leaf| {
            let mut path = Vec::new();
            let mut node = leaf;
            while node != root {
                let (p, sign) = parent[node];
                path.push(PathStep { node: p, sign });
                node = (p - node_offset) as usize + n;
            }
            path.reverse();
            path
        })
        .collect()
}

impl HuffmanTree {
    /// Optimal prefix code over `counts`. Merges take the two lightest nodes,
    /// ties going to the smaller node id, and the first one popped becomes the
    /// left child. Internal ids follow merge order, so the root is `V - 2`.
    pub fn build(counts: &[u64]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        Ok(HuffmanTree {
            paths: huffman_paths(counts, 0),
            num_internal: counts.len() - 1,
        })
    }

    /// Rebuilds a tree from stored paths, checking that it is a complete
    /// prefix code over `num_internal` internal nodes.
    pub fn from_paths(paths: Vec<Vec<PathStep>>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let tree = HuffmanTree { num_internal: paths.len() - 1, paths };
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Error::Format(format!("huffman tree: {m}"));
        if self.paths.len() == 1 {
            return if self.paths[0].is_empty() { Ok(()) } else { Err(bad("single leaf with a path")) };
        }
        // Kraft equality plus distinct codes means a complete prefix code.
        let mut kraft = 0.0f64;
        let mut codes = std::collections::HashSet::new();
        for path in &self.paths {
            if path.is_empty() || path.len() > 64 {
                return Err(bad("path length"));
            }
            if path.iter().any(|s| s.node as usize >= self.num_internal || (s.sign != 1 && s.sign != -1)) {
                return Err(bad("node id or sign"));
            }
            let signs: Vec<i8> = path.iter().map(|s| s.sign).collect();
            if !codes.insert(signs) {
                return Err(bad("duplicate code"));
            }
            kraft += 0.5f64.powi(path.len() as i32);
        }
        if (kraft - 1.0).abs() > 1e-12 {
            return Err(bad("incomplete code"));
        }
        Ok(())
    }

    /// Adds `new_counts.len()` leaves under a fresh root: the old tree
    /// becomes the left subtree and a Huffman tree over the new words the
    /// right one. Existing internal node ids are unchanged; the new root takes
    /// the largest id.
    pub fn graft(&self, new_counts: &[u64]) -> Result<Self> {
        if new_counts.is_empty() {
            return Ok(self.clone());
        }
        let old_internal = self.num_internal as u32;
        let sub = huffman_paths(new_counts, old_internal);
        let root = old_internal + new_counts.len() as u32 - 1;
        let mut paths = Vec::with_capacity(self.paths.len() + sub.len());
        for p in &self.paths {
            let mut np = Vec::with_capacity(p.len() + 1);
            np.push(PathStep { node: root, sign: 1 });
            np.extend_from_slice(p);
            paths.push(np);
        }
        for p in sub {
            let mut np = Vec::with_capacity(p.len() + 1);
            np.push(PathStep { node: root, sign: -1 });
            np.extend(p);
            paths.push(np);
        }
        Ok(HuffmanTree { num_internal: paths.len() - 1, paths })
    }

    pub fn num_leaves(&self) -> usize {
        self.paths.len()
    }

    pub fn num_internal(&self) -> usize {
        self.num_internal
    }

    /// Root-first path of `word`.
    pub fn path(&self, word: usize) -> Result<&[PathStep]> {
        self.paths
            .get(word)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange { index: word, len: self.paths.len() })
    }

    pub(crate) fn path_unchecked(&self, word: usize) -> &[PathStep] {
        &self.paths[word]
    }

    pub fn paths(&self) -> &[Vec<PathStep>] {
        &self.paths
    }

    /// `Σ count(w) · |path(w)|`
    pub fn weighted_length(&self, counts: &[u64]) -> u64 {
        self.paths.iter().zip(counts).map(|(p, &c)| c * p.len() as u64).sum()
    }
}

/// `log p(word | feature)` under hierarchical softmax; always `≤ 0`.
pub fn hs_log_prob<F: Float>(tree: &HuffmanTree, word: usize, feature: &[F], h: &Matrix<F>) -> Result<f64> {
    Ok(path_log_prob(tree.path(word)?, feature, h))
}

pub fn path_log_prob<F: Float>(path: &[PathStep], feature: &[F], h: &Matrix<F>) -> f64 {
    path.iter()
        .map(|s| log_sigmoid(f64::from(s.sign) * to_f64(dot(feature, h.col(s.node as usize)))))
        .sum()
}
