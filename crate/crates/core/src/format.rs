//! Binary model and ensemble files.
//!
//! All integers and floats are little-endian. A model file is
//!
//! ```text
//! "DT2V" | u32 version | hyperparameters | vocabulary | tags | tree
//!        | W | D | T | H | rng state | u32 crc32
//! ```
//!
//! where each matrix is `u64 rows (K) | u64 cols | f32 × rows·cols` in
//! row-major order, and the CRC covers every preceding byte. An ensemble
//! file is `"DT2VENS" | u32 version | u32 b | u32 k' | b × (u64 len | model
//! bytes) | u32 crc32`.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{TagDictionary, Vocabulary};
use crate::error::{Error, Result};
use crate::hsoftmax::{HuffmanTree, PathStep};
use crate::matrix::Matrix;
use crate::model::{CombineMode, EmbeddingMatrices, Hyperparameters, Model, TagUpdateMode};

pub const MODEL_MAGIC: &[u8; 4] = b"DT2V";
pub const ENSEMBLE_MAGIC: &[u8; 7] = b"DT2VENS";
pub const FORMAT_VERSION: u32 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }
    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }
    fn matrix(&mut self, m: &Matrix<f32>) {
        self.usize(m.dim());
        self.usize(m.cols());
        self.buf.reserve(4 * m.dim() * m.cols());
        for row in 0..m.dim() {
            for col in 0..m.cols() {
                self.bytes(&m.get(row, col).to_le_bytes());
            }
        }
    }
    fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn truncated() -> Error {
    Error::Format("unexpected end of file".into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or_else(truncated)?;
        let s = self.buf.get(self.pos..end).ok_or_else(truncated)?;
        self.pos = end;
        Ok(s)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("slice has requested length"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("length exceeds platform range".into()))
    }
    /// A count of items each at least `min_item` bytes long; rejects counts
    /// the remaining input cannot hold.
    fn count(&mut self, min_item: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(min_item) > self.buf.len() - self.pos {
            return Err(truncated());
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::Format("invalid UTF-8 string".into()))
    }
    fn matrix(&mut self) -> Result<Matrix<f32>> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        if rows == 0 {
            return Err(Error::Format("matrix with zero rows".into()));
        }
        let n = rows.checked_mul(cols).ok_or_else(truncated)?;
        let raw = self.take(n.checked_mul(4).ok_or_else(truncated)?)?;
        let mut m = Matrix::zeros(rows, cols);
        for (idx, chunk) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().expect("chunk of four bytes"));
            m.set(idx / cols, idx % cols, v);
        }
        Ok(m)
    }
}

/// Verifies that exactly a CRC follows the parsed payload and that it
/// matches.
fn check_crc(r: &Reader) -> Result<()> {
    let rest = r.buf.len() - r.pos;
    if rest < 4 {
        return Err(truncated());
    }
    if rest > 4 {
        return Err(Error::Format("trailing bytes after checksum".into()));
    }
    let stored = u32::from_le_bytes(r.buf[r.pos..].try_into().expect("four bytes"));
    let computed = crc32fast::hash(&r.buf[..r.pos]);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    Ok(())
}

fn check_version(r: &mut Reader) -> Result<()> {
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    Ok(())
}

fn write_hyper(w: &mut Writer, h: &Hyperparameters) {
    w.usize(h.dim);
    w.usize(h.window);
    w.f64(h.alpha);
    w.usize(h.negatives);
    w.usize(h.epochs);
    w.f64(h.lr_initial);
    w.f64(h.lr_final);
    w.f64(h.lr_incremental);
    w.u64(h.min_count);
    w.u64(h.seed);
    w.u8(match h.combine {
        CombineMode::Sum => 0,
        CombineMode::Mean => 1,
    });
    w.u8(match h.tag_updates {
        TagUpdateMode::PerPosition => 0,
        TagUpdateMode::PerDocument => 1,
    });
    w.usize(h.infer_steps);
    w.f64(h.lr_infer);
}

fn read_hyper(r: &mut Reader) -> Result<Hyperparameters> {
    let h = Hyperparameters {
        dim: r.usize()?,
        window: r.usize()?,
        alpha: r.f64()?,
        negatives: r.usize()?,
        epochs: r.usize()?,
        lr_initial: r.f64()?,
        lr_final: r.f64()?,
        lr_incremental: r.f64()?,
        min_count: r.u64()?,
        seed: r.u64()?,
        combine: match r.u8()? {
            0 => CombineMode::Sum,
            1 => CombineMode::Mean,
            v => return Err(Error::Format(format!("unknown combine mode {v}"))),
        },
        tag_updates: match r.u8()? {
            0 => TagUpdateMode::PerPosition,
            1 => TagUpdateMode::PerDocument,
            v => return Err(Error::Format(format!("unknown tag update mode {v}"))),
        },
        infer_steps: r.usize()?,
        lr_infer: r.f64()?,
    };
    h.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(h)
}

fn write_model_payload(w: &mut Writer, m: &Model) {
    w.bytes(MODEL_MAGIC);
    w.u32(FORMAT_VERSION);
    write_hyper(w, &m.hyper);

    w.usize(m.vocab.len());
    for (word, &count) in m.vocab.words().iter().zip(m.vocab.counts()) {
        w.str(word);
        w.u64(count);
    }
    w.usize(m.tagdict.len());
    for tag in m.tagdict.tags() {
        w.str(tag);
    }
    w.usize(m.tree.num_leaves());
    for path in m.tree.paths() {
        w.u32(path.len() as u32);
        for step in path {
            w.u32(step.node);
            w.u8(step.sign as u8);
        }
    }

    w.matrix(&m.params.words);
    w.matrix(&m.params.docs);
    w.matrix(&m.params.tags);
    w.matrix(&m.params.nodes);

    w.bytes(&m.rng.get_seed());
    w.u64(m.rng.get_stream());
    w.bytes(&m.rng.get_word_pos().to_le_bytes());
}

/// Serializes a model to bytes.
pub fn encode_model(model: &Model) -> Vec<u8> {
    let mut w = Writer::new();
    write_model_payload(&mut w, model);
    w.finish()
}

/// Parses a model from bytes.
pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < MODEL_MAGIC.len() || &bytes[..4] != MODEL_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut r = Reader { buf: bytes, pos: 4 };
    check_version(&mut r)?;
    let hyper = read_hyper(&mut r)?;

    let v = r.count(12)?;
    let mut words = Vec::with_capacity(v);
    for _ in 0..v {
        let word = r.str()?;
        let count = r.u64()?;
        words.push((word, count));
    }
    let vocab = Vocabulary::from_ordered(words);
    if vocab.len() != v {
        return Err(Error::Format("duplicate vocabulary entry".into()));
    }

    let m = r.count(4)?;
    let mut tags = Vec::with_capacity(m);
    for _ in 0..m {
        tags.push(r.str()?);
    }
    let tagdict = TagDictionary::from_ordered(tags);
    if tagdict.len() != m {
        return Err(Error::Format("duplicate tag entry".into()));
    }

    let leaves = r.count(4)?;
    let mut paths = Vec::with_capacity(leaves);
    for _ in 0..leaves {
        let len = r.u32()? as usize;
        let mut path = Vec::with_capacity(len.min(64));
        for _ in 0..len {
            let node = r.u32()?;
            let sign = r.u8()? as i8;
            path.push(PathStep { node, sign });
        }
        paths.push(path);
    }
    let tree = HuffmanTree::from_paths(paths)?;

    let params = EmbeddingMatrices {
        words: r.matrix()?,
        docs: r.matrix()?,
        tags: r.matrix()?,
        nodes: r.matrix()?,
    };

    let seed: [u8; 32] = r.array()?;
    let stream = r.u64()?;
    let word_pos = u128::from_le_bytes(r.array()?);
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);

    check_crc(&r)?;
    let model = Model { hyper, vocab, tagdict, tree, params, rng };
    model.check_consistency()?;
    Ok(model)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    decode_model(&fs::read(path)?)
}

pub fn encode_ensemble(learners: &[Model], k_prime: usize) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(ENSEMBLE_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u32(learners.len() as u32);
    w.u32(k_prime as u32);
    for m in learners {
        let block = encode_model(m);
        w.usize(block.len());
        w.bytes(&block);
    }
    w.finish()
}

/// Returns the learners and `k'`.
pub fn decode_ensemble(bytes: &[u8]) -> Result<(Vec<Model>, usize)> {
    if bytes.len() < ENSEMBLE_MAGIC.len() || &bytes[..7] != ENSEMBLE_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut r = Reader { buf: bytes, pos: 7 };
    check_version(&mut r)?;
    let b = r.u32()? as usize;
    let k_prime = r.u32()? as usize;
    let mut learners = Vec::with_capacity(b.min(1024));
    for _ in 0..b {
        let len = r.usize()?;
        learners.push(decode_model(r.take(len)?)?);
    }
    check_crc(&r)?;
    Ok((learners, k_prime))
}
