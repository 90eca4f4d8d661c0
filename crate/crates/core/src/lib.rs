//! Joint word, document and tag embeddings for multi-label document tagging.
//!
//! A model learns word vectors, one vector per training document, one
//! vector per tag and hierarchical-softmax parameters by SGD. Words are
//! predicted from their context plus the document vector; tags are pulled
//! toward the vectors of documents carrying them and pushed away from
//! those of randomly drawn tags. New documents are embedded with every
//! other parameter frozen and tagged by cosine nearest neighbours among the
//! tag vectors. Bagged ensembles, incremental updates and tag-set growth are
//! supported.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod format;
pub mod hsoftmax;
pub mod inference;
pub mod math;
pub mod matrix;
pub mod model;
pub mod predictor;
pub mod synthetic;
pub mod trainer;

pub use corpus::{Dataset, Record, TagDictionary, TaggedDocument, Vocabulary};
pub use error::{Error, Result};
pub use eval::{ExperimentConfig, MetricsReport};
pub use hsoftmax::HuffmanTree;
pub use matrix::Matrix;
pub use model::{CombineMode, EmbeddingMatrices, Hyperparameters, Model, TagUpdateMode};
pub use predictor::{Ensemble, Prediction};
pub use trainer::{LossReport, TrainConfig};
