//! Raw tagged text ingestion: tokenization, vocabulary and tag dictionary
//! construction, document encoding and context windows.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MIN_COUNT: u64 = 5;

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'..='\u{201F}' | '\u{2010}'..='\u{2015}' | '\u{2026}' | '«' | '»' | '¡' | '¿'
        )
}

/// Lowercase, split on Unicode whitespace and strip leading/trailing
/// punctuation. Empty tokens are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(is_punctuation).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Sorts `(token, count)` pairs by descending count, then lexicographically.
fn frequency_order(counts: HashMap<String, u64>, min_count: u64) -> Vec<(String, u64)> {
    let mut kept: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    kept
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    word_to_id: HashMap<String, u32>,
    id_to_word: Vec<String>,
    counts: Vec<u64>,
}

impl Vocabulary {
    /// Builds a vocabulary from token streams. Ids follow descending count,
    /// ties broken lexicographically.
    pub fn build<I, T, S>(streams: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if min_count == 0 {
            return Err(Error::InvalidConfig("min_count must be at least 1".into()));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for stream in streams {
            for tok in stream {
                let tok = tok.as_ref();
                match counts.get_mut(tok) {
                    Some(c) => *c += 1,
                    None => {
                        counts.insert(tok.to_owned(), 1);
                    }
                }
            }
        }
        let ordered = frequency_order(counts, min_count);
        if ordered.is_empty() {
            return Err(Error::AllWordsFiltered);
        }
        Ok(Self::from_ordered(ordered))
    }

    /// Reassembles a vocabulary from words already in id order.
    pub fn from_ordered(entries: Vec<(String, u64)>) -> Self {
        let mut vocab = Vocabulary::default();
        for (word, count) in entries {
            vocab.push(word, count);
        }
        vocab
    }

    pub(crate) fn push(&mut self, word: String, count: u64) -> u32 {
        let id = self.id_to_word.len() as u32;
        self.word_to_id.insert(word.clone(), id);
        self.id_to_word.push(word);
        self.counts.push(count);
        id
    }

    pub fn len(&self) -> usize {
        self.id_to_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_word.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.word_to_id.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.id_to_word.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, id: u32) -> Option<u64> {
        self.counts.get(id as usize).copied()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn words(&self) -> &[String] {
        &self.id_to_word
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TagDictionary {
    tag_to_id: HashMap<String, u32>,
    id_to_tag: Vec<String>,
}

impl TagDictionary {
    /// Builds the tag dictionary with the same ordering rule as
    /// [`Vocabulary::build`] and no count threshold.
    pub fn build<I, T, S>(tag_lists: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for list in tag_lists {
            for tag in list {
                *counts.entry(tag.as_ref().to_owned()).or_insert(0) += 1;
            }
        }
        let mut dict = TagDictionary::default();
        for (tag, _) in frequency_order(counts, 1) {
            dict.push(tag);
        }
        dict
    }

    pub fn from_ordered<I: IntoIterator<Item = String>>(tags: I) -> Self {
        let mut dict = TagDictionary::default();
        for tag in tags {
            dict.push(tag);
        }
        dict
    }

    pub(crate) fn push(&mut self, tag: String) -> u32 {
        let id = self.id_to_tag.len() as u32;
        self.tag_to_id.insert(tag.clone(), id);
        self.id_to_tag.push(tag);
        id
    }

    pub fn len(&self) -> usize {
        self.id_to_tag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_tag.is_empty()
    }

    pub fn id(&self, tag: &str) -> Option<u32> {
        self.tag_to_id.get(tag).copied()
    }

    pub fn tag(&self, id: u32) -> Option<&str> {
        self.id_to_tag.get(id as usize).map(String::as_str)
    }

    pub fn tags(&self) -> &[String] {
        &self.id_to_tag
    }
}

/// A document encoded against a vocabulary and tag dictionary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedDocument {
    pub doc_id: usize,
    pub words: Vec<u32>,
    pub tags: Vec<u32>,
}

impl TaggedDocument {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Encodes tokens and tag strings. Out-of-vocabulary tokens are dropped;
/// unknown tags are dropped and counted in the second return value.
pub fn encode_document<S: AsRef<str>, T: AsRef<str>>(
    doc_id: usize,
    tokens: &[S],
    tags: &[T],
    vocab: &Vocabulary,
    tagdict: &TagDictionary,
) -> (TaggedDocument, usize) {
    let words = encode_tokens(tokens, vocab);
    let mut ids = Vec::with_capacity(tags.len());
    let mut unknown = 0;
    for tag in tags {
        match tagdict.id(tag.as_ref()) {
            Some(id) if !ids.contains(&id) => ids.push(id),
            Some(_) => {}
            None => unknown += 1,
        }
    }
    (TaggedDocument { doc_id, words, tags: ids }, unknown)
}

pub fn encode_tokens<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Vec<u32> {
    tokens.iter().filter_map(|t| vocab.id(t.as_ref())).collect()
}

/// Half-open position range `[start, end)` of the window around `i`.
#[inline]
pub fn window_bounds(len: usize, i: usize, radius: usize) -> (usize, usize) {
    (i.saturating_sub(radius), (i + radius + 1).min(len))
}

/// Word ids within `radius` positions of `i`, excluding `i` itself.
pub fn context_window(doc: &TaggedDocument, i: usize, radius: usize) -> Vec<u32> {
    let (start, end) = window_bounds(doc.words.len(), i, radius);
    (start..end).filter(|&j| j != i).map(|j| doc.words[j]).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub documents: Vec<TaggedDocument>,
    pub vocabulary: Vocabulary,
    pub tag_dictionary: TagDictionary,
    /// External record ids, positionally aligned with `documents`.
    pub ids: Vec<String>,
}

impl Dataset {
    pub fn from_records(records: &[Record], min_count: u64) -> Result<Self> {
        let tokens: Vec<Vec<String>> = records.iter().map(|r| tokenize(&r.text)).collect();
        let vocabulary = Vocabulary::build(&tokens, min_count)?;
        let tag_dictionary = TagDictionary::build(records.iter().map(|r| &r.tags));
        let documents = tokens
            .iter()
            .zip(records)
            .enumerate()
            .map(|(i, (toks, rec))| encode_document(i, toks, &rec.tags, &vocabulary, &tag_dictionary).0)
            .collect();
        Ok(Dataset {
            documents,
            vocabulary,
            tag_dictionary,
            ids: records.iter().map(|r| r.id.clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

/// Reads a JSONL dataset file. Blank lines are skipped.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn load_dataset(path: impl AsRef<Path>, min_count: u64) -> Result<Dataset> {
    Dataset::from_records(&read_records(path)?, min_count)
}
