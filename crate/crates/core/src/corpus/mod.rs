//! Dataset ingestion, time-axis splitting and vocabulary pruning.
//!
//! Two tab-separated UTF-8 files describe a dataset:
//!
//! * ratings: `doc_id<TAB>item_id`, one implicit-feedback pair per line;
//! * meta: `doc_id<TAB>year<TAB>title`.
//!
//! Item ids are opaque strings. A cited document id is never assumed to also
//! appear as a citing document.

mod synth;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::SparseBinaryMatrix;

pub use synth::{generate_synthetic, SynthMode, SynthParams, SyntheticFiles, SYNTH_SPLIT_YEAR};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub year: i32,
    pub title: String,
    /// Distinct item ids in first-seen order.
    pub items: Vec<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, year: i32, title: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            year,
            title: title.into(),
            items: Vec::new(),
        }
    }

    pub fn with_items<I, S>(mut self, items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        for item in items {
            self.add_item(item.into());
        }
        self
    }

    fn add_item(&mut self, item: String) {
        if !self.items.contains(&item) {
            self.items.push(item);
        }
    }
}

/// An ordered collection of documents with a dense item index.
///
/// Every item of every document is present in the index; the index maps
/// item ids onto `0..n_items()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    items: Vec<String>,
    item_index: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus whose item index is assigned in order of first
    /// appearance over `documents`.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::new();
        for d in &documents {
            if !seen.insert(d.doc_id.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate document id {}",
                    d.doc_id
                )));
            }
        }
        let mut items = Vec::new();
        let mut item_index = HashMap::new();
        for d in &documents {
            for it in &d.items {
                if !item_index.contains_key(it) {
                    item_index.insert(it.clone(), items.len());
                    items.push(it.clone());
                }
            }
        }
        Ok(Self {
            documents,
            items,
            item_index,
        })
    }

    /// Corpus over a fixed item vocabulary. Documents must only reference
    /// vocabulary items.
    fn with_vocabulary(documents: Vec<Document>, items: Vec<String>) -> Self {
        let item_index: HashMap<String, usize> = items
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        debug_assert!(documents
            .iter()
            .all(|d| d.items.iter().all(|i| item_index.contains_key(i))));
        Self {
            documents,
            items,
            item_index,
        }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Item ids by column index.
    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn item_column(&self, item: &str) -> Option<usize> {
        self.item_index.get(item).copied()
    }

    pub fn n_nonzeros(&self) -> usize {
        self.documents.iter().map(|d| d.items.len()).sum()
    }

    pub fn titles(&self) -> Vec<&str> {
        self.documents.iter().map(|d| d.title.as_str()).collect()
    }

    pub fn year_range(&self) -> Option<(i32, i32)> {
        let min = self.documents.iter().map(|d| d.year).min()?;
        let max = self.documents.iter().map(|d| d.year).max()?;
        Some((min, max))
    }
}

/// Train/test partition on the publication year.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitCorpus {
    pub train: Corpus,
    pub test: Corpus,
    pub split_year: i32,
}

/// Size statistics of one side of a pruned split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruningReport {
    pub alpha: usize,
    pub n_items: usize,
    pub n_nonzeros: usize,
    pub n_documents: usize,
    pub density: f64,
}

impl PruningReport {
    pub fn new(alpha: usize, n_items: usize, n_nonzeros: usize, n_documents: usize) -> Self {
        let cells = n_items as f64 * n_documents as f64;
        let density = if cells > 0.0 {
            n_nonzeros as f64 / cells
        } else {
            0.0
        };
        Self {
            alpha,
            n_items,
            n_nonzeros,
            n_documents,
            density,
        }
    }

    fn of(alpha: usize, corpus: &Corpus) -> Self {
        Self::new(alpha, corpus.n_items(), corpus.n_nonzeros(), corpus.len())
    }
}

fn read_lines(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_year(s: &str) -> Option<i32> {
    if s.len() == 4 && s.bytes().all(|b| b.is_ascii_digit()) {
        s.parse().ok()
    } else {
        None
    }
}

/// Loads a corpus from a ratings file and a metadata file.
///
/// Documents appear in metadata order; documents without ratings keep an
/// empty item list. Blank lines are ignored.
pub fn load_corpus(ratings_path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<Corpus> {
    let ratings_path = ratings_path.as_ref();
    let meta_path = meta_path.as_ref();
    let meta = read_lines(meta_path)?;
    let ratings = read_lines(ratings_path)?;
    parse_corpus(&ratings, ratings_path, &meta, meta_path)
}

/// Parses file contents already in memory; the paths only label errors.
pub fn parse_corpus(ratings: &str, ratings_path: &Path, meta: &str, meta_path: &Path) -> Result<Corpus> {
    let mut documents = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in meta.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let doc_id = fields.next().unwrap_or_default();
        let year = fields
            .next()
            .ok_or_else(|| parse_error(meta_path, lineno, "expected doc_id<TAB>year<TAB>title"))?;
        let title = fields.next().unwrap_or("");
        if doc_id.is_empty() {
            return Err(parse_error(meta_path, lineno, "empty doc_id"));
        }
        let year = parse_year(year).ok_or_else(|| {
            parse_error(meta_path, lineno, format!("invalid year `{year}` (expected 4 digits)"))
        })?;
        if by_id.contains_key(doc_id) {
            return Err(parse_error(
                meta_path,
                lineno,
                format!("duplicate doc_id `{doc_id}`"),
            ));
        }
        by_id.insert(doc_id.to_string(), documents.len());
        documents.push(Document::new(doc_id, year, title));
    }

    let mut unknown = BTreeSet::new();
    for (lineno, line) in ratings.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(parse_error(
                ratings_path,
                lineno,
                "expected doc_id<TAB>item_id",
            ));
        }
        match by_id.get(fields[0]) {
            Some(&i) => documents[i].add_item(fields[1].to_string()),
            None => {
                unknown.insert(fields[0].to_string());
            }
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownDocuments(unknown.into_iter().collect()));
    }
    Corpus::new(documents)
}

/// Splits documents into `year < split_year` (train) and
/// `year >= split_year` (test), preserving order on both sides.
pub fn time_split(corpus: &Corpus, split_year: i32) -> Result<SplitCorpus> {
    let (train, test): (Vec<Document>, Vec<Document>) = corpus
        .documents
        .iter()
        .cloned()
        .partition(|d| d.year < split_year);
    if train.is_empty() {
        return Err(Error::EmptySplit {
            side: "train",
            split_year,
        });
    }
    if test.is_empty() {
        return Err(Error::EmptySplit {
            side: "test",
            split_year,
        });
    }
    Ok(SplitCorpus {
        train: Corpus::new(train)?,
        test: Corpus::new(test)?,
        split_year,
    })
}

/// Applies the three preprocessing steps:
///
/// 1. the vocabulary is every item occurring in at least `alpha` training
///    documents;
/// 2. both sides keep only vocabulary items;
/// 3. documents left with fewer than two items are removed, on both sides.
///
/// Both returned corpora share the vocabulary as their item index, ordered by
/// first appearance in the training documents.
pub fn prune(
    split: &SplitCorpus,
    alpha: usize,
) -> Result<(SplitCorpus, PruningReport, PruningReport)> {
    if alpha < 1 {
        return Err(Error::InvalidArgument("alpha must be at least 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for d in split.train.documents() {
        for it in &d.items {
            *counts.entry(it.as_str()).or_default() += 1;
        }
    }
    let vocabulary: Vec<String> = split
        .train
        .items()
        .iter()
        .filter(|it| counts.get(it.as_str()).copied().unwrap_or(0) >= alpha)
        .cloned()
        .collect();
    let keep: HashSet<&str> = vocabulary.iter().map(String::as_str).collect();

    let filter = |docs: &[Document]| -> Vec<Document> {
        docs.iter()
            .filter_map(|d| {
                let items: Vec<String> = d
                    .items
                    .iter()
                    .filter(|it| keep.contains(it.as_str()))
                    .cloned()
                    .collect();
                (items.len() >= 2).then(|| Document {
                    items,
                    ..d.clone()
                })
            })
            .collect()
    };
    let train_docs = filter(split.train.documents());
    let test_docs = filter(split.test.documents());
    if train_docs.is_empty() {
        return Err(Error::EmptySplit {
            side: "pruned train",
            split_year: split.split_year,
        });
    }

    let train = Corpus::with_vocabulary(train_docs, vocabulary.clone());
    let test = Corpus::with_vocabulary(test_docs, vocabulary);
    let train_report = PruningReport::of(alpha, &train);
    let test_report = PruningReport::of(alpha, &test);
    Ok((
        SplitCorpus {
            train,
            test,
            split_year: split.split_year,
        },
        train_report,
        test_report,
    ))
}

/// Binary document x item matrix of a corpus.
pub fn to_matrix(corpus: &Corpus) -> SparseBinaryMatrix {
    let mut m = SparseBinaryMatrix::empty(corpus.n_items());
    for d in corpus.documents() {
        let cols: Vec<usize> = d.items.iter().map(|it| corpus.item_index[it]).collect();
        m.push_row(&cols).expect("item index is dense");
    }
    m
}
