//! Title featurization: tokenization, TF-IDF and TF-IDF weighted bags of
//! embedded words.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};

/// Lowercases and splits on every non-alphanumeric character. Single digits
/// are dropped.
pub fn tokenize(title: &str) -> Vec<String> {
    title
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .filter(|t| !(t.chars().count() == 1 && t.chars().all(|c| c.is_ascii_digit())))
        .map(str::to_lowercase)
        .collect()
}

pub fn tokenize_all<S: AsRef<str>>(titles: &[S]) -> Vec<Vec<String>> {
    titles.iter().map(|t| tokenize(t.as_ref())).collect()
}

/// Smoothed TF-IDF fitted on training titles.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    vocab: Vec<String>,
    word_index: HashMap<String, usize>,
    idf: Vec<f64>,
    n_train_docs: usize,
}

impl TfidfModel {
    /// `idf(t) = ln((1 + N) / (1 + df(t))) + 1` over the given titles.
    pub fn fit(train_titles: &[Vec<String>]) -> Self {
        let mut vocab = Vec::new();
        let mut word_index = HashMap::new();
        let mut df: Vec<usize> = Vec::new();
        for title in train_titles {
            let mut seen = std::collections::HashSet::new();
            for tok in title {
                let idx = *word_index.entry(tok.clone()).or_insert_with(|| {
                    vocab.push(tok.clone());
                    df.push(0);
                    vocab.len() - 1
                });
                if seen.insert(idx) {
                    df[idx] += 1;
                }
            }
        }
        let n = train_titles.len() as f64;
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        Self {
            vocab,
            word_index,
            idf,
            n_train_docs: train_titles.len(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn n_train_docs(&self) -> usize {
        self.n_train_docs
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.word_index.get(token).copied()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.column(token).map(|i| self.idf[i])
    }

    /// L2-normalized `(column, tf * idf)` pairs of one title, sorted by
    /// column. Out-of-vocabulary tokens are dropped.
    pub fn weights(&self, tokens: &[String]) -> Vec<(usize, f64)> {
        let mut tf: HashMap<usize, f64> = HashMap::new();
        for tok in tokens {
            if let Some(i) = self.column(tok) {
                *tf.entry(i).or_default() += 1.0;
            }
        }
        let mut w: Vec<(usize, f64)> = tf.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect();
        w.sort_by_key(|&(i, _)| i);
        let norm = w.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in &mut w {
                *v /= norm;
            }
        }
        w
    }

    pub fn transform(&self, titles: &[Vec<String>]) -> SparseMatrix {
        let mut m = SparseMatrix::empty(self.vocab.len());
        for t in titles {
            m.push_row(&self.weights(t)).expect("columns come from the vocabulary");
        }
        m
    }
}

/// Fits TF-IDF on training titles only.
pub fn fit_tfidf(train_titles: &[Vec<String>]) -> TfidfModel {
    TfidfModel::fit(train_titles)
}

pub fn transform_tfidf(model: &TfidfModel, titles: &[Vec<String>]) -> SparseMatrix {
    model.transform(titles)
}

#[derive(Debug, Clone, PartialEq)]
enum EmbeddingSource {
    Table(HashMap<String, Vec<f64>>),
    Hash { seed: u64 },
}

/// Word vectors, either loaded from a word2vec text file or generated on
/// demand from a seeded hash of the token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    source: EmbeddingSource,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

impl EmbeddingTable {
    /// Deterministic unit-norm vectors keyed on `(token, seed)`.
    pub fn hashed(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            source: EmbeddingSource::Hash { seed },
        }
    }

    pub fn from_vectors(dim: usize, vectors: HashMap<String, Vec<f64>>) -> Result<Self> {
        for (w, v) in &vectors {
            if v.len() != dim || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "embedding for `{w}` must have {dim} finite entries"
                )));
            }
        }
        Ok(Self {
            dim,
            source: EmbeddingSource::Table(vectors),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored vectors; `None` for hashed tables.
    pub fn n_vectors(&self) -> Option<usize> {
        match &self.source {
            EmbeddingSource::Table(t) => Some(t.len()),
            EmbeddingSource::Hash { .. } => None,
        }
    }

    pub fn get(&self, token: &str) -> Option<Vec<f64>> {
        match &self.source {
            EmbeddingSource::Table(t) => t.get(token).cloned(),
            EmbeddingSource::Hash { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(*seed, token.as_bytes()));
                let mut v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    v.iter_mut().for_each(|x| *x /= norm);
                }
                Some(v)
            }
        }
    }

    /// Canonical selector string for hashed tables.
    pub fn selector(&self) -> Option<String> {
        match self.source {
            EmbeddingSource::Hash { seed } => Some(format!("builtin:hash:{}:{seed}", self.dim)),
            EmbeddingSource::Table(_) => None,
        }
    }
}

fn parse_builtin(spec: &str) -> Result<EmbeddingTable> {
    let bad = || {
        Error::InvalidArgument(format!(
            "bad embedding selector `{spec}` (expected builtin:hash:<dim>:<seed>)"
        ))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 4 || parts[1] != "hash" {
        return Err(bad());
    }
    let dim: usize = parts[2].parse().map_err(|_| bad())?;
    let seed: u64 = parts[3].parse().map_err(|_| bad())?;
    if dim == 0 {
        return Err(bad());
    }
    Ok(EmbeddingTable::hashed(dim, seed))
}

/// Loads embeddings from `builtin:hash:<dim>:<seed>` or a word2vec text file
/// (`n_words dim` header, then `word v1 .. v_dim` per line).
pub fn load_embeddings(spec: &str) -> Result<EmbeddingTable> {
    if spec.starts_with("builtin:") {
        return parse_builtin(spec);
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| perr(1, "missing `n_words dim` header".into()))?;
    let header: Vec<&str> = header.split_whitespace().collect();
    let (n_words, dim) = match header.as_slice() {
        [n, d] => (
            n.parse::<usize>().map_err(|_| perr(1, "bad word count".into()))?,
            d.parse::<usize>().map_err(|_| perr(1, "bad dimension".into()))?,
        ),
        _ => return Err(perr(1, "header must be `n_words dim`".into())),
    };
    let mut vectors = HashMap::with_capacity(n_words);
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().unwrap();
        let values: Vec<f64> = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| perr(lineno, format!("bad value: {e}")))?;
        if values.len() != dim {
            return Err(perr(
                lineno,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(perr(lineno, "non-finite value".into()));
        }
        vectors.insert(word.to_string(), values);
    }
    if vectors.len() != n_words {
        return Err(perr(
            1,
            format!("header announces {n_words} words, file has {}", vectors.len()),
        ));
    }
    EmbeddingTable::from_vectors(dim, vectors)
}

/// TF-IDF weighted sum of word vectors per title, L2-normalized. Titles
/// without any in-vocabulary embedded token give zero rows.
pub fn embed_titles(tfidf: &TfidfModel, emb: &EmbeddingTable, titles: &[Vec<String>]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(titles.len(), emb.dim());
    let mut cache: HashMap<usize, Option<Vec<f64>>> = HashMap::new();
    for (r, title) in titles.iter().enumerate() {
        let row = out.row_mut(r);
        for (col, w) in tfidf.weights(title) {
            let vec = cache
                .entry(col)
                .or_insert_with(|| emb.get(&tfidf.vocab[col]));
            if let Some(v) = vec {
                for (o, x) in row.iter_mut().zip(v.iter()) {
                    *o += w * x;
                }
            }
        }
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
    out
}

/// Side information for a set of documents.
#[derive(Debug, Clone, PartialEq)]
pub struct TitleFeatures {
    pub tfidf_sparse: SparseMatrix,
    pub embedded: DenseMatrix,
}

impl TitleFeatures {
    pub fn n_rows(&self) -> usize {
        self.embedded.n_rows()
    }
}

/// A fitted TF-IDF model paired with an embedding table.
#[derive(Debug, Clone)]
pub struct TitleFeaturizer {
    pub tfidf: TfidfModel,
    pub embeddings: EmbeddingTable,
}

impl TitleFeaturizer {
    pub fn fit<S: AsRef<str>>(train_titles: &[S], embeddings: EmbeddingTable) -> Self {
        Self {
            tfidf: fit_tfidf(&tokenize_all(train_titles)),
            embeddings,
        }
    }

    pub fn transform<S: AsRef<str>>(&self, titles: &[S]) -> TitleFeatures {
        let tokens = tokenize_all(titles);
        TitleFeatures {
            tfidf_sparse: self.tfidf.transform(&tokens),
            embedded: embed_titles(&self.tfidf, &self.embeddings, &tokens),
        }
    }
}
