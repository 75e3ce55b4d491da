//! The five recommendation models behind a shared fit/predict contract.
//!
//! | model | items | titles |
//! |-------|-------|--------|
//! | [`CoocModel`] | yes | ignored |
//! | [`SvdModel`] | yes | TF-IDF columns appended before factorizing |
//! | [`MlpModel`] | ignored | embedded bag-of-words input |
//! | [`AeModel`] | encoder input | concatenated to the code |
//! | [`AaeModel`] | encoder input | concatenated to the code |

mod autoencoder;
mod cooc;
mod mlp;
mod svd;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseBinaryMatrix};
use crate::neural::{AdamConfig, DEFAULT_DROPOUT, DEFAULT_HIDDEN};
use crate::textfeat::TitleFeatures;

pub use autoencoder::{aae_fit, aae_fit_with, ae_fit, ae_fit_with, AaeModel, AeModel, EpochObserver, TrainLog};
pub use cooc::{cooc_fit, CoocModel};
pub use mlp::{mlp_fit, MlpModel};
pub use svd::{svd_fit, SvdModel, DEFAULT_SVD_RANK};

/// Dense `m_test x n` item scores.
pub type ScoreMatrix = DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cooc,
    Svd,
    Mlp,
    Ae,
    Aae,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Cooc,
        ModelKind::Svd,
        ModelKind::Mlp,
        ModelKind::Ae,
        ModelKind::Aae,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Cooc => "cooc",
            ModelKind::Svd => "svd",
            ModelKind::Mlp => "mlp",
            ModelKind::Ae => "ae",
            ModelKind::Aae => "aae",
        }
    }

    /// Whether the model can run under `modality`.
    pub fn supports(self, modality: Modality) -> bool {
        match self {
            ModelKind::Mlp => modality.uses_titles(),
            _ => modality.uses_items(),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown model `{s}` (valid: cooc, svd, mlp, ae, aae)"
                ))
            })
    }
}

/// Which inputs a model receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Items,
    Titles,
    Both,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Items => "items",
            Modality::Titles => "titles",
            Modality::Both => "both",
        }
    }

    pub fn uses_items(self) -> bool {
        matches!(self, Modality::Items | Modality::Both)
    }

    pub fn uses_titles(self) -> bool {
        matches!(self, Modality::Titles | Modality::Both)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "items" => Ok(Modality::Items),
            "titles" => Ok(Modality::Titles),
            "both" => Ok(Modality::Both),
            other => Err(Error::InvalidArgument(format!(
                "unknown modality `{other}` (valid: items, titles, both)"
            ))),
        }
    }
}

/// Training data: the full item rows plus optional title features.
#[derive(Debug, Clone, Copy)]
pub struct FitInput<'a> {
    pub x_train: &'a SparseBinaryMatrix,
    pub titles_train: Option<&'a TitleFeatures>,
}

/// Corrupted test rows plus optional title features.
#[derive(Debug, Clone, Copy)]
pub struct PredictInput<'a> {
    pub x_corrupted: &'a SparseBinaryMatrix,
    pub titles_test: Option<&'a TitleFeatures>,
}

/// Hyperparameters shared by the neural models and SVD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub code_dim: usize,
    pub dropout: f64,
    pub adam: AdamConfig,
    pub svd_rank: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 100,
            hidden: DEFAULT_HIDDEN,
            code_dim: 50,
            dropout: DEFAULT_DROPOUT,
            adam: AdamConfig::default(),
            svd_rank: DEFAULT_SVD_RANK,
            seed: 0,
        }
    }
}

/// Anything that scores corrupted test rows.
pub trait Recommender {
    fn kind(&self) -> ModelKind;

    fn predict(&self, input: &PredictInput<'_>) -> Result<ScoreMatrix>;
}

/// A fitted model of any kind. Serializes to the checkpoint format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum Model {
    Cooc(CoocModel),
    Svd(SvdModel),
    Mlp(MlpModel),
    Ae(AeModel),
    Aae(AaeModel),
}

impl Recommender for Model {
    fn kind(&self) -> ModelKind {
        match self {
            Model::Cooc(_) => ModelKind::Cooc,
            Model::Svd(_) => ModelKind::Svd,
            Model::Mlp(_) => ModelKind::Mlp,
            Model::Ae(_) => ModelKind::Ae,
            Model::Aae(_) => ModelKind::Aae,
        }
    }

    fn predict(&self, input: &PredictInput<'_>) -> Result<ScoreMatrix> {
        match self {
            Model::Cooc(m) => m.predict(input),
            Model::Svd(m) => m.predict(input),
            Model::Mlp(m) => m.predict(input),
            Model::Ae(m) => m.predict(input),
            Model::Aae(m) => m.predict(input),
        }
    }
}

/// Fits `kind` under `modality`. Titles are passed on only when the modality
/// includes them.
pub fn fit_model(
    kind: ModelKind,
    modality: Modality,
    input: &FitInput<'_>,
    cfg: &TrainConfig,
) -> Result<Model> {
    if !kind.supports(modality) {
        return Err(Error::InvalidArgument(format!(
            "model {kind} cannot run with modality {modality}"
        )));
    }
    let titles = if modality.uses_titles() {
        Some(input.titles_train.ok_or_else(|| {
            Error::InvalidArgument(format!("model {kind} with modality {modality} needs titles"))
        })?)
    } else {
        None
    };
    Ok(match kind {
        ModelKind::Cooc => Model::Cooc(cooc_fit(input.x_train)?),
        ModelKind::Svd => Model::Svd(svd_fit(
            input.x_train,
            titles.map(|t| &t.tfidf_sparse),
            cfg.svd_rank,
            cfg.seed,
        )?),
        ModelKind::Mlp => Model::Mlp(mlp_fit(
            &titles.expect("checked above").embedded,
            input.x_train,
            cfg,
        )?),
        ModelKind::Ae => Model::Ae(ae_fit(input.x_train, titles.map(|t| &t.embedded), cfg)?),
        ModelKind::Aae => Model::Aae(aae_fit(input.x_train, titles.map(|t| &t.embedded), cfg)?),
    })
}

const CHECKPOINT_FORMAT: &str = "aaerec-checkpoint/1";

/// Self-describing checkpoint: every tensor is stored with its shape, next to
/// the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: TrainConfig,
    pub modality: Modality,
    pub model: Model,
}

impl Checkpoint {
    pub fn new(model: Model, modality: Modality, config: TrainConfig) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            config,
            modality,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut ck: Checkpoint =
            serde_json::from_str(s).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format `{}`", ck.format)));
        }
        if let Model::Svd(m) = &mut ck.model {
            m.after_load();
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Dense copy of selected rows of a binary matrix.
pub(crate) fn dense_rows(x: &SparseBinaryMatrix, rows: &[usize]) -> DenseMatrix {
    let mut d = DenseMatrix::zeros(rows.len(), x.n_cols());
    for (r, &i) in rows.iter().enumerate() {
        let out = d.row_mut(r);
        for &c in x.row(i) {
            out[c] = 1.0;
        }
    }
    d
}

/// Independent random streams of one fit, so that adding a component never
/// shifts the draws of another.
pub(crate) mod streams {
    pub const INIT: u64 = 0;
    pub const DISC_INIT: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const ADVERSARIAL: u64 = 3;
}

pub(crate) fn rng_stream(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Shuffled minibatches of row indices; the last partial batch is kept.
pub(crate) fn minibatches<R: rand::Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

pub(crate) fn check_items(op: &'static str, expected: usize, x: &SparseBinaryMatrix) -> Result<()> {
    if x.n_cols() != expected {
        return Err(Error::Shape {
            op,
            left: (x.n_rows(), x.n_cols()),
            right: (0, expected),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
        let err = "gcn".parse::<ModelKind>().unwrap_err().to_string();
        assert!(err.contains("cooc, svd, mlp, ae, aae"));
    }

    #[test]
    fn modality_support() {
        assert!(!ModelKind::Mlp.supports(Modality::Items));
        assert!(ModelKind::Mlp.supports(Modality::Both));
        assert!(!ModelKind::Ae.supports(Modality::Titles));
        assert!(ModelKind::Cooc.supports(Modality::Both));
    }
}
