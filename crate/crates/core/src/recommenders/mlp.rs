use serde::{Deserialize, Serialize};

use super::{dense_rows, minibatches, rng_stream, streams, ModelKind, PredictInput, Recommender, ScoreMatrix, TrainConfig};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseBinaryMatrix};
use crate::neural::{bce, Activation, AdamState, Mlp2, Mode};

/// Title-only model: embedded title -> MLP-2 -> sigmoid item scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub net: Mlp2,
}

pub fn mlp_fit(titles_train: &DenseMatrix, x_train: &SparseBinaryMatrix, cfg: &TrainConfig) -> Result<MlpModel> {
    if titles_train.n_rows() != x_train.n_rows() {
        return Err(Error::Shape {
            op: "mlp fit",
            left: titles_train.shape(),
            right: x_train.shape(),
        });
    }
    if titles_train.n_cols() == 0 {
        return Err(Error::InvalidArgument("title-only MLP needs title features".into()));
    }
    let mut init = rng_stream(cfg.seed, streams::INIT);
    let mut rng = rng_stream(cfg.seed, streams::TRAIN);
    let mut net = Mlp2::new(
        [titles_train.n_cols(), cfg.hidden, cfg.hidden, x_train.n_cols()],
        Activation::Sigmoid,
        cfg.dropout,
        &mut init,
    );
    let mut opt = AdamState::new(&net.param_sizes(), cfg.adam);
    for _ in 0..cfg.epochs {
        for batch in minibatches(x_train.n_rows(), cfg.batch_size, &mut rng) {
            let s = titles_train.select_rows(&batch);
            let x = dense_rows(x_train, &batch);
            let (out, cache) = net.forward(&s, Mode::Train, &mut rng)?;
            let (loss, g) = bce(&out, &x)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { phase: "mlp", what: "loss" });
            }
            let (grads, _) = net.backward(&cache.expect("train mode"), &g)?;
            opt.step(&mut net.params_mut(), &grads.slices())?;
        }
    }
    Ok(MlpModel { net })
}

impl Recommender for MlpModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Mlp
    }

    /// Scores depend on the titles only; the item rows are not consulted.
    fn predict(&self, input: &PredictInput<'_>) -> Result<ScoreMatrix> {
        let titles = input
            .titles_test
            .ok_or_else(|| Error::ModelMismatch("title-only MLP needs test titles".into()))?;
        if titles.embedded.n_cols() != self.net.in_dim() {
            return Err(Error::ModelMismatch(format!(
                "title dimension {} differs from fitted {}",
                titles.embedded.n_cols(),
                self.net.in_dim()
            )));
        }
        self.net.predict(&titles.embedded)
    }
}
