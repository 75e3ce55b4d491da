use serde::{Deserialize, Serialize};

use super::{check_items, ModelKind, PredictInput, Recommender, ScoreMatrix};
use crate::error::Result;
use crate::linalg::{gram, spmm, DenseMatrix, SparseBinaryMatrix};

/// Item co-occurrence scoring: `scores = x · XᵀX`.
///
/// The diagonal of the co-occurrence matrix keeps each item's occurrence
/// count, which acts as a popularity prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoocModel {
    pub cooccurrence: DenseMatrix,
}

pub fn cooc_fit(x_train: &SparseBinaryMatrix) -> Result<CoocModel> {
    Ok(CoocModel {
        cooccurrence: gram(x_train)?,
    })
}

impl Recommender for CoocModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Cooc
    }

    fn predict(&self, input: &PredictInput<'_>) -> Result<ScoreMatrix> {
        check_items("cooc predict", self.cooccurrence.n_rows(), input.x_corrupted)?;
        spmm(input.x_corrupted, &self.cooccurrence)
    }
}
