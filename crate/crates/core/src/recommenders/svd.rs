use serde::{Deserialize, Serialize};

use super::{check_items, ModelKind, PredictInput, Recommender, ScoreMatrix};
use crate::error::{Error, Result};
use crate::linalg::{truncated_svd, DenseMatrix, SparseBinaryMatrix, SparseMatrix};

/// Upper bound on the number of singular values kept.
pub const DEFAULT_SVD_RANK: usize = 1000;

/// Truncated SVD of `[X | tfidf]`. Test rows are projected onto the top-k
/// right singular subspace and reconstructed; only item columns are scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdModel {
    /// `k x (n_items + title_dim)`
    pub vt: DenseMatrix,
    pub sigma: Vec<f64>,
    pub n_items: usize,
    pub title_dim: Option<usize>,
    #[serde(skip)]
    vt_items: Option<DenseMatrix>,
}

fn concat_rows(x: &SparseBinaryMatrix, titles: Option<&SparseMatrix>) -> Result<DenseMatrix> {
    let n = x.n_cols();
    let extra = titles.map_or(0, SparseMatrix::n_cols);
    let mut d = DenseMatrix::zeros_checked(x.n_rows(), n + extra)?;
    for (i, row) in x.rows().enumerate() {
        let out = d.row_mut(i);
        for &c in row {
            out[c] = 1.0;
        }
        if let Some(t) = titles {
            let (cols, vals) = t.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[n + c] = v;
            }
        }
    }
    Ok(d)
}

/// Factorizes the training rows (with TF-IDF title columns appended when
/// given). The rank is clipped to the matrix dimensions.
pub fn svd_fit(
    x_train: &SparseBinaryMatrix,
    titles_train: Option<&SparseMatrix>,
    rank: usize,
    seed: u64,
) -> Result<SvdModel> {
    if let Some(t) = titles_train {
        if t.n_rows() != x_train.n_rows() {
            return Err(Error::Shape {
                op: "svd fit titles",
                left: x_train.shape(),
                right: (t.n_rows(), t.n_cols()),
            });
        }
    }
    let m = concat_rows(x_train, titles_train)?;
    let k = rank.min(m.n_rows()).min(m.n_cols());
    if k == 0 {
        return Err(Error::InvalidArgument("SVD needs a non-empty training matrix".into()));
    }
    let f = truncated_svd(&m, k, seed)?;
    let mut model = SvdModel {
        vt: f.vt,
        sigma: f.sigma,
        n_items: x_train.n_cols(),
        title_dim: titles_train.map(SparseMatrix::n_cols),
        vt_items: None,
    };
    model.after_load();
    Ok(model)
}

impl SvdModel {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub(crate) fn after_load(&mut self) {
        self.vt_items = Some(self.vt.slice_cols(0..self.n_items));
    }
}

impl Recommender for SvdModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Svd
    }

    fn predict(&self, input: &PredictInput<'_>) -> Result<ScoreMatrix> {
        check_items("svd predict", self.n_items, input.x_corrupted)?;
        let titles = match (self.title_dim, input.titles_test) {
            (None, _) => None,
            (Some(_), None) => {
                return Err(Error::ModelMismatch(
                    "multi-modal SVD needs test title features".into(),
                ))
            }
            (Some(d), Some(t)) if t.tfidf_sparse.n_cols() != d => {
                return Err(Error::ModelMismatch(format!(
                    "title dimension {} differs from fitted {d}",
                    t.tfidf_sparse.n_cols()
                )))
            }
            (Some(_), Some(t)) => Some(&t.tfidf_sparse),
        };
        let rows = concat_rows(input.x_corrupted, titles)?;
        let code = rows.matmul_t(&self.vt)?;
        let vt_items = match &self.vt_items {
            Some(v) => std::borrow::Cow::Borrowed(v),
            None => std::borrow::Cow::Owned(self.vt.slice_cols(0..self.n_items)),
        };
        let mut scores = code.matmul(&vt_items)?;
        // round-off left by V·Vᵀ would otherwise decide the order of items
        // whose exact score is zero
        let tol = ROUNDOFF * scores.values().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for v in scores.values_mut() {
            if v.abs() <= tol {
                *v = 0.0;
            }
        }
        Ok(scores)
    }
}

const ROUNDOFF: f64 = 1e-10;
