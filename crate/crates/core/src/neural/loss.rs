use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Predictions are clamped to `[BCE_EPSILON, 1 - BCE_EPSILON]`.
pub const BCE_EPSILON: f64 = 1e-7;

/// Mean binary cross-entropy over all elements and its gradient with respect
/// to `pred`.
pub fn bce(pred: &DenseMatrix, target: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape {
            op: "bce",
            left: pred.shape(),
            right: target.shape(),
        });
    }
    let n = pred.values().len().max(1) as f64;
    let mut grad = DenseMatrix::zeros(pred.n_rows(), pred.n_cols());
    let mut loss = 0.0;
    for ((g, &p), &t) in grad
        .values_mut()
        .iter_mut()
        .zip(pred.values())
        .zip(target.values())
    {
        let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
        loss -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        *g = (-t / p + (1.0 - t) / (1.0 - p)) / n;
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> DenseMatrix {
        DenseMatrix::from_rows(rows)
    }

    #[test]
    fn perfect_prediction() {
        let (loss, _) = bce(&m(&[vec![1.0, 0.0]]), &m(&[vec![1.0, 0.0]])).unwrap();
        assert!(loss <= 1.2e-7, "{loss}");
    }

    #[test]
    fn half_everywhere_is_ln2() {
        let (loss, _) = bce(&m(&[vec![0.5, 0.5], vec![0.5, 0.5]]), &m(&[vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn gradient_of_single_element() {
        let (_, g) = bce(&m(&[vec![0.5]]), &m(&[vec![1.0]])).unwrap();
        assert!((g.get(0, 0) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        assert!(bce(&DenseMatrix::zeros(1, 2), &DenseMatrix::zeros(2, 1)).is_err());
    }
}
