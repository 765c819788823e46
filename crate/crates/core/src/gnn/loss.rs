use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// `Σ_i w_i · (−log softmax(logits_i)[label_i])` over the given
/// `(row, weight)` pairs, with its gradient with respect to `logits`.
pub fn weighted_cross_entropy(
    logits: ArrayView2<'_, f64>,
    labels: &[usize],
    rows: &[(usize, f64)],
) -> Result<(f64, Array2<f64>)> {
    let (n, c) = logits.dim();
    if labels.len() != n {
        return Err(Error::shape("cross entropy", format!("{n} labels"), labels.len()));
    }
    let mut grad = Array2::zeros((n, c));
    let mut loss = 0.0;
    for &(i, w) in rows {
        if i >= n {
            return Err(Error::InvalidArgument(format!("row {i} outside 0..{n}")));
        }
        let y = labels[i];
        if y >= c {
            return Err(Error::InvalidArgument(format!("label {y} of row {i} outside 0..{c}")));
        }
        let row = logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += w * (log_z - row[y]);
        let mut g = grad.row_mut(i);
        for (k, &v) in row.iter().enumerate() {
            g[k] += w * (v - log_z).exp();
        }
        g[y] -= w;
    }
    Ok((loss, grad))
}

/// Mean cross-entropy over `mask`; the gradient is `(softmax − onehot)/|mask|`
/// on masked rows and zero elsewhere.
pub fn softmax_cross_entropy(
    logits: ArrayView2<'_, f64>,
    labels: &[usize],
    mask: &[usize],
) -> Result<(f64, Array2<f64>)> {
    if mask.is_empty() {
        return Err(Error::InvalidArgument("cross entropy over an empty mask".into()));
    }
    let w = 1.0 / mask.len() as f64;
    let rows: Vec<(usize, f64)> = mask.iter().map(|&i| (i, w)).collect();
    weighted_cross_entropy(logits, labels, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn uniform_two_way() {
        let (loss, g) = softmax_cross_entropy(arr2(&[[0.0, 0.0]]).view(), &[0], &[0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(g, arr2(&[[-0.5, 0.5]]));
    }

    #[test]
    fn saturates_to_zero() {
        let (loss, g) = softmax_cross_entropy(arr2(&[[800.0, -800.0, 0.0]]).view(), &[0], &[0]).unwrap();
        assert!(loss.abs() < 1e-300);
        assert!(g.iter().all(|v| v.abs() < 1e-300));
    }

    #[test]
    fn unmasked_rows_have_zero_gradient() {
        let logits = arr2(&[[1.0, 2.0], [3.0, -1.0]]);
        let (_, g) = softmax_cross_entropy(logits.view(), &[1, 0], &[1]).unwrap();
        assert_eq!(g.row(0).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn empty_mask_is_error() {
        assert!(softmax_cross_entropy(arr2(&[[0.0]]).view(), &[0], &[]).is_err());
    }
}
