use nalgebra::{DMatrix, DVector};

use super::layers::{check_filter_fits, filter_offsets, ordered_sum, softmax_in_place};
use super::EmpiricalMeasure;
use crate::error::{Error, Result};

/// `A = K^T Q / sqrt(d/M)`.
pub fn attention_matrix(q: &DMatrix<f64>, k: &DMatrix<f64>, heads: usize) -> Result<DMatrix<f64>> {
    let d = q.nrows();
    if q.shape() != (d, d) || k.shape() != (d, d) || heads == 0 {
        return Err(Error::Dimension(format!(
            "Q {:?} and K {:?} must be square and equal, with M >= 1",
            q.shape(),
            k.shape()
        )));
    }
    Ok(k.transpose() * q / (d as f64 / heads as f64).sqrt())
}

/// Pushes every atom `x` of `mu` through
/// `G(x) = sum_j exp(x^T A^T y_j) V y_j / sum_j exp(x^T A^T y_j)`.
pub fn mean_field_attention_map(
    mu: &EmpiricalMeasure,
    a: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<EmpiricalMeasure> {
    let d = mu.dim();
    if a.shape() != (d, d) || v.shape() != (d, d) {
        return Err(Error::Dimension(format!(
            "A {:?} and V {:?} must be {d}x{d}",
            a.shape(),
            v.shape()
        )));
    }
    let atoms: Vec<DVector<f64>> = mu
        .atoms()
        .points()
        .map(DVector::from_column_slice)
        .collect();
    let aty: Vec<DVector<f64>> = atoms.iter().map(|y| a.tr_mul(y)).collect();
    let vy: Vec<DVector<f64>> = atoms.iter().map(|y| v * y).collect();
    let mut weights = vec![0.0; atoms.len()];
    mu.push_forward(|x| {
        let x = DVector::from_column_slice(x);
        for (w, aty) in weights.iter_mut().zip(&aty) {
            *w = x.dot(aty);
        }
        softmax_in_place(&mut weights);
        let mut terms = vec![0.0; vy.len()];
        (0..d)
            .map(|r| {
                for ((t, w), vy) in terms.iter_mut().zip(&weights).zip(&vy) {
                    *t = w * vy[r];
                }
                ordered_sum(&mut terms)
            })
            .collect()
    })
}

/// Shared scalar filter of the mean-field convolution. Atoms are single
/// channel responses over a `height x width` grid, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    pub k: usize,
    pub height: usize,
    pub width: usize,
    /// `(2k+1)^2` weights in `filter_offsets` order.
    pub w: Vec<f64>,
    pub b: f64,
}

impl ConvKernel {
    fn apply(&self, y: &[f64]) -> Vec<f64> {
        let (h, wd) = (self.height as isize, self.width as isize);
        let mut out = vec![self.b; y.len()];
        for py in 0..h {
            for px in 0..wd {
                let mut acc = 0.0;
                for (wb, (dy, dx)) in self.w.iter().zip(filter_offsets(self.k)) {
                    let (qy, qx) = (py + dy, px + dx);
                    if qy >= 0 && qy < h && qx >= 0 && qx < wd {
                        acc += wb * y[(qy * wd + qx) as usize];
                    }
                }
                out[(py * wd + px) as usize] += acc;
            }
        }
        out
    }
}

/// Every atom is sent to the average over all channel atoms of
/// `sum_b W_b y(a + b) + b`, zero padded. The map is linear in the atoms
/// (no activation).
pub fn mean_field_conv_map(mu: &EmpiricalMeasure, kernel: &ConvKernel) -> Result<EmpiricalMeasure> {
    let side = 2 * kernel.k + 1;
    if kernel.w.len() != side * side {
        return Err(Error::Dimension(format!(
            "kernel with k = {} needs {} weights, got {}",
            kernel.k,
            side * side,
            kernel.w.len()
        )));
    }
    if mu.dim() != kernel.height * kernel.width {
        return Err(Error::Dimension(format!(
            "atoms of dimension {} do not match a {}x{} grid",
            mu.dim(),
            kernel.height,
            kernel.width
        )));
    }
    check_filter_fits(kernel.k, kernel.height, kernel.width)?;
    let n = mu.len() as f64;
    let mut response = vec![0.0; mu.dim()];
    for y in mu.atoms().points() {
        for (r, v) in response.iter_mut().zip(kernel.apply(y)) {
            *r += v / n;
        }
    }
    mu.push_forward(|_| response.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_interaction_averages() {
        let mu = EmpiricalMeasure::from_points(&[[1.0, 0.0], [3.0, 2.0], [-1.0, 4.0]]).unwrap();
        let v = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]);
        let out = mean_field_attention_map(&mu, &DMatrix::zeros(2, 2), &v).unwrap();
        for p in out.atoms().points() {
            assert!((p[0] - 2.0).abs() < 1e-12 && (p[1] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_atom_goes_to_vy() {
        let mu = EmpiricalMeasure::from_points(&[[0.5, -2.0]]).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, -1.0, 0.2]);
        let v = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]);
        let out = mean_field_attention_map(&mu, &a, &v).unwrap();
        assert_eq!(out.atoms().point(0), &[1.0, -1.5]);
    }

    #[test]
    fn large_scores_do_not_overflow() {
        let mu = EmpiricalMeasure::from_points(&[[30.0], [31.0]]).unwrap();
        let a = DMatrix::from_element(1, 1, 10.0);
        let out = mean_field_attention_map(&mu, &a, &DMatrix::identity(1, 1)).unwrap();
        assert!(out.atoms().as_flat().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn conv_map_examples() {
        let mu = EmpiricalMeasure::from_points(&[[0.5, -1.0, 2.0, 0.0]]).unwrap();
        let id = ConvKernel {
            k: 0,
            height: 2,
            width: 2,
            w: vec![1.0],
            b: 0.0,
        };
        assert_eq!(mean_field_conv_map(&mu, &id).unwrap(), mu);
        let zero = ConvKernel {
            w: vec![0.0],
            b: 0.3,
            ..id.clone()
        };
        let out = mean_field_conv_map(&mu, &zero).unwrap();
        assert!(out.atoms().as_flat().iter().all(|&v| v == 0.3));
        let bad = ConvKernel { w: vec![1.0, 2.0], ..id };
        assert!(mean_field_conv_map(&mu, &bad).is_err());
    }
}
