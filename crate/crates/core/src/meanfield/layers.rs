//! Discrete layers: attention, layer and batch normalization, MLP, the Pre-LN
//! Transformer block, 2-D convolution and the ResNet bottleneck block.
//!
//! Sequences are `d x N` matrices with one token per column. Feature maps are
//! `C x (H W)` matrices with one channel per row, positions in row-major
//! `(y, x)` order.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_param, Error, Result};

fn shape_err(what: &str, expected: (usize, usize), got: (usize, usize)) -> Error {
    Error::Dimension(format!(
        "{what}: expected {}x{}, got {}x{}",
        expected.0, expected.1, got.0, got.1
    ))
}

fn check_shape(what: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(shape_err(what, (rows, cols), m.shape()));
    }
    Ok(())
}

fn check_len(what: &str, v: &DVector<f64>, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::Dimension(format!(
            "{what}: expected length {len}, got {}",
            v.len()
        )));
    }
    Ok(())
}

/// Sum that does not depend on the order of `terms`, so token permutations
/// permute attention outputs exactly.
pub(crate) fn ordered_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

/// In-place softmax with max-subtraction.
pub(crate) fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
    }
    let total = ordered_sum(&mut xs.to_vec());
    for x in xs.iter_mut() {
        *x /= total;
    }
}

/// `N x N` attention weights; row `i` holds `softmax_j(x_i^T Q^T K x_j / sqrt(d/M))`.
pub fn attention_weights(
    x: &DMatrix<f64>,
    q: &DMatrix<f64>,
    k: &DMatrix<f64>,
    heads: usize,
) -> Result<DMatrix<f64>> {
    let d = x.nrows();
    check_shape("Q", q, d, d)?;
    check_shape("K", k, d, d)?;
    ensure_param(heads >= 1, || "head count must be >= 1".into())?;
    let temperature = (d as f64 / heads as f64).sqrt();
    let qx = q * x;
    let kx = k * x;
    let mut scores = qx.transpose() * kx;
    scores /= temperature;
    let n = x.ncols();
    for i in 0..n {
        let mut row: Vec<f64> = scores.row(i).iter().copied().collect();
        softmax_in_place(&mut row);
        for (j, w) in row.into_iter().enumerate() {
            scores[(i, j)] = w;
        }
    }
    Ok(scores)
}

/// Single attention head: column `i` is `sum_j P_ij V x_j`.
pub fn single_head_attention(
    x: &DMatrix<f64>,
    q: &DMatrix<f64>,
    k: &DMatrix<f64>,
    v: &DMatrix<f64>,
    heads: usize,
) -> Result<DMatrix<f64>> {
    check_shape("V", v, x.nrows(), x.nrows())?;
    let p = attention_weights(x, q, k, heads)?;
    let vx = v * x;
    let (d, n) = x.shape();
    let mut terms = vec![0.0; n];
    Ok(DMatrix::from_fn(d, n, |r, i| {
        for (j, t) in terms.iter_mut().enumerate() {
            *t = p[(i, j)] * vx[(r, j)];
        }
        ordered_sum(&mut terms)
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttnWeights {
    pub q: Vec<DMatrix<f64>>,
    pub k: Vec<DMatrix<f64>>,
    pub v: Vec<DMatrix<f64>>,
    /// `d x (M d)` output projection.
    pub wo: DMatrix<f64>,
}

impl AttnWeights {
    pub fn zeros(d: usize, heads: usize) -> Self {
        let z = DMatrix::zeros(d, d);
        Self {
            q: vec![z.clone(); heads],
            k: vec![z.clone(); heads],
            v: vec![z; heads],
            wo: DMatrix::zeros(d, heads * d),
        }
    }

    pub fn heads(&self) -> usize {
        self.q.len()
    }

    pub fn dim(&self) -> usize {
        self.wo.nrows()
    }

    fn validate(&self) -> Result<()> {
        let (m, d) = (self.heads(), self.dim());
        if m == 0 || self.k.len() != m || self.v.len() != m {
            return Err(Error::Dimension(format!(
                "need the same positive number of Q, K and V matrices, got {}, {}, {}",
                self.q.len(),
                self.k.len(),
                self.v.len()
            )));
        }
        check_shape("W^O", &self.wo, d, m * d)
    }
}

/// `W^O` applied to the per-token concatenation of all heads.
pub fn multi_head_attention(x: &DMatrix<f64>, w: &AttnWeights) -> Result<DMatrix<f64>> {
    w.validate()?;
    let (d, n, m) = (x.nrows(), x.ncols(), w.heads());
    if d != w.dim() {
        return Err(shape_err("X", (w.dim(), n), (d, n)));
    }
    let mut stacked = DMatrix::zeros(m * d, n);
    for h in 0..m {
        let head = single_head_attention(x, &w.q[h], &w.k[h], &w.v[h], m)?;
        stacked.rows_mut(h * d, d).copy_from(&head);
    }
    Ok(&w.wo * stacked)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormParams {
    pub gamma: DVector<f64>,
    pub beta: DVector<f64>,
    /// Added to the standard deviation before dividing.
    pub eps: f64,
}

impl NormParams {
    pub const DEFAULT_EPS: f64 = 1e-5;

    pub fn identity(len: usize) -> Self {
        Self {
            gamma: DVector::from_element(len, 1.0),
            beta: DVector::zeros(len),
            eps: Self::DEFAULT_EPS,
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            gamma: DVector::zeros(len),
            beta: DVector::zeros(len),
            eps: Self::DEFAULT_EPS,
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        check_len("gamma", &self.gamma, len)?;
        check_len("beta", &self.beta, len)?;
        ensure_param(self.eps >= 0.0, || "eps must be non-negative".into())
    }
}

fn mean_std<'a>(xs: impl ExactSizeIterator<Item = &'a f64> + Clone) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn normalize(x: f64, mean: f64, std: f64, eps: f64) -> f64 {
    let centered = x - mean;
    if centered == 0.0 {
        0.0
    } else {
        centered / (std + eps)
    }
}

/// `(x - mean(x)) / (std(x) + eps) * gamma + beta`.
pub fn layer_norm(x: &DVector<f64>, p: &NormParams) -> Result<DVector<f64>> {
    p.check(x.len())?;
    let (mean, std) = mean_std(x.iter());
    Ok(DVector::from_fn(x.len(), |i, _| {
        normalize(x[i], mean, std, p.eps) * p.gamma[i] + p.beta[i]
    }))
}

/// Layer norm of every column.
pub fn layer_norm_columns(x: &DMatrix<f64>, p: &NormParams) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for (j, col) in x.column_iter().enumerate() {
        out.set_column(j, &layer_norm(&col.into_owned(), p)?);
    }
    Ok(out)
}

/// Batch norm over the columns: each row (feature) is normalized with the
/// mean and standard deviation it has across the batch.
pub fn batch_norm(x: &DMatrix<f64>, p: &NormParams) -> Result<DMatrix<f64>> {
    p.check(x.nrows())?;
    let mut out = x.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let values: Vec<f64> = row.iter().copied().collect();
        let (mean, std) = mean_std(values.iter());
        for (o, &v) in row.iter_mut().zip(&values) {
            *o = normalize(v, mean, std, p.eps) * p.gamma[i] + p.beta[i];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpWeights {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

impl MlpWeights {
    pub fn zeros(d: usize, hidden: usize) -> Self {
        Self {
            w1: DMatrix::zeros(hidden, d),
            b1: DVector::zeros(hidden),
            w2: DMatrix::zeros(d, hidden),
            b2: DVector::zeros(d),
        }
    }
}

/// `W2 relu(W1 x + b1) + b2`.
pub fn mlp(x: &DVector<f64>, w: &MlpWeights) -> Result<DVector<f64>> {
    let hidden = w.w1.nrows();
    check_shape("W1", &w.w1, hidden, x.len())?;
    check_len("b1", &w.b1, hidden)?;
    check_shape("W2", &w.w2, w.w2.nrows(), hidden)?;
    check_len("b2", &w.b2, w.w2.nrows())?;
    let h = (&w.w1 * x + &w.b1).map(|v| v.max(0.0));
    Ok(&w.w2 * h + &w.b2)
}

pub fn mlp_columns(x: &DMatrix<f64>, w: &MlpWeights) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(w.w2.nrows(), x.ncols());
    for (j, col) in x.column_iter().enumerate() {
        out.set_column(j, &mlp(&col.into_owned(), w)?);
    }
    Ok(out)
}

/// `MLP(LN2(X + A)) + A + X` with `A = MHAttn(LN1(X))`.
pub fn pre_ln_block(
    x: &DMatrix<f64>,
    attn: &AttnWeights,
    mlp_w: &MlpWeights,
    ln1: &NormParams,
    ln2: &NormParams,
) -> Result<DMatrix<f64>> {
    let a = multi_head_attention(&layer_norm_columns(x, ln1)?, attn)?;
    let inner = x + &a;
    let m = mlp_columns(&layer_norm_columns(&inner, ln2)?, mlp_w)?;
    if m.shape() != x.shape() {
        return Err(shape_err("MLP output", x.shape(), m.shape()));
    }
    Ok(m + a + x)
}

/// `C x (H W)` feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub values: DMatrix<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, values: DMatrix<f64>) -> Result<Self> {
        if height == 0 || width == 0 || values.ncols() != height * width {
            return Err(Error::Dimension(format!(
                "feature map {height}x{width} needs {} columns, got {}",
                height * width,
                values.ncols()
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn channels(&self) -> usize {
        self.values.nrows()
    }
}

/// One `C x C` matrix per filter offset; offset index is
/// `(dy + k) * (2k+1) + (dx + k)`. Entry `(i, c)` weights input channel `c`
/// into output channel `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub k: usize,
    pub w: Vec<DMatrix<f64>>,
    pub b: DVector<f64>,
}

impl ConvWeights {
    pub fn zeros(channels: usize, k: usize) -> Self {
        let side = 2 * k + 1;
        Self {
            k,
            w: vec![DMatrix::zeros(channels, channels); side * side],
            b: DVector::zeros(channels),
        }
    }

    pub fn channels(&self) -> usize {
        self.b.len()
    }
}

/// Offsets `(dy, dx)` of a `(2k+1) x (2k+1)` filter in weight order.
pub fn filter_offsets(k: usize) -> impl Iterator<Item = (isize, isize)> {
    let k = k as isize;
    (-k..=k).flat_map(move |dy| (-k..=k).map(move |dx| (dy, dx)))
}

pub(crate) fn check_filter_fits(k: usize, height: usize, width: usize) -> Result<()> {
    ensure_param(2 * k < height.min(width), || {
        format!(
            "filter {side}x{side} larger than the {height}x{width} image",
            side = 2 * k + 1
        )
    })
}

/// `out_i(a) = sum_b sum_c W[b]_{ic} relu(y_c(a + b)) + b_i`, zero padded so
/// the spatial size is kept.
pub fn conv_layer(y: &FeatureMap, w: &ConvWeights) -> Result<FeatureMap> {
    let c = y.channels();
    let side = 2 * w.k + 1;
    if w.channels() != c || w.w.len() != side * side {
        return Err(Error::Dimension(format!(
            "conv weights for {} channels and k = {} do not fit a {c}-channel input",
            w.channels(),
            w.k
        )));
    }
    for m in &w.w {
        check_shape("filter matrix", m, c, c)?;
    }
    check_filter_fits(w.k, y.height, y.width)?;
    let (h, wd) = (y.height as isize, y.width as isize);
    let act = y.values.map(|v| v.max(0.0));
    let mut out = DMatrix::zeros(c, y.height * y.width);
    for py in 0..h {
        for px in 0..wd {
            let pos = (py * wd + px) as usize;
            let mut acc = w.b.clone();
            for (m, (dy, dx)) in w.w.iter().zip(filter_offsets(w.k)) {
                let (qy, qx) = (py + dy, px + dx);
                if qy < 0 || qy >= h || qx < 0 || qx >= wd {
                    continue;
                }
                acc += m * act.column((qy * wd + qx) as usize);
            }
            out.set_column(pos, &acc);
        }
    }
    FeatureMap::new(y.height, y.width, out)
}

/// Batch norm of a feature map, per channel over the spatial positions.
pub fn batch_norm_map(y: &FeatureMap, p: &NormParams) -> Result<FeatureMap> {
    FeatureMap::new(y.height, y.width, batch_norm(&y.values, p)?)
}

/// `X + Conv3(BN3(Conv2(BN2(Conv1(BN1(X))))))`.
pub fn bottleneck_block(
    x: &FeatureMap,
    convs: &[ConvWeights; 3],
    norms: &[NormParams; 3],
) -> Result<FeatureMap> {
    let mut h = x.clone();
    for (conv, bn) in convs.iter().zip(norms) {
        h = conv_layer(&batch_norm_map(&h, bn)?, conv)?;
    }
    FeatureMap::new(x.height, x.width, &x.values + h.values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = mat(2, 3, &[0.3, -1.0, 2.0, 0.5, 0.1, -0.7]);
        let q = mat(2, 2, &[1.0, 2.0, -0.5, 0.3]);
        let k = mat(2, 2, &[0.2, 0.1, 0.4, -1.0]);
        let p = attention_weights(&x, &q, &k, 1).unwrap();
        for row in p.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn single_token_attention_is_v() {
        let x = mat(2, 1, &[0.3, -1.2]);
        let q = mat(2, 2, &[1.0, 2.0, -0.5, 0.3]);
        let v = mat(2, 2, &[0.5, 0.0, 1.0, 2.0]);
        let out = single_head_attention(&x, &q, &q, &v, 1).unwrap();
        assert_eq!(out, &v * &x);
    }

    #[test]
    fn zero_scores_average_tokens() {
        let x = mat(2, 3, &[0.0, 3.0, 6.0, 1.0, 1.0, 4.0]);
        let z = DMatrix::zeros(2, 2);
        let v = DMatrix::identity(2, 2);
        let out = single_head_attention(&x, &z, &z, &v, 1).unwrap();
        for col in out.column_iter() {
            assert!((col[0] - 3.0).abs() < 1e-12 && (col[1] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn multi_head_reductions() {
        let x = mat(2, 3, &[0.3, -1.0, 2.0, 0.5, 0.1, -0.7]);
        let q = mat(2, 2, &[1.0, 2.0, -0.5, 0.3]);
        let k = mat(2, 2, &[0.2, 0.1, 0.4, -1.0]);
        let v = mat(2, 2, &[0.5, 0.0, 1.0, 2.0]);
        let w = AttnWeights {
            q: vec![q.clone()],
            k: vec![k.clone()],
            v: vec![v.clone()],
            wo: DMatrix::identity(2, 2),
        };
        assert_eq!(
            multi_head_attention(&x, &w).unwrap(),
            single_head_attention(&x, &q, &k, &v, 1).unwrap()
        );
        let zero_out = AttnWeights {
            wo: DMatrix::zeros(2, 2),
            ..w
        };
        assert_eq!(multi_head_attention(&x, &zero_out).unwrap(), DMatrix::zeros(2, 3));
    }

    #[test]
    fn layer_norm_examples() {
        let mut p = NormParams::identity(2);
        p.eps = 0.0;
        let out = layer_norm(&DVector::from_vec(vec![1.0, -1.0]), &p).unwrap();
        assert_eq!(out.as_slice(), &[1.0, -1.0]);
        let p = NormParams {
            gamma: DVector::zeros(3),
            beta: DVector::from_vec(vec![0.5, 1.0, -2.0]),
            eps: 1e-5,
        };
        let out = layer_norm(&DVector::from_vec(vec![4.0, -3.0, 0.1]), &p).unwrap();
        assert_eq!(out, p.beta);
        let q = NormParams {
            gamma: DVector::from_element(3, 2.0),
            ..p.clone()
        };
        assert_eq!(layer_norm(&DVector::from_element(3, 7.0), &q).unwrap(), p.beta);
    }

    #[test]
    fn batch_norm_examples() {
        let mut p = NormParams::identity(1);
        p.eps = 0.0;
        let out = batch_norm(&mat(1, 2, &[-1.0, 1.0]), &p).unwrap();
        assert_eq!(out, mat(1, 2, &[-1.0, 1.0]));
        let p = NormParams {
            gamma: DVector::from_element(2, 3.0),
            beta: DVector::from_vec(vec![0.25, -1.0]),
            eps: 1e-5,
        };
        let out = batch_norm(&mat(2, 3, &[2.0, 2.0, 2.0, -5.0, -5.0, -5.0]), &p).unwrap();
        assert_eq!(out, mat(2, 3, &[0.25, 0.25, 0.25, -1.0, -1.0, -1.0]));
    }

    #[test]
    fn mlp_examples() {
        let x = DVector::from_vec(vec![0.5, 2.0]);
        assert_eq!(mlp(&x, &MlpWeights::zeros(2, 5)).unwrap(), DVector::zeros(2));
        let id = MlpWeights {
            w1: DMatrix::identity(2, 2),
            b1: DVector::zeros(2),
            w2: DMatrix::identity(2, 2),
            b2: DVector::zeros(2),
        };
        assert_eq!(mlp(&x, &id).unwrap(), x);
    }

    #[test]
    fn conv_examples() {
        let y = FeatureMap::new(2, 2, mat(1, 4, &[0.5, 1.0, 2.0, 0.0])).unwrap();
        let mut w = ConvWeights::zeros(1, 0);
        w.w[0][(0, 0)] = 1.0;
        assert_eq!(conv_layer(&y, &w).unwrap(), y);
        let mut zero = ConvWeights::zeros(1, 0);
        zero.b[0] = 0.7;
        assert!(conv_layer(&y, &zero).unwrap().values.iter().all(|&v| v == 0.7));
        assert!(matches!(conv_layer(&y, &ConvWeights::zeros(1, 1)), Err(Error::Parameter(_))));
    }

    #[test]
    fn zero_parameter_blocks_are_identity() {
        let x = mat(3, 4, &[0.3, -1.0, 2.0, 0.5, 0.1, -0.7, 1.5, 2.5, -0.2, 0.0, 0.9, -3.0]);
        let out = pre_ln_block(
            &x,
            &AttnWeights::zeros(3, 2),
            &MlpWeights::zeros(3, 12),
            &NormParams::zeros(3),
            &NormParams::zeros(3),
        )
        .unwrap();
        assert_eq!(out, x);
        let y = FeatureMap::new(2, 2, mat(3, 4, x.as_slice())).unwrap();
        let convs = [
            ConvWeights::zeros(3, 0),
            ConvWeights::zeros(3, 0),
            ConvWeights::zeros(3, 0),
        ];
        let norms = [NormParams::zeros(3), NormParams::zeros(3), NormParams::zeros(3)];
        assert_eq!(bottleneck_block(&y, &convs, &norms).unwrap(), y);
    }
}
