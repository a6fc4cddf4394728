//! Transformer building blocks.
//!
//! Graph-level functions take parameters as tape variables
//! (`AttentionHeadParams<Var>` and friends). The parameter structs are
//! generic so the same shape can hold owned tensors, tape variables, or
//! indices into a flat parameter list.

use crate::error::{Error, Result};
use crate::tensor::{NormMode, Tensor, Var};
use crate::tokenizer::TokenId;

/// ε added to the variance (or mean square) under the square root.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Query, key and value projections of one attention head.
///
/// Shapes: `w_q: d_attn × d_x`, `w_k: d_attn × d_z`, `w_v: d_out × d_z`;
/// biases are columns of matching height.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHeadParams<T> {
    pub w_q: T,
    pub b_q: T,
    pub w_k: T,
    pub b_k: T,
    pub w_v: T,
    pub b_v: T,
}

impl<T> AttentionHeadParams<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> AttentionHeadParams<U> {
        AttentionHeadParams {
            w_q: f(&self.w_q),
            b_q: f(&self.b_q),
            w_k: f(&self.w_k),
            b_k: f(&self.b_k),
            w_v: f(&self.w_v),
            b_v: f(&self.b_v),
        }
    }
}

/// Multi-head attention parameters: `H` heads with value width `d_mid`,
/// and the output projection `w_o: d_out × H·d_mid`, `b_o: d_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct MhaParams<T> {
    pub heads: Vec<AttentionHeadParams<T>>,
    pub w_o: T,
    pub b_o: T,
}

impl<T> MhaParams<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> MhaParams<U> {
        MhaParams {
            heads: self.heads.iter().map(|h| h.map(f)).collect(),
            w_o: f(&self.w_o),
            b_o: f(&self.b_o),
        }
    }
}

impl MhaParams<Tensor> {
    /// Checks that heads agree in shape and the output projection fits them.
    pub fn validate(&self) -> Result<()> {
        let first = self
            .heads
            .first()
            .ok_or_else(|| Error::Contract("multi-head attention needs at least one head".into()))?;
        for h in &self.heads {
            let same = h.w_q.shape() == first.w_q.shape()
                && h.w_k.shape() == first.w_k.shape()
                && h.w_v.shape() == first.w_v.shape()
                && h.b_q.shape() == first.b_q.shape()
                && h.b_k.shape() == first.b_k.shape()
                && h.b_v.shape() == first.b_v.shape();
            if !same {
                return Err(Error::Contract("attention heads differ in shape".into()));
            }
        }
        let stacked = self.heads.len() * first.w_v.rows();
        if self.w_o.cols() != stacked || self.b_o.shape() != (self.w_o.rows(), 1) {
            return Err(Error::Shape {
                op: "mh_attention output projection",
                left: self.w_o.shape(),
                right: (stacked, 1),
            });
        }
        Ok(())
    }
}

/// Scale `gamma` and offset `beta` (absent in RMS mode).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams<T> {
    pub gamma: T,
    pub beta: Option<T>,
}

impl<T> LayerNormParams<T> {
    pub fn mode(&self) -> NormMode {
        if self.beta.is_some() {
            NormMode::Standard
        } else {
            NormMode::Rms
        }
    }

    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> LayerNormParams<U> {
        LayerNormParams {
            gamma: f(&self.gamma),
            beta: self.beta.as_ref().map(&mut *f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Bidirectional,
    Unidirectional,
}

/// Boolean `ℓ_z × ℓ_x` attention mask; `true` lets context position `t_z`
/// be seen from primary position `t_x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    z_len: usize,
    x_len: usize,
    keep: Vec<bool>,
}

impl Mask {
    /// Arbitrary mask, row-major over `(t_z, t_x)`.
    pub fn new(z_len: usize, x_len: usize, keep: Vec<bool>) -> Result<Self> {
        if keep.len() != z_len * x_len {
            return Err(Error::Contract(format!(
                "mask data has {} entries for {z_len}×{x_len}",
                keep.len()
            )));
        }
        Ok(Mask { z_len, x_len, keep })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.z_len, self.x_len)
    }

    /// Zero-based lookup.
    pub fn get(&self, t_z: usize, t_x: usize) -> bool {
        self.keep[t_z * self.x_len + t_x]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.keep
    }
}

/// Bidirectional: all ones. Unidirectional: `Mask[t_z, t_x] = [t_z ≤ t_x]`,
/// which needs `ℓ_z = ℓ_x`.
pub fn make_mask(z_len: usize, x_len: usize, kind: MaskKind) -> Result<Mask> {
    if z_len == 0 || x_len == 0 {
        return Err(Error::Contract("mask dimensions must be positive".into()));
    }
    let keep = match kind {
        MaskKind::Bidirectional => vec![true; z_len * x_len],
        MaskKind::Unidirectional => {
            if z_len != x_len {
                return Err(Error::Contract(format!(
                    "unidirectional mask needs equal lengths, got {z_len} and {x_len}"
                )));
            }
            (0..z_len * x_len).map(|i| i / x_len <= i % x_len).collect()
        }
    };
    Mask::new(z_len, x_len, keep)
}

/// Column `v` of the token embedding matrix `w_e: d_e × N_V`.
pub fn token_embed(v: TokenId, w_e: &Tensor) -> Result<Vec<f64>> {
    if v.0 == 0 || v.0 as usize > w_e.cols() {
        return Err(Error::TokenRange {
            id: v.0 as usize,
            max: w_e.cols(),
        });
    }
    Ok(w_e.column(v.index()))
}

/// Column `t` (one-based) of a learned positional matrix `w_p: d_e × ℓ_max`.
pub fn positional_embed(t: usize, w_p: &Tensor) -> Result<Vec<f64>> {
    if t == 0 || t > w_p.cols() {
        return Err(Error::ContextLength {
            len: t,
            max: w_p.cols(),
        });
    }
    Ok(w_p.column(t - 1))
}

/// Hard-coded embedding of position `t ≥ 1`:
/// rows `2i−1, 2i` hold `sin, cos (t / ℓ_max^{2i/d_e})` for `0 < i ≤ d_e/2`.
pub fn sinusoidal_embed(t: usize, d_e: usize, max_len: usize) -> Result<Vec<f64>> {
    if d_e == 0 || d_e % 2 != 0 {
        return Err(Error::HyperParams(format!(
            "sinusoidal embedding needs an even width, got {d_e}"
        )));
    }
    if t == 0 {
        return Err(Error::Contract("positions are one-based".into()));
    }
    let mut e = vec![0.0; d_e];
    for i in 1..=d_e / 2 {
        let angle = t as f64 / (max_len as f64).powf(2.0 * i as f64 / d_e as f64);
        e[2 * i - 2] = angle.sin();
        e[2 * i - 1] = angle.cos();
    }
    Ok(e)
}

/// `d_e × len` matrix of sinusoidal embeddings for positions `1..=len`.
pub fn sinusoidal_table(d_e: usize, max_len: usize, len: usize) -> Result<Tensor> {
    let cols = (1..=len)
        .map(|t| sinusoidal_embed(t, d_e, max_len))
        .collect::<Result<Vec<_>>>()?;
    if cols.is_empty() {
        return Ok(Tensor::zeros(d_e, 0));
    }
    Tensor::from_columns(&cols)
}

/// One query attending over a context, computed directly with loops.
///
/// `q = W_q e + b_q`, `k_t = W_k e_t + b_k`, `v_t = W_v e_t + b_v`,
/// `α = softmax_t(qᵀk_t / √d_attn)`, result `Σ_t α_t v_t`.
pub fn single_query_attention(e: &[f64], context: &[Vec<f64>], params: &AttentionHeadParams<Tensor>) -> Result<Vec<f64>> {
    if context.is_empty() {
        return Err(Error::Contract("single-query attention needs a context".into()));
    }
    let affine = |w: &Tensor, b: &Tensor, x: &[f64]| -> Result<Vec<f64>> {
        if w.cols() != x.len() || b.shape() != (w.rows(), 1) {
            return Err(Error::Shape {
                op: "single_query_attention",
                left: w.shape(),
                right: (x.len(), 1),
            });
        }
        Ok((0..w.rows())
            .map(|r| b.data()[r] + (0..w.cols()).map(|c| w.get(r, c) * x[c]).sum::<f64>())
            .collect())
    };
    let d_attn = params.w_q.rows();
    let q = affine(&params.w_q, &params.b_q, e)?;
    let mut scores = Vec::with_capacity(context.len());
    let mut values = Vec::with_capacity(context.len());
    for et in context {
        let k = affine(&params.w_k, &params.b_k, et)?;
        values.push(affine(&params.w_v, &params.b_v, et)?);
        let dot: f64 = q.iter().zip(&k).map(|(a, b)| a * b).sum();
        scores.push(dot / (d_attn as f64).sqrt());
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut out = vec![0.0; params.w_v.rows()];
    for (w, v) in weights.iter().zip(&values) {
        for (o, vi) in out.iter_mut().zip(v) {
            *o += w / total * vi;
        }
    }
    Ok(out)
}

/// One masked attention head: `V · softmax(mask(KᵀQ) / √d_attn)`.
///
/// `x` is the primary sequence (`d_x × ℓ_x`), `z` the context
/// (`d_z × ℓ_z`); the result is `d_out × ℓ_x`.
pub fn attention<'t>(x: Var<'t>, z: Var<'t>, params: &AttentionHeadParams<Var<'t>>, mask: &Mask) -> Result<Var<'t>> {
    let (_, x_len) = x.shape();
    let (_, z_len) = z.shape();
    if mask.shape() != (z_len, x_len) {
        return Err(Error::Shape {
            op: "attention mask",
            left: mask.shape(),
            right: (z_len, x_len),
        });
    }
    let d_attn = params.w_q.shape().0;
    let q = params.w_q.matmul(x)?.add_column(params.b_q)?;
    let k = params.w_k.matmul(z)?.add_column(params.b_k)?;
    let v = params.w_v.matmul(z)?.add_column(params.b_v)?;
    let s = k.transpose()?.matmul(q)?;
    let s = s.mask_fill(mask.as_slice())?;
    let a = s.scale(1.0 / (d_attn as f64).sqrt())?.softmax_columns()?;
    v.matmul(a)
}

/// Multi-head attention: heads stacked vertically, then `W_o Y + b_o 1ᵀ`.
pub fn mh_attention<'t>(x: Var<'t>, z: Var<'t>, params: &MhaParams<Var<'t>>, mask: &Mask) -> Result<Var<'t>> {
    let heads = params
        .heads
        .iter()
        .map(|h| attention(x, z, h, mask))
        .collect::<Result<Vec<_>>>()?;
    let y = Var::concat_rows(&heads)?;
    params.w_o.matmul(y)?.add_column(params.b_o)
}

/// Layer norm applied to every column of `x`.
pub fn layer_norm<'t>(x: Var<'t>, params: &LayerNormParams<Var<'t>>) -> Result<Var<'t>> {
    x.layer_norm_columns(params.gamma, params.beta, params.mode(), LAYER_NORM_EPS)
}

/// `softmax(W_u X)` column-wise: one distribution over the vocabulary per
/// column of `x`.
pub fn unembed<'t>(x: Var<'t>, w_u: Var<'t>) -> Result<Var<'t>> {
    w_u.matmul(x)?.softmax_columns()
}
