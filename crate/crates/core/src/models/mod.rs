//! The three transformer architectures.
//!
//! * encoder-decoder: bidirectional post-norm encoder with ReLU MLPs, a
//!   decoder with causal self-attention, cross-attention and three norms;
//! * encoder-only: post-norm, GELU MLPs, a final projection with GELU and
//!   norm;
//! * decoder-only: pre-norm, causal attention, GELU MLPs, final norm.
//!
//! Parameters live in [`ModelParams`] as a flat, named, ordered list of
//! tensors. A [`Layout`] of indices gives that list its structure; binding
//! the parameters to a [`Tape`] turns it into a `Layout<Var>` that the
//! forward passes consume.

mod hyper;
mod layout;

pub use hyper::{Arch, HyperParams, Positional};
pub use layout::{CrossDecoderLayer, EncoderLayer, Init, Layout, Mlp, ParamSpec, PreNormLayer, Stack};

use crate::error::{Error, Result};
use crate::layers::{self, make_mask, LayerNormParams, MaskKind};
use crate::rng::{Rng, Stream};
use crate::tensor::{Activation, Precision, Tape, Tensor, Var};
use crate::tokenizer::TokenId;

/// Standard deviation of initial weights.
pub const INIT_STD: f64 = 0.02;

/// A complete parameter set θ for one architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    hp: HyperParams,
    specs: Vec<ParamSpec>,
    tensors: Vec<Tensor>,
    layout: Layout<usize>,
}

impl ModelParams {
    /// Weights `~ Normal(0, 0.02²)`, biases and offsets 0, scales 1, drawn
    /// in parameter order from the seed's init stream.
    pub fn init(hp: HyperParams, seed: u64) -> Result<Self> {
        hp.validate()?;
        let (specs, layout) = layout::build(&hp);
        let mut rng = Rng::stream(seed, Stream::Init);
        let tensors = specs
            .iter()
            .map(|s| {
                let (r, c) = s.shape();
                match s.init {
                    Init::Weight => Tensor::randn(r, c, INIT_STD, &mut rng),
                    Init::Zero => Tensor::zeros(r, c),
                    Init::One => Tensor::filled(r, c, 1.0),
                }
            })
            .collect();
        Ok(ModelParams {
            hp,
            specs,
            tensors,
            layout,
        })
    }

    /// Rebuilds θ from named tensors, which must match the architecture's
    /// parameter list exactly (any order).
    pub fn from_named(hp: HyperParams, named: Vec<(String, Tensor)>) -> Result<Self> {
        hp.validate()?;
        let (specs, layout) = layout::build(&hp);
        let mut slots: Vec<Option<Tensor>> = vec![None; specs.len()];
        for (name, t) in named {
            let i = specs
                .iter()
                .position(|s| s.name == name)
                .ok_or_else(|| Error::UnknownTensor(name.clone()))?;
            if slots[i].is_some() {
                return Err(Error::Format(format!("duplicate tensor {name}")));
            }
            if t.shape() != specs[i].shape() {
                return Err(Error::Format(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    t.shape(),
                    specs[i].shape()
                )));
            }
            slots[i] = Some(t);
        }
        let tensors = slots
            .into_iter()
            .zip(&specs)
            .map(|(t, s)| t.ok_or_else(|| Error::MissingTensor(s.name.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelParams {
            hp,
            specs,
            tensors,
            layout,
        })
    }

    pub fn hp(&self) -> &HyperParams {
        &self.hp
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn layout(&self) -> &Layout<usize> {
        &self.layout
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.specs.iter().position(|s| s.name == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.specs
            .iter()
            .position(|s| s.name == name)
            .map(move |i| &mut self.tensors[i])
    }

    /// Total number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Registers every parameter on `tape` as a differentiable leaf.
    pub fn bind<'t>(&self, tape: &'t Tape) -> Result<Bound<'_, 't>> {
        let vars = self
            .tensors
            .iter()
            .map(|t| tape.param(t))
            .collect::<Result<Vec<_>>>()?;
        let layout = self.layout.map(&mut |&i| vars[i]);
        Ok(Bound {
            hp: &self.hp,
            tape,
            vars,
            layout,
        })
    }

    /// Encoder-decoder forward pass on a throwaway tape.
    pub fn ed_forward(&self, z: &[TokenId], x: &[TokenId]) -> Result<Tensor> {
        let tape = Tape::new();
        Ok(self.bind(&tape)?.ed_forward(z, x)?.value())
    }

    pub fn e_forward(&self, x: &[TokenId]) -> Result<Tensor> {
        let tape = Tape::new();
        Ok(self.bind(&tape)?.e_forward(x)?.value())
    }

    pub fn d_forward(&self, x: &[TokenId]) -> Result<Tensor> {
        let tape = Tape::new();
        Ok(self.bind(&tape)?.d_forward(x)?.value())
    }

    /// Like [`Self::d_forward`] with values stored at the given precision.
    pub fn d_forward_with(&self, x: &[TokenId], precision: Precision) -> Result<Tensor> {
        let tape = Tape::with_precision(precision);
        Ok(self.bind(&tape)?.d_forward(x)?.value())
    }
}

/// Parameters registered on a tape.
pub struct Bound<'p, 't> {
    hp: &'p HyperParams,
    tape: &'t Tape,
    /// One leaf per parameter, in [`ModelParams::specs`] order.
    pub vars: Vec<Var<'t>>,
    pub layout: Layout<Var<'t>>,
}

impl<'t> Bound<'_, 't> {
    fn check_arch(&self, arch: Arch) -> Result<()> {
        if self.hp.arch != arch {
            return Err(Error::Contract(format!(
                "{arch:?} forward pass called on {:?} parameters",
                self.hp.arch
            )));
        }
        Ok(())
    }

    /// `W_e[:, x[t]] + W_p[:, t]` for every position, as a `d_e × ℓ` matrix.
    pub fn embed(&self, ids: &[TokenId]) -> Result<Var<'t>> {
        let hp = self.hp;
        if ids.is_empty() {
            return Err(Error::Contract("cannot embed an empty sequence".into()));
        }
        if hp.positional == Positional::Learned && ids.len() > hp.max_len {
            return Err(Error::ContextLength {
                len: ids.len(),
                max: hp.max_len,
            });
        }
        let mut cols = Vec::with_capacity(ids.len());
        for &id in ids {
            if id.0 == 0 || id.0 as usize > hp.vocab_size {
                return Err(Error::TokenRange {
                    id: id.0 as usize,
                    max: hp.vocab_size,
                });
            }
            cols.push(id.index());
        }
        let tokens = self.layout.w_e.gather_columns(&cols)?;
        let positions = match self.layout.w_p {
            Some(w_p) => w_p.gather_columns(&(0..ids.len()).collect::<Vec<_>>())?,
            None => self
                .tape
                .constant(&layers::sinusoidal_table(hp.d_e, hp.max_len, ids.len())?)?,
        };
        tokens.add(positions)
    }

    fn unembedding(&self) -> Result<Var<'t>> {
        match self.layout.w_u {
            Some(w_u) => Ok(w_u),
            None => self.layout.w_e.transpose(),
        }
    }

    fn mlp(x: Var<'t>, p: &Mlp<Var<'t>>, act: Activation) -> Result<Var<'t>> {
        let hidden = p.w_in.matmul(x)?.add_column(p.b_in)?.activate(act)?;
        p.w_out.matmul(hidden)?.add_column(p.b_out)
    }

    fn encoder_block(x: Var<'t>, layer: &EncoderLayer<Var<'t>>, act: Activation) -> Result<Var<'t>> {
        let len = x.shape().1;
        let all = make_mask(len, len, MaskKind::Bidirectional)?;
        let x = x.add(layers::mh_attention(x, x, &layer.attn, &all)?)?;
        let x = layers::layer_norm(x, &layer.norm1)?;
        let x = x.add(Self::mlp(x, &layer.mlp, act)?)?;
        layers::layer_norm(x, &layer.norm2)
    }

    /// Returns `P` (`N_V × ℓ_x`), column `t` predicting `x[t+1]`
    /// from `x[1..=t]` and all of `z`.
    pub fn ed_forward(&self, z: &[TokenId], x: &[TokenId]) -> Result<Var<'t>> {
        self.check_arch(Arch::EncoderDecoder)?;
        let Stack::EncoderDecoder { encoder, decoder } = &self.layout.stack else {
            unreachable!("layout matches arch");
        };
        let mut zm = self.embed(z)?;
        for layer in encoder {
            zm = Self::encoder_block(zm, layer, Activation::Relu)?;
        }

        let mut xm = self.embed(x)?;
        let (lz, lx) = (z.len(), x.len());
        let causal = make_mask(lx, lx, MaskKind::Unidirectional)?;
        let cross = make_mask(lz, lx, MaskKind::Bidirectional)?;
        for layer in decoder {
            xm = xm.add(layers::mh_attention(xm, xm, &layer.self_attn, &causal)?)?;
            xm = layers::layer_norm(xm, &layer.norm3)?;
            xm = xm.add(layers::mh_attention(xm, zm, &layer.cross_attn, &cross)?)?;
            xm = layers::layer_norm(xm, &layer.norm4)?;
            xm = xm.add(Self::mlp(xm, &layer.mlp, Activation::Relu)?)?;
            xm = layers::layer_norm(xm, &layer.norm5)?;
        }
        layers::unembed(xm, self.unembedding()?)
    }

    /// One vocabulary distribution per position of `x`.
    pub fn e_forward(&self, x: &[TokenId]) -> Result<Var<'t>> {
        self.check_arch(Arch::Encoder)?;
        let Stack::Encoder {
            layers: blocks,
            w_f,
            b_f,
            final_norm,
        } = &self.layout.stack
        else {
            unreachable!("layout matches arch");
        };
        let mut xm = self.embed(x)?;
        for layer in blocks {
            xm = Self::encoder_block(xm, layer, Activation::Gelu)?;
        }
        let xm = w_f.matmul(xm)?.add_column(*b_f)?.gelu()?;
        let xm = layers::layer_norm(xm, final_norm)?;
        layers::unembed(xm, self.unembedding()?)
    }

    /// Returns `P` (`N_V × ℓ`), column `t` predicting `x[t+1]`
    /// from `x[1..=t]`.
    pub fn d_forward(&self, x: &[TokenId]) -> Result<Var<'t>> {
        self.check_arch(Arch::Decoder)?;
        let Stack::Decoder {
            layers: blocks,
            final_norm,
        } = &self.layout.stack
        else {
            unreachable!("layout matches arch");
        };
        let mut xm = self.embed(x)?;
        let causal = make_mask(x.len(), x.len(), MaskKind::Unidirectional)?;
        for layer in blocks {
            let normed = layers::layer_norm(xm, &layer.norm1)?;
            xm = xm.add(layers::mh_attention(normed, normed, &layer.attn, &causal)?)?;
            let normed = layers::layer_norm(xm, &layer.norm2)?;
            xm = xm.add(Self::mlp(normed, &layer.mlp, Activation::Gelu)?)?;
        }
        let xm = layers::layer_norm(xm, final_norm)?;
        layers::unembed(xm, self.unembedding()?)
    }

    /// Final layer norm parameters, if the architecture has them.
    pub fn final_norm(&self) -> Option<&LayerNormParams<Var<'t>>> {
        match &self.layout.stack {
            Stack::Encoder { final_norm, .. } | Stack::Decoder { final_norm, .. } => Some(final_norm),
            Stack::EncoderDecoder { .. } => None,
        }
    }
}
