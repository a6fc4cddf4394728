use super::hyper::{Arch, HyperParams};
use crate::layers::{AttentionHeadParams, LayerNormParams, MhaParams};
use crate::tensor::NormMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Small Gaussian.
    Weight,
    Zero,
    One,
}

/// Name, dimensions and initializer of one parameter tensor. `dims` has
/// one entry for vectors and two for matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub dims: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    /// Storage shape; vectors are columns.
    pub fn shape(&self) -> (usize, usize) {
        match self.dims[..] {
            [d] => (d, 1),
            [r, c] => (r, c),
            _ => unreachable!("parameters are rank 1 or 2"),
        }
    }
}

/// Two-layer MLP `W_out · act(W_in · X + b_in) + b_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub w_in: T,
    pub b_in: T,
    pub w_out: T,
    pub b_out: T,
}

impl<T> Mlp<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Mlp<U> {
        Mlp {
            w_in: f(&self.w_in),
            b_in: f(&self.b_in),
            w_out: f(&self.w_out),
            b_out: f(&self.b_out),
        }
    }
}

/// Post-norm encoder block.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer<T> {
    pub attn: MhaParams<T>,
    pub norm1: LayerNormParams<T>,
    pub mlp: Mlp<T>,
    pub norm2: LayerNormParams<T>,
}

impl<T> EncoderLayer<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> EncoderLayer<U> {
        EncoderLayer {
            attn: self.attn.map(f),
            norm1: self.norm1.map(f),
            mlp: self.mlp.map(f),
            norm2: self.norm2.map(f),
        }
    }
}

/// Encoder-decoder decoder block.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossDecoderLayer<T> {
    pub self_attn: MhaParams<T>,
    pub norm3: LayerNormParams<T>,
    pub cross_attn: MhaParams<T>,
    pub norm4: LayerNormParams<T>,
    pub mlp: Mlp<T>,
    pub norm5: LayerNormParams<T>,
}

impl<T> CrossDecoderLayer<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> CrossDecoderLayer<U> {
        CrossDecoderLayer {
            self_attn: self.self_attn.map(f),
            norm3: self.norm3.map(f),
            cross_attn: self.cross_attn.map(f),
            norm4: self.norm4.map(f),
            mlp: self.mlp.map(f),
            norm5: self.norm5.map(f),
        }
    }
}

/// Pre-norm decoder-only block.
#[derive(Debug, Clone, PartialEq)]
pub struct PreNormLayer<T> {
    pub norm1: LayerNormParams<T>,
    pub attn: MhaParams<T>,
    pub norm2: LayerNormParams<T>,
    pub mlp: Mlp<T>,
}

impl<T> PreNormLayer<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> PreNormLayer<U> {
        PreNormLayer {
            norm1: self.norm1.map(f),
            attn: self.attn.map(f),
            norm2: self.norm2.map(f),
            mlp: self.mlp.map(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stack<T> {
    EncoderDecoder {
        encoder: Vec<EncoderLayer<T>>,
        decoder: Vec<CrossDecoderLayer<T>>,
    },
    Encoder {
        layers: Vec<EncoderLayer<T>>,
        w_f: T,
        b_f: T,
        final_norm: LayerNormParams<T>,
    },
    Decoder {
        layers: Vec<PreNormLayer<T>>,
        final_norm: LayerNormParams<T>,
    },
}

/// Structure of θ. `w_p` is absent with sinusoidal positions and `w_u`
/// when the unembedding is tied to `W_e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout<T> {
    pub w_e: T,
    pub w_p: Option<T>,
    pub stack: Stack<T>,
    pub w_u: Option<T>,
}

impl<T> Layout<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Layout<U> {
        let w_e = f(&self.w_e);
        let w_p = self.w_p.as_ref().map(&mut *f);
        let stack = match &self.stack {
            Stack::EncoderDecoder { encoder, decoder } => Stack::EncoderDecoder {
                encoder: encoder.iter().map(|l| l.map(f)).collect(),
                decoder: decoder.iter().map(|l| l.map(f)).collect(),
            },
            Stack::Encoder {
                layers,
                w_f,
                b_f,
                final_norm,
            } => Stack::Encoder {
                layers: layers.iter().map(|l| l.map(f)).collect(),
                w_f: f(w_f),
                b_f: f(b_f),
                final_norm: final_norm.map(f),
            },
            Stack::Decoder { layers, final_norm } => Stack::Decoder {
                layers: layers.iter().map(|l| l.map(f)).collect(),
                final_norm: final_norm.map(f),
            },
        };
        let w_u = self.w_u.as_ref().map(f);
        Layout { w_e, w_p, stack, w_u }
    }
}

struct Builder {
    specs: Vec<ParamSpec>,
    norm: NormMode,
}

impl Builder {
    fn push(&mut self, name: String, dims: &[usize], init: Init) -> usize {
        self.specs.push(ParamSpec {
            name,
            dims: dims.to_vec(),
            init,
        });
        self.specs.len() - 1
    }

    fn weight(&mut self, name: String, rows: usize, cols: usize) -> usize {
        self.push(name, &[rows, cols], Init::Weight)
    }

    fn bias(&mut self, name: String, d: usize) -> usize {
        self.push(name, &[d], Init::Zero)
    }

    fn norm(&mut self, prefix: &str, d: usize) -> LayerNormParams<usize> {
        let gamma = self.push(format!("{prefix}.gamma"), &[d], Init::One);
        let beta = match self.norm {
            NormMode::Standard => Some(self.push(format!("{prefix}.beta"), &[d], Init::Zero)),
            NormMode::Rms => None,
        };
        LayerNormParams { gamma, beta }
    }

    fn mha(&mut self, prefix: &str, hp: &HyperParams) -> MhaParams<usize> {
        let heads = (1..=hp.heads)
            .map(|h| {
                let p = format!("{prefix}.head{h}");
                AttentionHeadParams {
                    w_q: self.weight(format!("{p}.W_q"), hp.d_attn, hp.d_e),
                    b_q: self.bias(format!("{p}.b_q"), hp.d_attn),
                    w_k: self.weight(format!("{p}.W_k"), hp.d_attn, hp.d_e),
                    b_k: self.bias(format!("{p}.b_k"), hp.d_attn),
                    w_v: self.weight(format!("{p}.W_v"), hp.d_mid, hp.d_e),
                    b_v: self.bias(format!("{p}.b_v"), hp.d_mid),
                }
            })
            .collect();
        MhaParams {
            heads,
            w_o: self.weight(format!("{prefix}.W_o"), hp.d_e, hp.heads * hp.d_mid),
            b_o: self.bias(format!("{prefix}.b_o"), hp.d_e),
        }
    }

    fn mlp(&mut self, prefix: &str, names: [&str; 2], hp: &HyperParams) -> Mlp<usize> {
        let [a, b] = names;
        Mlp {
            w_in: self.weight(format!("{prefix}.W_{a}"), hp.d_mlp, hp.d_e),
            b_in: self.bias(format!("{prefix}.b_{a}"), hp.d_mlp),
            w_out: self.weight(format!("{prefix}.W_{b}"), hp.d_e, hp.d_mlp),
            b_out: self.bias(format!("{prefix}.b_{b}"), hp.d_e),
        }
    }

    fn encoder_layer(&mut self, prefix: &str, hp: &HyperParams) -> EncoderLayer<usize> {
        EncoderLayer {
            attn: self.mha(&format!("{prefix}.attn"), hp),
            norm1: self.norm(&format!("{prefix}.ln1"), hp.d_e),
            mlp: self.mlp(&format!("{prefix}.mlp"), ["1", "2"], hp),
            norm2: self.norm(&format!("{prefix}.ln2"), hp.d_e),
        }
    }
}

/// Parameter list in canonical order plus its structure.
pub(super) fn build(hp: &HyperParams) -> (Vec<ParamSpec>, Layout<usize>) {
    let mut b = Builder {
        specs: Vec::new(),
        norm: hp.norm,
    };
    let w_e = b.weight("W_e".into(), hp.d_e, hp.vocab_size);
    let w_p = match hp.positional {
        super::Positional::Learned => Some(b.weight("W_p".into(), hp.d_e, hp.max_len)),
        super::Positional::Sinusoidal => None,
    };
    let stack = match hp.arch {
        Arch::EncoderDecoder => {
            let encoder = (1..=hp.layers)
                .map(|l| b.encoder_layer(&format!("enc{l}"), hp))
                .collect();
            let decoder = (1..=hp.dec_layers)
                .map(|l| {
                    let p = format!("dec{l}");
                    CrossDecoderLayer {
                        self_attn: b.mha(&format!("{p}.self_attn"), hp),
                        norm3: b.norm(&format!("{p}.ln3"), hp.d_e),
                        cross_attn: b.mha(&format!("{p}.cross_attn"), hp),
                        norm4: b.norm(&format!("{p}.ln4"), hp.d_e),
                        mlp: b.mlp(&format!("{p}.mlp"), ["3", "4"], hp),
                        norm5: b.norm(&format!("{p}.ln5"), hp.d_e),
                    }
                })
                .collect();
            Stack::EncoderDecoder { encoder, decoder }
        }
        Arch::Encoder => {
            let layers = (1..=hp.layers)
                .map(|l| b.encoder_layer(&format!("layer{l}"), hp))
                .collect();
            Stack::Encoder {
                layers,
                w_f: b.weight("W_f".into(), hp.d_f, hp.d_e),
                b_f: b.bias("b_f".into(), hp.d_f),
                final_norm: b.norm("ln_f", hp.d_f),
            }
        }
        Arch::Decoder => {
            let layers = (1..=hp.layers)
                .map(|l| {
                    let p = format!("layer{l}");
                    PreNormLayer {
                        norm1: b.norm(&format!("{p}.ln1"), hp.d_e),
                        attn: b.mha(&format!("{p}.attn"), hp),
                        norm2: b.norm(&format!("{p}.ln2"), hp.d_e),
                        mlp: b.mlp(&format!("{p}.mlp"), ["1", "2"], hp),
                    }
                })
                .collect();
            Stack::Decoder {
                layers,
                final_norm: b.norm("ln_f", hp.d_e),
            }
        }
    };
    let out_dim = if hp.arch == Arch::Encoder { hp.d_f } else { hp.d_e };
    let w_u = (!hp.tied).then(|| b.weight("W_u".into(), hp.vocab_size, out_dim));
    (b.specs, Layout { w_e, w_p, stack, w_u })
}
