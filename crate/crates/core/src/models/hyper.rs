use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::NormMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    EncoderDecoder,
    Encoder,
    Decoder,
}

impl Arch {
    /// Short tag used in checkpoints and on the command line.
    pub fn tag(self) -> &'static str {
        match self {
            Arch::EncoderDecoder => "ed",
            Arch::Encoder => "e",
            Arch::Decoder => "d",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ed" => Ok(Arch::EncoderDecoder),
            "e" => Ok(Arch::Encoder),
            "d" => Ok(Arch::Decoder),
            _ => Err(Error::HyperParams(format!("unknown architecture {s:?} (expected ed, e or d)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Positional {
    #[default]
    Learned,
    Sinusoidal,
}

/// Architecture hyperparameters.
///
/// `layers` is `L` for the encoder-only and decoder-only models and
/// `L_enc` for the encoder-decoder, whose decoder depth is `dec_layers`.
/// `d_f` is the width of the encoder-only final projection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperParams {
    pub arch: Arch,
    pub max_len: usize,
    pub layers: usize,
    pub dec_layers: usize,
    pub heads: usize,
    pub d_e: usize,
    pub d_attn: usize,
    pub d_mid: usize,
    pub d_mlp: usize,
    pub d_f: usize,
    pub vocab_size: usize,
    pub positional: Positional,
    /// Use `W_eᵀ` as the unembedding matrix.
    pub tied: bool,
    pub norm: NormMode,
}

impl HyperParams {
    /// Desk-scale defaults: `d_e = 64`, two layers of two heads with
    /// `d_attn = d_mid = 32`, `d_mlp = 128`, `ℓ_max = 64`.
    pub fn desk(arch: Arch, vocab_size: usize) -> Self {
        HyperParams {
            arch,
            max_len: 64,
            layers: 2,
            dec_layers: if arch == Arch::EncoderDecoder { 2 } else { 0 },
            heads: 2,
            d_e: 64,
            d_attn: 32,
            d_mid: 32,
            d_mlp: 128,
            d_f: 64,
            vocab_size,
            positional: Positional::Learned,
            tied: false,
            norm: NormMode::Standard,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("max_len", self.max_len),
            ("heads", self.heads),
            ("d_e", self.d_e),
            ("d_attn", self.d_attn),
            ("d_mid", self.d_mid),
            ("d_mlp", self.d_mlp),
            ("d_f", self.d_f),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::HyperParams(format!("{name} must be positive")));
            }
        }
        if self.vocab_size < 4 {
            return Err(Error::HyperParams(format!(
                "vocab_size {} leaves no room beside the three special tokens",
                self.vocab_size
            )));
        }
        if self.positional == Positional::Sinusoidal && self.d_e % 2 != 0 {
            return Err(Error::HyperParams("sinusoidal positions need an even d_e".into()));
        }
        if self.arch != Arch::EncoderDecoder && self.dec_layers != 0 {
            return Err(Error::HyperParams("dec_layers applies to the encoder-decoder only".into()));
        }
        if self.tied && self.arch == Arch::Encoder && self.d_f != self.d_e {
            return Err(Error::HyperParams("tied unembedding needs d_f = d_e".into()));
        }
        Ok(())
    }

    /// `key=value` lines in a fixed order.
    pub fn to_kv(&self) -> String {
        let pos = match self.positional {
            Positional::Learned => "learned",
            Positional::Sinusoidal => "sinusoidal",
        };
        let norm = match self.norm {
            NormMode::Standard => "layer",
            NormMode::Rms => "rms",
        };
        format!(
            "arch={}\nmax_len={}\nlayers={}\ndec_layers={}\nheads={}\nd_e={}\nd_attn={}\nd_mid={}\nd_mlp={}\nd_f={}\nvocab_size={}\npositional={pos}\ntied={}\nnorm={norm}\n",
            self.arch,
            self.max_len,
            self.layers,
            self.dec_layers,
            self.heads,
            self.d_e,
            self.d_attn,
            self.d_mid,
            self.d_mlp,
            self.d_f,
            self.vocab_size,
            self.tied,
        )
    }

    /// Inverse of [`Self::to_kv`]; every key must appear exactly once.
    pub fn from_kv(text: &str) -> Result<Self> {
        const KEYS: [&str; 14] = [
            "arch",
            "max_len",
            "layers",
            "dec_layers",
            "heads",
            "d_e",
            "d_attn",
            "d_mid",
            "d_mlp",
            "d_f",
            "vocab_size",
            "positional",
            "tied",
            "norm",
        ];
        let bad = |msg: String| Error::Format(format!("hyperparameters: {msg}"));
        let mut values: [Option<&str>; 14] = [None; 14];
        for line in text.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {line:?} is not key=value")))?;
            let slot = KEYS
                .iter()
                .position(|&key| key == k)
                .ok_or_else(|| bad(format!("unknown key {k:?}")))?;
            if values[slot].replace(v).is_some() {
                return Err(bad(format!("duplicate key {k:?}")));
            }
        }
        let get = |i: usize| values[i].ok_or_else(|| bad(format!("missing key {:?}", KEYS[i])));
        let num = |i: usize| -> Result<usize> {
            get(i)?
                .parse()
                .map_err(|_| bad(format!("{} is not a count", KEYS[i])))
        };
        let hp = HyperParams {
            arch: get(0)?.parse().map_err(|e: Error| bad(e.to_string()))?,
            max_len: num(1)?,
            layers: num(2)?,
            dec_layers: num(3)?,
            heads: num(4)?,
            d_e: num(5)?,
            d_attn: num(6)?,
            d_mid: num(7)?,
            d_mlp: num(8)?,
            d_f: num(9)?,
            vocab_size: num(10)?,
            positional: match get(11)? {
                "learned" => Positional::Learned,
                "sinusoidal" => Positional::Sinusoidal,
                other => return Err(bad(format!("unknown positional mode {other:?}"))),
            },
            tied: match get(12)? {
                "true" => true,
                "false" => false,
                other => return Err(bad(format!("tied must be true or false, got {other:?}"))),
            },
            norm: match get(13)? {
                "layer" => NormMode::Standard,
                "rms" => NormMode::Rms,
                other => return Err(bad(format!("unknown norm {other:?}"))),
            },
        };
        hp.validate().map_err(|e| bad(e.to_string()))?;
        Ok(hp)
    }
}
