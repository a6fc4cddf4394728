//! Prompted generation and seq2seq prediction with temperature sampling.
//!
//! Every call to [`sample_token`] consumes exactly one uniform draw from the
//! generator, including at `τ = 0` where the draw is discarded, so a given
//! seed always walks the sampling stream in lockstep with the generated
//! tokens.

use crate::error::{Error, Result};
use crate::models::{ModelParams, Positional};
use crate::rng::{Rng, Stream};
use crate::tokenizer::TokenId;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Temperature τ ≥ 0; 0 means greedy.
    pub tau: f64,
    /// Tokens to generate with a decoder-only model.
    pub gen_len: usize,
    /// Step cap for seq2seq prediction; `None` means `ℓ_max − 1`.
    pub max_steps: Option<usize>,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            tau: 1.0,
            gen_len: 16,
            max_steps: None,
            seed: 0,
        }
    }
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Contract("empty distribution".into()));
    }
    if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::Contract("distribution has negative or non-finite entries".into()));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Contract(format!("distribution sums to {total}, not 1")));
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::Contract(format!("temperature must be finite and ≥ 0, got {tau}")));
    }
    Ok(())
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// `q ∝ p^{1/τ}` for τ > 0, computed in log space. Zero entries stay zero.
pub fn tempered(p: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_distribution(p)?;
    check_tau(tau)?;
    if tau == 0.0 {
        let mut q = vec![0.0; p.len()];
        q[argmax(p)] = 1.0;
        return Ok(q);
    }
    let logits: Vec<f64> = p
        .iter()
        .map(|&v| if v > 0.0 { v.ln() / tau } else { f64::NEG_INFINITY })
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}

/// Draws a token from `q ∝ p^{1/τ}`; `τ = 0` picks the most likely token,
/// lowest ID first on ties. `p[i]` is the probability of `TokenId(i + 1)`.
pub fn sample_token(p: &[f64], tau: f64, rng: &mut Rng) -> Result<TokenId> {
    let q = tempered(p, tau)?;
    let u = rng.uniform();
    if tau == 0.0 {
        return Ok(TokenId::from_index(argmax(p)));
    }
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &qi) in q.iter().enumerate() {
        if qi > 0.0 {
            acc += qi;
            last = i;
            if u < acc {
                return Ok(TokenId::from_index(i));
            }
        }
    }
    Ok(TokenId::from_index(last))
}

/// Extends `prompt` by `gen_len` sampled tokens and returns only
/// the generated ones.
pub fn d_inference(params: &ModelParams, prompt: &[TokenId], cfg: &SamplerConfig) -> Result<Vec<TokenId>> {
    check_tau(cfg.tau)?;
    if prompt.is_empty() {
        return Err(Error::Contract("prompt must hold at least one token".into()));
    }
    let hp = params.hp();
    let total = prompt.len() + cfg.gen_len;
    if hp.positional == Positional::Learned && total > hp.max_len {
        return Err(Error::ContextLength {
            len: total,
            max: hp.max_len,
        });
    }
    let mut rng = Rng::stream(cfg.seed, Stream::Sampling);
    let mut x = prompt.to_vec();
    for _ in 0..cfg.gen_len {
        let p = params.d_forward(&x)?;
        let y = sample_token(&p.column(x.len() - 1), cfg.tau, &mut rng)?;
        x.push(y);
    }
    Ok(x.split_off(prompt.len()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    /// Starts with `bos_token`; ends with `eos_token` unless truncated.
    pub tokens: Vec<TokenId>,
    /// The step cap was reached before `eos_token` was sampled.
    pub truncated: bool,
}

/// Decodes from `[bos_token]` until `eos_token` or the step cap.
pub fn ed_inference(params: &ModelParams, z: &[TokenId], cfg: &SamplerConfig) -> Result<Prediction> {
    check_tau(cfg.tau)?;
    let hp = params.hp();
    let max_steps = cfg.max_steps.unwrap_or(hp.max_len.saturating_sub(1));
    if max_steps == 0 {
        return Err(Error::Contract("max_steps must be at least 1".into()));
    }
    let (bos, eos) = (TokenId::bos(hp.vocab_size), TokenId::eos(hp.vocab_size));
    let mut rng = Rng::stream(cfg.seed, Stream::Sampling);
    let mut x = vec![bos];
    for _ in 0..max_steps {
        let p = params.ed_forward(z, &x)?;
        let y = sample_token(&p.column(x.len() - 1), cfg.tau, &mut rng)?;
        x.push(y);
        if y == eos {
            return Ok(Prediction {
                tokens: x,
                truncated: false,
            });
        }
    }
    Ok(Prediction {
        tokens: x,
        truncated: true,
    })
}
