//! Per-sample training loops for the three architectures.
//!
//! Each loop visits the dataset in order once per epoch, runs a forward
//! pass on a fresh tape, takes the log loss in nats, backpropagates and
//! applies one optimizer step. There is no batching and no shuffling.

use std::fmt;

use log::{info, warn};

use crate::error::{Error, Result};
use crate::models::{Arch, Bound, ModelParams};
use crate::rng::{Rng, Stream};
use crate::tensor::{Precision, Tape, Tensor, Var};
use crate::tokenizer::TokenId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    /// Adam with `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
    pub const ADAM: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Learning rate η. Zero is accepted and leaves θ unchanged under SGD.
    pub lr: f64,
    /// Masking probability for the masked-LM loop.
    pub p_mask: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Emit an `info` log line every this many samples; 0 disables.
    pub log_every: usize,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1,
            lr: 1e-3,
            p_mask: 0.15,
            optimizer: Optimizer::ADAM,
            seed: 0,
            log_every: 0,
            precision: Precision::F64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::HyperParams(format!("learning rate must be ≥ 0, got {}", self.lr)));
        }
        if !(self.p_mask > 0.0 && self.p_mask < 1.0) {
            return Err(Error::HyperParams(format!("p_mask must lie in (0, 1), got {}", self.p_mask)));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            let unit = |b: f64| (0.0..1.0).contains(&b);
            if !unit(beta1) || !unit(beta2) || !(eps > 0.0) {
                return Err(Error::HyperParams("Adam needs β₁, β₂ in [0, 1) and ε > 0".into()));
            }
        }
        Ok(())
    }
}

/// Adam moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Sgd,
    Adam(AdamState),
}

impl OptimizerState {
    pub fn new(optimizer: Optimizer, params: &[Tensor]) -> Self {
        match optimizer {
            Optimizer::Sgd => OptimizerState::Sgd,
            Optimizer::Adam { .. } => OptimizerState::Adam(AdamState::new(params)),
        }
    }

    pub fn apply(&mut self, optimizer: Optimizer, params: &mut [Tensor], grads: &[Tensor], lr: f64) -> Result<()> {
        match (self, optimizer) {
            (OptimizerState::Sgd, Optimizer::Sgd) => sgd_step(params, grads, lr),
            (OptimizerState::Adam(state), Optimizer::Adam { beta1, beta2, eps }) => {
                adam_step(params, grads, state, lr, beta1, beta2, eps)
            }
            _ => Err(Error::Contract("optimizer state does not match optimizer".into())),
        }
    }
}

fn check_shapes(params: &[Tensor], others: &[Tensor], what: &str) -> Result<()> {
    if params.len() != others.len() {
        return Err(Error::Contract(format!(
            "{} {what} for {} parameters",
            others.len(),
            params.len()
        )));
    }
    for (p, g) in params.iter().zip(others) {
        if p.shape() != g.shape() {
            return Err(Error::Shape {
                op: "optimizer step",
                left: p.shape(),
                right: g.shape(),
            });
        }
    }
    Ok(())
}

/// `θ ← θ − η·g`.
pub fn sgd_step(params: &mut [Tensor], grads: &[Tensor], lr: f64) -> Result<()> {
    check_shapes(params, grads, "gradients")?;
    for (p, g) in params.iter_mut().zip(grads) {
        for (w, d) in p.data_mut().iter_mut().zip(g.data()) {
            *w -= lr * d;
        }
    }
    Ok(())
}

/// Bias-corrected Adam update `θ ← θ − η·m̂/(√v̂ + ε)`.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    check_shapes(params, grads, "gradients")?;
    check_shapes(params, &state.m, "first moments")?;
    check_shapes(params, &state.v, "second moments")?;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        let (p, m, v) = (p.data_mut(), m.data_mut(), v.data_mut());
        for (i, &gi) in g.data().iter().enumerate() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Loss of one visited sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    /// One-based epoch.
    pub epoch: usize,
    /// One-based index into the dataset.
    pub sample: usize,
    /// Summed log loss in nats.
    pub loss: f64,
    /// Number of predicted positions contributing to `loss`.
    pub tokens: usize,
}

impl fmt::Display for LossRecord {
    /// `epoch<TAB>sample<TAB>loss`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{:.9}", self.epoch, self.sample, self.loss)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub history: Vec<LossRecord>,
    /// Samples skipped per epoch because nothing could be predicted.
    pub skipped: usize,
    /// Masked-LM only: positions replaced by `mask_token`, and all positions
    /// seen, over the whole run.
    pub masked_positions: usize,
    pub total_positions: usize,
}

impl TrainReport {
    /// Mean loss per predicted token over one epoch.
    pub fn epoch_mean(&self, epoch: usize) -> Option<f64> {
        let (loss, tokens) = self
            .history
            .iter()
            .filter(|r| r.epoch == epoch)
            .fold((0.0, 0), |(l, n), r| (l + r.loss, n + r.tokens));
        (tokens > 0).then(|| loss / tokens as f64)
    }
}

/// `−Σ_{t<ℓ} ln P[x[t+1], t]` for a decoder-only model.
pub fn d_loss<'t>(bound: &Bound<'_, 't>, x: &[TokenId]) -> Result<Var<'t>> {
    let p = bound.d_forward(x)?;
    p.neg_log_pick(&next_token_picks(x))
}

/// `−Σ_{t<ℓ_x} ln P[x[t+1], t]` for an encoder-decoder given context `z`.
pub fn ed_loss<'t>(bound: &Bound<'_, 't>, z: &[TokenId], x: &[TokenId]) -> Result<Var<'t>> {
    let p = bound.ed_forward(z, x)?;
    p.neg_log_pick(&next_token_picks(x))
}

/// `−Σ_{t∈T̃} ln P[x[t], t]` where `T̃` holds the positions of `corrupted`
/// equal to `mask`, and `P` comes from the corrupted sequence.
pub fn mlm_loss<'t>(bound: &Bound<'_, 't>, original: &[TokenId], corrupted: &[TokenId], mask: TokenId) -> Result<Var<'t>> {
    if original.len() != corrupted.len() {
        return Err(Error::Contract("original and corrupted lengths differ".into()));
    }
    let p = bound.e_forward(corrupted)?;
    let picks: Vec<_> = corrupted
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == mask)
        .map(|(t, _)| (original[t].index(), t))
        .collect();
    p.neg_log_pick(&picks)
}

fn next_token_picks(x: &[TokenId]) -> Vec<(usize, usize)> {
    (0..x.len().saturating_sub(1)).map(|t| (x[t + 1].index(), t)).collect()
}

/// Replaces each position by `mask` with probability `p_mask`, one draw
/// per position in order.
pub fn corrupt(x: &[TokenId], p_mask: f64, mask: TokenId, rng: &mut Rng) -> Vec<TokenId> {
    x.iter()
        .map(|&id| if rng.bernoulli(p_mask) { mask } else { id })
        .collect()
}

struct Loop<'a> {
    params: &'a mut ModelParams,
    cfg: &'a TrainConfig,
    state: OptimizerState,
    report: TrainReport,
}

impl<'a> Loop<'a> {
    fn new(params: &'a mut ModelParams, cfg: &'a TrainConfig, arch: Arch) -> Result<Self> {
        cfg.validate()?;
        if params.hp().arch != arch {
            return Err(Error::Contract(format!(
                "{arch:?} training called on {:?} parameters",
                params.hp().arch
            )));
        }
        let state = OptimizerState::new(cfg.optimizer, params.tensors());
        Ok(Loop {
            params,
            cfg,
            state,
            report: TrainReport::default(),
        })
    }

    /// One forward/backward/update; returns the loss value.
    fn step<F>(&mut self, epoch: usize, sample: usize, tokens: usize, loss_of: F) -> Result<()>
    where
        F: for<'t> FnOnce(&Bound<'_, 't>) -> Result<Var<'t>>,
    {
        let tape = Tape::with_precision(self.cfg.precision);
        let (loss, grads) = {
            let bound = self.params.bind(&tape)?;
            let loss = loss_of(&bound)?;
            let value = loss.item()?;
            let mut grads = tape.backward(loss)?;
            let g: Vec<Tensor> = bound.vars.iter().map(|&v| grads.take(v)).collect();
            (value, g)
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite { op: "loss" });
        }
        self.state
            .apply(self.cfg.optimizer, self.params.tensors_mut(), &grads, self.cfg.lr)?;
        let record = LossRecord {
            epoch,
            sample,
            loss,
            tokens,
        };
        if self.cfg.log_every > 0 && self.report.history.len() % self.cfg.log_every == 0 {
            info!("epoch {epoch} sample {sample}: loss {loss:.6}");
        }
        self.report.history.push(record);
        Ok(())
    }
}

/// Next-token prediction on each sequence.
pub fn d_training(params: &mut ModelParams, seqs: &[Vec<TokenId>], cfg: &TrainConfig) -> Result<TrainReport> {
    let mut lp = Loop::new(params, cfg, Arch::Decoder)?;
    let usable = seqs.iter().filter(|x| x.len() >= 2).count();
    lp.report.skipped = seqs.len() - usable;
    if lp.report.skipped > 0 {
        warn!("skipping {} sequences shorter than 2 tokens", lp.report.skipped);
    }
    for epoch in 1..=cfg.epochs {
        for (n, x) in seqs.iter().enumerate().filter(|(_, x)| x.len() >= 2) {
            lp.step(epoch, n + 1, x.len() - 1, |b| d_loss(b, x))?;
        }
    }
    Ok(lp.report)
}

/// Sequence-to-sequence training on `(z, x)` pairs.
pub fn ed_training(
    params: &mut ModelParams,
    pairs: &[(Vec<TokenId>, Vec<TokenId>)],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let mut lp = Loop::new(params, cfg, Arch::EncoderDecoder)?;
    let usable = pairs.iter().filter(|(_, x)| x.len() >= 2).count();
    lp.report.skipped = pairs.len() - usable;
    if lp.report.skipped > 0 {
        warn!("skipping {} pairs whose target is shorter than 2 tokens", lp.report.skipped);
    }
    for epoch in 1..=cfg.epochs {
        for (n, (z, x)) in pairs.iter().enumerate().filter(|(_, (_, x))| x.len() >= 2) {
            lp.step(epoch, n + 1, x.len() - 1, |b| ed_loss(b, z, x))?;
        }
    }
    Ok(lp.report)
}

/// Masked language modelling. Corruption draws come from the
/// seed's masking stream, one per position, in dataset order.
pub fn e_training(params: &mut ModelParams, seqs: &[Vec<TokenId>], cfg: &TrainConfig) -> Result<TrainReport> {
    let mask = TokenId::mask(params.hp().vocab_size);
    let mut lp = Loop::new(params, cfg, Arch::Encoder)?;
    if seqs.iter().any(Vec::is_empty) {
        return Err(Error::Contract("masked-LM training needs non-empty sequences".into()));
    }
    let mut rng = Rng::stream(cfg.seed, Stream::Masking);
    for epoch in 1..=cfg.epochs {
        for (n, x) in seqs.iter().enumerate() {
            let corrupted = corrupt(x, cfg.p_mask, mask, &mut rng);
            let masked = corrupted.iter().filter(|&&c| c == mask).count();
            lp.report.masked_positions += masked;
            lp.report.total_positions += x.len();
            lp.step(epoch, n + 1, masked, |b| mlm_loss(b, x, &corrupted, mask))?;
        }
    }
    Ok(lp.report)
}
