//! The `ftx` command line: `tokenize`, `train`, `generate` and `eval`.
//!
//! Settings resolve as built-in defaults, then `--config` file entries, then
//! flags. Exit codes: 0 success, 1 usage error, 2 data or format error,
//! 3 numeric failure.

pub mod args;
pub mod config;
pub mod corpus;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::Parser;
use log::warn;

use ftx::infer::{d_inference, ed_inference, SamplerConfig};
use ftx::models::{Arch, Bound, HyperParams, ModelParams};
use ftx::persist;
use ftx::rng::{Rng, Stream};
use ftx::tensor::{Precision, Tape};
use ftx::tokenizer::{decode, encode, format_ids, parse_ids, train_bpe, TokenId, Vocabulary};
use ftx::train::{self, corrupt, d_training, e_training, ed_training, Optimizer, TrainConfig};
use ftx::ErrorClass;

use args::{Cli, Command, EvalArgs, GenerateArgs, OptimizerArg, TokenizeArgs, TrainArgs};
use config::{ConfigError, ConfigFile};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Args(#[from] clap::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{context}: {source}")]
    Core { context: String, source: ftx::Error },
    #[error("writing output: {0}")]
    Output(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Args(e) if !e.use_stderr() => 0,
            CliError::Args(_) | CliError::Usage(_) => 1,
            CliError::Config { .. } | CliError::Output(_) => 2,
            CliError::Core { source, .. } => match source.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numeric => 3,
            },
        }
    }
}

trait Context<T> {
    fn context(self, what: impl Into<String>) -> Result<T, CliError>;
}

impl<T> Context<T> for ftx::Result<T> {
    fn context(self, what: impl Into<String>) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core {
            context: what.into(),
            source,
        })
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path)
        .map_err(|source| ftx::Error::Io {
            path: path.to_path_buf(),
            source,
        })
        .context("reading input")
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = String::from_utf8(read(path)?).map_err(|_| CliError::Config {
        path: path.to_path_buf(),
        source: ConfigError {
            line: 0,
            msg: "not UTF-8".into(),
        },
    })?;
    ConfigFile::parse(&text).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

fn load_vocab(path: &Path) -> Result<Vocabulary, CliError> {
    persist::load_vocab(path).context(format!("loading vocabulary {}", path.display()))
}

fn load_model(checkpoint: &Path, vocab: &Vocabulary) -> Result<ModelParams, CliError> {
    let params = persist::load(checkpoint).context(format!("loading checkpoint {}", checkpoint.display()))?;
    if params.hp().vocab_size != vocab.size() {
        return Err(CliError::Core {
            context: "checking vocabulary".into(),
            source: ftx::Error::Format(format!(
                "vocabulary has {} tokens but the checkpoint expects {}",
                vocab.size(),
                params.hp().vocab_size
            )),
        });
    }
    Ok(params)
}

/// Parses `args` (program name first) and runs the subcommand, writing
/// results to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    match cli.command {
        Command::Tokenize(a) => tokenize(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Generate(a) => generate(a, out),
        Command::Eval(a) => eval(a, out),
    }
}

fn tokenize(a: TokenizeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !a.train && a.ids.is_none() && a.decode.is_none() {
        return Err(CliError::Usage("tokenize needs --train, --ids or --decode".into()));
    }
    let corpus = a.corpus.as_deref().map(read).transpose()?;
    let vocab = if a.train {
        let text = corpus.as_deref().expect("clap requires --corpus with --train");
        let vocab = train_bpe(text, a.vocab_size).context("training vocabulary")?;
        persist::save_vocab(&vocab, &a.vocab).context("writing vocabulary")?;
        writeln!(
            out,
            "vocabulary: {} ids ({} bytes, {} merges, 3 special) -> {}",
            vocab.size(),
            vocab.alphabet_len(),
            vocab.merges().len(),
            a.vocab.display()
        )?;
        vocab
    } else {
        load_vocab(&a.vocab)?
    };
    if let Some(path) = &a.ids {
        let text = corpus.as_deref().expect("clap requires --corpus with --ids");
        let ids = encode(text, &vocab, false).context("encoding corpus")?;
        persist::write_atomic(path, format!("{}\n", format_ids(&ids)).as_bytes()).context("writing token ids")?;
        writeln!(out, "encoded {} bytes into {} tokens -> {}", text.len(), ids.len(), path.display())?;
    }
    if let Some(path) = &a.decode {
        let output = a.output.as_ref().expect("clap requires --output with --decode");
        let text = String::from_utf8(read(path)?).map_err(|_| CliError::Core {
            context: format!("reading {}", path.display()),
            source: ftx::Error::Format("token-id file is not UTF-8".into()),
        })?;
        let seqs = parse_ids(&text, vocab.size()).context("parsing token ids")?;
        let ids: Vec<TokenId> = seqs.concat();
        let bytes = decode(&ids, &vocab).context("decoding")?;
        persist::write_atomic(output, &bytes).context("writing decoded text")?;
        writeln!(out, "decoded {} tokens into {} bytes -> {}", ids.len(), bytes.len(), output.display())?;
    }
    Ok(())
}

fn resolve_hp(a: &TrainArgs, file: &ConfigFile, vocab_size: usize) -> Result<HyperParams, CliError> {
    let m = &a.model;
    let arch: Arch = m
        .arch
        .or(file.choice("arch"))
        .ok_or_else(|| CliError::Usage("--arch is required (d, e or ed)".into()))?
        .into();
    let mut hp = HyperParams::desk(arch, vocab_size);
    let pick = |flag: Option<usize>, key: &str, default: usize| flag.or(file.get(key)).unwrap_or(default);
    hp.max_len = pick(m.max_len, "max-len", hp.max_len);
    hp.layers = pick(m.layers, "layers", hp.layers);
    hp.dec_layers = pick(m.dec_layers, "dec-layers", hp.dec_layers);
    hp.heads = pick(m.heads, "heads", hp.heads);
    hp.d_e = pick(m.d_e, "d-e", hp.d_e);
    hp.d_attn = pick(m.d_attn, "d-attn", hp.d_attn);
    hp.d_mid = pick(m.d_mid, "d-mid", hp.d_mid);
    hp.d_mlp = pick(m.d_mlp, "d-mlp", hp.d_mlp);
    hp.d_f = pick(m.d_f, "d-f", hp.d_e);
    if let Some(p) = m.positional.or(file.choice("positional")) {
        hp.positional = p.into();
    }
    hp.tied = m.tied || file.get("tied").unwrap_or(false);
    if let Some(n) = m.norm.or(file.choice("norm")) {
        hp.norm = n.into();
    }
    hp.validate().context("checking hyperparameters")?;
    Ok(hp)
}

fn resolve_train_config(a: &TrainArgs, file: &ConfigFile) -> Result<TrainConfig, CliError> {
    let o = &a.optim;
    let d = TrainConfig::default();
    let real = |flag: Option<f64>, key: &str, default: f64| flag.or(file.get(key)).unwrap_or(default);
    let optimizer = match o.optimizer.or(file.choice("optimizer")).unwrap_or(OptimizerArg::Adam) {
        OptimizerArg::Sgd => Optimizer::Sgd,
        OptimizerArg::Adam => Optimizer::Adam {
            beta1: real(o.beta1, "beta1", 0.9),
            beta2: real(o.beta2, "beta2", 0.999),
            eps: real(o.adam_eps, "adam-eps", 1e-8),
        },
    };
    let cfg = TrainConfig {
        epochs: o.epochs.or(file.get("epochs")).unwrap_or(10),
        lr: real(o.lr, "lr", d.lr),
        p_mask: real(o.p_mask, "p-mask", d.p_mask),
        optimizer,
        seed: o.seed.or(file.get("seed")).unwrap_or(d.seed),
        log_every: o.log_every.or(file.get("log-every")).unwrap_or(0),
        precision: o.precision.or(file.choice("precision")).map_or(Precision::F64, Into::into),
    };
    if !(cfg.lr > 0.0) {
        return Err(CliError::Usage(format!("--lr must be positive, got {}", cfg.lr)));
    }
    cfg.validate().context("checking training settings")?;
    Ok(cfg)
}

fn fmt_mean(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |m| format!("{m:.6}"))
}

fn train_cmd(a: TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file = load_config(a.config.as_deref())?;
    let vocab = load_vocab(&a.vocab)?;
    let hp = resolve_hp(&a, &file, vocab.size())?;
    let cfg = resolve_train_config(&a, &file)?;
    let text = read(&a.corpus)?;
    let mut params = ModelParams::init(hp.clone(), cfg.seed).context("initializing parameters")?;

    let (report, samples, tokens) = match hp.arch {
        Arch::Decoder | Arch::Encoder => {
            let seqs = corpus::lm_sequences(&text, &vocab, hp.max_len).context("preparing corpus")?;
            let tokens: usize = seqs.iter().map(Vec::len).sum();
            let report = if hp.arch == Arch::Decoder {
                d_training(&mut params, &seqs, &cfg)
            } else {
                e_training(&mut params, &seqs, &cfg)
            };
            (report.context("training")?, seqs.len(), tokens)
        }
        Arch::EncoderDecoder => {
            let pairs = corpus::seq2seq_pairs(&text, &vocab).context("preparing corpus")?;
            let tokens: usize = pairs.iter().map(|(z, x)| z.len() + x.len()).sum();
            (ed_training(&mut params, &pairs, &cfg).context("training")?, pairs.len(), tokens)
        }
    };

    persist::save(&params, &a.checkpoint).context("saving checkpoint")?;
    if let Some(path) = &a.loss_log {
        let log: String = report.history.iter().map(|r| format!("{r}\n")).collect();
        persist::write_atomic(path, log.as_bytes()).context("writing loss log")?;
    }
    writeln!(out, "model: {}, {} parameters", hp.arch, params.parameter_count())?;
    writeln!(out, "data: {samples} sequences, {tokens} tokens")?;
    if hp.arch == Arch::Encoder {
        writeln!(
            out,
            "masked: {} of {} positions",
            report.masked_positions, report.total_positions
        )?;
    }
    if cfg.epochs > 0 {
        writeln!(out, "epoch 1 mean loss: {} nats/token", fmt_mean(report.epoch_mean(1)))?;
        writeln!(
            out,
            "epoch {} mean loss: {} nats/token",
            cfg.epochs,
            fmt_mean(report.epoch_mean(cfg.epochs))
        )?;
    }
    writeln!(out, "checkpoint: {}", a.checkpoint.display())?;
    Ok(())
}

fn generate(a: GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file = load_config(a.config.as_deref())?;
    let vocab = load_vocab(&a.vocab)?;
    let params = load_model(&a.checkpoint, &vocab)?;
    let cfg = SamplerConfig {
        tau: a.tau.or(file.get("tau")).unwrap_or(1.0),
        gen_len: a.len.or(file.get("len")).unwrap_or(32),
        max_steps: a.max_steps.or(file.get("max-steps")),
        seed: a.seed.or(file.get("seed")).unwrap_or(0),
    };
    if !(cfg.tau >= 0.0) {
        return Err(CliError::Usage(format!("--tau must be ≥ 0, got {}", cfg.tau)));
    }
    let tokens = match params.hp().arch {
        Arch::Decoder => {
            let mut prompt = vec![vocab.bos_token()];
            prompt.extend(encode(a.prompt.as_bytes(), &vocab, false).context("encoding prompt")?);
            let mut generated = d_inference(&params, &prompt, &cfg).context("generating")?;
            if let Some(end) = generated.iter().position(|&t| t == vocab.eos_token()) {
                generated.truncate(end);
            }
            generated
        }
        Arch::EncoderDecoder => {
            let z = encode(a.prompt.as_bytes(), &vocab, true).context("encoding source")?;
            let prediction = ed_inference(&params, &z, &cfg).context("generating")?;
            if prediction.truncated {
                warn!("output reached the step cap before eos_token");
            }
            prediction.tokens
        }
        Arch::Encoder => {
            return Err(CliError::Usage(
                "generate needs a decoder-only (d) or encoder-decoder (ed) checkpoint".into(),
            ))
        }
    };
    let text = decode(&tokens, &vocab).context("decoding")?;
    if !text.is_empty() {
        out.write_all(&text)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn sum_loss<F>(params: &ModelParams, loss_of: F) -> ftx::Result<f64>
where
    F: for<'t> FnOnce(&Bound<'_, 't>) -> ftx::Result<ftx::tensor::Var<'t>>,
{
    let tape = Tape::new();
    let bound = params.bind(&tape)?;
    loss_of(&bound)?.item()
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file = load_config(a.config.as_deref())?;
    let vocab = load_vocab(&a.vocab)?;
    let params = load_model(&a.checkpoint, &vocab)?;
    let text = read(&a.corpus)?;
    let hp = params.hp();
    let (mut total, mut count) = (0.0, 0usize);
    match hp.arch {
        Arch::Decoder => {
            for x in corpus::lm_sequences(&text, &vocab, hp.max_len).context("preparing corpus")? {
                total += sum_loss(&params, |b| train::d_loss(b, &x)).context("evaluating")?;
                count += x.len() - 1;
            }
        }
        Arch::EncoderDecoder => {
            for (z, x) in corpus::seq2seq_pairs(&text, &vocab).context("preparing corpus")? {
                total += sum_loss(&params, |b| train::ed_loss(b, &z, &x)).context("evaluating")?;
                count += x.len() - 1;
            }
        }
        Arch::Encoder => {
            let p_mask = a.p_mask.or(file.get("p-mask")).unwrap_or(TrainConfig::default().p_mask);
            if !(p_mask > 0.0 && p_mask < 1.0) {
                return Err(CliError::Usage(format!("--p-mask must lie in (0, 1), got {p_mask}")));
            }
            let mut rng = Rng::stream(a.seed.or(file.get("seed")).unwrap_or(0), Stream::Masking);
            let mask = vocab.mask_token();
            for x in corpus::lm_sequences(&text, &vocab, hp.max_len).context("preparing corpus")? {
                let corrupted = corrupt(&x, p_mask, mask, &mut rng);
                total += sum_loss(&params, |b| train::mlm_loss(b, &x, &corrupted, mask)).context("evaluating")?;
                count += corrupted.iter().filter(|&&t| t == mask).count();
            }
        }
    }
    if count == 0 {
        return Err(CliError::Usage("no positions to score in this corpus".into()));
    }
    writeln!(out, "{:.6}", total / count as f64)?;
    Ok(())
}
