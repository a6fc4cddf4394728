use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ftx::models::{Arch, Positional};
use ftx::tensor::{NormMode, Precision};

#[derive(Debug, Parser)]
#[command(name = "ftx", version, about = "Train, evaluate and sample small transformer models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a BPE vocabulary, encode a corpus to token IDs, or decode IDs.
    Tokenize(TokenizeArgs),
    /// Train a model on a corpus and save a checkpoint.
    Train(TrainArgs),
    /// Continue a prompt (decoder-only) or map a source string (seq2seq).
    Generate(GenerateArgs),
    /// Report the mean log loss per token of a checkpoint on a corpus.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    /// Decoder-only
    D,
    /// Encoder-only, masked-LM
    E,
    /// Encoder-decoder
    Ed,
}

impl From<ArchArg> for Arch {
    fn from(a: ArchArg) -> Arch {
        match a {
            ArchArg::D => Arch::Decoder,
            ArchArg::E => Arch::Encoder,
            ArchArg::Ed => Arch::EncoderDecoder,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    F64,
    F32,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Precision {
        match p {
            PrecisionArg::F64 => Precision::F64,
            PrecisionArg::F32 => Precision::F32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PositionalArg {
    Learned,
    Sinusoidal,
}

impl From<PositionalArg> for Positional {
    fn from(p: PositionalArg) -> Positional {
        match p {
            PositionalArg::Learned => Positional::Learned,
            PositionalArg::Sinusoidal => Positional::Sinusoidal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Layer,
    Rms,
}

impl From<NormArg> for NormMode {
    fn from(n: NormArg) -> NormMode {
        match n {
            NormArg::Layer => NormMode::Standard,
            NormArg::Rms => NormMode::Rms,
        }
    }
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    /// Input text.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Vocabulary file; written with --train, read otherwise.
    #[arg(long)]
    pub vocab: PathBuf,
    /// Learn a new vocabulary from the corpus.
    #[arg(long, requires = "corpus")]
    pub train: bool,
    /// Vocabulary size including the three special tokens.
    #[arg(long, default_value_t = 300, requires = "train")]
    pub vocab_size: usize,
    /// Write the corpus as token IDs to this file.
    #[arg(long, requires = "corpus")]
    pub ids: Option<PathBuf>,
    /// Decode a token-ID file back to bytes.
    #[arg(long, conflicts_with_all = ["corpus", "train"], requires = "output")]
    pub decode: Option<PathBuf>,
    /// Destination of --decode.
    #[arg(long, requires = "decode")]
    pub output: Option<PathBuf>,
}

/// Architecture flags; unset ones fall back to the config file, then to
/// desk-scale defaults.
#[derive(Debug, Args)]
pub struct ModelFlags {
    #[arg(long)]
    pub arch: Option<ArchArg>,
    /// Context length ℓ_max.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Layers L (encoder layers for ed).
    #[arg(long)]
    pub layers: Option<usize>,
    /// Decoder layers (ed only).
    #[arg(long)]
    pub dec_layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub d_e: Option<usize>,
    #[arg(long)]
    pub d_attn: Option<usize>,
    #[arg(long)]
    pub d_mid: Option<usize>,
    #[arg(long)]
    pub d_mlp: Option<usize>,
    /// Final projection width (e only).
    #[arg(long)]
    pub d_f: Option<usize>,
    #[arg(long)]
    pub positional: Option<PositionalArg>,
    /// Use the transposed token embedding as unembedding.
    #[arg(long)]
    pub tied: bool,
    #[arg(long)]
    pub norm: Option<NormArg>,
}

#[derive(Debug, Args)]
pub struct OptimFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub optimizer: Option<OptimizerArg>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub adam_eps: Option<f64>,
    /// Masking probability (e only).
    #[arg(long)]
    pub p_mask: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Log progress every N samples (RUST_LOG=info to see it).
    #[arg(long)]
    pub log_every: Option<usize>,
    #[arg(long)]
    pub precision: Option<PrecisionArg>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training text; for ed, one `source<TAB>target` pair per line.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Where to write the trained checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Write `epoch<TAB>sample<TAB>loss` records here.
    #[arg(long)]
    pub loss_log: Option<PathBuf>,
    /// key=value defaults, overridden by flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub optim: OptimFlags,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Prompt (d) or source string (ed).
    #[arg(long, allow_hyphen_values = true)]
    pub prompt: String,
    /// Sampling temperature; 0 is greedy.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Tokens to generate (d).
    #[arg(long)]
    pub len: Option<usize>,
    /// Step cap (ed); defaults to ℓ_max − 1.
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Held-out text, in the same layout as for training.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Masking seed (e only).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Masking probability (e only).
    #[arg(long)]
    pub p_mask: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}
