mod common;

use common::{args, Sandbox, PHRASE, SMALL_MODEL};
use ftx::models::{Arch, HyperParams, ModelParams};
use ftx::tensor::Tensor;

const PARAGRAPH: &str = "A transformer reads a sequence of tokens and predicts what comes next, one column at a \
time. Attention lets every position look back at the ones before it, and layer normalization keeps the \
activations in a sensible range. Training adjusts the weights by following the gradient of the log loss \
downhill. Small models can memorize short strings quickly, which makes them useful for testing the whole \
pipeline from tokenizer to sampler. Byte pair encoding starts from single bytes and repeatedly merges the most \
frequent adjacent pair into a new token until the vocabulary reaches its target size.";

fn repeated_corpus(sb: &Sandbox) {
    sb.write("c.txt", PHRASE.repeat(8));
    sb.ok(&["tokenize", "--train", "--corpus", "c.txt", "--vocab", "v.txt", "--vocab-size", "60"]);
}

fn last_float(s: &str) -> f64 {
    s.split_whitespace()
        .filter_map(|w| w.parse::<f64>().ok())
        .last()
        .unwrap_or_else(|| panic!("no number in {s:?}"))
}

#[test]
fn tokenize_sizes_round_trips_and_repeats() {
    let sb = Sandbox::new();
    sb.write("p.txt", PARAGRAPH);
    let out = sb.ok(&["tokenize", "--train", "--corpus", "p.txt", "--vocab", "v.txt", "--vocab-size", "300", "--ids", "ids.txt"]);
    assert!(out.starts_with("vocabulary: 300 ids"), "{out}");
    let vocab = ftx::persist::load_vocab(&sb.path("v.txt")).unwrap();
    assert_eq!(vocab.size(), 300);
    assert_eq!((1..=300).filter(|&i| vocab.is_special(ftx::tokenizer::TokenId(i))).count(), 3);
    sb.ok(&["tokenize", "--vocab", "v.txt", "--decode", "ids.txt", "--output", "back.txt"]);
    assert_eq!(sb.read("back.txt"), PARAGRAPH.as_bytes());
    sb.ok(&["tokenize", "--train", "--corpus", "p.txt", "--vocab", "v2.txt", "--vocab-size", "300"]);
    assert_eq!(sb.read("v.txt"), sb.read("v2.txt"));
}

#[test]
fn exit_codes_follow_error_class() {
    let sb = Sandbox::new();
    repeated_corpus(&sb);
    let base = ["train", "--arch", "d", "--corpus", "c.txt", "--vocab", "v.txt", "--checkpoint", "m.ftx"];
    assert_eq!(sb.ftx(&["--help"]).code, 0);
    assert_eq!(sb.ftx(&["--version"]).code, 0);
    assert_eq!(sb.ftx(&[]).code, 1);
    assert_eq!(sb.ftx(&["train", "--bogus"]).code, 1);
    assert_eq!(sb.ftx(&args(&base, &["--arch", "gpt"])).code, 1);
    assert_eq!(sb.ftx(&args(&base, &["--lr", "-1"])).code, 1);
    assert_eq!(sb.ftx(&args(&base, &["--lr", "0"])).code, 1);
    assert_eq!(sb.ftx(&args(&base, &["--heads", "0"])).code, 1);
    assert_eq!(sb.ftx(&["train", "--arch", "d", "--corpus", "none.txt", "--vocab", "v.txt", "--checkpoint", "m.ftx"]).code, 2);
    sb.write("bad.ftx", b"NOPE0000");
    let gen = |ckpt: &str, prompt: &str| {
        sb.ftx(&["generate", "--checkpoint", ckpt, "--vocab", "v.txt", "--prompt", prompt, "--len", "2"])
    };
    assert_eq!(gen("bad.ftx", "the").code, 2);
    let blowup = sb.ftx(&args(&base, &["--lr", "1e300", "--optimizer", "sgd", "--epochs", "1", "--d-e", "8"]));
    assert_eq!(blowup.code, 3, "{}", blowup.stderr);
    assert!(!sb.exists("m.ftx"));
    sb.ok(&args(&base, &args(SMALL_MODEL, &["--epochs", "1"])));
    assert_eq!(gen("m.ftx", "the").code, 0);
    let long = PHRASE.repeat(2);
    let r = gen("m.ftx", &long);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert!(r.stderr.contains("context"), "{}", r.stderr);
    assert_eq!(gen("m.ftx", "THE").code, 2);
    sb.write("other.txt", "xyz");
    sb.ok(&["tokenize", "--train", "--corpus", "other.txt", "--vocab", "other.vocab", "--vocab-size", "6"]);
    let r = sb.ftx(&["eval", "--checkpoint", "m.ftx", "--vocab", "other.vocab", "--corpus", "other.txt"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let sb = Sandbox::new();
    repeated_corpus(&sb);
    let count = |d_e: usize, heads: usize| {
        let mut hp = HyperParams::desk(Arch::Decoder, 60);
        hp.max_len = 16;
        hp.d_e = d_e;
        hp.heads = heads;
        ModelParams::init(hp, 0).unwrap().parameter_count()
    };
    sb.write("run.cfg", "# small run\narch = d\nmax-len = 16\nd-e = 8\nheads = 1\nepochs = 2\n");
    let base = ["train", "--corpus", "c.txt", "--vocab", "v.txt", "--checkpoint", "m.ftx", "--config", "run.cfg"];
    let out = sb.ok(&base);
    assert!(out.contains(&format!("model: d, {} parameters", count(8, 1))), "{out}");
    assert!(out.contains("epoch 2 mean loss"), "{out}");
    let out = sb.ok(&args(&base, &["--d-e", "12", "--epochs", "3"]));
    assert!(out.contains(&format!("model: d, {} parameters", count(12, 1))), "{out}");
    assert!(out.contains("epoch 3 mean loss"), "{out}");
    sb.write("bad.cfg", "arch = d\nepochs = many\n");
    let r = sb.ftx(&["train", "--corpus", "c.txt", "--vocab", "v.txt", "--checkpoint", "m.ftx", "--config", "bad.cfg"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 2"), "{}", r.stderr);
    sb.write("gen.cfg", "tau = 0\nlen = 5\n");
    let a = sb.ok(&["generate", "--checkpoint", "m.ftx", "--vocab", "v.txt", "--prompt", "the", "--config", "gen.cfg"]);
    let b = sb.ok(&["generate", "--checkpoint", "m.ftx", "--vocab", "v.txt", "--prompt", "the", "--tau", "0", "--len", "5"]);
    assert_eq!(a, b);
}

#[test]
fn training_is_reproducible_and_atomic() {
    let sb = Sandbox::new();
    repeated_corpus(&sb);
    let run = |ckpt: &str, seed: &str| {
        let base = ["train", "--arch", "d", "--corpus", "c.txt", "--vocab", "v.txt", "--checkpoint", ckpt, "--seed", seed];
        sb.ok(&args(&base, &args(SMALL_MODEL, &["--epochs", "2"])))
    };
    run("a.ftx", "3");
    run("b.ftx", "3");
    run("c.ftx", "4");
    assert_eq!(sb.read("a.ftx"), sb.read("b.ftx"));
    assert_ne!(sb.read("a.ftx"), sb.read("c.ftx"));
    let names: Vec<String> = std::fs::read_dir(sb.path(""))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().all(|n| !n.starts_with('.')), "leftover temp files: {names:?}");
}

#[test]
fn memorized_decoder_round_trip() {
    let sb = Sandbox::new();
    repeated_corpus(&sb);
    let out = sb.ok(&["train", "--arch", "d", "--corpus", "c.txt", "--vocab", "v.txt", "--checkpoint", "d.ftx", "--epochs", "150"]);
    let final_line = out.lines().find(|l| l.starts_with("epoch 150")).unwrap();
    assert!(last_float(final_line) < 0.05, "{out}");
    let eval = ["eval", "--checkpoint", "d.ftx", "--vocab", "v.txt", "--corpus", "c.txt"];
    let first = sb.ok(&eval);
    assert_eq!(first, sb.ok(&eval));
    assert!(last_float(&first) < 0.05, "{first}");
    assert_eq!(first.trim().split('.').nth(1).map(str::len), Some(6));
    let gen = ["generate", "--checkpoint", "d.ftx", "--vocab", "v.txt", "--prompt", "the quick", "--tau", "0", "--len", "40"];
    let text = sb.ok(&gen);
    assert_eq!(text, sb.ok(&gen));
    let expected = &PHRASE.repeat(8)["the quick".len()..];
    assert!(expected.starts_with(text.trim_end_matches('\n')), "{text:?}");
    assert!(text.len() > 40, "{text:?}");
    let silent = sb.ftx(&["generate", "--checkpoint", "d.ftx", "--vocab", "v.txt", "--prompt", "the", "--len", "0"]);
    assert_eq!((silent.code, silent.stdout.as_str()), (0, ""));
}

#[test]
fn zero_unembedding_evaluates_to_log_vocab_size() {
    let sb = Sandbox::new();
    repeated_corpus(&sb);
    let mut hp = HyperParams::desk(Arch::Decoder, 60);
    hp.max_len = 16;
    let mut params = ModelParams::init(hp, 5).unwrap();
    let w_u = params.get_mut("W_u").unwrap();
    *w_u = Tensor::zeros(w_u.rows(), w_u.cols());
    ftx::persist::save(&params, &sb.path("zero.ftx")).unwrap();
    let out = sb.ok(&["eval", "--checkpoint", "zero.ftx", "--vocab", "v.txt", "--corpus", "c.txt"]);
    assert!((last_float(&out) - 60f64.ln()).abs() <= 1e-6, "{out}");
}

#[test]
fn masked_training_starts_near_uniform_loss() {
    let sb = Sandbox::new();
    repeated_corpus(&sb);
    let out = sb.ok(&[
        "train", "--arch", "e", "--corpus", "c.txt", "--vocab", "v.txt", "--checkpoint", "e.ftx", "--p-mask", "0.15",
        "--epochs", "1", "--loss-log", "loss.tsv",
    ]);
    assert!(out.contains("masked: "), "{out}");
    let log = String::from_utf8(sb.read("loss.tsv")).unwrap();
    let ln_nv = 60f64.ln();
    let mut seen = 0;
    for line in log.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 3, "{line:?}");
        let loss: f64 = fields[2].parse().unwrap();
        let masked = (loss / ln_nv).round();
        if masked == 0.0 {
            // nothing masked in this sample
            assert_eq!(loss, 0.0, "{line:?}");
            continue;
        }
        assert!((loss - masked * ln_nv).abs() <= 0.05 * masked * ln_nv, "{line:?}");
        seen += 1;
    }
    assert!(seen > 0);
    let eval = ["eval", "--checkpoint", "e.ftx", "--vocab", "v.txt", "--corpus", "c.txt", "--seed", "1"];
    assert_eq!(sb.ok(&eval), sb.ok(&eval));
}
