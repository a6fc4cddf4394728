//! Helpers shared by the CLI test targets: a scratch directory to run the
//! binary in, and the scenarios whose transcripts are checked in under
//! `tests/golden/`.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

pub const PHRASE: &str = "the quick brown fox jumps over the lazy dog. ";

/// Output of one run of the binary.
pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub struct Sandbox {
    dir: tempfile::TempDir,
}

impl Sandbox {
    pub fn new() -> Self {
        Sandbox {
            dir: tempfile::tempdir().expect("temp dir"),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) {
        std::fs::write(self.path(name), contents).expect("write fixture");
    }

    pub fn read(&self, name: &str) -> Vec<u8> {
        std::fs::read(self.path(name)).unwrap_or_else(|e| panic!("read {name}: {e}"))
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).exists()
    }

    /// Runs `ftx` inside the sandbox with a clean logging environment.
    pub fn ftx(&self, args: &[&str]) -> Run {
        let out = Command::new(env!("CARGO_BIN_EXE_ftx"))
            .args(args)
            .current_dir(self.dir.path())
            .env_remove("RUST_LOG")
            .output()
            .expect("spawn ftx");
        Run {
            code: out.status.code().unwrap_or(-1),
            stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
            stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        }
    }

    /// Like [`Sandbox::ftx`] but fails the test on a non-zero exit.
    pub fn ok(&self, args: &[&str]) -> String {
        let r = self.ftx(args);
        assert_eq!(r.code, 0, "ftx {args:?} failed:\n{}", r.stderr);
        r.stdout
    }
}

pub const SMALL_MODEL: &[&str] = &[
    "--max-len", "16", "--layers", "1", "--heads", "2", "--d-e", "8", "--d-attn", "4", "--d-mid", "4", "--d-mlp", "16",
];

pub fn args<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(tail).copied().collect()
}

/// Each scenario is a list of commands run in a fresh sandbox after the
/// fixtures are written.
pub struct Scenario {
    pub name: &'static str,
    pub fixtures: &'static [(&'static str, &'static str)],
    pub commands: Vec<Vec<&'static str>>,
}

pub fn scenarios() -> Vec<Scenario> {
    let corpus = "the cat sat on the mat. the dog sat on the log. the cat saw the dog.\n";
    let pairs = "ab\tab\nba\tba\naab\taab\nbb\tbb\n";
    let fixtures_lm: &'static [(&str, &str)] = Box::leak(Box::new([("corpus.txt", corpus)]));
    let fixtures_pairs: &'static [(&str, &str)] = Box::leak(Box::new([("pairs.txt", pairs), ("alpha.txt", "ab")]));
    let train = |arch: &'static str, corpus: &'static str, vocab: &'static str, ckpt: &'static str, extra: &[&'static str]| {
        let mut v = vec!["train", "--arch", arch, "--corpus", corpus, "--vocab", vocab, "--checkpoint", ckpt];
        v.extend_from_slice(SMALL_MODEL);
        v.extend_from_slice(&["--epochs", "3", "--seed", "1", "--lr", "0.01"]);
        v.extend_from_slice(extra);
        v
    };
    vec![
        Scenario {
            name: "tokenize",
            fixtures: fixtures_lm,
            commands: vec![
                vec!["tokenize", "--train", "--corpus", "corpus.txt", "--vocab", "v.txt", "--vocab-size", "40", "--ids", "ids.txt"],
                vec!["tokenize", "--vocab", "v.txt", "--decode", "ids.txt", "--output", "back.txt"],
                vec!["tokenize", "--train", "--corpus", "corpus.txt", "--vocab", "w.txt", "--vocab-size", "5"],
                vec!["tokenize", "--vocab", "v.txt"],
            ],
        },
        Scenario {
            name: "decoder",
            fixtures: fixtures_lm,
            commands: vec![
                vec!["tokenize", "--train", "--corpus", "corpus.txt", "--vocab", "v.txt", "--vocab-size", "40"],
                train("d", "corpus.txt", "v.txt", "d.ftx", &["--loss-log", "loss.tsv"]),
                vec!["generate", "--checkpoint", "d.ftx", "--vocab", "v.txt", "--prompt", "the ", "--tau", "0", "--len", "10"],
                vec!["generate", "--checkpoint", "d.ftx", "--vocab", "v.txt", "--prompt", "the ", "--tau", "1", "--len", "10", "--seed", "4"],
                vec!["generate", "--checkpoint", "d.ftx", "--vocab", "v.txt", "--prompt", "the ", "--len", "0"],
                vec!["eval", "--checkpoint", "d.ftx", "--vocab", "v.txt", "--corpus", "corpus.txt"],
                vec!["generate", "--checkpoint", "d.ftx", "--vocab", "v.txt", "--prompt", "the cat sat on the mat again", "--len", "3"],
            ],
        },
        Scenario {
            name: "encoder",
            fixtures: fixtures_lm,
            commands: vec![
                vec!["tokenize", "--train", "--corpus", "corpus.txt", "--vocab", "v.txt", "--vocab-size", "40"],
                train("e", "corpus.txt", "v.txt", "e.ftx", &["--p-mask", "0.3"]),
                vec!["eval", "--checkpoint", "e.ftx", "--vocab", "v.txt", "--corpus", "corpus.txt", "--seed", "2"],
                vec!["generate", "--checkpoint", "e.ftx", "--vocab", "v.txt", "--prompt", "the"],
            ],
        },
        Scenario {
            name: "seq2seq",
            fixtures: fixtures_pairs,
            commands: vec![
                vec!["tokenize", "--train", "--corpus", "alpha.txt", "--vocab", "v.txt", "--vocab-size", "5"],
                train("ed", "pairs.txt", "v.txt", "ed.ftx", &["--dec-layers", "1"]),
                vec!["generate", "--checkpoint", "ed.ftx", "--vocab", "v.txt", "--prompt", "ab", "--tau", "0", "--max-steps", "4"],
                vec!["eval", "--checkpoint", "ed.ftx", "--vocab", "v.txt", "--corpus", "pairs.txt"],
                vec!["train", "--corpus", "pairs.txt", "--vocab", "v.txt", "--checkpoint", "x.ftx"],
            ],
        },
    ]
}

/// Runs a scenario and renders its transcript: each command, its stdout and
/// stderr, and its exit code.
pub fn transcript(s: &Scenario) -> String {
    let sb = Sandbox::new();
    for (name, contents) in s.fixtures {
        sb.write(name, contents);
    }
    let mut t = String::new();
    for cmd in &s.commands {
        let r = sb.ftx(cmd);
        let shown: Vec<String> = cmd
            .iter()
            .map(|a| if a.contains(' ') { format!("{a:?}") } else { a.to_string() })
            .collect();
        let _ = writeln!(t, "$ ftx {}", shown.join(" "));
        t.push_str(&r.stdout);
        for line in r.stderr.lines() {
            let _ = writeln!(t, "! {line}");
        }
        let _ = writeln!(t, "[exit {}]", r.code);
    }
    t
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares every scenario against its golden file, rewriting the files
/// when `FTX_BLESS` is set. Returns the names of scenarios that differ.
pub fn check_goldens() -> Vec<String> {
    let bless = std::env::var_os("FTX_BLESS").is_some();
    let mut bad = Vec::new();
    for s in scenarios() {
        let got = transcript(&s);
        let path = golden_dir().join(format!("{}.txt", s.name));
        if bless {
            std::fs::write(&path, &got).expect("write golden");
        }
        match std::fs::read_to_string(&path) {
            Ok(want) if want == got => {}
            Ok(want) => {
                eprintln!("--- {} (golden)\n{want}--- {} (actual)\n{got}", s.name, s.name);
                bad.push(s.name.to_string());
            }
            Err(_) => bad.push(format!("{} (missing golden file)", s.name)),
        }
    }
    bad
}
