//! Text formats for vocabularies and token-ID streams.
//!
//! Vocabulary file:
//!
//! ```text
//! #ftx-vocab 1
//! #size <N_V>
//! <token 1>
//! ...
//! <token N_V-3>
//! #merges
//! <left id> <right id>
//! ...
//! ```
//!
//! Tokens are escaped one per line: printable ASCII other than `\` is
//! written as is, `\\` is a backslash, `\s` a space, and `\xHH` any other
//! byte. Single-byte tokens come first in ascending byte order; the token on
//! line `alphabet + k` must equal the concatenation named by merge `k`. The
//! special tokens are implicit.
//!
//! Token-ID stream: decimal IDs separated by single spaces, one sequence per
//! line.

use std::fmt::Write as _;

use super::{TokenId, Vocabulary};
use crate::error::{Error, Result};

const HEADER: &str = "#ftx-vocab 1";

fn escape(bytes: &[u8], out: &mut String) {
    for &b in bytes {
        match b {
            b'\\' => out.push_str("\\\\"),
            b' ' => out.push_str("\\s"),
            0x21..=0x7e => out.push(b as char),
            _ => {
                let _ = write!(out, "\\x{b:02x}");
            }
        }
    }
}

fn unescape(line: &str, lineno: usize) -> Result<Vec<u8>> {
    let err = |msg: &str| Error::VocabFormat {
        line: lineno,
        msg: msg.to_string(),
    };
    let bytes = line.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => {
                match bytes.get(i + 1) {
                    Some(b'\\') => out.push(b'\\'),
                    Some(b's') => out.push(b' '),
                    Some(b'x') => {
                        let hex = bytes
                            .get(i + 2..i + 4)
                            .and_then(|h| std::str::from_utf8(h).ok())
                            .and_then(|h| u8::from_str_radix(h, 16).ok())
                            .ok_or_else(|| err("bad \\x escape"))?;
                        out.push(hex);
                        i += 2;
                    }
                    _ => return Err(err("bad escape")),
                }
                i += 2;
            }
            b @ 0x21..=0x7e => {
                out.push(b);
                i += 1;
            }
            _ => return Err(err("unescaped non-printable byte")),
        }
    }
    if out.is_empty() {
        return Err(err("empty token"));
    }
    Ok(out)
}

impl Vocabulary {
    /// Serializes in the line-oriented vocabulary format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(HEADER);
        s.push('\n');
        let _ = writeln!(s, "#size {}", self.size());
        for t in self.tokens() {
            escape(t, &mut s);
            s.push('\n');
        }
        s.push_str("#merges\n");
        for (l, r) in self.merges() {
            let _ = writeln!(s, "{l} {r}");
        }
        s
    }

    /// Parses and validates the vocabulary format.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::VocabFormat {
                line: 0,
                msg: format!("unexpected end of file, expected {what}"),
            })
        };
        let (n, header) = next("header")?;
        if header != HEADER {
            return Err(Error::VocabFormat {
                line: n,
                msg: format!("expected {HEADER:?}"),
            });
        }
        let (n, size_line) = next("#size")?;
        let size: usize = size_line
            .strip_prefix("#size ")
            .and_then(|s| s.parse().ok())
            .filter(|&s| (4..=u32::MAX as usize).contains(&s))
            .ok_or_else(|| Error::VocabFormat {
                line: n,
                msg: "expected `#size <N>` with N ≥ 4".into(),
            })?;
        let n_tokens = size - 3;
        if n_tokens > text.len() {
            return Err(Error::VocabFormat {
                line: n,
                msg: format!("size {size} exceeds file contents"),
            });
        }

        let mut tokens: Vec<Vec<u8>> = Vec::with_capacity(n_tokens);
        for _ in 0..n_tokens {
            let (n, line) = next("token")?;
            tokens.push(unescape(line, n)?);
        }
        let base_len = tokens.iter().take_while(|t| t.len() == 1).count();
        if base_len == 0 {
            return Err(Error::VocabFormat {
                line: 3,
                msg: "vocabulary needs at least one single-byte token".into(),
            });
        }
        if !tokens[..base_len].windows(2).all(|w| w[0][0] < w[1][0]) {
            return Err(Error::VocabFormat {
                line: 3,
                msg: "single-byte tokens must be unique and ascending".into(),
            });
        }

        let (n, marker) = next("#merges")?;
        if marker != "#merges" {
            return Err(Error::VocabFormat {
                line: n,
                msg: "expected `#merges`".into(),
            });
        }
        let mut merges = Vec::with_capacity(n_tokens - base_len);
        for k in 0..n_tokens - base_len {
            let (n, line) = next("merge rule")?;
            let bad = |msg: &str| Error::VocabFormat {
                line: n,
                msg: msg.to_string(),
            };
            let (l, r) = line.split_once(' ').ok_or_else(|| bad("expected `<left> <right>`"))?;
            let parse = |s: &str| s.parse::<u32>().map_err(|_| bad("bad token id"));
            let (l, r) = (parse(l)?, parse(r)?);
            // A merge may only reference tokens that already exist.
            let defined = (base_len + k) as u32;
            if l == 0 || r == 0 || l > defined || r > defined {
                return Err(bad("merge references an undefined token"));
            }
            let mut joined = tokens[l as usize - 1].clone();
            joined.extend_from_slice(&tokens[r as usize - 1]);
            if joined != tokens[base_len + k] {
                return Err(bad("merge does not reproduce its token"));
            }
            merges.push((TokenId(l), TokenId(r)));
        }
        for (n, rest) in lines {
            if !rest.is_empty() {
                return Err(Error::VocabFormat {
                    line: n,
                    msg: "trailing content".into(),
                });
            }
        }
        Ok(Vocabulary::assemble(tokens, base_len, merges))
    }
}

/// Writes token IDs separated by spaces, without a trailing newline.
pub fn format_ids(ids: &[TokenId]) -> String {
    let mut s = String::with_capacity(ids.len() * 4);
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{id}");
    }
    s
}

/// Parses a token-ID stream into one sequence per non-empty line, checking
/// every ID against `1..=vocab_size`.
pub fn parse_ids(text: &str, vocab_size: usize) -> Result<Vec<Vec<TokenId>>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut seq = Vec::new();
        for field in line.split(' ') {
            let id: u32 = field.parse().map_err(|_| Error::VocabFormat {
                line: n + 1,
                msg: format!("bad token id {field:?}"),
            })?;
            if id == 0 || id as usize > vocab_size {
                return Err(Error::TokenRange {
                    id: id as usize,
                    max: vocab_size,
                });
            }
            seq.push(TokenId(id));
        }
        out.push(seq);
    }
    Ok(out)
}
