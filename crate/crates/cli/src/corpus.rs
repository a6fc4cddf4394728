//! Turning corpus files into training sequences.

use ftx::tokenizer::{chunk, encode, TokenId, Vocabulary};
use ftx::{Error, Result};

/// Encodes `text`, cuts it into chunks of `max_len − 2` tokens and frames
/// each chunk as `bos … eos`.
pub fn lm_sequences(text: &[u8], vocab: &Vocabulary, max_len: usize) -> Result<Vec<Vec<TokenId>>> {
    if max_len < 3 {
        return Err(Error::HyperParams(format!(
            "max-len {max_len} leaves no room for tokens between bos and eos"
        )));
    }
    let ids = encode(text, vocab, false)?;
    if ids.is_empty() {
        return Err(Error::Format("corpus is empty".into()));
    }
    Ok(chunk(&ids, max_len - 2)
        .into_iter()
        .map(|c| {
            let mut framed = Vec::with_capacity(c.len() + 2);
            framed.push(vocab.bos_token());
            framed.extend(c);
            framed.push(vocab.eos_token());
            framed
        })
        .collect())
}

/// Parses `source<TAB>target` lines into framed `(z, x)` pairs. Blank lines
/// are skipped and a trailing `\r` is dropped.
pub fn seq2seq_pairs(text: &[u8], vocab: &Vocabulary) -> Result<Vec<(Vec<TokenId>, Vec<TokenId>)>> {
    let mut pairs = Vec::new();
    for (n, line) in text.split(|&b| b == b'\n').enumerate() {
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let tab = line
            .iter()
            .position(|&b| b == b'\t')
            .ok_or_else(|| Error::Format(format!("corpus line {}: expected source<TAB>target", n + 1)))?;
        let z = encode(&line[..tab], vocab, true)?;
        let x = encode(&line[tab + 1..], vocab, true)?;
        pairs.push((z, x));
    }
    if pairs.is_empty() {
        return Err(Error::Format("corpus holds no source/target pairs".into()));
    }
    Ok(pairs)
}
