//! Byte-level BPE tokenization.
//!
//! A [`Vocabulary`] assigns IDs `1..=N_V`. The first `N_V − 3` IDs are byte
//! strings: every distinct byte of the training corpus (ascending), followed
//! by one token per merge rule in the order the rules were learned. The top
//! three IDs are reserved: `mask = N_V − 2`, `bos = N_V − 1`, `eos = N_V`.
//! A character-level vocabulary is simply one with no merges.

mod file;

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

pub use file::{format_ids, parse_ids};

/// One-based token identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(pub u32);

impl TokenId {
    /// Zero-based position, i.e. the matching column of an embedding matrix.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(index: usize) -> Self {
        TokenId(index as u32 + 1)
    }

    /// `mask_token` of a vocabulary of size `n_v`.
    pub fn mask(n_v: usize) -> Self {
        TokenId(n_v as u32 - 2)
    }

    pub fn bos(n_v: usize) -> Self {
        TokenId(n_v as u32 - 1)
    }

    pub fn eos(n_v: usize) -> Self {
        TokenId(n_v as u32)
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<Vec<u8>>,
    base_len: usize,
    merges: Vec<(TokenId, TokenId)>,
    byte_ids: [Option<TokenId>; 256],
}

impl Vocabulary {
    /// Vocabulary with the given single bytes and no merges.
    pub fn from_alphabet(bytes: &[u8]) -> Self {
        let mut present = [false; 256];
        for &b in bytes {
            present[b as usize] = true;
        }
        let tokens: Vec<Vec<u8>> = (0..=255u8).filter(|&b| present[b as usize]).map(|b| vec![b]).collect();
        let base_len = tokens.len();
        Self::assemble(tokens, base_len, Vec::new())
    }

    fn assemble(tokens: Vec<Vec<u8>>, base_len: usize, merges: Vec<(TokenId, TokenId)>) -> Self {
        let mut byte_ids = [None; 256];
        for (i, t) in tokens[..base_len].iter().enumerate() {
            byte_ids[t[0] as usize] = Some(TokenId::from_index(i));
        }
        Vocabulary {
            tokens,
            base_len,
            merges,
            byte_ids,
        }
    }

    /// `N_V`, including the three special tokens.
    pub fn size(&self) -> usize {
        self.tokens.len() + 3
    }

    pub fn mask_token(&self) -> TokenId {
        TokenId::mask(self.size())
    }

    pub fn bos_token(&self) -> TokenId {
        TokenId::bos(self.size())
    }

    pub fn eos_token(&self) -> TokenId {
        TokenId::eos(self.size())
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        id >= self.mask_token() && id <= self.eos_token()
    }

    /// Number of single-byte tokens.
    pub fn alphabet_len(&self) -> usize {
        self.base_len
    }

    pub fn merges(&self) -> &[(TokenId, TokenId)] {
        &self.merges
    }

    /// Bytes of a non-special token.
    pub fn token_bytes(&self, id: TokenId) -> Option<&[u8]> {
        if id.0 == 0 {
            return None;
        }
        self.tokens.get(id.index()).map(Vec::as_slice)
    }

    pub fn byte_id(&self, byte: u8) -> Option<TokenId> {
        self.byte_ids[byte as usize]
    }

    pub(crate) fn tokens(&self) -> &[Vec<u8>] {
        &self.tokens
    }
}

/// Learns a BPE vocabulary of exactly `target_size` IDs (specials included).
///
/// Starts from the distinct bytes of `corpus` and repeatedly merges the most
/// frequent adjacent pair (overlapping occurrences counted). Ties go to the
/// lexicographically smallest `(left bytes, right bytes)`, then the smallest
/// IDs.
pub fn train_bpe(corpus: &[u8], target_size: usize) -> Result<Vocabulary> {
    let alphabet = Vocabulary::from_alphabet(corpus);
    let base_len = alphabet.base_len;
    if target_size < base_len + 3 {
        return Err(Error::Capacity(format!(
            "target size {target_size} is below {} (corpus alphabet {base_len} + 3 special tokens)",
            base_len + 3
        )));
    }
    let mut tokens = alphabet.tokens.clone();
    let mut merges = Vec::new();
    let mut seq: Vec<u32> = corpus
        .iter()
        .map(|&b| alphabet.byte_ids[b as usize].expect("alphabet covers corpus").0 - 1)
        .collect();

    let mut counts: HashMap<(u32, u32), usize> = HashMap::new();
    while tokens.len() < target_size - 3 {
        counts.clear();
        for w in seq.windows(2) {
            *counts.entry((w[0], w[1])).or_default() += 1;
        }
        let best = counts.iter().max_by(|(pa, ca), (pb, cb)| {
            ca.cmp(cb).then_with(|| {
                let ka = (&tokens[pa.0 as usize], &tokens[pa.1 as usize], *pa);
                let kb = (&tokens[pb.0 as usize], &tokens[pb.1 as usize], *pb);
                kb.cmp(&ka)
            })
        });
        let Some((&(left, right), _)) = best else {
            return Err(Error::Capacity(format!(
                "corpus supports at most {} tokens (+3 special), {} requested",
                tokens.len(),
                target_size
            )));
        };
        let new_id = tokens.len() as u32;
        let mut merged = tokens[left as usize].clone();
        merged.extend_from_slice(&tokens[right as usize]);
        tokens.push(merged);
        merges.push((TokenId(left + 1), TokenId(right + 1)));
        apply_merge(&mut seq, left, right, new_id);
    }
    Ok(Vocabulary::assemble(tokens, base_len, merges))
}

/// Replaces non-overlapping `(left, right)` occurrences, scanning left to right.
fn apply_merge(seq: &mut Vec<u32>, left: u32, right: u32, new_id: u32) {
    let mut out = 0;
    let mut i = 0;
    while i < seq.len() {
        if i + 1 < seq.len() && seq[i] == left && seq[i + 1] == right {
            seq[out] = new_id;
            i += 2;
        } else {
            seq[out] = seq[i];
            i += 1;
        }
        out += 1;
    }
    seq.truncate(out);
}

/// Encodes `text` by replaying the merges in training order.
///
/// With `frame`, the result is wrapped in `bos … eos`.
pub fn encode(text: &[u8], vocab: &Vocabulary, frame: bool) -> Result<Vec<TokenId>> {
    let mut seq = Vec::with_capacity(text.len());
    for &b in text {
        let id = vocab.byte_id(b).ok_or(Error::Coverage { byte: b })?;
        seq.push(id.0 - 1);
    }
    for (k, &(l, r)) in vocab.merges.iter().enumerate() {
        if seq.len() < 2 {
            break;
        }
        apply_merge(&mut seq, l.0 - 1, r.0 - 1, (vocab.base_len + k) as u32);
    }
    let mut ids = Vec::with_capacity(seq.len() + 2);
    if frame {
        ids.push(vocab.bos_token());
    }
    ids.extend(seq.into_iter().map(|i| TokenId(i + 1)));
    if frame {
        ids.push(vocab.eos_token());
    }
    Ok(ids)
}

/// Concatenates token bytes; special tokens are skipped.
pub fn decode(ids: &[TokenId], vocab: &Vocabulary) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for &id in ids {
        if id.0 == 0 || id.0 as usize > vocab.size() {
            return Err(Error::TokenRange {
                id: id.0 as usize,
                max: vocab.size(),
            });
        }
        if vocab.is_special(id) {
            continue;
        }
        out.extend_from_slice(&vocab.tokens[id.index()]);
    }
    Ok(out)
}

/// Consecutive non-overlapping pieces of at most `max_len` tokens.
pub fn chunk(ids: &[TokenId], max_len: usize) -> Vec<Vec<TokenId>> {
    assert!(max_len > 0, "chunk length must be positive");
    ids.chunks(max_len).map(<[TokenId]>::to_vec).collect()
}
