//! Checkpoint and vocabulary files.
//!
//! Checkpoint layout, all integers little-endian:
//!
//! ```text
//! magic      4 bytes   "FTX1"
//! version    u32       1
//! arch       u32 len + UTF-8 tag ("ed", "e" or "d")
//! hyper      u32 len + UTF-8 "key=value\n" lines
//! count      u32       number of tensor records
//! record*    u32 len + UTF-8 name
//!            u8 rank (1 or 2)
//!            u32 × rank dims
//!            f64 × ∏dims payload
//! crc        u32       CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! Records appear in canonical parameter order. Vectors are written with
//! rank 1 and their single dimension.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{Arch, HyperParams, ModelParams};
use crate::tensor::Tensor;
use crate::tokenizer::Vocabulary;

pub const MAGIC: [u8; 4] = *b"FTX1";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

/// Serializes θ and its hyperparameters.
pub fn encode_checkpoint(params: &ModelParams) -> Vec<u8> {
    let payload: usize = params.tensors().iter().map(|t| 8 * t.len()).sum();
    let mut out = Vec::with_capacity(payload + 1024);
    out.extend_from_slice(&MAGIC);
    put_u32(&mut out, VERSION);
    put_str(&mut out, params.hp().arch.tag());
    put_str(&mut out, &params.hp().to_kv());
    put_u32(&mut out, params.specs().len() as u32);
    for (spec, t) in params.specs().iter().zip(params.tensors()) {
        put_str(&mut out, &spec.name);
        out.push(spec.dims.len() as u8);
        for &d in &spec.dims {
            put_u32(&mut out, d as u32);
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    put_u32(&mut out, crc);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated checkpoint while reading {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn str(&mut self, what: &str) -> Result<&'a str> {
        let n = self.u32(what)? as usize;
        std::str::from_utf8(self.take(n, what)?).map_err(|_| Error::Format(format!("{what} is not UTF-8")))
    }
}

/// Parses and validates a checkpoint held in memory.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    if bytes.len() < 4 {
        return Err(Error::Format("truncated checkpoint while reading magic".into()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("four bytes");
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    if bytes.len() < 12 {
        return Err(Error::Format("truncated checkpoint header".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("four bytes"));
    if version != VERSION {
        return Err(Error::BadVersion(version));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("four bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Crc { stored, computed });
    }

    let mut r = Reader { buf: body, pos: 8 };
    let arch: Arch = r
        .str("architecture tag")?
        .parse()
        .map_err(|e: Error| Error::Format(e.to_string()))?;
    let hp = HyperParams::from_kv(r.str("hyperparameters")?)?;
    if hp.arch != arch {
        return Err(Error::Format(format!(
            "header says {arch} but hyperparameters say {}",
            hp.arch
        )));
    }
    let count = r.u32("tensor count")? as usize;
    let mut named = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let name = r.str("tensor name")?.to_string();
        let rank = r.u8("tensor rank")?;
        let (rows, cols) = match rank {
            1 => (r.u32("tensor dims")? as usize, 1),
            2 => (r.u32("tensor dims")? as usize, r.u32("tensor dims")? as usize),
            _ => return Err(Error::Format(format!("tensor {name} has rank {rank}"))),
        };
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Format(format!("tensor {name} is too large")))?;
        let data: Vec<f64> = r
            .take(n, "tensor payload")?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("tensor {name} holds a non-finite value")));
        }
        named.push((name, Tensor::new(rows, cols, data)?));
    }
    if r.pos != body.len() {
        return Err(Error::Format(format!(
            "{} unexpected bytes after the last tensor",
            body.len() - r.pos
        )));
    }
    ModelParams::from_named(hp, named)
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers see either the old file or the complete new one.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    // temp files default to owner-only; outputs get ordinary permissions, still subject to umask
    #[cfg(unix)]
    builder.permissions(std::os::unix::fs::PermissionsExt::from_mode(0o644));
    let mut tmp = builder.tempfile_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    write_atomic(path, &encode_checkpoint(params))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

pub fn save_vocab(vocab: &Vocabulary, path: &Path) -> Result<()> {
    write_atomic(path, vocab.to_text().as_bytes())
}

pub fn load_vocab(path: &Path) -> Result<Vocabulary> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|_| Error::VocabFormat {
        line: 0,
        msg: "vocabulary file is not UTF-8".into(),
    })?;
    Vocabulary::from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Positional;
    use crate::tensor::NormMode;

    fn params(arch: Arch, seed: u64) -> ModelParams {
        let hp = HyperParams {
            arch,
            max_len: 5,
            layers: 1,
            dec_layers: if arch == Arch::EncoderDecoder { 1 } else { 0 },
            heads: 2,
            d_e: 4,
            d_attn: 2,
            d_mid: 2,
            d_mlp: 6,
            d_f: 3,
            vocab_size: 7,
            positional: Positional::Learned,
            tied: false,
            norm: NormMode::Standard,
        };
        ModelParams::init(hp, seed).unwrap()
    }

    #[test]
    fn round_trip_all_architectures() {
        for arch in [Arch::EncoderDecoder, Arch::Encoder, Arch::Decoder] {
            let p = params(arch, 1);
            let bytes = encode_checkpoint(&p);
            let q = decode_checkpoint(&bytes).unwrap();
            assert_eq!(p, q);
            for (a, b) in p.tensors().iter().zip(q.tensors()) {
                assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
            assert_eq!(encode_checkpoint(&q), bytes);
        }
    }

    #[test]
    fn header_errors_are_distinct() {
        let bytes = encode_checkpoint(&params(Arch::Decoder, 2));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad), Err(Error::BadMagic(_))));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(decode_checkpoint(&bad), Err(Error::BadVersion(2))));
        let mut bad = bytes.clone();
        let n = bad.len();
        bad[n - 20] ^= 0x01;
        assert!(matches!(decode_checkpoint(&bad), Err(Error::Crc { .. })));
    }

    #[test]
    fn every_truncation_fails_cleanly() {
        let bytes = encode_checkpoint(&params(Arch::Encoder, 3));
        for cut in 0..bytes.len() {
            assert!(decode_checkpoint(&bytes[..cut]).is_err(), "prefix {cut} accepted");
        }
    }

    /// Re-signs a modified body so only the semantic check can fail.
    fn resign(mut body: Vec<u8>) -> Vec<u8> {
        let crc = crc32fast::hash(&body);
        body.extend_from_slice(&crc.to_le_bytes());
        body
    }

    #[test]
    fn unknown_tensor_is_named() {
        let p = params(Arch::Decoder, 4);
        let bytes = encode_checkpoint(&p);
        let mut body = bytes[..bytes.len() - 4].to_vec();
        let count_at = {
            let mut r = Reader { buf: &body, pos: 8 };
            r.str("").unwrap();
            r.str("").unwrap();
            r.pos
        };
        let count = u32::from_le_bytes(body[count_at..count_at + 4].try_into().unwrap());
        body[count_at..count_at + 4].copy_from_slice(&(count + 1).to_le_bytes());
        put_str(&mut body, "W_extra");
        body.push(1);
        put_u32(&mut body, 1);
        body.extend_from_slice(&0f64.to_le_bytes());
        assert!(matches!(
            decode_checkpoint(&resign(body)),
            Err(Error::UnknownTensor(n)) if n == "W_extra"
        ));
    }

    #[test]
    fn missing_tensor_is_named() {
        let mut hp = params(Arch::Decoder, 0).hp().clone();
        hp.tied = true;
        let tied = ModelParams::init(hp.clone(), 5).unwrap();
        // Claim an untied model but ship the tied parameter list.
        let bytes = encode_checkpoint(&tied);
        let text = hp.to_kv();
        let untied = text.replace("tied=true", "tied=false");
        let body = &bytes[..bytes.len() - 4];
        let at = body.windows(text.len()).position(|w| w == text.as_bytes()).unwrap();
        let mut patched = body[..at - 4].to_vec();
        put_str(&mut patched, &untied);
        patched.extend_from_slice(&body[at + text.len()..]);
        assert!(matches!(
            decode_checkpoint(&resign(patched)),
            Err(Error::MissingTensor(n)) if n == "W_u"
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let bytes = encode_checkpoint(&params(Arch::Decoder, 6));
        let mut body = bytes[..bytes.len() - 4].to_vec();
        body.push(0);
        assert!(matches!(decode_checkpoint(&resign(body)), Err(Error::Format(_))));
    }

    #[test]
    fn file_round_trip_is_atomic_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ftx");
        let p = params(Arch::EncoderDecoder, 7);
        save(&p, &path).unwrap();
        let first = fs::read(&path).unwrap();
        save(&p, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
        assert_eq!(load(&path).unwrap(), p);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(matches!(load(&dir.path().join("absent")), Err(Error::Io { .. })));
    }
}
