#![no_main]

use ftx::tokenizer::Vocabulary;
use ftx_cli::corpus::{lm_sequences, seq2seq_pairs};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let vocab = Vocabulary::from_alphabet(b"ab\t\n ");
    if let Ok(pairs) = seq2seq_pairs(data, &vocab) {
        assert!(pairs.iter().all(|(z, x)| z.len() >= 2 && x.len() >= 2));
    }
    if let Ok(seqs) = lm_sequences(data, &vocab, 6) {
        assert!(seqs.iter().all(|s| s.len() <= 6 && s.len() >= 3));
    }
});
