#![no_main]

use ftx::tokenizer::{decode, encode, train_bpe};
use libfuzzer_sys::fuzz_target;

// First byte picks the vocabulary size, the rest is the corpus.
fuzz_target!(|data: &[u8]| {
    let Some((&size, corpus)) = data.split_first() else { return };
    let corpus = &corpus[..corpus.len().min(512)];
    let Ok(vocab) = train_bpe(corpus, size as usize) else { return };
    let ids = encode(corpus, &vocab, true).expect("corpus is covered by its own vocabulary");
    assert_eq!(decode(&ids, &vocab).unwrap(), corpus);
    assert!(ids[1..ids.len() - 1].iter().all(|&id| !vocab.is_special(id)));
});
