#![no_main]

use ftx::tokenizer::{format_ids, parse_ids};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(seqs) = parse_ids(text, 1000) {
        let written: String = seqs.iter().map(|s| format_ids(s) + "\n").collect();
        assert_eq!(parse_ids(&written, 1000).unwrap(), seqs);
    }
});
