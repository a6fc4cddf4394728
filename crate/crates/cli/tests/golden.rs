mod common;

#[test]
fn transcripts_match() {
    let bad = common::check_goldens();
    assert!(bad.is_empty(), "transcripts differ: {bad:?}; rerun with FTX_BLESS=1 after an intended change");
}
