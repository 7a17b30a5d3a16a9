#![no_main]
//! JSON-lines dataset parser. Accepted input must survive re-serialization.

use hanforge::data::{parse_jsonl, to_jsonl};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = parse_jsonl(data) {
        let again = parse_jsonl(to_jsonl(&ds.articles).as_bytes()).expect("re-serialized dataset parses");
        assert_eq!(again.articles, ds.articles);
        assert!(again.rejected.is_empty());
    }
});
