#![no_main]
//! Sentence splitting and word tokenization on arbitrary text.

use hanforge::data::{split_sentences, tokenize_words};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for sentence in split_sentences(text) {
        let tokens = tokenize_words(&sentence);
        assert!(tokens.iter().all(|t| !t.is_empty()));
        assert_eq!(tokenize_words(&tokens.join(" ")), tokens);
    }
});
