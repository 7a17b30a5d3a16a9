#![no_main]

use hanforge::data::{Vocabulary, RESERVED};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(v) = Vocabulary::parse_file(text) {
        let again = Vocabulary::parse_file(&v.to_file_string()).expect("written vocabulary parses");
        assert_eq!(again, v);
        for (id, tok) in v.tokens().iter().enumerate() {
            assert_eq!(v.id(tok), Some(id + RESERVED));
        }
    }
});
