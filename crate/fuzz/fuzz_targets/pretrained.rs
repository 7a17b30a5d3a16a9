#![no_main]
//! Pretrained embedding text parser.

use hanforge::data::parse_pretrained;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = parse_pretrained(text) {
        for v in p.token_to_vector.values() {
            assert_eq!(v.len(), p.dimension);
            assert!(v.iter().all(|x| x.is_finite()));
        }
    }
});
