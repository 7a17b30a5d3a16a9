#![no_main]

use hanforge::viz::{parse_trace, trace_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(record) = parse_trace(text) {
        let json = trace_to_json(&record).expect("valid trace serializes");
        assert_eq!(parse_trace(&json).expect("serialized trace parses"), record);
    }
});
