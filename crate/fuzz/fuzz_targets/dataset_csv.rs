#![no_main]

use hanforge::data::parse_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = parse_csv(data) {
        for a in &ds.articles {
            assert!(!a.uid.is_empty());
        }
    }
});
