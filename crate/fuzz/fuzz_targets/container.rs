#![no_main]
//! Binary parameter container, then model reconstruction from it.

use hanforge::encoders::model_from_container;
use hanforge::layers::TensorContainer;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(c) = TensorContainer::from_bytes(data) else {
        return;
    };
    let bytes = c.to_bytes().expect("decoded container re-encodes");
    assert_eq!(TensorContainer::from_bytes(&bytes).expect("re-encoded container decodes"), c);
    // Arbitrary topologies must be rejected, never panic.
    let _ = model_from_container(c);
});
