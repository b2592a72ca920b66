#![no_main]

use libfuzzer_sys::fuzz_target;
use polyaflow::FlowSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<FlowSpec>(data) else {
        return;
    };
    // deserialization does not validate; problems() must not panic either way
    let _ = spec.problems();
    let _ = spec.rho_config();
});
