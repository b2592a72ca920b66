#![no_main]

use libfuzzer_sys::fuzz_target;
use polyaflow::{exit_limit, Path};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for line in text.lines() {
        let Ok(p) = serde_json::from_str::<Path>(line) else {
            continue;
        };
        assert_eq!(p.monotonicity_violations(), 0);
        let _ = exit_limit(&p);
        let again: Path = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(again, p);
    }
});
