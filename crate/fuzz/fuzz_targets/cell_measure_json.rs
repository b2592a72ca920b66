#![no_main]

use libfuzzer_sys::fuzz_target;
use polyaflow::CellMeasure;

fuzz_target!(|data: &[u8]| {
    let Ok(m) = serde_json::from_slice::<CellMeasure>(data) else {
        return;
    };
    assert!(m.masses().iter().all(|x| x.is_finite() && *x >= 0.0));
    let again: CellMeasure = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(again, m);
});
