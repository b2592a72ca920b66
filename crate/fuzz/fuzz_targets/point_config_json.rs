#![no_main]

use libfuzzer_sys::fuzz_target;
use polyaflow::measures::cell_counts;
use polyaflow::PointConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(c) = serde_json::from_slice::<PointConfig>(data) else {
        return;
    };
    let counts = cell_counts(&c);
    assert_eq!(counts.iter().sum::<u64>(), c.total());
    let again: PointConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(again, c);
});
