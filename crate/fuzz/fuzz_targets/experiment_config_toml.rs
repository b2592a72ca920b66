#![no_main]

use libfuzzer_sys::fuzz_target;
use polyaflow::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = ExperimentConfig::from_toml(text) {
        assert!(config.problems().is_empty());
        let again = ExperimentConfig::from_toml(&config.to_toml()).unwrap();
        assert_eq!(again, config);
    } else if let Ok(config) = ExperimentConfig::parse(text) {
        assert!(!config.problems().is_empty());
    }
});
