#![no_main]

use creff::harness::parse_config_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config_str(text, &[]) {
        let back = parse_config_str(&cfg.to_text(), &[]).expect("canonical text parses");
        assert_eq!(back, cfg);
    }
});
