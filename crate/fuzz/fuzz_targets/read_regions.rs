#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = birs::io::read_regions_from(data, "fuzz") {
        assert!(f.validate().is_ok());
    }
});
