#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = birs::io::read_sumstats_from(data, "fuzz") {
        assert_eq!(f.positions.len(), f.scores.len());
        assert!(f.positions.windows(2).all(|w| w[0] <= w[1]));
    }
});
