#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(b) = birs::io::deserialize_block_result(data) {
        assert!(b.check_invariants());
        assert_eq!(birs::io::serialize_block_result(&b), data);
    }
});
