#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(b) = birs::io::BootMatrixFile::decode(data) {
        assert_eq!(b.encode(), data);
    }
});
