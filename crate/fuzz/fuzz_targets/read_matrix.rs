#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = birs::io::read_matrix_from(data, "fuzz") {
        // Anything accepted must write back and re-read to the same thing.
        let mut buf = Vec::new();
        birs::io::write_matrix_to(&mut buf, &m).unwrap();
        let again = birs::io::read_matrix_from(buf.as_slice(), "fuzz").unwrap();
        assert_eq!(again, m);
    }
});
