//! Replays the checked-in fuzz corpus through the same entry points and
//! checks the fuzz targets apply.

use std::path::PathBuf;

use birs::io::{
    deserialize_block_result, read_matrix_from, read_regions_from, read_sumstats_from,
    serialize_block_result, write_matrix_to, BootMatrixFile,
};

fn corpus(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn read_matrix_seeds() {
    let mut accepted = 0;
    for (path, data) in corpus("read_matrix") {
        if let Ok(m) = read_matrix_from(data.as_slice(), "seed") {
            let mut buf = Vec::new();
            write_matrix_to(&mut buf, &m).unwrap();
            assert_eq!(read_matrix_from(buf.as_slice(), "seed").unwrap(), m, "{}", path.display());
            accepted += 1;
        }
    }
    assert!(accepted > 0);
}

#[test]
fn read_regions_seeds() {
    let mut accepted = 0;
    for (_, data) in corpus("read_regions") {
        if let Ok(f) = read_regions_from(data.as_slice(), "seed") {
            assert!(f.validate().is_ok());
            accepted += 1;
        }
    }
    assert!(accepted > 0);
}

#[test]
fn read_sumstats_seeds() {
    for (path, data) in corpus("read_sumstats") {
        let f = read_sumstats_from(data.as_slice(), "seed").unwrap();
        assert_eq!(f.positions.len(), f.scores.len(), "{}", path.display());
    }
}

#[test]
fn read_boot_matrix_seeds() {
    for (path, data) in corpus("read_boot_matrix") {
        let b = BootMatrixFile::decode(&data).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(b.encode(), data);
    }
}

#[test]
fn deserialize_block_result_seeds() {
    for (path, data) in corpus("deserialize_block_result") {
        let b = deserialize_block_result(&data).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(b.check_invariants());
        assert_eq!(serialize_block_result(&b), data);
        // Every one-byte corruption of a real message is rejected.
        for i in 0..data.len() {
            let mut bad = data.clone();
            bad[i] ^= 0x5a;
            assert!(deserialize_block_result(&bad).is_err(), "byte {i}");
        }
    }
}
