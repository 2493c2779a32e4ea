//! On-disk formats.
//!
//! All indices in files are 0-based and half-open (`[start, end)`).
//! Text formats are tab-separated; bootstrap matrices and block results are
//! little-endian binary with a CRC-32 trailer.

pub mod matrix;
pub mod regions;
pub mod sumstats;
pub mod wire;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

pub use matrix::{read_matrix, read_matrix_from, write_matrix, write_matrix_to, MatrixFile};
pub use regions::{read_regions, read_regions_from, write_regions, RegionFile, RegionRecord};
pub use sumstats::{
    read_boot_matrix, read_boot_matrix_from, read_sumstats, read_sumstats_from, write_boot_matrix,
    write_sumstats, BootMatrixFile, SumstatsFile,
};
pub use wire::{deserialize_block_result, serialize_block_result, WIRE_VERSION};

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Splits a `##key<TAB>value` metadata line.
pub(crate) fn parse_meta(line: &str) -> Option<(String, String)> {
    let rest = line.strip_prefix("##")?;
    let (k, v) = rest.split_once('\t').unwrap_or((rest, ""));
    Some((k.to_string(), v.to_string()))
}

pub(crate) fn parse_f64(field: &str, path: &str, line: usize) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(path, line, format!("not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("non-finite value: {field:?}")));
    }
    Ok(v)
}

pub(crate) fn parse_u64(field: &str, path: &str, line: usize) -> Result<u64> {
    field
        .parse()
        .map_err(|_| Error::parse(path, line, format!("not a non-negative integer: {field:?}")))
}
