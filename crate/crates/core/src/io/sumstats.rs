//! Per-variant score files and the binary bootstrap matrix that goes with
//! them.
//!
//! Summary statistics are tab-separated:
//!
//! ```text
//! #birs-sumstats  1
//! ##seed  1
//! ##n_boot        1000
//! ##family        gaussian
//! ##model_hash    0123456789abcdef
//! ##boot_file     scores.boot
//! #index  position        maf     score
//! 0       78      0.0132  -0.4471
//! ```
//!
//! The bootstrap file is little-endian:
//!
//! ```text
//! b"BIRSBOOT" | version u16 | seed u64 | N u32 | p u32 | model_hash u64
//! | N·p f64 (row-major, row b = U^{e_b}) | crc32 of everything before
//! ```

use std::io::{BufRead, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{create, open, parse_f64, parse_meta, parse_u64};
use crate::error::{Error, Result};
use crate::score::ScoreSet;

pub const SUMSTATS_MAGIC: &str = "#birs-sumstats";
pub const SUMSTATS_VERSION: u16 = 1;
pub const BOOT_MAGIC: &[u8; 8] = b"BIRSBOOT";
pub const BOOT_VERSION: u16 = 1;
const BOOT_HEADER: usize = 8 + 2 + 8 + 4 + 4 + 8;
const COLUMNS: &str = "#index\tposition\tmaf\tscore";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SumstatsFile {
    pub meta: Vec<(String, String)>,
    pub positions: Vec<u64>,
    pub maf: Vec<f64>,
    pub scores: Vec<f64>,
}

impl SumstatsFile {
    pub fn new(positions: Vec<u64>, maf: Vec<f64>, scores: Vec<f64>) -> Result<Self> {
        if positions.len() != scores.len() || maf.len() != scores.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} positions, {} MAFs, {} scores",
                positions.len(),
                maf.len(),
                scores.len()
            )));
        }
        Ok(SumstatsFile {
            meta: Vec::new(),
            positions,
            maf,
            scores,
        })
    }

    pub fn with_meta(mut self, key: &str, value: &str) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn p(&self) -> usize {
        self.scores.len()
    }

    /// Pairs the scores with a bootstrap matrix, checking that they agree.
    pub fn score_set(&self, boot: BootMatrixFile) -> Result<ScoreSet> {
        if boot.values.ncols() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "sumstats has {} variants, bootstrap file has {}",
                self.p(),
                boot.values.ncols()
            )));
        }
        if let Some(seed) = self.meta("seed") {
            if seed.parse::<u64>().ok() != Some(boot.seed) {
                return Err(Error::InvalidInput(format!(
                    "sumstats seed {seed} does not match bootstrap seed {}",
                    boot.seed
                )));
            }
        }
        if let Some(hash) = self.meta("model_hash") {
            if u64::from_str_radix(hash, 16).ok() != Some(boot.model_hash) {
                return Err(Error::InvalidInput(
                    "sumstats and bootstrap file come from different null models".into(),
                ));
            }
        }
        ScoreSet::new(Array1::from(self.scores.clone()), boot.values, boot.seed)
    }
}

pub fn read_sumstats(path: &Path) -> Result<SumstatsFile> {
    read_sumstats_from(open(path)?, &path.display().to_string())
}

pub fn read_sumstats_from(reader: impl BufRead, name: &str) -> Result<SumstatsFile> {
    let mut out = SumstatsFile::default();
    let mut seen_magic = false;
    for (i, line) in reader.lines().enumerate() {
        let no = i + 1;
        let line = line.map_err(|e| Error::parse(name, no, e.to_string()))?;
        if !seen_magic {
            let mut f = line.split('\t');
            if f.next() != Some(SUMSTATS_MAGIC) {
                return Err(Error::parse(name, no, "missing #birs-sumstats header"));
            }
            let version = f
                .next()
                .and_then(|v| v.parse::<u16>().ok())
                .ok_or_else(|| Error::parse(name, no, "missing format version"))?;
            if version != SUMSTATS_VERSION {
                return Err(Error::VersionMismatch {
                    found: version,
                    expected: SUMSTATS_VERSION,
                });
            }
            seen_magic = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if let Some(kv) = parse_meta(&line) {
            out.meta.push(kv);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::parse(
                name,
                no,
                format!("expected 4 fields, found {}", f.len()),
            ));
        }
        let index = parse_u64(f[0], name, no)?;
        if index != out.scores.len() as u64 {
            return Err(Error::parse(
                name,
                no,
                format!("expected index {}, found {index}", out.scores.len()),
            ));
        }
        let pos = parse_u64(f[1], name, no)?;
        if out.positions.last().is_some_and(|&last| pos < last) {
            return Err(Error::parse(name, no, "positions are not sorted"));
        }
        let maf = parse_f64(f[2], name, no)?;
        if !(0.0..=0.5).contains(&maf) {
            return Err(Error::parse(name, no, format!("MAF {maf} outside [0, 0.5]")));
        }
        out.positions.push(pos);
        out.maf.push(maf);
        out.scores.push(parse_f64(f[3], name, no)?);
    }
    if !seen_magic {
        return Err(Error::parse(name, 1, "empty file"));
    }
    Ok(out)
}

pub fn write_sumstats(path: &Path, file: &SumstatsFile) -> Result<()> {
    let mut w = create(path)?;
    write_sumstats_to(&mut w, file).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sumstats_to(w: &mut impl Write, file: &SumstatsFile) -> std::io::Result<()> {
    writeln!(w, "{SUMSTATS_MAGIC}\t{SUMSTATS_VERSION}")?;
    for (k, v) in &file.meta {
        writeln!(w, "##{k}\t{v}")?;
    }
    writeln!(w, "{COLUMNS}")?;
    for j in 0..file.p() {
        writeln!(
            w,
            "{j}\t{}\t{}\t{}",
            file.positions[j], file.maf[j], file.scores[j]
        )?;
    }
    Ok(())
}

/// Decoded bootstrap file.
#[derive(Debug, Clone, PartialEq)]
pub struct BootMatrixFile {
    pub seed: u64,
    pub model_hash: u64,
    /// N×p.
    pub values: Array2<f64>,
}

impl BootMatrixFile {
    pub fn from_score_set(scores: &ScoreSet, model_hash: u64) -> Self {
        BootMatrixFile {
            seed: scores.seed,
            model_hash,
            values: scores.boot.clone(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let (n_boot, p) = self.values.dim();
        let mut buf = Vec::with_capacity(BOOT_HEADER + 8 * n_boot * p + 4);
        buf.extend_from_slice(BOOT_MAGIC);
        buf.extend_from_slice(&BOOT_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.extend_from_slice(&(n_boot as u32).to_le_bytes());
        buf.extend_from_slice(&(p as u32).to_le_bytes());
        buf.extend_from_slice(&self.model_hash.to_le_bytes());
        for v in self.values.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < BOOT_HEADER + 4 {
            return Err(Error::CorruptPayload(format!(
                "bootstrap file too short ({} bytes)",
                bytes.len()
            )));
        }
        if &bytes[..8] != BOOT_MAGIC {
            return Err(Error::CorruptPayload("bad bootstrap magic".into()));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(Error::CorruptPayload("bootstrap checksum mismatch".into()));
        }
        let version = u16::from_le_bytes(body[8..10].try_into().unwrap());
        if version != BOOT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: BOOT_VERSION,
            });
        }
        let seed = u64::from_le_bytes(body[10..18].try_into().unwrap());
        let n_boot = u32::from_le_bytes(body[18..22].try_into().unwrap()) as usize;
        let p = u32::from_le_bytes(body[22..26].try_into().unwrap()) as usize;
        let model_hash = u64::from_le_bytes(body[26..34].try_into().unwrap());
        let data = &body[BOOT_HEADER..];
        let expected = n_boot
            .checked_mul(p)
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| Error::CorruptPayload("bootstrap dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::CorruptPayload(format!(
                "bootstrap payload has {} bytes, header implies {expected}",
                data.len()
            )));
        }
        let mut values = Vec::with_capacity(n_boot * p);
        for chunk in data.chunks_exact(8) {
            let v = f64::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::CorruptPayload("non-finite pseudo-score".into()));
            }
            values.push(v);
        }
        let values = Array2::from_shape_vec((n_boot, p), values)
            .map_err(|e| Error::CorruptPayload(e.to_string()))?;
        Ok(BootMatrixFile {
            seed,
            model_hash,
            values,
        })
    }
}

pub fn read_boot_matrix(path: &Path) -> Result<BootMatrixFile> {
    read_boot_matrix_from(open(path)?).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        e => e,
    })
}

pub fn read_boot_matrix_from(mut reader: impl Read) -> Result<BootMatrixFile> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<reader>", e))?;
    BootMatrixFile::decode(&bytes)
}

pub fn write_boot_matrix(path: &Path, file: &BootMatrixFile) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(&file.encode())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sumstats_round_trip() {
        let f = SumstatsFile::new(vec![78, 156, 234], vec![0.01, 0.5, 0.25], vec![-0.5, 1e-17, 3.25])
            .unwrap()
            .with_meta("seed", "9")
            .with_meta("model_hash", "00000000000000ff");
        let mut buf = Vec::new();
        write_sumstats_to(&mut buf, &f).unwrap();
        let back = read_sumstats_from(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, f);

        let boot = BootMatrixFile {
            seed: 9,
            model_hash: 0xff,
            values: array![[1.0, 2.0, 3.0]],
        };
        assert!(back.score_set(boot.clone()).is_ok());
        let wrong = BootMatrixFile { seed: 10, ..boot };
        assert!(back.score_set(wrong).is_err());
    }

    #[test]
    fn sumstats_rejects_gaps_and_bad_maf() {
        let gap = "#birs-sumstats\t1\n0\t1\t0.1\t0.0\n2\t2\t0.1\t0.0\n";
        assert!(matches!(
            read_sumstats_from(gap.as_bytes(), "m"),
            Err(Error::Parse { line: 3, .. })
        ));
        let maf = "#birs-sumstats\t1\n0\t1\t0.7\t0.0\n";
        assert!(read_sumstats_from(maf.as_bytes(), "m").is_err());
        assert!(read_sumstats_from("".as_bytes(), "m").is_err());
    }

    #[test]
    fn boot_round_trip_and_corruption() {
        let f = BootMatrixFile {
            seed: u64::MAX,
            model_hash: 42,
            values: array![[0.5, -0.25], [1e-300, -0.0], [3.0, 4.0]],
        };
        let bytes = f.encode();
        let back = BootMatrixFile::decode(&bytes).unwrap();
        assert_eq!(back, f);
        for i in [0, 9, 20, BOOT_HEADER + 3, bytes.len() - 1] {
            let mut bad = bytes.clone();
            bad[i] ^= 0x01;
            assert!(BootMatrixFile::decode(&bad).is_err(), "flip at {i}");
        }
        assert!(BootMatrixFile::decode(&bytes[..bytes.len() - 8]).is_err());
    }

    #[test]
    fn boot_version_checked_after_crc() {
        let f = BootMatrixFile {
            seed: 1,
            model_hash: 2,
            values: array![[1.0]],
        };
        let mut bytes = f.encode();
        bytes[8] = 7;
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            BootMatrixFile::decode(&bytes),
            Err(Error::VersionMismatch { found: 7, .. })
        ));
    }
}
