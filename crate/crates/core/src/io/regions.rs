//! BED-like region files.
//!
//! ```text
//! #birs-regions   1
//! ##config        {...}
//! #chrom  start_idx  end_idx  start_bp  end_bp  max_abs_stat  threshold
//! chr1    120        136      9360      10609   4.71          3.95
//! ```
//!
//! Index and base-pair intervals are half-open. Files from other tools may
//! omit the header and carry only the first three columns; missing fields
//! are written as `.`.

use std::io::{BufRead, Write};
use std::path::Path;

use super::{create, open, parse_f64, parse_meta, parse_u64};
use crate::error::{Error, Result};
use crate::region::Region;
use crate::sbirs::DetectionResult;

pub const REGIONS_MAGIC: &str = "#birs-regions";
pub const REGIONS_VERSION: u16 = 1;
pub const DEFAULT_CHROM: &str = "chr1";
const COLUMNS: &str = "#chrom\tstart_idx\tend_idx\tstart_bp\tend_bp\tmax_abs_stat\tthreshold";

#[derive(Debug, Clone, PartialEq)]
pub struct RegionRecord {
    pub chrom: String,
    pub region: Region,
    pub start_bp: Option<u64>,
    pub end_bp: Option<u64>,
    pub stat: Option<f64>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionFile {
    pub meta: Vec<(String, String)>,
    pub records: Vec<RegionRecord>,
}

impl RegionFile {
    /// Records for a detection result; `positions` supplies the bp columns.
    pub fn from_detection(result: &DetectionResult, positions: Option<&[u64]>) -> Self {
        let records = result
            .detections()
            .map(|d| RegionRecord {
                chrom: DEFAULT_CHROM.to_string(),
                region: d.region,
                start_bp: positions.map(|p| p[d.region.start]),
                end_bp: positions.map(|p| p[d.region.end - 1] + 1),
                stat: Some(d.stat),
                threshold: Some(d.threshold),
            })
            .collect();
        RegionFile {
            meta: Vec::new(),
            records,
        }
    }

    pub fn with_meta(mut self, key: &str, value: &str) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn regions(&self) -> Vec<Region> {
        self.records.iter().map(|r| r.region).collect()
    }

    /// Records sorted by start and pairwise disjoint.
    pub fn validate(&self) -> Result<()> {
        for w in self.records.windows(2) {
            if w[1].region.start < w[0].region.end {
                return Err(Error::InvalidInput(format!(
                    "regions {} and {} are unsorted or overlap",
                    w[0].region, w[1].region
                )));
            }
        }
        Ok(())
    }
}

pub fn read_regions(path: &Path) -> Result<RegionFile> {
    read_regions_from(open(path)?, &path.display().to_string())
}

fn opt<T>(field: Option<&str>, parse: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
    match field {
        None | Some(".") | Some("") => Ok(None),
        Some(s) => parse(s).map(Some),
    }
}

pub fn read_regions_from(reader: impl BufRead, name: &str) -> Result<RegionFile> {
    let mut out = RegionFile::default();
    for (i, line) in reader.lines().enumerate() {
        let no = i + 1;
        let line = line.map_err(|e| Error::parse(name, no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(kv) = parse_meta(&line) {
            out.meta.push(kv);
            continue;
        }
        if line.starts_with(REGIONS_MAGIC) {
            let version = line
                .split('\t')
                .nth(1)
                .and_then(|v| v.parse::<u16>().ok())
                .ok_or_else(|| Error::parse(name, no, "missing format version"))?;
            if version != REGIONS_VERSION {
                return Err(Error::VersionMismatch {
                    found: version,
                    expected: REGIONS_VERSION,
                });
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 3 || f.len() > 7 {
            return Err(Error::parse(
                name,
                no,
                format!("expected 3 to 7 tab-separated fields, found {}", f.len()),
            ));
        }
        let start = parse_u64(f[1], name, no)? as usize;
        let end = parse_u64(f[2], name, no)? as usize;
        let region = Region::new(start, end)
            .map_err(|_| Error::parse(name, no, format!("empty region [{start}, {end})")))?;
        out.records.push(RegionRecord {
            chrom: f[0].to_string(),
            region,
            start_bp: opt(f.get(3).copied(), |s| parse_u64(s, name, no))?,
            end_bp: opt(f.get(4).copied(), |s| parse_u64(s, name, no))?,
            stat: opt(f.get(5).copied(), |s| parse_f64(s, name, no))?,
            threshold: opt(f.get(6).copied(), |s| parse_f64(s, name, no))?,
        });
    }
    out.validate()
        .map_err(|e| Error::parse(name, 0, e.to_string()))?;
    Ok(out)
}

pub fn write_regions(path: &Path, file: &RegionFile) -> Result<()> {
    let mut w = create(path)?;
    write_regions_to(&mut w, file).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_regions_to(w: &mut impl Write, file: &RegionFile) -> std::io::Result<()> {
    writeln!(w, "{REGIONS_MAGIC}\t{REGIONS_VERSION}")?;
    for (k, v) in &file.meta {
        writeln!(w, "##{k}\t{v}")?;
    }
    writeln!(w, "{COLUMNS}")?;
    fn dot<T: ToString>(v: Option<T>) -> String {
        v.map(|x| x.to_string()).unwrap_or_else(|| ".".into())
    }
    for r in &file.records {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.chrom,
            r.region.start,
            r.region.end,
            dot(r.start_bp),
            dot(r.end_bp),
            dot(r.stat),
            dot(r.threshold)
        )?;
    }
    Ok(())
}
