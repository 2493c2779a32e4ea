//! Binary encoding of [`BlockResult`] for worker → central transport.
//!
//! ```text
//! b"BIRSBLK\0" | version u16 | payload_len u32 | payload | crc32(header ‖ payload)
//!
//! payload:
//!   block_id u32 | block_start u64 | block_end u64 | block_stat f64
//!   | n_boot u32 | seed u64 | n_detected u32
//!   | n_detected × (start u64, end u64, stat f64, threshold f64)
//!   | n_boot × m f64 | n_boot × l f64
//! ```
//!
//! All integers and floats are little-endian.

use crate::dbirs::BlockResult;
use crate::error::{Error, Result};
use crate::region::Region;
use crate::sbirs::Detection;

pub const WIRE_MAGIC: &[u8; 8] = b"BIRSBLK\0";
pub const WIRE_VERSION: u16 = 1;
const HEADER: usize = 8 + 2 + 4;

pub fn serialize_block_result(block: &BlockResult) -> Vec<u8> {
    let mut payload = Vec::with_capacity(44 + 32 * block.detected.len() + 16 * block.m_vec.len());
    payload.extend_from_slice(&block.block_id.to_le_bytes());
    payload.extend_from_slice(&(block.block_region.start as u64).to_le_bytes());
    payload.extend_from_slice(&(block.block_region.end as u64).to_le_bytes());
    payload.extend_from_slice(&block.block_stat.to_le_bytes());
    payload.extend_from_slice(&block.n_boot.to_le_bytes());
    payload.extend_from_slice(&block.seed.to_le_bytes());
    payload.extend_from_slice(&(block.detected.len() as u32).to_le_bytes());
    for d in &block.detected {
        payload.extend_from_slice(&(d.region.start as u64).to_le_bytes());
        payload.extend_from_slice(&(d.region.end as u64).to_le_bytes());
        payload.extend_from_slice(&d.stat.to_le_bytes());
        payload.extend_from_slice(&d.threshold.to_le_bytes());
    }
    for v in block.m_vec.iter().chain(&block.l_vec) {
        payload.extend_from_slice(&v.to_le_bytes());
    }

    let mut buf = Vec::with_capacity(HEADER + payload.len() + 4);
    buf.extend_from_slice(WIRE_MAGIC);
    buf.extend_from_slice(&WIRE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    buf.extend_from_slice(&payload);
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::CorruptPayload("payload ends early".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn index(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::CorruptPayload("index overflow".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::CorruptPayload("non-finite value".into()))
        }
    }

    /// `count` f64s, refusing counts the remaining bytes cannot hold.
    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        if count > self.buf.len() / 8 {
            return Err(Error::CorruptPayload(format!(
                "{count} values declared but only {} bytes remain",
                self.buf.len()
            )));
        }
        (0..count).map(|_| self.f64()).collect()
    }

    fn region(&mut self) -> Result<Region> {
        let start = self.index()?;
        let end = self.index()?;
        Region::new(start, end)
            .map_err(|_| Error::CorruptPayload(format!("invalid region [{start}, {end})")))
    }
}

pub fn deserialize_block_result(bytes: &[u8]) -> Result<BlockResult> {
    if bytes.len() < HEADER + 4 {
        return Err(Error::CorruptPayload(format!(
            "message too short ({} bytes)",
            bytes.len()
        )));
    }
    if &bytes[..8] != WIRE_MAGIC {
        return Err(Error::CorruptPayload("bad magic".into()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::CorruptPayload("checksum mismatch".into()));
    }
    let version = u16::from_le_bytes(body[8..10].try_into().unwrap());
    if version != WIRE_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: WIRE_VERSION,
        });
    }
    let len = u32::from_le_bytes(body[10..14].try_into().unwrap()) as usize;
    let payload = &body[HEADER..];
    if payload.len() != len {
        return Err(Error::CorruptPayload(format!(
            "payload length {} does not match header {len}",
            payload.len()
        )));
    }

    let mut c = Cursor { buf: payload };
    let block_id = c.u32()?;
    let block_region = c.region()?;
    let block_stat = c.f64()?;
    let n_boot = c.u32()?;
    let seed = c.u64()?;
    let n_detected = c.u32()? as usize;
    if n_detected > c.buf.len() / 32 {
        return Err(Error::CorruptPayload(format!(
            "{n_detected} detections declared but only {} bytes remain",
            c.buf.len()
        )));
    }
    let mut detected = Vec::with_capacity(n_detected);
    for _ in 0..n_detected {
        let region = c.region()?;
        let stat = c.f64()?;
        let threshold = c.f64()?;
        detected.push(Detection {
            region,
            stat,
            threshold,
        });
    }
    let m_vec = c.f64s(n_boot as usize)?;
    let l_vec = c.f64s(n_boot as usize)?;
    if !c.buf.is_empty() {
        return Err(Error::CorruptPayload(format!(
            "{} trailing bytes in payload",
            c.buf.len()
        )));
    }
    let block = BlockResult {
        block_id,
        block_region,
        detected,
        block_stat,
        m_vec,
        l_vec,
        n_boot,
        seed,
    };
    if !block.check_invariants() {
        return Err(Error::CorruptPayload(
            "block result violates its invariants".into(),
        ));
    }
    Ok(block)
}
