//! Half-open index intervals over the variant axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A half-open interval `[start, end)` of variant indices. Never empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Region {
    pub start: usize,
    pub end: usize,
}

impl Region {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::EmptyRegion);
        }
        Ok(Region { start, end })
    }

    /// `[0, len)`.
    pub fn full(len: usize) -> Result<Self> {
        Region::new(0, len)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index < self.end
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &Region) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn check_bounds(&self, len: usize) -> Result<()> {
        if self.start >= self.end {
            return Err(Error::EmptyRegion);
        }
        if self.end > len {
            return Err(Error::RegionOutOfBounds {
                start: self.start,
                end: self.end,
                len,
            });
        }
        Ok(())
    }

    /// Splits at `start + len/2`; the left child gets `floor(len/2)` indices.
    /// Requires `len >= 2`.
    pub fn halves(&self) -> (Region, Region) {
        debug_assert!(self.len() >= 2);
        let mid = self.start + self.len() / 2;
        (
            Region {
                start: self.start,
                end: mid,
            },
            Region {
                start: mid,
                end: self.end,
            },
        )
    }

    pub fn shift(&self, offset: usize) -> Region {
        Region {
            start: self.start + offset,
            end: self.end + offset,
        }
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Sorts regions and merges those that overlap or touch (gap 0). Regions
/// separated by one or more indices stay apart.
pub fn merge_adjacent(regions: &[Region]) -> Vec<Region> {
    let mut sorted = regions.to_vec();
    sorted.sort();
    let mut out: Vec<Region> = Vec::with_capacity(sorted.len());
    for r in sorted {
        match out.last_mut() {
            Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
            _ => out.push(r),
        }
    }
    out
}

/// Number of distinct indices covered by the union of `regions`.
pub fn union_len(regions: &[Region]) -> usize {
    merge_adjacent(regions).iter().map(Region::len).sum()
}

/// Number of indices in `(∪a) ∩ (∪b)`.
pub fn intersection_len(a: &[Region], b: &[Region]) -> usize {
    let a = merge_adjacent(a);
    let b = merge_adjacent(b);
    let (mut i, mut j, mut total) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].start.max(b[j].start);
        let hi = a[i].end.min(b[j].end);
        if lo < hi {
            total += hi - lo;
        }
        if a[i].end < b[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// True when every index of `inner` is covered by the union of `outer`.
pub fn covered_by(inner: &[Region], outer: &[Region]) -> bool {
    intersection_len(inner, outer) == union_len(inner)
}
