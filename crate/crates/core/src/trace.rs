//! Hidden-state trace model and the `BTRC` binary container.
//!
//! A trace holds, for each branch pair, the post-branch hidden states of
//! branch A and branch B over a common length `n`. Shared-prefix states are
//! never stored; the divergence and all dependency measures only look at
//! positions after the branch point.
//!
//! Container layout (all integers and floats little-endian):
//!
//! ```text
//! magic "BTRC" | version u16 = 1 | flags u16 = 0 | dim u32 | sample_count u32
//! | metadata_len u32 | metadata (UTF-8 JSON object, metadata_len bytes)
//! | per sample: n u32 | branch A (n*dim f32, position-major) | branch B (n*dim f32)
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"BTRC";
pub const VERSION: u16 = 1;
/// Bytes before the metadata blob.
pub const HEADER_LEN: usize = 20;

/// One shared-prefix sample: two equal-length hidden-state sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPairTrace {
    dim: usize,
    branch_a: Vec<f32>,
    branch_b: Vec<f32>,
}

impl BranchPairTrace {
    /// Builds a pair from position-major buffers of `n * dim` floats each.
    pub fn new(dim: usize, branch_a: Vec<f32>, branch_b: Vec<f32>) -> Result<Self> {
        let pair = Self {
            dim,
            branch_a,
            branch_b,
        };
        pair.validate(0)?;
        Ok(pair)
    }

    /// Builds a pair from per-position rows.
    pub fn from_rows(rows_a: &[Vec<f32>], rows_b: &[Vec<f32>]) -> Result<Self> {
        let dim = rows_a.first().map_or(0, Vec::len);
        if rows_a.iter().chain(rows_b).any(|r| r.len() != dim) {
            return Err(Error::ShapeMismatch("rows have unequal lengths".into()));
        }
        Self::new(dim, rows_a.concat(), rows_b.concat())
    }

    /// Builds a pair from branches of different lengths by keeping the first
    /// `min(len_a, len_b)` positions of each.
    pub fn truncated(dim: usize, mut branch_a: Vec<f32>, mut branch_b: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let keep = branch_a.len().min(branch_b.len()) / dim * dim;
        branch_a.truncate(keep);
        branch_b.truncate(keep);
        Self::new(dim, branch_a, branch_b)
    }

    fn validate(&self, sample: usize) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if self.branch_a.len() != self.branch_b.len() || !self.branch_a.len().is_multiple_of(self.dim) {
            return Err(Error::ShapeMismatch(format!(
                "sample {sample}: branch lengths {} and {} are not equal multiples of dim {}",
                self.branch_a.len(),
                self.branch_b.len(),
                self.dim
            )));
        }
        if self.branch_a.is_empty() {
            return Err(Error::EmptySample(sample));
        }
        for (branch, data) in [('A', &self.branch_a), ('B', &self.branch_b)] {
            if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    sample,
                    branch,
                    position: idx / self.dim,
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of post-branch positions.
    pub fn len(&self) -> usize {
        self.branch_a.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.branch_a.is_empty()
    }

    /// Hidden state of branch A at 0-based position `i`.
    pub fn a(&self, i: usize) -> &[f32] {
        &self.branch_a[i * self.dim..(i + 1) * self.dim]
    }

    /// Hidden state of branch B at 0-based position `i`.
    pub fn b(&self, i: usize) -> &[f32] {
        &self.branch_b[i * self.dim..(i + 1) * self.dim]
    }

    pub fn branch_a(&self) -> &[f32] {
        &self.branch_a
    }

    pub fn branch_b(&self) -> &[f32] {
        &self.branch_b
    }

    /// Applies `f` to every stored value of both branches.
    pub fn map_values(&self, mut f: impl FnMut(f32) -> f32) -> Result<Self> {
        Self::new(
            self.dim,
            self.branch_a.iter().map(|&v| f(v)).collect(),
            self.branch_b.iter().map(|&v| f(v)).collect(),
        )
    }
}

/// A population of branch pairs sharing one hidden dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    dim: usize,
    samples: Vec<BranchPairTrace>,
    metadata: BTreeMap<String, String>,
}

impl TraceSet {
    pub fn new(
        dim: usize,
        samples: Vec<BranchPairTrace>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        for (idx, s) in samples.iter().enumerate() {
            if s.dim != dim {
                return Err(Error::DimMismatch {
                    sample: idx,
                    expected: dim,
                    found: s.dim,
                });
            }
        }
        Ok(Self {
            dim,
            samples,
            metadata,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[BranchPairTrace] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.metadata
    }

    /// Longest sample length, 0 for an empty set.
    pub fn max_len(&self) -> usize {
        self.samples.iter().map(BranchPairTrace::len).max().unwrap_or(0)
    }

    /// Same set with the samples reordered by `order` (a permutation of indices).
    pub fn reordered(&self, order: &[usize]) -> Self {
        Self {
            dim: self.dim,
            samples: order.iter().map(|&i| self.samples[i].clone()).collect(),
            metadata: self.metadata.clone(),
        }
    }

    /// Exact size in bytes of the encoded container.
    pub fn encoded_len(&self) -> usize {
        let meta = metadata_json(&self.metadata).len();
        HEADER_LEN
            + meta
            + self
                .samples
                .iter()
                .map(|s| 4 + 4 * (s.branch_a.len() + s.branch_b.len()))
                .sum::<usize>()
    }

    /// Serializes into the container format.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let meta = metadata_json(&self.metadata);
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&0u16.to_le_bytes())?;
        w.write_all(&to_u32(self.dim, "dim")?.to_le_bytes())?;
        w.write_all(&to_u32(self.samples.len(), "sample_count")?.to_le_bytes())?;
        w.write_all(&to_u32(meta.len(), "metadata_len")?.to_le_bytes())?;
        w.write_all(meta.as_bytes())?;
        for s in &self.samples {
            w.write_all(&to_u32(s.len(), "n")?.to_le_bytes())?;
            for v in s.branch_a.iter().chain(&s.branch_b) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Parses a container from an in-memory buffer.
    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut cur = Cursor { buf, pos: 0 };
        let magic: [u8; 4] = cur
            .take(4)
            .map_err(|_| Error::BadMagic([0; 4]))?
            .try_into()
            .expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = cur.u16()?;
        if version != VERSION {
            return Err(Error::VersionUnsupported(version));
        }
        let flags = cur.u16()?;
        if flags != 0 {
            return Err(Error::UnsupportedFlags(flags));
        }
        let dim = cur.u32()? as usize;
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let sample_count = cur.u32()? as usize;
        let meta_len = cur.u32()? as usize;
        let meta_bytes = cur.take(meta_len)?;
        let metadata = parse_metadata(meta_bytes)?;

        let mut samples = Vec::with_capacity(sample_count.min(1 << 16));
        for idx in 0..sample_count {
            let n = cur.u32()? as usize;
            if n == 0 {
                return Err(Error::EmptySample(idx));
            }
            let floats = n.checked_mul(dim).ok_or_else(|| {
                Error::ShapeMismatch(format!("sample {idx}: n * dim overflows"))
            })?;
            let branch_a = cur.f32s(floats)?;
            let branch_b = cur.f32s(floats)?;
            let pair = BranchPairTrace {
                dim,
                branch_a,
                branch_b,
            };
            pair.validate(idx)?;
            samples.push(pair);
        }
        if cur.pos != buf.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} trailing bytes after {} declared samples",
                buf.len() - cur.pos,
                sample_count
            )));
        }
        Self::new(dim, samples, metadata)
    }
}

/// Reads and validates a trace container from disk.
pub fn read_trace_file(path: impl AsRef<Path>) -> Result<TraceSet> {
    let mut buf = Vec::new();
    File::open(path)?.read_to_end(&mut buf)?;
    TraceSet::from_bytes(&buf)
}

/// Writes `set` to `path` in the container format.
pub fn write_trace_file(set: &TraceSet, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    set.write_to(BufWriter::new(file))
}

fn metadata_json(meta: &BTreeMap<String, String>) -> String {
    serde_json::to_string(meta).expect("string map always serializes")
}

fn parse_metadata(bytes: &[u8]) -> Result<BTreeMap<String, String>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::InvalidMetadata(e.to_string()))?;
    serde_json::from_str(text).map_err(|e| Error::InvalidMetadata(e.to_string()))
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::ShapeMismatch(format!("{what} = {v} exceeds u32")))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let out = &self.buf[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::ShapeMismatch(format!(
                "payload truncated: need {len} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            ))),
        }
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f32>> {
        let bytes = count
            .checked_mul(4)
            .ok_or_else(|| Error::ShapeMismatch("payload size overflows".into()))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}
