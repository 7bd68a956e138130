//! SPPR proposal interchange file.
//!
//! Little-endian layout: `"SPPR"`, version `u32 = 1`, width, height,
//! proposal count `P` (all `u32`); then per proposal a score `f32`, a run
//! count `u32` and that many `(start u32, length u32)` runs over row-major
//! pixel order, sorted and non-overlapping.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{Proposal, ProposalSet};

const MAGIC: &[u8; 4] = b"SPPR";
const VERSION: u32 = 1;

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format {
        format: "SPPR",
        reason: reason.into(),
    }
}

pub fn write_proposals(path: impl AsRef<Path>, set: &ProposalSet) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        for v in [VERSION, set.width as u32, set.height as u32, set.len() as u32] {
            out.write_all(&v.to_le_bytes())?;
        }
        for p in &set.proposals {
            out.write_all(&(p.score as f32).to_le_bytes())?;
            out.write_all(&(p.runs.len() as u32).to_le_bytes())?;
            for &(s, l) in &p.runs {
                out.write_all(&s.to_le_bytes())?;
                out.write_all(&l.to_le_bytes())?;
            }
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.inner
            .read_exact(&mut b)
            .map_err(|_| format_err("unexpected end of file"))?;
        Ok(u32::from_le_bytes(b))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_bits(self.u32()?))
    }
}

/// Reads and validates an SPPR file against the expected image size.
pub fn load_proposals(path: impl AsRef<Path>, width: usize, height: usize) -> Result<ProposalSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut input = BufReader::new(file);
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|_| format_err("truncated header"))?;
    if &magic != MAGIC {
        return Err(format_err(format!("bad magic {magic:?}")));
    }
    let mut cur = Cursor { inner: input };
    let version = cur.u32()?;
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let (fw, fh, count) = (cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize);
    if (fw, fh) != (width, height) {
        return Err(Error::Dimension(format!(
            "SPPR is {fw}x{fh}, image is {width}x{height}"
        )));
    }
    let n = (width * height) as u64;
    let mut proposals = Vec::with_capacity(count.min(4096));
    for c in 0..count {
        let score = cur.f32()? as f64;
        if !score.is_finite() || score < 0.0 {
            return Err(format_err(format!("proposal {c}: invalid score {score}")));
        }
        let run_count = cur.u32()? as usize;
        let mut runs = Vec::with_capacity(run_count.min(1 << 16));
        let mut end = 0u64;
        for r in 0..run_count {
            let (start, len) = (cur.u32()?, cur.u32()?);
            if len == 0 {
                return Err(format_err(format!("proposal {c}: empty run {r}")));
            }
            if r > 0 && (start as u64) < end {
                return Err(format_err(format!("proposal {c}: run {r} overlaps or is unsorted")));
            }
            end = start as u64 + len as u64;
            if end > n {
                return Err(format_err(format!("proposal {c}: run {r} leaves the image")));
            }
            runs.push((start, len));
        }
        proposals.push(Proposal { score, runs });
    }
    let mut rest = Vec::new();
    cur.inner
        .read_to_end(&mut rest)
        .map_err(|e| Error::io(path, e))?;
    if !rest.is_empty() {
        return Err(format_err(format!("{} trailing bytes", rest.len())));
    }
    Ok(ProposalSet {
        width,
        height,
        proposals,
    })
}
