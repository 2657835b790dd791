//! On-disk `Φ⁻¹` tables.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "PHIINV01"                          8 bytes
//! version = 1, L, m, d, n             u32 each
//! record_count                        u64
//! records: j (1-based) u32, m·d source components u32, d target components u32
//! ```
//!
//! Records are sorted by target (lexicographic grid index), then `j`, then
//! source. The writer produces that order in passes over target ranges, each
//! holding at most `chunk_records` records in memory, so tables far larger
//! than RAM can be written. Reading is a single sequential sweep.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ifsnet_core::operators::{Discretization, InverseTable, OperatorError, TableError, TableShape};

pub const MAGIC: &[u8; 8] = b"PHIINV01";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 36;

#[derive(Debug, thiserror::Error)]
pub enum TableFileError {
    #[error("table file I/O: {0}")]
    Io(#[from] io::Error),
    #[error("not a table file (bad magic)")]
    BadMagic,
    #[error("unsupported table file version {0}")]
    BadVersion(u32),
    #[error("table file has {found} bytes, header implies {expected}")]
    BadLength { expected: u64, found: u64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Bytes per record for a table shape.
pub fn record_len(shape: &TableShape) -> u64 {
    4 * (1 + u64::from(shape.arity) * u64::from(shape.dim) + u64::from(shape.dim))
}

fn components(shape: &TableShape, id: u32, out: &mut Vec<u8>) {
    if shape.dim == 1 {
        out.extend_from_slice(&id.to_le_bytes());
    } else {
        let side = shape.n + 1;
        out.extend_from_slice(&(id / side).to_le_bytes());
        out.extend_from_slice(&(id % side).to_le_bytes());
    }
}

/// Writes `Φ⁻¹` for the net's points to `path`. The record count must be
/// within `budget`; at most `chunk_records` records are buffered at once
/// (a single target with more records is still written in one pass).
pub fn write_table(
    d: &Discretization<'_>,
    path: &Path,
    budget: u64,
    chunk_records: u64,
) -> Result<FileTable, TableFileError> {
    let shape = d.table_shape();
    let points = d.net().points();
    let total = d.check_budget(points.len(), budget)?;
    let grid_len = d.grid().len();
    let m = shape.arity as usize;
    let k = points.len() as u64;
    let per_map = total / u64::from(shape.maps);

    let mut counts = vec![0u64; grid_len];
    d.for_each_image(points, |_, _, t| counts[t as usize] += 1)?;

    // Contiguous target ranges of at most chunk_records records each.
    let mut ranges = Vec::new();
    let mut start = 0usize;
    let mut acc = 0u64;
    for (t, &c) in counts.iter().enumerate() {
        if acc > 0 && acc + c > chunk_records {
            ranges.push((start, t));
            start = t;
            acc = 0;
        }
        acc += c;
    }
    ranges.push((start, grid_len));

    let mut w = BufWriter::with_capacity(1 << 20, File::create(path)?);
    w.write_all(MAGIC)?;
    for v in [VERSION, shape.maps, shape.arity, shape.dim, shape.n] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&total.to_le_bytes())?;

    let mut buf = Vec::with_capacity(record_len(&shape) as usize);
    let mut digits = vec![0usize; m];
    for (lo, hi) in ranges {
        let size: u64 = counts[lo..hi].iter().sum();
        if size == 0 {
            continue;
        }
        // Stable counting sort of record ordinals by target.
        let mut offsets = vec![0usize; hi - lo + 1];
        for t in lo..hi {
            offsets[t - lo + 1] = offsets[t - lo] + counts[t] as usize;
        }
        let mut slots = vec![0u64; size as usize];
        let mut ordinal = 0u64;
        d.for_each_image(points, |_, _, t| {
            let t = t as usize;
            if (lo..hi).contains(&t) {
                slots[offsets[t - lo]] = ordinal;
                offsets[t - lo] += 1;
            }
            ordinal += 1;
        })?;
        let mut t = lo;
        let mut end = counts[lo] as usize;
        for (i, &r) in slots.iter().enumerate() {
            while i >= end {
                t += 1;
                end += counts[t] as usize;
            }
            let j = (r / per_map) as u32;
            let mut rest = r % per_map;
            for digit in digits.iter_mut().rev() {
                *digit = (rest % k) as usize;
                rest /= k;
            }
            buf.clear();
            buf.extend_from_slice(&(j + 1).to_le_bytes());
            for &p in &digits {
                components(&shape, points[p], &mut buf);
            }
            components(&shape, t as u32, &mut buf);
            w.write_all(&buf)?;
        }
    }
    w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    FileTable::open(path)
}

/// A table file opened for sweeping.
#[derive(Debug, Clone)]
pub struct FileTable {
    path: PathBuf,
    shape: TableShape,
    records: u64,
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

impl FileTable {
    /// Reads and checks the header and the file length.
    pub fn open(path: &Path) -> Result<Self, TableFileError> {
        let mut f = File::open(path)?;
        let len = f.metadata()?.len();
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic).map_err(|_| TableFileError::BadMagic)?;
        if &magic != MAGIC {
            return Err(TableFileError::BadMagic);
        }
        let version = read_u32(&mut f)?;
        if version != VERSION {
            return Err(TableFileError::BadVersion(version));
        }
        let shape = TableShape {
            maps: read_u32(&mut f)?,
            arity: read_u32(&mut f)?,
            dim: read_u32(&mut f)?,
            n: read_u32(&mut f)?,
        };
        let mut b = [0u8; 8];
        f.read_exact(&mut b)?;
        let records = u64::from_le_bytes(b);
        let expected = records
            .checked_mul(record_len(&shape))
            .and_then(|v| v.checked_add(HEADER_LEN))
            .unwrap_or(u64::MAX);
        if expected != len {
            return Err(TableFileError::BadLength { expected, found: len });
        }
        Ok(FileTable {
            path: path.to_path_buf(),
            shape,
            records,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn sweep_io(&self, f: &mut dyn FnMut(u32, usize, &[u32])) -> Result<(), TableError> {
        let io = |e: io::Error| TableError::Io(format!("{}: {e}", self.path.display()));
        let corrupt = |what: String| TableError::Corrupt(format!("{}: {what}", self.path.display()));
        let file = File::open(&self.path).map_err(io)?;
        let mut r = BufReader::with_capacity(1 << 20, file);
        let mut header = [0u8; HEADER_LEN as usize];
        r.read_exact(&mut header).map_err(io)?;

        let shape = self.shape;
        let m = shape.arity as usize;
        let d = shape.dim as usize;
        let side = shape.n + 1;
        let words = 1 + m * d + d;
        let mut raw = vec![0u8; 4 * words];
        let mut word = vec![0u32; words];
        let mut sources = vec![0u32; m];
        let mut last_target = 0u32;
        let to_id = |c: &[u32]| -> Option<u32> {
            if c.iter().any(|&v| v >= side) {
                return None;
            }
            Some(if d == 1 { c[0] } else { c[0] * side + c[1] })
        };
        for rec in 0..self.records {
            r.read_exact(&mut raw).map_err(io)?;
            for (w, bytes) in word.iter_mut().zip(raw.chunks_exact(4)) {
                *w = u32::from_le_bytes(bytes.try_into().expect("4 bytes"));
            }
            let j = word[0];
            if j == 0 || j > shape.maps {
                return Err(corrupt(format!("record {rec}: map index {j}")));
            }
            for (i, s) in sources.iter_mut().enumerate() {
                *s = to_id(&word[1 + i * d..1 + (i + 1) * d])
                    .ok_or_else(|| corrupt(format!("record {rec}: source off the grid")))?;
            }
            let target = to_id(&word[1 + m * d..]).ok_or_else(|| corrupt(format!("record {rec}: target off the grid")))?;
            if target < last_target {
                return Err(corrupt(format!("record {rec}: targets out of order")));
            }
            last_target = target;
            f(target, (j - 1) as usize, &sources);
        }
        Ok(())
    }
}

impl InverseTable for FileTable {
    fn shape(&self) -> TableShape {
        self.shape
    }

    fn record_count(&self) -> u64 {
        self.records
    }

    fn sweep(&self, f: &mut dyn FnMut(u32, usize, &[u32])) -> Result<(), TableError> {
        self.sweep_io(f)
    }
}
