//! Binary frame store.
//!
//! Layout (little-endian): magic "TWBF", version u16, dtype u16
//! (0 = u32 counts, 1 = f32), width, height, n_frames as u32, 16 zero bytes,
//! then the payload frame-major, row-major.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::stats::FrameStack;

pub const MAGIC: [u8; 4] = *b"TWBF";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 36;

// largest integer every value up to which an f32 holds exactly
const F32_EXACT: f32 = 16_777_216.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    U32 = 0,
    F32 = 1,
}

impl Dtype {
    fn from_code(code: u16) -> Result<Self> {
        match code {
            0 => Ok(Dtype::U32),
            1 => Ok(Dtype::F32),
            c => Err(Error::Store(format!(
                "unknown dtype code {c} at byte offset 6"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameStoreHeader {
    pub version: u16,
    pub dtype: Dtype,
    pub width: u32,
    pub height: u32,
    pub n_frames: u32,
}

impl FrameStoreHeader {
    pub fn payload_len(&self) -> u64 {
        self.width as u64 * self.height as u64 * self.n_frames as u64 * 4
    }

    fn to_bytes(self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6..8].copy_from_slice(&(self.dtype as u16).to_le_bytes());
        b[8..12].copy_from_slice(&self.width.to_le_bytes());
        b[12..16].copy_from_slice(&self.height.to_le_bytes());
        b[16..20].copy_from_slice(&self.n_frames.to_le_bytes());
        b
    }

    fn parse(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_LEN {
            return Err(Error::Store(format!(
                "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
                b.len()
            )));
        }
        if b[0..4] != MAGIC {
            return Err(Error::Store(format!(
                "bad magic {:?} at byte offset 0, expected \"TWBF\"",
                &b[0..4]
            )));
        }
        let u16_at = |o: usize| u16::from_le_bytes([b[o], b[o + 1]]);
        let u32_at = |o: usize| u32::from_le_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]]);
        let version = u16_at(4);
        if version != VERSION {
            return Err(Error::Store(format!(
                "unsupported version {version} at byte offset 4, expected {VERSION}"
            )));
        }
        Ok(FrameStoreHeader {
            version,
            dtype: Dtype::from_code(u16_at(6))?,
            width: u32_at(8),
            height: u32_at(12),
            n_frames: u32_at(16),
        })
    }
}

fn is_count(v: f32) -> bool {
    v >= 0.0 && v.fract() == 0.0 && v <= F32_EXACT
}

/// Smallest dtype that holds every value exactly.
pub fn natural_dtype(stack: &FrameStack) -> Dtype {
    if stack.data().iter().all(|&v| is_count(v)) {
        Dtype::U32
    } else {
        Dtype::F32
    }
}

fn dim(name: &str, v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Store(format!("{name} {v} exceeds u32")))
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let tmp = temp_path(path);
    let res = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        f(&mut w)?;
        w.into_inner()
            .map_err(|e| Error::Io(e.into_error()))?
            .sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res
}

/// Writes `stack` with its natural dtype.
pub fn write_store(stack: &FrameStack, path: &Path) -> Result<()> {
    write_store_as(stack, path, natural_dtype(stack))
}

pub fn write_store_as(stack: &FrameStack, path: &Path, dtype: Dtype) -> Result<()> {
    if dtype == Dtype::U32 {
        if let Some(k) = stack.data().iter().position(|&v| !is_count(v)) {
            return Err(Error::Store(format!(
                "value {} at element {k} is not an exact u32 count",
                stack.data()[k]
            )));
        }
    }
    let header = FrameStoreHeader {
        version: VERSION,
        dtype,
        width: dim("width", stack.width())?,
        height: dim("height", stack.height())?,
        n_frames: dim("frame count", stack.len())?,
    };
    write_atomic(path, |w| {
        w.write_all(&header.to_bytes())?;
        for &v in stack.data() {
            let bytes = match dtype {
                Dtype::U32 => (v as u32).to_le_bytes(),
                Dtype::F32 => v.to_le_bytes(),
            };
            w.write_all(&bytes)?;
        }
        Ok(())
    })
}

pub fn read_header(path: &Path) -> Result<FrameStoreHeader> {
    let mut b = Vec::with_capacity(HEADER_LEN);
    File::open(path)?
        .take(HEADER_LEN as u64)
        .read_to_end(&mut b)?;
    FrameStoreHeader::parse(&b)
}

pub fn read_store(path: &Path) -> Result<FrameStack> {
    let bytes = fs::read(path)?;
    let h = FrameStoreHeader::parse(&bytes)?;
    let have = (bytes.len() - HEADER_LEN) as u64;
    if have != h.payload_len() {
        return Err(Error::Store(format!(
            "payload length mismatch: header promises {} bytes ({}x{}x{} values) after offset \
             {HEADER_LEN}, file holds {have}",
            h.payload_len(),
            h.width,
            h.height,
            h.n_frames
        )));
    }
    let mut data = Vec::with_capacity(have as usize / 4);
    for (k, c) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let raw = [c[0], c[1], c[2], c[3]];
        let v = match h.dtype {
            Dtype::U32 => {
                let n = u32::from_le_bytes(raw);
                if n as f32 > F32_EXACT {
                    return Err(Error::Store(format!(
                        "count {n} at byte offset {} is not exactly representable",
                        HEADER_LEN + 4 * k
                    )));
                }
                n as f32
            }
            Dtype::F32 => {
                let v = f32::from_le_bytes(raw);
                if !v.is_finite() {
                    return Err(Error::Store(format!(
                        "non-finite value at byte offset {}",
                        HEADER_LEN + 4 * k
                    )));
                }
                v
            }
        };
        data.push(v);
    }
    FrameStack::from_raw(h.width as usize, h.height as usize, data)
}
