//! Motion file formats.
//!
//! MBIN v1: magic `MBIN`, u32 version, u32 frame count, u32 feature width
//! (always 263), then frames * 263 little-endian f32 values. The importer
//! for headerless feature exports infers the frame count from file size.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::recover::recover_global_positions;
use super::{MotionSequence, FEATURE_DIM, JOINT_COUNT};

const MAGIC: &[u8; 4] = b"MBIN";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum MotionIoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes; not an MBIN file")]
    BadMagic,
    #[error("unsupported MBIN version {0}")]
    BadVersion(u32),
    #[error("feature width {0} != 263")]
    BadWidth(u32),
    #[error("file size {size} is not a whole number of {FEATURE_DIM}-float frames")]
    BadSize { size: u64 },
    #[error("non-finite value at frame {frame}, column {column}")]
    NonFinite { frame: usize, column: usize },
    #[error("empty motion file")]
    Empty,
}

pub fn write_mbin(m: &MotionSequence, path: &Path) -> Result<(), MotionIoError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(m.num_frames() as u32).to_le_bytes())?;
    w.write_all(&(FEATURE_DIM as u32).to_le_bytes())?;
    for &v in m.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_mbin(path: &Path) -> Result<MotionSequence, MotionIoError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(MotionIoError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(MotionIoError::BadVersion(version));
    }
    let n = read_u32(&mut r)? as usize;
    let h = read_u32(&mut r)?;
    if h as usize != FEATURE_DIM {
        return Err(MotionIoError::BadWidth(h));
    }
    if n == 0 {
        return Err(MotionIoError::Empty);
    }
    let data = read_f32s(&mut r, n * FEATURE_DIM)?;
    Ok(MotionSequence::new(n, data).expect("sized read"))
}

/// Imports a raw headerless frames x 263 f32 export. The frame count is
/// inferred from the file size; all values must be finite.
pub fn import_raw_features(path: &Path) -> Result<MotionSequence, MotionIoError> {
    let meta = std::fs::metadata(path)?;
    let size = meta.len();
    let frame_bytes = (FEATURE_DIM * 4) as u64;
    if size == 0 {
        return Err(MotionIoError::Empty);
    }
    if size % frame_bytes != 0 {
        return Err(MotionIoError::BadSize { size });
    }
    let n = (size / frame_bytes) as usize;
    let mut r = BufReader::new(File::open(path)?);
    let data = read_f32s(&mut r, n * FEATURE_DIM)?;
    for (i, &v) in data.iter().enumerate() {
        if !v.is_finite() {
            return Err(MotionIoError::NonFinite {
                frame: i / FEATURE_DIM,
                column: i % FEATURE_DIM,
            });
        }
    }
    Ok(MotionSequence::new(n, data).expect("sized read"))
}

/// Writes per-frame world joint positions as JSON keyframes for external
/// viewers: `{"fps": 20, "joints": 22, "frames": [[x, y, z] * 22, ...]}`.
pub fn export_anim_json(m: &MotionSequence, path: &Path) -> Result<(), MotionIoError> {
    let pos = recover_global_positions(m);
    let frames: Vec<Vec<[f32; 3]>> = (0..m.num_frames())
        .map(|t| {
            (0..JOINT_COUNT)
                .map(|j| {
                    let base = (t * JOINT_COUNT + j) * 3;
                    [pos[base], pos[base + 1], pos[base + 2]]
                })
                .collect()
        })
        .collect();
    let doc = serde_json::json!({
        "fps": super::FPS,
        "joints": JOINT_COUNT,
        "frames": frames,
    });
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &doc).map_err(std::io::Error::other)?;
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, MotionIoError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f32s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f32>, MotionIoError> {
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
