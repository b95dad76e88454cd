use std::path::Path;

use super::{write_atomic, IoError};
use crate::render::{LariMap, StoppingIndexMap, MAX_LAYERS};

pub const LARI_MAGIC: [u8; 4] = *b"LARI";
pub const LARI_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;
/// Flags bit 0: the intersection mask is present (derived from the indices).
pub const FLAG_MASK: u32 = 1;

/// `24 + H*W + 12*H*W*L` bytes.
pub fn lari_file_size(height: usize, width: usize, layers: usize) -> u64 {
    let pixels = height as u64 * width as u64;
    HEADER_LEN as u64 + pixels + 12 * pixels * layers as u64
}

fn check_pair(map: &LariMap, index: &StoppingIndexMap) -> Result<(), IoError> {
    if map.layers() > MAX_LAYERS {
        return Err(IoError::TooManyLayers(map.layers()));
    }
    if (map.height(), map.width()) != (index.height(), index.width()) {
        return Err(IoError::ShapeMismatch(format!(
            "map {}x{} vs index {}x{}",
            map.height(),
            map.width(),
            index.height(),
            index.width()
        )));
    }
    index.check_layers(map.layers())?;
    Ok(())
}

/// Serializes a map and its stopping index. Entries beyond each pixel's
/// stopping index are stored as 0.0; valid coordinates are narrowed to `f32`.
pub fn encode_lari(map: &LariMap, index: &StoppingIndexMap) -> Result<Vec<u8>, IoError> {
    check_pair(map, index)?;
    let (h, w, l) = (map.height(), map.width(), map.layers());
    let mut out = Vec::with_capacity(lari_file_size(h, w, l) as usize);
    out.extend_from_slice(&LARI_MAGIC);
    for v in [LARI_VERSION, h as u32, w as u32, l as u32, FLAG_MASK] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(index.as_slice());
    let data = map.as_slice();
    for (px, &c) in index.as_slice().iter().enumerate() {
        for layer in 0..l {
            for axis in 0..3 {
                let v = if layer < c as usize {
                    data[(px * l + layer) * 3 + axis] as f32
                } else {
                    0.0
                };
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

/// Parses a `.lari` byte buffer. Entries beyond each pixel's stopping index
/// come back as NaN.
pub fn decode_lari(bytes: &[u8]) -> Result<(LariMap, StoppingIndexMap), IoError> {
    if bytes.len() < 4 || bytes[..4] != LARI_MAGIC {
        return Err(IoError::CorruptHeader("missing LARI magic".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(IoError::TruncatedFile {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let version = u32_at(bytes, 4);
    if version != LARI_VERSION {
        return Err(IoError::VersionMismatch {
            found: version,
            expected: LARI_VERSION,
        });
    }
    let (h, w, l) = (
        u32_at(bytes, 8) as usize,
        u32_at(bytes, 12) as usize,
        u32_at(bytes, 16) as usize,
    );
    let flags = u32_at(bytes, 20);
    if l == 0 || l > MAX_LAYERS {
        return Err(IoError::CorruptHeader(format!("layer count {l} outside 1..={MAX_LAYERS}")));
    }
    if flags & !FLAG_MASK != 0 {
        return Err(IoError::CorruptHeader(format!("unknown flag bits {flags:#x}")));
    }
    let expected = lari_file_size(h, w, l);
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(IoError::TruncatedFile { expected, actual });
    }
    if actual > expected {
        return Err(IoError::CorruptBody(format!(
            "{} trailing bytes after the coordinates",
            actual - expected
        )));
    }
    let pixels = h * w;
    let indices = bytes[HEADER_LEN..HEADER_LEN + pixels].to_vec();
    if let Some(px) = indices.iter().position(|&c| c as usize > l) {
        return Err(IoError::CorruptBody(format!(
            "stopping index {} at pixel {px} exceeds layer count {l}",
            indices[px]
        )));
    }
    let coords = &bytes[HEADER_LEN + pixels..];
    let mut data = vec![f64::NAN; pixels * l * 3];
    for (px, &c) in indices.iter().enumerate() {
        for k in px * l * 3..(px * l + c as usize) * 3 {
            data[k] = f32::from_le_bytes(coords[4 * k..4 * k + 4].try_into().expect("4 bytes")) as f64;
        }
    }
    let map = LariMap::from_raw(h, w, l, data)?;
    let index = StoppingIndexMap::from_raw(h, w, indices)?;
    Ok((map, index))
}

/// Writes atomically and returns the number of bytes written.
pub fn write_lari(path: &Path, map: &LariMap, index: &StoppingIndexMap) -> Result<u64, IoError> {
    let bytes = encode_lari(map, index)?;
    write_atomic(path, &bytes)?;
    Ok(bytes.len() as u64)
}

pub fn read_lari(path: &Path) -> Result<(LariMap, StoppingIndexMap), IoError> {
    decode_lari(&std::fs::read(path).map_err(|e| IoError::io(path, e))?)
}
