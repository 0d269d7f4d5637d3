//! Clip file container and raw-video import.
//!
//! Layout: magic `STAEV1` | F, C, H, W as u32 LE | F·C·H·W float32 LE values
//! in frame, channel, row, column order.

use thiserror::Error;

use crate::tensor::{ClipDims, TensorError, VideoTensor};

pub const CLIP_MAGIC: &[u8; 6] = b"STAEV1";
const HEADER_BYTES: usize = 6 + 4 * 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClipError {
    #[error("bad magic: not a clip file")]
    BadMagic,
    #[error("clip file is {actual} bytes, expected {expected}")]
    Length { expected: usize, actual: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub fn clip_to_bytes(x: &VideoTensor) -> Vec<u8> {
    let d = x.dims();
    let mut out = Vec::with_capacity(HEADER_BYTES + 4 * d.len());
    out.extend_from_slice(CLIP_MAGIC);
    for v in d.as_array() {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in x.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn clip_from_bytes(bytes: &[u8]) -> Result<VideoTensor, ClipError> {
    if bytes.len() < HEADER_BYTES {
        return Err(ClipError::Length {
            expected: HEADER_BYTES,
            actual: bytes.len(),
        });
    }
    if &bytes[..6] != CLIP_MAGIC {
        return Err(ClipError::BadMagic);
    }
    let field = |i: usize| {
        u32::from_le_bytes(bytes[6 + 4 * i..10 + 4 * i].try_into().expect("4 bytes")) as usize
    };
    let dims = ClipDims::new(field(0), field(1), field(2), field(3));
    dims.validate()?;
    let expected = dims
        .len()
        .checked_mul(4)
        .and_then(|n| n.checked_add(HEADER_BYTES))
        .ok_or(TensorError::InvalidDims(dims.as_array()))?;
    if bytes.len() != expected {
        return Err(ClipError::Length {
            expected,
            actual: bytes.len(),
        });
    }
    let data = bytes[HEADER_BYTES..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(VideoTensor::new(dims, data)?)
}

/// Planar 8-bit video (each frame stored as C full planes) scaled to [0, 1].
pub fn import_planar_u8(bytes: &[u8], dims: ClipDims) -> Result<VideoTensor, ClipError> {
    dims.validate()?;
    if bytes.len() != dims.len() {
        return Err(ClipError::Length {
            expected: dims.len(),
            actual: bytes.len(),
        });
    }
    let data = bytes.iter().map(|&b| b as f32 / 255.0).collect();
    Ok(VideoTensor::new(dims, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let x = VideoTensor::from_fn(ClipDims::new(2, 3, 4, 5), |f, c, h, w| {
            (f * 60 + c * 20 + h * 5 + w) as f32 * 0.1 - 3.0
        })
        .unwrap();
        let bytes = clip_to_bytes(&x);
        assert_eq!(bytes.len(), 22 + 4 * 120);
        assert_eq!(clip_from_bytes(&bytes).unwrap(), x);
    }

    #[test]
    fn corrupt_files_rejected() {
        let x = VideoTensor::filled(ClipDims::new(1, 1, 2, 2), 1.0).unwrap();
        let mut bytes = clip_to_bytes(&x);
        assert!(matches!(clip_from_bytes(&bytes[..10]), Err(ClipError::Length { .. })));
        assert!(matches!(
            clip_from_bytes(&bytes[..bytes.len() - 1]),
            Err(ClipError::Length { .. })
        ));
        bytes[0] = b'X';
        assert_eq!(clip_from_bytes(&bytes), Err(ClipError::BadMagic));
        let mut nan = clip_to_bytes(&x);
        let n = nan.len();
        nan[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(clip_from_bytes(&nan), Err(ClipError::Tensor(_))));
    }

    #[test]
    fn planar_import_scales() {
        let dims = ClipDims::new(1, 3, 1, 2);
        let x = import_planar_u8(&[0, 255, 51, 102, 0, 0], dims).unwrap();
        assert_eq!(x.get(0, 0, 0, 1), 1.0);
        assert_eq!(x.get(0, 1, 0, 0), 0.2);
        assert!(import_planar_u8(&[0; 5], dims).is_err());
    }
}
