//! Named parameter arrays and the `STAEW1` container they are stored in.
//!
//! File layout, all integers little-endian:
//!
//! ```text
//! magic "STAEW1" | entry count u32
//! per entry: name length u16 | UTF-8 name | rank u8 | dims u32×rank | payload offset u64
//! payload: f32 LE values; each entry's offset is in bytes from the payload start
//! ```

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::{mlp_hidden_width, Conv2d, Conv3d, Linear, Mlp, TensorError};

pub const WEIGHT_MAGIC: &[u8; 6] = b"STAEW1";

#[derive(Debug, Clone, PartialEq)]
pub struct WeightArray {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl WeightArray {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(TensorError::WeightFormat(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightBundle {
    entries: BTreeMap<String, WeightArray>,
}

impl WeightBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        data: Vec<f32>,
    ) -> Result<(), TensorError> {
        self.entries.insert(name.into(), WeightArray::new(shape, data)?);
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Result<&WeightArray, TensorError> {
        self.entries
            .get(name)
            .ok_or_else(|| TensorError::MissingWeight(name.to_string()))
    }

    /// Fetch an entry and require an exact shape.
    pub fn array(&self, name: &str, shape: &[usize]) -> Result<&[f32], TensorError> {
        let a = self.get(name)?;
        if a.shape != shape {
            return Err(TensorError::WeightShape {
                name: name.to_string(),
                expected: shape.to_vec(),
                actual: a.shape.clone(),
            });
        }
        Ok(&a.data)
    }

    pub fn linear(&self, prefix: &str, inp: usize, out: usize) -> Result<Linear, TensorError> {
        let w = self.array(&format!("{prefix}.weight"), &[out, inp])?;
        let b = self.array(&format!("{prefix}.bias"), &[out])?;
        Linear::new(inp, out, w.to_vec(), b.to_vec())
    }

    /// The frame-attention bottleneck for a clip of `frames` frames.
    pub fn mlp(&self, prefix: &str, frames: usize) -> Result<Mlp, TensorError> {
        let hidden = mlp_hidden_width(frames);
        Mlp::new(
            self.linear(&format!("{prefix}.0"), frames, hidden)?,
            self.linear(&format!("{prefix}.1"), hidden, frames)?,
        )
    }

    pub fn conv2d(
        &self,
        prefix: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
    ) -> Result<Conv2d, TensorError> {
        let w = self.array(&format!("{prefix}.weight"), &[c_out, c_in, k, k])?;
        let b = self.array(&format!("{prefix}.bias"), &[c_out])?;
        Conv2d::new(c_in, c_out, k, w.to_vec(), b.to_vec())
    }

    pub fn conv3d(
        &self,
        prefix: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
    ) -> Result<Conv3d, TensorError> {
        let w = self.array(&format!("{prefix}.weight"), &[c_out, c_in, k, k, k])?;
        let b = self.array(&format!("{prefix}.bias"), &[c_out])?;
        Conv3d::new(c_in, c_out, k, w.to_vec(), b.to_vec())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = Vec::new();
        header.extend_from_slice(WEIGHT_MAGIC);
        header.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        let mut offset = 0u64;
        for (name, arr) in &self.entries {
            header.extend_from_slice(&(name.len() as u16).to_le_bytes());
            header.extend_from_slice(name.as_bytes());
            header.push(arr.shape.len() as u8);
            for &d in &arr.shape {
                header.extend_from_slice(&(d as u32).to_le_bytes());
            }
            header.extend_from_slice(&offset.to_le_bytes());
            offset += 4 * arr.data.len() as u64;
        }
        for arr in self.entries.values() {
            for v in &arr.data {
                header.extend_from_slice(&v.to_le_bytes());
            }
        }
        header
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TensorError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(6)? != WEIGHT_MAGIC {
            return Err(TensorError::WeightFormat("bad magic".into()));
        }
        let count = r.u32()? as usize;
        let mut table = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| TensorError::WeightFormat("entry name is not UTF-8".into()))?
                .to_string();
            let rank = r.take(1)?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let offset = r.u64()?;
            table.push((name, shape, offset));
        }
        let payload = &bytes[r.pos..];
        let mut bundle = WeightBundle::new();
        for (name, shape, offset) in table {
            let n: usize = shape.iter().product();
            let start = usize::try_from(offset)
                .map_err(|_| TensorError::WeightFormat(format!("offset overflow in `{name}`")))?;
            let end = start
                .checked_add(4 * n)
                .filter(|&e| e <= payload.len())
                .ok_or_else(|| {
                    TensorError::WeightFormat(format!("payload of `{name}` out of bounds"))
                })?;
            let data = payload[start..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if bundle.contains(&name) {
                return Err(TensorError::WeightFormat(format!("duplicate entry `{name}`")));
            }
            bundle.insert(name, shape, data)?;
        }
        Ok(bundle)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TensorError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| TensorError::WeightFormat("truncated header".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u16(&mut self) -> Result<u16, TensorError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, TensorError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, TensorError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Deterministic pseudo-random parameters for running the pipeline without
/// trained weights. Values are uniform in `±scale`.
pub struct WeightSynth {
    rng: ChaCha8Rng,
    scale: f32,
}

impl WeightSynth {
    pub fn new(seed: u64, scale: f32) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            scale,
        }
    }

    pub fn fill(
        &mut self,
        bundle: &mut WeightBundle,
        name: &str,
        shape: Vec<usize>,
    ) -> Result<(), TensorError> {
        let n = shape.iter().product();
        let s = self.scale;
        let data = (0..n).map(|_| self.rng.gen_range(-s..=s)).collect();
        bundle.insert(name, shape, data)
    }

    pub fn layer(
        &mut self,
        bundle: &mut WeightBundle,
        prefix: &str,
        weight_shape: Vec<usize>,
    ) -> Result<(), TensorError> {
        let out = weight_shape[0];
        self.fill(bundle, &format!("{prefix}.weight"), weight_shape)?;
        self.fill(bundle, &format!("{prefix}.bias"), vec![out])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> WeightBundle {
        let mut b = WeightBundle::new();
        b.insert("fa.mlp.0.weight", vec![2, 4], (0..8).map(|i| i as f32).collect())
            .unwrap();
        b.insert("fa.mlp.0.bias", vec![2], vec![0.5, -0.5]).unwrap();
        b.insert("scalar", vec![], vec![3.25]).unwrap();
        b
    }

    #[test]
    fn file_roundtrip_is_bit_exact() {
        let b = sample();
        let bytes = b.to_bytes();
        assert_eq!(&bytes[..6], WEIGHT_MAGIC);
        assert_eq!(WeightBundle::from_bytes(&bytes).unwrap(), b);
    }

    #[test]
    fn missing_and_misshapen_lookups_fail() {
        let b = sample();
        assert!(matches!(
            b.array("nope", &[1]),
            Err(TensorError::MissingWeight(n)) if n == "nope"
        ));
        assert!(matches!(
            b.array("fa.mlp.0.bias", &[3]),
            Err(TensorError::WeightShape { .. })
        ));
    }

    #[test]
    fn shape_must_match_element_count() {
        let mut b = WeightBundle::new();
        assert!(b.insert("x", vec![2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = sample().to_bytes();
        assert!(WeightBundle::from_bytes(b"STAEW0\0\0\0\0").is_err());
        assert!(WeightBundle::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(WeightBundle::from_bytes(&bytes[..9]).is_err());
    }
}
