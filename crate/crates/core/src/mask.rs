/// Availability bitset over the H·W pixel positions of one frame.
///
/// Bit `i` is row-major position `i`, stored in byte `i / 8` at bit `i % 8`
/// (LSB first). This is the exact on-wire layout.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PixelMask {
    len: usize,
    bytes: Vec<u8>,
}

impl PixelMask {
    pub fn empty(len: usize) -> Self {
        Self {
            len,
            bytes: vec![0; len.div_ceil(8)],
        }
    }

    pub fn full(len: usize) -> Self {
        let mut m = Self::empty(len);
        for i in 0..len {
            m.set(i);
        }
        m
    }

    pub fn from_positions(len: usize, positions: impl IntoIterator<Item = usize>) -> Self {
        let mut m = Self::empty(len);
        for p in positions {
            m.set(p);
        }
        m
    }

    /// Wrap wire bytes. Returns `None` if the byte count is wrong or any
    /// padding bit past `len` is set.
    pub fn from_bytes(len: usize, bytes: Vec<u8>) -> Option<Self> {
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        if !len.is_multiple_of(8) {
            let last = *bytes.last()?;
            if last >> (len % 8) != 0 {
                return None;
            }
        }
        Some(Self { len, bytes })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.bytes[i / 8] >> (i % 8) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.len, "mask position {i} out of range {}", self.len);
        self.bytes[i / 8] |= 1 << (i % 8);
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Set positions in ascending order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.get(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_layout_is_lsb_first_row_major() {
        let m = PixelMask::from_positions(12, [0, 3, 9]);
        assert_eq!(m.as_bytes(), &[0b0000_1001, 0b0000_0010]);
        assert_eq!(m.ones().collect::<Vec<_>>(), vec![0, 3, 9]);
        assert_eq!(m.count_ones(), 3);
    }

    #[test]
    fn from_bytes_rejects_padding_and_length() {
        assert!(PixelMask::from_bytes(12, vec![0, 0x10]).is_none());
        assert!(PixelMask::from_bytes(12, vec![0]).is_none());
        assert!(PixelMask::from_bytes(16, vec![0xff, 0xff]).is_some());
    }
}
