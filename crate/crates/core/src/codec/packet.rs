//! Packet layout, little-endian throughout:
//!
//! ```text
//! "STAEP1" | version u8 | flags u8 (bit0 = huffman) | F, C, H, W u16 | αk u16 | k_px u32
//! frame indices αk×u16 | masks αk×⌈H·W/8⌉ bytes
//! huffman: entry count u16 | (symbol u8, length u8)×count | bit length u64 | coded bytes
//! raw:     αk·C·k_px f32 values
//! ```

use serde::{Deserialize, Serialize};

use super::huffman::{self, HuffmanTable};
use super::CodecError;
use crate::attention::SelectionResult;
use crate::mask::PixelMask;
use crate::tensor::ClipDims;

pub const PACKET_MAGIC: &[u8; 6] = b"STAEP1";
pub const PACKET_VERSION: u8 = 1;
const FLAG_HUFFMAN: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadEncoding {
    Raw,
    Huffman,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyStats {
    pub element_count: u64,
    pub raw_bits: u64,
    /// Payload stream bits, excluding the code table.
    pub coded_bits: u64,
    pub table_bits: u64,
    pub bits_per_element: f64,
}

impl EntropyStats {
    fn new(element_count: u64, coded_bits: u64, table_bits: u64) -> Self {
        let bits_per_element = if element_count == 0 {
            0.0
        } else {
            coded_bits as f64 / element_count as f64
        };
        Self {
            element_count,
            raw_bits: element_count * 32,
            coded_bits,
            table_bits,
            bits_per_element,
        }
    }

    /// Coded bits plus the table, spread over every element.
    pub fn amortized_bits_per_element(&self) -> f64 {
        (self.coded_bits + self.table_bits) as f64 / self.element_count.max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketSizes {
    pub header_bytes: usize,
    pub index_bytes: usize,
    pub mask_bytes: usize,
    pub payload_bytes: usize,
    pub total_bytes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedPacket {
    pub selection: SelectionResult,
    pub dims: ClipDims,
    pub encoding: PayloadEncoding,
    pub stats: EntropyStats,
    pub sizes: PacketSizes,
}

/// Fixed header length (magic through k_px).
pub const fn header_bytes() -> usize {
    6 + 1 + 1 + 4 * 2 + 2 + 4
}

fn u16_field(field: &'static str, value: usize) -> Result<u16, CodecError> {
    u16::try_from(value).map_err(|_| CodecError::FieldOverflow { field, value })
}

pub fn encode_packet(
    sel: &SelectionResult,
    dims: ClipDims,
    encoding: PayloadEncoding,
) -> Result<Vec<u8>, CodecError> {
    encode_packet_with_stats(sel, dims, encoding).map(|(b, _, _)| b)
}

pub fn encode_packet_with_stats(
    sel: &SelectionResult,
    dims: ClipDims,
    encoding: PayloadEncoding,
) -> Result<(Vec<u8>, EntropyStats, PacketSizes), CodecError> {
    dims.validate()
        .map_err(|e| CodecError::InconsistentSelection(e.to_string()))?;
    sel.validate(dims)
        .map_err(CodecError::InconsistentSelection)?;

    let mut out = Vec::new();
    out.extend_from_slice(PACKET_MAGIC);
    out.push(PACKET_VERSION);
    out.push(match encoding {
        PayloadEncoding::Raw => 0,
        PayloadEncoding::Huffman => FLAG_HUFFMAN,
    });
    for (field, v) in [
        ("frames", dims.frames),
        ("channels", dims.channels),
        ("height", dims.height),
        ("width", dims.width),
        ("alpha_k", sel.alpha_k()),
    ] {
        out.extend_from_slice(&u16_field(field, v)?.to_le_bytes());
    }
    let k_px = u32::try_from(sel.k_px).map_err(|_| CodecError::FieldOverflow {
        field: "k_px",
        value: sel.k_px,
    })?;
    out.extend_from_slice(&k_px.to_le_bytes());
    let header = out.len();

    for &i in &sel.frame_indices {
        out.extend_from_slice(&u16_field("frame index", i)?.to_le_bytes());
    }
    let index_bytes = out.len() - header;
    for m in &sel.masks {
        out.extend_from_slice(m.as_bytes());
    }
    let mask_bytes = out.len() - header - index_bytes;

    let raw: Vec<u8> = sel.values.iter().flat_map(|v| v.to_le_bytes()).collect();
    let elements = sel.values.len() as u64;
    let stats = match encoding {
        PayloadEncoding::Raw => {
            out.extend_from_slice(&raw);
            EntropyStats::new(elements, elements * 32, 0)
        }
        PayloadEncoding::Huffman => {
            let enc = huffman::encode(&raw)?;
            let entries = enc.table.entries();
            out.extend_from_slice(&(entries.len() as u16).to_le_bytes());
            for (sym, len) in &entries {
                out.push(*sym);
                out.push(*len);
            }
            out.extend_from_slice(&enc.bit_len.to_le_bytes());
            out.extend_from_slice(&enc.bytes);
            EntropyStats::new(elements, enc.bit_len, enc.table.serialized_bits() + 64)
        }
    };
    let payload_bytes = out.len() - header - index_bytes - mask_bytes;
    let sizes = PacketSizes {
        header_bytes: header,
        index_bytes,
        mask_bytes,
        payload_bytes,
        total_bytes: out.len(),
    };
    Ok((out, stats, sizes))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CodecError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(CodecError::Truncated {
                what,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, CodecError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode_packet(bytes: &[u8]) -> Result<DecodedPacket, CodecError> {
    let mut c = Cursor { bytes, pos: 0 };
    if bytes.len() < PACKET_MAGIC.len() {
        return if PACKET_MAGIC.starts_with(bytes) && !bytes.is_empty() {
            Err(CodecError::Truncated {
                what: "magic",
                needed: PACKET_MAGIC.len(),
                available: bytes.len(),
            })
        } else {
            Err(CodecError::BadMagic)
        };
    }
    if c.take(6, "magic")? != PACKET_MAGIC {
        return Err(CodecError::BadMagic);
    }
    let version = c.u8("header")?;
    if version != PACKET_VERSION {
        return Err(CodecError::UnsupportedVersion(version));
    }
    let flags = c.u8("header")?;
    if flags & !FLAG_HUFFMAN != 0 {
        return Err(CodecError::UnknownFlags(flags));
    }
    let encoding = if flags & FLAG_HUFFMAN != 0 {
        PayloadEncoding::Huffman
    } else {
        PayloadEncoding::Raw
    };
    let dims = ClipDims::new(
        c.u16("header")? as usize,
        c.u16("header")? as usize,
        c.u16("header")? as usize,
        c.u16("header")? as usize,
    );
    dims.validate()
        .map_err(|e| CodecError::InvalidHeader(e.to_string()))?;
    let alpha_k = c.u16("header")? as usize;
    let k_px = c.u32("header")? as usize;
    if alpha_k == 0 || alpha_k > dims.frames {
        return Err(CodecError::InvalidHeader(format!(
            "alpha_k {alpha_k} outside 1..={}",
            dims.frames
        )));
    }
    let px = dims.pixels();
    if k_px == 0 || k_px > px {
        return Err(CodecError::InvalidHeader(format!("k_px {k_px} outside 1..={px}")));
    }
    let header = c.pos;

    let mut frame_indices = Vec::with_capacity(alpha_k);
    for _ in 0..alpha_k {
        frame_indices.push(c.u16("frame indices")? as usize);
    }
    if frame_indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CodecError::InvalidHeader(
            "frame indices not strictly increasing".into(),
        ));
    }
    if frame_indices.iter().any(|&i| i >= dims.frames) {
        return Err(CodecError::InvalidHeader("frame index out of range".into()));
    }
    let index_bytes = c.pos - header;

    let mask_len = px.div_ceil(8);
    let mut masks = Vec::with_capacity(alpha_k);
    for frame in 0..alpha_k {
        let raw = c.take(mask_len, "masks")?.to_vec();
        let mask = PixelMask::from_bytes(px, raw).ok_or_else(|| {
            CodecError::InvalidHeader(format!("mask {frame} has padding bits set"))
        })?;
        let actual = mask.count_ones();
        if actual != k_px {
            return Err(CodecError::MaskPopcount {
                frame,
                expected: k_px,
                actual,
            });
        }
        masks.push(mask);
    }
    let mask_bytes = c.pos - header - index_bytes;

    let elements = alpha_k * dims.channels * k_px;
    let raw_len = 4 * elements;
    let payload_start = c.pos;
    let (raw, stats) = match encoding {
        PayloadEncoding::Raw => {
            let raw = c.take(raw_len, "payload")?.to_vec();
            (raw, EntropyStats::new(elements as u64, 32 * elements as u64, 0))
        }
        PayloadEncoding::Huffman => {
            let count = c.u16("huffman table")? as usize;
            let mut entries = Vec::with_capacity(count);
            for _ in 0..count {
                let sym = c.u8("huffman table")?;
                let len = c.u8("huffman table")?;
                entries.push((sym, len));
            }
            let table = HuffmanTable::from_entries(&entries)?;
            let bit_len = c.u64("huffman table")?;
            let coded_len = usize::try_from(bit_len.div_ceil(8)).map_err(|_| {
                CodecError::InvalidHeader(format!("coded bit length {bit_len} too large"))
            })?;
            let coded = c.take(coded_len, "huffman stream")?;
            let raw = huffman::decode(&table, coded, bit_len, raw_len)?;
            let table_bits = table.serialized_bits() + 64;
            (raw, EntropyStats::new(elements as u64, bit_len, table_bits))
        }
    };
    let payload_bytes = c.pos - payload_start;
    if c.pos != bytes.len() {
        return Err(CodecError::TrailingBytes(bytes.len() - c.pos));
    }
    let values = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(DecodedPacket {
        selection: SelectionResult {
            frame_indices,
            k_px,
            masks,
            values,
        },
        dims,
        encoding,
        stats,
        sizes: PacketSizes {
            header_bytes: header,
            index_bytes,
            mask_bytes,
            payload_bytes,
            total_bytes: bytes.len(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_selection() -> (SelectionResult, ClipDims) {
        let dims = ClipDims::new(3, 3, 4, 4);
        let masks = vec![PixelMask::from_positions(16, [0, 2, 5, 7, 8, 10, 13, 15])];
        let values = (0..24).map(|i| i as f32 * 0.25 - 1.0).collect();
        (
            SelectionResult {
                frame_indices: vec![1],
                k_px: 8,
                masks,
                values,
            },
            dims,
        )
    }

    #[test]
    fn raw_payload_size_matches_budget_arithmetic() {
        let (sel, dims) = small_selection();
        let (bytes, stats, sizes) =
            encode_packet_with_stats(&sel, dims, PayloadEncoding::Raw).unwrap();
        assert_eq!(sizes.payload_bytes, 96);
        assert_eq!(sizes.header_bytes, header_bytes());
        assert_eq!(sizes.index_bytes, 2);
        assert_eq!(sizes.mask_bytes, 2);
        assert_eq!(bytes.len(), header_bytes() + 2 + 2 + 96);
        assert_eq!(stats.raw_bits, 96 * 8);
        assert_eq!(stats.bits_per_element, 32.0);
    }

    #[test]
    fn roundtrip_both_encodings() {
        let (sel, dims) = small_selection();
        for enc in [PayloadEncoding::Raw, PayloadEncoding::Huffman] {
            let bytes = encode_packet(&sel, dims, enc).unwrap();
            let d = decode_packet(&bytes).unwrap();
            assert_eq!(d.selection, sel);
            assert_eq!(d.dims, dims);
            assert_eq!(d.encoding, enc);
        }
    }

    #[test]
    fn mask_bits_land_at_row_major_positions() {
        let (sel, dims) = small_selection();
        let bytes = encode_packet(&sel, dims, PayloadEncoding::Raw).unwrap();
        let masks = &bytes[header_bytes() + 2..header_bytes() + 4];
        // positions 0,2,5,7 | 8,10,13,15
        assert_eq!(masks, &[0b1010_0101, 0b1010_0101]);
        assert_eq!(&bytes[header_bytes()..header_bytes() + 2], &[1, 0]);
    }

    #[test]
    fn constant_payload_codes_at_one_bit_per_byte() {
        let dims = ClipDims::new(1, 1, 4, 4);
        let sel = SelectionResult {
            frame_indices: vec![0],
            k_px: 16,
            masks: vec![PixelMask::full(16)],
            values: vec![0.0; 16],
        };
        let (_, stats, _) =
            encode_packet_with_stats(&sel, dims, PayloadEncoding::Huffman).unwrap();
        // 64 identical bytes, one bit each
        assert_eq!(stats.coded_bits, 64);
        assert_eq!(stats.bits_per_element, 4.0);
        assert_eq!(stats.table_bits, (2 + 2) * 8 + 64);
    }

    #[test]
    fn decode_errors_are_distinct() {
        let (sel, dims) = small_selection();
        let good = encode_packet(&sel, dims, PayloadEncoding::Raw).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(decode_packet(&bad), Err(CodecError::BadMagic));

        let mut bad = good.clone();
        bad[6] = 9;
        assert_eq!(decode_packet(&bad), Err(CodecError::UnsupportedVersion(9)));

        assert!(matches!(
            decode_packet(&good[..good.len() - 1]),
            Err(CodecError::Truncated { what: "payload", .. })
        ));

        let mut bad = good.clone();
        bad[header_bytes() + 2] ^= 0b0000_0010;
        assert!(matches!(
            decode_packet(&bad),
            Err(CodecError::MaskPopcount {
                frame: 0,
                expected: 8,
                actual: 9
            })
        ));

        let mut bad = good.clone();
        bad.push(0);
        assert_eq!(decode_packet(&bad), Err(CodecError::TrailingBytes(1)));

        let huff = encode_packet(&sel, dims, PayloadEncoding::Huffman).unwrap();
        assert!(matches!(
            decode_packet(&huff[..huff.len() - 1]),
            Err(CodecError::Truncated {
                what: "huffman stream",
                ..
            })
        ));
    }

    #[test]
    fn shrinking_the_bit_length_overruns() {
        let (sel, dims) = small_selection();
        let mut huff = encode_packet(&sel, dims, PayloadEncoding::Huffman).unwrap();
        let table_at = header_bytes() + 2 + 2;
        let count = u16::from_le_bytes([huff[table_at], huff[table_at + 1]]) as usize;
        let at = table_at + 2 + 2 * count;
        let bit_len = u64::from_le_bytes(huff[at..at + 8].try_into().unwrap());
        // claim one whole byte fewer than the stream needs and drop that byte
        let shorter = (bit_len / 8 - 1) * 8;
        huff[at..at + 8].copy_from_slice(&shorter.to_le_bytes());
        let keep = huff.len() - (bit_len.div_ceil(8) - shorter / 8) as usize;
        huff.truncate(keep);
        assert!(matches!(
            decode_packet(&huff),
            Err(CodecError::HuffmanOverrun { .. })
        ));
    }

    #[test]
    fn inconsistent_selection_rejected() {
        let (mut sel, dims) = small_selection();
        sel.values.pop();
        assert!(matches!(
            encode_packet(&sel, dims, PayloadEncoding::Raw),
            Err(CodecError::InconsistentSelection(_))
        ));
    }
}
