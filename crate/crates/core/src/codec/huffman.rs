//! Canonical byte-wise Huffman coding.
//!
//! Codes are assigned in (length, symbol) order and written MSB-first into
//! the output bytes. A single-symbol alphabet gets a 1-bit code.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::CodecError;

/// Longest code the decoder accepts. Reaching it needs on the order of
/// Fib(64) input bytes, so real data never gets close.
pub const MAX_CODE_LEN: u8 = 63;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTable {
    /// Code length per byte value; 0 means the symbol is absent.
    lengths: [u8; 256],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Code {
    bits: u64,
    len: u8,
}

impl HuffmanTable {
    /// Optimal code lengths for the byte histogram of `data`.
    pub fn from_data(data: &[u8]) -> Result<Self, CodecError> {
        let mut counts = [0u64; 256];
        for &b in data {
            counts[b as usize] += 1;
        }
        Self::from_counts(&counts)
    }

    pub fn from_counts(counts: &[u64; 256]) -> Result<Self, CodecError> {
        let present: Vec<usize> = (0..256).filter(|&s| counts[s] > 0).collect();
        let mut lengths = [0u8; 256];
        match present.len() {
            0 => return Err(CodecError::InvalidHuffmanTable("empty alphabet".into())),
            1 => {
                lengths[present[0]] = 1;
                return Ok(Self { lengths });
            }
            _ => {}
        }
        // Node ids: 0..256 are leaves, internal nodes follow. Ties in the heap
        // resolve on node id, which keeps the tree deterministic.
        let mut parent: Vec<usize> = vec![usize::MAX; 256];
        let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
            present.iter().map(|&s| Reverse((counts[s], s))).collect();
        while heap.len() > 1 {
            let Reverse((wa, a)) = heap.pop().unwrap();
            let Reverse((wb, b)) = heap.pop().unwrap();
            let id = parent.len();
            parent.push(usize::MAX);
            parent[a] = id;
            parent[b] = id;
            heap.push(Reverse((wa + wb, id)));
        }
        for &s in &present {
            let mut depth = 0u32;
            let mut node = s;
            while parent[node] != usize::MAX {
                node = parent[node];
                depth += 1;
            }
            if depth > MAX_CODE_LEN as u32 {
                return Err(CodecError::InvalidHuffmanTable(format!(
                    "code length {depth} exceeds {MAX_CODE_LEN}"
                )));
            }
            lengths[s] = depth as u8;
        }
        Ok(Self { lengths })
    }

    /// Rebuild from transmitted (symbol, length) pairs, checking the Kraft sum.
    pub fn from_entries(entries: &[(u8, u8)]) -> Result<Self, CodecError> {
        if entries.is_empty() {
            return Err(CodecError::InvalidHuffmanTable("no entries".into()));
        }
        let mut lengths = [0u8; 256];
        let mut kraft: u128 = 0;
        for &(sym, len) in entries {
            if len == 0 || len > MAX_CODE_LEN {
                return Err(CodecError::InvalidHuffmanTable(format!(
                    "symbol {sym} has code length {len}"
                )));
            }
            if lengths[sym as usize] != 0 {
                return Err(CodecError::InvalidHuffmanTable(format!(
                    "symbol {sym} listed twice"
                )));
            }
            lengths[sym as usize] = len;
            kraft += 1u128 << (MAX_CODE_LEN - len);
        }
        if kraft > 1u128 << MAX_CODE_LEN {
            return Err(CodecError::InvalidHuffmanTable(
                "code lengths violate the Kraft inequality".into(),
            ));
        }
        Ok(Self { lengths })
    }

    /// (symbol, length) pairs in symbol order.
    pub fn entries(&self) -> Vec<(u8, u8)> {
        (0..=255u8)
            .filter(|&s| self.lengths[s as usize] > 0)
            .map(|s| (s, self.lengths[s as usize]))
            .collect()
    }

    pub fn code_len(&self, symbol: u8) -> u8 {
        self.lengths[symbol as usize]
    }

    /// Size of the serialized table: count u16 plus two bytes per entry.
    pub fn serialized_bits(&self) -> u64 {
        (2 + 2 * self.entries().len() as u64) * 8
    }

    /// Symbols sorted in canonical order, i.e. by (length, symbol).
    fn canonical_order(&self) -> Vec<u8> {
        let mut syms: Vec<u8> = (0..=255u8).filter(|&s| self.lengths[s as usize] > 0).collect();
        syms.sort_by_key(|&s| (self.lengths[s as usize], s));
        syms
    }

    fn codes(&self) -> [Code; 256] {
        let mut codes = [Code { bits: 0, len: 0 }; 256];
        let mut code = 0u64;
        let mut prev_len = 0u8;
        for s in self.canonical_order() {
            let len = self.lengths[s as usize];
            if prev_len != 0 {
                code = (code + 1) << (len - prev_len);
            }
            codes[s as usize] = Code { bits: code, len };
            prev_len = len;
        }
        codes
    }

    pub fn coded_bits(&self, data: &[u8]) -> u64 {
        data.iter().map(|&b| self.lengths[b as usize] as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanEncoded {
    pub table: HuffmanTable,
    pub bit_len: u64,
    pub bytes: Vec<u8>,
}

pub fn encode(data: &[u8]) -> Result<HuffmanEncoded, CodecError> {
    let table = HuffmanTable::from_data(data)?;
    let codes = table.codes();
    let bit_len = table.coded_bits(data);
    let mut bytes = Vec::with_capacity(bit_len.div_ceil(8) as usize);
    let mut acc: u8 = 0;
    let mut used = 0u32;
    for &b in data {
        let c = codes[b as usize];
        for i in (0..c.len).rev() {
            acc = (acc << 1) | ((c.bits >> i) & 1) as u8;
            used += 1;
            if used == 8 {
                bytes.push(acc);
                acc = 0;
                used = 0;
            }
        }
    }
    if used > 0 {
        bytes.push(acc << (8 - used));
    }
    Ok(HuffmanEncoded {
        table,
        bit_len,
        bytes,
    })
}

/// Decode exactly `out_len` symbols from a `bit_len`-bit stream.
pub fn decode(
    table: &HuffmanTable,
    bytes: &[u8],
    bit_len: u64,
    out_len: usize,
) -> Result<Vec<u8>, CodecError> {
    if bytes.len() as u64 * 8 < bit_len {
        return Err(CodecError::Truncated {
            what: "huffman stream",
            needed: bit_len.div_ceil(8) as usize,
            available: bytes.len(),
        });
    }
    let order = table.canonical_order();
    let max_len = order
        .last()
        .map(|&s| table.lengths[s as usize])
        .unwrap_or(0) as usize;
    // Per length: first canonical code, number of codes, index into `order`.
    let mut count = vec![0u64; max_len + 1];
    for &s in &order {
        count[table.lengths[s as usize] as usize] += 1;
    }
    let mut first = vec![0u64; max_len + 1];
    let mut offset = vec![0usize; max_len + 1];
    let mut code = 0u64;
    let mut idx = 0usize;
    for len in 1..=max_len {
        code = (code + count[len - 1]) << 1;
        first[len] = code;
        offset[len] = idx;
        idx += count[len] as usize;
    }

    let mut out = Vec::with_capacity(out_len);
    let mut pos = 0u64;
    while out.len() < out_len {
        let mut code = 0u64;
        let mut len = 0usize;
        loop {
            if pos >= bit_len {
                return Err(CodecError::HuffmanOverrun {
                    decoded: out.len(),
                    expected: out_len,
                });
            }
            let bit = (bytes[(pos / 8) as usize] >> (7 - pos % 8)) & 1;
            pos += 1;
            code = (code << 1) | bit as u64;
            len += 1;
            if len > max_len {
                return Err(CodecError::InvalidCode { bit_offset: pos });
            }
            let rel = code.wrapping_sub(first[len]);
            if code >= first[len] && rel < count[len] {
                out.push(order[offset[len] + rel as usize]);
                break;
            }
        }
    }
    if pos != bit_len {
        return Err(CodecError::HuffmanTrailingBits {
            unused: bit_len - pos,
        });
    }
    Ok(out)
}

/// Encode and decode `data`, returning both halves.
pub fn huffman_roundtrip(data: &[u8]) -> Result<(HuffmanEncoded, Vec<u8>), CodecError> {
    let enc = encode(data)?;
    let dec = decode(&enc.table, &enc.bytes, enc.bit_len, data.len())?;
    Ok((enc, dec))
}

/// Empirical Shannon entropy of the byte distribution, bits per byte.
pub fn empirical_entropy(data: &[u8]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let mut counts = [0u64; 256];
    for &b in data {
        counts[b as usize] += 1;
    }
    let n = data.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}
