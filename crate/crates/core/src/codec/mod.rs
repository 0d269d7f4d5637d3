//! Wire format for semantic packets and the lossless entropy stage.

pub mod huffman;
mod packet;

use thiserror::Error;

pub use packet::{
    decode_packet, encode_packet, encode_packet_with_stats, header_bytes, DecodedPacket,
    EntropyStats, PacketSizes, PayloadEncoding, PACKET_MAGIC, PACKET_VERSION,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("bad magic: not a semantic packet")]
    BadMagic,
    #[error("unsupported packet version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown flag bits {0:#04x}")]
    UnknownFlags(u8),
    #[error("truncated {what}: need {needed} bytes, {available} available")]
    Truncated {
        what: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("mask of frame {frame} has {actual} bits set, header says {expected}")]
    MaskPopcount {
        frame: usize,
        expected: usize,
        actual: usize,
    },
    #[error("invalid huffman table: {0}")]
    InvalidHuffmanTable(String),
    #[error("huffman stream ran out after {decoded} of {expected} symbols")]
    HuffmanOverrun { decoded: usize, expected: usize },
    #[error("huffman stream has {unused} unused bits")]
    HuffmanTrailingBits { unused: u64 },
    #[error("invalid huffman code ending at bit {bit_offset}")]
    InvalidCode { bit_offset: u64 },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("selection inconsistent with dimensions: {0}")]
    InconsistentSelection(String),
    #[error("{field} = {value} does not fit the wire format")]
    FieldOverflow { field: &'static str, value: usize },
}
