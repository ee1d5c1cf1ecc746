//! Wire format.
//!
//! ```text
//! "SAC1" | d0:u8 | d:u8 | q_bits:u8 | M:u32 BE | tree bits | leaf payload
//! ```
//!
//! Tree bits are one flag per visited node above the full depth, in pre-order
//! (1 = split, 0 = leaf), MSB-first and padded to a byte. The payload holds
//! `q_bits` per leaf, left to right, MSB-first and padded to a byte.

use thiserror::Error;

use super::{Leaf, TreeCode};

pub const MAGIC: [u8; 4] = *b"SAC1";
pub const HEADER_LEN: usize = 11;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("bad magic at byte 0: expected \"SAC1\"")]
    BadMagic,
    #[error("stream truncated at byte {offset}: {context}")]
    Truncated { offset: usize, context: &'static str },
    #[error("invalid header at byte {offset}: {reason}")]
    InvalidHeader { offset: usize, reason: String },
    #[error("{count} unexpected trailing bytes at byte {offset}")]
    TrailingBytes { offset: usize, count: usize },
}

/// A serialized [`TreeCode`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bitstream {
    bytes: Vec<u8>,
}

impl Bitstream {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self { bytes }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn serialized_size_bits(&self) -> u64 {
        self.bytes.len() as u64 * 8
    }

    pub fn parse(&self) -> Result<TreeCode, ParseError> {
        parse(&self.bytes)
    }
}

struct BitWriter {
    bytes: Vec<u8>,
    used: u8,
}

impl BitWriter {
    fn new(bytes: Vec<u8>) -> Self {
        Self { bytes, used: 8 }
    }

    fn push(&mut self, bit: bool) {
        if self.used == 8 {
            self.bytes.push(0);
            self.used = 0;
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> self.used;
        }
        self.used += 1;
    }

    fn push_bits(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            self.push((value >> i) & 1 == 1);
        }
    }

    /// Subsequent bits start on a fresh byte.
    fn align(&mut self) {
        self.used = 8;
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    bit_pos: usize,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8], byte_offset: usize) -> Self {
        Self {
            bytes,
            bit_pos: byte_offset * 8,
        }
    }

    fn read(&mut self, context: &'static str) -> Result<bool, ParseError> {
        let byte = self.bit_pos / 8;
        let Some(b) = self.bytes.get(byte) else {
            return Err(ParseError::Truncated {
                offset: byte,
                context,
            });
        };
        let bit = (b >> (7 - self.bit_pos % 8)) & 1 == 1;
        self.bit_pos += 1;
        Ok(bit)
    }

    fn read_bits(&mut self, width: u32, context: &'static str) -> Result<u64, ParseError> {
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | u64::from(self.read(context)?);
        }
        Ok(v)
    }

    fn align(&mut self) {
        self.bit_pos = self.bit_pos.div_ceil(8) * 8;
    }

    fn byte_pos(&self) -> usize {
        self.bit_pos / 8
    }
}

pub(super) fn serialize(code: &TreeCode) -> Bitstream {
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(&MAGIC);
    header.push(code.log2_len());
    header.push(code.depth());
    header.push(code.q_bits());
    header.extend_from_slice(&(code.signal_len() as u32).to_be_bytes());

    let mut w = BitWriter::new(header);
    // Leaves arrive in pre-order, so a recursive walk can replay the splits.
    let mut leaves = code.leaves().iter().peekable();
    fn walk(
        w: &mut BitWriter,
        leaves: &mut std::iter::Peekable<std::slice::Iter<'_, Leaf>>,
        level: u8,
        depth: u8,
    ) {
        let is_leaf = leaves.peek().is_some_and(|l| l.level == level);
        if level < depth {
            w.push(!is_leaf);
        }
        if is_leaf {
            leaves.next();
        } else {
            walk(w, leaves, level + 1, depth);
            walk(w, leaves, level + 1, depth);
        }
    }
    walk(&mut w, &mut leaves, 0, code.depth());
    w.align();
    for leaf in code.leaves() {
        w.push_bits(u64::from(leaf.index), u32::from(code.q_bits()));
    }
    Bitstream::from_bytes(w.bytes)
}

pub fn parse(bytes: &[u8]) -> Result<TreeCode, ParseError> {
    if bytes.len() < MAGIC.len() {
        return Err(if MAGIC.starts_with(bytes) {
            ParseError::Truncated {
                offset: bytes.len(),
                context: "magic",
            }
        } else {
            ParseError::BadMagic
        });
    }
    if bytes[..4] != MAGIC {
        return Err(ParseError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(ParseError::Truncated {
            offset: bytes.len(),
            context: "header",
        });
    }
    let (log2_len, depth, q_bits) = (bytes[4], bytes[5], bytes[6]);
    let len = u32::from_be_bytes([bytes[7], bytes[8], bytes[9], bytes[10]]) as usize;
    if log2_len >= 32 || len != 1usize << log2_len {
        return Err(ParseError::InvalidHeader {
            offset: 7,
            reason: format!("signal length {len} is not 2^{log2_len}"),
        });
    }
    if depth == 0 || depth > log2_len {
        return Err(ParseError::InvalidHeader {
            offset: 5,
            reason: format!("depth {depth} outside 1..={log2_len}"),
        });
    }
    if !(1..=super::MAX_Q_BITS).contains(&q_bits) {
        return Err(ParseError::InvalidHeader {
            offset: 6,
            reason: format!("q_bits {q_bits} outside 1..={}", super::MAX_Q_BITS),
        });
    }

    let mut r = BitReader::new(bytes, HEADER_LEN);
    let mut shape = Vec::new();
    fn read_node(
        r: &mut BitReader<'_>,
        shape: &mut Vec<(u8, usize)>,
        level: u8,
        pos: usize,
        depth: u8,
    ) -> Result<(), ParseError> {
        let split = level < depth && r.read("tree bits")?;
        if split {
            read_node(r, shape, level + 1, 2 * pos, depth)?;
            read_node(r, shape, level + 1, 2 * pos + 1, depth)
        } else {
            shape.push((level, pos));
            Ok(())
        }
    }
    read_node(&mut r, &mut shape, 0, 0, depth)?;
    r.align();

    let mut leaves = Vec::with_capacity(shape.len());
    for (level, pos) in shape {
        let seg = len >> level;
        let index = r.read_bits(u32::from(q_bits), "leaf payload")? as u32;
        leaves.push(Leaf {
            level,
            start: pos * seg,
            len: seg,
            index,
        });
    }
    r.align();
    let end = r.byte_pos();
    if end < bytes.len() {
        return Err(ParseError::TrailingBytes {
            offset: end,
            count: bytes.len() - end,
        });
    }
    Ok(TreeCode::from_parts(log2_len, depth, q_bits, leaves))
}
