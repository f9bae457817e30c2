//! Bit strings, the framed message format and byte packing.

use std::fmt;

use crate::error::{Error, Result};

/// Width of the big-endian payload-length header.
pub const HEADER_BITS: usize = 32;

/// Bit `index` of the implicit suffix that follows every finite message:
/// 1, 0, 1, 0, ...
#[inline]
pub fn pad_bit(index: usize) -> bool {
    index.is_multiple_of(2)
}

/// Bit `i` of `bits` extended by the alternating pad.
#[inline]
pub fn padded_bit(bits: &[bool], i: usize) -> bool {
    match bits.get(i) {
        Some(&b) => b,
        None => pad_bit(i - bits.len()),
    }
}

/// A secret payload. On the wire it is preceded by a 32-bit length header.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitMessage {
    payload: Vec<bool>,
}

impl BitMessage {
    pub fn new(payload: Vec<bool>) -> Self {
        assert!(
            payload.len() <= u32::MAX as usize,
            "payload longer than the length header can describe"
        );
        Self { payload }
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self::new(bytes_to_bits(bytes, bytes.len() * 8))
    }

    /// Parses a string of `0` and `1` characters.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::MalformedStream(format!("not a bit: {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn payload(&self) -> &[bool] {
        &self.payload
    }

    pub fn into_payload(self) -> Vec<bool> {
        self.payload
    }

    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    pub fn framed_len(&self) -> usize {
        HEADER_BITS + self.payload.len()
    }

    /// Header followed by payload.
    pub fn framed(&self) -> Vec<bool> {
        let n = self.payload.len() as u32;
        let mut out = Vec::with_capacity(self.framed_len());
        out.extend((0..HEADER_BITS).rev().map(|i| (n >> i) & 1 == 1));
        out.extend_from_slice(&self.payload);
        out
    }

    /// Payload length announced by the first 32 bits of a framed stream.
    pub fn announced_len(header: &[bool]) -> Option<usize> {
        if header.len() < HEADER_BITS {
            return None;
        }
        Some(
            header[..HEADER_BITS]
                .iter()
                .fold(0usize, |acc, &b| (acc << 1) | b as usize),
        )
    }

    /// Strips the header from `framed`; bits beyond the announced length are
    /// ignored.
    pub fn unframe(framed: &[bool]) -> Result<Self> {
        let len = Self::announced_len(framed).ok_or(Error::TruncatedCover {
            recovered: framed.len(),
            needed: HEADER_BITS,
        })?;
        let end = HEADER_BITS + len;
        if framed.len() < end {
            return Err(Error::TruncatedCover {
                recovered: framed.len(),
                needed: end,
            });
        }
        Ok(Self::new(framed[HEADER_BITS..end].to_vec()))
    }

    /// Packs the payload MSB-first, zero-padding the final byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        bits_to_bytes(&self.payload)
    }

    pub fn to_bit_string(&self) -> String {
        bit_string(&self.payload)
    }
}

impl fmt::Debug for BitMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitMessage({})", self.to_bit_string())
    }
}

pub fn bit_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// MSB-first packing; the last byte is zero-padded.
pub fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)))
        })
        .collect()
}

/// First `nbits` bits of `bytes`, MSB-first.
pub fn bytes_to_bits(bytes: &[u8], nbits: usize) -> Vec<bool> {
    (0..nbits.min(bytes.len() * 8))
        .map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1 == 1)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_big_endian_bit_length() {
        let m = BitMessage::from_bit_str("101").unwrap();
        let framed = m.framed();
        assert_eq!(framed.len(), 35);
        assert_eq!(bit_string(&framed[..32]), format!("{:032b}", 3));
        assert_eq!(BitMessage::unframe(&framed).unwrap(), m);
    }

    #[test]
    fn unframe_truncated() {
        let framed = BitMessage::from_bit_str("1111").unwrap().framed();
        assert!(matches!(
            BitMessage::unframe(&framed[..34]),
            Err(Error::TruncatedCover { recovered: 34, needed: 36 })
        ));
        assert!(BitMessage::unframe(&framed[..10]).is_err());
    }

    #[test]
    fn padding_alternates_from_one() {
        let bits = [false, false];
        let got: Vec<bool> = (0..6).map(|i| padded_bit(&bits, i)).collect();
        assert_eq!(got, [false, false, true, false, true, false]);
    }

    #[test]
    fn byte_packing_is_msb_first() {
        let bits = BitMessage::from_bit_str("1000000101").unwrap();
        assert_eq!(bits.to_bytes(), vec![0x81, 0x40]);
        assert_eq!(bytes_to_bits(&[0x81, 0x40], 10), bits.payload());
    }

    proptest! {
        #[test]
        fn frame_and_pack_roundtrip(payload in proptest::collection::vec(any::<bool>(), 0..300)) {
            let m = BitMessage::new(payload.clone());
            prop_assert_eq!(BitMessage::unframe(&m.framed()).unwrap(), m.clone());
            let bytes = bits_to_bytes(&payload);
            prop_assert_eq!(bytes_to_bits(&bytes, payload.len()), payload);
        }
    }
}
