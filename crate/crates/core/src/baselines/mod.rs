//! Heuristic generative steganography baselines: fixed-width block coding
//! and per-step Huffman coding. Both read the raw, unmodulated model
//! distribution.

mod block;
mod huffman;

pub use block::{
    block_decode, block_decode_bits, block_encode, block_encode_bits, BlockAssignment, BlockKey,
    BlockStep, MAX_BLOCK_BITS,
};
pub use huffman::{
    huffman_decode, huffman_decode_bits, huffman_encode, huffman_encode_bits, HuffmanStep,
    HuffmanTree,
};

/// splitmix64 generator (Steele, Lea & Flood); the block key's only source
/// of randomness, fixed so every platform derives identical bins.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}
