//! Channel-first packing of sparsity maps, weights, and value streams into
//! 32-bit memory words, plus the storage-size accounting.
//!
//! Map layout: the word at address `g * H * W + p` holds the sparsity bits
//! of channel group `g` (32 channels) at spatial position `p` (row-major),
//! bit `i` being channel `32 * g + i`. Channel counts that are not a
//! multiple of 32 pad the last group with zero bits. Weight words mirror
//! the same bit-to-channel rule over output channels.

use crate::bits::BitBuf;
use crate::error::{Error, Result};
use crate::tensor::{BinaryWeightTensor, Shape, SparseEncoding, TraversalOrder, CHANNEL_GROUP};

/// Bit width of every packed memory word.
pub const WORD_BITS: usize = 32;

/// Which on-chip memory a packed image feeds.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MemoryKind {
    /// Sparsity map words.
    Map,
    /// Binary weight words.
    Weight,
    /// Non-zero value bits, packed 32 per word in stream order.
    Value,
}

/// A packed word image for one memory.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MemoryImage {
    pub kind: MemoryKind,
    pub words: Vec<u32>,
}

impl MemoryImage {
    pub fn word_width(&self) -> usize {
        WORD_BITS
    }

    pub fn size_bits(&self) -> u64 {
        (self.words.len() * WORD_BITS) as u64
    }
}

/// Packs a sparsity map into channel-first words.
pub fn pack_map_memory(enc: &SparseEncoding) -> MemoryImage {
    let shape = enc.shape;
    let positions = shape.positions();
    let mut words = vec![0u32; shape.channel_groups() * positions];
    for g in 0..shape.channel_groups() {
        let width = shape.group_width(g);
        for p in 0..positions {
            let (r, c) = (p / shape.w, p % shape.w);
            let mut word = 0u32;
            for i in 0..width {
                let bit = enc.map.get(enc.traversal.index(shape, r, c, g * CHANNEL_GROUP + i));
                if bit {
                    word |= 1 << i;
                }
            }
            words[g * positions + p] = word;
        }
    }
    MemoryImage {
        kind: MemoryKind::Map,
        words,
    }
}

/// Inverse of [`pack_map_memory`]: recovers the map bit stream in the given
/// traversal order. Fails if the image has the wrong word count or carries
/// set bits in the padding lanes of a partial channel group.
pub fn unpack_map_memory(
    img: &MemoryImage,
    shape: Shape,
    traversal: TraversalOrder,
) -> Result<BitBuf> {
    let positions = shape.positions();
    let want = shape.channel_groups() * positions;
    if img.words.len() != want {
        return Err(Error::format(format!(
            "map image holds {} words but shape {} needs {}",
            img.words.len(),
            shape,
            want
        )));
    }
    let mut map = BitBuf::with_capacity(shape.elems());
    let mut padding_fault = None;
    for g in 0..shape.channel_groups() {
        let width = shape.group_width(g);
        for p in 0..positions {
            let word = img.words[g * positions + p];
            if width < WORD_BITS && word >> width != 0 && padding_fault.is_none() {
                padding_fault = Some((g, p));
            }
        }
    }
    if let Some((g, p)) = padding_fault {
        return Err(Error::format(format!(
            "padding lanes set in map word at group {g}, position {p}"
        )));
    }
    traversal.for_each(shape, |r, c, ch| {
        let g = ch / CHANNEL_GROUP;
        let word = img.words[g * positions + r * shape.w + c];
        map.push(word >> (ch % CHANNEL_GROUP) & 1 == 1);
    });
    Ok(map)
}

/// Packs binary weights into 32-bit words: each word holds one kernel tap's
/// weights for 32 consecutive output channels of one input channel, and the
/// words of a kernel row stay contiguous so each kernel-row lane of the
/// accelerator streams its own row.
pub fn pack_weight_memory(w: &BinaryWeightTensor) -> MemoryImage {
    let groups = w.out_groups();
    let mut words = Vec::with_capacity(w.kernel_h * w.kernel_w * w.in_channels * groups);
    for kr in 0..w.kernel_h {
        for kc in 0..w.kernel_w {
            for ic in 0..w.in_channels {
                for g in 0..groups {
                    words.push(w.lane_word(kr, kc, ic, g));
                }
            }
        }
    }
    MemoryImage {
        kind: MemoryKind::Weight,
        words,
    }
}

/// Packs the value stream 32 bits per word, stream order, LSB first.
pub fn pack_value_memory(enc: &SparseEncoding) -> MemoryImage {
    let mut words = vec![0u32; enc.values.len().div_ceil(WORD_BITS)];
    for (i, bit) in enc.values.iter().enumerate() {
        if bit {
            words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
        }
    }
    MemoryImage {
        kind: MemoryKind::Value,
        words,
    }
}

/// Storage cost of one tensor under three representations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SizeStats {
    /// 8 bits per element.
    pub dense_8bit_bits: u64,
    /// 2 bits per element.
    pub dense_2bit_bits: u64,
    /// Map bit per element plus value bit per non-zero.
    pub encoded_bits: u64,
    /// 1 - 2bit/8bit; always exactly 0.75.
    pub reduction_2bit_vs_8bit: f64,
    /// 1 - encoded/2bit; grows as the tensor gets sparser.
    pub reduction_encoded_vs_2bit: f64,
}

impl SizeStats {
    /// Combined reduction of the encoded form against 8-bit storage.
    pub fn reduction_encoded_vs_8bit(&self) -> f64 {
        1.0 - self.encoded_bits as f64 / self.dense_8bit_bits as f64
    }
}

/// Storage accounting for one encoded tensor.
pub fn size_report(enc: &SparseEncoding) -> SizeStats {
    let n = enc.shape.elems() as u64;
    let dense_8bit_bits = 8 * n;
    let dense_2bit_bits = 2 * n;
    let encoded_bits = n + enc.nonzero_count() as u64;
    SizeStats {
        dense_8bit_bits,
        dense_2bit_bits,
        encoded_bits,
        reduction_2bit_vs_8bit: 1.0 - dense_2bit_bits as f64 / dense_8bit_bits as f64,
        reduction_encoded_vs_2bit: 1.0 - encoded_bits as f64 / dense_2bit_bits as f64,
    }
}

/// Sums size stats across tensors, recomputing the ratios over the totals.
pub fn size_report_total<'a>(stats: impl IntoIterator<Item = &'a SizeStats>) -> SizeStats {
    let mut dense8 = 0;
    let mut dense2 = 0;
    let mut enc = 0;
    for s in stats {
        dense8 += s.dense_8bit_bits;
        dense2 += s.dense_2bit_bits;
        enc += s.encoded_bits;
    }
    SizeStats {
        dense_8bit_bits: dense8,
        dense_2bit_bits: dense2,
        encoded_bits: enc,
        reduction_2bit_vs_8bit: if dense8 == 0 { 0.0 } else { 1.0 - dense2 as f64 / dense8 as f64 },
        reduction_encoded_vs_2bit: if dense2 == 0 { 0.0 } else { 1.0 - enc as f64 / dense2 as f64 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{encode_sparse, TernaryTensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn map_words_are_channel_first() {
        // 2x2x64 tensor: 8 words, group 0 at addresses 0..4, group 1 at 4..8.
        let mut t = TernaryTensor::zeros(Shape::new(2, 2, 64));
        t.set(0, 0, 0, 1); // group 0, position 0, bit 0
        t.set(0, 1, 33, -1); // group 1, position 1, bit 1
        t.set(1, 1, 31, 1); // group 0, position 3, bit 31
        let enc = encode_sparse(&t, TraversalOrder::ChannelGroupMajor);
        let img = pack_map_memory(&enc);
        assert_eq!(img.words.len(), 8);
        assert_eq!(img.words[0], 1);
        assert_eq!(img.words[3], 1 << 31);
        assert_eq!(img.words[4 + 1], 1 << 1);
        let silent: u32 = [1, 2, 4, 6, 7].iter().map(|&a| img.words[a as usize]).sum();
        assert_eq!(silent, 0);
    }

    #[test]
    fn partial_group_pads_with_zeros() {
        let mut t = TernaryTensor::zeros(Shape::new(1, 2, 40));
        t.set(0, 0, 39, 1); // group 1 holds channels 32..40
        let enc = encode_sparse(&t, TraversalOrder::ChannelGroupMajor);
        let img = pack_map_memory(&enc);
        assert_eq!(img.words.len(), 4);
        assert_eq!(img.words[2], 1 << 7);
        for w in img.words.iter().skip(2) {
            assert_eq!(w >> 8, 0, "bits past channel 39 must stay clear");
        }
    }

    #[test]
    fn map_round_trip_over_awkward_channel_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &c in &[1usize, 2, 31, 32, 33, 64, 65, 96, 100] {
            let t = TernaryTensor::random(Shape::new(3, 5, c), 0.4, &mut rng);
            for order in [TraversalOrder::ChannelGroupMajor, TraversalOrder::PositionMajor] {
                let enc = encode_sparse(&t, order);
                let img = pack_map_memory(&enc);
                let back = unpack_map_memory(&img, t.shape(), order).unwrap();
                assert_eq!(back, enc.map, "c={c} {order:?}");
            }
        }
    }

    #[test]
    fn unpack_rejects_wrong_word_count_and_dirty_padding() {
        let t = TernaryTensor::zeros(Shape::new(2, 2, 40));
        let enc = encode_sparse(&t, TraversalOrder::ChannelGroupMajor);
        let mut img = pack_map_memory(&enc);
        img.words.pop();
        assert!(unpack_map_memory(&img, t.shape(), enc.traversal).is_err());

        let mut img = pack_map_memory(&enc);
        img.words[4] |= 1 << 20; // channel 52 does not exist
        assert!(unpack_map_memory(&img, t.shape(), enc.traversal).is_err());
    }

    #[test]
    fn weight_word_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // 3x3 kernel, 1 in-channel, 32 out-channels: one word per tap.
        let w = BinaryWeightTensor::random(3, 3, 1, 32, &mut rng);
        assert_eq!(pack_weight_memory(&w).words.len(), 9);
        // 3x3 kernel, 2 in-channels, 64 out-channels: 36 words.
        let w = BinaryWeightTensor::random(3, 3, 2, 64, &mut rng);
        assert_eq!(pack_weight_memory(&w).words.len(), 36);
    }

    #[test]
    fn all_plus_one_weights_pack_to_ones() {
        let bits = (0..32).map(|_| true).collect();
        let w = BinaryWeightTensor::new(1, 1, 1, 32, bits).unwrap();
        let img = pack_weight_memory(&w);
        assert_eq!(img.words, vec![0xFFFF_FFFF]);
    }

    #[test]
    fn weight_rows_stay_contiguous() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = BinaryWeightTensor::random(3, 3, 2, 64, &mut rng);
        let img = pack_weight_memory(&w);
        let row_words = 3 * 2 * 2; // taps x in-channels x out-groups
        for kr in 0..3 {
            for kc in 0..3 {
                for ic in 0..2 {
                    for g in 0..2 {
                        let addr = kr * row_words + (kc * 2 + ic) * 2 + g;
                        assert_eq!(img.words[addr], w.lane_word(kr, kc, ic, g));
                    }
                }
            }
        }
    }

    #[test]
    fn value_words_follow_stream_order() {
        let t = TernaryTensor::new(
            Shape::new(1, 5, 1),
            vec![1, -1, 0, 1, 1],
        )
        .unwrap();
        let enc = encode_sparse(&t, TraversalOrder::ChannelGroupMajor);
        let img = pack_value_memory(&enc);
        assert_eq!(img.words, vec![0b1101]);
    }

    #[test]
    fn size_report_counts_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = TernaryTensor::random_with_nonzeros(Shape::new(4, 4, 4), 20, &mut rng);
        let stats = size_report(&encode_sparse(&t, TraversalOrder::ChannelGroupMajor));
        assert_eq!(stats.dense_8bit_bits, 512);
        assert_eq!(stats.dense_2bit_bits, 128);
        assert_eq!(stats.encoded_bits, 64 + 20);
        assert_eq!(stats.reduction_2bit_vs_8bit, 0.75);
        assert!((stats.reduction_encoded_vs_2bit - (1.0 - 84.0 / 128.0)).abs() < 1e-12);
    }
}
