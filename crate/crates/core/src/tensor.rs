//! Ternary activation tensors, their sparse map/value encoding, and packed
//! binary weight tensors.
//!
//! Activations take values in {-1, 0, +1}. The sparse encoding stores one
//! sparsity-map bit per element (1 = non-zero) and one value bit per
//! non-zero element (1 = +1, 0 = -1), so a zero costs only its map bit.
//! Weights take values in {-1, +1} and pack to one bit per weight with the
//! same sign convention.

use crate::bits::BitBuf;
use crate::error::{Error, Result};

/// Channels are processed in groups of this many lanes; it matches the
/// 32-bit word width of the packed memory images.
pub const CHANNEL_GROUP: usize = 32;

/// Height, width, channel extents of an activation tensor. Serializes as
/// the array `[h, w, c]`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
#[serde(from = "[usize; 3]", into = "[usize; 3]")]
pub struct Shape {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl From<[usize; 3]> for Shape {
    fn from([h, w, c]: [usize; 3]) -> Self {
        Shape { h, w, c }
    }
}

impl From<Shape> for [usize; 3] {
    fn from(s: Shape) -> Self {
        [s.h, s.w, s.c]
    }
}

impl Shape {
    pub fn new(h: usize, w: usize, c: usize) -> Self {
        Shape { h, w, c }
    }

    pub fn elems(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn positions(&self) -> usize {
        self.h * self.w
    }

    /// Number of 32-channel groups, counting a final partial group.
    pub fn channel_groups(&self) -> usize {
        self.c.div_ceil(CHANNEL_GROUP)
    }

    /// Real channel count inside group `g` (the last group may be partial).
    pub fn group_width(&self, g: usize) -> usize {
        (self.c - g * CHANNEL_GROUP).min(CHANNEL_GROUP)
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.h, self.w, self.c)
    }
}

/// Element order used when flattening a tensor into the map bit stream and
/// the value stream.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum TraversalOrder {
    /// All spatial positions of channel group 0 first (row-major), then
    /// group 1, and so on; channels ascend inside a group. This matches the
    /// address layout of the packed map memory, so it is the order the
    /// value FIFO is consumed in.
    #[default]
    ChannelGroupMajor,
    /// Every channel of a position before the next position.
    PositionMajor,
}

impl TraversalOrder {
    /// Stream index of element (`r`, `c`, `ch`) under this order.
    pub fn index(&self, shape: Shape, r: usize, c: usize, ch: usize) -> usize {
        let pos = r * shape.w + c;
        match self {
            TraversalOrder::ChannelGroupMajor => {
                let g = ch / CHANNEL_GROUP;
                // Every group before `g` is full width, so its segment
                // spans exactly positions * CHANNEL_GROUP bits.
                let base = shape.positions() * CHANNEL_GROUP * g;
                base + pos * shape.group_width(g) + (ch - g * CHANNEL_GROUP)
            }
            TraversalOrder::PositionMajor => pos * shape.c + ch,
        }
    }

    /// Visits every element coordinate in stream order.
    pub fn for_each(&self, shape: Shape, mut f: impl FnMut(usize, usize, usize)) {
        match self {
            TraversalOrder::ChannelGroupMajor => {
                for g in 0..shape.channel_groups() {
                    let lo = g * CHANNEL_GROUP;
                    let hi = lo + shape.group_width(g);
                    for r in 0..shape.h {
                        for c in 0..shape.w {
                            for ch in lo..hi {
                                f(r, c, ch);
                            }
                        }
                    }
                }
            }
            TraversalOrder::PositionMajor => {
                for r in 0..shape.h {
                    for c in 0..shape.w {
                        for ch in 0..shape.c {
                            f(r, c, ch);
                        }
                    }
                }
            }
        }
    }
}

/// Dense ternary tensor, stored position-major with channels innermost.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TernaryTensor {
    shape: Shape,
    data: Vec<i8>,
}

impl TernaryTensor {
    pub fn new(shape: Shape, data: Vec<i8>) -> Result<Self> {
        if data.len() != shape.elems() {
            return Err(Error::shape(format!(
                "tensor {} wants {} elements, got {}",
                shape,
                shape.elems(),
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !matches!(**v, -1 | 0 | 1)) {
            return Err(Error::shape(format!("element value {bad} outside {{-1, 0, +1}}")));
        }
        Ok(TernaryTensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        TernaryTensor {
            shape,
            data: vec![0; shape.elems()],
        }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> i8) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.elems());
        for r in 0..shape.h {
            for c in 0..shape.w {
                for ch in 0..shape.c {
                    data.push(f(r, c, ch));
                }
            }
        }
        TernaryTensor::new(shape, data)
    }

    /// Random tensor where each element is non-zero with probability
    /// `density`, sign equiprobable.
    pub fn random(shape: Shape, density: f64, rng: &mut impl rand::Rng) -> Self {
        let data = (0..shape.elems())
            .map(|_| {
                if rng.random_bool(density) {
                    if rng.random_bool(0.5) {
                        1
                    } else {
                        -1
                    }
                } else {
                    0
                }
            })
            .collect();
        TernaryTensor { shape, data }
    }

    /// Random tensor with an exact non-zero count.
    pub fn random_with_nonzeros(shape: Shape, nonzeros: usize, rng: &mut impl rand::Rng) -> Self {
        assert!(nonzeros <= shape.elems());
        let mut data = vec![0i8; shape.elems()];
        for idx in rand::seq::index::sample(rng, shape.elems(), nonzeros) {
            data[idx] = if rng.random_bool(0.5) { 1 } else { -1 };
        }
        TernaryTensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn get(&self, r: usize, c: usize, ch: usize) -> i8 {
        self.data[(r * self.shape.w + c) * self.shape.c + ch]
    }

    pub fn set(&mut self, r: usize, c: usize, ch: usize, v: i8) {
        assert!(matches!(v, -1 | 0 | 1), "ternary value out of range: {v}");
        self.data[(r * self.shape.w + c) * self.shape.c + ch] = v;
    }

    pub fn data(&self) -> &[i8] {
        &self.data
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|v| **v != 0).count()
    }

    pub fn density(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.count_nonzero() as f64 / self.data.len() as f64
        }
    }
}

/// Sparsity map plus value stream for one ternary tensor.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SparseEncoding {
    pub shape: Shape,
    pub traversal: TraversalOrder,
    /// One bit per element in traversal order; 1 marks a non-zero.
    pub map: BitBuf,
    /// One bit per non-zero in traversal order; 1 = +1, 0 = -1.
    pub values: BitBuf,
}

impl SparseEncoding {
    pub fn nonzero_count(&self) -> usize {
        self.map.count_ones()
    }

    pub fn density(&self) -> f64 {
        if self.map.is_empty() {
            0.0
        } else {
            self.nonzero_count() as f64 / self.map.len() as f64
        }
    }

    /// Checks the structural relations between shape, map, and values.
    pub fn validate(&self) -> Result<()> {
        if self.map.len() != self.shape.elems() {
            return Err(Error::format(format!(
                "map holds {} bits but shape {} has {} elements",
                self.map.len(),
                self.shape,
                self.shape.elems()
            )));
        }
        let nnz = self.map.count_ones();
        if self.values.len() != nnz {
            return Err(Error::format(format!(
                "value stream holds {} bits but the map marks {} non-zeros",
                self.values.len(),
                nnz
            )));
        }
        Ok(())
    }
}

/// Flattens a tensor into its sparse encoding.
pub fn encode_sparse(t: &TernaryTensor, traversal: TraversalOrder) -> SparseEncoding {
    let mut map = BitBuf::with_capacity(t.shape().elems());
    let mut values = BitBuf::new();
    traversal.for_each(t.shape(), |r, c, ch| {
        let v = t.get(r, c, ch);
        map.push(v != 0);
        if v != 0 {
            values.push(v > 0);
        }
    });
    SparseEncoding {
        shape: t.shape(),
        traversal,
        map,
        values,
    }
}

/// Rebuilds the dense tensor from an encoding.
pub fn decode_sparse(enc: &SparseEncoding) -> Result<TernaryTensor> {
    enc.validate()?;
    let mut out = TernaryTensor::zeros(enc.shape);
    let mut cursor = 0usize;
    let mut stream = 0usize;
    let mut err = None;
    enc.traversal.for_each(enc.shape, |r, c, ch| {
        if err.is_some() {
            return;
        }
        if enc.map.get(stream) {
            if cursor >= enc.values.len() {
                err = Some(Error::format("value stream exhausted before map".to_string()));
                return;
            }
            out.set(r, c, ch, if enc.values.get(cursor) { 1 } else { -1 });
            cursor += 1;
        }
        stream += 1;
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(out)
}

/// Binary weights for one layer, one bit per weight (1 = +1, 0 = -1),
/// packed in (kernel row, kernel col, in-channel, out-channel) order with
/// the out-channel index fastest.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BinaryWeightTensor {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    bits: BitBuf,
}

impl BinaryWeightTensor {
    pub fn new(
        kernel_h: usize,
        kernel_w: usize,
        in_channels: usize,
        out_channels: usize,
        bits: BitBuf,
    ) -> Result<Self> {
        let want = kernel_h * kernel_w * in_channels * out_channels;
        if bits.len() != want {
            return Err(Error::shape(format!(
                "weight tensor {kernel_h}x{kernel_w}x{in_channels}x{out_channels} wants {want} bits, got {}",
                bits.len()
            )));
        }
        Ok(BinaryWeightTensor {
            kernel_h,
            kernel_w,
            in_channels,
            out_channels,
            bits,
        })
    }

    pub fn random(
        kernel_h: usize,
        kernel_w: usize,
        in_channels: usize,
        out_channels: usize,
        rng: &mut impl rand::Rng,
    ) -> Self {
        let n = kernel_h * kernel_w * in_channels * out_channels;
        let bits = (0..n).map(|_| rng.random_bool(0.5)).collect();
        BinaryWeightTensor {
            kernel_h,
            kernel_w,
            in_channels,
            out_channels,
            bits,
        }
    }

    fn index(&self, kr: usize, kc: usize, ic: usize, oc: usize) -> usize {
        debug_assert!(kr < self.kernel_h && kc < self.kernel_w);
        debug_assert!(ic < self.in_channels && oc < self.out_channels);
        ((kr * self.kernel_w + kc) * self.in_channels + ic) * self.out_channels + oc
    }

    pub fn bit(&self, kr: usize, kc: usize, ic: usize, oc: usize) -> bool {
        self.bits.get(self.index(kr, kc, ic, oc))
    }

    /// Signed weight value, +1 or -1.
    pub fn weight(&self, kr: usize, kc: usize, ic: usize, oc: usize) -> i32 {
        if self.bit(kr, kc, ic, oc) {
            1
        } else {
            -1
        }
    }

    /// 32 output-channel lanes of one kernel tap as a packed word; bit `i`
    /// is out-channel `32 * group + i`, zero past the real channel count.
    pub fn lane_word(&self, kr: usize, kc: usize, ic: usize, group: usize) -> u32 {
        let lo = group * CHANNEL_GROUP;
        let lanes = (self.out_channels - lo).min(CHANNEL_GROUP);
        let mut word = 0u32;
        for lane in 0..lanes {
            if self.bit(kr, kc, ic, lo + lane) {
                word |= 1 << lane;
            }
        }
        word
    }

    pub fn bits(&self) -> &BitBuf {
        &self.bits
    }

    pub fn out_groups(&self) -> usize {
        self.out_channels.div_ceil(CHANNEL_GROUP)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn row_tensor(values: &[i8]) -> TernaryTensor {
        TernaryTensor::new(Shape::new(1, values.len(), 1), values.to_vec()).unwrap()
    }

    #[test]
    fn encode_single_channel_row() {
        // One row [+1, 0, -1, 0]: map 1010 (stream order), values (+1, -1).
        let t = row_tensor(&[1, 0, -1, 0]);
        let enc = encode_sparse(&t, TraversalOrder::ChannelGroupMajor);
        let map: Vec<bool> = enc.map.iter().collect();
        assert_eq!(map, [true, false, true, false]);
        let values: Vec<bool> = enc.values.iter().collect();
        assert_eq!(values, [true, false]);
    }

    #[test]
    fn zero_tensor_has_empty_value_stream() {
        let t = TernaryTensor::zeros(Shape::new(3, 3, 4));
        let enc = encode_sparse(&t, TraversalOrder::ChannelGroupMajor);
        assert_eq!(enc.map.len(), 36);
        assert_eq!(enc.map.count_ones(), 0);
        assert!(enc.values.is_empty());
    }

    #[test]
    fn small_multichannel_interleaving() {
        // 2x2x3 tensor checked against an explicitly listed stream. With
        // three channels there is a single (partial) channel group, so the
        // stream runs positions row-major with channels innermost.
        let t = TernaryTensor::from_fn(Shape::new(2, 2, 3), |r, c, ch| {
            // (r=0,c=0): (+1, 0, -1)  (r=0,c=1): (0, 0, +1)
            // (r=1,c=0): (-1, +1, 0)  (r=1,c=1): (0, 0, 0)
            match (r, c, ch) {
                (0, 0, 0) => 1,
                (0, 0, 2) => -1,
                (0, 1, 2) => 1,
                (1, 0, 0) => -1,
                (1, 0, 1) => 1,
                _ => 0,
            }
        })
        .unwrap();
        let enc = encode_sparse(&t, TraversalOrder::ChannelGroupMajor);
        let map: Vec<u8> = enc.map.iter().map(u8::from).collect();
        assert_eq!(map, [1, 0, 1, 0, 0, 1, 1, 1, 0, 0, 0, 0]);
        let values: Vec<u8> = enc.values.iter().map(u8::from).collect();
        assert_eq!(values, [1, 0, 1, 0, 1]);
    }

    #[test]
    fn traversal_orders_agree_up_to_one_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = TernaryTensor::random(Shape::new(4, 5, 32), 0.5, &mut rng);
        let a = encode_sparse(&t, TraversalOrder::ChannelGroupMajor);
        let b = encode_sparse(&t, TraversalOrder::PositionMajor);
        assert_eq!(a.map, b.map);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn channel_group_major_orders_groups_outermost() {
        // 1x1x33: channel 32 sits in its own group, so its bit comes last
        // in group-major order but would be adjacent in position order.
        let mut t = TernaryTensor::zeros(Shape::new(1, 2, 33));
        t.set(0, 0, 32, 1);
        t.set(0, 1, 0, -1);
        let enc = encode_sparse(&t, TraversalOrder::ChannelGroupMajor);
        // Group 0 holds positions (0,0) and (0,1) x 32 channels = 64 bits,
        // then group 1 holds the two channel-32 bits.
        assert_eq!(enc.map.len(), 66);
        assert!(enc.map.get(32)); // (0,1) ch0 inside group 0
        assert!(enc.map.get(64)); // (0,0) ch32 opens group 1
        let values: Vec<u8> = enc.values.iter().map(u8::from).collect();
        assert_eq!(values, [0, 1]); // -1 streams before +1 here
    }

    #[test]
    fn decode_inverts_encode() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(h, w, c) in &[(1usize, 1usize, 1usize), (3, 4, 5), (2, 2, 33), (4, 4, 64), (5, 3, 70)] {
            let t = TernaryTensor::random(Shape::new(h, w, c), 0.45, &mut rng);
            for order in [TraversalOrder::ChannelGroupMajor, TraversalOrder::PositionMajor] {
                let enc = encode_sparse(&t, order);
                assert_eq!(enc.map.len(), t.shape().elems());
                assert_eq!(enc.values.len(), t.count_nonzero());
                let back = decode_sparse(&enc).unwrap();
                assert_eq!(back, t, "{h}x{w}x{c} {order:?}");
            }
        }
    }

    #[test]
    fn decode_rejects_value_count_mismatch() {
        let t = row_tensor(&[1, -1, 0, 1]);
        let mut enc = encode_sparse(&t, TraversalOrder::ChannelGroupMajor);
        enc.values.push(true); // one value bit too many
        assert!(matches!(decode_sparse(&enc), Err(Error::Format(_))));
    }

    #[test]
    fn traversal_index_matches_stream_position() {
        for shape in [Shape::new(3, 4, 5), Shape::new(2, 3, 40), Shape::new(2, 2, 64)] {
            for order in [TraversalOrder::ChannelGroupMajor, TraversalOrder::PositionMajor] {
                let mut seen = vec![usize::MAX; shape.elems()];
                let mut stream = 0;
                order.for_each(shape, |r, c, ch| {
                    seen[(r * shape.w + c) * shape.c + ch] = stream;
                    stream += 1;
                });
                for r in 0..shape.h {
                    for c in 0..shape.w {
                        for ch in 0..shape.c {
                            assert_eq!(
                                order.index(shape, r, c, ch),
                                seen[(r * shape.w + c) * shape.c + ch],
                                "{shape} {order:?} ({r},{c},{ch})"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn weight_bits_pack_out_channel_fastest() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = BinaryWeightTensor::random(3, 3, 2, 40, &mut rng);
        for kr in 0..3 {
            for kc in 0..3 {
                for ic in 0..2 {
                    for g in 0..2 {
                        let word = w.lane_word(kr, kc, ic, g);
                        let lanes = (40 - g * 32).min(32);
                        for lane in 0..lanes {
                            assert_eq!(
                                word >> lane & 1 == 1,
                                w.bit(kr, kc, ic, g * 32 + lane)
                            );
                        }
                        if lanes < 32 {
                            assert_eq!(word >> lanes, 0, "padding lanes must stay zero");
                        }
                    }
                }
            }
        }
        assert_eq!(w.weight(0, 0, 0, 0), if w.bit(0, 0, 0, 0) { 1 } else { -1 });
    }
}
