//! Reference evaluation of the network layers, kept deliberately plain:
//! every operation is written the way its definition reads, so the cycle
//! simulator and the tests have an unambiguous value oracle.
//!
//! Arithmetic contract: partial sums accumulate exactly and must stay in
//! the signed 16-bit range; leaving it is an error everywhere except batch
//! normalization, which saturates by definition and counts how often.

use crate::error::{Error, Result};
use crate::tensor::{BinaryWeightTensor, Shape, TernaryTensor, TraversalOrder};

/// Dense signed 16-bit feature map, position-major with channels innermost.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PartialSumTensor {
    shape: Shape,
    values: Vec<i16>,
}

impl PartialSumTensor {
    pub fn new(shape: Shape, values: Vec<i16>) -> Result<Self> {
        if values.len() != shape.elems() {
            return Err(Error::shape(format!(
                "partial-sum tensor {} wants {} values, got {}",
                shape,
                shape.elems(),
                values.len()
            )));
        }
        Ok(PartialSumTensor { shape, values })
    }

    /// Converts exact 32-bit accumulator values, failing on the first one
    /// outside the 16-bit range.
    pub fn from_accumulator(shape: Shape, acc: Vec<i32>) -> Result<Self> {
        let mut values = Vec::with_capacity(acc.len());
        for (i, v) in acc.into_iter().enumerate() {
            let Ok(v16) = i16::try_from(v) else {
                let ch = i % shape.c;
                let pos = i / shape.c;
                return Err(Error::Overflow(format!(
                    "partial sum {v} at position {pos}, channel {ch} leaves the 16-bit range"
                )));
            };
            values.push(v16);
        }
        PartialSumTensor::new(shape, values)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn get(&self, r: usize, c: usize, ch: usize) -> i16 {
        self.values[(r * self.shape.w + c) * self.shape.c + ch]
    }

    pub fn values(&self) -> &[i16] {
        &self.values
    }
}

/// The XOR multiply: two sign bits multiply to +1 when they agree and -1
/// when they differ, which is exactly XNOR on the raw bits.
#[inline]
pub fn xor_mac(input_bit: bool, weight_bit: bool) -> i32 {
    if input_bit == weight_bit {
        1
    } else {
        -1
    }
}

/// 3x3 ternary-by-binary convolution, stride 1, zero padding 1. Zero
/// inputs contribute nothing; non-zero inputs multiply through [`xor_mac`].
pub fn ternary_conv3x3(x: &TernaryTensor, w: &BinaryWeightTensor) -> Result<PartialSumTensor> {
    if w.kernel_h != 3 || w.kernel_w != 3 {
        return Err(Error::shape(format!(
            "expected a 3x3 kernel, got {}x{}",
            w.kernel_h, w.kernel_w
        )));
    }
    let sh = x.shape();
    if w.in_channels != sh.c {
        return Err(Error::shape(format!(
            "kernel expects {} input channels, tensor has {}",
            w.in_channels, sh.c
        )));
    }
    let out_shape = Shape::new(sh.h, sh.w, w.out_channels);
    let mut acc = vec![0i32; out_shape.elems()];
    for r in 0..sh.h {
        for c in 0..sh.w {
            for ic in 0..sh.c {
                let v = x.get(r, c, ic);
                if v == 0 {
                    continue;
                }
                let input_bit = v > 0;
                // Scatter this element into the up-to-nine outputs whose
                // padded window covers it.
                for kr in 0..3usize {
                    let Some(or) = (r + 1).checked_sub(kr).filter(|or| *or < sh.h) else {
                        continue;
                    };
                    for kc in 0..3usize {
                        let Some(ocol) = (c + 1).checked_sub(kc).filter(|oc| *oc < sh.w) else {
                            continue;
                        };
                        let base = (or * sh.w + ocol) * w.out_channels;
                        for oc in 0..w.out_channels {
                            acc[base + oc] += xor_mac(input_bit, w.bit(kr, kc, ic, oc));
                        }
                    }
                }
            }
        }
    }
    PartialSumTensor::from_accumulator(out_shape, acc)
}

/// 2x2 stride-2 max pooling followed by ReLU. Spatial extents must be even.
pub fn pool_relu(x: &PartialSumTensor) -> Result<PartialSumTensor> {
    let sh = x.shape();
    if sh.h % 2 != 0 || sh.w % 2 != 0 {
        return Err(Error::shape(format!(
            "pooling needs even spatial extents, got {}x{}",
            sh.h, sh.w
        )));
    }
    let out_shape = Shape::new(sh.h / 2, sh.w / 2, sh.c);
    let mut values = Vec::with_capacity(out_shape.elems());
    for r in 0..out_shape.h {
        for c in 0..out_shape.w {
            for ch in 0..sh.c {
                let m = x
                    .get(2 * r, 2 * c, ch)
                    .max(x.get(2 * r, 2 * c + 1, ch))
                    .max(x.get(2 * r + 1, 2 * c, ch))
                    .max(x.get(2 * r + 1, 2 * c + 1, ch));
                values.push(m.max(0));
            }
        }
    }
    PartialSumTensor::new(out_shape, values)
}

/// Division by 256 rounding half to even, exact for the full i32 range.
fn round_half_even_div256(v: i32) -> i32 {
    let q = v >> 8;
    let rem = v & 0xFF;
    match rem.cmp(&128) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

/// Per-channel scale in Q8.8 fixed point: `round(v * factor / 256)` with
/// round-half-to-even, saturating at the 16-bit bounds. Returns the scaled
/// tensor and how many values saturated.
pub fn batch_norm(x: &PartialSumTensor, factors: &[i16]) -> Result<(PartialSumTensor, u64)> {
    let sh = x.shape();
    if factors.len() != sh.c {
        return Err(Error::shape(format!(
            "{} scale factors for {} channels",
            factors.len(),
            sh.c
        )));
    }
    let mut saturations = 0u64;
    let mut values = Vec::with_capacity(sh.elems());
    for (i, &v) in x.values().iter().enumerate() {
        let f = factors[i % sh.c] as i32;
        let scaled = round_half_even_div256(v as i32 * f);
        let clamped = scaled.clamp(i16::MIN as i32, i16::MAX as i32);
        if clamped != scaled {
            saturations += 1;
        }
        values.push(clamped as i16);
    }
    Ok((PartialSumTensor::new(sh, values)?, saturations))
}

/// Per-channel ternary quantization with strict comparisons: values equal
/// to either threshold quantize to zero.
pub fn quantize_ternary(
    x: &PartialSumTensor,
    thresholds: &[(i16, i16)],
) -> Result<TernaryTensor> {
    let sh = x.shape();
    if thresholds.len() != sh.c {
        return Err(Error::shape(format!(
            "{} threshold pairs for {} channels",
            thresholds.len(),
            sh.c
        )));
    }
    for (ch, &(pos, neg)) in thresholds.iter().enumerate() {
        if neg >= pos {
            return Err(Error::config(format!(
                "channel {ch} thresholds ({pos}, {neg}) must satisfy neg < pos"
            )));
        }
    }
    let mut out = TernaryTensor::zeros(sh);
    for r in 0..sh.h {
        for c in 0..sh.w {
            for ch in 0..sh.c {
                let v = x.get(r, c, ch);
                let (pos, neg) = thresholds[ch];
                let q = if v > pos {
                    1
                } else if v < neg {
                    -1
                } else {
                    0
                };
                out.set(r, c, ch, q);
            }
        }
    }
    Ok(out)
}

/// Fully connected layer over the flattened input. The flatten order is
/// the channel-group-major stream order, the same order the value FIFO
/// feeds the accelerator, so weight row `i` always meets stream element `i`.
pub fn fully_connected(x: &TernaryTensor, w: &BinaryWeightTensor) -> Result<PartialSumTensor> {
    if w.kernel_h != 1 || w.kernel_w != 1 {
        return Err(Error::shape(format!(
            "fully connected weights must be 1x1, got {}x{}",
            w.kernel_h, w.kernel_w
        )));
    }
    let sh = x.shape();
    if w.in_channels != sh.elems() {
        return Err(Error::shape(format!(
            "weight matrix expects {} inputs, tensor {} flattens to {}",
            w.in_channels,
            sh,
            sh.elems()
        )));
    }
    let mut acc = vec![0i32; w.out_channels];
    let mut i = 0usize;
    TraversalOrder::ChannelGroupMajor.for_each(sh, |r, c, ch| {
        let v = x.get(r, c, ch);
        if v != 0 {
            let input_bit = v > 0;
            for (oc, a) in acc.iter_mut().enumerate() {
                *a += xor_mac(input_bit, w.bit(0, 0, i, oc));
            }
        }
        i += 1;
    });
    PartialSumTensor::from_accumulator(Shape::new(1, 1, w.out_channels), acc)
}

/// Index of the largest logit; ties break to the lowest index.
pub fn argmax(logits: &[i32]) -> usize {
    let mut best = 0usize;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}
