//! Packed bit buffer shared by the sparse activation encoding, the weight
//! tensors, and the file formats.
//!
//! Bits are stored LSB-first within each byte: bit `i` lives at
//! `bytes[i / 8] & (1 << (i % 8))`. The on-disk formats serialize the byte
//! vector verbatim, so this layout is part of the file contract. Padding
//! bits past `len` in the final byte are kept at zero.

#[derive(Clone, Default, PartialEq, Eq)]
pub struct BitBuf {
    bytes: Vec<u8>,
    len: usize,
}

impl BitBuf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitBuf {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len: 0,
        }
    }

    /// Wraps raw bytes produced by one of the file readers. `len` is the
    /// logical bit count; `bytes` must be exactly `len.div_ceil(8)` long.
    pub fn from_bytes(bytes: Vec<u8>, len: usize) -> Self {
        assert_eq!(bytes.len(), len.div_ceil(8), "byte count must match bit length");
        BitBuf { bytes, len }
    }

    pub fn push(&mut self, bit: bool) {
        let byte = self.len / 8;
        if byte == self.bytes.len() {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[byte] |= 1 << (self.len % 8);
        }
        self.len += 1;
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range (len {})", self.len);
        self.bytes[i / 8] & (1 << (i % 8)) != 0
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Number of set bits strictly before bit index `end`.
    pub fn count_ones_before(&self, end: usize) -> usize {
        assert!(end <= self.len);
        let full = end / 8;
        let mut n: usize = self.bytes[..full].iter().map(|b| b.count_ones() as usize).sum();
        let rem = end % 8;
        if rem > 0 {
            n += (self.bytes[full] & ((1u8 << rem) - 1)).count_ones() as usize;
        }
        n
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// True when every padding bit past `len` in the final byte is zero.
    /// File readers reject buffers where this does not hold.
    pub fn trailing_padding_zero(&self) -> bool {
        let rem = self.len % 8;
        if rem == 0 {
            return true;
        }
        let last = self.bytes[self.bytes.len() - 1];
        last & !((1u8 << rem) - 1) == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }
}

impl std::fmt::Debug for BitBuf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitBuf[{} bits, {} set]", self.len, self.count_ones())
    }
}

impl FromIterator<bool> for BitBuf {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        let mut buf = BitBuf::new();
        for bit in iter {
            buf.push(bit);
        }
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_and_get_round_trip() {
        let pattern = [true, false, true, true, false, false, false, true, true, false];
        let buf: BitBuf = pattern.iter().copied().collect();
        assert_eq!(buf.len(), 10);
        for (i, &bit) in pattern.iter().enumerate() {
            assert_eq!(buf.get(i), bit, "bit {i}");
        }
        assert_eq!(buf.count_ones(), 5);
    }

    #[test]
    fn lsb_first_byte_layout() {
        let mut buf = BitBuf::new();
        buf.push(true);
        buf.push(false);
        buf.push(true);
        assert_eq!(buf.bytes(), &[0b0000_0101]);
        assert!(buf.trailing_padding_zero());
    }

    #[test]
    fn prefix_popcount_matches_scan() {
        let buf: BitBuf = (0..100).map(|i| i % 3 == 0).collect();
        for end in 0..=buf.len() {
            let expect = (0..end).filter(|&i| buf.get(i)).count();
            assert_eq!(buf.count_ones_before(end), expect, "prefix {end}");
        }
    }

    #[test]
    fn padding_detection() {
        let buf = BitBuf::from_bytes(vec![0b1111_1111], 4);
        assert!(!buf.trailing_padding_zero());
        let buf = BitBuf::from_bytes(vec![0b0000_1111], 4);
        assert!(buf.trailing_padding_zero());
    }
}
