//! On-disk formats. All multi-byte integers are little-endian.
//!
//! Sparse tensor (`TBNT`): magic, version u16, height u16, width u16,
//! channels u16, map bits padded to a byte boundary, value bits padded to a
//! byte boundary. The bit streams use the channel-group-major traversal.
//!
//! Weights (`TBNW`): magic, version u16, kernel_h u8, kernel_w u8,
//! in_channels u16, out_channels u16, weight bits padded to a byte
//! boundary.
//!
//! Per-channel parameters (`TBNP`): magic, version u16, channel count u16,
//! then i16 payload. Batch-norm files carry one Q8.8 factor per channel;
//! threshold files carry two values per channel, positive then negative.
//!
//! Frame archive (`TBNA`): magic, version u16, record count u32, then per
//! record a u64 absolute byte offset and a u8 class label, then the
//! concatenated `TBNT` records.

use std::io::{Read, Write};

use crate::bits::BitBuf;
use crate::error::{Error, Result};
use crate::tensor::{BinaryWeightTensor, Shape, SparseEncoding, TraversalOrder};

pub const TENSOR_MAGIC: &[u8; 4] = b"TBNT";
pub const WEIGHT_MAGIC: &[u8; 4] = b"TBNW";
pub const PARAM_MAGIC: &[u8; 4] = b"TBNP";
pub const ARCHIVE_MAGIC: &[u8; 4] = b"TBNA";
pub const FORMAT_VERSION: u16 = 1;

/// Reader wrapper that tracks the byte offset so truncation errors can name
/// where the stream ended.
struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn new(inner: R) -> Self {
        Cursor { inner, offset: 0 }
    }

    fn read_exact(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(Error::format(format!(
                "truncated while reading {what} at byte offset {}",
                self.offset
            ))),
            Err(e) => Err(e.into()),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        let mut b = [0u8; 1];
        self.read_exact(&mut b, what)?;
        Ok(b[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let mut b = [0u8; 2];
        self.read_exact(&mut b, what)?;
        Ok(u16::from_le_bytes(b))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    fn magic(&mut self, expect: &[u8; 4]) -> Result<()> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b, "magic")?;
        if &b != expect {
            return Err(Error::format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&b),
                String::from_utf8_lossy(expect)
            )));
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        let v = self.u16("version")?;
        if v != FORMAT_VERSION {
            return Err(Error::format(format!(
                "unsupported format version {v}, expected {FORMAT_VERSION}"
            )));
        }
        Ok(())
    }

    fn bits(&mut self, len: usize, what: &str) -> Result<BitBuf> {
        let mut bytes = vec![0u8; len.div_ceil(8)];
        self.read_exact(&mut bytes, what)?;
        let buf = BitBuf::from_bytes(bytes, len);
        if !buf.trailing_padding_zero() {
            return Err(Error::format(format!("{what} carries set padding bits")));
        }
        Ok(buf)
    }
}

fn write_bits<W: Write>(w: &mut W, bits: &BitBuf) -> Result<()> {
    w.write_all(bits.bytes())?;
    Ok(())
}

pub fn write_tensor<W: Write>(w: &mut W, enc: &SparseEncoding) -> Result<()> {
    enc.validate()?;
    let shape = enc.shape;
    for (dim, name) in [(shape.h, "height"), (shape.w, "width"), (shape.c, "channels")] {
        if dim > u16::MAX as usize {
            return Err(Error::format(format!("{name} {dim} exceeds the u16 header field")));
        }
    }
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(shape.h as u16).to_le_bytes())?;
    w.write_all(&(shape.w as u16).to_le_bytes())?;
    w.write_all(&(shape.c as u16).to_le_bytes())?;
    write_bits(w, &enc.map)?;
    write_bits(w, &enc.values)?;
    Ok(())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<SparseEncoding> {
    let mut cur = Cursor::new(r);
    read_tensor_at(&mut cur)
}

fn read_tensor_at<R: Read>(cur: &mut Cursor<R>) -> Result<SparseEncoding> {
    cur.magic(TENSOR_MAGIC)?;
    cur.version()?;
    let h = cur.u16("height")? as usize;
    let w = cur.u16("width")? as usize;
    let c = cur.u16("channels")? as usize;
    let shape = Shape::new(h, w, c);
    let map = cur.bits(shape.elems(), "sparsity map")?;
    let values = cur.bits(map.count_ones(), "value stream")?;
    let enc = SparseEncoding {
        shape,
        traversal: TraversalOrder::ChannelGroupMajor,
        map,
        values,
    };
    enc.validate()?;
    Ok(enc)
}

pub fn write_weights<W: Write>(w: &mut W, wt: &BinaryWeightTensor) -> Result<()> {
    for (dim, max, name) in [
        (wt.kernel_h, u8::MAX as usize, "kernel_h"),
        (wt.kernel_w, u8::MAX as usize, "kernel_w"),
        (wt.in_channels, u16::MAX as usize, "in_channels"),
        (wt.out_channels, u16::MAX as usize, "out_channels"),
    ] {
        if dim > max {
            return Err(Error::format(format!("{name} {dim} exceeds its header field")));
        }
    }
    w.write_all(WEIGHT_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&[wt.kernel_h as u8, wt.kernel_w as u8])?;
    w.write_all(&(wt.in_channels as u16).to_le_bytes())?;
    w.write_all(&(wt.out_channels as u16).to_le_bytes())?;
    write_bits(w, wt.bits())?;
    Ok(())
}

pub fn read_weights<R: Read>(r: &mut R) -> Result<BinaryWeightTensor> {
    let mut cur = Cursor::new(r);
    cur.magic(WEIGHT_MAGIC)?;
    cur.version()?;
    let kh = cur.u8("kernel_h")? as usize;
    let kw = cur.u8("kernel_w")? as usize;
    let ic = cur.u16("in_channels")? as usize;
    let oc = cur.u16("out_channels")? as usize;
    if kh == 0 || kw == 0 || ic == 0 || oc == 0 {
        return Err(Error::format("weight tensor with a zero dimension".to_string()));
    }
    let bits = cur.bits(kh * kw * ic * oc, "weight bits")?;
    BinaryWeightTensor::new(kh, kw, ic, oc, bits)
}

fn write_params<W: Write>(w: &mut W, channels: usize, payload: &[i16]) -> Result<()> {
    if channels > u16::MAX as usize {
        return Err(Error::format(format!("channel count {channels} exceeds the u16 header field")));
    }
    w.write_all(PARAM_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(channels as u16).to_le_bytes())?;
    for v in payload {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_params<R: Read>(r: &mut R, per_channel: usize, what: &str) -> Result<Vec<i16>> {
    let mut cur = Cursor::new(r);
    cur.magic(PARAM_MAGIC)?;
    cur.version()?;
    let channels = cur.u16("channel count")? as usize;
    let mut payload = Vec::with_capacity(channels * per_channel);
    for _ in 0..channels * per_channel {
        let mut b = [0u8; 2];
        cur.read_exact(&mut b, what)?;
        payload.push(i16::from_le_bytes(b));
    }
    Ok(payload)
}

/// Writes one Q8.8 batch-norm factor per channel.
pub fn write_bn_factors<W: Write>(w: &mut W, factors: &[i16]) -> Result<()> {
    write_params(w, factors.len(), factors)
}

pub fn read_bn_factors<R: Read>(r: &mut R) -> Result<Vec<i16>> {
    read_params(r, 1, "batch-norm factors")
}

/// Writes per-channel (positive, negative) quantization thresholds.
pub fn write_thresholds<W: Write>(w: &mut W, thresholds: &[(i16, i16)]) -> Result<()> {
    let mut payload = Vec::with_capacity(thresholds.len() * 2);
    for (pos, neg) in thresholds {
        payload.push(*pos);
        payload.push(*neg);
    }
    write_params(w, thresholds.len(), &payload)
}

pub fn read_thresholds<R: Read>(r: &mut R) -> Result<Vec<(i16, i16)>> {
    let payload = read_params(r, 2, "quantization thresholds")?;
    Ok(payload.chunks_exact(2).map(|p| (p[0], p[1])).collect())
}

/// One archive record: a class label and an encoded frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveEntry {
    pub label: u8,
    pub tensor: SparseEncoding,
}

fn tensor_byte_len(enc: &SparseEncoding) -> u64 {
    (4 + 2 + 2 + 2 + 2) as u64 + enc.map.bytes().len() as u64 + enc.values.bytes().len() as u64
}

/// Writes a concatenated tensor archive with an offset/label index header.
pub fn write_archive<W: Write>(w: &mut W, entries: &[ArchiveEntry]) -> Result<()> {
    if entries.len() > u32::MAX as usize {
        return Err(Error::format("archive record count exceeds u32".to_string()));
    }
    w.write_all(ARCHIVE_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    let header = 4 + 2 + 4;
    let index = entries.len() as u64 * 9;
    let mut offset = header as u64 + index;
    for e in entries {
        w.write_all(&offset.to_le_bytes())?;
        w.write_all(&[e.label])?;
        offset += tensor_byte_len(&e.tensor);
    }
    for e in entries {
        write_tensor(w, &e.tensor)?;
    }
    Ok(())
}

pub fn read_archive<R: Read>(r: &mut R) -> Result<Vec<ArchiveEntry>> {
    let mut cur = Cursor::new(r);
    cur.magic(ARCHIVE_MAGIC)?;
    cur.version()?;
    let count = cur.u32("record count")? as usize;
    let mut index = Vec::with_capacity(count);
    for i in 0..count {
        let offset = cur.u64(&format!("offset of record {i}"))?;
        let label = cur.u8(&format!("label of record {i}"))?;
        index.push((offset, label));
    }
    let mut entries = Vec::with_capacity(count);
    for (i, (offset, label)) in index.into_iter().enumerate() {
        if offset != cur.offset {
            return Err(Error::format(format!(
                "record {i} indexed at byte {offset} but the stream is at byte {}",
                cur.offset
            )));
        }
        let tensor = read_tensor_at(&mut cur)
            .map_err(|e| Error::format(format!("record {i}: {e}")))?;
        entries.push(ArchiveEntry { label, tensor });
    }
    Ok(entries)
}
