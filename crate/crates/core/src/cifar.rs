//! Ingestion of CIFAR-10 binary batches.
//!
//! A batch is a flat sequence of 3073-byte records: one class label byte
//! followed by 3072 pixel bytes (1024 red, then green, then blue, each a
//! row-major 32x32 plane). Frames come out converted to grayscale.

use std::io::Read;

use crate::dvs::{rgb_to_gray, GrayFrame};
use crate::error::{Error, Result};

pub const CIFAR_DIM: usize = 32;
pub const CIFAR_RECORD_BYTES: usize = 1 + 3 * CIFAR_DIM * CIFAR_DIM;
pub const CIFAR_CLASSES: u8 = 10;

/// Reads a whole batch, converting every record to a grayscale frame.
/// An empty stream yields an empty vector.
pub fn read_cifar_gray<R: Read>(r: &mut R) -> Result<Vec<(u8, GrayFrame)>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % CIFAR_RECORD_BYTES != 0 {
        let whole = bytes.len() / CIFAR_RECORD_BYTES;
        return Err(Error::format(format!(
            "batch length {} is not a multiple of {CIFAR_RECORD_BYTES}: record {whole} is \
             truncated at byte offset {}",
            bytes.len(),
            whole * CIFAR_RECORD_BYTES
        )));
    }
    let plane = CIFAR_DIM * CIFAR_DIM;
    let mut out = Vec::with_capacity(bytes.len() / CIFAR_RECORD_BYTES);
    for (i, record) in bytes.chunks_exact(CIFAR_RECORD_BYTES).enumerate() {
        let label = record[0];
        if label >= CIFAR_CLASSES {
            return Err(Error::format(format!(
                "record {i} carries class label {label}, outside 0..{CIFAR_CLASSES}"
            )));
        }
        let (red, rest) = record[1..].split_at(plane);
        let (green, blue) = rest.split_at(plane);
        let pixels = (0..plane)
            .map(|p| rgb_to_gray(red[p], green[p], blue[p]))
            .collect();
        out.push((label, GrayFrame::new(CIFAR_DIM, CIFAR_DIM, pixels)?));
    }
    Ok(out)
}
