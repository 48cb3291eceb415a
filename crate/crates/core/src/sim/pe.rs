//! One processing element: a priority encoder over the map slice plus a
//! value FIFO.
//!
//! The element holds its slice of the sparsity map in the PMA register
//! and the matching value bits in the PVA register. Each cycle the
//! priority encoder picks the highest still-set map bit and retires it
//! with one value. Values arrive from the FIFO in ascending stream
//! order, so the element consumes them back to front.

/// Runs one element over its map slice.
///
/// `pma` holds the slice's map bits (bit positions are window-local).
/// `values` carries one entry per set bit in ascending bit order:
/// `Some(sign)` for a real non-zero, `None` for an element that occupies
/// a slot but contributes nothing (the dense baseline feeds zeros this
/// way). `sink` sees each retired `(bit, sign)` pair in processing
/// order; slots without a value are retired silently.
///
/// Returns the cycle count, which is exactly the number of set bits.
pub fn pe_run(
    pma: u128,
    values: &[Option<bool>],
    mut sink: impl FnMut(u32, bool),
) -> u64 {
    assert_eq!(
        values.len(),
        pma.count_ones() as usize,
        "one value slot per set map bit"
    );
    let mut rest = pma;
    let mut cycles = 0u64;
    let mut next = values.len();
    while rest != 0 {
        let bit = 127 - rest.leading_zeros();
        rest &= !(1u128 << bit);
        next -= 1;
        if let Some(sign) = values[next] {
            sink(bit, sign);
        }
        cycles += 1;
    }
    cycles
}
