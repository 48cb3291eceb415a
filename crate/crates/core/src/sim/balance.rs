//! Pairing of map slices onto processing elements.
//!
//! Each element takes two of the `2n` slices of a window and needs as
//! many cycles as the two slices hold set bits together. Without
//! reordering, slices pair in storage order. With reordering, slices are
//! sorted by count and the heaviest remaining slice is paired with the
//! lightest, which minimizes the largest pair sum.

/// How one window's slices were assigned to processing elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkloadAssignment {
    /// Two slice indices per element.
    pub pairs: Vec<(usize, usize)>,
    /// Summed set-bit count per element.
    pub per_pe: Vec<u64>,
    /// Cycles until the busiest element finishes.
    pub makespan: u64,
}

/// Assigns `counts` (one entry per slice, length twice the element count)
/// to processing elements. `reorder` selects sorted big-with-small
/// pairing; otherwise adjacent slices pair up.
pub fn balance_workload(counts: &[u64], reorder: bool) -> WorkloadAssignment {
    assert!(
        counts.len() % 2 == 0 && !counts.is_empty(),
        "slice count {} must be a positive multiple of two",
        counts.len()
    );
    let pe_count = counts.len() / 2;
    let pairs: Vec<(usize, usize)> = if reorder {
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(counts[i]));
        (0..pe_count)
            .map(|i| (order[i], order[counts.len() - 1 - i]))
            .collect()
    } else {
        (0..pe_count).map(|i| (2 * i, 2 * i + 1)).collect()
    };
    let per_pe: Vec<u64> = pairs.iter().map(|&(a, b)| counts[a] + counts[b]).collect();
    let makespan = per_pe.iter().copied().max().unwrap_or(0);
    WorkloadAssignment { pairs, per_pe, makespan }
}
