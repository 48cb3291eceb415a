//! Fully connected layers on the accelerator.
//!
//! There is no window structure: the whole input streams once as a flat
//! map in channel-group-major order, sliced across the processing
//! elements of one column processor. The column processors gang up on
//! disjoint 32-channel output groups, sharing the broadcast map and
//! value stream, so a network head with more output groups than column
//! processors takes several rounds. Each group accumulates in-place and
//! writes TMP once at the end of its round.

use crate::error::{Error, Result};
use crate::golden::{xor_mac, PartialSumTensor};
use crate::memory::pack_map_memory;
use crate::sim::{balance_workload, slice_bounds, AccelConfig, CycleTrace};
use crate::tensor::{
    encode_sparse, BinaryWeightTensor, Shape, TernaryTensor, TraversalOrder, CHANNEL_GROUP,
};

pub fn simulate_fc(
    x: &TernaryTensor,
    w: &BinaryWeightTensor,
    cfg: &AccelConfig,
) -> Result<(PartialSumTensor, CycleTrace)> {
    cfg.validate()?;
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

    let mut trace = CycleTrace::new(cfg.pe_count());
    let positions = sh.positions();
    let out_c = w.out_channels;
    let og_count = w.out_groups();

    let map = pack_map_memory(&encode_sparse(x, TraversalOrder::ChannelGroupMajor));
    let map_bits = map.words.len() * CHANNEL_GROUP;
    let nnz = x.count_nonzero() as u64;
    let n_real = sh.elems() as u64;

    let slices = slice_bounds(map_bits, 2 * cfg.pe_per_pcl);
    // Set-bit and real-element counts per slice; slices are wide here, so
    // count via the packed words with masked edges.
    let bit_in_word = |bit: usize| (bit / CHANNEL_GROUP, bit % CHANNEL_GROUP);
    let word_popcount_range = |word: u32, lo: usize, hi: usize| -> u64 {
        let mask = if hi - lo == CHANNEL_GROUP {
            u32::MAX
        } else {
            ((1u32 << (hi - lo)) - 1) << lo
        };
        (word & mask).count_ones() as u64
    };
    let real_width = |word_idx: usize| sh.group_width(word_idx / positions);
    let slice_counts = |dense: bool| -> Vec<u64> {
        slices
            .iter()
            .map(|&(s, e)| {
                let mut n = 0u64;
                let mut bit = s;
                while bit < e {
                    let (wi, lo) = bit_in_word(bit);
                    let hi = ((wi + 1) * CHANNEL_GROUP).min(e) - wi * CHANNEL_GROUP;
                    if dense {
                        let width = real_width(wi);
                        n += (hi.min(width)).saturating_sub(lo) as u64;
                    } else {
                        n += word_popcount_range(map.words[wi], lo, hi);
                    }
                    bit = (wi + 1) * CHANNEL_GROUP;
                }
                n
            })
            .collect()
    };
    let counts = slice_counts(!cfg.zero_skip_enabled);

    let mut acc = vec![0i32; out_c];
    let rounds = og_count.div_ceil(cfg.pcl_count);
    for round in 0..rounds {
        let groups = round * cfg.pcl_count..((round + 1) * cfg.pcl_count).min(og_count);
        let lanes_sum: u64 = groups
            .clone()
            .map(|o| ((out_c - o * CHANNEL_GROUP).min(CHANNEL_GROUP)) as u64)
            .sum();
        if cfg.zero_skip_enabled {
            trace.fetch_cycles += map.words.len() as u64 * cfg.fetch_cycles_per_map_word
                + nnz * cfg.fetch_cycles_per_value_bit
                + nnz * groups.len() as u64 * cfg.fetch_cycles_per_weight_word;
            trace.executed_macs += nnz * lanes_sum;
            trace.skipped_macs += (n_real - nnz) * lanes_sum;
        } else {
            trace.fetch_cycles += n_real * cfg.fetch_cycles_per_value_bit
                + n_real * groups.len() as u64 * cfg.fetch_cycles_per_weight_word;
            trace.executed_macs += n_real * lanes_sum;
        }
        let assignment = balance_workload(&counts, cfg.reorder_enabled);
        trace.mac_cycles += assignment.makespan;
        if cfg.reorder_enabled {
            trace.sort_cycles += 1;
        }
        for (pcl_slot, _o) in groups.clone().enumerate() {
            for (pe, &load) in assignment.per_pe.iter().enumerate() {
                trace.pe_busy_cycles[pcl_slot * cfg.pe_per_pcl + pe] += load;
            }
        }
        trace.tmp_cycles += groups.len() as u64 * cfg.tmp_rw_cycles_per_word;

        // Accumulate this round's output groups. Retirement order does not
        // change a sum, so walk the map words directly; zeros and pad
        // lanes carry no map bit and never contribute, whatever the
        // streaming mode.
        for (wi, &word) in map.words.iter().enumerate() {
            let g = wi / positions;
            let p = wi % positions;
            let (r, c) = (p / sh.w, p % sh.w);
            let mut bits = word;
            while bits != 0 {
                let lane = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let ch = g * CHANNEL_GROUP + lane;
                let sign = x.get(r, c, ch) > 0;
                let flat = TraversalOrder::ChannelGroupMajor.index(sh, r, c, ch);
                for o in groups.clone() {
                    let lanes = (out_c - o * CHANNEL_GROUP).min(CHANNEL_GROUP);
                    let wword = w.lane_word(0, 0, flat, o);
                    for lo in 0..lanes {
                        acc[o * CHANNEL_GROUP + lo] += xor_mac(sign, wword >> lo & 1 == 1);
                    }
                }
            }
        }
    }
    let out = PartialSumTensor::from_accumulator(Shape::new(1, 1, out_c), acc)?;
    Ok((out, trace))
}
