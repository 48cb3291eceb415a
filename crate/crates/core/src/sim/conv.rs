//! Streaming 3x3 convolution on the accelerator.
//!
//! One pass per (output group, input group) pair: the value FIFO is
//! serial, so each 32-channel input group streams separately, and the
//! whole input re-streams for every 32-channel output group. Within a
//! pass the rows go by once; every column position opens a 1x3 window
//! whose 96 map bits are sliced across the processing elements. The
//! three column processors apply the three kernel rows to the same
//! window and accumulate into three different output rows of TMP.

use crate::error::{Error, Result};
use crate::golden::{xor_mac, PartialSumTensor};
use crate::memory::pack_map_memory;
use crate::sim::{balance_workload, pe_run, slice_bounds, AccelConfig, CycleTrace};
use crate::tensor::{
    encode_sparse, BinaryWeightTensor, Shape, TernaryTensor, TraversalOrder, CHANNEL_GROUP,
};

pub fn simulate_conv(
    x: &TernaryTensor,
    w: &BinaryWeightTensor,
    cfg: &AccelConfig,
) -> Result<(PartialSumTensor, CycleTrace)> {
    cfg.validate()?;
    if w.kernel_h != 3 || w.kernel_w != 3 {
        return Err(Error::shape(format!(
            "expected a 3x3 kernel, got {}x{}",
            w.kernel_h, w.kernel_w
        )));
    }
    if cfg.pcl_count != 3 {
        return Err(Error::config(format!(
            "convolution assigns one kernel row per column processor and needs 3, config has {}",
            cfg.pcl_count
        )));
    }
    let sh = x.shape();
    if w.in_channels != sh.c {
        return Err(Error::shape(format!(
            "kernel expects {} input channels, tensor has {}",
            w.in_channels, sh.c
        )));
    }

    let (h, wd) = (sh.h, sh.w);
    let positions = sh.positions();
    let out_c = w.out_channels;
    let mut trace = CycleTrace::new(cfg.pe_count());

    let map = pack_map_memory(&encode_sparse(x, TraversalOrder::ChannelGroupMajor));
    let group_nnz: Vec<u64> = (0..sh.channel_groups())
        .map(|g| {
            map.words[g * positions..(g + 1) * positions]
                .iter()
                .map(|w| w.count_ones() as u64)
                .sum()
        })
        .collect();

    let slices = slice_bounds(3 * CHANNEL_GROUP, 2 * cfg.pe_per_pcl);
    let slice_masks: Vec<u128> = slices
        .iter()
        .map(|&(s, e)| {
            if e == s {
                0
            } else {
                (u128::MAX >> (128 - (e - s))) << s
            }
        })
        .collect();

    let mut acc = vec![0i32; positions * out_c];
    let mut counts = vec![0u64; slice_masks.len()];
    let mut values_buf: Vec<Option<bool>> = Vec::with_capacity(3 * CHANNEL_GROUP);

    for og in 0..w.out_groups() {
        let lanes = (out_c - og * CHANNEL_GROUP).min(CHANNEL_GROUP);
        // First use of a (kernel column, input channel) pair in this pass
        // pulls that weight word for all three kernel rows at once.
        let mut fetched = vec![false; 3 * sh.c];
        if !cfg.zero_skip_enabled {
            trace.fetch_cycles += (9 * sh.c) as u64 * cfg.fetch_cycles_per_weight_word;
        }
        for g in 0..sh.channel_groups() {
            let width = sh.group_width(g);
            let present_word: u32 = if width == CHANNEL_GROUP {
                u32::MAX
            } else {
                (1u32 << width) - 1
            };
            if cfg.zero_skip_enabled {
                trace.fetch_cycles += positions as u64 * cfg.fetch_cycles_per_map_word
                    + group_nnz[g] * cfg.fetch_cycles_per_value_bit;
            } else {
                trace.fetch_cycles +=
                    (positions * width) as u64 * cfg.fetch_cycles_per_value_bit;
            }
            for r in 0..h {
                let mut valid_krs = [0usize; 3];
                let mut v = 0usize;
                for kr in 0..3 {
                    if (r + 1).checked_sub(kr).is_some_and(|or| or < h) {
                        valid_krs[v] = kr;
                        v += 1;
                    }
                }
                let valid_krs = &valid_krs[..v];
                for c in 0..wd {
                    let mut present = 0u128;
                    let mut nonzero = 0u128;
                    for k in 0..3usize {
                        let Some(col) = (c + k).checked_sub(1).filter(|col| *col < wd)
                        else {
                            continue;
                        };
                        present |= (present_word as u128) << (CHANNEL_GROUP * k);
                        nonzero |= (map.words[g * positions + r * wd + col] as u128)
                            << (CHANNEL_GROUP * k);
                    }
                    let active = if cfg.zero_skip_enabled { nonzero } else { present };
                    for (i, m) in slice_masks.iter().enumerate() {
                        counts[i] = (active & m).count_ones() as u64;
                    }
                    let assignment = balance_workload(&counts, cfg.reorder_enabled);
                    trace.mac_cycles += assignment.makespan;
                    if cfg.reorder_enabled {
                        trace.sort_cycles += 1;
                    }
                    let nz = nonzero.count_ones() as u64;
                    let pres = present.count_ones() as u64;
                    let per_tap = v as u64 * lanes as u64;
                    if cfg.zero_skip_enabled {
                        trace.executed_macs += nz * per_tap;
                        trace.skipped_macs += (pres - nz) * per_tap;
                    } else {
                        trace.executed_macs += pres * per_tap;
                    }
                    for (pe, &(s1, s2)) in assignment.pairs.iter().enumerate() {
                        for &kr in valid_krs {
                            trace.pe_busy_cycles[kr * cfg.pe_per_pcl + pe] +=
                                assignment.per_pe[pe];
                        }
                        for si in [s1, s2] {
                            let pma = active & slice_masks[si];
                            if pma == 0 {
                                continue;
                            }
                            values_buf.clear();
                            let mut rest = pma;
                            while rest != 0 {
                                let bit = rest.trailing_zeros() as usize;
                                rest &= rest - 1;
                                values_buf.push(if nonzero >> bit & 1 == 1 {
                                    let (k, lane) = (bit / CHANNEL_GROUP, bit % CHANNEL_GROUP);
                                    Some(x.get(r, c + k - 1, g * CHANNEL_GROUP + lane) > 0)
                                } else {
                                    None
                                });
                            }
                            pe_run(pma, &values_buf, |bit, sign| {
                                let bit = bit as usize;
                                let (k, lane) = (bit / CHANNEL_GROUP, bit % CHANNEL_GROUP);
                                let ch = g * CHANNEL_GROUP + lane;
                                if cfg.zero_skip_enabled && !fetched[k * sh.c + ch] {
                                    fetched[k * sh.c + ch] = true;
                                    trace.fetch_cycles += cfg.pcl_count as u64
                                        * cfg.fetch_cycles_per_weight_word;
                                }
                                for &kr in valid_krs {
                                    let or = r + 1 - kr;
                                    let wword = w.lane_word(kr, k, ch, og);
                                    let base = (or * wd + c) * out_c + og * CHANNEL_GROUP;
                                    for lo in 0..lanes {
                                        acc[base + lo] +=
                                            xor_mac(sign, wword >> lo & 1 == 1);
                                    }
                                }
                            });
                        }
                    }
                }
                // Each contributing kernel row read-modifies-writes one TMP
                // word per window of this row.
                trace.tmp_cycles += v as u64 * wd as u64 * 2 * cfg.tmp_rw_cycles_per_word;
            }
        }
    }
    let out = PartialSumTensor::from_accumulator(Shape::new(h, wd, out_c), acc)?;
    Ok((out, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::golden;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_matches_golden(x: &TernaryTensor, w: &BinaryWeightTensor, cfg: &AccelConfig) {
        let (got, trace) = simulate_conv(x, w, cfg).unwrap();
        let want = golden::ternary_conv3x3(x, w).unwrap();
        assert_eq!(got.values(), want.values());
        // Work conservation against the dense tap count.
        let dense: u64 = dense_tap_count(x.shape(), w.out_channels);
        assert_eq!(trace.executed_macs + trace.skipped_macs, dense);
    }

    fn dense_tap_count(sh: Shape, out_c: usize) -> u64 {
        let mut taps = 0u64;
        for or in 0..sh.h {
            for oc in 0..sh.w {
                for kr in 0..3i64 {
                    for kc in 0..3i64 {
                        let r = or as i64 + kr - 1;
                        let c = oc as i64 + kc - 1;
                        if r >= 0 && c >= 0 && r < sh.h as i64 && c < sh.w as i64 {
                            taps += 1;
                        }
                    }
                }
            }
        }
        taps * sh.c as u64 * out_c as u64
    }

    #[test]
    fn matches_reference_on_random_tensors() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for &(h, wd, ic, oc) in &[
            (1usize, 1usize, 1usize, 1usize),
            (4, 4, 3, 5),
            (5, 7, 33, 17),
            (6, 6, 64, 40),
            (2, 9, 16, 65),
        ] {
            let x = TernaryTensor::random(Shape::new(h, wd, ic), 0.45, &mut rng);
            let w = BinaryWeightTensor::random(3, 3, ic, oc, &mut rng);
            check_matches_golden(&x, &w, &AccelConfig::default());
            check_matches_golden(&x, &w, &AccelConfig::bnn_baseline());
            let unsorted = AccelConfig { reorder_enabled: false, ..AccelConfig::default() };
            check_matches_golden(&x, &w, &unsorted);
        }
    }

    #[test]
    fn all_zero_input_costs_only_map_and_tmp() {
        let x = TernaryTensor::zeros(Shape::new(4, 4, 32));
        let w = BinaryWeightTensor::random(3, 3, 32, 32, &mut ChaCha8Rng::seed_from_u64(1));
        let cfg = AccelConfig::default();
        let (out, trace) = simulate_conv(&x, &w, &cfg).unwrap();
        assert!(out.values().iter().all(|&v| v == 0));
        assert_eq!(trace.mac_cycles, 0);
        assert_eq!(trace.executed_macs, 0);
        assert_eq!(trace.skipped_macs, dense_tap_count(x.shape(), 32));
        // 16 map words per pass, one pass.
        assert_eq!(
            trace.fetch_cycles,
            16 * cfg.fetch_cycles_per_map_word
        );
        // Rows contribute 3H-2 = 10 kernel-row writebacks of W words each.
        assert_eq!(trace.tmp_cycles, 10 * 4 * 2 * cfg.tmp_rw_cycles_per_word);
        // The sorter still runs on every window.
        assert_eq!(trace.sort_cycles, 16);
    }

    #[test]
    fn skipping_beats_the_dense_baseline_on_sparse_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = TernaryTensor::random(Shape::new(8, 8, 64), 0.3, &mut rng);
        let w = BinaryWeightTensor::random(3, 3, 64, 64, &mut rng);
        let (_, skip) = simulate_conv(&x, &w, &AccelConfig::default()).unwrap();
        let (_, dense) = simulate_conv(&x, &w, &AccelConfig::bnn_baseline()).unwrap();
        assert!(skip.total_cycles() < dense.total_cycles());
        assert!(skip.mac_cycles < dense.mac_cycles);
        assert_eq!(
            skip.executed_macs + skip.skipped_macs,
            dense.executed_macs
        );
        assert_eq!(dense.skipped_macs, 0);
    }

    #[test]
    fn reordering_never_slows_the_mac_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for density in [0.1, 0.4, 0.8] {
            let x = TernaryTensor::random(Shape::new(5, 6, 40), density, &mut rng);
            let w = BinaryWeightTensor::random(3, 3, 40, 32, &mut rng);
            let sorted = AccelConfig::default();
            let plain = AccelConfig { reorder_enabled: false, ..sorted };
            let (_, a) = simulate_conv(&x, &w, &sorted).unwrap();
            let (_, b) = simulate_conv(&x, &w, &plain).unwrap();
            assert!(a.mac_cycles <= b.mac_cycles, "density {density}");
            assert_eq!(a.executed_macs, b.executed_macs);
        }
    }

    #[test]
    fn output_group_passes_multiply_input_traffic() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let x = TernaryTensor::random(Shape::new(4, 4, 32), 0.5, &mut rng);
        let w32 = BinaryWeightTensor::random(3, 3, 32, 32, &mut rng);
        let w64 = BinaryWeightTensor::random(3, 3, 32, 64, &mut rng);
        let cfg = AccelConfig::default();
        let (_, one) = simulate_conv(&x, &w32, &cfg).unwrap();
        let (_, two) = simulate_conv(&x, &w64, &cfg).unwrap();
        // Twice the output groups re-streams the input twice.
        assert_eq!(two.mac_cycles, 2 * one.mac_cycles);
        assert_eq!(two.tmp_cycles, 2 * one.tmp_cycles);
        assert_eq!(two.sort_cycles, 2 * one.sort_cycles);
    }

    #[test]
    fn rejects_wrong_pcl_count() {
        let x = TernaryTensor::zeros(Shape::new(2, 2, 1));
        let w = BinaryWeightTensor::random(3, 3, 1, 1, &mut ChaCha8Rng::seed_from_u64(2));
        let cfg = AccelConfig { pcl_count: 2, ..AccelConfig::default() };
        assert!(matches!(simulate_conv(&x, &w, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn narrow_pe_arrays_still_compute_correctly() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let x = TernaryTensor::random(Shape::new(3, 5, 48), 0.5, &mut rng);
        let w = BinaryWeightTensor::random(3, 3, 48, 20, &mut rng);
        for pe in [1usize, 2, 5, 8] {
            let cfg = AccelConfig { pe_per_pcl: pe, ..AccelConfig::default() };
            let (got, trace) = simulate_conv(&x, &w, &cfg).unwrap();
            let want = golden::ternary_conv3x3(&x, &w).unwrap();
            assert_eq!(got.values(), want.values(), "pe={pe}");
            assert_eq!(trace.pe_busy_cycles.len(), 3 * pe);
        }
    }
}
