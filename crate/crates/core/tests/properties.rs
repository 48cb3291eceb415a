//! Randomized invariant checks over the encoding, packing, scheduling,
//! and simulation layers.

use proptest::prelude::*;
use tbn::dvs::{config_catalog, encode_frame, GrayFrame};
use tbn::golden::{self, PartialSumTensor};
use tbn::memory::{pack_map_memory, unpack_map_memory};
use tbn::sim::{balance_workload, simulate_conv, simulate_fc, AccelConfig};
use tbn::tensor::{
    decode_sparse, encode_sparse, BinaryWeightTensor, Shape, TernaryTensor, TraversalOrder,
};

fn arb_shape() -> impl Strategy<Value = Shape> {
    (1usize..=9, 1usize..=9, 1usize..=70).prop_map(|(h, w, c)| Shape::new(h, w, c))
}

fn arb_tensor() -> impl Strategy<Value = TernaryTensor> {
    (arb_shape(), any::<u64>(), 0.0f64..=1.0).prop_map(|(shape, seed, density)| {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        TernaryTensor::random(shape, density, &mut rng)
    })
}

fn arb_traversal() -> impl Strategy<Value = TraversalOrder> {
    prop_oneof![
        Just(TraversalOrder::ChannelGroupMajor),
        Just(TraversalOrder::PositionMajor),
    ]
}

proptest! {
    #[test]
    fn encode_decode_round_trip(t in arb_tensor(), order in arb_traversal()) {
        let enc = encode_sparse(&t, order);
        prop_assert_eq!(enc.nonzero_count(), t.count_nonzero());
        let back = decode_sparse(&enc).unwrap();
        prop_assert_eq!(back.data(), t.data());
    }

    #[test]
    fn encoded_size_is_map_plus_values(t in arb_tensor(), order in arb_traversal()) {
        let enc = encode_sparse(&t, order);
        let n = t.shape().elems() as u64;
        let stats = tbn::memory::size_report(&enc);
        prop_assert_eq!(stats.encoded_bits, n + t.count_nonzero() as u64);
        prop_assert!(stats.encoded_bits <= stats.dense_2bit_bits);
        prop_assert!(stats.dense_2bit_bits <= stats.dense_8bit_bits);
    }

    #[test]
    fn map_memory_round_trip(t in arb_tensor()) {
        let enc = encode_sparse(&t, TraversalOrder::ChannelGroupMajor);
        let img = pack_map_memory(&enc);
        let back = unpack_map_memory(&img, t.shape(), TraversalOrder::ChannelGroupMajor).unwrap();
        prop_assert_eq!(back, enc.map);
    }

    #[test]
    fn workload_pairing_conserves_and_never_hurts(
        counts in proptest::collection::vec(0u64..=100, 2usize..=12)
            .prop_map(|mut v| {
                if v.len() % 2 == 1 {
                    v.pop();
                }
                v
            }),
    ) {
        let total: u64 = counts.iter().sum();
        let plain = balance_workload(&counts, false);
        let sorted = balance_workload(&counts, true);
        for a in [&plain, &sorted] {
            prop_assert_eq!(a.per_pe.iter().sum::<u64>(), total);
            prop_assert_eq!(a.makespan, *a.per_pe.iter().max().unwrap());
            let mut seen = vec![false; counts.len()];
            for &(i, j) in &a.pairs {
                prop_assert!(!seen[i] && !seen[j]);
                seen[i] = true;
                seen[j] = true;
            }
            prop_assert!(seen.into_iter().all(|s| s));
        }
        prop_assert!(sorted.makespan <= plain.makespan);
        let floor = total.div_ceil((counts.len() / 2) as u64);
        prop_assert!(sorted.makespan >= floor);
    }

    #[test]
    fn quantize_thresholds_are_strict(
        values in proptest::collection::vec(-300i16..=300, 24),
        pos in 1i16..=100,
    ) {
        let shape = Shape::new(2, 3, 4);
        let x = PartialSumTensor::new(shape, values.clone()).unwrap();
        let out = golden::quantize_ternary(&x, &vec![(pos, -pos); 4]).unwrap();
        for (i, &v) in values.iter().enumerate() {
            let want = if v > pos { 1 } else if v < -pos { -1 } else { 0 };
            prop_assert_eq!(out.data()[i], want, "value {} threshold {}", v, pos);
        }
    }

    #[test]
    fn frame_encoding_ignores_uniform_brightness(
        pixels in proptest::collection::vec(60u8..=180, 48),
        shift in -50i16..=50,
    ) {
        let frame = GrayFrame::new(6, 8, pixels.clone()).unwrap();
        let shifted = GrayFrame::new(
            6,
            8,
            pixels.iter().map(|&p| (p as i16 + shift) as u8).collect(),
        )
        .unwrap();
        for cfg in config_catalog() {
            let a = encode_frame(&frame, &cfg).unwrap();
            let b = encode_frame(&shifted, &cfg).unwrap();
            prop_assert_eq!(a.data(), b.data(), "configuration {}", cfg.id);
        }
    }

    #[test]
    fn conv_simulation_matches_reference(
        h in 1usize..=6,
        w in 1usize..=6,
        cin in 1usize..=40,
        cout in 1usize..=40,
        density in 0.0f64..=1.0,
        seed in any::<u64>(),
        zero_skip in any::<bool>(),
        reorder in any::<bool>(),
    ) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = TernaryTensor::random(Shape::new(h, w, cin), density, &mut rng);
        let wts = BinaryWeightTensor::random(3, 3, cin, cout, &mut rng);
        let cfg = AccelConfig {
            zero_skip_enabled: zero_skip,
            reorder_enabled: reorder,
            ..AccelConfig::default()
        };
        let want = golden::ternary_conv3x3(&x, &wts).unwrap();
        let (got, trace) = simulate_conv(&x, &wts, &cfg).unwrap();
        prop_assert_eq!(got.values(), want.values());
        let dense: u64 = trace.executed_macs + trace.skipped_macs;
        prop_assert!(trace.executed_macs <= dense);
        if !zero_skip {
            prop_assert_eq!(trace.skipped_macs, 0);
        }
    }

    #[test]
    fn fc_simulation_matches_reference(
        h in 1usize..=4,
        w in 1usize..=4,
        cin in 1usize..=40,
        cout in 1usize..=40,
        density in 0.0f64..=1.0,
        seed in any::<u64>(),
        zero_skip in any::<bool>(),
    ) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = TernaryTensor::random(Shape::new(h, w, cin), density, &mut rng);
        let wts = BinaryWeightTensor::random(1, 1, h * w * cin, cout, &mut rng);
        let cfg = AccelConfig {
            zero_skip_enabled: zero_skip,
            ..AccelConfig::default()
        };
        let want = golden::fully_connected(&x, &wts).unwrap();
        let (got, trace) = simulate_fc(&x, &wts, &cfg).unwrap();
        prop_assert_eq!(got.values(), want.values());
        prop_assert_eq!(
            trace.executed_macs + trace.skipped_macs,
            (h * w * cin * cout) as u64
        );
    }

    #[test]
    fn pool_then_relu_bounds(values in proptest::collection::vec(-500i16..=500, 64)) {
        let x = PartialSumTensor::new(Shape::new(4, 4, 4), values.clone()).unwrap();
        let out = golden::pool_relu(&x).unwrap();
        let max = values.iter().copied().max().unwrap().max(0);
        for &v in out.values() {
            prop_assert!(v >= 0);
            prop_assert!(v <= max);
        }
    }
}
