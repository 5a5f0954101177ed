mod common;

use common::*;
use maskpool::maskednet::{count_flops, MaskState};
use proptest::prelude::*;

#[test]
fn masked_mlp_matches_a_loop_forward() {
    for seed in 0..10 {
        let mut n = net(TINY_MLP, seed);
        let a = n.arch().clone();
        let kept = random_retained(&a, 0.6, seed + 100);
        n.set_mask(Some(random_mask(&a, &kept, seed + 200))).unwrap();
        let x = batch(&a, 4, seed + 300);
        let got = n.masked_forward(&x).unwrap();
        let want = naive_mlp_forward(&n, &x);
        for (i, row) in want.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert!((got.row(i)[c] - v).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn extraction_drops_pruned_units_structurally() {
    let mut n = net(TINY_CNN, 5);
    let a = n.arch().clone();
    let kept = random_retained(&a, 0.5, 6);
    n.set_mask(Some(random_mask(&a, &kept, 7))).unwrap();
    let sub = n.extract_subnetwork().unwrap();
    assert_eq!(sub.num_units(), kept.iter().filter(|&&k| k).count());
    assert!(sub.mask().is_none());
    assert!(sub.num_parameters() < n.num_parameters());
    assert!(count_flops(&sub).unwrap() < count_flops(&n.with_fresh_mask()).unwrap());
}

#[test]
fn full_binary_mask_changes_nothing() {
    let n = net(TINY_CNN, 8);
    let a = n.arch().clone();
    let x = batch(&a, 3, 9);
    let mut masked = n.clone();
    masked
        .set_mask(Some(MaskState::binary(&a, &vec![true; a.num_units()]).unwrap()))
        .unwrap();
    let d = masked.masked_forward(&x).unwrap().max_abs_diff(&n.forward_unmasked(&x).unwrap());
    assert_eq!(d, 0.0);
}

#[test]
fn emptying_a_layer_is_rejected() {
    let a = arch(TINY_MLP);
    let mut kept = vec![true; a.num_units()];
    kept[..12].iter_mut().for_each(|k| *k = false);
    assert!(MaskState::binary(&a, &kept).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn extracted_forward_equals_masked_forward(seed in 0u64..10_000, keep in 0.1f64..1.0, cnn in any::<bool>()) {
        let desc = if cnn { TINY_CNN } else { TINY_MLP };
        let mut n = net(desc, seed);
        let a = n.arch().clone();
        let kept = random_retained(&a, keep, seed ^ 1);
        n.set_mask(Some(random_mask(&a, &kept, seed ^ 2))).unwrap();
        let x = batch(&a, 3, seed ^ 3);
        let sub = n.extract_subnetwork().unwrap();
        let mut binary = n.clone();
        binary.set_mask(Some(MaskState::binary(&a, &kept).unwrap())).unwrap();
        let d = sub.forward_unmasked(&x).unwrap().max_abs_diff(&binary.masked_forward(&x).unwrap());
        prop_assert!(d <= 1e-6, "max abs diff {}", d);
    }

    #[test]
    fn pruned_scores_are_exactly_zero(seed in 0u64..10_000) {
        let a = arch(TINY_MLP);
        let kept = random_retained(&a, 0.5, seed);
        let mut m = random_mask(&a, &kept, seed + 1);
        m.enforce_zeroes();
        for (s, k) in m.scores().iter().zip(m.retained()) {
            prop_assert!(*k || *s == 0.0);
        }
    }
}
