mod common;

use common::*;
use maskpool::smsp::{one_shot_prune, select_retained, smsp_with_neighbors, sum_masks, SmspConfig};
use maskpool::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn random_scores(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(0.0..3.0)).collect()
}

#[test]
fn sum_matches_plain_loop() {
    let recs: Vec<_> = (0..5).map(|i| random_record("a", 22, i)).collect();
    let refs: Vec<_> = recs.iter().collect();
    let got = sum_masks(&refs).unwrap();
    for (u, g) in got.iter().enumerate() {
        let mut want = 0.0;
        for r in &recs {
            want += f64::from(r.scores[u]);
        }
        assert!((g - want).abs() < 1e-9);
    }
}

#[test]
fn sum_rejects_mixed_architectures() {
    let a = random_record("a", 10, 1);
    let b = random_record("b", 10, 2);
    let c = random_record("a", 11, 3);
    assert!(matches!(sum_masks(&[&a, &b]), Err(Error::ArchMismatch(_))));
    assert!(matches!(sum_masks(&[&a, &c]), Err(Error::ArchMismatch(_))));
    assert!(matches!(sum_masks(&[]), Err(Error::EmptyInput(_))));
}

#[test]
fn prunes_exactly_k_lowest_when_floor_is_slack() {
    let a = arch(TINY_MLP);
    let scores = random_scores(a.num_units(), 9);
    for ratio in [0.1, 0.5, 0.8] {
        let k = a.prune_count(ratio).unwrap();
        let kept = select_retained(&a, &scores, ratio).unwrap();
        assert_eq!(kept.iter().filter(|&&r| !r).count(), k);
        let max_pruned = (0..scores.len()).filter(|&u| !kept[u]).map(|u| scores[u]).fold(f64::MIN, f64::max);
        let min_kept = (0..scores.len()).filter(|&u| kept[u]).map(|u| scores[u]).fold(f64::MAX, f64::min);
        // lowest scores go first unless a layer is down to one unit
        let offsets = a.layer_offsets();
        let floor_hit = offsets.windows(2).any(|w| kept[w[0]..w[1]].iter().filter(|&&x| x).count() == 1);
        assert!(floor_hit || max_pruned <= min_kept);
    }
}

#[test]
fn ratio_zero_keeps_everything() {
    let a = arch(TINY_CNN);
    let kept = select_retained(&a, &random_scores(a.num_units(), 1), 0.0).unwrap();
    assert!(kept.iter().all(|&k| k));
}

#[test]
fn floor_keeps_one_unit_per_layer() {
    let a = arch(TINY_MLP);
    // layer 0 (12 units) scores far below layer 1
    let mut scores = vec![10.0; a.num_units()];
    for s in scores.iter_mut().take(12) {
        *s = 0.1;
    }
    let kept = select_retained(&a, &scores, 0.5).unwrap();
    assert_eq!(kept[..12].iter().filter(|&&k| k).count(), 1);
    assert!(matches!(select_retained(&a, &scores[1..], 0.5), Err(Error::ArchMismatch(_))));
    let mut bad = scores.clone();
    bad[3] = f64::NAN;
    assert!(select_retained(&a, &bad, 0.5).is_err());
}

#[test]
fn one_shot_prune_shrinks_the_network() {
    let a = arch(TINY_MLP);
    let backbone = net(TINY_MLP, 2);
    let sub = one_shot_prune(&backbone, &random_scores(a.num_units(), 4), 0.5).unwrap();
    assert_eq!(sub.num_units(), a.num_units() - a.prune_count(0.5).unwrap());
    assert!(sub.mask().is_none());
}

#[test]
fn pipeline_on_toy_task() {
    let a = arch(TINY_MLP);
    let backbone = net(TINY_MLP, 6);
    let task = toy_task(&a, vec![0, 2], 16, 7);
    let recs: Vec<_> = (0..3).map(|i| random_record(backbone.arch_id(), a.num_units(), 20 + i)).collect();
    let refs: Vec<_> = recs.iter().collect();
    let cfg = SmspConfig {
        pruning_ratio: 0.5,
        fine_tune_iterations: 40,
        batch_size: 8,
        lr: 0.1,
        seed: 1,
        ..Default::default()
    };
    let out = smsp_with_neighbors(&backbone, &refs, &task, &cfg).unwrap();
    assert!((0.0..=1.0).contains(&out.accuracy));
    assert!(out.achieved_ratio >= 0.5);
    assert_eq!(out.subnet.arch().num_classes, 2);
    assert_eq!(out.fine_tune_iterations, 40);
    assert!(out.flops_ledger.cumulative_training_flops > 0);
    let again = smsp_with_neighbors(&backbone, &refs, &task, &cfg).unwrap();
    assert_eq!(out.accuracy, again.accuracy);
    assert_eq!(out.mask, again.mask);
}

proptest! {
    #[test]
    fn sum_is_order_invariant(seed in 0u64..10_000, m in 1usize..10) {
        let recs: Vec<_> = (0..m).map(|i| random_record("a", 30, seed * 31 + i as u64)).collect();
        let mut refs: Vec<_> = recs.iter().collect();
        let base = sum_masks(&refs).unwrap();
        refs.shuffle(&mut rng(seed));
        let shuffled = sum_masks(&refs).unwrap();
        prop_assert!(base.iter().zip(&shuffled).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn retention_is_nested_across_ratios(seed in 0u64..10_000, r1 in 0.0f64..0.75, dr in 0.0f64..0.15) {
        let a = arch(TINY_MLP);
        let scores = random_scores(a.num_units(), seed);
        let small = select_retained(&a, &scores, r1).unwrap();
        let large = select_retained(&a, &scores, r1 + dr).unwrap();
        prop_assert!(large.iter().zip(&small).all(|(&l, &s)| !l || s));
    }
}
