mod common;

use common::*;
use maskpool::amp::{amp_prune, build_pool_entry, prune_below_threshold, AmpConfig};
use maskpool::maskednet::{MaskState, MaskedNetwork};
use maskpool::Error;

fn weight_bits(net: &MaskedNetwork) -> Vec<u64> {
    net.hidden_params()
        .iter()
        .chain(std::iter::once(net.head_params()))
        .flat_map(|l| {
            l.weight
                .value()
                .data()
                .iter()
                .chain(l.bias.value().data())
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        })
        .collect()
}

fn cfg(ratio: f64) -> AmpConfig {
    AmpConfig {
        iterations: 150,
        target_ratio: ratio,
        l1_weight: 0.2,
        batch_size: 8,
        lr: 0.2,
        seed: 4,
        ..Default::default()
    }
}

#[test]
fn frozen_mode_leaves_weights_bit_identical() {
    let a = arch(TINY_CNN);
    let backbone = net(TINY_CNN, 1);
    let task = toy_task(&a, vec![0, 1, 2], 12, 2);
    let out = amp_prune(&backbone, &task, &cfg(0.5)).unwrap();
    assert_eq!(weight_bits(&out.pruned_net), weight_bits(&backbone));
    let scores_moved = out.pruned_net.mask().unwrap().scores().iter().any(|&s| s != 1.0);
    assert!(scores_moved);
}

#[test]
fn free_mode_updates_weights() {
    let a = arch(TINY_MLP);
    let backbone = net(TINY_MLP, 1);
    let task = toy_task(&a, vec![0, 1, 2], 12, 2);
    let c = AmpConfig {
        frozen_weights: false,
        ..cfg(0.5)
    };
    let out = amp_prune(&backbone, &task, &c).unwrap();
    assert_ne!(weight_bits(&out.pruned_net), weight_bits(&backbone));
}

#[test]
fn reaches_ratio_with_zeroed_pruned_scores() {
    let a = arch(TINY_MLP);
    let backbone = net(TINY_MLP, 3);
    let task = toy_task(&a, vec![0, 1, 2], 12, 5);
    let out = amp_prune(&backbone, &task, &cfg(0.5)).unwrap();
    assert!(out.status.converged, "{:?}", out.status);
    assert!(out.achieved_ratio >= 0.5);
    let mask = out.pruned_net.mask().unwrap();
    for u in 0..mask.len() {
        if !mask.is_retained(u) {
            assert_eq!(mask.scores()[u], 0.0);
            assert_eq!(out.record.scores[u], 0.0);
        }
    }
    for l in 0..mask.num_layers() {
        assert!(mask.layer_retained(l) >= 1);
    }
    assert!(out.retained_history.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(out.record.class_labels, vec![0, 1, 2]);
}

#[test]
fn same_seed_same_record() {
    let a = arch(TINY_MLP);
    let backbone = net(TINY_MLP, 3);
    let task = toy_task(&a, vec![0, 1, 2], 12, 5);
    let x = amp_prune(&backbone, &task, &cfg(0.5)).unwrap();
    let y = amp_prune(&backbone, &task, &cfg(0.5)).unwrap();
    assert_eq!(x.record.scores, y.record.scores);
    assert_eq!(x.retained_history, y.retained_history);
    assert_eq!(x.flops_ledger, y.flops_ledger);
}

#[test]
fn threshold_pass_respects_layer_floor() {
    let a = arch(TINY_MLP);
    let mut scores = vec![0.5; a.num_units()];
    // all of layer 0 below τ, with unit 3 the largest
    for (u, s) in scores.iter_mut().take(12).enumerate() {
        *s = 0.001 * u as f64 % 0.005;
    }
    scores[3] = 0.009;
    scores[14] = 0.0;
    let mut mask = MaskState::from_parts(&a, &scores, &vec![true; a.num_units()]).unwrap();
    assert!(prune_below_threshold(&mut mask, 0.01));
    assert_eq!(mask.layer_retained(0), 1);
    assert!(mask.is_retained(3));
    assert!(!mask.is_retained(14));
    assert_eq!(mask.layer_retained(1), 9);
}

#[test]
fn rejects_bad_configs() {
    let a = arch(TINY_MLP);
    let backbone = net(TINY_MLP, 3);
    let task = toy_task(&a, vec![0, 1, 2], 4, 5);
    let bad = |c: AmpConfig| amp_prune(&backbone, &task, &c).is_err();
    assert!(bad(AmpConfig { threshold: 0.0, ..cfg(0.5) }));
    assert!(bad(AmpConfig { l1_weight: -1.0, ..cfg(0.5) }));
    assert!(bad(AmpConfig { iterations: 0, ..cfg(0.5) }));
    assert!(matches!(
        amp_prune(&backbone, &task, &cfg(1.0)),
        Err(Error::InfeasibleRatio { .. })
    ));
    let two = toy_task(&a, vec![0, 1], 4, 5);
    assert!(matches!(amp_prune(&backbone, &two, &cfg(0.5)), Err(Error::ArchMismatch(_))));
    let free = AmpConfig {
        frozen_weights: false,
        ..cfg(0.5)
    };
    assert!(build_pool_entry(&backbone, &task, &free).is_err());
}
