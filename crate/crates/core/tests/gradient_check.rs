mod common;

use common::{check, instance};
use rand::Rng;
use sda2e_core::rng::child_rng;
use sda2e_core::sda2e::AttentionMode;

#[test]
fn random_small_instances() {
    for seed in 0..10u64 {
        let mut rng = child_rng(seed, 7);
        let d = rng.gen_range(4..=16);
        let k = rng.gen_range(2..=4.min(d - 1));
        let b = rng.gen_range(1..=8);
        let (mut model, batch) = instance(seed, d, k, b, vec![(d + k) / 2], AttentionMode::Dense);
        let (eg, ed) = check(&mut model, &batch);
        println!("seed {seed} d={d} k={k} b={b}: G {eg:.2e} D {ed:.2e}");
        assert!(eg <= 1e-4 && ed <= 1e-4, "seed {seed}: G {eg:e} D {ed:e}");
    }
}

#[test]
fn deeper_stack_and_low_rank_attention() {
    let (mut model, batch) = instance(11, 12, 3, 5, vec![8, 5], AttentionMode::LowRank { rank: 3 });
    let (eg, ed) = check(&mut model, &batch);
    assert!(eg <= 1e-4 && ed <= 1e-4, "G {eg:e} D {ed:e}");
}

#[test]
fn no_hidden_layer() {
    let (mut model, batch) = instance(12, 6, 2, 4, vec![], AttentionMode::Dense);
    let (eg, ed) = check(&mut model, &batch);
    assert!(eg <= 1e-4 && ed <= 1e-4, "G {eg:e} D {ed:e}");
}


