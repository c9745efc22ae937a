#![allow(dead_code)]

use rand::Rng;
use sda2e_core::numerics::{finite_difference_grad, max_relative_error};
use sda2e_core::rng::child_rng;
use sda2e_core::sda2e::{analytic_gradients, batch_losses, AttentionMode, ParamGroup, Sda2eConfig, Sda2eModel};

pub const EPS: f64 = 1e-5;
pub const FLOOR: f64 = 1e-6;

/// Model with Glorot weights, jittered biases and a random binary batch.
pub fn instance(seed: u64, d: usize, k: usize, b: usize, hidden: Vec<usize>, attention: AttentionMode) -> (Sda2eModel, Vec<Vec<f64>>) {
    let mut cfg = Sda2eConfig::for_dimension(d).with_latent_dim(k);
    cfg.hidden_layers = hidden;
    cfg.attention = attention;
    cfg.seed = seed;
    let mut model = Sda2eModel::new(cfg).unwrap();
    let mut rng = child_rng(seed, 99);
    for p in model.all_params_mut() {
        if p.name.ends_with("bias") || p.value.rows() == 1 || p.value.cols() == 1 {
            for v in p.value.as_mut_slice() {
                *v += rng.gen_range(-0.1..0.1);
            }
        }
    }
    let batch = (0..b)
        .map(|_| (0..d).map(|_| f64::from(rng.gen_bool(0.4) as u8)).collect())
        .collect();
    (model, batch)
}

pub fn check(model: &mut Sda2eModel, batch: &[Vec<f64>]) -> (f64, f64) {
    let refs: Vec<&[f64]> = batch.iter().map(Vec::as_slice).collect();
    let (g_analytic, d_analytic) = analytic_gradients(model, &refs).unwrap();

    let gen = model.flat_params(ParamGroup::Generator);
    let att = model.flat_params(ParamGroup::Attention);
    let mut joint = gen.clone();
    joint.extend(&att);
    let mut probe = model.clone();
    let g_numeric = finite_difference_grad(
        |theta| {
            probe.set_flat_params(ParamGroup::Generator, &theta[..gen.len()])?;
            probe.set_flat_params(ParamGroup::Attention, &theta[gen.len()..])?;
            Ok(batch_losses(&probe, &refs)?.total_g)
        },
        &joint,
        EPS,
    )
    .unwrap();

    let mut probe = model.clone();
    let d_numeric = finite_difference_grad(
        |theta| {
            probe.set_flat_params(ParamGroup::Discriminator, theta)?;
            Ok(batch_losses(&probe, &refs)?.total_d)
        },
        &model.flat_params(ParamGroup::Discriminator),
        EPS,
    )
    .unwrap();

    (
        max_relative_error(&g_analytic, &g_numeric, FLOOR),
        max_relative_error(&d_analytic, &d_numeric, FLOOR),
    )
}
