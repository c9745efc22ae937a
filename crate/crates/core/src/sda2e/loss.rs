//! Loss families and their gradients.
//!
//! For a batch of `B` samples:
//!
//! - `recon_G = (1/B) Σ ‖x − x̂‖²`
//! - `adv_G = (1/B) Σ E_fake`
//! - `sparse_G = Σ_j KL(ρ̂_G,j ‖ ρ)`
//! - `attn = (λ/B) Σ ‖a‖₁`
//! - `adv_D = (1/B) Σ (E_real + max(0, m − E_fake))`
//! - `sparse_D = Σ_j KL(ρ̂_D,j ‖ ρ)`, with `ρ̂_D` pooled over the real and fake passes
//!
//! `total_G = recon_G + α adv_G + β sparse_G + γ attn` and
//! `total_D = adv_D + δ sparse_D`.

use serde::{Deserialize, Serialize};

use super::model::{hadamard, ParamGroup, SampleTrace, Sda2eModel};
use crate::{Error, Result};

/// Clamp applied to empirical activation frequencies.
pub const RHO_HAT_FLOOR: f64 = 1e-4;
pub const RHO_HAT_CEIL: f64 = 1.0 - 1e-4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon_g: f64,
    pub adv_g: f64,
    pub sparse_g: f64,
    pub attn: f64,
    pub total_g: f64,
    pub adv_d: f64,
    pub sparse_d: f64,
    pub total_d: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [
            self.recon_g,
            self.adv_g,
            self.sparse_g,
            self.attn,
            self.total_g,
            self.adv_d,
            self.sparse_d,
            self.total_d,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    pub(crate) fn add_scaled(&mut self, other: &LossBreakdown, w: f64) {
        self.recon_g += w * other.recon_g;
        self.adv_g += w * other.adv_g;
        self.sparse_g += w * other.sparse_g;
        self.attn += w * other.attn;
        self.total_g += w * other.total_g;
        self.adv_d += w * other.adv_d;
        self.sparse_d += w * other.sparse_d;
        self.total_d += w * other.total_d;
    }
}

/// Empirical activation frequencies of the generator and discriminator latents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityStats {
    pub rho_hat_g: Vec<f64>,
    pub rho_hat_d: Vec<f64>,
}

/// `Σ_j ρ̂_j ln(ρ̂_j/ρ) + (1−ρ̂_j) ln((1−ρ̂_j)/(1−ρ))`.
pub fn kl_sparsity(rho_hat: &[f64], rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("rho must lie in (0, 1), got {rho}")));
    }
    let mut total = 0.0;
    for &r in rho_hat {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "activation frequency must lie in (0, 1), got {r}"
            )));
        }
        total += r * (r / rho).ln() + (1.0 - r) * ((1.0 - r) / (1.0 - rho)).ln();
    }
    Ok(total)
}

/// `d KL(ρ̂ ‖ ρ) / dρ̂`.
fn kl_derivative(r: f64, rho: f64) -> f64 {
    (r / rho).ln() - ((1.0 - r) / (1.0 - rho)).ln()
}

#[inline]
fn surrogate(z: f64, c: f64) -> f64 {
    1.0 - (-z / c).exp()
}

#[inline]
fn surrogate_derivative(z: f64, c: f64) -> f64 {
    (-z / c).exp() / c
}

fn unclamped_activation(z_batch: &[&[f64]], c: f64) -> Result<Vec<f64>> {
    let Some(first) = z_batch.first() else {
        return Err(Error::InvalidArgument("activation frequency of an empty batch".into()));
    };
    let k = first.len();
    let mut acc = vec![0.0; k];
    for z in z_batch {
        if z.len() != k {
            return Err(Error::dim("empirical_activation", "ragged latent batch"));
        }
        for (a, &v) in acc.iter_mut().zip(z.iter()) {
            if v < 0.0 {
                return Err(Error::InvalidArgument(format!("negative latent activation {v}")));
            }
            *a += surrogate(v, c);
        }
    }
    let n = z_batch.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Smooth activation frequency `ρ̂_j = (1/B) Σ_i (1 − exp(−z_ij / c))`, clamped
/// to `[1e−4, 1 − 1e−4]`. Tends to the indicator frequency as `c → 0`.
pub fn empirical_activation(z_batch: &[&[f64]], c: f64) -> Result<Vec<f64>> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("sharpness must be positive, got {c}")));
    }
    Ok(unclamped_activation(z_batch, c)?
        .into_iter()
        .map(|r| r.clamp(RHO_HAT_FLOOR, RHO_HAT_CEIL))
        .collect())
}

/// Exact frequency of `z_ij > 0` per latent unit.
pub fn indicator_activation(z_batch: &[&[f64]]) -> Vec<f64> {
    let k = z_batch.first().map_or(0, |z| z.len());
    let mut acc = vec![0.0; k];
    for z in z_batch {
        for (a, &v) in acc.iter_mut().zip(z.iter()) {
            if v > 0.0 {
                *a += 1.0;
            }
        }
    }
    let n = z_batch.len().max(1) as f64;
    acc.into_iter().map(|a| a / n).collect()
}

/// Per-unit `dL/dz` factor: `weight · KL'(ρ̂_j) / N` where `ρ̂_j` is unclamped;
/// zero where the clamp is active.
fn kl_latent_scale(raw: &[f64], rho: f64, weight: f64, n: usize) -> Vec<f64> {
    raw.iter()
        .map(|&r| {
            if (RHO_HAT_FLOOR..=RHO_HAT_CEIL).contains(&r) && weight != 0.0 {
                weight * kl_derivative(r, rho) / n as f64
            } else {
                0.0
            }
        })
        .collect()
}

fn check_batch(model: &Sda2eModel, batch: &[&[f64]]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    for x in batch {
        if x.len() != model.config.d {
            return Err(Error::dim(
                "batch",
                format!("expected {} features, got {}", model.config.d, x.len()),
            ));
        }
    }
    Ok(())
}

struct BatchEval {
    traces: Vec<SampleTrace>,
    losses: LossBreakdown,
    raw_rho_g: Vec<f64>,
    raw_rho_d: Vec<f64>,
}

fn evaluate(model: &Sda2eModel, batch: &[&[f64]]) -> Result<BatchEval> {
    check_batch(model, batch)?;
    let cfg = &model.config;
    let traces = batch
        .iter()
        .map(|x| model.trace_sample(x))
        .collect::<Result<Vec<_>>>()?;
    let b = batch.len() as f64;

    let mut recon = 0.0;
    let mut adv_g = 0.0;
    let mut adv_d = 0.0;
    let mut attn_l1 = 0.0;
    for (x, t) in batch.iter().zip(&traces) {
        recon += crate::numerics::mse(x, t.x_hat())?;
        adv_g += t.e_fake;
        adv_d += t.e_real + (cfg.margin - t.e_fake).max(0.0);
        attn_l1 += t.a().iter().map(|v| v.abs()).sum::<f64>();
    }

    let z_g: Vec<&[f64]> = traces.iter().map(|t| t.gen.latent()).collect();
    let z_d: Vec<&[f64]> = traces
        .iter()
        .map(|t| t.d_real.latent())
        .chain(traces.iter().map(|t| t.d_fake.latent()))
        .collect();
    let c = cfg.sparsity_sharpness;
    let raw_rho_g = unclamped_activation(&z_g, c)?;
    let raw_rho_d = unclamped_activation(&z_d, c)?;
    let clamp = |v: &[f64]| -> Vec<f64> {
        v.iter().map(|r| r.clamp(RHO_HAT_FLOOR, RHO_HAT_CEIL)).collect()
    };
    let sparse_g = kl_sparsity(&clamp(&raw_rho_g), cfg.rho)?;
    let sparse_d = kl_sparsity(&clamp(&raw_rho_d), cfg.rho)?;

    let recon_g = recon / b;
    let adv_g = adv_g / b;
    let attn = cfg.lambda * attn_l1 / b;
    let adv_d = adv_d / b;
    let losses = LossBreakdown {
        recon_g,
        adv_g,
        sparse_g,
        attn,
        total_g: recon_g + cfg.alpha * adv_g + cfg.beta * sparse_g + cfg.gamma * attn,
        adv_d,
        sparse_d,
        total_d: adv_d + cfg.delta * sparse_d,
    };
    Ok(BatchEval {
        traces,
        losses,
        raw_rho_g,
        raw_rho_d,
    })
}

/// All loss terms on `batch` at the current parameters.
pub fn batch_losses(model: &Sda2eModel, batch: &[&[f64]]) -> Result<LossBreakdown> {
    Ok(evaluate(model, batch)?.losses)
}

/// Generator-side loss terms (`recon_g`, `adv_g`, `sparse_g`, `attn`, `total_g`).
pub fn generator_loss(model: &Sda2eModel, batch: &[&[f64]]) -> Result<LossBreakdown> {
    let l = batch_losses(model, batch)?;
    Ok(LossBreakdown {
        adv_d: 0.0,
        sparse_d: 0.0,
        total_d: 0.0,
        ..l
    })
}

/// Discriminator-side loss terms (`adv_d`, `sparse_d`, `total_d`).
pub fn discriminator_loss(model: &Sda2eModel, batch: &[&[f64]]) -> Result<LossBreakdown> {
    let l = batch_losses(model, batch)?;
    Ok(LossBreakdown {
        adv_d: l.adv_d,
        sparse_d: l.sparse_d,
        total_d: l.total_d,
        ..LossBreakdown::default()
    })
}

/// Sparsity statistics (clamped surrogate frequencies) on `batch`.
pub fn sparsity_stats(model: &Sda2eModel, batch: &[&[f64]]) -> Result<SparsityStats> {
    let e = evaluate(model, batch)?;
    let clamp = |v: Vec<f64>| v.into_iter().map(|r| r.clamp(RHO_HAT_FLOOR, RHO_HAT_CEIL)).collect();
    Ok(SparsityStats {
        rho_hat_g: clamp(e.raw_rho_g),
        rho_hat_d: clamp(e.raw_rho_d),
    })
}

/// Zeroes every gradient, then accumulates
/// `∇_{θ_G, θ_A} total_G` and `∇_{θ_D} total_D` from one shared forward pass.
pub fn accumulate_gradients(model: &mut Sda2eModel, batch: &[&[f64]]) -> Result<LossBreakdown> {
    let eval = evaluate(model, batch)?;
    model.zero_grad();
    let cfg = model.config.clone();
    let b = batch.len() as f64;

    let kl_g = kl_latent_scale(&eval.raw_rho_g, cfg.rho, cfg.beta, batch.len());
    let kl_d = kl_latent_scale(&eval.raw_rho_d, cfg.rho, cfg.delta, 2 * batch.len());
    let c = cfg.sparsity_sharpness;
    let latent_grad = |scale: &[f64], z: &[f64]| -> Vec<f64> {
        scale
            .iter()
            .zip(z)
            .map(|(s, &zv)| if *s == 0.0 { 0.0 } else { s * surrogate_derivative(zv, c) })
            .collect()
    };

    for (x, t) in batch.iter().zip(&eval.traces) {
        let x_hat = t.x_hat();

        // Discriminator: real and fake passes (G and A held fixed).
        let up_real: Vec<f64> = x
            .iter()
            .zip(t.d_real.output())
            .map(|(xv, rv)| -2.0 * (xv - rv) / b)
            .collect();
        let lat_real = latent_grad(&kl_d, t.d_real.latent());
        model.discriminator.backprop(&t.d_real, &up_real, Some(&lat_real), true)?;

        let hinge_active = t.e_fake < cfg.margin;
        let up_fake: Vec<f64> = x_hat
            .iter()
            .zip(t.d_fake.output())
            .map(|(xv, rv)| if hinge_active { 2.0 * (xv - rv) / b } else { 0.0 })
            .collect();
        let lat_fake = latent_grad(&kl_d, t.d_fake.latent());
        model.discriminator.backprop(&t.d_fake, &up_fake, Some(&lat_fake), true)?;

        // Generator and attention (D held fixed).
        let mut up_xh: Vec<f64> = x
            .iter()
            .zip(x_hat)
            .map(|(xv, hv)| -2.0 * (xv - hv) / b)
            .collect();
        if cfg.alpha != 0.0 {
            let w = cfg.alpha / b;
            let resid: Vec<f64> = x_hat
                .iter()
                .zip(t.d_fake.output())
                .map(|(hv, rv)| hv - rv)
                .collect();
            let up_out: Vec<f64> = resid.iter().map(|r| -2.0 * w * r).collect();
            let g_xhs = model.discriminator.backprop(&t.d_fake, &up_out, None, false)?;
            let g_ahat = hadamard(&g_xhs, x_hat);
            let g_xh_att = model.attention.backward(&t.att_xh, &g_ahat)?;
            for j in 0..up_xh.len() {
                up_xh[j] += 2.0 * w * resid[j] + g_xhs[j] * t.a_hat()[j] + g_xh_att[j];
            }
        }
        let lat_g = latent_grad(&kl_g, t.gen.latent());
        let g_xs = model.generator.backprop(&t.gen, &up_xh, Some(&lat_g), true)?;

        let l1 = cfg.gamma * cfg.lambda / b;
        let up_a: Vec<f64> = g_xs.iter().zip(x.iter()).map(|(g, xv)| g * xv + l1).collect();
        model.attention.backward(&t.att_x, &up_a)?;
    }
    Ok(eval.losses)
}

/// Gradient vectors for the gradient check: `∇ total_G` over generator then
/// attention parameters, and `∇ total_D` over discriminator parameters.
pub fn analytic_gradients(model: &mut Sda2eModel, batch: &[&[f64]]) -> Result<(Vec<f64>, Vec<f64>)> {
    accumulate_gradients(model, batch)?;
    let mut g = model.flat_grads(ParamGroup::Generator);
    g.extend(model.flat_grads(ParamGroup::Attention));
    Ok((g, model.flat_grads(ParamGroup::Discriminator)))
}
