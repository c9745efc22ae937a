use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::Sda2eConfig;
use super::loss::{accumulate_gradients, indicator_activation, LossBreakdown};
use super::model::{ParamGroup, Sda2eModel};
use crate::data::BinaryDataset;
use crate::numerics::OptimizerState;
use crate::rng::child_rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Batch-averaged losses over the epoch.
    pub losses: LossBreakdown,
    /// Mean per-row reconstruction error over the epoch's batches.
    pub train_mse: f64,
    /// Mean anomaly score on the holdout rows after the epoch.
    pub holdout_mse: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn final_losses(&self) -> Option<&LossBreakdown> {
        self.epochs.last().map(|e| &e.losses)
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: Sda2eModel,
    pub history: TrainHistory,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions<'a> {
    /// Rows scored after every epoch to produce `holdout_mse`.
    pub holdout: Option<&'a [Vec<f64>]>,
}

/// Trains a fresh model on every row of `dataset`.
pub fn train(dataset: &BinaryDataset, config: &Sda2eConfig) -> Result<TrainedModel> {
    train_rows(&dataset.dense_rows(), config, TrainOptions::default())
}

/// Trains a fresh model on dense rows.
pub fn train_rows(rows: &[Vec<f64>], config: &Sda2eConfig, options: TrainOptions<'_>) -> Result<TrainedModel> {
    let mut model = Sda2eModel::new(config.clone())?;
    let history = fit(&mut model, rows, config.epochs, config.seed, options)?;
    Ok(TrainedModel { model, history })
}

/// Runs `epochs` epochs of alternating updates on `model` in place.
///
/// Each mini-batch computes the discriminator, generator and attention
/// gradients from one forward pass, then applies the discriminator step, the
/// generator step and the attention step. Batch order is shuffled per epoch
/// from a stream derived from `seed`. Optimizer moments start fresh.
pub fn fit(
    model: &mut Sda2eModel,
    rows: &[Vec<f64>],
    epochs: usize,
    seed: u64,
    options: TrainOptions<'_>,
) -> Result<TrainHistory> {
    let cfg = model.config.clone();
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != cfg.d) {
        return Err(Error::dim(
            "train",
            format!("rows must have {} features, found {}", cfg.d, bad.len()),
        ));
    }
    let kind = cfg.optimizer;
    let mut opt_d = OptimizerState::new(kind, cfg.lr_discriminator)?;
    let mut opt_g = OptimizerState::new(kind, cfg.lr_generator)?;
    let mut opt_a = OptimizerState::new(kind, cfg.lr_attention)?;

    let mut rng = child_rng(seed, 1);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let mut sum = LossBreakdown::default();
        let mut weight = 0.0;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&[f64]> = chunk.iter().map(|&i| rows[i].as_slice()).collect();
            let diverged = |detail: String| Error::Training {
                epoch,
                batch: batch_idx,
                detail,
            };
            let losses = accumulate_gradients(model, &batch).map_err(|e| diverged(e.to_string()))?;
            if !losses.is_finite() {
                return Err(diverged(format!("non-finite loss {losses:?}")));
            }
            opt_d
                .step(&mut model.params_mut(ParamGroup::Discriminator))
                .map_err(|e| diverged(e.to_string()))?;
            opt_g
                .step(&mut model.params_mut(ParamGroup::Generator))
                .map_err(|e| diverged(e.to_string()))?;
            opt_a
                .step(&mut model.params_mut(ParamGroup::Attention))
                .map_err(|e| diverged(e.to_string()))?;
            let w = batch.len() as f64;
            sum.add_scaled(&losses, w);
            weight += w;
        }
        let mut mean = LossBreakdown::default();
        mean.add_scaled(&sum, 1.0 / weight);
        let holdout_mse = match options.holdout {
            Some(h) if !h.is_empty() => {
                let scores = model.score_rows(h)?;
                Some(scores.iter().sum::<f64>() / scores.len() as f64)
            }
            _ => None,
        };
        history.epochs.push(EpochStats {
            epoch,
            train_mse: mean.recon_g,
            losses: mean,
            holdout_mse,
        });
    }
    model.zero_grad();
    Ok(history)
}

/// Mean indicator activation frequency `P(z_G > 0)` of the generator latents
/// over `rows`, averaged across latent units.
pub fn latent_activation_frequency(model: &Sda2eModel, rows: &[Vec<f64>]) -> Result<f64> {
    let latents = rows
        .iter()
        .map(|x| Ok(model.generator_forward(x)?.z_g))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[f64]> = latents.iter().map(|z| z.as_slice()).collect();
    let per_unit = indicator_activation(&refs);
    Ok(per_unit.iter().sum::<f64>() / per_unit.len().max(1) as f64)
}
