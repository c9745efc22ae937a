use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AttentionMode, Sda2eConfig};
use crate::data::BinaryDataset;
use crate::numerics::{mse, Activation, Dense, Mlp, MlpTrace, ParamTensor};
use crate::rng::child_rng;
use crate::{Error, Result};

/// Encoder/decoder pair. The encoder ends in a ReLU bottleneck and the decoder
/// in a sigmoid output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub encoder: Mlp,
    pub decoder: Mlp,
}

pub(crate) struct AeTrace {
    pub enc: MlpTrace,
    pub dec: MlpTrace,
}

impl AeTrace {
    pub fn latent(&self) -> &[f64] {
        self.enc.output()
    }

    pub fn output(&self) -> &[f64] {
        self.dec.output()
    }
}

impl Autoencoder {
    fn new<R: rand::Rng + ?Sized>(name: &str, d: usize, hidden: &[usize], k: usize, rng: &mut R) -> Result<Self> {
        let mut widths = vec![d];
        widths.extend_from_slice(hidden);
        widths.push(k);

        let mut enc = Vec::new();
        for (i, w) in widths.windows(2).enumerate() {
            enc.push(Dense::glorot(
                &format!("{name}.enc{i}"),
                w[0],
                w[1],
                true,
                Activation::Relu,
                rng,
            ));
        }
        let rev: Vec<usize> = widths.iter().rev().copied().collect();
        let mut dec = Vec::new();
        let last = rev.len() - 2;
        for (i, w) in rev.windows(2).enumerate() {
            let act = if i == last {
                Activation::Sigmoid
            } else {
                Activation::Relu
            };
            dec.push(Dense::glorot(&format!("{name}.dec{i}"), w[0], w[1], true, act, rng));
        }
        Ok(Self {
            encoder: Mlp::new(enc)?,
            decoder: Mlp::new(dec)?,
        })
    }

    pub(crate) fn trace(&self, x: &[f64]) -> Result<AeTrace> {
        let enc = self.encoder.forward(x)?;
        let dec = self.decoder.forward(enc.output())?;
        Ok(AeTrace { enc, dec })
    }

    /// `(latent, reconstruction)`.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let z = self.encoder.predict(x)?;
        let out = self.decoder.predict(&z)?;
        Ok((z, out))
    }

    /// Backpropagates an output gradient plus an extra gradient on the
    /// latent code. Accumulates parameter gradients when `accumulate` is set.
    pub(crate) fn backprop(
        &mut self,
        trace: &AeTrace,
        out_grad: &[f64],
        latent_grad: Option<&[f64]>,
        accumulate: bool,
    ) -> Result<Vec<f64>> {
        let mut gz = if accumulate {
            self.decoder.backward(&trace.dec, out_grad)?
        } else {
            self.decoder.input_grad(&trace.dec, out_grad)?
        };
        if let Some(extra) = latent_grad {
            for (g, e) in gz.iter_mut().zip(extra) {
                *g += e;
            }
        }
        if accumulate {
            self.encoder.backward(&trace.enc, &gz)
        } else {
            self.encoder.input_grad(&trace.enc, &gz)
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &ParamTensor> {
        self.encoder.params().chain(self.decoder.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut ParamTensor> {
        self.encoder.params_mut().chain(self.decoder.params_mut())
    }
}

/// Parameter groups updated by separate optimizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Generator,
    Discriminator,
    Attention,
}

/// All intermediate values of one sample's forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Attention mask `A(x)`.
    pub a: Vec<f64>,
    /// `x ⊙ a`.
    pub x_star: Vec<f64>,
    pub z_g: Vec<f64>,
    /// Generator reconstruction.
    pub x_hat: Vec<f64>,
    /// `A(x̂)`.
    pub a_hat: Vec<f64>,
    /// `x̂ ⊙ â`.
    pub x_hat_star: Vec<f64>,
    pub z_d_real: Vec<f64>,
    pub z_d_fake: Vec<f64>,
    /// `D(x*)`.
    pub d_real: Vec<f64>,
    /// `D(x̂*)`.
    pub d_fake: Vec<f64>,
    pub e_real: f64,
    pub e_fake: f64,
}

/// Output of the generator half of the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorPass {
    pub a: Vec<f64>,
    pub x_star: Vec<f64>,
    pub z_g: Vec<f64>,
    pub x_hat: Vec<f64>,
}

/// Traces kept for the backward pass.
pub(crate) struct SampleTrace {
    pub att_x: MlpTrace,
    pub x_star: Vec<f64>,
    pub gen: AeTrace,
    pub att_xh: MlpTrace,
    pub x_hat_star: Vec<f64>,
    pub d_real: AeTrace,
    pub d_fake: AeTrace,
    pub e_real: f64,
    pub e_fake: f64,
}

impl SampleTrace {
    pub fn a(&self) -> &[f64] {
        self.att_x.output()
    }

    pub fn a_hat(&self) -> &[f64] {
        self.att_xh.output()
    }

    pub fn x_hat(&self) -> &[f64] {
        self.gen.output()
    }

    pub fn to_public(&self) -> ForwardTrace {
        ForwardTrace {
            a: self.a().to_vec(),
            x_star: self.x_star.clone(),
            z_g: self.gen.latent().to_vec(),
            x_hat: self.x_hat().to_vec(),
            a_hat: self.a_hat().to_vec(),
            x_hat_star: self.x_hat_star.clone(),
            z_d_real: self.d_real.latent().to_vec(),
            z_d_fake: self.d_fake.latent().to_vec(),
            d_real: self.d_real.output().to_vec(),
            d_fake: self.d_fake.output().to_vec(),
            e_real: self.e_real,
            e_fake: self.e_fake,
        }
    }
}

pub(crate) fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// The trained (or freshly initialised) parameter sets plus their configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sda2eModel {
    pub config: Sda2eConfig,
    pub attention: Mlp,
    pub generator: Autoencoder,
    pub discriminator: Autoencoder,
}

impl Sda2eModel {
    /// Glorot-initialised model. The initialisation stream is derived from `config.seed`.
    pub fn new(config: Sda2eConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = child_rng(config.seed, 0);
        let d = config.d;
        let attention = match config.attention {
            AttentionMode::Dense => Mlp::new(vec![Dense::glorot(
                "attention",
                d,
                d,
                true,
                Activation::Sigmoid,
                &mut rng,
            )])?,
            AttentionMode::LowRank { rank } => Mlp::new(vec![
                Dense::glorot("attention.v", d, rank, false, Activation::Identity, &mut rng),
                Dense::glorot("attention.u", rank, d, true, Activation::Sigmoid, &mut rng),
            ])?,
        };
        let generator = Autoencoder::new("generator", d, &config.hidden_layers, config.k, &mut rng)?;
        let discriminator =
            Autoencoder::new("discriminator", d, &config.hidden_layers, config.k, &mut rng)?;
        Ok(Self {
            config,
            attention,
            generator,
            discriminator,
        })
    }

    fn check_input(&self, op: &'static str, x: &[f64]) -> Result<()> {
        if x.len() != self.config.d {
            return Err(Error::dim(
                op,
                format!("expected {} features, got {}", self.config.d, x.len()),
            ));
        }
        Ok(())
    }

    /// `σ(Wx + b)` (or `σ(UVᵀx + b)` for the low-rank gate), clamped to (0, 1).
    pub fn attention_mask(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input("attention_mask", x)?;
        self.attention.predict(x)
    }

    pub fn generator_forward(&self, x: &[f64]) -> Result<GeneratorPass> {
        self.check_input("generator_forward", x)?;
        let a = self.attention.predict(x)?;
        let x_star = hadamard(x, &a);
        let (z_g, x_hat) = self.generator.forward(&x_star)?;
        Ok(GeneratorPass {
            a,
            x_star,
            z_g,
            x_hat,
        })
    }

    /// `(‖x − D(x ⊙ A(x))‖², ‖x̂ − D(x̂ ⊙ A(x̂))‖²)`.
    pub fn discriminator_energies(&self, x: &[f64], x_hat: &[f64]) -> Result<(f64, f64)> {
        self.check_input("discriminator_energies", x)?;
        self.check_input("discriminator_energies", x_hat)?;
        let energy = |v: &[f64]| -> Result<f64> {
            let a = self.attention.predict(v)?;
            let (_, rec) = self.discriminator.forward(&hadamard(v, &a))?;
            mse(v, &rec)
        };
        Ok((energy(x)?, energy(x_hat)?))
    }

    pub(crate) fn trace_sample(&self, x: &[f64]) -> Result<SampleTrace> {
        self.check_input("forward", x)?;
        let att_x = self.attention.forward(x)?;
        let x_star = hadamard(x, att_x.output());
        let gen = self.generator.trace(&x_star)?;
        let att_xh = self.attention.forward(gen.output())?;
        let x_hat_star = hadamard(gen.output(), att_xh.output());
        let d_real = self.discriminator.trace(&x_star)?;
        let d_fake = self.discriminator.trace(&x_hat_star)?;
        let e_real = mse(x, d_real.output())?;
        let e_fake = mse(gen.output(), d_fake.output())?;
        Ok(SampleTrace {
            att_x,
            x_star,
            gen,
            att_xh,
            x_hat_star,
            d_real,
            d_fake,
            e_real,
            e_fake,
        })
    }

    /// Full forward pass of one sample.
    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        Ok(self.trace_sample(x)?.to_public())
    }

    /// `‖x − G(x ⊙ A(x))‖²`.
    pub fn anomaly_score(&self, x: &[f64]) -> Result<f64> {
        let pass = self.generator_forward(x)?;
        mse(x, &pass.x_hat)
    }

    /// Scores every row, in dataset order. Rows are scored in parallel.
    pub fn score_all(&self, dataset: &BinaryDataset) -> Result<Vec<f64>> {
        if dataset.d() != self.config.d && !dataset.is_empty() {
            return Err(Error::dim(
                "score_all",
                format!("model expects {} features, dataset has {}", self.config.d, dataset.d()),
            ));
        }
        (0..dataset.len())
            .into_par_iter()
            .map(|i| self.anomaly_score(&dataset.row_f64(i)))
            .collect()
    }

    /// Scores dense rows in order.
    pub fn score_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.par_iter().map(|x| self.anomaly_score(x)).collect()
    }

    pub fn params(&self, group: ParamGroup) -> Vec<&ParamTensor> {
        match group {
            ParamGroup::Generator => self.generator.params().collect(),
            ParamGroup::Discriminator => self.discriminator.params().collect(),
            ParamGroup::Attention => self.attention.params().collect(),
        }
    }

    pub fn params_mut(&mut self, group: ParamGroup) -> Vec<&mut ParamTensor> {
        match group {
            ParamGroup::Generator => self.generator.params_mut().collect(),
            ParamGroup::Discriminator => self.discriminator.params_mut().collect(),
            ParamGroup::Attention => self.attention.params_mut().collect(),
        }
    }

    /// Every parameter tensor, in checkpoint order.
    pub fn all_params(&self) -> Vec<&ParamTensor> {
        let mut v = self.params(ParamGroup::Attention);
        v.extend(self.params(ParamGroup::Generator));
        v.extend(self.params(ParamGroup::Discriminator));
        v
    }

    pub fn all_params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v: Vec<&mut ParamTensor> = self.attention.params_mut().collect();
        v.extend(self.generator.params_mut());
        v.extend(self.discriminator.params_mut());
        v
    }

    pub fn zero_grad(&mut self) {
        for p in self.all_params_mut() {
            p.zero_grad();
        }
    }

    /// Flattened values of a parameter group.
    pub fn flat_params(&self, group: ParamGroup) -> Vec<f64> {
        self.params(group)
            .into_iter()
            .flat_map(|p| p.value.as_slice().iter().copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, group: ParamGroup, values: &[f64]) -> Result<()> {
        let mut params = self.params_mut(group);
        let total: usize = params.iter().map(|p| p.len()).sum();
        if total != values.len() {
            return Err(Error::dim(
                "set_flat_params",
                format!("group holds {total} values, got {}", values.len()),
            ));
        }
        let mut offset = 0;
        for p in params.iter_mut() {
            let n = p.len();
            p.value.as_mut_slice().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Flattened accumulated gradients of a parameter group.
    pub fn flat_grads(&self, group: ParamGroup) -> Vec<f64> {
        self.params(group)
            .into_iter()
            .flat_map(|p| p.grad.as_slice().iter().copied())
            .collect()
    }

    /// Top `limit` active features of `x` ranked by attention weight, as
    /// `(feature index, weight)`; ties broken by ascending index.
    pub fn top_attended_features(&self, x: &[f64], limit: usize) -> Result<Vec<(usize, f64)>> {
        let a = self.attention_mask(x)?;
        let mut active: Vec<(usize, f64)> = x
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, _)| (j, a[j]))
            .collect();
        active.sort_by(|l, r| r.1.total_cmp(&l.1).then(l.0.cmp(&r.0)));
        active.truncate(limit);
        Ok(active)
    }
}
