use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::eval::{classification_report, confusion_matrix};
use crate::nn::{
    accumulate_l2, adam_step, l2_penalty, mlp_backward, mlp_forward, softmax_rows, AdamState,
    Matrix, MlpParams, Parameters,
};
use crate::prm::PseudoLabeledDataset;
use crate::rng::{stream, Stream};

use super::loss::{adversarial_log_likelihood, adversarial_output_grads, class_loss_and_logit_grad};
use super::{AsslConfig, AsslError, AsslModel};

/// Endless shuffled index stream over `0..n`.
///
/// [`BatchCycler::take`] reshuffles whenever the current permutation runs
/// out, so a small pool cycles through a large one.
#[derive(Debug, Clone)]
pub struct BatchCycler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl BatchCycler {
    pub fn new(n: usize, rng: ChaCha8Rng) -> Self {
        Self {
            order: (0..n).collect(),
            pos: n,
            rng,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Indices left before the next reshuffle.
    pub fn remaining(&self) -> usize {
        self.order.len() - self.pos
    }

    pub fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.pos = 0;
    }

    pub fn take(&mut self, k: usize) -> Vec<usize> {
        assert!(!self.order.is_empty() || k == 0, "take from an empty cycler");
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.pos == self.order.len() {
                self.reshuffle();
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

fn rows_range(m: &Matrix, start: usize, end: usize) -> Matrix {
    m.select_rows(&(start..end).collect::<Vec<_>>())
}

fn column(m: &Matrix) -> Vec<f64> {
    m.iter_rows().map(|r| r[0]).collect()
}

fn check_batch(x: &Matrix, labels: Option<&[usize]>, what: &str) -> Result<(), AsslError> {
    if x.rows() == 0 {
        return Err(AsslError::Empty(what.into()));
    }
    if let Some(y) = labels {
        if y.len() != x.rows() {
            return Err(AsslError::Shape(format!(
                "{what}: {} rows but {} labels",
                x.rows(),
                y.len()
            )));
        }
    }
    Ok(())
}

/// Discriminator objective on one batch pair, evaluated before its update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscriminatorStats {
    /// `−(mean log D(e_l) + mean log(1 − D(e_u))) + λ_adv‖Δ_adv‖²`, the value
    /// the discriminator descends.
    pub objective: f64,
    /// The adversarial loss `mean log D(e_l) + mean log(1 − D(e_u)) + λ_adv‖Δ_adv‖²`.
    pub adversarial: f64,
    /// Fraction of rows on the correct side of 0.5 (labeled ⇔ `D ≥ 0.5`).
    pub accuracy: f64,
}

/// Discriminator objective and its gradient with respect to the
/// discriminator only; the encoder is treated as a constant.
pub fn discriminator_loss_and_grad(
    model: &AsslModel,
    labeled: &Matrix,
    pseudo: &Matrix,
    cfg: &AsslConfig,
) -> Result<(DiscriminatorStats, MlpParams), AsslError> {
    check_batch(labeled, None, "labeled batch")?;
    check_batch(pseudo, None, "pseudo-labeled batch")?;
    let nl = labeled.rows();
    let e = model.encoder.predict(&labeled.vstack(pseudo)?)?;
    let (d, cache) = mlp_forward(&model.discriminator, &e)?;
    let d = column(&d);
    let (dl, du) = d.split_at(nl);
    let ll = adversarial_log_likelihood(dl, du)?;
    let (gl, gu) = adversarial_output_grads(dl, du);
    let upstream = Matrix::from_vec(d.len(), 1, gl.iter().chain(&gu).map(|g| -g).collect())?;
    let (mut grads, _) = mlp_backward(&model.discriminator, &cache, &upstream)?;
    let penalty = accumulate_l2(&mut grads, &model.discriminator, cfg.lambda_adv)?;
    let correct = dl.iter().filter(|&&v| v >= 0.5).count() + du.iter().filter(|&&v| v < 0.5).count();
    Ok((
        DiscriminatorStats {
            objective: -ll + penalty,
            adversarial: ll + penalty,
            accuracy: correct as f64 / d.len() as f64,
        },
        grads,
    ))
}

/// The terms of the generator objective on one batch pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorLosses {
    /// Supervised loss including `λ_L‖Δ_L‖²`.
    pub supervised: f64,
    /// Semi-supervised loss including `λ_U‖Δ_U‖²`; 0 without a pseudo batch.
    pub semi: f64,
    /// Adversarial loss including `λ_adv‖Δ_adv‖²`; 0 when not part of the objective.
    pub adversarial: f64,
    /// Encoder weight decay.
    pub encoder_penalty: f64,
    /// `supervised + semi + α·adversarial + encoder_penalty`.
    pub total: f64,
}

/// Gradients for the three networks the generator step updates.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorGrads {
    pub encoder: MlpParams,
    pub supervised_head: MlpParams,
    pub semi_head: MlpParams,
}

impl GeneratorGrads {
    /// Encoder, supervised head, semi head, matching
    /// [`AsslModel::generator_flat`].
    pub fn flat(&self) -> Vec<f64> {
        [self.encoder.flat(), self.supervised_head.flat(), self.semi_head.flat()].concat()
    }
}

/// Generator objective and its gradient with respect to the encoder and both
/// heads, with the discriminator frozen.
///
/// `pseudo` is `None` when pseudo batches are suppressed; the semi head then
/// gets a zero gradient and the adversarial term is absent. The semi head
/// also gets a zero gradient when `cfg.semi_loss` is off.
pub fn generator_loss_and_grads(
    model: &AsslModel,
    labeled: (&Matrix, &[usize]),
    pseudo: Option<(&Matrix, &[usize])>,
    cfg: &AsslConfig,
) -> Result<(GeneratorLosses, GeneratorGrads), AsslError> {
    let (xl, yl) = labeled;
    check_batch(xl, Some(yl), "labeled batch")?;
    if let Some((xu, yu)) = pseudo {
        check_batch(xu, Some(yu), "pseudo-labeled batch")?;
    }
    let nl = xl.rows();
    let x = match pseudo {
        Some((xu, _)) => xl.vstack(xu)?,
        None => xl.clone(),
    };
    let (e, enc_cache) = mlp_forward(&model.encoder, &x)?;
    let n = e.rows();
    let el = if pseudo.is_some() { rows_range(&e, 0, nl) } else { e.clone() };

    let (logits_l, sup_cache) = mlp_forward(&model.supervised_head, &el)?;
    let (data_l, gz_l) = class_loss_and_logit_grad(cfg.loss, &softmax_rows(&logits_l), yl)?;
    let (mut g_sup, de_l) = mlp_backward(&model.supervised_head, &sup_cache, &gz_l)?;
    let supervised = data_l + accumulate_l2(&mut g_sup, &model.supervised_head, cfg.lambda_l)?;

    let mut semi = 0.0;
    let mut adversarial = 0.0;
    let mut g_semi = model.semi_head.zeros_like();
    let mut de = de_l;
    if let Some((_, yu)) = pseudo {
        let eu = rows_range(&e, nl, n);
        let de_u = if cfg.semi_loss {
            let (logits_u, semi_cache) = mlp_forward(&model.semi_head, &eu)?;
            let (data_u, gz_u) = class_loss_and_logit_grad(cfg.loss, &softmax_rows(&logits_u), yu)?;
            let (g, de_u) = mlp_backward(&model.semi_head, &semi_cache, &gz_u)?;
            g_semi = g;
            semi = data_u + accumulate_l2(&mut g_semi, &model.semi_head, cfg.lambda_u)?;
            de_u
        } else {
            Matrix::zeros(eu.rows(), eu.cols())
        };
        de = de.vstack(&de_u)?;

        if cfg.use_discriminator && cfg.alpha != 0.0 {
            let (d, disc_cache) = mlp_forward(&model.discriminator, &e)?;
            let d = column(&d);
            let (dl, du) = d.split_at(nl);
            let ll = adversarial_log_likelihood(dl, du)?;
            adversarial = ll + l2_penalty(&model.discriminator, cfg.lambda_adv)?.0;
            let (gl, gu) = adversarial_output_grads(dl, du);
            let upstream =
                Matrix::from_vec(n, 1, gl.iter().chain(&gu).map(|g| cfg.alpha * g).collect())?;
            let (_, de_adv) = mlp_backward(&model.discriminator, &disc_cache, &upstream)?;
            de.add_assign(&de_adv)?;
        }
    }

    let (mut g_enc, _) = mlp_backward(&model.encoder, &enc_cache, &de)?;
    let encoder_penalty = accumulate_l2(&mut g_enc, &model.encoder, cfg.encoder_decay)?;
    let total = supervised + semi + cfg.alpha * adversarial + encoder_penalty;
    Ok((
        GeneratorLosses {
            supervised,
            semi,
            adversarial,
            encoder_penalty,
            total,
        },
        GeneratorGrads {
            encoder: g_enc,
            supervised_head: g_sup,
            semi_head: g_semi,
        },
    ))
}

/// A model together with its optimizer state.
#[derive(Debug, Clone)]
pub struct AsslTrainer {
    pub model: AsslModel,
    cfg: AsslConfig,
    opt_encoder: AdamState,
    opt_supervised: AdamState,
    opt_semi: AdamState,
    opt_disc: AdamState,
}

impl AsslTrainer {
    pub fn new(model: AsslModel, cfg: &AsslConfig) -> Result<Self, AsslError> {
        cfg.validate()?;
        let lr = cfg.learning_rate;
        Ok(Self {
            opt_encoder: AdamState::new(model.encoder.num_params(), lr),
            opt_supervised: AdamState::new(model.supervised_head.num_params(), lr),
            opt_semi: AdamState::new(model.semi_head.num_params(), lr),
            opt_disc: AdamState::new(model.discriminator.num_params(), cfg.disc_learning_rate),
            model,
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &AsslConfig {
        &self.cfg
    }

    /// One Adam step on the discriminator, descending the negated adversarial
    /// log-likelihood. The encoder is left untouched.
    pub fn discriminator_step(&mut self, labeled: &Matrix, pseudo: &Matrix) -> Result<DiscriminatorStats, AsslError> {
        let (stats, grads) = discriminator_loss_and_grad(&self.model, labeled, pseudo, &self.cfg)?;
        adam_step(&mut self.model.discriminator, &grads, &mut self.opt_disc)?;
        Ok(stats)
    }

    /// One Adam step on encoder and heads, descending the generator objective
    /// with the discriminator frozen. Without a pseudo batch the semi head is
    /// not stepped.
    pub fn generator_step(
        &mut self,
        labeled: (&Matrix, &[usize]),
        pseudo: Option<(&Matrix, &[usize])>,
    ) -> Result<GeneratorLosses, AsslError> {
        let (losses, grads) = generator_loss_and_grads(&self.model, labeled, pseudo, &self.cfg)?;
        adam_step(&mut self.model.encoder, &grads.encoder, &mut self.opt_encoder)?;
        adam_step(&mut self.model.supervised_head, &grads.supervised_head, &mut self.opt_supervised)?;
        if pseudo.is_some() && self.cfg.semi_loss {
            adam_step(&mut self.model.semi_head, &grads.semi_head, &mut self.opt_semi)?;
        }
        Ok(losses)
    }
}

/// Per-epoch means over that epoch's steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_l: f64,
    pub loss_u: f64,
    pub loss_adv: f64,
    pub disc_acc: f64,
    pub val_macro_f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,L_L,L_U,L_adv,disc_acc,val_macro_f1\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.epoch, r.loss_l, r.loss_u, r.loss_adv, r.disc_acc, r.val_macro_f1
            );
        }
        s
    }

    /// Discriminator accuracy averaged over the last `k` epochs.
    pub fn tail_disc_acc(&self, k: usize) -> f64 {
        let tail = &self.records[self.records.len().saturating_sub(k)..];
        tail.iter().map(|r| r.disc_acc).sum::<f64>() / tail.len().max(1) as f64
    }
}

fn finite(term: &'static str, v: f64, epoch: usize, step: usize) -> Result<f64, AsslError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(AsslError::NonFinite { term, epoch, step })
    }
}

fn macro_f1(model: &AsslModel, validation: &Dataset, cfg: &AsslConfig) -> Result<f64, AsslError> {
    let truth = validation.require_labels("validation set")?;
    let pred = model.predict_labels(validation.rows(), cfg.inference_head)?;
    let cm = confusion_matrix(truth, &pred, model.num_classes())?;
    Ok(classification_report(&cm)?.macro_f1)
}

/// Phase II training; see [`train_observed`].
pub fn train(
    labeled: &Dataset,
    pseudo: &PseudoLabeledDataset,
    validation: &Dataset,
    cfg: &AsslConfig,
) -> Result<(AsslModel, TrainHistory), AsslError> {
    train_observed(labeled, pseudo, validation, cfg, |_, _| {})
}

/// Phase II training from a seeded initialization.
///
/// Each step draws a labeled batch and an equally sized pseudo-labeled batch,
/// then runs `disc_steps` discriminator updates and one generator update.
/// An epoch is one pass over the labeled pool, reshuffled at its start; the
/// pseudo-labeled pool is drawn from a cycler that reshuffles whenever it
/// runs out, so it carries over between epochs. After each epoch the model is
/// scored by validation macro-F1 and the best snapshot (earliest on ties) is
/// returned.
///
/// `observe` is called after every step with the global step index and the
/// current model.
pub fn train_observed<F>(
    labeled: &Dataset,
    pseudo: &PseudoLabeledDataset,
    validation: &Dataset,
    cfg: &AsslConfig,
    mut observe: F,
) -> Result<(AsslModel, TrainHistory), AsslError>
where
    F: FnMut(usize, &AsslModel),
{
    cfg.validate()?;
    if labeled.is_empty() {
        return Err(AsslError::Empty("labeled training set".into()));
    }
    if cfg.use_pseudo && pseudo.is_empty() {
        return Err(AsslError::Empty("pseudo-labeled set".into()));
    }
    if validation.is_empty() {
        return Err(AsslError::Empty("validation set".into()));
    }
    let yl_all = labeled.require_labels("labeled training set")?;
    validation.require_labels("validation set")?;
    let f = labeled.rows().cols();
    let m = labeled.num_classes();
    if pseudo.rows().cols() != f || validation.rows().cols() != f {
        return Err(AsslError::Shape(format!(
            "feature counts differ: labeled {f}, pseudo {}, validation {}",
            pseudo.rows().cols(),
            validation.rows().cols()
        )));
    }

    let model = AsslModel::init(f, m, cfg)?;
    let mut trainer = AsslTrainer::new(model, cfg)?;
    let mut lab = BatchCycler::new(labeled.len(), stream(cfg.seed, Stream::LabeledBatches));
    let mut pse = BatchCycler::new(pseudo.len(), stream(cfg.seed, Stream::PseudoBatches));

    let mut history = TrainHistory::default();
    let mut best: Option<(f64, AsslModel)> = None;
    let mut global = 0;
    for epoch in 1..=cfg.epochs {
        lab.reshuffle();
        let (mut sl, mut su, mut sa, mut sd) = (0.0, 0.0, 0.0, 0.0);
        let mut steps = 0usize;
        loop {
            let k = lab.remaining().min(cfg.batch_size);
            if k == 0 {
                break;
            }
            steps += 1;
            let il = lab.take(k);
            let xl = labeled.rows().select_rows(&il);
            let yl: Vec<usize> = il.iter().map(|&i| yl_all[i]).collect();
            let pb = if cfg.use_pseudo {
                let iu = pse.take(k);
                let xu = pseudo.rows().select_rows(&iu);
                let yu: Vec<usize> = iu.iter().map(|&i| pseudo.labels()[i]).collect();
                Some((xu, yu))
            } else {
                None
            };

            if let (Some((xu, _)), true) = (&pb, cfg.adversarial_active()) {
                let mut last = None;
                for _ in 0..cfg.disc_steps {
                    last = Some(trainer.discriminator_step(&xl, xu)?);
                }
                let stats = last.expect("disc_steps >= 1");
                sa += finite("adversarial loss", stats.adversarial, epoch, steps)?;
                sd += stats.accuracy;
            }
            let losses = trainer.generator_step(
                (&xl, &yl),
                pb.as_ref().map(|(x, y)| (x, y.as_slice())),
            )?;
            sl += finite("supervised loss", losses.supervised, epoch, steps)?;
            su += finite("semi-supervised loss", losses.semi, epoch, steps)?;
            finite("combined loss", losses.total, epoch, steps)?;
            observe(global, &trainer.model);
            global += 1;
        }
        let n = steps as f64;
        let val = macro_f1(&trainer.model, validation, cfg)?;
        history.records.push(EpochRecord {
            epoch,
            loss_l: sl / n,
            loss_u: su / n,
            loss_adv: sa / n,
            disc_acc: sd / n,
            val_macro_f1: val,
        });
        log::debug!("epoch {epoch}: L_L {:.5} val macro-F1 {val:.5}", sl / n);
        if best.as_ref().is_none_or(|(b, _)| val > *b) {
            best = Some((val, trainer.model.clone()));
            history.best_epoch = epoch;
        }
    }
    let (_, model) = best.expect("at least one epoch");
    Ok((model, history))
}
