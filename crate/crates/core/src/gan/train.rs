use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{GanConfig, StopStatistic};
use super::model::{GanModel, Phase};
use crate::autodiff::{
    adam_step, critic_loss, forward_with_masks, generator_loss, DropoutMasks, Tensor,
};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based critic step.
    pub step: usize,
    pub loss_d: f64,
    /// Set on the critic step that precedes a generator step.
    pub loss_g: Option<f64>,
    pub wasserstein: f64,
    pub gp: f64,
    /// Smoothed stop statistic after this step.
    pub ema: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Criterion,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<StepRecord>,
    pub stop_reason: StopReason,
    pub steps_to_stop: usize,
}

impl TrainTrace {
    pub fn stopped_on_criterion(&self) -> bool {
        self.stop_reason == StopReason::Criterion
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss_d,loss_g,wasserstein,gp\n");
        for r in &self.records {
            let g = r.loss_g.map(|g| g.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{}\n", r.step, r.loss_d, g, r.wasserstein, r.gp));
        }
        out
    }
}

/// Moving-average stop test on the Wasserstein estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct StopRule {
    statistic: StopStatistic,
    decay: f64,
    delta: f64,
    window: usize,
    ema: f64,
    below: usize,
}

impl StopRule {
    pub fn new(cfg: &GanConfig) -> Self {
        Self {
            statistic: cfg.stop_statistic,
            decay: cfg.ema_decay,
            delta: cfg.stop_delta,
            window: cfg.stop_window,
            ema: cfg.ema_init,
            below: 0,
        }
    }

    /// Feed one estimate; true once the statistic has stayed at or under
    /// `delta` for `window` consecutive updates.
    pub fn update(&mut self, w: f64) -> bool {
        let x = match self.statistic {
            StopStatistic::EmaOfAbs => w.abs(),
            StopStatistic::AbsOfEma => w,
        };
        self.ema = self.decay * self.ema + (1.0 - self.decay) * x;
        if self.value() <= self.delta {
            self.below += 1;
        } else {
            self.below = 0;
        }
        self.below >= self.window.max(1)
    }

    pub fn value(&self) -> f64 {
        self.ema.abs()
    }
}

/// Reshuffled pass over the rows, one epoch at a time.
struct Batches {
    order: Vec<usize>,
    pos: usize,
}

impl Batches {
    fn new(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
            pos: n,
        }
    }

    fn next(&mut self, data: &Dataset, size: usize, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        if self.pos >= self.order.len() {
            self.order.shuffle(rng);
            self.pos = 0;
        }
        let end = (self.pos + size).min(self.order.len());
        let mut values = Vec::with_capacity((end - self.pos) * data.width);
        for &r in &self.order[self.pos..end] {
            values.extend_from_slice(data.row(r));
        }
        let rows = end - self.pos;
        self.pos = end;
        Tensor::new(vec![rows, data.width], values)
    }
}

pub(crate) fn noise(rows: usize, dim: usize, rng: &mut impl Rng) -> Result<Tensor> {
    let data = (0..rows * dim).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::new(vec![rows, dim], data)
}

/// Generator output for `z` (the generator has no dropout).
pub(crate) fn generate(model: &GanModel, z: &Tensor) -> Result<Tensor> {
    let g = &model.generator;
    Ok(forward_with_masks(&g.spec, &g.params, z, &DropoutMasks::none())?.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticStep {
    pub loss_d: f64,
    pub wasserstein: f64,
    pub gp: f64,
}

/// One critic update on `real`; returns the loss before the update.
pub fn critic_step(
    model: &mut GanModel,
    real: &Tensor,
    cfg: &GanConfig,
    rng: &mut ChaCha8Rng,
) -> Result<CriticStep> {
    if real.row_width() != model.feature_dim || real.rows() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "real batch {:?} for feature width {}",
            real.shape(),
            model.feature_dim
        )));
    }
    let b = real.rows();
    let z = noise(b, model.noise_dim, rng)?;
    let fake = generate(model, &z)?;
    let eps: Vec<f64> = (0..b).map(|_| rng.random::<f64>()).collect();
    let d = &mut model.critic;
    let masks = DropoutMasks::sample(&d.spec, b, rng.random())?;
    let out = critic_loss(&d.spec, &d.params, real, &fake, &eps, cfg.lambda, &masks)?;
    adam_step(&mut d.params, &out.grads, &mut d.adam)?;
    Ok(CriticStep {
        loss_d: out.loss,
        wasserstein: out.wasserstein,
        gp: out.penalty,
    })
}

/// One generator update against the current critic; returns the loss
/// before the update.
pub fn generator_step(model: &mut GanModel, cfg: &GanConfig, rng: &mut ChaCha8Rng) -> Result<f64> {
    let z = noise(cfg.batch_size, model.noise_dim, rng)?;
    let d = &model.critic;
    let masks = DropoutMasks::sample(&d.spec, cfg.batch_size, rng.random())?;
    let g = &mut model.generator;
    let (loss, grads) = generator_loss(&g.spec, &g.params, &d.spec, &d.params, &z, &masks)?;
    adam_step(&mut g.params, &grads, &mut g.adam)?;
    Ok(loss)
}

/// Alternate `critic_steps` critic updates with one generator update until
/// the stop rule fires or `max_steps` critic steps have run.
fn train_loop(model: &mut GanModel, data: &Dataset, cfg: &GanConfig) -> Result<TrainTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut batches = Batches::new(data.rows());
    let mut rule = StopRule::new(cfg);
    let mut records = Vec::new();
    let mut stopped = false;
    while !stopped && records.len() < cfg.max_steps {
        let mut done = 0;
        for _ in 0..cfg.critic_steps {
            if records.len() >= cfg.max_steps {
                break;
            }
            done += 1;
            let real = batches.next(data, cfg.batch_size, &mut rng)?;
            let s = critic_step(model, &real, cfg, &mut rng)?;
            stopped = rule.update(s.wasserstein);
            records.push(StepRecord {
                step: records.len() + 1,
                loss_d: s.loss_d,
                loss_g: None,
                wasserstein: s.wasserstein,
                gp: s.gp,
                ema: rule.value(),
            });
            if stopped {
                break;
            }
        }
        if !stopped && done == cfg.critic_steps {
            let g = generator_step(model, cfg, &mut rng)?;
            if let Some(last) = records.last_mut() {
                last.loss_g = Some(g);
            }
        }
    }
    Ok(TrainTrace {
        steps_to_stop: records.len(),
        stop_reason: if stopped {
            StopReason::Criterion
        } else {
            StopReason::MaxSteps
        },
        records,
    })
}

fn check_data(model: &GanModel, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.width != model.feature_dim {
        return Err(Error::ShapeMismatch(format!(
            "data width {} for feature width {}",
            data.width, model.feature_dim
        )));
    }
    Ok(())
}

/// Train a fresh model on normal traffic.
pub fn pretrain(mut model: GanModel, normal: &Dataset, cfg: &GanConfig) -> Result<(GanModel, TrainTrace)> {
    model.expect_phase(model.phase == Phase::Fresh, "fresh")?;
    cfg.validate()?;
    check_data(&model, normal)?;
    let trace = train_loop(&mut model, normal, cfg)?;
    model.phase = Phase::Pretrained;
    Ok((model, trace))
}

fn single_class(data: &Dataset) -> Result<usize> {
    let c = data.labels.first().copied().ok_or(Error::EmptyDataset)?;
    if data.labels.iter().any(|&l| l != c) {
        return Err(Error::KeyMismatch("fine-tune data must hold a single class".into()));
    }
    Ok(c)
}

fn tag_finetuned(model: &mut GanModel, data: &Dataset, class: usize) {
    model.phase = Phase::Finetuned {
        class,
        class_name: data.class_names[class].clone(),
    };
    model.class_names = data.class_names.clone();
    model.normal_class = data.normal_class;
}

/// Copy the pretrained weights (optimizer state reset) and train on one
/// minority class.
pub fn finetune(pretrained: &GanModel, minority: &Dataset, cfg: &GanConfig) -> Result<(GanModel, TrainTrace)> {
    pretrained.expect_phase(pretrained.phase == Phase::Pretrained, "pretrained")?;
    cfg.validate()?;
    check_data(pretrained, minority)?;
    let class = single_class(minority)?;
    let mut model = GanModel {
        generator: pretrained.generator.transfer(cfg),
        critic: pretrained.critic.transfer(cfg),
        ..pretrained.clone()
    };
    let trace = train_loop(&mut model, minority, cfg)?;
    tag_finetuned(&mut model, minority, class);
    Ok((model, trace))
}

/// The no-pretraining baseline: the same fine-tune loop from a fresh model.
pub fn finetune_from_scratch(
    fresh: GanModel,
    minority: &Dataset,
    cfg: &GanConfig,
) -> Result<(GanModel, TrainTrace)> {
    fresh.expect_phase(fresh.phase == Phase::Fresh, "fresh")?;
    cfg.validate()?;
    check_data(&fresh, minority)?;
    let class = single_class(minority)?;
    let mut model = fresh;
    let trace = train_loop(&mut model, minority, cfg)?;
    tag_finetuned(&mut model, minority, class);
    Ok((model, trace))
}
